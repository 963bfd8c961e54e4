"""Shipped run configurations, addressable by name."""
