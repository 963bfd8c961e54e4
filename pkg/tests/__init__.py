"""Test suite for pfnn."""
