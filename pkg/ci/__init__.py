"""CI utilities."""
