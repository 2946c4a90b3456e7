"""Tests for CI/CD utilities."""
