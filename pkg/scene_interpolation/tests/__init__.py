"""Tests for scene interpolation."""
