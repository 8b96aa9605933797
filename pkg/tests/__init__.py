"""Tests for power-ch."""
