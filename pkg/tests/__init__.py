"""Tests for the racing package."""
