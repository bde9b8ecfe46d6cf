"""Tests for socheck."""
