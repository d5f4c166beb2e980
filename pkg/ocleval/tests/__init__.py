"""Tests for ocleval."""
