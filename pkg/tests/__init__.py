"""Tests for pkgeo."""
