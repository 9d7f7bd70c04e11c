"""Tests for the half-trek identifiability package."""
