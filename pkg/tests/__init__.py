"""Tests for the dhvae package."""
