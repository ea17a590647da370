"""Tests for the de Sitter Klein-Gordon toolkit."""
