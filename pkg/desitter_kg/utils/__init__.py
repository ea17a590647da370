"""Utility package for the de Sitter Klein-Gordon toolkit."""
