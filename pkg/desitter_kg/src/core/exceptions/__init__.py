"""Exception package for the de Sitter Klein-Gordon toolkit."""
