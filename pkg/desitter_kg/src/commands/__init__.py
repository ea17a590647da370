"""Subcommand groups of the ``dskg`` command line."""
