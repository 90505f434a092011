"""Command line surface: one click command per experiment, plus config-file runs."""
