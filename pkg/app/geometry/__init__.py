"""Heisenberg group arithmetic and sub-Riemannian geometry."""
