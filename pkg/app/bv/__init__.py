"""Grid-discretised BV geometry on the Heisenberg group."""
