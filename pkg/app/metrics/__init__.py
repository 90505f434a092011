"""Finite metric spaces, cut metrics and L1 distortion."""
