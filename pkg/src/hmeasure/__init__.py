"""Intrinsic measure theory on the Heisenberg group."""
