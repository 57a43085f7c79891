"""Collocation, KKT and solver services."""
