"""Radau pseudospectral optimal-control solver package."""
