"""Numeric and text helpers."""
