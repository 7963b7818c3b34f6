"""Regression engine for the interpretation equations."""
