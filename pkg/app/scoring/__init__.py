"""Practitioner scores and branded-content variance decomposition."""
