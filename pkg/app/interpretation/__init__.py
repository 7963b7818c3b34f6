"""Two-step interpretation engine."""
