"""Dataset loading, outcomes, brand matching, slices and splits."""
