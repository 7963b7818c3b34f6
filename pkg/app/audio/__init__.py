"""Audio front end, moment classifier and attention sequence model."""
