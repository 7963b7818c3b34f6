"""Word-piece tokenization and the transformer text encoder."""
