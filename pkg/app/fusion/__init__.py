"""Combined model: feature matrix, linear family and importance."""
