"""Image backbone, thumbnail head, frame combiners, gradient maps and item statistics."""
