"""HTTP service wrapping the pipeline stages."""
