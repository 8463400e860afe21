"""Device-attribute ingestion and policy-template generation."""
