# Signal ingestion and feature extraction
