"""Application layer initialization."""
