"""Infrastructure layer initialization."""
