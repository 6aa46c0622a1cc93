"""Repository interfaces used by the application layer."""

from pathlib import Path
from typing import Protocol

from .models import Fixture, Problem


class IFixtureRepository(Protocol):
    """Interface for built-in problems with known expected values."""

    def names(self) -> list[str]:
        """Names accepted by ``get``."""
        ...

    def get(self, name: str) -> Fixture:
        """Build the named fixture."""
        ...


class IProblemRepository(Protocol):
    """Interface for problems stored as documents."""

    def load(self, path: Path) -> Problem:
        """Read and validate the problem stored at ``path``."""
        ...
