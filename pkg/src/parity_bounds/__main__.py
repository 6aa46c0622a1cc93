"""Main application entry point."""

from parity_bounds.interfaces.cli import cli, main

__all__ = ["cli", "main"]

if __name__ == "__main__":
    main()
