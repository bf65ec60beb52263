"""Module entry point for python -m sbpbox."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
