"""Module entry point so `python -m asep_exact` matches the asep-exact script."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
