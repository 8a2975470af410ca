"""Module entry point for `python -m mixed_mfa`.

Use absolute imports so the module also runs without package context.
"""

from mixed_mfa.cli import main

if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
