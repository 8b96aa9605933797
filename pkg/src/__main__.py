"""Run the power-ch command line as python -m src."""

from .main import run

if __name__ == "__main__":
    raise SystemExit(run())
