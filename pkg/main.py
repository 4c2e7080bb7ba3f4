"""
Entry point: python main.py <run|replicate|rates|validate> [flags]

Same as the `saddle-flow` console script.
"""

from saddle_flow.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
