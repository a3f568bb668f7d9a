"""Full desk-scale demo: simulate, mask, three reconstructions, comparisons.

    python scripts/run_paper_demo.py [--output DIR] [--section.key=value ...]

Uses the bundled default config; extra arguments are passed to the CLI.
"""
import sys
from importlib import resources

from sawmbir.cli import run

if __name__ == "__main__":
    config = resources.files("sawmbir") / "data" / "paper_demo.ini"
    with resources.as_file(config) as path:
        sys.exit(run(["paper-demo", "--config", str(path), *sys.argv[1:]]))
