"""Run the acceptance criteria and print one PASS/FAIL line each.

    python scripts/run_acceptance.py            # all eight, criterion 6 takes about a minute
    python scripts/run_acceptance.py --fast     # skip the slow end-to-end run
"""

import argparse
import sys
from pathlib import Path

import pytest


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fast", action="store_true", help="skip tests marked slow")
    args = ap.parse_args()
    target = str(Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py")
    argv = [target, "-q", "-p", "no:cacheprovider"]
    if args.fast:
        argv += ["-m", "not slow"]
    return int(pytest.main(argv))


if __name__ == "__main__":
    sys.exit(main())
