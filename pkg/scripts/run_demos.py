#!/usr/bin/env python3
"""Run every bundled demo scenario and summarize the outcomes."""

import argparse
import sys

from apfp.cli import DEMOS, main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    failures = []
    for name in sorted(DEMOS):
        print(f"--- demo {name} ---")
        code = cli_main(["demo", "--name", name, "--seed", str(args.seed)])
        if code != 0:
            failures.append(name)
    if failures:
        print(f"failed: {', '.join(failures)}")
        return 1
    print("all demos passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
