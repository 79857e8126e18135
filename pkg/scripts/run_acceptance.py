#!/usr/bin/env python3
"""Run the pinned-seed verification battery and write a JSON summary.

Usage: python scripts/run_acceptance.py [--out results.json]
Exits nonzero if any criterion fails.
"""

import argparse
import json
import sys

from liestoch import acceptance


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="acceptance_results.json")
    args = parser.parse_args()

    results = acceptance.run_all()
    payload = {
        "schema": 1,
        "criteria": [
            {
                "name": r.name,
                "passed": r.passed,
                "details": r.details,
                "runtime_seconds": round(r.seconds, 2),
            }
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = sum(not r.passed for r in results)
    print(f"\n{len(results) - failed}/{len(results)} criteria passed; "
          f"summary written to {args.out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
