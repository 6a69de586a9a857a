"""Run every bundled fixture with its acceptance check and print a status table.

Usage: python3 scripts/run_fixtures.py [--out runs/fixtures] [--tasks N]
"""

import argparse
import logging
import time
from pathlib import Path

from cellhom.cli import list_fixtures, load_fixture, run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/fixtures"))
    p.add_argument("--tasks", type=int, default=None)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")

    failures = 0
    print(f"{'fixture':28s} {'command':22s} {'exit':>4s} {'check':>6s} {'wall_s':>7s}")
    for name in list_fixtures():
        cfg = load_fixture(name)
        t0 = time.perf_counter()
        res = run(cfg, args.out / name, args.tasks, check=True)
        wall = time.perf_counter() - t0
        chk = (res.summary or {}).get("check_passed")
        failures += res.exit_code != 0
        print(f"{name:28s} {cfg['command']:22s} {res.exit_code:4d} {str(chk):>6s} {wall:7.2f}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
