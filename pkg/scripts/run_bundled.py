"""Run every bundled scenario through the CLI and print its summary line."""
import argparse
import json
import time
from pathlib import Path

from kgbohm.cli import main as cli_main
from kgbohm.config import bundled_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    for name in bundled_scenarios():
        out = Path(args.out) / name
        t0 = time.perf_counter()
        code = cli_main(["run", name, "--workers", str(args.workers), "--out", str(out)])
        dt = time.perf_counter() - t0
        claim = json.loads((out / "summary.json").read_text())["claim"] if code == 0 else ""
        print(f"[{name}] exit {code} in {dt:.1f}s: {claim}")


if __name__ == "__main__":
    main()
