"""Run every bundled config through the CLI; one output directory per config.

usage: python3 scripts/run_configs.py OUT_DIR [--threads N]
"""

import argparse
import json
import time
from pathlib import Path

from planecover.cli import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    failed = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        command = json.loads(cfg.read_text())["command"]
        t0 = time.perf_counter()
        code = run([command, "--config", str(cfg), "--out", str(args.out / cfg.stem),
                    "--threads", str(args.threads)])
        print(f"{cfg.stem:32s} exit={code} {time.perf_counter() - t0:6.2f}s")
        failed += code != 0
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
