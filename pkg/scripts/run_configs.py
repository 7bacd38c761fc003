"""Run every shipped config through the CLI and report wall time.

    python3 scripts/run_configs.py [--outdir results] [--budget 300]
"""
import argparse
import sys
import time
from pathlib import Path

from qdiode import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--outdir", default=str(ROOT / "results"))
    ap.add_argument("--budget", type=float, default=300.0, help="seconds allowed per config")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for cfg_path in sorted((ROOT / "configs").glob("*.cfg")):
        cfg = cli.load_config(str(cfg_path))
        target = out / f"{cfg_path.stem}.{cfg.format}"
        start = time.perf_counter()
        code = cli.main([cfg.command, "--config", str(cfg_path), "--out", str(target)])
        elapsed = time.perf_counter() - start
        ok = code == 0 and elapsed < args.budget
        failed += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {cfg_path.name:18s} {cfg.command:17s} "
              f"exit={code} {elapsed:7.2f}s -> {target.relative_to(out.parent)}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
