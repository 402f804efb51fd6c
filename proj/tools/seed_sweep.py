#!/usr/bin/env python3
"""Run a campaign for each seed in a range and tabulate the orderings.

Usage: seed_sweep.py <wdrc binary> <config> <first> <last> [--runs N]
"""
import argparse
import json
import subprocess
import tempfile
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("binary")
    ap.add_argument("config")
    ap.add_argument("first", type=int)
    ap.add_argument("last", type=int)
    ap.add_argument("--runs", type=int, default=None)
    args = ap.parse_args()

    wins = 0
    total = 0
    print("seed,lambda,wdrc_mean,lqg_mean,wdrc_std,lqg_std,z_mean,z_std,both")
    with tempfile.TemporaryDirectory() as tmp:
        for seed in range(args.first, args.last + 1):
            out = Path(tmp) / str(seed)
            cmd = [args.binary, "simulate", "--config", args.config, "--seed", str(seed), "--out", str(out)]
            if args.runs:
                cmd += ["--runs", str(args.runs)]
            subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
            s = json.loads((out / "summary.json").read_text())
            z = s["paired_z"]
            ok = (s["wdrc"]["mean"] < s["lqg"]["mean"] and s["wdrc"]["std_dev"] < s["lqg"]["std_dev"]
                  and z["mean"] > 2 and z["std_dev"] > 2)
            wins += ok
            total += 1
            print(f'{seed},{s["lambda"]:.4f},{s["wdrc"]["mean"]:.4f},{s["lqg"]["mean"]:.4f},'
                  f'{s["wdrc"]["std_dev"]:.4f},{s["lqg"]["std_dev"]:.4f},{z["mean"]:.2f},{z["std_dev"]:.2f},{int(ok)}',
                  flush=True)
    print(f"# both orderings with z > 2: {wins}/{total}")


if __name__ == "__main__":
    main()
