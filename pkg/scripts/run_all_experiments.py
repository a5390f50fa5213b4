#!/usr/bin/env python3
"""Run every example config at desk scale and collect CSVs under results/.

Pass --paper-scale to switch to the full-scale sampling settings (hours of
runtime). Individual runs can be reproduced with the gnndsim CLI directly,
e.g. `gnndsim gmi-sweep --config configs/gmi_sweep_4x4.cfg`.
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--paper-scale", action="store_true")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--only", default=None,
                        help="substring filter on config names")
    args = parser.parse_args()

    (ROOT / "results").mkdir(exist_ok=True)
    configs = sorted((ROOT / "configs").glob("*.cfg"))
    if args.only:
        configs = [c for c in configs if args.only in c.name]
    for cfg_path in configs:
        kind = next(line.split("=")[1].strip()
                    for line in cfg_path.read_text().splitlines()
                    if line.strip().startswith("kind"))
        cmd = [sys.executable, "-m", "gnndsim.cli", kind,
               "--config", str(cfg_path), "--threads", str(args.threads)]
        if args.paper_scale:
            cmd.append("--paper-scale")
        print(f"== {cfg_path.name}", flush=True)
        t = time.time()
        subprocess.run(cmd, check=True, cwd=ROOT)
        print(f"   done in {time.time() - t:.1f}s", flush=True)


if __name__ == "__main__":
    main()
