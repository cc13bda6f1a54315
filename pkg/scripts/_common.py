"""Shared helper: run one CLI command with an inline config document."""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from cascadewave.cli import main


def run(command, doc, default_out):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=default_out)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "config.json"
        cfg.write_text(json.dumps(doc))
        code = main([command, "--config", str(cfg), "--out", args.out, "--seed", str(args.seed),
                     "--threads", str(args.threads), "--format", args.format])
    if code == 0:
        print(f"wrote {args.out}")
    sys.exit(code)
