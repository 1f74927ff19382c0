"""Full benchmark: 60/40 split, n_i in 10..100, 20 replicates, default grids.

Runs on a landmark CSV if one is given, otherwise on the 7-class synthetic set.

    python scripts/run_benchmark.py --out runs/synth
    python scripts/run_benchmark.py --input data/passiflora.csv --out runs/leaves --workers 4
"""
import argparse
import sys
import tempfile
from pathlib import Path

from shapekrrc import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--input")
    ap.add_argument("--out", required=True)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--methods", default="vwg-krrc,fpg-krrc,rie-krrc,naive-rrc")
    ap.add_argument("--resume", action="store_true")
    args = ap.parse_args()

    src = args.input
    if src is None:
        src = str(Path(tempfile.mkdtemp()) / "synth.csv")
        code = cli.main(["synth", "--output", src])
        if code:
            return code
    argv = ["benchmark", "--input", src, "--output", args.out, "--workers", str(args.workers),
            "--method", args.methods]
    if args.resume:
        argv.append("--resume")
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
