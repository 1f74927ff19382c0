"""Convert third-party landmark tables into the canonical ``id,label,x1,y1,...`` CSV.

Two input layouts are handled:

wide   one row per specimen; landmark columns named by ``--x-prefix``/``--y-prefix``
       followed by the landmark number (e.g. ``x1,y1,...`` or ``X_1,Y_1,...``)
long   one row per landmark with columns for specimen id, landmark index, x and y

Class labels may be strings; they are mapped to 0..C-1 in sorted order and the
names are written to ``classes.json`` next to the output.

For the published passion-flower leaf set (15 landmarks, 7 classes), export the
landmark table to CSV first, then for example::

    python scripts/convert_landmarks.py leaves.csv data/passiflora.csv \\
        --layout long --id-col image --label-col class --index-col landmark --x-col x --y-col y

Check the column names in the downloaded files; they are not fixed here.
"""
import argparse
import csv
import json
import re
import sys
from collections import defaultdict
from pathlib import Path

from shapekrrc.data import atomic_write_text, fmt_float


def _read(path):
    with open(path, encoding="utf-8-sig", newline="") as fh:
        return list(csv.DictReader(fh))


def wide_rows(rows, id_col, label_col, xp, yp):
    cols = rows[0].keys()
    idx = sorted(int(m.group(1)) for c in cols if (m := re.fullmatch(re.escape(xp) + r"(\d+)", c)))
    for j, r in enumerate(rows):
        rid = r[id_col] if id_col else str(j)
        yield rid, r[label_col], [(float(r[f"{xp}{i}"]), float(r[f"{yp}{i}"])) for i in idx]


def long_rows(rows, id_col, label_col, index_col, x_col, y_col):
    pts, labels, order = defaultdict(dict), {}, []
    for r in rows:
        rid = r[id_col]
        if rid not in labels:
            order.append(rid)
            labels[rid] = r[label_col]
        pts[rid][int(r[index_col])] = (float(r[x_col]), float(r[y_col]))
    for rid in order:
        yield rid, labels[rid], [pts[rid][i] for i in sorted(pts[rid])]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source")
    ap.add_argument("dest")
    ap.add_argument("--layout", choices=["wide", "long"], default="wide")
    ap.add_argument("--id-col")
    ap.add_argument("--label-col", required=True)
    ap.add_argument("--x-prefix", default="x")
    ap.add_argument("--y-prefix", default="y")
    ap.add_argument("--index-col", default="landmark")
    ap.add_argument("--x-col", default="x")
    ap.add_argument("--y-col", default="y")
    args = ap.parse_args()

    rows = _read(args.source)
    if not rows:
        sys.exit("no rows in source")
    if args.layout == "wide":
        recs = list(wide_rows(rows, args.id_col, args.label_col, args.x_prefix, args.y_prefix))
    else:
        if not args.id_col:
            sys.exit("--id-col is required for the long layout")
        recs = list(long_rows(rows, args.id_col, args.label_col, args.index_col, args.x_col, args.y_col))
    ks = {len(p) for _, _, p in recs}
    if len(ks) != 1:
        sys.exit(f"specimens have differing landmark counts: {sorted(ks)}")
    k = ks.pop()
    names = sorted({lab for _, lab, _ in recs})
    code = {n: i for i, n in enumerate(names)}

    lines = [",".join(["id", "label"] + [f"{a}{i}" for i in range(1, k + 1) for a in "xy"])]
    for rid, lab, pts in recs:
        lines.append(",".join([rid, str(code[lab])] + [fmt_float(v) for xy in pts for v in xy]))
    dest = Path(args.dest)
    atomic_write_text(dest, "\n".join(lines) + "\n")
    atomic_write_text(dest.with_name("classes.json"),
                      json.dumps({str(i): n for n, i in code.items()}, indent=2) + "\n")
    print(f"wrote {len(recs)} specimens, k={k}, {len(names)} classes to {dest}")


if __name__ == "__main__":
    main()
