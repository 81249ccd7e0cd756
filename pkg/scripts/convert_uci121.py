"""Convert the 121-dataset UCI benchmark collection into harness CSV files.

Expected input layout (the widely mirrored ``data.tar.gz`` of that collection,
unpacked)::

    <root>/<name>/<name>_R.dat     tab-separated, header row, first column is a
                                   row index, last column ``clase`` is the
                                   integer class label

Other files in each directory (``conxuntos*.dat`` partition indices, raw UCI
files) are ignored: the harness builds its own stratified folds.

Output: ``<out>/<name>.csv``, comma-separated, no header, label last, ready for
``intrvfl bench --dataset-dir <out>``.  Nothing is downloaded.
"""
import argparse
import csv
import sys
from pathlib import Path


def convert(src, dst):
    with open(src, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    header, body = rows[0], [r for r in rows[1:] if r]
    if header[-1].strip() != "clase":
        raise ValueError(f"{src}: last column is {header[-1]!r}, expected 'clase'")
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in body:
            w.writerow([v.strip() for v in r[1:]])
    return len(body)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("root", type=Path)
    ap.add_argument("out", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    found = sorted(args.root.glob("*/*_R.dat"))
    if not found:
        sys.exit(f"no <name>/<name>_R.dat files under {args.root}")
    for src in found:
        name = src.parent.name
        n = convert(src, args.out / f"{name}.csv")
        print(f"{name}: {n} rows")


if __name__ == "__main__":
    main()
