"""Write the small benchmark datasets used by the trend check to data/*.csv.

Sources: scikit-learn's bundled iris and wine tables, MASS::fgl (UCI glass)
and MASS::crabs from the ``pydataset`` sdist, and the ``palmerpenguins`` wheel.
The two archives are fetched with ``pip download --no-deps pydataset
palmerpenguins`` into ``--archives``.

Output format: comma-separated, no header, label in the last column.
"""
import argparse
import csv
import io
import tarfile
import zipfile
from pathlib import Path

from sklearn import datasets


def _write(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def _sklearn_rows(loader):
    bunch = loader()
    return [list(map(repr, map(float, x))) + [str(int(y))] for x, y in zip(bunch.data, bunch.target)]


def _rdata_csv(archive, member):
    with tarfile.open(archive) as outer:
        inner = outer.extractfile("pydataset-0.2.0/pydataset/resources.tar.gz")
        with tarfile.open(fileobj=io.BytesIO(inner.read())) as res:
            text = res.extractfile(f"resources/rdata/csv/{member}").read().decode()
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--archives", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    _write(args.out / "iris.csv", _sklearn_rows(datasets.load_iris))
    _write(args.out / "wine.csv", _sklearn_rows(datasets.load_wine))

    pyds = next(args.archives.glob("pydataset-*.tar.gz"))
    _, body = _rdata_csv(pyds, "MASS/fgl.csv")
    _write(args.out / "glass.csv", [r[1:] for r in body])
    _, body = _rdata_csv(pyds, "MASS/crabs.csv")
    # class = species x sex; the running index column is dropped
    _write(args.out / "crabs.csv", [r[4:] + [r[1] + r[2]] for r in body])

    wheel = next(args.archives.glob("palmerpenguins-*.whl"))
    with zipfile.ZipFile(wheel) as z:
        text = z.read("palmerpenguins/data/penguins.csv").decode()
    rows = list(csv.DictReader(io.StringIO(text)))
    cols = ["bill_length_mm", "bill_depth_mm", "flipper_length_mm", "body_mass_g"]
    keep = [r for r in rows if all(r[c] not in ("", "NA") for c in cols)]
    _write(args.out / "penguins.csv", [[r[c] for c in cols] + [r["species"]] for r in keep])


if __name__ == "__main__":
    main()
