#!/usr/bin/env python3
"""Regenerate the UCI CSVs under data/ from the KEEL copies shipped in the
`keel-ds` Python package (pip install keel-ds, or pass the downloaded wheel).

  pima.csv        Pima Indians Diabetes (768 rows)
  liver.csv       BUPA Liver Disorders (345 rows)
  wdbc.csv        Breast Cancer Wisconsin, Diagnostic (569 rows)
  vehicle.csv     Statlog Vehicle Silhouettes (846 rows, 4 classes)
  sonar.csv       Sonar, Mines vs. Rocks (208 rows)
  ionosphere.csv  Ionosphere (351 rows)
  wine.csv        Wine (178 rows, 3 classes)
  haberman.csv    Haberman's Survival (306 rows)

Every output file has a header row and the class label in the last column.
Usage: prepare_uci_data.py [--source WHEEL_OR_PACKAGE_DIR] [--out DIR]
"""
import argparse
import csv
import pathlib
import zipfile

DATASETS = {
    "pima": "balanced/raw/pima.dat",
    "liver": "balanced/raw/bupa.dat",
    "wdbc": "balanced/raw/wdbc.dat",
    "vehicle": "balanced/raw/vehicle.dat",
    "sonar": "balanced/raw/sonar.dat",
    "ionosphere": "balanced/raw/ionosphere.dat",
    "wine": "balanced/raw/wine.dat",
    "haberman": "imbalanced/raw/haberman.dat",
}


def reader_for(source):
    if source is None:
        import keel_ds
        source = pathlib.Path(keel_ds.__file__).parent
    source = pathlib.Path(source)
    if source.suffix == ".whl":
        wheel = zipfile.ZipFile(source)
        return lambda rel: wheel.read(f"keel_ds/data/{rel}").decode()
    return lambda rel: (source / "data" / rel).read_text()


def parse_keel(text):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([field.strip() for field in line.split(",")])
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--source", help="keel_ds wheel or installed package directory")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).parents[1] / "data")
    args = ap.parse_args()
    read = reader_for(args.source)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, rel in DATASETS.items():
        rows = parse_keel(read(rel))
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise SystemExit(f"{name}: ragged rows")
        header = [f"x{i + 1}" for i in range(width - 1)] + ["class"]
        path = args.out / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        print(f"{path}: {len(rows)} rows, {width - 1} features")


if __name__ == "__main__":
    main()
