#!/usr/bin/env python3
"""Download and prepare the UCI Adult (census income) dataset.

Produces data/adult_train.csv and data/adult_test.csv with min-max scaled
continuous columns, one-hot categorical columns, and a trailing `label`
column valued 1 (>50K) or -1 (<=50K).  The majority class is downsampled so
both splits are class-balanced (15,682 train / 7,692 test rows, 57 feature
columns), and the downsample is seeded so reruns are byte-identical.

The exact encoding layout used by prior work on this dataset is not public;
the column choice below reproduces the published row counts and feature
count, but table-level numbers remain approximate.
"""

import argparse
import csv
import random
import sys
import urllib.request
from pathlib import Path

BASE_URLS = [
    "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/",
    "https://raw.githubusercontent.com/jbrownlee/Datasets/master/",
]
FILES = {"adult.data": "adult_raw_train", "adult.test": "adult_raw_test"}

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]
# 4 continuous + 53 one-hot columns = 57 features
CONTINUOUS = ["age", "capital_gain", "capital_loss", "hours_per_week"]
CATEGORICAL = ["workclass", "education", "marital_status", "occupation", "relationship"]


def fetch(name: str, raw_dir: Path) -> Path:
    out = raw_dir / name
    if out.exists() and out.stat().st_size > 0:
        return out
    last_err = None
    for base in BASE_URLS:
        url = base + ("adult.csv" if "jbrownlee" in base and name == "adult.data" else name)
        if "jbrownlee" in base and name == "adult.test":
            continue  # mirror only carries the train split
        try:
            print(f"downloading {url}")
            with urllib.request.urlopen(url, timeout=60) as resp:
                out.write_bytes(resp.read())
            return out
        except Exception as e:  # noqa: BLE001 - report the last failure below
            last_err = e
    raise SystemExit(f"error: could not download {name}: {last_err}")


def read_rows(path: Path):
    rows = []
    with path.open(newline="") as fh:
        for rec in csv.reader(fh):
            if len(rec) != len(COLUMNS):
                continue  # blank lines and the test split's header sentinel
            rec = [f.strip().rstrip(".") for f in rec]
            if rec[0] == "age":
                continue
            rows.append(dict(zip(COLUMNS, rec)))
    return rows


def balance(rows, seed: int):
    pos = [r for r in rows if r["income"] == ">50K"]
    neg = [r for r in rows if r["income"] == "<=50K"]
    keep = min(len(pos), len(neg))
    rng = random.Random(seed)
    pos = pos if len(pos) == keep else rng.sample(pos, keep)
    neg = neg if len(neg) == keep else rng.sample(neg, keep)
    merged = pos + neg
    rng.shuffle(merged)
    return merged


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data", help="where the prepared CSVs go")
    ap.add_argument("--seed", type=int, default=0, help="downsampling seed")
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    raw_dir = out_dir / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)

    train_rows = balance(read_rows(fetch("adult.data", raw_dir)), args.seed)
    test_rows = balance(read_rows(fetch("adult.test", raw_dir)), args.seed + 1)
    print(f"balanced rows: train={len(train_rows)} test={len(test_rows)}")

    # category lists and scaling ranges come from the training split only
    categories = {
        c: sorted({r[c] for r in train_rows}) for c in CATEGORICAL
    }
    lo = {c: min(float(r[c]) for r in train_rows) for c in CONTINUOUS}
    hi = {c: max(float(r[c]) for r in train_rows) for c in CONTINUOUS}

    header = list(CONTINUOUS)
    for c in CATEGORICAL:
        header += [f"{c}={v}" for v in categories[c]]
    header.append("label")
    print(f"feature columns: {len(header) - 1}")

    def encode(row):
        vals = []
        for c in CONTINUOUS:
            span = hi[c] - lo[c]
            v = (float(row[c]) - lo[c]) / span if span > 0 else 0.0
            vals.append(f"{min(1.0, max(0.0, v)):.6f}")
        for c in CATEGORICAL:
            one = row[c]
            vals += ["1" if v == one else "0" for v in categories[c]]
        vals.append("1" if row["income"] == ">50K" else "-1")
        return vals

    for name, rows in (("adult_train.csv", train_rows), ("adult_test.csv", test_rows)):
        path = out_dir / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow(encode(r))
        print(f"wrote {path} ({len(rows)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
