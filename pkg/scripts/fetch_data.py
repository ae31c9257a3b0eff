#!/usr/bin/env python3
"""Download the UCI German credit and Adult census datasets and convert
them to the headered CSVs the shipped schemas expect.

Usage: python scripts/fetch_data.py [--dest data]

Needs network access to archive.ics.uci.edu. The converted files are
data/german.csv (1,000 rows) and data/adult.csv (48,842 rows; the
pipeline later drops the 3,620 rows containing "?").
"""

from __future__ import annotations

import argparse
import csv
import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

GERMAN_URL = f"{BASE}/statlog/german/german.data"
ADULT_URLS = (f"{BASE}/adult/adult.data", f"{BASE}/adult/adult.test")

GERMAN_HEADER = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings_status", "employment", "installment_rate",
    "personal_status", "other_parties", "residence_since",
    "property_magnitude", "age", "other_payment_plans", "housing",
    "existing_credits", "job", "num_dependents", "own_telephone",
    "foreign_worker", "class",
]

ADULT_HEADER = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def fetch(url: str) -> list[str]:
    print(f"fetching {url}")
    with urllib.request.urlopen(url) as resp:
        return resp.read().decode("utf-8").splitlines()


def write_german(dest: Path) -> None:
    rows = []
    for line in fetch(GERMAN_URL):
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != len(GERMAN_HEADER):
            raise SystemExit(f"unexpected german.data row: {line!r}")
        rows.append(fields)
    _write_csv(dest / "german.csv", GERMAN_HEADER, rows)


def write_adult(dest: Path) -> None:
    rows = []
    for url in ADULT_URLS:
        for line in fetch(url):
            line = line.strip()
            # adult.test opens with a "|1x3 Cross validator" banner and
            # suffixes every label with a period.
            if not line or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(ADULT_HEADER):
                raise SystemExit(f"unexpected adult row: {line!r}")
            fields[-1] = fields[-1].rstrip(".")
            rows.append(fields)
    _write_csv(dest / "adult.csv", ADULT_HEADER, rows)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data", help="output directory")
    args = parser.parse_args()
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    write_german(dest)
    write_adult(dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
