"""Shared fixtures: a small synthetic mixed-type dataset with a known
group skew, available raw (CSV + schema) and encoded.

The generator plants a strong dependence between the sensitive group
and both the label and the features, so fairness metrics start out
clearly outside the 80% band and debiasing has something to remove.
"""

from pathlib import Path

import numpy as np
import pytest

from tabfair import dataset as ds

SCHEMA_TEXT = """tabfair-schema 1
column x1 numerical
column x2 numerical
column color categorical
column shape categorical
column group sensitive privileged=B
column outcome label positive=yes
"""

COLUMNS = ["x1", "x2", "color", "shape", "group", "outcome"]


def synthetic_rows(n: int = 240, seed: int = 7) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    rows = []
    colors = ("red", "green", "blue")
    for _ in range(n):
        g = int(rng.random() < 0.5)
        base = 0.8 if g else -0.8
        x1 = rng.normal(base, 1.0)
        x2 = rng.normal(-base, 1.5)
        color = colors[int(rng.integers(0, 3))] if g else colors[int(rng.integers(0, 2))]
        shape = "circle" if rng.random() < (0.7 if g else 0.3) else "square"
        label = "yes" if rng.random() < (0.75 if g else 0.30) else "no"
        rows.append([f"{x1:.6f}", f"{x2:.6f}", color, shape, "B" if g else "A", label])
    return rows


def write_csv(path: Path, rows: list[list[str]], header=COLUMNS) -> Path:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def schema_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("schema") / "synthetic.schema"
    path.write_text(SCHEMA_TEXT, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def schema(schema_file):
    return ds.load_schema(schema_file)


@pytest.fixture(scope="session")
def csv_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synthetic.csv"
    return write_csv(path, synthetic_rows())


@pytest.fixture(scope="session")
def encoded(csv_file, schema) -> ds.EncodedDataset:
    return ds.encode(ds.load_csv(csv_file, schema), schema)
