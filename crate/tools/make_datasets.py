#!/usr/bin/env python3
"""Build the canonical Tecator and Heart CSV files under data/.

Sources (both redistributed inside PyPI wheels, so no dataset portal access
is needed):

  * Tecator: R package `modeldata`, table `meats`, shipped in the
    `rdatasets` wheel as rdatasets/_data/modeldata/meats.pkl.compress
    (xz-compressed pandas pickle, 215 rows in the original StatLib order).
  * Heart (Cleveland): `Orange/datasets/heart_disease.tab` from the
    `orange3` wheel (303 rows, UCI processed Cleveland data).

Usage:
    python3 tools/make_datasets.py --rdatasets rdatasets-*.whl \
        --orange orange3-*.whl --out data/
"""

import argparse
import io
import json
import lzma
import pickle
import zipfile
from pathlib import Path

import pandas as pd


def fmt(v: float) -> str:
    return repr(float(v))


def tecator(wheel: Path, out: Path) -> None:
    raw = zipfile.ZipFile(wheel).read("rdatasets/_data/modeldata/meats.pkl.compress")
    df = pickle.loads(lzma.decompress(raw))
    spectra = [c for c in df.columns if c.startswith("x_")]
    assert len(spectra) == 100 and len(df) == 215
    names = [f"x{i:03d}" for i in range(1, 101)]
    # first 170 samples = training set, last 45 = independent test set
    for part, rows in (("train", df.iloc[:170]), ("test", df.iloc[170:])):
        with open(out / f"tecator_{part}.csv", "w") as fh:
            fh.write(",".join(names + ["fat"]) + "\n")
            for _, r in rows.iterrows():
                fh.write(",".join(fmt(r[c]) for c in spectra) + "," + fmt(r["fat"]) + "\n")
    schema = {"columns": [{"name": n, "kind": "numeric"} for n in names]
              + [{"name": "fat", "kind": "numeric", "role": "response"}]}
    (out / "tecator.schema.json").write_text(json.dumps(schema, indent=2) + "\n")


HEART_LEVELS = {
    "sex": ["male", "female"],
    "chestpain": ["abnang", "angina", "asympt", "notang"],
    "sugar": ["lt120", "ge120"],
    "ecg": ["hyper", "normal"],
    "angina": ["false", "true"],
    "slope": ["down", "flat", "up"],
    "thal": ["fix", "normal", "rev"],
    "class": ["healthy", "sick"],
}

HEART_ORDER = ["age", "sex", "chestpain", "bp", "chol", "sugar", "ecg",
               "maxhr", "angina", "oldpeak", "slope", "vessels", "thal", "class"]


def heart(wheel: Path, out: Path) -> None:
    raw = zipfile.ZipFile(wheel).read("Orange/datasets/heart_disease.tab").decode()
    df = pd.read_csv(io.StringIO(raw), sep="\t", skiprows=[1, 2], dtype=str)
    assert len(df) == 303
    keep = (df["major vessels colored"] != "?") & (df["thal"] != "?")
    # the four ST-T abnormal ECG records and one further record are also
    # dropped so the marginal counts reproduce the published 292-row table;
    # row 44 and row 184 are indistinguishable by those counts, 44 is used
    keep &= df["rest ECG"] != "ST-T abnormal"
    keep &= df.index != 44
    df = df[keep]
    assert len(df) == 292

    maps = {
        "sex": {"male": "male", "female": "female"},
        "chestpain": {"atypical ang": "abnang", "typical ang": "angina",
                      "asymptomatic": "asympt", "non-anginal": "notang"},
        "sugar": {"0": "lt120", "1": "ge120"},
        "ecg": {"left vent hypertrophy": "hyper", "normal": "normal"},
        "angina": {"0": "false", "1": "true"},
        "slope": {"downsloping": "down", "flat": "flat", "upsloping": "up"},
        "thal": {"fixed defect": "fix", "normal": "normal", "reversable defect": "rev"},
        "class": {"0": "healthy", "1": "sick"},
    }
    src = {
        "age": "age", "sex": "gender", "chestpain": "chest pain", "bp": "rest SBP",
        "chol": "cholesterol", "sugar": "fasting blood sugar > 120", "ecg": "rest ECG",
        "maxhr": "max HR", "angina": "exerc ind ang", "oldpeak": "ST by exercise",
        "slope": "slope peak exc ST", "vessels": "major vessels colored", "thal": "thal",
        "class": "diameter narrowing",
    }
    with open(out / "heart.csv", "w") as fh:
        fh.write(",".join(HEART_ORDER) + "\n")
        for _, r in df.iterrows():
            cells = []
            for name in HEART_ORDER:
                v = r[src[name]].strip()
                cells.append(maps[name][v] if name in maps else fmt(float(v)))
            fh.write(",".join(cells) + "\n")

    cols = []
    for name in HEART_ORDER:
        if name == "class":
            cols.append({"name": name, "kind": "categorical", "levels": HEART_LEVELS[name],
                         "role": "class"})
        elif name in HEART_LEVELS:
            cols.append({"name": name, "kind": "categorical", "levels": HEART_LEVELS[name]})
        else:
            cols.append({"name": name, "kind": "numeric"})
    (out / "heart.schema.json").write_text(json.dumps({"columns": cols}, indent=2) + "\n")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rdatasets", type=Path, required=True)
    ap.add_argument("--orange", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("data"))
    a = ap.parse_args()
    a.out.mkdir(parents=True, exist_ok=True)
    tecator(a.rdatasets, a.out)
    heart(a.orange, a.out)


if __name__ == "__main__":
    main()
