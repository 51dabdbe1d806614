#!/usr/bin/env python3
"""Fetch the UCI Wine data set into data/wine.data.

Output layout matches the UCI file: no header, class label (1..3) in the
first column, followed by the 13 numeric attributes.

Tries the UCI archive first and falls back to the copy bundled with
scikit-learn when the network is unavailable.
"""
import os
import sys
import urllib.request

UCI_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/wine/wine.data"
OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "wine.data")


def from_uci():
    with urllib.request.urlopen(UCI_URL, timeout=20) as resp:
        return resp.read().decode("utf-8")


def from_sklearn():
    import sklearn.datasets as ds

    path = os.path.join(os.path.dirname(ds.__file__), "data", "wine_data.csv")
    lines = []
    with open(path) as fh:
        next(fh)  # n_samples,n_features,class names
        for row in fh:
            cells = row.strip().split(",")
            if len(cells) != 14:
                continue
            label = int(cells[-1]) + 1
            lines.append(",".join([str(label)] + cells[:-1]))
    return "\n".join(lines) + "\n"


def main():
    try:
        text = from_uci()
        source = "uci"
    except Exception as err:  # noqa: BLE001
        print(f"UCI download failed ({err}); using scikit-learn copy", file=sys.stderr)
        text = from_sklearn()
        source = "sklearn"
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as fh:
        fh.write(text)
    n = sum(1 for line in text.splitlines() if line.strip())
    print(f"wrote {os.path.normpath(OUT)} ({n} rows, source={source})")


if __name__ == "__main__":
    main()
