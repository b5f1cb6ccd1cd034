"""Convert Planetoid ``ind.<name>.*`` pickles into the TSV dataset layout.

Writes ``<out>/<name>/{edges,features,labels}.tsv``. The usual semi-supervised
split is kept: the ``y`` rows are train, the next 500 are val, and
``test.index`` lists the test nodes. Citeseer has test indices with no
feature row; those nodes get all-zero features and no label.

The pickles hold scipy.sparse matrices, so unpickling needs scipy installed.
"""
import argparse
import pickle
import sys
from pathlib import Path

import numpy as np

PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def _dense(m):
    return np.asarray(m.toarray() if hasattr(m, "toarray") else m, dtype=np.float64)


def load_planetoid(raw_dir, name):
    raw_dir = Path(raw_dir)
    obj = {}
    for part in PARTS:
        with open(raw_dir / f"ind.{name}.{part}", "rb") as fh:
            obj[part] = pickle.load(fh, encoding="latin1")
    test_idx = [int(line) for line in (raw_dir / f"ind.{name}.test.index").read_text().split()]

    y = np.asarray(obj["y"])
    tx, ty = _dense(obj["tx"]), np.asarray(obj["ty"])
    allx, ally = _dense(obj["allx"]), np.asarray(obj["ally"])

    # tx row k belongs to node test_idx[k]; nodes inside the index range that
    # appear in neither block keep zero features and no label
    test_idx = np.asarray(test_idx)
    n = max(allx.shape[0], int(test_idx.max()) + 1)
    features = np.zeros((n, allx.shape[1]))
    onehot = np.zeros((n, ally.shape[1]))
    features[:allx.shape[0]], onehot[:ally.shape[0]] = allx, ally
    features[test_idx], onehot[test_idx] = tx, ty

    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)
    split = np.full(n, "", dtype=object)
    n_train = len(y)
    split[:n_train] = "train"
    split[n_train:n_train + 500] = "val"
    split[test_idx] = "test"

    edges = set()
    for src, nbrs in obj["graph"].items():
        for dst in nbrs:
            if src != dst and src < n and dst < n:
                edges.add((min(src, dst), max(src, dst)))
    return features, labels, split, sorted(edges)


def _fmt(v):
    short = f"{v:g}"
    return short if float(short) == v else repr(float(v))


def write_tsv(out_dir, features, labels, split, edges, rescale=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if rescale:
        hi = features.max(axis=0)
        features = features / np.where(hi > 0, hi, 1.0)
    with open(out_dir / "edges.tsv", "w") as fh:
        for a, b in edges:
            fh.write(f"{a}\t{b}\n")
    with open(out_dir / "features.tsv", "w") as fh:
        for i, row in enumerate(features):
            fh.write(f"{i}\t" + ",".join(_fmt(v) for v in row) + "\n")
    with open(out_dir / "labels.tsv", "w") as fh:
        for i, (c, s) in enumerate(zip(labels, split)):
            if c >= 0 and s:
                fh.write(f"{i}\t{c}\t{s}\n")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("raw_dir", help="directory holding ind.<name>.* files")
    p.add_argument("name", help="cora, citeseer or pubmed")
    p.add_argument("--out", default="data")
    p.add_argument("--rescale", action="store_true", help="scale each feature column by its maximum")
    args = p.parse_args(argv)
    features, labels, split, edges = load_planetoid(args.raw_dir, args.name)
    write_tsv(Path(args.out) / args.name, features, labels, split, edges, args.rescale)
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features")
    return 0


if __name__ == "__main__":
    sys.exit(main())
