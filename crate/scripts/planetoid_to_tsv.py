#!/usr/bin/env python3
"""Convert a Planetoid citation dataset into the svga TSV layout.

Reads the pickled `ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}` files
and writes `<out>/<name>/{edges,features,labels}.tsv`:

    python3 scripts/planetoid_to_tsv.py --raw path/to/planetoid/data --name cora --out data

Node ids follow the usual Planetoid reordering: training and unlabeled
nodes first, then the test nodes at their `test.index` positions. Citeseer
lists test ids that have no feature row; those nodes get all-zero features
and label 0, and are kept so that the edge list stays intact.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def read_planetoid(raw: Path, name: str):
    x, y, tx, ty, allx, ally, graph = (load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    ordered = np.sort(test_idx)

    span = np.arange(ordered.min(), ordered.max() + 1)
    tx_full = sp.lil_matrix((len(span), tx.shape[1]))
    tx_full[ordered - ordered.min(), :] = tx
    ty_full = np.zeros((len(span), ty.shape[1]))
    ty_full[ordered - ordered.min(), :] = ty

    features = sp.vstack((allx, tx_full)).tolil()
    features[test_idx, :] = features[ordered, :]
    labels = np.vstack((ally, ty_full))
    labels[test_idx, :] = labels[ordered, :]

    n = features.shape[0]
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))
    return sp.csr_matrix(features), labels.argmax(axis=1), sorted(edges)


def write_tsv(out: Path, features, labels, edges) -> None:
    out.mkdir(parents=True, exist_ok=True)
    n, m = features.shape
    values = features.data
    binary = bool(np.all((values == 0) | (values == 1)))
    kind = "binary" if binary else "continuous"
    with open(out / "edges.tsv", "w") as f:
        for u, v in edges:
            f.write(f"{u}\t{v}\n")
    with open(out / "features.tsv", "w") as f:
        f.write(f"{n}\t{m}\t{kind}\nsparse\n")
        coo = features.tocoo()
        for i, j, v in sorted(zip(coo.row, coo.col, coo.data)):
            if v != 0:
                f.write(f"{i}\t{j}\t{int(v) if binary else repr(float(v))}\n")
    with open(out / "labels.tsv", "w") as f:
        for i, c in enumerate(labels):
            f.write(f"{i}\t{c}\n")
    print(f"{out}: {n} nodes, {len(edges)} edges, {m} {kind} features", file=sys.stderr)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--raw", type=Path, required=True, help="directory holding the ind.<name>.* files")
    ap.add_argument("--name", required=True, help="dataset name, e.g. cora, citeseer or pubmed")
    ap.add_argument("--out", type=Path, default=Path("data"), help="parent of the output directory")
    args = ap.parse_args()
    features, labels, edges = read_planetoid(args.raw, args.name)
    write_tsv(args.out / args.name, features, labels, edges)


if __name__ == "__main__":
    main()
