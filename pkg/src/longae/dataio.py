"""Dataset ingestion, split files, checkpoints and reports.

Text formats (UTF-8, ``#`` comments and blank lines ignored):

* edges:    ``src<TAB>dst``
* features: ``node_id<TAB>v1,v2,...,vF``
* labels:   ``node_id<TAB>class_name<TAB>split`` with split in train/val/test/none
* splits:   ``seed=<u64>`` and ``protocol=<name>`` header lines, then
            ``[train_observed] [val_pos] [val_neg] [test_pos] [test_neg]``
            sections of ``i<TAB>j<TAB>value`` lines (node indices)
* reports:  ``key=value`` lines; score tables ``i<TAB>j<TAB>score``

Checkpoints are little-endian binary: 8-byte magic, u32 version, six u32
header fields (in_dim, hidden, latent, n_classes, n_nodes, flags), u32
length + UTF-8 JSON metadata, then float32 tensors in the order
V, W, b1, b2, b3, b4, [U, b5], [V_dec, W_dec].
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import (PRESENT, SPLIT_NAMES, SPLIT_NONE, EdgeSplit, FeatureMatrix, LabelSet,
                    build_adjacency)
from .model import ModelParams


class DataError(Exception):
    """Malformed or inconsistent input data."""

    def __init__(self, msg, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + msg)
        self.path = path
        self.line = line


class CheckpointError(DataError):
    code = "checkpoint"


class BadMagicError(CheckpointError):
    code = "bad_magic"


class VersionError(CheckpointError):
    code = "bad_version"


class TruncatedError(CheckpointError):
    code = "truncated"


class DimensionMismatchError(CheckpointError):
    code = "dimension_mismatch"


@dataclass
class DatasetBundle:
    node_ids: list
    adjacency: object
    features: FeatureMatrix = None
    labels: LabelSet = None
    stats: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.adjacency.n

    def index_of(self, node_id):
        if not hasattr(self, "_index"):
            self._index = {name: i for i, name in enumerate(self.node_ids)}
        try:
            return self._index[node_id]
        except KeyError:
            raise DataError(f"unknown node id {node_id!r}") from None


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def dataset_stats(adj, features=None, labels=None):
    n = adj.n
    present = adj.count(PRESENT)
    absent = adj.count(0)
    stats = {
        "nodes": n,
        "edges": present // 2,
        "average_degree": present / n if n else 0.0,
        "imbalance_ratio": absent / present if present else float("inf"),
        "features": features.f if features is not None else 0,
    }
    if labels is not None:
        stats["classes"] = len(labels.classes)
        stats["label_rate"] = int(labels.train_mask.sum()) / n
    return stats


def load_dataset(edge_path, feature_path=None, label_path=None, rescale=False):
    """Read the text formats above into a ``DatasetBundle``.

    Node indices follow first appearance: edge file first, then the feature
    file. Labels may not introduce new nodes.
    """
    index = {}
    node_ids = []

    def idx(name):
        if name not in index:
            index[name] = len(node_ids)
            node_ids.append(name)
        return index[name]

    edges = []
    for lineno, line in _lines(edge_path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DataError("expected 'src<TAB>dst'", edge_path, lineno)
        a, b = idx(parts[0]), idx(parts[1])
        if a != b:
            edges.append((a, b))

    feat_rows = {}
    n_feat = None
    if feature_path is not None:
        for lineno, line in _lines(feature_path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError("expected 'node_id<TAB>v1,...,vF'", feature_path, lineno)
            try:
                vals = [float(v) for v in parts[1].split(",")] if parts[1] else []
            except ValueError:
                raise DataError("non-numeric feature value", feature_path, lineno) from None
            if n_feat is None:
                n_feat = len(vals)
            elif len(vals) != n_feat:
                raise DataError(f"expected {n_feat} features, got {len(vals)}", feature_path, lineno)
            i = idx(parts[0])
            if i in feat_rows:
                raise DataError(f"duplicate features for node {parts[0]!r}", feature_path, lineno)
            feat_rows[i] = vals

    n = len(node_ids)
    adj = build_adjacency(np.asarray(edges, dtype=np.int64).reshape(-1, 2), n)

    features = None
    if feature_path is not None:
        missing = [node_ids[i] for i in range(n) if i not in feat_rows]
        if missing:
            raise DataError(f"no features for nodes {missing[:5]}", feature_path)
        X = np.asarray([feat_rows[i] for i in range(n)], dtype=np.float64).reshape(n, n_feat or 0)
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature value", feature_path)
        if rescale and X.size:
            lo, hi = X.min(axis=0), X.max(axis=0)
            span = np.where(hi > lo, hi - lo, 1.0)
            X = (X - lo) / span
        elif X.size and (X.min() < 0.0 or X.max() > 1.0):
            r, _ = np.unravel_index(np.argmax((X < 0) | (X > 1)), X.shape)
            raise DataError(f"feature of node {node_ids[r]!r} outside [0, 1] (use rescale)", feature_path)
        features = FeatureMatrix(X)

    labels = None
    if label_path is not None:
        raw = []
        for lineno, line in _lines(label_path):
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError("expected 'node_id<TAB>class<TAB>split'", label_path, lineno)
            if parts[0] not in index:
                raise DataError(f"label for unknown node {parts[0]!r}", label_path, lineno)
            if parts[2] not in SPLIT_NAMES:
                raise DataError(f"split must be one of {sorted(SPLIT_NAMES)}, got {parts[2]!r}",
                                label_path, lineno)
            raw.append((index[parts[0]], parts[1], SPLIT_NAMES[parts[2]], lineno))
        classes = tuple(sorted({c for _, c, _, _ in raw}))
        cidx = {c: k for k, c in enumerate(classes)}
        lab = np.full(n, -1, dtype=np.int64)
        spl = np.full(n, SPLIT_NONE, dtype=np.int64)
        seen = set()
        for i, c, s, lineno in raw:
            if i in seen:
                raise DataError(f"duplicate label for node {node_ids[i]!r}", label_path, lineno)
            seen.add(i)
            lab[i], spl[i] = cidx[c], s
        labels = LabelSet(classes, lab, spl)

    sources = {"edges": str(edge_path)}
    if feature_path is not None:
        sources["features"] = str(feature_path)
    if label_path is not None:
        sources["labels"] = str(label_path)
    return DatasetBundle(node_ids, adj, features, labels, dataset_stats(adj, features, labels), sources)


# ---------------------------------------------------------------- splits

def write_split(split, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"seed={int(split.seed)}\n")
        fh.write(f"protocol={split.protocol}\n")
        for name, arr in split.sections().items():
            fh.write(f"[{name}]\n")
            arr = np.asarray(arr, dtype=np.int64)
            if name == "train_observed":
                rows = arr.reshape(-1, 3)
            else:
                value = 1 if name.endswith("_pos") else 0
                pairs = arr.reshape(-1, 2)
                rows = np.column_stack([pairs, np.full(len(pairs), value, dtype=np.int64)])
            fh.writelines(f"{i}\t{j}\t{v}\n" for i, j, v in rows.tolist())


def read_split(path):
    seed, protocol = None, "vgae"
    data = {name: [] for name in EdgeSplit.SECTIONS}
    current = None
    for lineno, line in _lines(path):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            if current not in data:
                raise DataError(f"unknown section [{current}]", path, lineno)
            continue
        if current is None:
            key, sep, value = s.partition("=")
            if not sep:
                raise DataError("expected a 'key=value' header line", path, lineno)
            if key == "seed":
                try:
                    seed = int(value)
                except ValueError:
                    raise DataError("seed must be an integer", path, lineno) from None
            elif key == "protocol":
                protocol = value
            else:
                raise DataError(f"unknown header key {key!r}", path, lineno)
            continue
        parts = s.split("\t")
        try:
            i, j, v = (int(p) for p in parts)
        except ValueError:
            raise DataError("expected 'i<TAB>j<TAB>value' with integers", path, lineno) from None
        data[current].append((i, j, v))
    if seed is None:
        raise DataError("missing 'seed=' header", path)
    arrays = {}
    for name, rows in data.items():
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
        arrays[name] = arr if name == "train_observed" else arr[:, :2]
    split = EdgeSplit(protocol=protocol, seed=seed, **arrays)
    try:
        split.check_disjoint()
    except ValueError as exc:
        raise DataError(str(exc), path) from None
    return split


# ----------------------------------------------------------- checkpoints

MAGIC = b"LONGAE\x00\x01"
VERSION = 1
_HEADER = struct.Struct("<8sI6I")
_FLAG_UNTIED = 1


def save_checkpoint(params, path, meta=None):
    meta = dict(meta or {})
    meta.setdefault("n_features", params.n_features)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    flags = 0 if params.tied else _FLAG_UNTIED
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, params.in_dim, params.hidden, params.latent,
                              params.n_classes, params.n_nodes, flags))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for t in params.tensors().values():
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path, expect_in_dim=None, expect_classes=None, dtype=np.float32):
    """Returns ``(params, meta)``; raises a ``CheckpointError`` subclass on bad input."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise BadMagicError("not a checkpoint file (bad magic)", path)
    if len(data) < _HEADER.size + 4:
        raise TruncatedError("truncated checkpoint header", path)
    _, version, in_dim, hidden, latent, n_classes, n_nodes, flags = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}", path)
    if expect_in_dim is not None and in_dim != expect_in_dim:
        raise DimensionMismatchError(f"checkpoint input width {in_dim} != expected {expect_in_dim}", path)
    if expect_classes is not None and n_classes != expect_classes:
        raise DimensionMismatchError(f"checkpoint has {n_classes} classes, expected {expect_classes}", path)
    off = _HEADER.size
    (meta_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + meta_len:
        raise TruncatedError("truncated checkpoint metadata", path)
    meta = json.loads(data[off:off + meta_len].decode("utf-8"))
    off += meta_len

    shapes = [("V", (hidden, in_dim)), ("W", (latent, hidden)), ("b1", (hidden,)), ("b2", (latent,)),
              ("b3", (hidden,)), ("b4", (in_dim,))]
    if n_classes:
        shapes += [("U", (n_classes, hidden)), ("b5", (n_classes,))]
    if flags & _FLAG_UNTIED:
        shapes += [("V_dec", (hidden, in_dim)), ("W_dec", (latent, hidden))]
    need = off + 4 * sum(int(np.prod(s)) for _, s in shapes)
    if len(data) < need:
        raise TruncatedError(f"truncated checkpoint: {len(data)} bytes, expected {need}", path)
    if len(data) > need:
        raise CheckpointError(f"trailing bytes after tensors ({len(data) - need})", path)
    tensors = {}
    for name, shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape)
        tensors[name] = np.array(arr, dtype=dtype)
        off += 4 * count
    n_features = int(meta.get("n_features", in_dim - n_nodes))
    if n_nodes + n_features != in_dim:
        raise DimensionMismatchError("node and feature counts disagree with input width", path)
    return ModelParams(n_nodes=n_nodes, n_features=n_features, **tensors), meta


# --------------------------------------------------------------- reports

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_scores(path, pairs, scores):
    """One ``i<TAB>j<TAB>score`` line per pair."""
    if len(pairs) != len(scores):
        raise ValueError("one score per pair required")
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j), s in zip(pairs, scores):
            fh.write(f"{i}\t{j}\t{_fmt(float(s))}\n")


def write_report(path, metrics, predictions=None, predictions_path=None, curve=None, curve_path=None):
    """Write ``key=value`` metrics plus optional score and precision@k tables.

    ``predictions`` is ``(pairs, scores)`` where pairs hold printable ids;
    ``curve`` is a sequence of ``(k, value)`` with strictly increasing k.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in metrics.items():
            fh.write(f"{key}={_fmt(value)}\n")
    if predictions is not None:
        write_scores(predictions_path, *predictions)
    if curve is not None:
        ks = [int(k) for k, _ in curve]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("curve k values must be strictly increasing")
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write("k\tprecision\n")
            for k, v in curve:
                fh.write(f"{int(k)}\t{_fmt(float(v))}\n")


def read_report(path):
    out = {}
    for lineno, line in _lines(path):
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError("expected 'key=value'", path, lineno)
        if key in out:
            raise DataError(f"duplicate key {key!r}", path, lineno)
        out[key] = value
    return out


def read_pairs(path):
    """Node-id pairs, one ``a<TAB>b`` per line."""
    pairs = []
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) < 2:
            raise DataError("expected 'a<TAB>b'", path, lineno)
        pairs.append((parts[0], parts[1]))
    return pairs
