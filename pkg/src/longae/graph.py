"""Masked adjacency storage, edge-split protocols and augmented input rows.

Entries are stored densely as int8: ``PRESENT`` (1), ``ABSENT`` (0) or
``UNK`` (-1). Memory is N^2 bytes, which covers every benchmark graph up to
~25k nodes. Dyads are unordered off-diagonal pairs reported as ``(i, j)``
with ``i < j``. The diagonal is always present and never sampled.
"""
from dataclasses import dataclass, field

import numpy as np

PRESENT = 1
ABSENT = 0
UNK = -1

# enumerate absent pairs explicitly below this many candidates, else rejection-sample
_ENUMERATE_LIMIT = 5_000_000

SPLIT_NONE, SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST = 0, 1, 2, 3
SPLIT_NAMES = {"none": SPLIT_NONE, "train": SPLIT_TRAIN, "val": SPLIT_VAL, "test": SPLIT_TEST}


@dataclass(frozen=True)
class MaskedAdjacency:
    entries: np.ndarray  # (N, N) int8

    def __post_init__(self):
        e = self.entries
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {e.shape}")
        e.setflags(write=False)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def observed(self):
        return self.entries != UNK

    def is_fully_observed(self):
        return bool(np.all(self.entries != UNK))

    def dyads(self, value):
        """Upper-triangle dyads whose entry equals ``value``, as an (k, 2) array."""
        iu, ju = np.nonzero(np.triu(self.entries == value, k=1))
        return np.stack([iu, ju], axis=1).astype(np.int64)

    def count(self, value, off_diagonal=True):
        c = int(np.count_nonzero(self.entries == value))
        if off_diagonal:
            c -= int(np.count_nonzero(np.diagonal(self.entries) == value))
        return c

    def with_values(self, dyads, value):
        """Copy with both directions of every dyad set to ``value``."""
        e = self.entries.copy()
        dyads = np.asarray(dyads, dtype=np.int64).reshape(-1, 2)
        e[dyads[:, 0], dyads[:, 1]] = value
        e[dyads[:, 1], dyads[:, 0]] = value
        return MaskedAdjacency(e)

    def check(self):
        e = self.entries
        if not np.array_equal(e, e.T):
            raise ValueError("adjacency is not symmetric")
        if not np.all(np.diagonal(e) == PRESENT):
            raise ValueError("adjacency diagonal must be present")
        if not np.all((e >= UNK) & (e <= PRESENT)):
            raise ValueError("adjacency entries must be 1, 0 or UNK")


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (N, F) float

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {v.shape}")
        if v.size and (v.min() < 0.0 or v.max() > 1.0 or not np.all(np.isfinite(v))):
            raise ValueError("feature values must lie in [0, 1]")
        v.setflags(write=False)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def f(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelSet:
    classes: tuple
    labels: np.ndarray  # (N,) int, -1 when unlabeled
    split: np.ndarray   # (N,) int, SPLIT_* codes

    def __post_init__(self):
        labelled = self.split != SPLIT_NONE
        bad = labelled & ((self.labels < 0) | (self.labels >= len(self.classes)))
        if np.any(bad):
            raise ValueError(f"nodes {np.flatnonzero(bad)[:5].tolist()} are in a split without a valid class")

    @property
    def train_mask(self):
        return (self.split == SPLIT_TRAIN) & (self.labels >= 0)

    def nodes(self, which):
        code = SPLIT_NAMES[which] if isinstance(which, str) else which
        return np.flatnonzero((self.split == code) & (self.labels >= 0))


@dataclass
class EdgeSplit:
    """Held-out dyad sets. ``train_observed`` rows are ``(i, j, value)``.

    ``protocol`` records how the training adjacency is rebuilt from the
    full graph: ``vgae`` hides the val/test dyads, ``mf`` keeps only the
    ``train_observed`` dyads (plus the diagonal).
    """
    protocol: str
    seed: int
    train_observed: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    val_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    val_neg: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    test_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    test_neg: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    SECTIONS = ("train_observed", "val_pos", "val_neg", "test_pos", "test_neg")

    def sections(self):
        return {name: getattr(self, name) for name in self.SECTIONS}

    def check_disjoint(self):
        seen = {}
        for name, arr in self.sections().items():
            for row in np.asarray(arr)[:, :2]:
                i, j = int(row[0]), int(row[1])
                if i == j:
                    raise ValueError(f"{name} contains diagonal pair ({i}, {j})")
                key = (min(i, j), max(i, j))
                if key in seen:
                    raise ValueError(f"dyad {key} appears in both {seen[key]} and {name}")
                seen[key] = name

    def eval_pairs(self, which="test"):
        """Pairs and 0/1 labels for the ``val`` or ``test`` sets."""
        pos, neg = getattr(self, f"{which}_pos"), getattr(self, f"{which}_neg")
        pairs = np.concatenate([pos, neg]).reshape(-1, 2).astype(np.int64)
        labels = np.concatenate([np.ones(len(pos), dtype=np.int8), np.zeros(len(neg), dtype=np.int8)])
        return pairs, labels

    def training_adjacency(self, full):
        if self.protocol == "mf":
            e = np.full(full.entries.shape, UNK, dtype=np.int8)
            np.fill_diagonal(e, PRESENT)
            t = np.asarray(self.train_observed, dtype=np.int64).reshape(-1, 3)
            e[t[:, 0], t[:, 1]] = t[:, 2]
            e[t[:, 1], t[:, 0]] = t[:, 2]
            return MaskedAdjacency(e)
        hidden = np.concatenate([self.val_pos, self.val_neg, self.test_pos, self.test_neg]).reshape(-1, 2)
        return full.with_values(hidden, UNK)


@dataclass(frozen=True)
class AugmentedRow:
    a_part: np.ndarray
    x_part: np.ndarray
    mask: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.a_part, self.x_part])


def build_adjacency(edges, n):
    """Symmetric fully-observed adjacency with self-loops on the diagonal."""
    e = np.zeros((n, n), dtype=np.int8)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    bad = (edges < 0) | (edges >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ValueError(f"edge {tuple(edges[k].tolist())} has an endpoint outside [0, {n})")
    e[edges[:, 0], edges[:, 1]] = PRESENT
    e[edges[:, 1], edges[:, 0]] = PRESENT
    np.fill_diagonal(e, PRESENT)
    return MaskedAdjacency(e)


def _check_frac(name, value, lo_open=False):
    ok = (0.0 < value < 1.0) if lo_open else (0.0 <= value < 1.0)
    if not ok:
        rng_txt = "(0, 1)" if lo_open else "[0, 1)"
        raise ValueError(f"{name} must lie in {rng_txt}, got {value}")


def _sample_absent(adj, count, rng):
    """``count`` distinct observed-absent dyads, uniform without replacement."""
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    n = adj.n
    n_absent = adj.count(ABSENT) // 2
    if n_absent < count:
        raise ValueError(f"need {count} negative dyads but only {n_absent} observed absent dyads exist")
    if n_absent <= _ENUMERATE_LIMIT:
        cand = adj.dyads(ABSENT)
        pick = rng.choice(len(cand), size=count, replace=False)
        return cand[pick]
    chosen = []
    taken = set()
    while len(chosen) < count:
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        i, j = (int(i), int(j)) if i < j else (int(j), int(i))
        if adj.entries[i, j] != ABSENT or (i, j) in taken:
            continue
        taken.add((i, j))
        chosen.append((i, j))
    return np.asarray(chosen, dtype=np.int64)


def make_vgae_split(adj, test_frac, val_frac, rng, seed=0):
    """Hide ``floor(frac * #positives)`` positive dyads and as many negatives.

    Positives and negatives are drawn from observed off-diagonal dyads only.
    Returns the training adjacency (held-out dyads set to UNK) and the split.
    """
    _check_frac("test_frac", test_frac)
    _check_frac("val_frac", val_frac)
    pos = adj.dyads(PRESENT)
    n_test = int(np.floor(test_frac * len(pos)))
    n_val = int(np.floor(val_frac * len(pos)))
    if n_test + n_val > len(pos):
        raise ValueError("test_frac + val_frac exceeds the available positive dyads")
    perm = rng.permutation(len(pos))
    test_pos = pos[perm[:n_test]]
    val_pos = pos[perm[n_test:n_test + n_val]]
    neg = _sample_absent(adj, n_test + n_val, rng)
    test_neg, val_neg = neg[:n_test], neg[n_test:]
    keep = np.ones(len(pos), dtype=bool)
    keep[perm[:n_test + n_val]] = False
    train_pos = pos[keep]
    split = EdgeSplit(
        protocol="vgae", seed=seed,
        train_observed=np.column_stack([train_pos, np.ones(len(train_pos), dtype=np.int64)]),
        val_pos=val_pos, val_neg=val_neg, test_pos=test_pos, test_neg=test_neg,
    )
    return split.training_adjacency(adj), split


def make_mf_split(adj, train_frac, rng, seed=0):
    """Keep ``floor(train_frac * C(N,2))`` dyads of either class for training.

    The complement becomes the evaluation set (``test_pos``/``test_neg``) and
    is UNK in the returned training adjacency.
    """
    _check_frac("train_frac", train_frac, lo_open=True)
    n = adj.n
    iu, ju = np.triu_indices(n, k=1)
    vals = adj.entries[iu, ju]
    obs = vals != UNK
    iu, ju, vals = iu[obs], ju[obs], vals[obs]
    n_train = int(np.floor(train_frac * len(iu)))
    perm = rng.permutation(len(iu))
    tr, ev = perm[:n_train], perm[n_train:]
    train = np.column_stack([iu[tr], ju[tr], vals[tr]]).astype(np.int64)
    ev_pairs = np.column_stack([iu[ev], ju[ev]]).astype(np.int64)
    ev_vals = vals[ev]
    split = EdgeSplit(
        protocol="mf", seed=seed, train_observed=train,
        test_pos=ev_pairs[ev_vals == PRESENT], test_neg=ev_pairs[ev_vals == ABSENT],
    )
    return split.training_adjacency(adj), split


def degrade_edges(adj, remove_frac, rng):
    """Set ``floor(remove_frac * #positives)`` random positive dyads to UNK."""
    _check_frac("remove_frac", remove_frac)
    pos = adj.dyads(PRESENT)
    k = int(np.floor(remove_frac * len(pos)))
    if k == 0:
        return adj
    drop = pos[rng.choice(len(pos), size=k, replace=False)]
    return adj.with_values(drop, UNK)


def augment_row(adj, feats, i):
    n = adj.n
    if not 0 <= i < n:
        raise IndexError(f"node index {i} outside [0, {n})")
    row = adj.entries[i]
    a_part = (row == PRESENT).astype(np.float64)
    mask = (row != UNK).astype(np.float64)
    x_part = np.asarray(feats.values[i], dtype=np.float64) if feats is not None else np.zeros(0)
    return AugmentedRow(a_part, x_part, mask)


def augmented_batch(adj, feats, idx, dtype=np.float32):
    """Batched ``augment_row``: returns ``(inputs, a_targets, mask)``.

    ``inputs`` is the (B, N+F) concatenation with UNK imputed as 0;
    ``a_targets`` is its first N columns.
    """
    rows = adj.entries[idx]
    a = (rows == PRESENT).astype(dtype)
    mask = (rows != UNK).astype(dtype)
    if feats is None or feats.f == 0:
        return a, a, mask
    x = feats.values[idx].astype(dtype)
    return np.concatenate([a, x], axis=1), a, mask
