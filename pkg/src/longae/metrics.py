"""Ranking and classification metrics."""
import numpy as np


def _scored(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    return scores, labels


def _average_ranks(x):
    """1-based ranks with ties replaced by their mean rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    boundaries = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(xs)]])
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1..end
    ranks = np.empty(len(x), dtype=np.float64)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def roc_auc(scores, labels):
    """Mann-Whitney AUC: P(pos > neg) + P(tie) / 2."""
    scores, labels = _scored(scores, labels)
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    ranks = _average_ranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _ranking(scores):
    # descending score, ties by original index
    return np.lexsort((np.arange(len(scores)), -scores))


def average_precision(scores, labels):
    """Step-wise AP: sum over hits of precision@k times 1/#positives."""
    scores, labels = _scored(scores, labels)
    n_pos = int(np.count_nonzero(labels == 1))
    if n_pos == 0:
        raise ValueError("average_precision needs at least one positive")
    rel = labels[_ranking(scores)] == 1
    hits = np.cumsum(rel)
    k = np.arange(1, len(rel) + 1)
    return float((hits[rel] / k[rel]).sum() / n_pos)


def precision_at_k(relevance, k):
    """Fraction of relevant items among the first ``k`` of a ranked list.

    ``k`` may be an int or a sequence of ints; a sequence returns an array.
    """
    rel = np.asarray(relevance).ravel().astype(bool)
    ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if np.any(ks <= 0):
        raise ValueError("k must be positive")
    if np.any(ks > len(rel)):
        raise ValueError(f"k={ks.max()} exceeds the {len(rel)} ranked items")
    hits = np.cumsum(rel)
    out = hits[ks - 1] / ks
    return float(out[0]) if np.ndim(k) == 0 else out


def rank_by_score(scores):
    """Stable descending order used by AP and precision@k."""
    return _ranking(np.asarray(scores, dtype=np.float64).ravel())


def accuracy(predicted, truth):
    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    if predicted.shape != truth.shape:
        raise ValueError(f"{predicted.size} predictions but {truth.size} labels")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty list is undefined")
    return float(np.mean(predicted == truth))
