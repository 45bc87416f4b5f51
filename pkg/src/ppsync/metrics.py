"""Precision/recall/F1 on filtered match sets, and threshold sweeps.

A match is one unordered keypoint pair, counted once (upper block
triangle), which matches the symmetric storage and makes every ratio
orientation-independent.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SupportViolation


@dataclass(frozen=True)
class MatchEvaluation:
    precision: float
    recall: float
    f1: float
    retained: int
    true_retained: int
    total_true: int


def _f1(p, r):
    if p > 0.0 and r > 0.0:
        return 2.0 / (1.0 / p + 1.0 / r)
    return 0.0


def _evaluate_sets(kept, true_set, total_true):
    true_retained = len(kept & true_set)
    retained = len(kept)
    precision = true_retained / retained if retained else 1.0
    recall = true_retained / total_true if total_true else 1.0
    return MatchEvaluation(
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        retained=retained,
        true_retained=true_retained,
        total_true=total_true,
    )


def evaluate(zhat, qstar, q):
    """Score a filtered match set against the ground-truth matches.

    ``zhat`` must live on the observed support; recall is relative to all
    ground-truth matches. With nothing retained, precision reports 1.0 and
    the ``retained=0`` count makes the vacuity visible.
    """
    kept = set(zhat.pairs)
    observed = set(q.pairs)
    if not kept <= observed:
        raise SupportViolation("filtered matches outside the observed support")
    true_set = set(qstar.pairs)
    return _evaluate_sets(kept, true_set, len(true_set))


def pr_curve(scores, qstar, thresholds):
    """One evaluation per threshold of ``indicator(score > t)``.

    Recall here is relative to the true matches that were actually scored
    (the observed support), so the loosest threshold reaches recall 1.
    """
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be sorted ascending")
    true_scored = set(scores.pairs) & set(qstar.pairs)
    values = scores.values
    pairs = scores.pairs
    out = []
    for t in thresholds:
        kept = {pairs[idx] for idx in np.nonzero(values > t)[0]}
        ev = _evaluate_sets(kept, true_scored, len(true_scored))
        out.append((float(t), ev.precision, ev.recall, ev.retained))
    return out


def pr_auc(points):
    """Trapezoidal area under a (threshold, precision, recall, ...) curve."""
    rec = np.array([p[2] for p in points])
    prec = np.array([p[1] for p in points])
    order = np.argsort(rec)
    rec, prec = rec[order], prec[order]
    if rec[0] > 0.0:
        rec = np.concatenate([[0.0], rec])
        prec = np.concatenate([[prec[0]], prec])
    return float(np.trapezoid(prec, rec))
