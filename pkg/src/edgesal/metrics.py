"""Saliency evaluation: PR curves over 256 thresholds and scalar summaries.

A saliency map s in [0, 1] is thresholded at t = k/255 for k = 0..255 into
masks M = (s >= t) and compared against a boolean ground truth G:

    precision       |M & G| / |M|      (1 when M is empty)
    recall          |M & G| / |G|
    false_positive  |M & ~G| / |~G|    (0 when G covers everything)

The curve is built in a single histogram pass whose per-threshold counts
are identical to recounting each mask from scratch.  Scalar summaries are
the weighted F-measure maximized over thresholds, the maximum precision,
trapezoidal areas under the precision-recall and recall-false-positive
curves, and the mean absolute error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

THRESHOLD_COUNT = 256
THRESHOLDS = np.arange(THRESHOLD_COUNT, dtype=np.float64) / 255.0
THRESHOLDS.setflags(write=False)

# Precision weight in the F-measure; squared value of the usual 0.3.
F_MEASURE_BETA_SQ = 0.09


@dataclass(frozen=True)
class PRCurve:
    """Per-threshold precision / recall / false-positive-rate arrays."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    false_positive: np.ndarray

    def __post_init__(self) -> None:
        n = self.thresholds.shape
        for name in ("precision", "recall", "false_positive"):
            if getattr(self, name).shape != n:
                raise ValueError(f"{name} length does not match thresholds")


@dataclass(frozen=True)
class EvalSummary:
    """Scalar quality summary of one saliency map against one mask."""

    f_measure: float
    p_max: float
    mean_pr: float
    auc: float
    mae: float

    def as_dict(self) -> dict[str, float]:
        return {"f_measure": self.f_measure, "p_max": self.p_max,
                "mean_pr": self.mean_pr, "auc": self.auc, "mae": self.mae}


METRIC_NAMES = ("f_measure", "p_max", "mean_pr", "auc", "mae")


def _check_pair(s: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=bool)
    if s.shape != g.shape:
        raise ValueError(f"saliency shape {s.shape} does not match ground "
                         f"truth shape {g.shape}")
    if not g.any():
        raise ValueError("ground truth has no positive pixels; "
                         "recall is undefined")
    return s, g


def pr_at_threshold(s: np.ndarray, g: np.ndarray,
                    t: float) -> tuple[float, float, float]:
    """Precision, recall, and false-positive rate of the mask (s >= t)."""
    s, g = _check_pair(s, g)
    mask = s >= t
    mask_n = int(mask.sum())
    hit_n = int((mask & g).sum())
    gt_n = int(g.sum())
    neg_n = g.size - gt_n
    precision = 1.0 if mask_n == 0 else hit_n / mask_n
    recall = hit_n / gt_n
    false_positive = 0.0 if neg_n == 0 else (mask_n - hit_n) / neg_n
    return precision, recall, false_positive


def pr_curve(s: np.ndarray, g: np.ndarray) -> PRCurve:
    """Evaluate pr_at_threshold at every t = k/255 in one histogram pass.

    Each pixel lands in the bin counting how many thresholds it reaches; a
    reversed cumulative sum then yields the same integer mask sizes a naive
    per-threshold recount would produce.
    """
    s, g = _check_pair(s, g)
    reach = np.searchsorted(THRESHOLDS, s.ravel(), side="right")
    mask_n = np.cumsum(
        np.bincount(reach, minlength=THRESHOLD_COUNT + 1)[::-1])[::-1][1:]
    hit_n = np.cumsum(
        np.bincount(reach[g.ravel()],
                    minlength=THRESHOLD_COUNT + 1)[::-1])[::-1][1:]
    gt_n = int(g.sum())
    neg_n = g.size - gt_n
    precision = np.divide(hit_n, mask_n, out=np.ones(THRESHOLD_COUNT),
                          where=mask_n > 0)
    recall = hit_n / gt_n
    if neg_n == 0:
        false_positive = np.zeros(THRESHOLD_COUNT)
    else:
        false_positive = (mask_n - hit_n) / neg_n
    return PRCurve(thresholds=THRESHOLDS.copy(), precision=precision,
                   recall=recall, false_positive=false_positive)


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    """Trapezoidal integral of y over x (x need not be strictly
    increasing; flat segments contribute zero width)."""
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * (x[1:] - x[:-1])))


def f_measure_curve(precision: np.ndarray,
                    recall: np.ndarray) -> np.ndarray:
    """Weighted F-measure per threshold; 0/0 points contribute 0."""
    num = (1.0 + F_MEASURE_BETA_SQ) * precision * recall
    den = F_MEASURE_BETA_SQ * precision + recall
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def summarize(curve: PRCurve, s: np.ndarray, g: np.ndarray) -> EvalSummary:
    """Scalar summary of a PR curve plus the map it came from.

    Thresholds whose mask is empty carry the vacuous precision 1 and are
    excluded from both the F-measure search and the precision maximum.
    Areas are integrated with the trapezoidal rule: precision over
    ascending recall, anchored at recall 0 with the lowest-recall
    precision so the integral spans the whole recall axis; recall over
    ascending false-positive rate with (0, 0) and (1, 1) appended.
    """
    s, g = _check_pair(s, g)
    # a mask is empty exactly when it hits nothing and misclassifies nothing
    nonempty = (curve.recall > 0.0) | (curve.false_positive > 0.0)
    if not nonempty.any():
        raise ValueError("curve has no nonempty mask at any threshold")
    fm = f_measure_curve(curve.precision, curve.recall)
    f_measure = float(fm[nonempty].max())
    p_max = float(curve.precision[nonempty].max())
    pre_up = np.concatenate(([curve.precision[-1]], curve.precision[::-1]))
    rec_up = np.concatenate(([0.0], curve.recall[::-1]))
    mean_pr = _trapezoid(pre_up, rec_up)
    fp_anchored = np.concatenate(([0.0], curve.false_positive[::-1], [1.0]))
    rec_anchored = np.concatenate(([0.0], curve.recall[::-1], [1.0]))
    auc = _trapezoid(rec_anchored, fp_anchored)
    mae = float(np.mean(np.abs(s - g.astype(np.float64))))
    return EvalSummary(f_measure=f_measure, p_max=p_max, mean_pr=mean_pr,
                       auc=auc, mae=mae)


def evaluate(s: np.ndarray, g: np.ndarray) -> tuple[PRCurve, EvalSummary]:
    """Convenience: curve plus summary in one call."""
    curve = pr_curve(s, g)
    return curve, summarize(curve, s, g)
