"""Frame-level detection scoring: miss/false-alarm rates, DCF, accuracy, AUC."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyInputError, UndefinedMetricError

# Relative costs of missing speech vs raising a false alarm.
MISS_WEIGHT = 0.75
FALSE_ALARM_WEIGHT = 0.25


def _as_binary_truth(truth: np.ndarray) -> np.ndarray:
    truth = np.asarray(truth)
    return truth > 0.5 if truth.dtype.kind == "f" else truth.astype(bool)


def error_rates(
    scores: np.ndarray, truth: np.ndarray, threshold: float = 0.5
) -> tuple[float, float]:
    """Miss rate and false-alarm rate at a decision threshold (score > thr).

    MR = missed speech frames / speech frames; FAR = false alarms / non-speech
    frames.  If the truth contains a single class, the undefined rate is
    returned as NaN with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary_truth(truth)
    if scores.shape != truth.shape:
        raise ConfigError(f"shape mismatch: scores {scores.shape} vs truth {truth.shape}")
    decisions = scores > threshold
    n_speech = int(truth.sum())
    n_nonspeech = truth.size - n_speech
    if n_speech == 0:
        warnings.warn("no speech frames in truth: miss rate undefined", stacklevel=2)
        mr = float("nan")
    else:
        mr = float(np.sum(~decisions & truth) / n_speech)
    if n_nonspeech == 0:
        warnings.warn("no non-speech frames in truth: false-alarm rate undefined", stacklevel=2)
        far = float("nan")
    else:
        far = float(np.sum(decisions & ~truth) / n_nonspeech)
    return mr, far


def dcf(mr: float, far: float) -> float:
    """Detection cost 100 * (0.75*MR + 0.25*FAR), as a percentage."""
    if not (0.0 <= mr <= 1.0 and 0.0 <= far <= 1.0):
        raise ConfigError(f"rates must lie in [0, 1], got MR={mr}, FAR={far}")
    return 100.0 * (MISS_WEIGHT * mr + FALSE_ALARM_WEIGHT * far)


def accuracy(scores: np.ndarray, truth: np.ndarray, threshold: float = 0.5) -> float:
    """Fraction of frames where (score > threshold) agrees with the truth."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary_truth(truth)
    if scores.shape != truth.shape:
        raise ConfigError(f"shape mismatch: scores {scores.shape} vs truth {truth.shape}")
    if scores.size == 0:
        raise EmptyInputError("cannot compute accuracy of an empty track")
    return float(np.mean((scores > threshold) == truth))


def auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Area under the ROC curve, trapezoidal over all distinct thresholds.

    Equals the probability that a random speech frame outscores a random
    non-speech frame, counting ties as one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary_truth(truth)
    if scores.shape != truth.shape:
        raise ConfigError(f"shape mismatch: scores {scores.shape} vs truth {truth.shape}")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")[::-1]  # descending score
    sorted_scores = scores[order]
    sorted_truth = truth[order]
    tp = np.cumsum(sorted_truth)
    fp = np.cumsum(~sorted_truth)
    # keep only the last index of each tied-score run: ROC vertices
    distinct = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    idx = np.concatenate([distinct, [scores.size - 1]])
    tpr = np.concatenate([[0.0], tp[idx] / n_pos])
    fpr = np.concatenate([[0.0], fp[idx] / n_neg])
    return float(np.trapezoid(tpr, fpr))


@dataclass
class EvalRow:
    """Scores for one test condition (noise type at one SNR)."""

    noise_type: str
    snr_db: float  # NaN for the clean condition
    mr: float
    far: float
    dcf_pct: float
    acc: float
    auc: float
    n_speech: int
    n_nonspeech: int


@dataclass
class EvalReport:
    """Per-condition metric table for one detector."""

    detector: str
    rows: list[EvalRow] = field(default_factory=list)

    CSV_HEADER = "condition,snr_db,mr,far,dcf_pct,acc,auc,n_speech,n_nonspeech"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            snr = "" if np.isnan(r.snr_db) else f"{r.snr_db:g}"
            lines.append(
                f"{r.noise_type},{snr},{r.mr:.6f},{r.far:.6f},{r.dcf_pct:.4f},"
                f"{r.acc:.6f},{r.auc:.6f},{r.n_speech},{r.n_nonspeech}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, detector: str = "") -> "EvalReport":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if not lines or lines[0] != cls.CSV_HEADER:
            raise ConfigError("unrecognized report header")
        rows = []
        for line in lines[1:]:
            parts = line.split(",")
            rows.append(
                EvalRow(
                    noise_type=parts[0],
                    snr_db=float(parts[1]) if parts[1] else float("nan"),
                    mr=float(parts[2]),
                    far=float(parts[3]),
                    dcf_pct=float(parts[4]),
                    acc=float(parts[5]),
                    auc=float(parts[6]),
                    n_speech=int(parts[7]),
                    n_nonspeech=int(parts[8]),
                )
            )
        return cls(detector, rows)


def score_condition(
    noise_type: str,
    snr_db: float,
    scores: np.ndarray,
    decisions: np.ndarray,
    truth: np.ndarray,
) -> EvalRow:
    """Pool frames of one condition into a report row.

    MR/FAR/ACC come from the detector's own binary decisions; AUC from the
    raw scores (threshold-independent).
    """
    truth_b = _as_binary_truth(truth)
    decisions = np.asarray(decisions)
    n_speech = int(truth_b.sum())
    n_nonspeech = truth_b.size - n_speech
    mr, far = error_rates(decisions.astype(np.float64), truth_b, threshold=0.5)
    return EvalRow(
        noise_type=noise_type,
        snr_db=snr_db,
        mr=mr,
        far=far,
        dcf_pct=dcf(mr, far) if not (np.isnan(mr) or np.isnan(far)) else float("nan"),
        acc=float(np.mean(decisions.astype(bool) == truth_b)),
        auc=auc(scores, truth_b),
        n_speech=n_speech,
        n_nonspeech=n_nonspeech,
    )
