"""Entropy-adaptive mixing of model logits with sparse count evidence.

Per token: compute the model's predictive entropy, derive the scale s,
add the scaled sparse and dense count increments by indexed addition, and
produce a floored, renormalized probability vector for the coder. All mixing
runs in float64 with max-subtracted canonical logits, so adding a constant to
every model logit yields a bit-identical probability vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericFaultError


@dataclass
class MixConfig:
    beta: float = 0.6
    h0: float = 5.5  # nats
    s_min: float = 0.2
    s_max: float = 2.5


PROB_FLOOR = 1e-12
_GRID = 4096.0  # logit grid 2**-12


def canonical_logits(ssm_logits: np.ndarray) -> np.ndarray:
    """Shift-invariant float64 form of the model logits.

    Subtracts the maximum, then snaps to a 2**-12 grid. The snap makes the
    result bit-identical for algebraically equivalent inputs (e.g. logits all
    shifted by a constant), whose max-subtracted differences agree to within
    a few ulps; the grid is far finer than anything the coder can resolve.
    """
    out = np.asarray(ssm_logits, dtype=np.float64).copy()
    if not np.all(np.isfinite(out)):
        raise NumericFaultError("non-finite model logits")
    out -= out.max()
    out = np.rint(out * _GRID) / _GRID
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(logits)):
        raise NumericFaultError("non-finite logits in softmax")
    e = np.exp(logits - logits.max())
    p = e / e.sum()
    np.maximum(p, PROB_FLOOR, out=p)
    p /= p.sum()
    return p


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in nats; the floor in softmax keeps the log finite."""
    return float(-np.dot(p, np.log(p)))


def adaptive_scale(h: float, cfg: MixConfig) -> float:
    raw = (1.0 - cfg.beta) + cfg.beta * h / cfg.h0
    return min(max(raw, cfg.s_min), cfg.s_max)


def combine_logits(
    logits: np.ndarray,
    sparse: list[tuple[int, float]],
    dense: np.ndarray | None,
) -> np.ndarray:
    """Add count evidence in place: dense frequency term, then sparse deltas.

    Sparse entries touch only their own indices, so tokens with no count
    evidence keep their model logit exactly.
    """
    if dense is not None:
        logits += dense
    if sparse:
        ids = np.fromiter((t for t, _ in sparse), dtype=np.int64, count=len(sparse))
        deltas = np.fromiter((d for _, d in sparse), dtype=np.float64, count=len(sparse))
        np.add.at(logits, ids, deltas)
    return logits


def entropy_and_scale(ssm_probs: np.ndarray, cfg: MixConfig) -> tuple[float, float]:
    h = shannon_entropy(ssm_probs)
    return h, adaptive_scale(h, cfg)
