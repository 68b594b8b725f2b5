"""Training objectives: traditional triplet, center-oriented margin-free
(COM) triplet, its cluster-center variant for pseudo-labeled training, and
weighted cross-entropy.

Every function accepts either plain 1-D numpy arrays (returning a float) or
``Var`` nodes (returning a scalar ``Var`` differentiable w.r.t. all vector
inputs). Distances are cosine distances, so all losses are invariant to
positive rescaling of any embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var, cosine_distance
from .errors import EmptyBatchError, LengthMismatchError

PROB_CLAMP = 1e-12

C_MAJ = 0
C_MIN = 1


@dataclass(frozen=True)
class MarginSpec:
    """Margin policy for triplet-style losses.

    mode="constant" uses the fixed ``alpha``; mode="adaptive" derives the
    margin from the positive-negative separation of each triplet.
    """
    mode: str = "adaptive"
    alpha: float = 0.2

    def __post_init__(self):
        if self.mode not in ("constant", "adaptive"):
            raise ValueError(f"unknown margin mode {self.mode!r}")
        if self.mode == "constant" and not (0.0 <= self.alpha <= 2.0):
            raise ValueError(f"constant margin {self.alpha} outside [0, 2]")


@dataclass(frozen=True)
class ClassWeights:
    w_min: float = 1.0
    w_maj: float = 1.0

    def __post_init__(self):
        if not (self.w_min > 0 and self.w_maj > 0
                and np.isfinite(self.w_min) and np.isfinite(self.w_maj)):
            raise ValueError("class weights must be finite and positive")


def _graph(*xs) -> bool:
    return any(isinstance(x, Var) for x in xs)


def _hinge(x):
    if isinstance(x, Var):
        return ad.relu(x)
    return max(0.0, x)


def _combine(terms, coeffs):
    """sum(c * t) over scalars, staying in the graph when needed."""
    if any(isinstance(t, Var) for t in terms):
        return ad.add_n([ad.scale(ad.as_var(t), c) for t, c in zip(terms, coeffs)])
    return sum(c * t for t, c in zip(terms, coeffs))


def triplet_loss(e_a, e_p, e_n, alpha: float):
    """Classic triplet hinge: max(0, d(A,P) - d(A,N) + alpha)."""
    d_ap = cosine_distance(e_a, e_p)
    d_an = cosine_distance(e_a, e_n)
    return _hinge(_combine([d_ap, d_an, 1.0], [1.0, -1.0, alpha]))


def com_dist_wa(e_a, e_p, e_n):
    """Within- vs across-cluster term: d(A,P) - 0.5*(d(A,N) + d(P,N))."""
    d_ap = cosine_distance(e_a, e_p)
    d_an = cosine_distance(e_a, e_n)
    d_pn = cosine_distance(e_p, e_n)
    return _combine([d_ap, d_an, d_pn], [1.0, -0.5, -0.5])


def com_adaptive_margin(e_p, e_n):
    """Adaptive margin 1 - d(P,N); negative once the pair is separated
    past orthogonality, which relaxes the constraint."""
    d_pn = cosine_distance(e_p, e_n)
    return _combine([d_pn, 1.0], [-1.0, 1.0])


def _margin_term(margin: MarginSpec, e_p, e_n):
    if margin.mode == "adaptive":
        return com_adaptive_margin(e_p, e_n)
    return margin.alpha


def com_triplet_loss(anchors, positives, negatives, margin: MarginSpec):
    """Mean COM-triplet hinge over a batch of M triplets.

    ``anchors``/``positives``/``negatives`` are (M, S) arrays or Vars; row i
    of each forms one triplet.
    """
    m = _batch_len(anchors)
    terms = []
    for i in range(m):
        e_a, e_p, e_n = _row(anchors, i), _row(positives, i), _row(negatives, i)
        terms.append(_hinge(_combine(
            [com_dist_wa(e_a, e_p, e_n), _margin_term(margin, e_p, e_n)],
            [1.0, 1.0])))
    return _combine(terms, [1.0 / m] * m)


def triplet_loss_batch(anchors, positives, negatives, alpha: float):
    """Mean traditional triplet hinge over a batch (ablation baseline)."""
    m = _batch_len(anchors)
    terms = [triplet_loss(_row(anchors, i), _row(positives, i), _row(negatives, i), alpha)
             for i in range(m)]
    return _combine(terms, [1.0 / m] * m)


def udc_adaptive_margin(mu_min, mu_maj):
    """Pseudo-label margin: 1 - d(mu_min, mu_maj)."""
    return com_adaptive_margin(mu_min, mu_maj)


def udc_dist_wa(e_a, mu_min, mu_maj, pseudo_class: int):
    """Center-based within/across term for a single anchor.

    The anchor's own cluster center plays the positive role and the other
    center the negative role, per the anchor's pseudo-class.
    """
    own, other = (mu_min, mu_maj) if pseudo_class == C_MIN else (mu_maj, mu_min)
    d_own = cosine_distance(e_a, own)
    d_other = cosine_distance(e_a, other)
    d_cc = cosine_distance(mu_min, mu_maj)
    return _combine([d_own, d_other, d_cc], [1.0, -0.5, -0.5])


def udc_com_loss(anchors, pseudo_classes, mu_min, mu_maj, margin: MarginSpec):
    """Mean hinge of the center-based COM term over a pseudo-labeled batch.

    With mode="adaptive" the margin is 1 - d(mu_min, mu_maj); with
    mode="constant" the traditional triplet form on cluster centers is used
    (d(A, own) - d(A, other) + alpha), matching the ablation baseline.
    """
    m = _batch_len(anchors)
    pseudo_classes = np.asarray(pseudo_classes, dtype=int)
    if len(pseudo_classes) != m:
        raise LengthMismatchError("pseudo_classes length != batch size")
    terms = []
    for i in range(m):
        e_a = _row(anchors, i)
        own, other = ((mu_min, mu_maj) if pseudo_classes[i] == C_MIN
                      else (mu_maj, mu_min))
        if margin.mode == "adaptive":
            arg = _combine([udc_dist_wa(e_a, mu_min, mu_maj, pseudo_classes[i]),
                            udc_adaptive_margin(mu_min, mu_maj)], [1.0, 1.0])
        else:
            arg = _combine([cosine_distance(e_a, own),
                            cosine_distance(e_a, other), 1.0],
                           [1.0, -1.0, margin.alpha])
        terms.append(_hinge(arg))
    return _combine(terms, [1.0 / m] * m)


def weighted_cross_entropy(labels, probs, weights: ClassWeights):
    """Class-weighted binary cross-entropy over predicted minority
    probabilities. Probabilities are clamped to [1e-12, 1 - 1e-12] before
    the log."""
    labels = np.asarray(labels, dtype=np.float64)
    graph = isinstance(probs, Var)
    pvals = probs.value if graph else np.asarray(probs, dtype=np.float64)
    if labels.shape != pvals.shape or labels.ndim != 1:
        raise LengthMismatchError(
            f"labels {labels.shape} vs probs {pvals.shape}")
    n = labels.size
    if n == 0:
        raise EmptyBatchError("empty cross-entropy batch")
    p = np.clip(pvals, PROB_CLAMP, 1.0 - PROB_CLAMP)
    per = -(weights.w_min * labels * np.log(p)
            + weights.w_maj * (1.0 - labels) * np.log(1.0 - p))
    value = float(per.mean())
    if not graph:
        return value

    def vjp(g):
        g = float(g)
        inside = (pvals > PROB_CLAMP) & (pvals < 1.0 - PROB_CLAMP)
        dp = (-weights.w_min * labels / p
              + weights.w_maj * (1.0 - labels) / (1.0 - p)) / n
        return (g * np.where(inside, dp, 0.0),)

    return Var(value, (probs,), vjp)


def _batch_len(x) -> int:
    val = x.value if isinstance(x, Var) else np.asarray(x)
    if val.ndim != 2 or val.shape[0] < 1:
        raise EmptyBatchError(f"expected non-empty (M, S) batch, got {val.shape}")
    return val.shape[0]


def _row(x, i):
    if isinstance(x, Var):
        return ad.row(x, i)
    return np.asarray(x, dtype=np.float64)[i]
