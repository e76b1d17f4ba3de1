"""Auxiliary losses that shape the prompt pools during training.

Four terms: a diversity hinge on pairwise value similarity, an entropy-based
utilization balance on selection probabilities, an InfoNCE-style contrastive
pull of queries toward their selected keys, and a cross-modal cosine
alignment of the pooled domain representation against a text-derived feature.
The first three apply to both pools; alignment only to the domain pool.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


@dataclass
class RegularizerConfig:
    tau_div: float = 0.1
    tau_con: float = 0.1

    def __post_init__(self):
        if not -1.0 <= self.tau_div <= 1.0:
            raise ValueError(f"tau_div must lie in [-1, 1], got {self.tau_div}")
        if self.tau_con <= 0:
            raise ValueError(f"tau_con must be > 0, got {self.tau_con}")


def _flat_cosine_matrix(values: Tensor) -> Tensor:
    """[N, T, d] -> [N, N] cosine matrix of the flattened value vectors."""
    n = values.shape[0]
    flat = values.reshape(n, -1)
    norms = np.linalg.norm(flat.data, axis=1)
    if np.any(norms == 0.0):
        rows = []
        for i in range(n):
            vi = T.take(flat, [i]).reshape(flat.shape[1])
            rows.append(T.stack([
                T.cosine_similarity(vi, T.take(flat, [j]).reshape(flat.shape[1]))
                for j in range(n)]).reshape(n))
        return T.stack(rows)
    rn = T.sqrt(T.tsum(T.mul(flat, flat), axis=1, keepdims=True))
    unit = flat / rn
    return T.matmul(unit, unit.T)


def diversity_loss(values: Tensor, tau_div: float) -> Tensor:
    """Mean hinge on off-diagonal value similarity above tau_div.

    Each prompt value is flattened to length T*d before the pairwise cosine;
    the diagonal is masked out and the hinge averaged over the N(N-1)
    remaining entries.
    """
    n = values.shape[0]
    if n < 2:
        warnings.warn("diversity_loss: pool has fewer than 2 prompts, "
                      "returning 0", RuntimeWarning, stacklevel=2)
        return Tensor(0.0)
    sim = _flat_cosine_matrix(values)
    mask = Tensor(np.ones((n, n)) - np.eye(n))
    hinge = T.maximum(sim - tau_div, 0.0)
    return T.tsum(T.mul(mask, hinge)) / float(n * (n - 1))


def balance_loss(full_probs: Tensor) -> Tensor:
    """log N minus the entropy of the selection distribution.

    Zero exactly when utilization is uniform; log N for a one-hot
    distribution. Natural log throughout, with 0*log(0) = 0.
    """
    p = full_probs
    if p.ndim != 1:
        raise ShapeError(f"balance_loss expects a probability vector, "
                         f"got shape {p.shape}")
    total = float(p.data.sum())
    if abs(total - 1.0) > 1e-9 or np.any(p.data < 0):
        raise ValueError(f"balance_loss input is not a probability "
                         f"distribution (sum={total})")
    n = p.shape[0]
    entropy = T.neg(T.tsum(T.xlogx(p)))
    return math.log(n) - entropy


def _as_key_list(keys) -> list:
    if isinstance(keys, Tensor):
        return [T.take(keys, [i]).reshape(keys.shape[-1]) for i in range(keys.shape[0])]
    return list(keys)


def contrastive_loss(query: Tensor, positive_keys, negative_keys,
                     tau_con: float) -> Tensor:
    """InfoNCE over cosine similarities: pull the query toward each selected
    key and away from every unselected key of the same pool.

    Multiple positives are averaged, each contrasted against all negatives.
    Stabilized in log-sum-exp form so small temperatures cannot overflow.
    """
    if tau_con <= 0:
        raise ValueError(f"tau_con must be > 0, got {tau_con}")
    positives = _as_key_list(positive_keys)
    negatives = _as_key_list(negative_keys)
    if not positives or not negatives:
        raise ValueError("contrastive_loss needs at least one positive and "
                         "one negative key")
    sp = T.stack([T.cosine_similarity(query, k) for k in positives]) / tau_con
    sn = T.stack([T.cosine_similarity(query, k) for k in negatives]) / tau_con
    shift = float(max(sp.data.max(), sn.data.max()))
    neg_mass = T.tsum(T.exp(sn - shift))
    losses = []
    for i in range(len(positives)):
        pos = T.take(sp, [i]).reshape(())
        lse = T.log(T.exp(pos - shift) + neg_mass) + shift
        losses.append(lse - pos)
    return T.tmean(T.stack([l.reshape(1) for l in losses]))


def alignment_loss(domain_reps, text_features, pooling: str = "mean") -> Tensor:
    """Batch-mean of 1 - cos(pooled domain representation, text feature).

    Each [T, d] representation is reduced over its T tokens (mean by
    default, 'first' keeps token 0) to pair with the d-vector text feature.
    """
    reps = list(domain_reps)
    texts = list(text_features)
    if len(reps) != len(texts):
        raise ShapeError(f"alignment_loss batch mismatch: {len(reps)} "
                         f"representations vs {len(texts)} text features")
    if not reps:
        raise ValueError("alignment_loss needs a non-empty batch")
    if pooling not in ("mean", "first"):
        raise ValueError(f"unknown pooling '{pooling}'")
    terms = []
    for rep, txt in zip(reps, texts):
        pooled = rep.mean(axis=0) if pooling == "mean" \
            else T.take(rep, [0]).reshape(rep.shape[1])
        terms.append((1.0 - T.cosine_similarity(pooled, txt)).reshape(1))
    return T.tmean(T.stack(terms))
