"""Monte Carlo mutual information for discrete inputs (nats).

Every estimator reads the same block stream for a given seed, so joint,
marginal and SIC-conditional terms computed with equal seeds share their
random numbers and identity residuals cancel to first order.  Conditional
densities ``p(y | x_1..x_p)`` marginalize the remaining users exactly over
their priors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bayes import JointSupport, logsumexp_rows
from .inputs import DEFAULT_ENUMERATION_CAP
from .sampling import gather, map_blocks, std_error


@dataclass(frozen=True, eq=False)
class MiEstimate:
    value: float
    std_error: float
    samples: int
    kind: str  # "joint", "marginal(k)" or "conditional(k)", k 1-based
    per_sample: np.ndarray | None = field(default=None, repr=False)


def _estimate(values, kind):
    return MiEstimate(float(values.mean()), float(std_error(values)), values.shape[0], kind, values)


def mi_terms(support, idx, noise, snr, G=None):
    """Per-sample log-density differences for one block.

    Returns ``joint`` (B,), ``marginal`` (B, K) and ``conditional`` (B, K),
    where column ``k`` of ``conditional`` is
    ``log p(y|x_1..x_{k+1}) - log p(y|x_1..x_k)``.
    """
    parts = []
    for sl in support.chunks(noise.shape[0]):
        g = None if G is None else G[sl]
        parts.append(_mi_chunk(support, idx[sl], noise[sl], snr, g))
    return {key: np.concatenate([p[key] for p in parts], axis=0) for key in parts[0]}


def _mi_chunk(support, idx, noise, snr, G):
    K = support.K
    B = noise.shape[0]
    rows = np.arange(B)
    if G is None:
        G = support.log_joint(support.received(idx, noise, snr), snr)
    # given all inputs, y - mean is exactly the noise
    full = -np.sum(np.abs(noise) ** 2, axis=1)
    lse = logsumexp_rows(G)
    Gr = G.reshape((B,) + support.shape)
    known_lp = [lp[idx[:, k]] for k, lp in enumerate(support.log_probs)]

    # prefix[:, p] = log p(y | x_1..x_p) + n_r log(pi)
    prefix = np.empty((B, K + 1))
    prefix[:, 0] = lse
    prefix[:, K] = full
    for p in range(1, K):
        sub = Gr[(rows,) + tuple(idx[:, i] for i in range(p))]
        prefix[:, p] = logsumexp_rows(sub.reshape(B, -1)) - sum(known_lp[:p])

    marginal = np.empty((B, K))
    for k in range(K):
        if K == 1:
            given = full
        else:
            sub = np.moveaxis(Gr, k + 1, 1)[rows, idx[:, k]]
            given = logsumexp_rows(sub.reshape(B, -1)) - known_lp[k]
        marginal[:, k] = given - lse

    return {
        "joint": full - lse,
        "marginal": marginal,
        "conditional": np.diff(prefix, axis=1),
    }


def _run(system, snr, samples, seed, threads, cap):
    support = JointSupport(system, cap)

    def fn(block):
        return mi_terms(support, block.idx, block.noise, snr)

    results = map_blocks(fn, system, samples, seed, threads)
    return {key: gather(results, key) for key in results[0]}


def _check_user(system, k):
    if not 1 <= k <= system.K:
        raise ValueError(f"user index {k} outside 1..{system.K}")


def mi_joint(system, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """``I(x_1..x_K; y)``."""
    return _estimate(_run(system, snr, samples, seed, threads, cap)["joint"], "joint")


def mi_marginal(system, k, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """``I(x_k; y)`` with every other user treated as interference (k is 1-based)."""
    _check_user(system, k)
    terms = _run(system, snr, samples, seed, threads, cap)
    return _estimate(terms["marginal"][:, k - 1], f"marginal({k})")


def mi_conditional(system, k, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """SIC stage rate ``I(x_k; y | x_1..x_{k-1})`` (k is 1-based)."""
    _check_user(system, k)
    terms = _run(system, snr, samples, seed, threads, cap)
    return _estimate(terms["conditional"][:, k - 1], f"conditional({k})")


def mi_all(system, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """Joint, per-user marginal and per-stage conditional estimates in one pass."""
    terms = _run(system, snr, samples, seed, threads, cap)
    K = system.K
    return (
        _estimate(terms["joint"], "joint"),
        [_estimate(terms["marginal"][:, k], f"marginal({k + 1})") for k in range(K)],
        [_estimate(terms["conditional"][:, k], f"conditional({k + 1})") for k in range(K)],
    )
