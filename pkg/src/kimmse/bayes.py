"""Exact posterior computations for discrete multiuser inputs.

All likelihood weights live in the log domain; normalization is done with
log-sum-exp so nothing underflows at high snr.  Monte Carlo reports average
over joint draws of the inputs and the noise using the block streams from
:mod:`kimmse.sampling`.

Conventions: ``G[b, s] = log prior(s) - ||y_b - sqrt(snr) z_s||^2`` where
``z_s = sum_k H_k P_k x_k`` for joint support point ``s``.  The ``-n_r log pi``
constant of the Gaussian density is added back only where a density value
is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import EnumerationCapExceeded, GaussianInputPresent
from .inputs import DEFAULT_ENUMERATION_CAP, Constellation
from .sampling import chunk_rows, gather, map_blocks, std_error

LOG_PI = math.log(math.pi)


class JointSupport:
    """Enumerated joint support of a discrete system, flattened C-order."""

    def __init__(self, system, cap=DEFAULT_ENUMERATION_CAP):
        laws = []
        for k, user in enumerate(system.users, start=1):
            if not isinstance(user.input_law, Constellation):
                raise GaussianInputPresent(f"user {k} has a Gaussian input law")
            laws.append(user.input_law)
        self.shape = tuple(law.size for law in laws)
        size = math.prod(self.shape)
        if size > cap:
            raise EnumerationCapExceeded(size, cap)
        self.K = len(laws)
        self.n_r = system.n_r
        self.points = [law.points for law in laws]
        self.log_probs = [law.log_probs for law in laws]
        self.gains = [u.gain for u in system.users]
        # unit-snr receive-space image of every constellation point, (m_k, n_r)
        self.user_signals = [pts @ A.T for pts, A in zip(self.points, self.gains)]
        grid = np.indices(self.shape).reshape(self.K, -1).T
        self.index = grid
        self.signals = sum(sig[grid[:, k]] for k, sig in enumerate(self.user_signals))
        self.log_prior = sum(lp[grid[:, k]] for k, lp in enumerate(self.log_probs))
        self.signal_energy = np.sum(np.abs(self.signals) ** 2, axis=1)

    @property
    def size(self):
        return self.signals.shape[0]

    def flat(self, idx):
        return np.ravel_multi_index(tuple(idx.T), self.shape)

    def received(self, idx, noise, snr):
        return math.sqrt(snr) * self.signals[self.flat(idx)] + noise

    def log_joint(self, y, snr):
        """``G`` for a batch of observations ``y`` of shape (B, n_r)."""
        a = math.sqrt(snr)
        cross = (y @ self.signals.conj().T).real
        energy = np.sum(np.abs(y) ** 2, axis=1)
        return self.log_prior[None, :] - (
            energy[:, None] - 2.0 * a * cross + snr * self.signal_energy[None, :]
        )

    def chunks(self, rows):
        return chunk_rows(rows, self.size, self.n_r)


def logsumexp_rows(a):
    """Row-wise ``log sum exp`` of a 2-D array."""
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def _sqnorm(a):
    return a.real**2 + a.imag**2 if a.ndim < 3 else np.sum(a.real**2 + a.imag**2, axis=-1)


def marginals(support, w):
    """Per-user and pairwise posterior marginals from joint weights ``w`` (B, S)."""
    B = w.shape[0]
    wr = w.reshape((B,) + support.shape)
    axes = set(range(1, support.K + 1))
    single = [wr.sum(axis=tuple(axes - {k + 1})) for k in range(support.K)]
    pair = {
        (k, j): wr.sum(axis=tuple(axes - {k + 1, j + 1}))
        for k, j in combinations(range(support.K), 2)
    }
    return single, pair


def log_likelihood(y, xs, system, snr):
    """``log p(y | x_1..x_K)`` in nats, normalization constant included."""
    y = np.asarray(y, dtype=complex).ravel()
    mean = sum(
        math.sqrt(snr) * (u.channel @ u.precoder) @ np.asarray(x, dtype=complex).ravel()
        for u, x in zip(system.users, xs)
    )
    r = y - mean
    return float(-system.n_r * LOG_PI - np.real(np.vdot(r, r)))


@dataclass(frozen=True, eq=False)
class PosteriorStats:
    means: tuple  # x_hat_k, length n_t_k
    second_moments: tuple  # E[x_k x_k^H | y]
    cross_moments: dict  # (k, j) -> E[x_k x_j^H | y], k != j
    log_evidence: float

    def error_covariance(self, k):
        m = self.means[k]
        return self.second_moments[k] - np.outer(m, m.conj())


def posterior(y, system, snr, cap=DEFAULT_ENUMERATION_CAP):
    support = JointSupport(system, cap)
    y = np.asarray(y, dtype=complex).reshape(1, -1)
    G = support.log_joint(y, snr)
    lse = logsumexp_rows(G)
    w = np.exp(G - lse[:, None])
    single, pair = marginals(support, w)
    means = tuple((q @ U)[0] for q, U in zip(single, support.points))
    second = tuple(
        np.einsum("i,ia,ic->ac", q[0], U, U.conj()) for q, U in zip(single, support.points)
    )
    cross = {}
    for (k, j), q in pair.items():
        m = np.einsum("il,ia,lc->ac", q[0], support.points[k], support.points[j].conj())
        cross[(k, j)] = m
        cross[(j, k)] = m.conj().T
    return PosteriorStats(means, second, cross, float(lse[0] - support.n_r * LOG_PI))


# --- Monte Carlo reports ---------------------------------------------------


def estimation_terms(support, idx, noise, snr, aggregate=False):
    """Per-sample estimation quantities for one block of draws.

    Returns a dict of arrays with leading sample axis: ``mmse`` (B, K),
    ``psi`` (B,), ``err_k`` error outer products, ``cc_k_j`` products of
    posterior means; with ``aggregate`` also ``tr_ez``, ``decomp``,
    ``resid`` and the conditional cross moments ``xm_k_j``.
    """
    out = {}
    parts = []
    for sl in support.chunks(noise.shape[0]):
        parts.append(_estimation_chunk(support, idx[sl], noise[sl], snr, aggregate))
    for key in parts[0]:
        out[key] = np.concatenate([p[key] for p in parts], axis=0)
    return out


def _estimation_chunk(support, idx, noise, snr, aggregate):
    K = support.K
    y = support.received(idx, noise, snr)
    G = support.log_joint(y, snr)
    lse = logsumexp_rows(G)
    w = np.exp(G - lse[:, None])
    single, pair = marginals(support, w)

    xhat = [q @ U for q, U in zip(single, support.points)]
    zhat = [xh @ A.T for xh, A in zip(xhat, support.gains)]
    out = {}
    mmse = np.empty((y.shape[0], K))
    for k in range(K):
        err = support.points[k][idx[:, k]] - xhat[k]
        mmse[:, k] = np.sum(np.abs(err @ support.gains[k].T) ** 2, axis=1)
        out[f"err_{k}"] = err[:, :, None] * err[:, None, :].conj()
    out["mmse"] = mmse
    ztot = sum(zhat)
    out["psi"] = -(
        np.sum(np.abs(ztot) ** 2, axis=1) - sum(np.sum(np.abs(z) ** 2, axis=1) for z in zhat)
    )
    for k, j in combinations(range(K), 2):
        out[f"cc_{k}_{j}"] = xhat[k][:, :, None] * xhat[j][:, None, :].conj()

    if aggregate:
        diff = support.signals[None, :, :] - ztot[:, None, :]
        out["tr_ez"] = np.sum(w * _sqnorm(diff), axis=1)
        d = [sig[None, :, :] - z[:, None, :] for sig, z in zip(support.user_signals, zhat)]
        diag = sum(np.sum(q * _sqnorm(dk), axis=1) for q, dk in zip(single, d))
        off = np.zeros(y.shape[0])
        scale = diag.copy()
        for (k, j), q in pair.items():
            c = np.sum(d[k] * np.matmul(q, d[j].conj()), axis=(1, 2))
            off += 2.0 * c.real
            scale += 2.0 * np.abs(c)
            out[f"xm_{k}_{j}"] = np.matmul(
                support.points[k].T, np.matmul(q, support.points[j].conj())
            )
        decomp = diag + off
        out["decomp"] = decomp
        denom = np.maximum(np.maximum(out["tr_ez"], scale), np.finfo(float).tiny)
        out["resid"] = np.abs(out["tr_ez"] - decomp) / denom
    return out


@dataclass(frozen=True, eq=False)
class EstimationReport:
    snr: float
    error_matrices: tuple  # E_k, (n_t_k, n_t_k)
    mmse_per_user: np.ndarray
    mmse_per_user_se: np.ndarray
    cross_correlations: dict  # (k, j) -> E_y[x_hat_k x_hat_j^H], k != j
    mmse_total: float
    mmse_total_se: float
    psi: float
    psi_se: float
    psi_imag: float
    samples: int
    per_sample: dict = field(default=None, repr=False)

    @property
    def rhs(self):
        return self.mmse_total + self.psi

    @property
    def rhs_per_sample(self):
        return self.per_sample["mmse"].sum(axis=1) + self.per_sample["psi"]


def _report(support, snr, arrays):
    K = support.K
    n = arrays["psi"].shape[0]
    E = tuple(arrays[f"err_{k}"].mean(axis=0) for k in range(K))
    mmse_k = np.array(
        [np.real(np.trace(A @ Ek @ A.conj().T)) for A, Ek in zip(support.gains, E)]
    )
    cross = {}
    psi_c = 0j
    for k, j in combinations(range(K), 2):
        C = arrays[f"cc_{k}_{j}"].mean(axis=0)
        cross[(k, j)] = C
        cross[(j, k)] = C.conj().T
    for (k, j), C in cross.items():
        psi_c -= np.trace(support.gains[k] @ C @ support.gains[j].conj().T)
    total_ps = arrays["mmse"].sum(axis=1)
    return EstimationReport(
        snr=float(snr),
        error_matrices=E,
        mmse_per_user=mmse_k,
        mmse_per_user_se=std_error(arrays["mmse"]),
        cross_correlations=cross,
        mmse_total=float(mmse_k.sum()),
        mmse_total_se=float(std_error(total_ps)),
        psi=float(psi_c.real),
        psi_se=float(std_error(arrays["psi"])),
        psi_imag=float(psi_c.imag),
        samples=n,
        per_sample=arrays,
    )


def _run_estimation(system, support, users, snr, samples, seed, threads, aggregate):
    def fn(block):
        return estimation_terms(support, block.idx[:, users], block.noise, snr, aggregate)

    results = map_blocks(fn, system, samples, seed, threads)
    return {key: gather(results, key) for key in results[0]}


def estimation_report(system, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """Monte Carlo per-user MMSE matrices, cross-correlations and ``psi``."""
    if samples < 2:
        raise ValueError("estimation_report needs at least 2 samples")
    support = JointSupport(system, cap)
    arrays = _run_estimation(system, support, list(range(system.K)), snr, samples, seed, threads, False)
    return _report(support, snr, arrays)


def conditional_estimation_report(
    system, snr, known_prefix_len, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP
):
    """Estimation report with users ``1..m`` revealed and cancelled from ``y``.

    The posterior runs over the remaining users only; draws of the revealed
    prefix come from the same stream as the full system, so ``m=0`` matches
    :func:`estimation_report` exactly.
    """
    m = int(known_prefix_len)
    if not 0 <= m < system.K:
        raise ValueError("known_prefix_len must satisfy 0 <= m < K")
    if samples < 2:
        raise ValueError("conditional_estimation_report needs at least 2 samples")
    JointSupport(system, cap)  # same preconditions as the full system
    users = list(range(m, system.K))
    support = JointSupport(system.subsystem(users), cap)
    arrays = _run_estimation(system, support, users, snr, samples, seed, threads, False)
    return _report(support, snr, arrays)


@dataclass(frozen=True, eq=False)
class AggregateMmse:
    value: float  # E_y tr{Cov(z | y)}
    std_error: float
    max_residual: float  # worst per-sample relative decomposition residual
    cross_moment_mean: dict  # (k, j) -> E_y E[x_k x_j^H | y], k < j
    cross_moment_se: dict  # entrywise standard errors (real, imag)
    samples: int
    per_sample: dict = field(default=None, repr=False)


def aggregate_summary(support, arrays):
    mean, se = {}, {}
    for k, j in combinations(range(support.K), 2):
        xm = arrays[f"xm_{k}_{j}"]
        mean[(k, j)] = xm.mean(axis=0)
        se[(k, j)] = std_error(xm.real) + 1j * std_error(xm.imag)
    return AggregateMmse(
        value=float(arrays["tr_ez"].mean()),
        std_error=float(std_error(arrays["tr_ez"])),
        max_residual=float(arrays["resid"].max()),
        cross_moment_mean=mean,
        cross_moment_se=se,
        samples=arrays["tr_ez"].shape[0],
        per_sample=arrays,
    )


def aggregate_mmse(system, snr, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """MMSE of the aggregate signal ``sum_k H_k P_k x_k`` with its per-sample split."""
    support = JointSupport(system, cap)
    arrays = _run_estimation(system, support, list(range(system.K)), snr, samples, seed, threads, True)
    return aggregate_summary(support, arrays)
