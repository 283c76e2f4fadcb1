"""Closed forms for Gaussian inputs under SIC decoding.

With ``S_i = H_i P_i P_i^H H_i^H`` the stage-k interference-plus-noise
covariance is ``Gamma_k = I + snr * sum_{i>k} S_i`` and the stage rate is
``log det(I + snr S_k Gamma_k^{-1})``.  The snr factor is kept explicit so
that stage rates telescope to the joint rate ``log det(I + snr sum_i S_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NonGaussianInput
from .inputs import GaussianInput


def _require_gaussian(system):
    for k, user in enumerate(system.users, start=1):
        if not isinstance(user.input_law, GaussianInput):
            raise NonGaussianInput(f"user {k} does not have a Gaussian input law")


def _check_stage(system, k):
    if not 1 <= k <= system.K:
        raise ValueError(f"stage {k} outside 1..{system.K}")


def covariances(system):
    """``S_i`` for every user."""
    _require_gaussian(system)
    out = []
    for u in system.users:
        A = u.gain
        out.append(A @ A.conj().T)
    return out


def _hermitian(M):
    return 0.5 * (M + M.conj().T)


def logdet_pd(M):
    """``log det`` of a Hermitian positive definite matrix via Cholesky."""
    c, _ = cho_factor(_hermitian(M), lower=True)
    return float(2.0 * np.sum(np.log(np.real(np.diag(c)))))


def _trace_solve(M, B):
    """``tr{M^{-1} B}`` for Hermitian PD ``M``."""
    return float(np.real(np.trace(cho_solve(cho_factor(_hermitian(M), lower=True), B))))


def _tail(S, start, snr, n_r):
    """``I + snr * sum_{i >= start} S_i`` (0-based ``start``)."""
    M = np.eye(n_r, dtype=complex)
    for Si in S[start:]:
        M = M + snr * Si
    return M


def gamma(system, k, snr):
    """Interference-plus-noise covariance seen at SIC stage ``k`` (1-based)."""
    _check_stage(system, k)
    return _tail(covariances(system), k, snr, system.n_r)


def mi_joint_gaussian(system, snr):
    return logdet_pd(_tail(covariances(system), 0, snr, system.n_r))


def mi_gaussian_stage(system, k, snr):
    """``I(x_k; y | x_1..x_{k-1})`` in nats for Gaussian inputs."""
    _check_stage(system, k)
    return _stage_mi(covariances(system), k, snr, system.n_r)[0]


def _stage_mi(S, k, snr, n_r):
    G = _tail(S, k, snr, n_r)
    # stage form: log det(I + snr S_k Gamma_k^{-1}) = log det(Gamma_k + snr S_k) - log det(Gamma_k)
    stage = logdet_pd(G + snr * S[k - 1]) - logdet_pd(G)
    telescoped = logdet_pd(_tail(S, k - 1, snr, n_r)) - logdet_pd(_tail(S, k, snr, n_r))
    return stage, telescoped


def stage_mi_forms(system, k, snr):
    """Stage rate computed two ways: Gamma-whitened stage form and telescoped log-dets."""
    _check_stage(system, k)
    return _stage_mi(covariances(system), k, snr, system.n_r)


def _tail_derivative(S, start, snr, n_r):
    # d/dsnr log det(I + snr T) = tr{(I + snr T)^{-1} T}
    if start >= len(S):
        return 0.0
    T = sum(S[start:])
    return _trace_solve(_tail(S, start, snr, n_r), T)


def mmse_gaussian_stage(system, k, snr):
    """Exact snr-derivative of the stage-k rate.

    For ``k = K`` this is the linear MMSE ``tr{(I + snr S_K)^{-1} S_K}``.
    """
    _check_stage(system, k)
    S = covariances(system)
    n_r = system.n_r
    return _tail_derivative(S, k - 1, snr, n_r) - _tail_derivative(S, k, snr, n_r)


def gamma_scaled_mmse(system, k, snr):
    """``tr{(Gamma_k + snr S_k)^{-1} S_k}``: stage linear MMSE with ``Gamma_k`` frozen.

    Differs from :func:`mmse_gaussian_stage` by
    ``tr{(Gamma_k + snr S_k)^{-1} T_k} - tr{Gamma_k^{-1} T_k} <= 0`` where
    ``T_k`` is the residual interference; equal at the last stage.
    """
    _check_stage(system, k)
    S = covariances(system)
    G = _tail(S, k, snr, system.n_r)
    return _trace_solve(G + snr * S[k - 1], S[k - 1])


def joint_derivative(system, snr):
    """``d/dsnr log det(I + snr sum_i S_i)``."""
    return _tail_derivative(covariances(system), 0, snr, system.n_r)


@dataclass(frozen=True)
class LinearTerms:
    """Joint linear-MMSE quantities: per-user ``tr{A_k E_k A_k^H}`` and psi."""

    mmse_per_user: tuple
    error_matrices: tuple
    cross_correlations: dict
    psi: float

    @property
    def mmse_total(self):
        return float(sum(self.mmse_per_user))


def linear_terms(system, snr):
    """Per-user error matrices and cross terms of the joint linear MMSE receiver.

    With ``R = I + snr sum_i S_i`` the estimates are
    ``x_hat_k = sqrt(snr) A_k^H R^{-1} y``, giving
    ``E_k = I - snr A_k^H R^{-1} A_k`` and
    ``E[x_hat_k x_hat_j^H] = snr A_k^H R^{-1} A_j``.
    """
    _require_gaussian(system)
    S = covariances(system)
    R = _tail(S, 0, snr, system.n_r)
    cf = cho_factor(_hermitian(R), lower=True)
    gains = [u.gain for u in system.users]
    solved = [cho_solve(cf, A) for A in gains]
    E, mmse = [], []
    for A, RA in zip(gains, solved):
        Ek = np.eye(A.shape[1]) - snr * (A.conj().T @ RA)
        E.append(Ek)
        mmse.append(float(np.real(np.trace(A @ Ek @ A.conj().T))))
    cross = {}
    psi = 0j
    for k, Ak in enumerate(gains):
        for j, RAj in enumerate(solved):
            if j == k:
                continue
            C = snr * (Ak.conj().T @ RAj)
            cross[(k, j)] = C
            psi -= np.trace(Ak @ C @ gains[j].conj().T)
    return LinearTerms(tuple(mmse), tuple(E), cross, float(psi.real))


@dataclass(frozen=True, eq=False)
class GaussianStageReport:
    stage: int  # 1-based
    gamma: np.ndarray
    mi: float  # nats
    mi_telescoped: float
    mmse: float  # exact stage derivative
    gamma_scaled_mmse: float
    marginal_mi: float  # I(x_k; y), every other user as noise


def gaussian_report(system, snr):
    """Per-stage closed forms; checks that stage derivatives sum to the joint one."""
    _require_gaussian(system)
    S = covariances(system)
    n_r = system.n_r
    total = _tail(S, 0, snr, n_r)
    joint_ld = logdet_pd(total)
    out = []
    for k in range(1, system.K + 1):
        stage, tele = _stage_mi(S, k, snr, n_r)
        others = [Si for i, Si in enumerate(S) if i != k - 1]
        out.append(
            GaussianStageReport(
                stage=k,
                gamma=_tail(S, k, snr, n_r),
                mi=stage,
                mi_telescoped=tele,
                mmse=_tail_derivative(S, k - 1, snr, n_r) - _tail_derivative(S, k, snr, n_r),
                gamma_scaled_mmse=_trace_solve(_tail(S, k, snr, n_r) + snr * S[k - 1], S[k - 1]),
                marginal_mi=joint_ld - logdet_pd(_tail(others, 0, snr, n_r)),
            )
        )
    deriv = sum(r.mmse for r in out)
    exact = _tail_derivative(S, 0, snr, n_r)
    if not np.isclose(deriv, exact, rtol=1e-10, atol=1e-14):
        raise ArithmeticError(f"stage derivatives sum to {deriv!r}, joint derivative is {exact!r}")
    return out
