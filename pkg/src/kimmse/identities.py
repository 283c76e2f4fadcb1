"""Verification of the multiuser I-MMSE relations.

Checks implemented here:

* ``theorem1`` -- ``dI/dsnr = mmse_total + psi`` for discrete inputs, with
  the left side a common-random-number central difference of the joint
  Monte Carlo mutual information.
* ``aggregate`` -- the right side against the MMSE of the aggregate signal
  ``z = sum_k H_k P_k x_k`` and its exact per-sample split.
* ``chain-rule``, ``sic-gap-sign-k``, ``sic-gap-integral-k`` -- SIC
  decomposition consequences that do not need the unspecified per-stage
  snr scalings.
* ``gauss-*`` -- closed-form checks for all-Gaussian systems.

A report passes when ``|residual| <= max(abs_tol, z_tol * std_error)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian
from .bayes import JointSupport, _report, aggregate_summary, estimation_terms
from .errors import GridTooSmall, StepTooLarge
from .inputs import DEFAULT_ENUMERATION_CAP
from .mi import MiEstimate, mi_terms
from .sampling import gather, map_blocks, std_error

MC_REL_STEP = 1e-3
CLOSED_FORM_REL_STEP = 1e-5
GAP_GRID_POINTS = 16
GAP_GRID_DECADES = 1.5


@dataclass(frozen=True)
class IdentityReport:
    identity: str
    snr: float
    lhs: float
    rhs: float
    residual: float
    std_error: float
    passed: bool
    threshold: float
    components: dict = field(default_factory=dict, compare=False)

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{self.identity:<22s} {self.snr:10.5g} {self.lhs:14.8g} {self.rhs:14.8g} "
            f"{self.residual:12.4e} {self.std_error:10.3e}  {verdict}"
        )


def _judge(identity, snr, lhs, rhs, se, abs_tol, z_tol, **components):
    residual = float(lhs) - float(rhs)
    threshold = max(float(abs_tol), float(z_tol) * float(se))
    return IdentityReport(
        identity,
        float(snr),
        float(lhs),
        float(rhs),
        residual,
        float(se),
        bool(abs(residual) <= threshold),
        threshold,
        components,
    )


# --- numerical plumbing ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class FdDerivative:
    value: float
    std_error: float
    per_sample: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        yield self.value
        yield self.std_error


def _fd_steps(snr, rel_step):
    if not rel_step > 0:
        raise ValueError("rel_step must be positive")
    if snr <= 0 or rel_step >= 0.5 or snr * (1.0 - rel_step) <= 0:
        raise StepTooLarge(f"snr={snr!r}, rel_step={rel_step!r}")
    return snr * (1.0 - rel_step), snr * (1.0 + rel_step)


def fd_derivative(f, snr, rel_step=MC_REL_STEP):
    """Central difference of ``f`` at ``snr`` with relative step ``rel_step``.

    ``f`` may return a float or an :class:`MiEstimate`.  When both estimates
    carry per-sample values (common random numbers), the standard error comes
    from the per-sample differences; otherwise the two errors add in quadrature.
    """
    lo_snr, hi_snr = _fd_steps(snr, rel_step)
    lo, hi = f(lo_snr), f(hi_snr)
    width = hi_snr - lo_snr
    if not isinstance(lo, MiEstimate):
        return FdDerivative((float(hi) - float(lo)) / width, 0.0)
    if (
        lo.per_sample is not None
        and hi.per_sample is not None
        and lo.per_sample.shape == hi.per_sample.shape
    ):
        d = (hi.per_sample - lo.per_sample) / width
        return FdDerivative(float(d.mean()), float(std_error(d)), d)
    return FdDerivative((hi.value - lo.value) / width, math.hypot(lo.std_error, hi.std_error) / width)


def quadrature(values, grid, zero_value=None):
    """Composite trapezoid over ``[0, max(grid)]``.

    The integrand at ``snr = 0`` is ``zero_value`` (its analytic limit);
    by default the first sample is extended flat to the origin.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise GridTooSmall("quadrature needs at least two grid points")
    if values.shape != grid.shape:
        raise ValueError("values and grid differ in length")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    v0 = values[0] if zero_value is None else float(zero_value)
    x = np.concatenate(([0.0], grid))
    y = np.concatenate(([v0], values))
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def log_grid(snr, points=GAP_GRID_POINTS, decades=GAP_GRID_DECADES):
    return np.geomspace(snr * 10.0 ** (-decades), snr, int(points))


# --- shared Monte Carlo evaluation ----------------------------------------


@dataclass(frozen=True, eq=False)
class PointEvaluation:
    """Everything measured at one snr on one common sample stream.

    ``mi`` maps ``"lo"``, ``"mid"``, ``"hi"`` to per-sample MI terms at
    ``snr (1 - h)``, ``snr`` and ``snr (1 + h)``; ``estimation`` holds the
    per-sample estimation and aggregate arrays at ``snr``.
    """

    snr: float
    rel_step: float
    support: JointSupport
    mi: dict
    estimation: dict

    @property
    def samples(self):
        return self.estimation["psi"].shape[0]

    @property
    def width(self):
        return 2.0 * self.snr * self.rel_step

    def mi_estimate(self, kind, k=None, where="mid"):
        terms = self.mi[where]
        if kind == "joint":
            values = terms["joint"]
            label = "joint"
        else:
            values = terms[kind][:, k - 1]
            label = f"{kind}({k})"
        return MiEstimate(float(values.mean()), float(std_error(values)), values.shape[0], label, values)

    def fd(self, kind, k=None):
        lo = self.mi["lo"]["joint"] if kind == "joint" else self.mi["lo"][kind][:, k - 1]
        hi = self.mi["hi"]["joint"] if kind == "joint" else self.mi["hi"][kind][:, k - 1]
        d = (hi - lo) / self.width
        return FdDerivative(float(d.mean()), float(std_error(d)), d)

    def report(self):
        return _report(self.support, self.snr, self.estimation)

    def aggregate(self):
        return aggregate_summary(self.support, self.estimation)


def evaluate_point(
    system, snr, samples, seed, rel_step=MC_REL_STEP, threads=1, cap=DEFAULT_ENUMERATION_CAP
):
    lo_snr, hi_snr = _fd_steps(snr, rel_step)
    support = JointSupport(system, cap)
    snrs = {"lo": lo_snr, "mid": snr, "hi": hi_snr}

    def fn(block):
        out = {}
        for name, s in snrs.items():
            for key, v in mi_terms(support, block.idx, block.noise, s).items():
                out[f"{name}:{key}"] = v
        out.update(estimation_terms(support, block.idx, block.noise, snr, aggregate=True))
        return out

    results = map_blocks(fn, system, samples, seed, threads)
    arrays = {key: gather(results, key) for key in results[0]}
    mi = {name: {} for name in snrs}
    est = {}
    for key, v in arrays.items():
        if ":" in key:
            name, sub = key.split(":", 1)
            mi[name][sub] = v
        else:
            est[key] = v
    return PointEvaluation(float(snr), float(rel_step), support, mi, est)


def evaluate_mi(system, snrs, samples, seed, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """Per-sample MI terms at each snr in ``snrs``, all on the same draws."""
    support = JointSupport(system, cap)
    snrs = [float(s) for s in snrs]

    def fn(block):
        out = {}
        for i, s in enumerate(snrs):
            for key, v in mi_terms(support, block.idx, block.noise, s).items():
                out[f"{i}:{key}"] = v
        return out

    results = map_blocks(fn, system, samples, seed, threads)
    arrays = {key: gather(results, key) for key in results[0]}
    return [
        {key.split(":", 1)[1]: v for key, v in arrays.items() if key.startswith(f"{i}:")}
        for i in range(len(snrs))
    ]


def _point(scenario, snr, threads, point):
    if point is not None:
        return point
    return evaluate_point(
        scenario.system, snr, scenario.sample_budget, scenario.seed, scenario.fd_step_rel, threads
    )


# --- discrete-input identities ----------------------------------------------


def verify_theorem1(scenario, snr, threads=1, point=None):
    """``dI/dsnr`` (finite difference) against ``mmse_total + psi``."""
    tol = scenario.tolerances
    pe = _point(scenario, snr, threads, point)
    rep = pe.report()
    fd = pe.fd("joint")
    rhs_ps = rep.rhs_per_sample
    tr_ez = pe.estimation["tr_ez"]
    return _judge(
        "theorem1",
        snr,
        fd.value,
        rep.rhs,
        std_error(fd.per_sample - rhs_ps),
        tol["abs_tol"],
        tol["z_tol"],
        mmse_total=rep.mmse_total,
        psi=rep.psi,
        psi_imag=rep.psi_imag,
        mmse_per_user=rep.mmse_per_user.tolist(),
        fd_std_error=fd.std_error,
        rhs_std_error=float(std_error(rhs_ps)),
        tr_ez=float(tr_ez.mean()),
        decomposition_gap=float(rep.rhs - tr_ez.mean()),
        decomposition_std_error=float(std_error(rhs_ps - tr_ez)),
        max_sample_residual=float(pe.estimation["resid"].max()),
    )


def verify_aggregate(scenario, snr, threads=1, point=None):
    """Cross-checks against the aggregate-signal MMSE oracle.

    ``aggregate``: ``mmse_total + psi`` against ``E tr Cov(z|y)``;
    ``aggregate-split``: worst per-sample relative residual of the algebraic
    split (threshold ``decomposition_rel_tol``);
    ``cross-moment-k-j``: the Monte Carlo mean of ``E[x_k x_j^H | y]``, whose
    largest entry in units of its own standard error must stay within ``z_tol``.
    """
    tol = scenario.tolerances
    pe = _point(scenario, snr, threads, point)
    rep = pe.report()
    agg = pe.aggregate()
    rhs_ps = rep.rhs_per_sample
    out = [
        _judge(
            "aggregate",
            snr,
            rep.rhs,
            agg.value,
            std_error(rhs_ps - pe.estimation["tr_ez"]),
            tol["abs_tol"],
            tol["z_tol"],
        ),
        _judge(
            "aggregate-split",
            snr,
            agg.max_residual,
            0.0,
            0.0,
            tol["decomposition_rel_tol"],
            0.0,
        ),
    ]
    for (k, j), mean in agg.cross_moment_mean.items():
        se = agg.cross_moment_se[(k, j)]
        z = max(_zmax(mean.real, se.real), _zmax(mean.imag, se.imag))
        out.append(
            IdentityReport(
                f"cross-moment-{k + 1}-{j + 1}",
                float(snr),
                float(np.max(np.abs(mean))),
                0.0,
                float(np.max(np.abs(mean))),
                float(np.max(np.abs(se))),
                bool(z <= tol["z_tol"]),
                float(tol["z_tol"]),
                {"max_z": z},
            )
        )
    return out


def _zmax(mean, se):
    mean = np.abs(np.asarray(mean))
    se = np.asarray(se)
    z = np.where(se > 0, mean / np.where(se > 0, se, 1.0), np.where(mean > 0, np.inf, 0.0))
    return float(np.max(z))


def verify_sic(
    scenario,
    snr,
    threads=1,
    point=None,
    include_integral=True,
    grid_points=GAP_GRID_POINTS,
    grid_decades=GAP_GRID_DECADES,
):
    """Chain rule, conditioning-gap sign and gap integral per user."""
    tol = scenario.tolerances
    system = scenario.system
    pe = _point(scenario, snr, threads, point)
    mid = pe.mi["mid"]
    K = system.K

    joint = mid["joint"]
    cond = mid["conditional"]
    combined = math.sqrt(
        float(std_error(joint)) ** 2 + sum(float(std_error(cond[:, k])) ** 2 for k in range(K))
    )
    reports = [
        _judge(
            "chain-rule",
            snr,
            joint.mean(),
            cond.sum(axis=1).mean(),
            combined,
            0.0,
            tol["z_tol"],
            per_sample_max=float(np.max(np.abs(joint - cond.sum(axis=1)))),
        )
    ]

    gaps = cond - mid["marginal"]
    for k in range(K):
        g = gaps[:, k]
        se = float(std_error(g))
        gap = float(g.mean())
        reports.append(
            IdentityReport(
                f"sic-gap-sign-{k + 1}",
                float(snr),
                gap,
                0.0,
                min(gap, 0.0),
                se,
                bool(gap >= -tol["z_tol"] * se),
                tol["z_tol"] * se,
                {"conditional": float(cond[:, k].mean()), "marginal": float(mid["marginal"][:, k].mean())},
            )
        )

    if include_integral:
        grid = log_grid(snr, grid_points, grid_decades)
        h = scenario.fd_step_rel
        steps = [s for g in grid for s in _fd_steps(g, h)]
        terms = evaluate_mi(system, steps, scenario.sample_budget, scenario.seed, threads)
        for k in range(K):
            deriv = []
            for i, g in enumerate(grid):
                lo, hi = terms[2 * i], terms[2 * i + 1]
                dg = (hi["conditional"][:, k] - hi["marginal"][:, k]) - (
                    lo["conditional"][:, k] - lo["marginal"][:, k]
                )
                deriv.append(float(dg.mean()) / (2.0 * g * h))
            # both derivatives equal tr{H_k P_k (H_k P_k)^H} at snr = 0
            integral = quadrature(deriv, grid, zero_value=0.0)
            gap = float(gaps[:, k].mean())
            se = float(std_error(gaps[:, k]))
            residual = gap - integral
            threshold = max(tol["gap_rel_tol"] * abs(gap), tol["z_tol"] * se)
            reports.append(
                IdentityReport(
                    f"sic-gap-integral-{k + 1}",
                    float(snr),
                    gap,
                    integral,
                    residual,
                    se,
                    bool(abs(residual) <= threshold),
                    threshold,
                    {"grid": grid.tolist(), "derivative_gap": deriv},
                )
            )
    return reports


# --- Gaussian closed forms ----------------------------------------------------


def _rel_judge(identity, snr, lhs, rhs, rel_tol, **components):
    scale = max(abs(lhs), abs(rhs))
    return _judge(identity, snr, lhs, rhs, 0.0, rel_tol * scale, 0.0, **components)


def _aggregate_lmmse(system, users, snr):
    users = list(users)
    if not users:
        return 0.0
    lt = gaussian.linear_terms(system.subsystem(users), snr)
    return lt.mmse_total + lt.psi


def verify_gaussian(scenario, snr, rel_step=CLOSED_FORM_REL_STEP):
    """Closed-form checks for Gaussian inputs.

    Per stage: analytic derivative against a central difference of the stage
    rate, and the zero correction between the stage derivative and the stage
    MMSE.  Jointly: telescoping of stage rates, sum of stage derivatives, and
    the linear-MMSE form of ``mmse_total + psi``.
    """
    system = scenario.system
    rel = scenario.tolerances["gaussian_rel_tol"]
    stages = gaussian.gaussian_report(system, snr)
    lo, hi = _fd_steps(snr, rel_step)
    out = []
    for st in stages:
        k = st.stage
        fd = (gaussian.mi_gaussian_stage(system, k, hi) - gaussian.mi_gaussian_stage(system, k, lo)) / (hi - lo)
        out.append(
            _rel_judge(
                f"gauss-stage-{k}",
                snr,
                fd,
                st.mmse,
                rel,
                gamma_scaled_mmse=st.gamma_scaled_mmse,
                stage_mi=st.mi,
            )
        )
        # stage derivative as a difference of aggregate linear-MMSE traces
        linear = _aggregate_lmmse(system, range(k - 1, system.K), snr) - _aggregate_lmmse(
            system, range(k, system.K), snr
        )
        out.append(
            _judge(
                f"gauss-stage-psi-{k}",
                snr,
                st.mmse,
                linear,
                0.0,
                rel * max(abs(st.mmse), abs(linear), 1e-300),
                0.0,
                psi_correction=st.mmse - linear,
            )
        )
    joint = gaussian.mi_joint_gaussian(system, snr)
    out.append(_rel_judge("gauss-telescoping", snr, sum(st.mi for st in stages), joint, rel))
    jd = gaussian.joint_derivative(system, snr)
    out.append(_rel_judge("gauss-joint-derivative", snr, sum(st.mmse for st in stages), jd, rel))
    lt = gaussian.linear_terms(system, snr)
    out.append(
        _rel_judge(
            "gauss-theorem1",
            snr,
            jd,
            lt.mmse_total + lt.psi,
            rel,
            mmse_total=lt.mmse_total,
            psi=lt.psi,
        )
    )
    return out
