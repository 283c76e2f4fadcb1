"""Command line driver: ``kimmse scenario-init | sweep | verify``.

Exit codes: 0 ok, 2 input error, 3 enumeration cap exceeded, 4 identity
failure (``verify`` always, ``sweep`` only with ``--strict``).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, gaussian
from .errors import EnumerationCapExceeded, KimmseError, ScenarioError
from .identities import (
    CLOSED_FORM_REL_STEP,
    evaluate_point,
    verify_aggregate,
    verify_gaussian,
    verify_sic,
    verify_theorem1,
)
from .inputs import DEFAULT_ENUMERATION_CAP
from .model import scenario_from_dict
from .scenarios import NAMES, scenario_document

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_FAIL = 0, 2, 3, 4

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class RunManifest:
    scenario_digest: str
    seed: int
    tool_version: str
    timestamp: str
    arguments: dict


def _manifest(raw, scenario, args):
    arguments = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)
    }
    return RunManifest(
        scenario_digest=hashlib.sha256(raw).hexdigest(),
        seed=scenario.seed,
        tool_version=__version__,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        arguments=arguments,
    )


def _load(path, args):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ScenarioError("$", f"cannot read scenario: {exc.strerror}") from None
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    scenario = scenario_from_dict(doc, normalize_points=args.normalize)
    changes = {}
    if args.samples is not None:
        changes["sample_budget"] = args.samples
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        try:
            scenario = scenario.replace(**changes)
        except ValueError as exc:
            raise ScenarioError("$", str(exc)) from None
    system = scenario.system
    if not (system.is_discrete or system.is_gaussian):
        raise ScenarioError("$.users", "mixed input laws unsupported")
    return raw, scenario


def _cplx(m):
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


# --- sweep -------------------------------------------------------------------


def csv_columns(K):
    cols = [
        "snr",
        "I_joint",
        "I_joint_se",
        "mmse_total",
        "psi",
        "dIdsnr_fd",
        "dIdsnr_fd_se",
        "residual_thm1",
        "pass",
    ]
    for k in range(1, K + 1):
        cols += [f"mmse_{k}", f"I_cond_{k}", f"I_marg_{k}", f"gap_{k}"]
    return cols


def _discrete_row(scenario, snr, threads, cap):
    system = scenario.system
    pe = evaluate_point(system, snr, scenario.sample_budget, scenario.seed, scenario.fd_step_rel, threads, cap)
    thm = verify_theorem1(scenario, snr, point=pe)
    rep = pe.report()
    agg = pe.aggregate()
    joint = pe.mi_estimate("joint")
    row = {
        "snr": snr,
        "I_joint": joint.value,
        "I_joint_se": joint.std_error,
        "mmse_total": rep.mmse_total,
        "psi": rep.psi,
        "dIdsnr_fd": thm.lhs,
        "dIdsnr_fd_se": thm.components["fd_std_error"],
        "residual_thm1": thm.residual,
        "pass": thm.passed,
    }
    for k in range(1, system.K + 1):
        cond = pe.mi_estimate("conditional", k).value
        marg = pe.mi_estimate("marginal", k).value
        row.update({f"mmse_{k}": rep.mmse_per_user[k - 1], f"I_cond_{k}": cond, f"I_marg_{k}": marg, f"gap_{k}": cond - marg})
    detail = {
        "snr": snr,
        "error_matrices": [_cplx(E) for E in rep.error_matrices],
        "cross_correlations": {f"{k + 1},{j + 1}": _cplx(C) for (k, j), C in sorted(rep.cross_correlations.items())},
        "psi_imag": rep.psi_imag,
        "mmse_per_user_se": rep.mmse_per_user_se.tolist(),
        "psi_se": rep.psi_se,
        "tr_ez": agg.value,
        "tr_ez_se": agg.std_error,
        "max_decomposition_residual": agg.max_residual,
        "conditional_cross_moment_mean": {f"{k + 1},{j + 1}": _cplx(M) for (k, j), M in sorted(agg.cross_moment_mean.items())},
    }
    return row, detail


def _gaussian_row(scenario, snr):
    system = scenario.system
    stages = gaussian.gaussian_report(system, snr)
    lt = gaussian.linear_terms(system, snr)
    lo, hi = snr * (1 - CLOSED_FORM_REL_STEP), snr * (1 + CLOSED_FORM_REL_STEP)
    fd = (gaussian.mi_joint_gaussian(system, hi) - gaussian.mi_joint_gaussian(system, lo)) / (hi - lo)
    rhs = lt.mmse_total + lt.psi
    residual = fd - rhs
    row = {
        "snr": snr,
        "I_joint": gaussian.mi_joint_gaussian(system, snr),
        "I_joint_se": 0.0,
        "mmse_total": lt.mmse_total,
        "psi": lt.psi,
        "dIdsnr_fd": fd,
        "dIdsnr_fd_se": 0.0,
        "residual_thm1": residual,
        "pass": abs(residual) <= scenario.tolerances["gaussian_rel_tol"] * max(abs(fd), abs(rhs)),
    }
    for st in stages:
        k = st.stage
        row.update({f"mmse_{k}": lt.mmse_per_user[k - 1], f"I_cond_{k}": st.mi, f"I_marg_{k}": st.marginal_mi, f"gap_{k}": st.mi - st.marginal_mi})
    detail = {
        "snr": snr,
        "error_matrices": [_cplx(E) for E in lt.error_matrices],
        "cross_correlations": {f"{k + 1},{j + 1}": _cplx(C) for (k, j), C in sorted(lt.cross_correlations.items())},
        "gamma": [_cplx(st.gamma) for st in stages],
        "stage_mmse": [st.mmse for st in stages],
        "stage_gamma_scaled_mmse": [st.gamma_scaled_mmse for st in stages],
    }
    return row, detail


def run_sweep(scenario, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    """One row (and a matrix-valued detail record) per grid snr."""
    rows, details = [], []
    for snr in scenario.snr_grid:
        if scenario.system.is_gaussian:
            row, detail = _gaussian_row(scenario, snr)
        else:
            row, detail = _discrete_row(scenario, snr, threads, cap)
        rows.append(row)
        details.append(detail)
    return rows, details


_INFO_PREFIXES = ("I_", "gap_")


def to_bits(rows):
    out = []
    for row in rows:
        out.append({k: (v / LOG2 if k.startswith(_INFO_PREFIXES) else v) for k, v in row.items()})
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return repr(float(v))


def format_csv(rows, K):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = csv_columns(K)
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def _jsonable(row):
    return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in row.items()}


def cmd_sweep(args):
    raw, scenario = _load(args.scenario, args)
    rows, details = run_sweep(scenario, args.threads, args.cap)
    if args.bits:
        rows = to_bits(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(format_csv(rows, scenario.system.K))
    report = {
        "manifest": asdict(_manifest(raw, scenario, args)),
        "units": "bits" if args.bits else "nats",
        "rows": [_jsonable(r) for r in rows],
        "details": details,
    }
    (out / "sweep.json").write_text(json.dumps(report, indent=2))
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep.json'}")
    if args.strict and not all(r["pass"] for r in rows):
        return EXIT_FAIL
    return EXIT_OK


# --- verify ------------------------------------------------------------------


def run_verify(scenario, threads=1, cap=DEFAULT_ENUMERATION_CAP):
    reports = []
    grid = scenario.snr_grid
    for i, snr in enumerate(grid):
        if scenario.system.is_gaussian:
            reports += verify_gaussian(scenario, snr)
            continue
        pe = evaluate_point(
            scenario.system, snr, scenario.sample_budget, scenario.seed, scenario.fd_step_rel, threads, cap
        )
        reports.append(verify_theorem1(scenario, snr, point=pe))
        reports += verify_aggregate(scenario, snr, point=pe)
        # the gap integral needs its own 16-point grid; run it at the top snr only
        last = i == len(grid) - 1
        reports += verify_sic(scenario, snr, threads=threads, point=pe, include_integral=last)
    return reports


def cmd_verify(args):
    raw, scenario = _load(args.scenario, args)
    reports = run_verify(scenario, args.threads, args.cap)
    print(f"{'id':<22s} {'snr':>10s} {'lhs':>14s} {'rhs':>14s} {'residual':>12s} {'sigma':>10s}  result")
    for r in reports:
        print(r.line())
    ok = all(r.passed for r in reports)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "manifest": asdict(_manifest(raw, scenario, args)),
        "all_passed": ok,
        "reports": [
            {
                "id": r.identity,
                "snr": r.snr,
                "lhs": r.lhs,
                "rhs": r.rhs,
                "residual": r.residual,
                "sigma": r.std_error,
                "threshold": r.threshold,
                "pass": r.passed,
                "components": r.components,
            }
            for r in reports
        ],
    }
    (out / "verify.json").write_text(json.dumps(payload, indent=2))
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} identities passed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scenario_init(args):
    try:
        doc = scenario_document(args.name)
    except ValueError as exc:
        raise ScenarioError("name", str(exc)) from None
    text = json.dumps(doc, indent=2) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        path = Path(args.output or f"{args.name}.json")
        path.write_text(text)
        print(f"wrote {path}")
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="kimmse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    init = sub.add_parser("scenario-init", help="write a bundled starter scenario")
    init.add_argument("name", help=f"one of: {', '.join(NAMES)}")
    init.add_argument("-o", "--output", help="target file ('-' for stdout)")
    init.set_defaults(func=cmd_scenario_init)

    for name, func, help_ in (
        ("sweep", cmd_sweep, "tabulate MI, MMSE and psi over the snr grid"),
        ("verify", cmd_verify, "check every applicable identity over the snr grid"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--samples", type=_positive_int, help="override the sample budget")
        p.add_argument("--seed", type=int, help="override the seed")
        p.add_argument("--threads", type=_positive_int, default=1)
        p.add_argument("--bits", action="store_true", help="report information in bits")
        p.add_argument("--strict", action="store_true", help="exit 4 when an identity fails")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--normalize", action="store_true", help="re-center and rescale explicit constellations")
        p.add_argument("--cap", type=_positive_int, default=DEFAULT_ENUMERATION_CAP, help="joint support enumeration cap")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EnumerationCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except KimmseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
