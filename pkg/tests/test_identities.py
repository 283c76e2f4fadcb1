import math

import numpy as np
import pytest

from conftest import gaussian_scalar_system, scalar_system
from kimmse.errors import GridTooSmall, StepTooLarge
from kimmse.identities import (
    evaluate_point,
    fd_derivative,
    log_grid,
    quadrature,
    verify_aggregate,
    verify_gaussian,
    verify_sic,
    verify_theorem1,
)
from kimmse.inputs import standard_constellation
from kimmse.mi import mi_joint
from kimmse.model import Scenario, SystemModel, UserLink
from kimmse.scenarios import load_bundled


def scenario(system, samples=40_000, seed=1):
    return Scenario(system, (1.0,), sample_budget=samples, seed=seed)


@pytest.mark.parametrize(
    "f, snr, expected",
    [
        (lambda s: s, 2.0, 1.0),
        (lambda s: math.log1p(s), 1.0, 0.5),
        (lambda s: s * s, 2.0, 4.0),
    ],
)
def test_fd_examples(f, snr, expected):
    value, se = fd_derivative(f, snr, rel_step=1e-5)
    assert value == pytest.approx(expected, abs=1e-8)
    assert se == 0.0


def test_fd_uses_paired_differences():
    s = scalar_system([1.0])
    d = fd_derivative(lambda t: mi_joint(s, t, samples=20_000, seed=3), 1.0)
    # paired differences are far less noisy than the estimates themselves
    assert d.std_error < 0.1 * mi_joint(s, 1.0, samples=20_000, seed=3).std_error / 1e-3


@pytest.mark.parametrize("snr, rel", [(1.0, 0.5), (1.0, 0.9), (0.0, 1e-3), (-1.0, 1e-3)])
def test_fd_rejects_bad_steps(snr, rel):
    with pytest.raises(StepTooLarge):
        fd_derivative(lambda s: s, snr, rel)


def test_quadrature_constant():
    assert quadrature([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == pytest.approx(3.0, abs=1e-15)


def test_quadrature_log_grid():
    grid = np.geomspace(1e-3, 8.0, 64)
    val = quadrature(1 / (1 + grid), grid, zero_value=1.0)
    assert val == pytest.approx(math.log(9), rel=0.01)


def test_quadrature_needs_two_points():
    with pytest.raises(GridTooSmall):
        quadrature([1.0], [1.0])


def test_log_grid_shape():
    g = log_grid(4.0, 16, 1.5)
    assert g.size == 16 and g[-1] == pytest.approx(4.0) and g[0] == pytest.approx(4.0 * 10**-1.5)


def test_theorem1_single_user():
    sc = scenario(scalar_system([1.0]))
    r = verify_theorem1(sc, 1.0)
    assert r.passed, r.line()
    assert r.components["psi"] == 0.0


def test_theorem1_vector_channel():
    law = standard_constellation("qpsk", 2)
    s = SystemModel(
        [
            UserLink(np.array([[0.9, 0.3j], [0.2, 1.1]]), np.eye(2), law),
            UserLink(np.array([[0.5, -0.4], [0.7j, 0.6]]), np.eye(2) / math.sqrt(2) * 1.2, law),
        ],
        2,
    )
    r = verify_theorem1(scenario(s, samples=20_000), 1.5)
    assert r.passed, r.line()
    assert r.components["psi"] != 0.0


def test_aggregate_checks_pass():
    sc = scenario(scalar_system([1.0, 0.8, 0.6]), samples=20_000)
    reports = verify_aggregate(sc, 2.0)
    ids = {r.identity for r in reports}
    assert {"aggregate", "aggregate-split"} <= ids
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_shared_point_matches_fresh_run():
    sc = scenario(scalar_system([1.0, 0.8]), samples=8192)
    pe = evaluate_point(sc.system, 1.0, sc.sample_budget, sc.seed, sc.fd_step_rel)
    a = verify_theorem1(sc, 1.0, point=pe)
    b = verify_theorem1(sc, 1.0)
    assert a.lhs == b.lhs and a.rhs == b.rhs


def test_sic_single_user_has_no_gap():
    reports = verify_sic(scenario(scalar_system([1.0]), samples=8192), 1.0)
    by_id = {r.identity: r for r in reports}
    assert by_id["chain-rule"].residual == pytest.approx(0.0, abs=1e-12)
    assert by_id["sic-gap-sign-1"].lhs == 0.0
    assert by_id["sic-gap-integral-1"].rhs == pytest.approx(0.0, abs=1e-12)


def test_sic_vanishing_interferer():
    s = scalar_system([1.0, 1e-4])
    reports = verify_sic(scenario(s, samples=8192), 1.0, include_integral=False)
    gaps = [r for r in reports if r.identity.startswith("sic-gap-sign")]
    assert all(abs(r.lhs) < 1e-6 for r in gaps)


def test_sic_two_users_at_four():
    reports = verify_sic(scenario(scalar_system([1.0, 0.8]), samples=100_000, seed=2), 4.0)
    for r in reports:
        assert r.passed, r.line()
    gap2 = next(r for r in reports if r.identity == "sic-gap-sign-2")
    assert gap2.lhs > 0


def test_gaussian_identities():
    sc = load_bundled("k2-gaussian-mimo2")
    for snr in (0.1, 1.0, 10.0):
        for r in verify_gaussian(sc, snr):
            assert r.passed, r.line()


def test_gaussian_scalar_pair_values():
    sc = scenario(gaussian_scalar_system([1.0, 1.0]))
    by_id = {r.identity: r for r in verify_gaussian(sc, 1.0)}
    assert by_id["gauss-joint-derivative"].rhs == pytest.approx(2 / 3, abs=1e-12)
    assert by_id["gauss-telescoping"].lhs == pytest.approx(math.log(3), abs=1e-12)


def test_report_line_format():
    r = verify_theorem1(scenario(scalar_system([1.0]), samples=4096), 1.0)
    assert r.line().split()[0] == "theorem1"
    assert r.line().split()[-1] in ("PASS", "FAIL")
