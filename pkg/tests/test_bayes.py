import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_system
from kimmse.bayes import (
    JointSupport,
    aggregate_mmse,
    conditional_estimation_report,
    estimation_report,
    log_likelihood,
    logsumexp_rows,
    posterior,
)
from kimmse.errors import EnumerationCapExceeded
from kimmse.inputs import standard_constellation
from kimmse.model import SystemModel, UserLink
from oracles import direct_posterior

BPSK = [1.0, -1.0]
HALF = [0.5, 0.5]

# Gauss-Hermite (64 x 64) reference values for two scalar BPSK users with
# gains 1 and 0.8; stable to about 1e-5 when the rule is refined.
K2_REF = {
    1.0: {"mmse": (0.50807582, 0.42863139), "psi": -0.59747024},
    4.0: {"mmse": (0.37542098, 0.26147343), "psi": -0.59802400},
}


def test_log_likelihood_at_zero_residual():
    s = scalar_system([1.0, 0.8])
    y = [2.0 * (1.0 + 0.8)]
    assert log_likelihood(y, [[1], [1]], s, 4.0) == pytest.approx(-math.log(math.pi), abs=1e-14)


def test_log_likelihood_matches_formula():
    s = SystemModel(
        [UserLink(np.array([[1, 0.5j], [0.2, 1]]), np.eye(2), standard_constellation("qpsk", 2))], 2
    )
    rng = np.random.default_rng(3)
    y = rng.normal(size=2) + 1j * rng.normal(size=2)
    x = np.array([1 + 1j, 1 - 1j]) / math.sqrt(2)
    H = np.array([[1, 0.5j], [0.2, 1]])
    r = y - math.sqrt(2.5) * H @ x
    expected = -2 * math.log(math.pi) - np.sum(np.abs(r) ** 2)
    assert log_likelihood(y, [x], s, 2.5) == pytest.approx(expected, abs=1e-12)


def test_logsumexp_rows_handles_large_offsets():
    a = np.array([[1000.0, 1000.0], [-1000.0, -np.inf]])
    np.testing.assert_allclose(logsumexp_rows(a), [1000 + math.log(2), -1000.0])


def test_posterior_at_zero_snr_is_prior():
    p = posterior([0.7 - 0.2j], scalar_system([1.0]), 0.0)
    assert abs(p.means[0][0]) <= 1e-15
    assert p.error_covariance(0)[0, 0].real == pytest.approx(1.0, abs=1e-15)


def test_posterior_at_high_snr_is_decisive():
    s = scalar_system([1.0])
    p = posterior([math.sqrt(100.0)], s, 100.0)
    assert p.means[0][0].real == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    re=st.floats(-3, 3),
    im=st.floats(-3, 3),
    snr=st.floats(0.01, 5.0),
    g2=st.floats(0.1, 1.5),
)
def test_posterior_matches_direct_sums(re, im, snr, g2):
    y = complex(re, im)
    s = scalar_system([1.0, g2])
    p = posterior([y], s, snr)
    means, second, cross, evidence = direct_posterior(y, snr, [1.0, g2], [BPSK, BPSK], [HALF, HALF])
    for k in range(2):
        assert p.means[k][0] == pytest.approx(means[k], abs=1e-12)
        assert p.second_moments[k][0, 0].real == pytest.approx(second[k], abs=1e-12)
    assert p.cross_moments[(0, 1)][0, 0] == pytest.approx(cross[(0, 1)], abs=1e-12)
    assert p.cross_moments[(1, 0)][0, 0] == pytest.approx(cross[(1, 0)], abs=1e-12)
    assert p.log_evidence == pytest.approx(math.log(evidence), abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(
    re=st.floats(-3, 3), im=st.floats(-3, 3), snr=st.floats(0.0, 20.0)
)
def test_error_covariance_is_psd(re, im, snr):
    s = SystemModel([UserLink(np.eye(2), np.eye(2), standard_constellation("qpsk", 2))], 2)
    p = posterior([re + 1j * im, im - 1j * re], s, snr)
    E = p.error_covariance(0)
    np.testing.assert_allclose(E, E.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(E).min() >= -1e-12


def test_support_cap():
    s = scalar_system([1.0] * 3, name="qam16")
    with pytest.raises(EnumerationCapExceeded):
        JointSupport(s, cap=100)


def test_tiny_snr_limits():
    s = scalar_system([1.0, 0.8])
    r = estimation_report(s, 1e-8, samples=20000, seed=1)
    assert abs(r.psi) <= 1e-6
    np.testing.assert_allclose(r.mmse_per_user, [1.0, 0.64], atol=1e-3)


def test_single_user_has_no_cross_term():
    r = estimation_report(scalar_system([1.0]), 1.0, samples=5000, seed=2)
    assert r.psi == 0.0
    assert r.cross_correlations == {}
    assert np.all(r.per_sample["psi"] == 0.0)


@pytest.mark.parametrize("snr", sorted(K2_REF))
def test_estimation_matches_quadrature(snr):
    ref = K2_REF[snr]
    r = estimation_report(scalar_system([1.0, 0.8]), snr, samples=100_000, seed=11)
    for k in range(2):
        assert abs(r.mmse_per_user[k] - ref["mmse"][k]) <= 4 * r.mmse_per_user_se[k]
    assert abs(r.psi - ref["psi"]) <= 4 * r.psi_se
    assert abs(r.psi_imag) <= 1e-10


def test_aggregate_split_and_cross_moments():
    s = SystemModel(
        [
            UserLink(np.array([[0.9, 0.3j], [0.2, 1.1]]), np.eye(2), standard_constellation("qpsk", 2)),
            UserLink(np.array([[0.5, -0.4], [0.7j, 0.6]]), np.eye(2), standard_constellation("qpsk", 2)),
        ],
        2,
    )
    a = aggregate_mmse(s, 2.0, samples=20_000, seed=4)
    assert a.max_residual <= 1e-9
    # independent zero-mean users: the averaged posterior cross moment vanishes
    m, se = a.cross_moment_mean[(0, 1)], a.cross_moment_se[(0, 1)]
    assert np.all(np.abs(m.real) <= 3 * se.real + 1e-15)
    assert np.all(np.abs(m.imag) <= 3 * se.imag + 1e-15)
    assert 0 < a.value < 4


def test_aggregate_equals_total_plus_psi_in_expectation():
    s = scalar_system([1.0, 0.8])
    a = aggregate_mmse(s, 1.0, samples=50_000, seed=5)
    r = estimation_report(s, 1.0, samples=50_000, seed=5)
    diff = a.per_sample["tr_ez"] - r.rhs_per_sample
    assert abs(diff.mean()) <= 4 * diff.std(ddof=1) / math.sqrt(diff.size) + 1e-12


def test_conditional_report_with_nothing_known_is_the_plain_report():
    s = scalar_system([1.0, 0.8, 0.6])
    a = estimation_report(s, 2.0, samples=8192, seed=7)
    b = conditional_estimation_report(s, 2.0, 0, samples=8192, seed=7)
    np.testing.assert_array_equal(a.mmse_per_user, b.mmse_per_user)
    assert a.psi == b.psi


def test_conditional_report_last_stage_is_single_user():
    s = scalar_system([1.0, 0.8])
    r = conditional_estimation_report(s, 2.0, 1, samples=20_000, seed=8)
    assert r.psi == 0.0
    single = estimation_report(scalar_system([0.8]), 2.0, samples=20_000, seed=8)
    # different streams for the second user, so compare statistically
    d = r.mmse_per_user[0] - single.mmse_per_user[0]
    assert abs(d) <= 4 * math.hypot(r.mmse_per_user_se[0], single.mmse_per_user_se[0])


def test_conditional_rejects_bad_prefix():
    with pytest.raises(ValueError):
        conditional_estimation_report(scalar_system([1.0, 0.8]), 1.0, 2, samples=100, seed=0)


def test_user_swap_keeps_totals():
    s = scalar_system([1.0, 0.8])
    a = estimation_report(s, 1.0, samples=50_000, seed=3)
    b = estimation_report(s.permuted([1, 0]), 1.0, samples=50_000, seed=3)
    se = math.hypot(a.mmse_total_se, b.mmse_total_se)
    assert abs(a.mmse_total - b.mmse_total) <= 4 * se
    assert abs(a.psi - b.psi) <= 4 * math.hypot(a.psi_se, b.psi_se)


def test_thread_count_does_not_change_results():
    s = scalar_system([1.0, 0.8], name="qpsk")
    a = estimation_report(s, 1.0, samples=20_000, seed=9, threads=1)
    b = estimation_report(s, 1.0, samples=20_000, seed=9, threads=4)
    np.testing.assert_array_equal(a.mmse_per_user, b.mmse_per_user)
    assert a.psi == b.psi
