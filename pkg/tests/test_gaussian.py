import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_scalar_system, scalar_system
from kimmse.errors import NonGaussianInput
from kimmse.gaussian import (
    gamma,
    gamma_scaled_mmse,
    gaussian_report,
    joint_derivative,
    linear_terms,
    mi_gaussian_stage,
    mi_joint_gaussian,
    mmse_gaussian_stage,
    stage_mi_forms,
)
from kimmse.inputs import GaussianInput
from kimmse.model import SystemModel, UserLink


def random_system(seed, K=3, n_r=2, n_t=2):
    rng = np.random.default_rng(seed)
    users = []
    for _ in range(K):
        H = (rng.normal(size=(n_r, n_t)) + 1j * rng.normal(size=(n_r, n_t))) / math.sqrt(2)
        users.append(UserLink(H, np.eye(n_t), GaussianInput(n_t)))
    return SystemModel(users, n_r)


def test_gamma_examples():
    s = gaussian_scalar_system([1.0, 1.0])
    np.testing.assert_allclose(gamma(s, 1, 3.0), [[4.0]])
    np.testing.assert_allclose(gamma(s, 2, 3.0), [[1.0]])
    np.testing.assert_allclose(gamma(random_system(0), 1, 0.0), np.eye(2))


def test_stage_rates_for_two_unit_users():
    s = gaussian_scalar_system([1.0, 1.0])
    assert mi_gaussian_stage(s, 1, 1.0) == pytest.approx(math.log(3) - math.log(2), abs=1e-14)
    assert mi_gaussian_stage(s, 2, 1.0) == pytest.approx(math.log(2), abs=1e-14)
    assert mi_joint_gaussian(s, 1.0) == pytest.approx(math.log(3), abs=1e-14)
    assert joint_derivative(s, 1.0) == pytest.approx(2 / 3, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_stage_rates_telescope(seed):
    s = random_system(seed)
    total = sum(mi_gaussian_stage(s, k, 1.7) for k in range(1, 4))
    assert total == pytest.approx(mi_joint_gaussian(s, 1.7), abs=1e-10)
    for k in range(1, 4):
        a, b = stage_mi_forms(s, k, 1.7)
        assert a == pytest.approx(b, abs=1e-10)


@pytest.mark.parametrize("snr", [0.1, 1.0, 10.0])
def test_single_user_derivative(snr):
    s = gaussian_scalar_system([1.0])
    assert mmse_gaussian_stage(s, 1, snr) == pytest.approx(1 / (1 + snr), rel=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_stage_mmse_matches_central_difference(seed):
    s = random_system(seed)
    snr, h = 2.0, 2e-5
    for k in range(1, 4):
        fd = (mi_gaussian_stage(s, k, snr + h) - mi_gaussian_stage(s, k, snr - h)) / (2 * h)
        assert mmse_gaussian_stage(s, k, snr) == pytest.approx(fd, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), snr=st.floats(0.01, 50.0))
def test_gamma_ordering_and_frozen_form_bound(seed, snr):
    s = random_system(seed)
    for k in range(1, 3):
        gap = np.linalg.eigvalsh(gamma(s, k, snr) - gamma(s, k + 1, snr))
        assert gap.min() >= -1e-10
    for k in range(1, 4):
        assert gamma_scaled_mmse(s, k, snr) >= mmse_gaussian_stage(s, k, snr) - 1e-10
    assert gamma_scaled_mmse(s, 3, snr) == pytest.approx(mmse_gaussian_stage(s, 3, snr), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), snr=st.floats(0.01, 50.0))
def test_linear_terms_satisfy_derivative_identity(seed, snr):
    s = random_system(seed)
    lt = linear_terms(s, snr)
    d = joint_derivative(s, snr)
    assert lt.mmse_total + lt.psi == pytest.approx(d, rel=1e-9, abs=1e-12)


def test_report_is_consistent():
    s = random_system(1)
    rep = gaussian_report(s, 0.8)
    assert len(rep) == 3
    assert sum(r.mmse for r in rep) == pytest.approx(joint_derivative(s, 0.8), abs=1e-12)
    for r in rep:
        assert r.marginal_mi <= r.mi + 1e-12


def test_discrete_inputs_are_rejected():
    with pytest.raises(NonGaussianInput):
        mi_joint_gaussian(scalar_system([1.0]), 1.0)
    with pytest.raises(NonGaussianInput):
        linear_terms(scalar_system([1.0]), 1.0)


def test_stage_index_is_checked():
    with pytest.raises(ValueError):
        mi_gaussian_stage(gaussian_scalar_system([1.0]), 2, 1.0)
