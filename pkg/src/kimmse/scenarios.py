"""Bundled desk-scale scenarios.

MIMO channel entries were drawn once from ``CN(0, 1)`` (numpy PCG64, seeds
2024 and 7), rounded to four decimals and frozen here.
"""

from __future__ import annotations

import copy

import numpy as np

_GRID = [float(s) for s in np.geomspace(0.1, 10.0, 16)]
_I1 = [[[1.0, 0.0]]]
_I2 = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]


def _scalar_user(gain, name="bpsk"):
    return {
        "channel": [[[float(gain), 0.0]]],
        "precoder": _I1,
        "input": {"type": "constellation", "name": name},
    }


def _mimo_user(rows, law):
    return {"channel": rows, "precoder": _I2, "input": law}


_H_QPSK = (
    [[[0.7275, -0.9849], [1.161, 0.0475]], [[0.8109, 0.6091], [-0.6881, 0.36]]],
    [[[1.2801, -0.7833], [0.5309, 1.0496]], [[0.4524, 0.0346], [-0.5171, 0.5738]]],
)
_H_GAUSS = (
    [[[0.0009, -0.3215], [0.2112, -0.7012]], [[-0.1938, 0.0425], [-0.6297, 0.9477]]],
    [[[-0.348, 0.0745], [-0.4387, -0.6579]], [[0.3464, -0.0207], [0.2524, 0.4917]]],
)

_QPSK = {"type": "constellation", "name": "qpsk"}
_GAUSS = {"type": "gaussian"}


def _doc(n_r, users, seed):
    return {
        "n_r": n_r,
        "users": users,
        "snr_grid": list(_GRID),
        "samples": 200_000,
        "seed": seed,
        "fd_step_rel": 1e-3,
        "tolerances": {
            "abs_tol": 5e-3,
            "z_tol": 3.0,
            "gaussian_rel_tol": 1e-7,
            "gap_rel_tol": 0.02,
            "decomposition_rel_tol": 1e-9,
        },
    }


BUNDLED = {
    "k1-bpsk": lambda: _doc(1, [_scalar_user(1.0)], 1),
    "k2-bpsk": lambda: _doc(1, [_scalar_user(1.0), _scalar_user(0.8)], 2),
    "k3-bpsk": lambda: _doc(1, [_scalar_user(1.0), _scalar_user(0.8), _scalar_user(0.6)], 3),
    "k2-qpsk-mimo2": lambda: _doc(2, [_mimo_user(h, _QPSK) for h in _H_QPSK], 4),
    "k2-gaussian-mimo2": lambda: _doc(2, [_mimo_user(h, _GAUSS) for h in _H_GAUSS], 5),
}

NAMES = tuple(BUNDLED)


def scenario_document(name):
    """Fresh JSON-ready document for a bundled scenario."""
    try:
        return copy.deepcopy(BUNDLED[name]())
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; valid names: {', '.join(NAMES)}") from None


def load_bundled(name):
    from .model import scenario_from_dict

    return scenario_from_dict(scenario_document(name))
