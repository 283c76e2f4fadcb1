"""Per-user input laws: finite constellations and the standard complex Gaussian.

Constellations are stored as ``(M, dim)`` complex point arrays with a
probability vector.  Every law is zero mean with identity covariance, so a
user's transmit power is carried entirely by its precoder.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationCapExceeded, GaussianInputPresent

DEFAULT_ENUMERATION_CAP = 65536

_SQRT_HALF = math.sqrt(0.5)
_QAM16_SCALE = 1.0 / math.sqrt(10.0)

_SCALAR_ALPHABETS = {
    "bpsk": (1.0 + 0j, -1.0 + 0j),
    "qpsk": tuple(
        complex(re * _SQRT_HALF, im * _SQRT_HALF)
        for re in (1.0, -1.0)
        for im in (1.0, -1.0)
    ),
    "qam16": tuple(
        complex(re * _QAM16_SCALE, im * _QAM16_SCALE)
        for re in (-3.0, -1.0, 1.0, 3.0)
        for im in (-3.0, -1.0, 1.0, 3.0)
    ),
}

STANDARD_NAMES = tuple(_SCALAR_ALPHABETS)


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Constellation:
    """Finite input alphabet with prior probabilities.

    ``points`` has shape ``(M, dim)``.  Construction checks that the law is a
    valid pmf with zero mean and average power ``dim``; use :func:`normalize`
    to coerce an arbitrary point set.
    """

    points: np.ndarray
    probs: np.ndarray
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[:, None]
        probs = np.array(self.probs, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a non-empty (M, dim) array")
        if probs.shape[0] != pts.shape[0]:
            raise ValueError(
                f"{pts.shape[0]} points but {probs.shape[0]} probabilities"
            )
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(probs))):
            raise ValueError("constellation entries must be finite")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum():.15g}, not 1")
        mean = probs @ pts
        if np.max(np.abs(mean)) > 1e-9:
            raise ValueError("constellation is not zero mean")
        power = float(probs @ np.sum(np.abs(pts) ** 2, axis=1))
        if abs(power - pts.shape[1]) > 1e-9:
            raise ValueError(
                f"average power {power:.12g} differs from dim {pts.shape[1]}"
            )
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def log_probs(self):
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def entropy(self):
        """Shannon entropy of the prior in nats."""
        p = self.probs[self.probs > 0]
        return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class GaussianInput:
    """Zero-mean, identity-covariance circularly-symmetric complex Gaussian law."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))


InputLaw = Constellation | GaussianInput


def standard_constellation(name, dim=1):
    """Product constellation of a named scalar alphabet over ``dim`` components.

    >>> standard_constellation("bpsk").points.ravel()
    array([ 1.+0.j, -1.+0.j])
    """
    key = str(name).lower()
    if key not in _SCALAR_ALPHABETS:
        raise ValueError(
            f"unknown constellation {name!r}; expected one of {', '.join(STANDARD_NAMES)}"
        )
    if int(dim) < 1:
        raise ValueError("dim must be >= 1")
    alphabet = _SCALAR_ALPHABETS[key]
    points = np.array(list(itertools.product(alphabet, repeat=int(dim))), dtype=complex)
    probs = np.full(points.shape[0], 1.0 / points.shape[0])
    return Constellation(points, probs, name=key)


def normalize(points, probs):
    """Re-center and rescale an arbitrary point set to zero mean, power ``dim``."""
    pts = np.array(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts[:, None]
    probs = np.asarray(probs, dtype=float).ravel()
    probs = probs / probs.sum()
    pts = pts - probs @ pts
    power = float(probs @ np.sum(np.abs(pts) ** 2, axis=1))
    if power <= 0:
        raise ValueError("degenerate constellation (all points coincide)")
    pts = pts * math.sqrt(pts.shape[1] / power)
    return Constellation(pts, probs)


def _discrete_laws(system):
    laws = [u.input_law for u in system.users]
    for k, law in enumerate(laws, start=1):
        if not isinstance(law, Constellation):
            raise GaussianInputPresent(f"user {k} has a Gaussian input law")
    return laws


def support_size(system):
    """Cardinality of the joint input support (discrete users only)."""
    return math.prod(law.size for law in _discrete_laws(system))


def enumerate_joint(system, cap=DEFAULT_ENUMERATION_CAP):
    """Every joint input tuple ``(x_1, ..., x_K)`` with its prior probability."""
    laws = _discrete_laws(system)
    required = math.prod(law.size for law in laws)
    if required > cap:
        raise EnumerationCapExceeded(required, cap)
    out = []
    for combo in itertools.product(*(range(law.size) for law in laws)):
        xs = tuple(law.points[i] for law, i in zip(laws, combo))
        prob = math.prod(float(law.probs[i]) for law, i in zip(laws, combo))
        out.append((xs, prob))
    return out


def draw(law, rng, size):
    """Draw ``size`` symbols from one law.

    Returns ``(indices, symbols)``; ``indices`` is ``None`` for Gaussian laws.
    """
    if isinstance(law, Constellation):
        idx = rng.choice(law.size, size=size, p=law.probs)
        return idx, law.points[idx]
    re = rng.standard_normal((size, law.dim))
    im = rng.standard_normal((size, law.dim))
    return None, (re + 1j * im) * _SQRT_HALF


def sample_inputs(system, rng, size=None):
    """Independent draws ``(x_1, ..., x_K)``, one per user, from ``rng``.

    With ``size=None`` each entry is a length-``n_t`` vector, otherwise an
    ``(size, n_t)`` array.
    """
    n = 1 if size is None else int(size)
    xs = tuple(draw(u.input_law, rng, n)[1] for u in system.users)
    if size is None:
        return tuple(x[0] for x in xs)
    return xs
