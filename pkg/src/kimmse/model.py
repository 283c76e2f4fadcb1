"""K-user Gaussian multiple-access channel and scenario configuration.

The received vector is ``y = sum_k sqrt(snr) H_k P_k x_k + n`` with
``n ~ CN(0, I)``.  Users are kept in SIC decoding order: user 1 (index 0)
is decoded first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import ScenarioError
from .inputs import Constellation, GaussianInput, normalize, standard_constellation

POWER_TOL = 1e-9

DEFAULT_TOLERANCES = MappingProxyType(
    {
        "abs_tol": 5e-3,
        "z_tol": 3.0,
        "gaussian_rel_tol": 1e-7,
        "gap_rel_tol": 0.02,
        "decomposition_rel_tol": 1e-9,
    }
)


def as_complex_matrix(value):
    """Read-only complex128 2-D array; scalars and vectors are promoted."""
    a = np.array(value, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty matrix, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UserLink:
    channel: np.ndarray
    precoder: np.ndarray
    input_law: Constellation | GaussianInput

    def __post_init__(self):
        object.__setattr__(self, "channel", as_complex_matrix(self.channel))
        object.__setattr__(self, "precoder", as_complex_matrix(self.precoder))

    @property
    def n_t(self):
        return self.channel.shape[1]

    @property
    def gain(self):
        """``H_k P_k``, the unit-snr receive-space gain."""
        return self.channel @ self.precoder


@dataclass(frozen=True, eq=False)
class SystemModel:
    users: tuple
    n_r: int

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "n_r", int(self.n_r))

    @property
    def K(self):
        return len(self.users)

    @property
    def n_t(self):
        return tuple(u.n_t for u in self.users)

    def subsystem(self, indices):
        """System made of the listed users, in the listed order."""
        return SystemModel(tuple(self.users[i] for i in indices), self.n_r)

    def permuted(self, order):
        return self.subsystem(order)

    @property
    def is_discrete(self):
        return all(isinstance(u.input_law, Constellation) for u in self.users)

    @property
    def is_gaussian(self):
        return all(isinstance(u.input_law, GaussianInput) for u in self.users)


@dataclass(frozen=True)
class Violation:
    user: int | None
    message: str

    def __str__(self):
        return self.message


def validate(system):
    """List every broken structural invariant; an empty list means valid.

    User numbers in messages are 1-based.
    """
    found = []
    if system.K < 1:
        found.append(Violation(None, "system has no users"))
    if system.n_r < 1:
        found.append(Violation(None, "n_r must be positive"))
    for k, user in enumerate(system.users, start=1):
        H, P = user.channel, user.precoder
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(P))):
            found.append(Violation(k, f"non-finite entries user {k}"))
        if H.shape[0] != system.n_r:
            found.append(Violation(k, f"row mismatch user {k}"))
        n_t = H.shape[1]
        if P.shape != (n_t, n_t):
            found.append(Violation(k, f"precoder shape mismatch user {k}"))
        elif np.all(np.isfinite(P)):
            power = float(np.real(np.trace(P @ P.conj().T)))
            if power > n_t + POWER_TOL:
                found.append(Violation(k, f"precoder power exceeds n_t user {k}"))
        if user.input_law.dim != n_t:
            found.append(Violation(k, f"input dimension mismatch user {k}"))
    return found


def effective_gain(k, system, snr):
    """``sqrt(snr) * H_k P_k`` for 0-based user index ``k``."""
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    user = system.users[k]
    return math.sqrt(snr) * (user.channel @ user.precoder)


@dataclass(frozen=True, eq=False)
class Scenario:
    system: SystemModel
    snr_grid: tuple
    sample_budget: int = 200_000
    seed: int = 0
    fd_step_rel: float = 1e-3
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(float(s) for s in self.snr_grid)
        if not grid:
            raise ValueError("snr_grid is empty")
        if any(s <= 0 for s in grid):
            raise ValueError("snr_grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid must be strictly increasing")
        if int(self.sample_budget) < 1:
            raise ValueError("sample_budget must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.fd_step_rel > 0:
            raise ValueError("fd_step_rel must be positive")
        tol = dict(DEFAULT_TOLERANCES)
        for key, val in dict(self.tolerances).items():
            if not float(val) >= 0:
                raise ValueError(f"tolerance {key} must be nonnegative")
            tol[key] = float(val)
        object.__setattr__(self, "snr_grid", grid)
        object.__setattr__(self, "sample_budget", int(self.sample_budget))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "fd_step_rel", float(self.fd_step_rel))
        object.__setattr__(self, "tolerances", MappingProxyType(tol))

    def replace(self, **changes):
        kw = dict(
            system=self.system,
            snr_grid=self.snr_grid,
            sample_budget=self.sample_budget,
            seed=self.seed,
            fd_step_rel=self.fd_step_rel,
            tolerances=dict(self.tolerances),
        )
        kw.update(changes)
        return Scenario(**kw)


# --- JSON schema -----------------------------------------------------------


def _complex(node, path):
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return complex(node)
    if (
        isinstance(node, list)
        and len(node) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in node)
    ):
        return complex(node[0], node[1])
    raise ScenarioError(path, "expected a complex scalar [re, im]")


def _matrix(node, path):
    if not isinstance(node, list) or not node:
        raise ScenarioError(path, "expected a non-empty array of rows")
    rows = []
    for i, row in enumerate(node):
        if not isinstance(row, list) or not row:
            raise ScenarioError(f"{path}[{i}]", "expected a non-empty row")
        rows.append([_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    if len({len(r) for r in rows}) != 1:
        raise ScenarioError(path, "ragged matrix rows")
    return as_complex_matrix(rows)


def _complex_vector(node, path):
    # a point is either a complex scalar or a list of complex scalars
    try:
        return [_complex(node, path)]
    except ScenarioError:
        pass
    if not isinstance(node, list) or not node:
        raise ScenarioError(path, "expected a complex scalar or vector")
    return [_complex(v, f"{path}[{i}]") for i, v in enumerate(node)]


def _input_law(node, n_t, path, normalize_points):
    if not isinstance(node, dict):
        raise ScenarioError(path, "expected an object")
    kind = node.get("type")
    if kind == "gaussian":
        return GaussianInput(n_t)
    if kind != "constellation":
        raise ScenarioError(f"{path}.type", "expected 'constellation' or 'gaussian'")
    if "name" in node:
        try:
            return standard_constellation(node["name"], n_t)
        except ValueError as exc:
            raise ScenarioError(f"{path}.name", str(exc)) from None
    if "points" not in node or "probs" not in node:
        raise ScenarioError(path, "constellation needs 'name' or 'points' and 'probs'")
    pts = node["points"]
    if not isinstance(pts, list) or not pts:
        raise ScenarioError(f"{path}.points", "expected a non-empty array")
    points = [_complex_vector(p, f"{path}.points[{i}]") for i, p in enumerate(pts)]
    probs = node["probs"]
    if not isinstance(probs, list) or not all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
    ):
        raise ScenarioError(f"{path}.probs", "expected an array of numbers")
    if len({len(p) for p in points}) != 1 or len(points[0]) != n_t:
        raise ScenarioError(f"{path}.points", f"every point must have {n_t} components")
    try:
        if normalize_points:
            return normalize(points, probs)
        return Constellation(np.array(points), np.array(probs, dtype=float))
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def scenario_from_dict(doc, normalize_points=False):
    """Build a :class:`Scenario` from a parsed scenario document.

    Raises :class:`ScenarioError` naming the JSON path of the first problem.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    for key in ("n_r", "users", "snr_grid"):
        if key not in doc:
            raise ScenarioError(f"$.{key}", "missing required key")
    n_r = doc["n_r"]
    if not isinstance(n_r, int) or isinstance(n_r, bool) or n_r < 1:
        raise ScenarioError("$.n_r", "expected a positive integer")
    if not isinstance(doc["users"], list) or not doc["users"]:
        raise ScenarioError("$.users", "expected a non-empty array")
    users = []
    for k, unode in enumerate(doc["users"]):
        path = f"$.users[{k}]"
        if not isinstance(unode, dict):
            raise ScenarioError(path, "expected an object")
        for key in ("channel", "precoder", "input"):
            if key not in unode:
                raise ScenarioError(f"{path}.{key}", "missing required key")
        H = _matrix(unode["channel"], f"{path}.channel")
        P = _matrix(unode["precoder"], f"{path}.precoder")
        law = _input_law(unode["input"], H.shape[1], f"{path}.input", normalize_points)
        users.append(UserLink(H, P, law))
    system = SystemModel(tuple(users), n_r)
    problems = validate(system)
    if problems:
        v = problems[0]
        where = "$.users" if v.user is None else f"$.users[{v.user - 1}]"
        raise ScenarioError(where, v.message)

    grid = doc["snr_grid"]
    if not isinstance(grid, list) or not grid:
        raise ScenarioError("$.snr_grid", "expected a non-empty array of numbers")
    kwargs = {"snr_grid": grid}
    for key, name in (("samples", "sample_budget"), ("seed", "seed")):
        if key in doc:
            val = doc[key]
            if not isinstance(val, int) or isinstance(val, bool):
                raise ScenarioError(f"$.{key}", "expected an integer")
            kwargs[name] = val
    if "fd_step_rel" in doc:
        kwargs["fd_step_rel"] = doc["fd_step_rel"]
    if "tolerances" in doc:
        if not isinstance(doc["tolerances"], dict):
            raise ScenarioError("$.tolerances", "expected an object")
        kwargs["tolerances"] = doc["tolerances"]
    try:
        return Scenario(system, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("$", str(exc)) from None


def _complex_json(z):
    z = complex(z)
    return [z.real, z.imag]


def _matrix_json(m):
    return [[_complex_json(v) for v in row] for row in np.asarray(m)]


def _law_json(law):
    if isinstance(law, GaussianInput):
        return {"type": "gaussian"}
    if law.name is not None:
        return {"type": "constellation", "name": law.name}
    return {
        "type": "constellation",
        "points": [[_complex_json(v) for v in p] for p in law.points],
        "probs": [float(p) for p in law.probs],
    }


def scenario_to_dict(scenario):
    s = scenario.system
    return {
        "n_r": s.n_r,
        "users": [
            {
                "channel": _matrix_json(u.channel),
                "precoder": _matrix_json(u.precoder),
                "input": _law_json(u.input_law),
            }
            for u in s.users
        ],
        "snr_grid": list(scenario.snr_grid),
        "samples": scenario.sample_budget,
        "seed": scenario.seed,
        "fd_step_rel": scenario.fd_step_rel,
        "tolerances": dict(scenario.tolerances),
    }
