"""Core domain types: the planar LTI plant, the obstacle and the filter settings.

Everything downstream works on a :class:`Scenario`, the validated bundle of the
three. Scenarios are immutable; their arrays are flagged read-only so they can
be shared freely between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Union

import numpy as np

from cbf_lab.errors import (
    BadShapeMatrix,
    NotStabilizable,
    OriginUnsafe,
    RankDeficientB,
    ScenarioError,
)

RANK_RTOL = 1e-12
SYMMETRY_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a)
    arr = arr.astype(complex if np.iscomplexobj(arr) else float)
    arr.setflags(write=False)
    return arr


def _finite_matrix(value, name: str, shape=None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{name}: not a numeric array") from exc
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{name}: NaN or Inf entries are not allowed")
    if shape is not None and arr.shape != shape:
        raise ScenarioError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class Circle:
    """Circular obstacle; the safe set is ``||x - center||^2 - radius^2 >= 0``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def shape_matrix(self) -> np.ndarray:
        return np.eye(2) / self.radius**2

    def h(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.sum(d * d, axis=-1) - self.radius**2

    def grad(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.center)

    def hessian(self) -> np.ndarray:
        return 2.0 * np.eye(2)


@dataclass(frozen=True)
class Ellipse:
    """Ellipsoidal obstacle; safe set ``(x - center)^T P (x - center) - 1 >= 0``."""

    center: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "P", _frozen(self.P))

    @property
    def shape_matrix(self) -> np.ndarray:
        return np.array(self.P)

    def h(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.P, d) - 1.0

    def grad(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return 2.0 * d @ self.P.T

    def hessian(self) -> np.ndarray:
        return 2.0 * np.array(self.P)


Obstacle = Union[Circle, Ellipse]


@dataclass(frozen=True)
class PlanarLTISystem:
    """Plant ``xdot = A x + B u`` with nominal feedback ``u = -K x``."""

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "K"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def closed_loop(self) -> np.ndarray:
        return self.A - self.B @ self.K


@dataclass(frozen=True)
class FilterConfig:
    """Linear class-K slope and input weighting.

    ``G`` defaults to ``B^T B``. An explicit ``G`` is only used to carry a
    transported weighting through the ellipse-to-circle reduction.
    """

    alpha0: float
    G: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha0", float(self.alpha0))
        if self.G is not None:
            object.__setattr__(self, "G", _frozen(self.G))


@dataclass(frozen=True)
class Scenario:
    """A validated (system, obstacle, filter) triple with cached derived data.

    Build instances through :func:`validate_scenario`; the constructor does not
    check invariants.
    """

    system: PlanarLTISystem
    obstacle: Obstacle
    config: FilterConfig
    Atilde: np.ndarray = field(repr=False)
    eigvals: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    Ginv: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)

    @property
    def A(self) -> np.ndarray:
        return self.system.A

    @property
    def B(self) -> np.ndarray:
        return self.system.B

    @property
    def K(self) -> np.ndarray:
        return self.system.K

    @property
    def m(self) -> int:
        return self.system.m

    @property
    def alpha0(self) -> float:
        return self.config.alpha0

    @property
    def underactuated(self) -> bool:
        return self.m == 1

    @property
    def is_circle(self) -> bool:
        return isinstance(self.obstacle, Circle)

    @property
    def center(self) -> np.ndarray:
        return self.obstacle.center

    def with_alpha0(self, alpha0: float) -> "Scenario":
        return validate_scenario(self.system, self.obstacle, replace(self.config, alpha0=alpha0))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "K": self.K.tolist(),
            "obstacle": obstacle_to_dict(self.obstacle),
            "alpha0": self.alpha0,
        }
        if self.config.G is not None:
            out["G"] = self.config.G.tolist()
        return out


def is_hurwitz(M) -> bool:
    """Planar Hurwitz test: trace < 0 and det > 0 (exact for 2x2)."""
    M = np.asarray(M, dtype=float)
    return bool(np.trace(M) < 0.0 and np.linalg.det(M) > 0.0)


def _check_obstacle(obstacle: Obstacle) -> None:
    if isinstance(obstacle, Circle):
        if obstacle.center.shape != (2,):
            raise ScenarioError("circle center must be a 2-vector")
        if not obstacle.radius > 0:
            raise ScenarioError("circle radius must be positive")
        if not np.isfinite(obstacle.radius):
            raise ScenarioError("circle radius must be finite")
        origin_margin = float(obstacle.center @ obstacle.center) - obstacle.radius**2
    elif isinstance(obstacle, Ellipse):
        P = obstacle.P
        if obstacle.center.shape != (2,) or P.shape != (2, 2):
            raise BadShapeMatrix("ellipse needs a 2-vector center and a 2x2 P")
        if abs(P[0, 1] - P[1, 0]) > SYMMETRY_TOL * max(1.0, np.abs(P).max()):
            raise BadShapeMatrix("P is not symmetric")
        if np.linalg.eigvalsh(0.5 * (P + P.T)).min() <= 0.0:
            raise BadShapeMatrix("P is not positive definite")
        origin_margin = float(obstacle.center @ P @ obstacle.center) - 1.0
    else:
        raise ScenarioError(f"unknown obstacle type {type(obstacle).__name__}")
    if not origin_margin > 0.0:
        raise OriginUnsafe(f"h(0) = {origin_margin:.6g} is not positive")


def validate_scenario(
    system: PlanarLTISystem, obstacle: Obstacle, config: FilterConfig
) -> Scenario:
    """Check every invariant and return the scenario with cached matrices.

    Raises:
        RankDeficientB: ``B`` is not full column rank.
        NotStabilizable: ``A - B K`` is not Hurwitz.
        OriginUnsafe: the origin is not strictly inside the safe set.
        BadShapeMatrix: ellipse matrix not symmetric positive definite.
    """
    A, B, K = system.A, system.B, system.K
    for name, arr in (("A", A), ("B", B), ("K", K)):
        if not np.all(np.isfinite(arr)):
            raise ScenarioError(f"{name}: NaN or Inf entries are not allowed")
    if A.shape != (2, 2):
        raise ScenarioError(f"A must be 2x2, got {A.shape}")
    if B.ndim != 2 or B.shape[0] != 2 or B.shape[1] not in (1, 2):
        raise ScenarioError(f"B must be 2x1 or 2x2, got {B.shape}")
    m = B.shape[1]
    if K.shape != (m, 2):
        raise ScenarioError(f"K must be {m}x2, got {K.shape}")

    sv = np.linalg.svd(B, compute_uv=False)
    if sv.max() == 0.0 or sv.min() <= RANK_RTOL * sv.max():
        raise RankDeficientB(f"B singular values {sv.tolist()}")

    Atilde = A - B @ K
    if not is_hurwitz(Atilde):
        raise NotStabilizable(
            f"A - BK has trace {np.trace(Atilde):.6g} and det {np.linalg.det(Atilde):.6g}"
        )

    if not (np.isfinite(config.alpha0) and config.alpha0 > 0):
        raise ScenarioError("alpha0 must be a positive finite number")

    _check_obstacle(obstacle)

    G = B.T @ B if config.G is None else np.array(config.G, dtype=float)
    if G.shape != (m, m):
        raise ScenarioError(f"G must be {m}x{m}")
    if not np.allclose(G, G.T, rtol=0, atol=SYMMETRY_TOL * max(1.0, np.abs(G).max())):
        raise ScenarioError("G is not symmetric")
    if np.linalg.eigvalsh(0.5 * (G + G.T)).min() <= 0.0:
        raise ScenarioError("G is not positive definite")
    Ginv = np.linalg.inv(G)
    if config.G is None:
        # orthogonal projector onto range(B), formed stably from a QR factor
        Q, _ = np.linalg.qr(B)
        D = Q @ Q.T
    else:
        D = B @ Ginv @ B.T
    D = 0.5 * (D + D.T)

    return Scenario(
        system=system,
        obstacle=obstacle,
        config=config,
        Atilde=_frozen(Atilde),
        eigvals=_frozen(eigvals_2x2(Atilde)),
        G=_frozen(G),
        Ginv=_frozen(Ginv),
        D=_frozen(D),
    )


def obstacle_from_dict(data: dict) -> Obstacle:
    if not isinstance(data, dict) or len(data) != 1:
        raise ScenarioError('obstacle must be {"circle": {...}} or {"ellipse": {...}}')
    (kind, body), = data.items()
    if kind == "circle":
        center = _finite_matrix(body.get("center"), "obstacle.circle.center", (2,))
        radius = _finite_matrix(body.get("radius"), "obstacle.circle.radius", ())
        return Circle(center, float(radius))
    if kind == "ellipse":
        center = _finite_matrix(body.get("center"), "obstacle.ellipse.center", (2,))
        P = _finite_matrix(body.get("P"), "obstacle.ellipse.P", (2, 2))
        return Ellipse(center, P)
    raise ScenarioError(f"unknown obstacle kind {kind!r}")


def obstacle_to_dict(obstacle: Obstacle) -> dict:
    if isinstance(obstacle, Circle):
        return {"circle": {"center": obstacle.center.tolist(), "radius": obstacle.radius}}
    return {"ellipse": {"center": obstacle.center.tolist(), "P": obstacle.P.tolist()}}


def scenario_from_dict(data: dict, alpha0: float | None = None) -> Scenario:
    """Parse the JSON scenario schema (see README) and validate it."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    missing = {"A", "B", "K", "obstacle", "alpha0"} - set(data)
    if missing and not (missing == {"alpha0"} and alpha0 is not None):
        raise ScenarioError(f"scenario is missing keys {sorted(missing)}")
    A = _finite_matrix(data["A"], "A", (2, 2))
    B = _finite_matrix(data["B"], "B")
    if B.shape == (2,):
        B = B.reshape(2, 1)
    K = _finite_matrix(data["K"], "K")
    if K.ndim == 1:
        K = K.reshape(1, -1)
    a0 = alpha0 if alpha0 is not None else float(_finite_matrix(data["alpha0"], "alpha0", ()))
    G = _finite_matrix(data["G"], "G") if data.get("G") is not None else None
    return validate_scenario(
        PlanarLTISystem(A, B, K), obstacle_from_dict(data["obstacle"]), FilterConfig(a0, G)
    )


def load_scenario(path: str | Path, alpha0: float | None = None) -> Scenario:
    """Read a scenario JSON file. Non-finite numbers are rejected."""

    def _reject_constant(token):
        raise ScenarioError(f"non-finite number {token} in scenario file")

    text = Path(path).read_text()
    data = json.loads(text, parse_constant=_reject_constant)
    return scenario_from_dict(data, alpha0=alpha0)


def make_scenario(A, B, K, obstacle: Obstacle, alpha0: float) -> Scenario:
    """Convenience constructor from raw arrays."""
    B = np.array(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(2, 1)
    K = np.array(K, dtype=float)
    if K.ndim == 1:
        K = K.reshape(1, -1)
    return validate_scenario(PlanarLTISystem(A, B, K), obstacle, FilterConfig(alpha0))


def from_closed_loop(Atilde, obstacle: Obstacle, alpha0: float) -> Scenario:
    """Fully actuated scenario specified by its closed-loop matrix (B = I, K = 0)."""
    return make_scenario(np.array(Atilde, dtype=float), np.eye(2), np.zeros((2, 2)), obstacle, alpha0)


def eigvals_2x2(M) -> np.ndarray:
    """Eigenvalues of a real 2x2 matrix from trace and determinant, ascending.

    Unlike a general solver this returns an exactly real double root when the
    discriminant vanishes, as it does for a Jordan block.
    """
    M = np.asarray(M, dtype=float)
    half = 0.5 * (M[0, 0] + M[1, 1])
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = half * half - det
    if disc < 0:
        im = math.sqrt(-disc)
        return np.array([complex(half, -im), complex(half, im)])
    big = half + math.copysign(math.sqrt(disc), half) if half != 0 else math.sqrt(disc)
    small = det / big if big != 0 else 0.0
    return np.sort(np.array([big, small])).astype(complex)


def spectral_norm(M) -> float:
    return float(np.linalg.norm(M, 2))


def center_norm(scenario: Scenario) -> float:
    return math.hypot(*scenario.center)


class Kind(str, Enum):
    SADDLE = "Saddle"
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    DEGENERATE = "Degenerate"
    UNSTABLE = "Unstable"


# Provenance labels for the analytic branch that produced an equilibrium.
UNDERACTUATED_CLOSED_FORM = "UnderactuatedClosedForm"
GENERAL_DELTA_ROOT = "GeneralDeltaRoot"
BRUTE_FORCE = "BruteForce"


def table_row_provenance(row: int) -> str:
    return f"EigenvectorTableRow({row})"


@dataclass(frozen=True)
class EquilibriumReport:
    """An undesirable equilibrium: location on the boundary plus local analysis."""

    location: np.ndarray
    indicator: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    kind: Kind
    provenance: str

    def __post_init__(self):
        object.__setattr__(self, "location", _frozen(self.location))
        object.__setattr__(self, "jacobian", _frozen(self.jacobian))
        object.__setattr__(self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, dtype=complex)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "location": self.location.tolist(),
            "indicator": self.indicator,
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues.tolist()],
            "kind": self.kind.value,
            "provenance": self.provenance,
        }


class Verdict(str, Enum):
    CONVERGED_TO_ORIGIN = "ConvergedToOrigin"
    CONVERGED_TO_EQUILIBRIUM = "ConvergedToEquilibrium"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped closed-loop states with safety margin and constraint margin."""

    t: np.ndarray
    x: np.ndarray
    h: np.ndarray
    eta: np.ndarray
    verdict: Verdict
    equilibrium_index: int | None = None

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def to_csv(self) -> str:
        lines = ["t,x1,x2,h,eta"]
        for t, (x1, x2), h, e in zip(self.t.tolist(), self.x.tolist(), self.h.tolist(),
                                     self.eta.tolist()):
            lines.append(f"{t:.12g},{x1:.12g},{x2:.12g},{h:.12g},{e:.12g}")
        return "\n".join(lines) + "\n"
