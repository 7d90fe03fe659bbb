"""Fixed-step RK4 simulation of the filtered closed loop and the empirical checks
built on it: convergence verdicts, stable-manifold tracing, basin sampling and
a limit-cycle probe.

The field is continuous but only piecewise smooth across ``eta = 0``, so a small
fixed step is used instead of an adaptive controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from cbf_lab.equilibria import find_equilibria
from cbf_lab.errors import NotSaddle, UnsafeStart
from cbf_lab.model import Circle, EquilibriumReport, Kind, Scenario, Trajectory, Verdict
from cbf_lab.safety_filter import make_scalar_field, vector_field


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 100.0
    origin_tol: float = 1e-6
    equilibrium_tol: float = 1e-6
    invariance_tol: float = 1e-6
    sustain_steps: int = 100

    def __post_init__(self):
        if not (self.dt > 0 and self.t_max > self.dt):
            raise ValueError("need 0 < dt < t_max")
        if min(self.origin_tol, self.equilibrium_tol, self.invariance_tol) <= 0:
            raise ValueError("tolerances must be positive")


def _obstacle_extent(scenario: Scenario) -> float:
    obs = scenario.obstacle
    if isinstance(obs, Circle):
        return float(np.linalg.norm(obs.center)) + obs.radius
    return float(np.linalg.norm(obs.center)) + 1.0 / math.sqrt(np.linalg.eigvalsh(obs.P)[0])


def _equilibrium_points(scenario, equilibria):
    if equilibria is None:
        equilibria = find_equilibria(scenario).reports
    return [np.asarray(e.location if isinstance(e, EquilibriumReport) else e, dtype=float)
            for e in equilibria]


def integrate(scenario: Scenario, x0, config: IntegratorConfig | None = None,
              equilibria=None, reverse: bool = False, stop_box: float | None = None,
              stop_on_verdict: bool = True, stop_center: float | None = None,
              allow_unsafe: bool = False) -> Trajectory:
    """Integrate one trajectory and classify where it ends up.

    ``equilibria`` defaults to the analytic undesirable equilibria. With
    ``reverse=True`` the field is negated (time runs backwards) and the start is
    not required to be safe. ``stop_box`` ends the run once ``max|x_i|`` exceeds
    it; ``stop_center`` ends a reversed run within that distance of the
    obstacle center, where the gradient of ``h`` vanishes and the field is
    singular, or as soon as a step crosses it.

    Raises:
        UnsafeStart: ``h(x0) < 0`` in forward time without ``allow_unsafe``.
    """
    config = config or IntegratorConfig()
    x1, x2 = (float(v) for v in np.asarray(x0, dtype=float))
    field_fn = make_scalar_field(scenario)
    h0 = float(scenario.obstacle.h(np.array([x1, x2])))
    if not (reverse or allow_unsafe) and h0 < 0:
        raise UnsafeStart(f"h(x0) = {h0:.6g} < 0")
    c1, c2 = (float(v) for v in scenario.center)
    center2 = -1.0 if stop_center is None else stop_center**2
    eqs = [tuple(p.tolist()) for p in _equilibrium_points(scenario, equilibria)] if not reverse else []
    sgn = -1.0 if reverse else 1.0
    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    otol2 = config.origin_tol**2
    etol2 = config.equilibrium_tol**2
    streak_o = 0
    streak_e = [0] * len(eqs)
    verdict, index = Verdict.UNDETERMINED, None

    ts, xs, hs, es = [0.0], [(x1, x2)], [], []
    f1, f2, h, e = field_fn(x1, x2)
    hs.append(h)
    es.append(e)
    for k in range(1, n_steps + 1):
        k1a, k1b = sgn * f1, sgn * f2
        a1, a2, _, _ = field_fn(x1 + 0.5 * dt * k1a, x2 + 0.5 * dt * k1b)
        k2a, k2b = sgn * a1, sgn * a2
        a1, a2, _, _ = field_fn(x1 + 0.5 * dt * k2a, x2 + 0.5 * dt * k2b)
        k3a, k3b = sgn * a1, sgn * a2
        a1, a2, _, _ = field_fn(x1 + dt * k3a, x2 + dt * k3b)
        x1 += dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + sgn * a1)
        x2 += dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + sgn * a2)
        f1, f2, h, e = field_fn(x1, x2)
        ts.append(k * dt)
        xs.append((x1, x2))
        hs.append(h)
        es.append(e)
        if not (math.isfinite(x1) and math.isfinite(x2)):
            break
        if stop_box is not None and max(abs(x1), abs(x2)) > stop_box:
            break
        if (x1 - c1) ** 2 + (x2 - c2) ** 2 < center2:
            break
        if reverse and stop_center is not None and h < 0 and h > hs[-2]:
            # h must fall in reversed time inside the obstacle; a rise means
            # the step jumped across the singular center
            for seq in (ts, xs, hs, es):
                seq.pop()
            break
        if reverse:
            continue
        streak_o = streak_o + 1 if x1 * x1 + x2 * x2 < otol2 else 0
        if streak_o >= config.sustain_steps:
            verdict = Verdict.CONVERGED_TO_ORIGIN
        for i, (p1, p2) in enumerate(eqs):
            d1, d2 = x1 - p1, x2 - p2
            streak_e[i] = streak_e[i] + 1 if d1 * d1 + d2 * d2 < etol2 else 0
            if streak_e[i] >= config.sustain_steps:
                verdict, index = Verdict.CONVERGED_TO_EQUILIBRIUM, i
        if verdict is not Verdict.UNDETERMINED and stop_on_verdict:
            break
    return Trajectory(np.array(ts), np.array(xs), np.array(hs), np.array(es), verdict, index)


@dataclass
class BatchResult:
    starts: np.ndarray
    final: np.ndarray
    verdicts: list[Verdict]
    equilibrium_index: np.ndarray  # -1 where not converged to an equilibrium
    min_h: np.ndarray
    t_end: np.ndarray


def integrate_batch(scenario: Scenario, X0, config: IntegratorConfig | None = None,
                    equilibria=None) -> BatchResult:
    """Vectorised RK4 over many initial conditions; only terminal data is kept."""
    config = config or IntegratorConfig()
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n = X0.shape[0]
    eqs = np.array(_equilibrium_points(scenario, equilibria)).reshape(-1, 2)
    h0 = scenario.obstacle.h(X0)
    if np.any(h0 < 0):
        raise UnsafeStart(f"{int(np.sum(h0 < 0))} initial conditions have h < 0")
    dt = config.dt
    n_steps = int(round(config.t_max / dt))
    X = X0.copy()
    final = X0.copy()
    min_h = h0.copy()
    streak_o = np.zeros(n, dtype=int)
    streak_e = np.zeros((n, len(eqs)), dtype=int)
    verdict = np.zeros(n, dtype=int)  # 0 undetermined, 1 origin, 2 equilibrium
    eq_index = np.full(n, -1)
    t_end = np.full(n, n_steps * dt)
    active = np.arange(n)
    for k in range(1, n_steps + 1):
        if active.size == 0:
            break
        Y = X[active]
        k1 = vector_field(scenario, Y)
        k2 = vector_field(scenario, Y + 0.5 * dt * k1)
        k3 = vector_field(scenario, Y + 0.5 * dt * k2)
        k4 = vector_field(scenario, Y + dt * k3)
        Y = Y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        X[active] = Y
        min_h[active] = np.minimum(min_h[active], scenario.obstacle.h(Y))
        near_o = np.einsum("ij,ij->i", Y, Y) < config.origin_tol**2
        streak_o[active] = np.where(near_o, streak_o[active] + 1, 0)
        done_o = streak_o[active] >= config.sustain_steps
        done_e = np.zeros(active.size, dtype=bool)
        if len(eqs):
            d2 = np.sum((Y[:, None, :] - eqs[None, :, :]) ** 2, axis=-1)
            se = np.where(d2 < config.equilibrium_tol**2, streak_e[active] + 1, 0)
            streak_e[active] = se
            hit = se >= config.sustain_steps
            done_e = hit.any(axis=1)
            eq_index[active[done_e]] = np.argmax(hit[done_e], axis=1)
        bad = ~np.all(np.isfinite(Y), axis=1)
        verdict[active[done_o]] = 1
        verdict[active[done_e & ~done_o]] = 2
        finished = done_o | done_e | bad
        t_end[active[finished]] = k * dt
        final[active] = Y
        active = active[~finished]
    verdicts = [Verdict.UNDETERMINED, Verdict.CONVERGED_TO_ORIGIN, Verdict.CONVERGED_TO_EQUILIBRIUM]
    return BatchResult(X0, final, [verdicts[v] for v in verdict], eq_index, min_h, t_end)


# ---------------------------------------------------------------------------
# stable manifolds


@dataclass
class ManifoldTrace:
    """Numerical global stable manifold of a saddle.

    Each branch is integrated in reversed time; ``branch.t`` is elapsed reversed
    time, so ``branch.x[k]`` flows forward onto the saddle.
    """

    seed_equilibrium: np.ndarray
    stable_eigvec: np.ndarray
    stable_eigval: float
    branches: list[Trajectory] = field(default_factory=list)

    @property
    def points(self) -> np.ndarray:
        b0, b1 = self.branches
        return np.vstack([b0.x[::-1], b1.x])


def stable_eigenpair(report: EquilibriumReport, scenario: Scenario):
    J = report.jacobian
    w, V = np.linalg.eig(J)
    k = int(np.argmin(w.real))
    v = np.real(V[:, k])
    v /= np.linalg.norm(v)
    g = scenario.obstacle.grad(report.location)
    if v @ g < 0:
        v = -v
    return float(w[k].real), v


def trace_stable_manifold(scenario: Scenario, report: EquilibriumReport,
                          epsilon: float | None = None,
                          config: IntegratorConfig | None = None) -> ManifoldTrace:
    """Reversed-time integration from ``p +/- epsilon v_s``.

    The eigenvector is oriented towards the safe side, so branch 0 starts in the
    safe set and branch 1 inside the obstacle. Branches stop on leaving the box
    of half-width ``10 (|x_c| + r)``, near the obstacle center, or at ``t_max``.

    Raises:
        NotSaddle: ``report.kind`` is not a saddle.
    """
    if report.kind is not Kind.SADDLE:
        raise NotSaddle(f"equilibrium at {report.location.tolist()} is {report.kind.value}")
    config = config or IntegratorConfig()
    if epsilon is None:
        r = scenario.obstacle.radius if isinstance(scenario.obstacle, Circle) else 1.0
        epsilon = 1e-6 * r
    mu, v = stable_eigenpair(report, scenario)
    box = 10.0 * _obstacle_extent(scenario)
    p = report.location
    obs = scenario.obstacle
    size = obs.radius if isinstance(obs, Circle) else 1.0 / math.sqrt(np.linalg.eigvalsh(obs.P)[-1])
    branches = [integrate(scenario, p + s * epsilon * v, config, reverse=True, stop_box=box,
                          stop_center=1e-3 * size)
                for s in (1.0, -1.0)]
    return ManifoldTrace(np.array(p), v, mu, branches)


# ---------------------------------------------------------------------------
# basin sampling


@dataclass
class BasinStatistics:
    n: int
    to_origin: int
    to_equilibrium: dict[int, int]
    undetermined: int
    min_h: float
    equilibria: list[EquilibriumReport]
    result: BatchResult | None = None

    def fraction(self, key) -> float:
        if self.n == 0:
            return 0.0
        if key == "origin":
            return self.to_origin / self.n
        if key == "undetermined":
            return self.undetermined / self.n
        return self.to_equilibrium.get(key, 0) / self.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "to_origin": self.to_origin,
            "to_equilibrium": [
                {"index": i, "location": self.equilibria[i].location.tolist(),
                 "kind": self.equilibria[i].kind.value, "count": c}
                for i, c in sorted(self.to_equilibrium.items())
            ],
            "undetermined": self.undetermined,
            "min_h": self.min_h if self.n else None,
        }


def sample_safe_starts(scenario: Scenario, n_points: int, seed: int,
                       half_width: float | None = None) -> np.ndarray:
    """Scrambled Sobol points in the box ``[-L, L]^2`` that lie strictly in the safe set."""
    if n_points <= 0:
        return np.zeros((0, 2))
    L = half_width if half_width is not None else 2.0 * _obstacle_extent(scenario)
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    out = np.zeros((0, 2))
    while out.shape[0] < n_points:
        pts = qmc.scale(sampler.random(max(64, 1 << int(math.ceil(math.log2(2 * n_points))))),
                        [-L, -L], [L, L])
        out = np.vstack([out, pts[scenario.obstacle.h(pts) > 0]])
    return out[:n_points]


def basin_sample(scenario: Scenario, n_points: int, config: IntegratorConfig | None = None,
                 seed: int = 0, half_width: float | None = None,
                 equilibria: list[EquilibriumReport] | None = None) -> BasinStatistics:
    """Where seeded quasi-random safe initial conditions end up."""
    if equilibria is None:
        equilibria = find_equilibria(scenario).reports
    if n_points <= 0:
        return BasinStatistics(0, 0, {}, 0, math.inf, equilibria)
    X0 = sample_safe_starts(scenario, n_points, seed, half_width)
    res = integrate_batch(scenario, X0, config, equilibria)
    to_eq: dict[int, int] = {}
    for v, i in zip(res.verdicts, res.equilibrium_index.tolist()):
        if v is Verdict.CONVERGED_TO_EQUILIBRIUM:
            to_eq[i] = to_eq.get(i, 0) + 1
    return BasinStatistics(
        n=n_points,
        to_origin=sum(v is Verdict.CONVERGED_TO_ORIGIN for v in res.verdicts),
        to_equilibrium=to_eq,
        undetermined=sum(v is Verdict.UNDETERMINED for v in res.verdicts),
        min_h=float(res.min_h.min()),
        equilibria=equilibria,
        result=res,
    )


# ---------------------------------------------------------------------------
# limit cycles


@dataclass
class ProbeReport:
    n_starts: int
    undetermined: int
    suspects: list[list[float]]
    min_h: float

    def to_dict(self) -> dict:
        return {"n_starts": self.n_starts, "undetermined": self.undetermined,
                "suspects": self.suspects, "min_h": self.min_h}


def is_recurrent(x: np.ndarray, return_tol: float = 1e-4, depart: float = 1e-2,
                 max_points: int = 3000) -> bool:
    """Does the tail of a trajectory come back near itself after wandering off?

    Requires the norm to be non-monotone and some pair of tail samples to lie
    within ``return_tol`` while the path between them departed by more than
    ``depart``.
    """
    tail = x[len(x) // 2:]
    if len(tail) < 3:
        return False
    stride = max(1, len(tail) // max_points)
    tail = tail[::stride]
    norms = np.linalg.norm(tail, axis=1)
    if np.all(np.diff(norms) <= 1e-12 * max(1.0, norms.max())):
        return False
    seg_a, seg = tail[:-1], np.diff(tail, axis=0)
    seg_len2 = np.maximum(np.einsum("ij,ij->i", seg, seg), 1e-300)
    for i in range(len(tail) - 1):
        # distance from sample i to each later segment of the polyline
        rel = tail[i] - seg_a[i + 1:]
        t = np.clip(np.einsum("ij,ij->i", rel, seg[i + 1:]) / seg_len2[i + 1:], 0.0, 1.0)
        d = np.linalg.norm(rel - t[:, None] * seg[i + 1:], axis=1)
        if d.size == 0:
            break
        away = np.maximum.accumulate(np.linalg.norm(tail[i + 1:-1] - tail[i], axis=1))
        if np.any((d < return_tol) & (away > depart)):
            return True
    return False


def probe_starts(scenario: Scenario, n_ring: int = 32) -> np.ndarray:
    """A ring around everything plus a ring hugging the obstacle."""
    ext = _obstacle_extent(scenario)
    th = 2 * math.pi * (np.arange(n_ring) + 0.5) / n_ring
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    obs = scenario.obstacle
    inner_r = (obs.radius if isinstance(obs, Circle) else
               1.0 / math.sqrt(np.linalg.eigvalsh(obs.P)[0])) * 1.25
    pts = np.vstack([2.0 * ext * ring, obs.center + inner_r * ring])
    return pts[obs.h(pts) > 0]


def limit_cycle_probe(scenario: Scenario, config: IntegratorConfig | None = None,
                      n_ring: int = 32, equilibria=None) -> ProbeReport:
    """Long runs from rings of starts; flags undetermined, recurrent trajectories."""
    config = config or IntegratorConfig()
    if equilibria is None:
        equilibria = find_equilibria(scenario).reports
    starts = probe_starts(scenario, n_ring)
    res = integrate_batch(scenario, starts, config, equilibria)
    suspects = []
    undetermined = [i for i, v in enumerate(res.verdicts) if v is Verdict.UNDETERMINED]
    for i in undetermined:
        traj = integrate(scenario, starts[i], config, equilibria)
        if is_recurrent(traj.x):
            suspects.append(starts[i].tolist())
    return ProbeReport(len(starts), len(undetermined), suspects, float(res.min_h.min()))


def with_dt(config: IntegratorConfig, dt: float) -> IntegratorConfig:
    return replace(config, dt=dt)
