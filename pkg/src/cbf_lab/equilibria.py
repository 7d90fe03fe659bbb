"""Enumeration and classification of undesirable equilibria.

An undesirable equilibrium ``p`` lies on the obstacle boundary and satisfies
``At p = delta * D grad_h(p)`` for some indicator ``delta < 0``. Three analytic
routes produce them:

* single input: a closed form along the line ``beta x1 = gamma x2``;
* two inputs with ``x_c`` an eigenvector of ``At``: the near/far points on the
  ray through ``x_c`` plus the intersections of a singular-resolvent line with
  the circle, counted by the eigenvector tables;
* anything else: real roots in ``delta`` of
  ``r^2 det(At - 2 delta D)^2 - |adj(At - 2 delta D) At x_c|^2``,
  plus the singular values of ``delta`` handled as line/circle intersections.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from cbf_lab.assumptions import check_assumptions, underactuated_coefficients
from cbf_lab.errors import (
    AssumptionViolated,
    ComplexSpectrum,
    EigenvectorDegenerate,
    NotEigenvector,
    RootFindingFailed,
    WrongActuation,
)
from cbf_lab.model import (
    GENERAL_DELTA_ROOT,
    UNDERACTUATED_CLOSED_FORM,
    Circle,
    EquilibriumReport,
    Kind,
    Scenario,
    spectral_norm,
    table_row_provenance,
)
from cbf_lab.roots import cubic_discriminant, real_roots
from cbf_lab.safety_filter import indicator, jacobian_at_boundary

EIGENVECTOR_TOL = 1e-9
NEAR_EIGENVECTOR_TOL = 1e-6
TABLE_EQ_TOL = 1e-9
DEGENERACY_RTOL = 1e-7
EQUILIBRIUM_TOL = 1e-8
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class PotentialEquilibrium:
    """A solution of the boundary condition with non-negative indicator."""

    location: np.ndarray
    indicator: float


@dataclass
class CaseDiagnosis:
    actuation: str
    xc_eigenvector: bool
    table_row: int | None = None
    condition12: str | None = None
    delta_roots: list[float] = field(default_factory=list)
    outside_paper_tables: bool = False
    expected_kinds: dict[str, int] | None = None
    table_consistent: bool | None = None
    route: str = ""
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EquilibriumAnalysis:
    reports: list[EquilibriumReport]
    diagnosis: CaseDiagnosis
    potential: list[PotentialEquilibrium] = field(default_factory=list)

    @property
    def locations(self) -> np.ndarray:
        return np.array([r.location for r in self.reports]).reshape(-1, 2)

    def kinds(self) -> Counter:
        return Counter(r.kind.value for r in self.reports)

    def to_dict(self) -> dict:
        return {
            "equilibria": [r.to_dict() for r in self.reports],
            "diagnosis": self.diagnosis.to_dict(),
            "potential": [
                {"location": p.location.tolist(), "indicator": p.indicator} for p in self.potential
            ],
        }


# ---------------------------------------------------------------------------
# local analysis


def degeneracy_tol(scenario: Scenario) -> float:
    return DEGENERACY_RTOL * spectral_norm(scenario.Atilde)


def kind_from_eigenvalues(eigs, tol: float) -> Kind:
    re = np.real(np.asarray(eigs))
    if np.any(np.abs(re) <= tol):
        return Kind.DEGENERATE
    if np.all(re < -tol):
        return Kind.ASYMPTOTICALLY_STABLE
    if np.all(re > tol):
        return Kind.UNSTABLE
    return Kind.SADDLE


def classify(scenario: Scenario, location, delta: float | None = None) -> Kind:
    """Kind of the equilibrium at ``location`` from the boundary Jacobian spectrum."""
    J = jacobian_at_boundary(scenario, location)
    return kind_from_eigenvalues(np.linalg.eigvals(J), degeneracy_tol(scenario))


def equilibrium_residual(scenario: Scenario, p, delta: float) -> float:
    p = np.asarray(p, dtype=float)
    return float(np.linalg.norm(scenario.Atilde @ p - delta * scenario.D @ scenario.obstacle.grad(p)))


def make_report(scenario: Scenario, p, provenance: str) -> EquilibriumReport:
    p = np.asarray(p, dtype=float)
    J = jacobian_at_boundary(scenario, p)
    eigs = np.linalg.eigvals(J)
    eigs = eigs[np.lexsort((eigs.imag, eigs.real))]
    return EquilibriumReport(
        location=p,
        indicator=indicator(scenario, p),
        jacobian=J,
        eigenvalues=eigs,
        kind=kind_from_eigenvalues(eigs, degeneracy_tol(scenario)),
        provenance=provenance,
    )


def polish(scenario: Scenario, p, delta: float, iters: int = 8):
    """Newton on ``(At p - delta D grad_h(p), h(p)) = 0`` in ``(p, delta)``."""
    At, D, obs = scenario.Atilde, scenario.D, scenario.obstacle
    H = obs.hessian()
    z = np.array([*np.asarray(p, dtype=float), delta])

    def residual(z):
        q = z[:2]
        return np.array([*(At @ q - z[2] * D @ obs.grad(q)), obs.h(q)])

    best, best_norm = z.copy(), np.linalg.norm(residual(z))
    for _ in range(iters):
        q, d = z[:2], z[2]
        g = obs.grad(q)
        jac = np.zeros((3, 3))
        jac[:2, :2] = At - d * D @ H
        jac[:2, 2] = -D @ g
        jac[2, :2] = g
        try:
            step = np.linalg.solve(jac, residual(z))
        except np.linalg.LinAlgError:
            break
        z = z - step
        n = np.linalg.norm(residual(z))
        if n < best_norm:
            best, best_norm = z.copy(), n
        if np.linalg.norm(step) <= 1e-16 * max(1.0, np.linalg.norm(z)):
            break
    return best[:2], float(best[2])


def _sort_reports(reports):
    return sorted(reports, key=lambda r: (round(r.location[0], 9), round(r.location[1], 9)))


def _dedupe(points, tol):
    out = []
    for p, d in points:
        if all(np.linalg.norm(p - q) > tol for q, _ in out):
            out.append((p, d))
    return out


def _split(scenario, candidates, provenance):
    reports, potential = [], []
    for p, _ in candidates:
        delta = indicator(scenario, p)
        if delta < 0:
            reports.append(make_report(scenario, p, provenance))
        else:
            potential.append(PotentialEquilibrium(np.asarray(p, dtype=float), delta))
    potential.sort(key=lambda q: tuple(q.location))
    return _sort_reports(reports), potential


# ---------------------------------------------------------------------------
# single input


def underactuated_equilibrium(scenario: Scenario, check: bool = True) -> EquilibriumReport:
    """The unique undesirable equilibrium of a single-input circle scenario.

    Raises:
        WrongActuation: ``m != 1``.
        AssumptionViolated: an upstream assumption fails (with ``check=True``) or
            the selected root does not have a negative indicator.
    """
    if scenario.m != 1:
        raise WrongActuation(f"expected m = 1, got m = {scenario.m}")
    if not isinstance(scenario.obstacle, Circle):
        raise AssumptionViolated("closed form is stated for circles; reduce the ellipse first")
    if check:
        rep = check_assumptions(scenario)
        if not rep.all_hold:
            raise AssumptionViolated(f"assumption check failed: {rep}")
    co = underactuated_coefficients(scenario)
    xc, r = scenario.center, scenario.obstacle.radius
    gb = co.gamma**2 + co.beta**2
    s = co.gamma * xc[0] + co.beta * xc[1]
    disc = r * r * gb - co.T3**2
    if gb <= 0 or disc < 0 or s == 0:
        raise AssumptionViolated(f"degenerate line/circle geometry (gb={gb}, disc={disc}, s={s})")
    z = (s + math.sqrt(disc)) / gb if s < 0 else (s - math.sqrt(disc)) / gb
    p = np.array([co.gamma * z, co.beta * z])
    report = make_report(scenario, p, UNDERACTUATED_CLOSED_FORM)
    if not report.indicator < 0:
        raise AssumptionViolated(f"selected root has indicator {report.indicator:.6g} >= 0")
    return report


def underactuated_candidates(scenario: Scenario):
    """Both line/circle intersections ``p+`` and ``p-`` (any indicator sign)."""
    co = underactuated_coefficients(scenario)
    xc, r = scenario.center, scenario.obstacle.radius
    gb = co.gamma**2 + co.beta**2
    s = co.gamma * xc[0] + co.beta * xc[1]
    disc = r * r * gb - co.T3**2
    if gb <= 0 or disc < 0:
        return []
    return [np.array([co.gamma * z, co.beta * z])
            for z in ((s + math.sqrt(disc)) / gb, (s - math.sqrt(disc)) / gb)]


# ---------------------------------------------------------------------------
# two inputs, x_c an eigenvector


@dataclass(frozen=True)
class EigenStructure:
    """Real spectral data of the closed-loop matrix relative to ``x_c``."""

    lam: float  # eigenvalue with eigenvector x_c
    mu: float  # the other eigenvalue
    u: np.ndarray  # x_c / |x_c|
    w: np.ndarray  # unit complementary direction (eigenvector or Jordan partner)
    jordan: bool
    scalar: bool
    kappa: float  # (At - lam I) w = kappa u in the Jordan case
    sin_angle: float


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _perp(u):
    return np.array([-u[1], u[0]])


def _null_direction(M):
    _, _, vt = np.linalg.svd(M)
    return _unit(vt[-1])


def eigen_structure(scenario: Scenario) -> EigenStructure:
    """Locate ``x_c`` relative to the eigenvectors of the closed-loop matrix.

    Raises:
        ComplexSpectrum: non-real eigenvalues.
    """
    At = scenario.Atilde
    ev = scenario.eigvals
    scale = spectral_norm(At)
    if np.any(np.abs(ev.imag) > 1e-12 * scale):
        raise ComplexSpectrum(f"eigenvalues {ev.tolist()} are not real")
    l1, l2 = sorted(ev.real.tolist())
    u = _unit(scenario.center)
    repeated = abs(l1 - l2) <= 1e-9 * scale
    if repeated:
        lam = 0.5 * (l1 + l2)
        M = At - lam * np.eye(2)
        if np.linalg.norm(M, 2) <= 1e-9 * scale:
            return EigenStructure(lam, lam, u, _perp(u), False, True, 0.0, 0.0)
        v = _null_direction(M)
        sin = abs(u[0] * v[1] - u[1] * v[0])
        w = _perp(u)
        kappa = float(u @ (M @ w))
        return EigenStructure(lam, lam, u, w, True, False, kappa, sin)
    best = None
    for lam, mu in ((l1, l2), (l2, l1)):
        v = _null_direction(At - lam * np.eye(2))
        sin = abs(u[0] * v[1] - u[1] * v[0])
        if best is None or sin < best[0]:
            best = (sin, lam, mu)
    sin, lam, mu = best
    w = _null_direction(At - mu * np.eye(2))
    return EigenStructure(lam, mu, u, w, False, False, 0.0, sin)


def table_threshold(es: EigenStructure, n: float, r: float) -> float:
    if es.jordan:
        return 1.0 - es.kappa**2 * r * r / (es.lam**2 * n * n)
    return 1.0 - (es.lam - es.mu) ** 2 * r * r / (es.lam**2 * n * n)


_EXPECTED = {
    1: {"Saddle": 1},
    2: {"Saddle": 1, "Degenerate": 1},
    3: {"Saddle": 2, "AsymptoticallyStable": 1},
    "Condition1": {"Degenerate": 1},
    "Condition2": {"Saddle": 1, "Degenerate": 1},
}


def _fully_actuated_standard(scenario: Scenario) -> bool:
    return scenario.m == 2 and np.allclose(scenario.D, np.eye(2), rtol=0, atol=1e-10)


def eigenvector_case(scenario: Scenario, angle_tol: float = EIGENVECTOR_TOL) -> EquilibriumAnalysis:
    """Equilibria when ``x_c`` is an eigenvector of the closed-loop matrix.

    Raises:
        NotEigenvector: the angle test fails.
        ComplexSpectrum: the spectrum is not real.
    """
    if not _fully_actuated_standard(scenario) or not isinstance(scenario.obstacle, Circle):
        raise WrongActuation("eigenvector tables need invertible B, G = B^T B and a circle")
    es = eigen_structure(scenario)
    if es.sin_angle >= angle_tol:
        raise NotEigenvector(f"sin(angle) = {es.sin_angle:.3e} >= {angle_tol:g}")
    xc, r = scenario.center, scenario.obstacle.radius
    n = float(np.linalg.norm(xc))
    lam, mu, u, w = es.lam, es.mu, es.u, es.w
    scale = n + r

    cands = [(xc * (1.0 + r / n), 0.5 * lam * (1.0 + n / r)),
             (xc * (1.0 - r / n), 0.5 * lam * (1.0 - n / r))]

    if es.scalar:
        c, thr = 0.0, 1.0
    else:
        c = 0.0 if es.jordan else float(u @ w)
        thr = table_threshold(es, n, r)
    diff = c * c - thr
    row = 2 if abs(diff) <= TABLE_EQ_TOL else (1 if diff < 0 else 3)

    if not es.scalar:
        if es.jordan:
            b = -lam * n / es.kappa
            # p - x_c = a u + b w, |p - x_c| = r
            if row == 2:
                offs = [0.0]
            elif row == 3:
                offs = [math.sqrt(max(r * r - b * b, 0.0)), -math.sqrt(max(r * r - b * b, 0.0))]
            else:
                offs = []
            cands += [(xc + a * u + b * w, 0.5 * lam) for a in offs]
        else:
            d = n * lam / (mu - lam)
            if row == 2:
                bs = [-d * c]
            elif row == 3:
                root = abs(d) * math.sqrt(diff)
                bs = [-d * c + root, -d * c - root]
            else:
                bs = []
            cands += [((n + d) * u + b * w, 0.5 * mu) for b in bs]

    condition = None
    if not es.jordan and not es.scalar and lam > mu and abs(thr) <= TABLE_EQ_TOL:
        condition = "Condition1" if abs(c * c - thr) <= TABLE_EQ_TOL else "Condition2"

    cands = _dedupe(cands, 1e-9 * scale)
    cands = [(p, d) for p, d in cands if abs(scenario.obstacle.h(p)) <= 1e-7 * scale**2]
    key = condition if condition else row
    reports, potential = _split(scenario, cands, table_row_provenance(row))
    expected = dict(_EXPECTED[key])
    realized = Counter(r.kind.value for r in reports)
    diag = CaseDiagnosis(
        actuation="FullyActuated",
        xc_eigenvector=True,
        table_row=row,
        condition12=condition or "Neither",
        delta_roots=sorted([r.indicator for r in reports] + [q.indicator for q in potential]),
        expected_kinds=expected,
        table_consistent=dict(realized) == expected,
        route="eigenvector_case",
    )
    if es.jordan:
        diag.notes.append(f"non-diagonalizable closed loop (Jordan coupling {es.kappa:.6g})")
    return EquilibriumAnalysis(reports, diag, potential)


# ---------------------------------------------------------------------------
# general root path


def _poly_matrix(scenario: Scenario):
    At, D = scenario.Atilde, scenario.D
    return [[Polynomial([At[i, j], -2.0 * D[i, j]]) for j in range(2)] for i in range(2)]


def boundary_polynomial(scenario: Scenario) -> Polynomial:
    """``r^2 det(M)^2 - |adj(M) At x_c|^2`` with ``M = At - 2 delta D`` (circle)."""
    (m11, m12), (m21, m22) = _poly_matrix(scenario)
    w = scenario.Atilde @ scenario.center
    q1 = m22 * w[0] - m12 * w[1]
    q2 = -m21 * w[0] + m11 * w[1]
    det = m11 * m22 - m12 * m21
    r = scenario.obstacle.radius
    return r * r * det * det - (q1 * q1 + q2 * q2)


def resolvent_determinant(scenario: Scenario) -> Polynomial:
    (m11, m12), (m21, m22) = _poly_matrix(scenario)
    return m11 * m22 - m12 * m21


def _singular_branch(scenario: Scenario, delta: float, scale: float):
    At, D, xc = scenario.Atilde, scenario.D, scenario.center
    r = scenario.obstacle.radius
    M = At - 2.0 * delta * D
    rhs = -2.0 * delta * D @ xc
    U, s, vt = np.linalg.svd(M)
    if s[0] <= 1e-12 * scale:
        return []
    p0 = vt[0] * (U[:, 0] @ rhs) / s[0]
    if np.linalg.norm(M @ p0 - rhs) > 1e-9 * max(1.0, scale * np.linalg.norm(xc)):
        return []
    nv = vt[-1]
    y = p0 - xc
    bq = float(nv @ y)
    disc = bq * bq - (float(y @ y) - r * r)
    if abs(disc) <= 1e-9 * r * r:
        ts = [-bq]
    elif disc > 0:
        ts = [-bq + math.sqrt(disc), -bq - math.sqrt(disc)]
    else:
        ts = []
    return [(p0 + t * nv, delta) for t in ts]


def general_case(scenario: Scenario) -> EquilibriumAnalysis:
    """All boundary solutions via real roots of the boundary polynomial in delta.

    Works for any constant ``D`` (one or two inputs) and any spectrum; complex
    spectra are flagged as outside the closed-form tables.

    Raises:
        RootFindingFailed: a root could not be refined into a boundary solution.
    """
    if not isinstance(scenario.obstacle, Circle):
        raise WrongActuation("general_case works on circles; reduce the ellipse first")
    At = scenario.Atilde
    xc, r = scenario.center, scenario.obstacle.radius
    scale = spectral_norm(At) + 2.0 * spectral_norm(scenario.D)
    geo = float(np.linalg.norm(xc)) + r
    res_scale = spectral_norm(At) * geo

    Q = boundary_polynomial(scenario)
    detp = resolvent_determinant(scenario)
    cands = []
    for delta in real_roots(Q.coef):
        M = At - 2.0 * delta * scenario.D
        if abs(detp(delta)) <= 1e-9 * (scale * (1.0 + abs(delta))) ** 2:
            continue
        p = xc - np.linalg.solve(M, At @ xc)
        p, d = polish(scenario, p, delta)
        if (abs(scenario.obstacle.h(p)) > BOUNDARY_TOL * max(1.0, geo**2)
                or equilibrium_residual(scenario, p, d) > EQUILIBRIUM_TOL * max(1.0, res_scale)):
            raise RootFindingFailed(f"root delta = {delta!r} did not refine to a boundary solution")
        cands.append((p, d))
    for delta in real_roots(detp.coef):
        for p, d in _singular_branch(scenario, delta, scale):
            cands.append((p, d))
    cands = _dedupe(cands, 1e-9 * geo)
    reports, potential = _split(scenario, cands, GENERAL_DELTA_ROOT)
    complex_spec = bool(np.any(np.abs(scenario.eigvals.imag) > 1e-12 * spectral_norm(At)))
    diag = CaseDiagnosis(
        actuation="Underactuated" if scenario.m == 1 else "FullyActuated",
        xc_eigenvector=False,
        delta_roots=sorted([x.indicator for x in reports] + [q.indicator for q in potential]),
        outside_paper_tables=complex_spec,
        route="general_case",
    )
    if complex_spec:
        diag.notes.append("complex closed-loop spectrum: outside the closed-form tables")
    return EquilibriumAnalysis(reports, diag, potential)


# ---------------------------------------------------------------------------
# sufficient conditions for the non-eigenvector case


@dataclass
class Prop9Report:
    lambda1: float
    lambda2: float
    beta1: float
    beta2: float
    v1v2: float
    cond_saddle: bool  # beta1^2 + beta1 beta2 v1.v2 >= 0
    cond_stable: bool  # beta1 beta2 v1.v2 + beta2^2 >= 0
    F1: list[float]  # ascending coefficients
    dF1: list[float]  # descending a, b, c, d
    discriminant: float
    one_real_root: bool
    claims: dict[str, bool | None] = field(default_factory=dict)
    consistent: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def f1_polynomial(l1, l2, beta1, beta2, c, r) -> Polynomial:
    """The boundary polynomial written in the eigenbasis (real spectrum)."""
    a1 = Polynomial([l1, -2.0])
    a2 = Polynomial([l2, -2.0])
    return (-(a1 * a1) * (a2 * a2) * r * r + (l1 * beta1) ** 2 * a2 * a2
            + (l2 * beta2) ** 2 * a1 * a1 + 2.0 * l1 * beta1 * l2 * beta2 * c * a2 * a1)


def sufficient_conditions(scenario: Scenario, analysis: EquilibriumAnalysis | None = None) -> Prop9Report:
    """Evaluate the sufficient conditions and cross-check them against ``general_case``.

    Raises:
        EigenvectorDegenerate: repeated eigenvalue.
        ComplexSpectrum: non-real eigenvalues.
    """
    if not _fully_actuated_standard(scenario) or not isinstance(scenario.obstacle, Circle):
        raise WrongActuation("needs invertible B, G = B^T B and a circle")
    ev = scenario.eigvals
    At = scenario.Atilde
    if np.any(np.abs(ev.imag) > 1e-12 * spectral_norm(At)):
        raise ComplexSpectrum(f"eigenvalues {ev.tolist()} are not real")
    l1, l2 = sorted(ev.real.tolist())
    if abs(l1 - l2) <= 1e-9 * spectral_norm(At):
        raise EigenvectorDegenerate("lambda1 == lambda2")
    v1 = _null_direction(At - l1 * np.eye(2))
    v2 = _null_direction(At - l2 * np.eye(2))
    if v1 @ v2 < 0:
        v2 = -v2
    c = float(v1 @ v2)
    beta1, beta2 = np.linalg.solve(np.column_stack([v1, v2]), scenario.center)
    r = scenario.obstacle.radius
    F1 = f1_polynomial(l1, l2, beta1, beta2, c, r)
    dF = F1.deriv().coef
    dF = np.pad(dF, (0, 4 - dF.size))
    a, b, cc, d = dF[3], dF[2], dF[1], dF[0]
    disc = cubic_discriminant(a, b, cc, d)
    cond_i = beta1**2 + beta1 * beta2 * c >= 0
    cond_ii = beta1 * beta2 * c + beta2**2 >= 0
    one_root = a != 0 and disc < 0

    if analysis is None:
        analysis = general_case(scenario)
    reps = analysis.reports
    claims: dict[str, bool | None] = {}
    claims["no_indicator_at_half_eigenvalue"] = all(
        min(abs(x.indicator - l1 / 2), abs(x.indicator - l2 / 2)) > 1e-9 * spectral_norm(At)
        for x in reps)
    claims["i_saddle_below_lambda1_half"] = (
        all(x.kind is Kind.SADDLE for x in reps if x.indicator < l1 / 2) if cond_i else None)
    claims["ii_stable_between"] = (
        all(x.kind is Kind.ASYMPTOTICALLY_STABLE for x in reps if l2 / 2 < x.indicator < 0)
        if cond_ii else None)
    claims["iii_single_saddle"] = (
        len(reps) == 1 and reps[0].kind is Kind.SADDLE if (one_root and cond_i) else None)
    consistent = all(v is not False for v in claims.values())
    return Prop9Report(l1, l2, float(beta1), float(beta2), c, bool(cond_i), bool(cond_ii),
                       F1.coef.tolist(), [a, b, cc, d], float(disc), bool(one_root), claims,
                       consistent)


# ---------------------------------------------------------------------------
# dispatcher


def find_equilibria(scenario: Scenario) -> EquilibriumAnalysis:
    """Pick the analytic route for the scenario and return every undesirable equilibrium."""
    if not isinstance(scenario.obstacle, Circle):
        from cbf_lab.reduction import map_back, reduce

        red = reduce(scenario)
        inner = find_equilibria(red.scenario)
        reports = _sort_reports([map_back(x, red.E) for x in inner.reports])
        potential = [PotentialEquilibrium(red.Einv @ q.location, q.indicator) for q in inner.potential]
        inner.diagnosis.notes.append("solved on the reduced circular scenario")
        return EquilibriumAnalysis(reports, inner.diagnosis, potential)

    if scenario.m == 1:
        if check_assumptions(scenario).all_hold:
            report = underactuated_equilibrium(scenario, check=False)
            potential = []
            for p in underactuated_candidates(scenario):
                if np.linalg.norm(p - report.location) > 1e-9:
                    potential.append(PotentialEquilibrium(p, indicator(scenario, p)))
            diag = CaseDiagnosis("Underactuated", False, delta_roots=sorted(
                [report.indicator] + [q.indicator for q in potential]),
                route="underactuated_equilibrium")
            return EquilibriumAnalysis([report], diag, potential)
        out = general_case(scenario)
        out.diagnosis.notes.append("assumptions fail: closed form skipped")
        return out

    if _fully_actuated_standard(scenario) and not np.any(np.abs(scenario.eigvals.imag) > 0):
        es = eigen_structure(scenario)
        if es.sin_angle < EIGENVECTOR_TOL:
            return eigenvector_case(scenario)
        if es.sin_angle < NEAR_EIGENVECTOR_TOL:
            out = general_case(scenario)
            near = eigenvector_case(scenario, angle_tol=NEAR_EIGENVECTOR_TOL)
            agree = len(near.reports) == len(out.reports)
            out.diagnosis.notes.append(
                f"near-eigenvector (sin = {es.sin_angle:.2e}); eigenvector tables "
                f"{'agree' if agree else 'disagree'} on the count")
            return out
    return general_case(scenario)
