"""Randomised consistency suite: analytic results against the brute-force oracle.

Each scenario of a seeded corpus is checked independently (optionally on a
thread pool capped by ``CBF_LAB_THREADS``); results are aggregated in corpus
order so the report does not depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cbf_lab.corpus import corpus
from cbf_lab.equilibria import find_equilibria
from cbf_lab.model import Kind, Scenario
from cbf_lab.oracle import (
    boundary_equilibrium_scan,
    finite_difference_jacobian,
    match_multisets,
    reference_field,
)
from cbf_lab.safety_filter import jacobian_at_boundary, vector_field

ORACLE_TOL = 1e-6
LEFT_EIGVEC_TOL = 1e-8
ALPHA_SHIFT_TOL = 1e-8
FILTER_TOL = 1e-8
SPECTRUM_TOL = 1e-9
FD_STEP = 1e-7
FD_RTOL = 1e-4


def worker_count(default: int | None = None) -> int:
    """Worker cap from ``CBF_LAB_THREADS``, else ``default`` or the CPU count."""
    cap = os.environ.get("CBF_LAB_THREADS")
    n = default or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def second_eigenvalue(J: np.ndarray, alpha0: float) -> float:
    """The eigenvalue of a boundary Jacobian other than ``-alpha0``."""
    w = np.linalg.eigvals(J)
    k = int(np.argmin(np.abs(w + alpha0)))
    return float(w[1 - k].real)


@dataclass
class ScenarioCheck:
    index: int
    m: int
    ellipse: bool
    n_equilibria: int
    kinds: list[str]
    oracle_match: bool
    left_eigvec_residual: float
    alpha_shift: float
    fd_error: float
    spectrum_error: float
    filter_error: float
    count_ok: bool
    count_note: str = ""

    @property
    def passed(self) -> bool:
        return (self.oracle_match and self.count_ok
                and self.left_eigvec_residual <= LEFT_EIGVEC_TOL
                and self.alpha_shift < ALPHA_SHIFT_TOL
                and self.fd_error <= FD_RTOL
                and self.spectrum_error <= SPECTRUM_TOL
                and self.filter_error <= FILTER_TOL)


def filter_error(scenario: Scenario, n_states: int, rng: np.random.Generator) -> float:
    """Worst scaled gap between the closed-form field and the KKT reference."""
    obs = scenario.obstacle
    L = 2.0 * (float(np.linalg.norm(obs.center)) + 2.0)
    X = rng.uniform(-L, L, size=(n_states, 2))
    F = vector_field(scenario, X)
    R = reference_field(scenario, X)
    scale = np.maximum(1.0, np.linalg.norm(R, axis=1))
    ok = np.all(np.isfinite(F), axis=1)
    return float(np.max(np.linalg.norm(F[ok] - R[ok], axis=1) / scale[ok], initial=0.0))


def count_check(scenario: Scenario, analysis) -> tuple[bool, str]:
    """Under-actuated: exactly one saddle. Fully actuated with the center off
    the eigenvectors: one to three equilibria, at least one potential
    equilibrium, and, when ``D = I`` on a circle with a real spectrum, an
    indicator below half the smallest eigenvalue. Eigenvector centers follow
    the closed-form tables instead and are not count-checked here."""
    reports = analysis.reports
    if scenario.m == 1:
        ok = len(reports) == 1 and reports[0].kind is Kind.SADDLE
        return ok, "" if ok else f"{len(reports)} equilibria, kinds {[r.kind.value for r in reports]}"
    if analysis.diagnosis.xc_eigenvector:
        return True, "center on an eigenvector: counts not checked"
    notes = []
    if not 1 <= len(reports) <= 3:
        notes.append(f"{len(reports)} equilibria")
    if len(analysis.potential) < 1:
        notes.append("no potential equilibrium with non-negative indicator")
    ev = scenario.eigvals
    identity_metric = scenario.is_circle and np.allclose(scenario.D, np.eye(2), atol=1e-12)
    if identity_metric and np.all(np.abs(ev.imag) == 0):
        lam1 = float(np.min(ev.real))
        if not any(r.indicator < lam1 / 2 for r in reports):
            notes.append(f"no indicator below {lam1 / 2:.6g}")
    return not notes, "; ".join(notes)


def check_scenario(index: int, scenario: Scenario, n_states: int = 20,
                   seed: int = 0) -> ScenarioCheck:
    analysis = find_equilibria(scenario)
    scan = boundary_equilibrium_scan(scenario)
    oracle_ok = match_multisets(analysis.locations, scan.locations, ORACLE_TOL)

    a0 = scenario.alpha0
    boosted = scenario.with_alpha0(10.0 * a0)
    left = shift = fd = spec = 0.0
    for r in analysis.reports:
        g = scenario.obstacle.grad(r.location)
        left = max(left, float(np.linalg.norm(r.jacobian.T @ g + a0 * g) / np.linalg.norm(g)))
        J10 = jacobian_at_boundary(boosted, r.location)
        shift = max(shift, abs(second_eigenvalue(r.jacobian, a0) - second_eigenvalue(J10, 10 * a0)))
        Jfd = finite_difference_jacobian(scenario, r.location, FD_STEP)
        fd = max(fd, float(np.max(np.abs(Jfd - r.jacobian)) / max(1.0, np.linalg.norm(r.jacobian, 2))))
        direct = np.sort_complex(np.linalg.eigvals(jacobian_at_boundary(scenario, r.location)))
        spec = max(spec, float(np.max(np.abs(direct - np.sort_complex(r.eigenvalues)))))

    rng = np.random.default_rng([seed, index])
    count_ok, note = count_check(scenario, analysis)
    return ScenarioCheck(
        index=index, m=scenario.m, ellipse=not scenario.is_circle,
        n_equilibria=len(analysis.reports), kinds=[r.kind.value for r in analysis.reports],
        oracle_match=oracle_ok, left_eigvec_residual=left, alpha_shift=shift, fd_error=fd,
        spectrum_error=spec, filter_error=filter_error(scenario, n_states, rng),
        count_ok=count_ok, count_note=note,
    )


@dataclass
class SuiteReport:
    seed: int
    checks: list[ScenarioCheck] = field(default_factory=list)

    @property
    def failures(self) -> list[ScenarioCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        def worst(attr):
            return max((getattr(c, attr) for c in self.checks), default=0.0)

        return {
            "seed": self.seed,
            "n_scenarios": len(self.checks),
            "passed": self.passed,
            "oracle_mismatches": sum(not c.oracle_match for c in self.checks),
            "count_violations": sum(not c.count_ok for c in self.checks),
            "max_left_eigvec_residual": worst("left_eigvec_residual"),
            "max_alpha_shift": worst("alpha_shift"),
            "max_fd_error": worst("fd_error"),
            "max_spectrum_error": worst("spectrum_error"),
            "max_filter_error": worst("filter_error"),
            "failures": [
                {"index": c.index, "m": c.m, "ellipse": c.ellipse,
                 "oracle_match": c.oracle_match, "note": c.count_note}
                for c in self.failures
            ],
        }


def run_suite(seed: int, n: int, n_states: int | None = None,
              workers: int | None = None) -> SuiteReport:
    """Check ``n`` scenarios: circles and ellipses, both actuation classes.

    ``n_states`` random states per scenario go through the filter comparison;
    the default spreads at least 10^4 states over the corpus.
    """
    n_circle = n - n // 4
    scenarios = corpus(seed, n_circle) + corpus(seed + 1, n - n_circle, ellipse=True)
    if n_states is None:
        n_states = max(20, math.ceil(10_000 / max(n, 1)))
    workers = worker_count(workers)

    def job(item):
        i, sc = item
        return check_scenario(i, sc, n_states, seed)

    if workers == 1:
        checks = [job(it) for it in enumerate(scenarios)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            checks = list(pool.map(job, enumerate(scenarios)))
    return SuiteReport(seed, checks)
