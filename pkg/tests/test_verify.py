import numpy as np
import pytest

from cbf_lab.corpus import corpus
from cbf_lab.equilibria import find_equilibria
from cbf_lab.model import from_closed_loop, Circle
from cbf_lab.verify import check_scenario, count_check, run_suite, second_eigenvalue, worker_count


def test_worker_count_honours_env(monkeypatch):
    monkeypatch.setenv("CBF_LAB_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.setenv("CBF_LAB_THREADS", "junk")
    assert worker_count(3) == 3
    monkeypatch.delenv("CBF_LAB_THREADS")
    assert worker_count(5) == 5


def test_second_eigenvalue():
    J = np.diag([-10.0, 2.0])
    assert second_eigenvalue(J, 10.0) == 2.0
    assert second_eigenvalue(np.diag([3.0, -10.0]), 10.0) == 3.0


def test_check_scenario_on_figure(fig1d):
    chk = check_scenario(0, fig1d)
    assert chk.passed and chk.n_equilibria == 3


def test_count_check_flags_wrong_single_input_count(fig1a):
    analysis = find_equilibria(fig1a)
    analysis.reports.append(analysis.reports[0])
    ok, note = count_check(fig1a, analysis)
    assert not ok and "2 equilibria" in note


def test_suite_independent_of_workers():
    a = run_suite(5, 24, n_states=10, workers=1).summary()
    b = run_suite(5, 24, n_states=10, workers=4).summary()
    assert a == b and a["passed"]


@pytest.mark.slow
def test_thousand_scenario_suite():
    report = run_suite(7, 1000)
    assert report.passed, report.summary()["failures"][:5]
    assert len(report.checks) == 1000
