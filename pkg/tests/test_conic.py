import copy
import time

import numpy as np
import pytest

from boundloc import conic
from boundloc.conic import Block, Constraint, LmiModel, Model, SdpProblem, Status
from sdp_cases import random_feasible_sdp


def test_two_by_two_lmi():
    # max -x s.t. [[x, 1], [1, x]] >= 0  ->  x = 1
    lm = LmiModel(1)
    lm.add_lmi([[0, 1], [1, 0]], [np.eye(2)])
    p = lm.build([-1.0])
    sol = conic.solve(p)
    assert sol.status is Status.OPTIMAL
    assert abs(sol.y[0] - 1) < 1e-7
    assert conic.verify_solution(p, sol).passed


def test_largest_eigenvalue_oracle():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(5, 5))
    a = g + g.T
    # max -t s.t. t I - A >= 0
    lm = LmiModel(1)
    lm.add_lmi(-a, [np.eye(5)])
    sol = conic.solve(lm.build([-1.0]))
    assert sol.optimal
    assert abs(sol.y[0] - np.linalg.eigvalsh(a)[-1]) < 1e-7


def test_complex_min_eigenvalue_via_model():
    rng = np.random.default_rng(1)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = g + g.conj().T
    m = Model()
    x = m.psd(4)
    m.add_eq([(x, np.eye(4))], 1.0)
    m.minimize([(x, h)])
    sol = conic.solve(m.build())
    assert sol.optimal
    assert abs(sol.primal_objective - np.linalg.eigvalsh(h)[0]) < 1e-7
    xv = m.value(sol, x)
    assert abs(np.trace(xv) - 1) < 1e-8
    assert abs(np.trace(h @ xv).real - np.linalg.eigvalsh(h)[0]) < 1e-7


def test_complex_hermitian_equality():
    rng = np.random.default_rng(2)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    target = g @ g.conj().T + np.eye(3)
    m = Model()
    x = m.psd(3)
    m.add_hermitian_eq([(x, lambda v: v)], target)
    m.minimize([(x, np.eye(3))])
    sol = conic.solve(m.build())
    assert sol.optimal
    np.testing.assert_allclose(m.value(sol, x), target, atol=1e-7)


def test_linear_program_block():
    c = np.array([3.0, -1.0, 2.0])
    m = Model()
    x = m.nonneg(3)
    m.add_eq([(x, np.ones(3))], 1.0)
    m.minimize([(x, c)])
    sol = conic.solve(m.build())
    assert sol.optimal
    assert abs(sol.primal_objective + 1) < 1e-7
    np.testing.assert_allclose(m.value(sol, x), [0, 1, 0], atol=1e-7)


def test_primal_infeasible():
    p = SdpProblem([Block("psd", 3)], [None], [Constraint({0: np.eye(3)}, -1.0)])
    assert conic.solve(p).status is Status.PRIMAL_INFEASIBLE


def test_dual_infeasible():
    # min -x0 s.t. x0 - x1 = 0, x >= 0: unbounded below
    p = SdpProblem([Block("nonneg", 2)], [np.array([-1.0, 0.0])],
                   [Constraint({0: np.array([1.0, -1.0])}, 0.0)])
    sol = conic.solve(p)
    assert sol.status in (Status.DUAL_INFEASIBLE, Status.ITERATION_LIMIT)
    assert not sol.optimal
    with pytest.raises(conic.SolverError):
        sol.raise_for_status()


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem([Block("psd", 2)], [None], [])
    with pytest.raises(ValueError):
        SdpProblem([Block("psd", 2)], [np.array([[0, 1], [0, 0]])], [Constraint({0: np.eye(2)}, 1)])
    with pytest.raises(ValueError):
        SdpProblem([Block("psd", 2)], [None], [Constraint({0: np.eye(3)}, 1)])
    with pytest.raises(ValueError):
        Block("cone", 2)


def test_json_roundtrip_gives_same_solution():
    p = random_feasible_sdp(np.random.default_rng(5))
    q = SdpProblem.from_json(p.to_json())
    a, b = conic.solve(p), conic.solve(q)
    assert a.optimal and b.optimal
    assert a.primal_objective == b.primal_objective


def test_verification_catches_tampering():
    p = random_feasible_sdp(np.random.default_rng(6))
    sol = conic.solve(p)
    assert conic.verify_solution(p, sol).passed
    bad = copy.deepcopy(sol)
    bad.y = bad.y + 1e-3
    rep = conic.verify_solution(p, bad)
    assert not rep.passed and rep.findings


def test_embedding_identity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = g + g.conj().T
        w = rng.normal(size=(6, 6))
        x = w @ w.T
        lhs = np.sum(conic.embed_hermitian(h) / 2 * x)
        assert abs(lhs - np.trace(h @ conic.unembed(x)).real) < 1e-12
        np.testing.assert_allclose(conic.unembed(conic.embed_hermitian(h)), h, atol=1e-14)


def test_random_feasible_kkt():
    """100 random strictly feasible instances: Optimal and KKT verified at 1e-7."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = []
    for trial in range(100):
        p = random_feasible_sdp(rng)
        sol = conic.solve(p)
        rep = conic.verify_solution(p, sol, 1e-7)
        if not (sol.optimal and rep.passed):
            failures.append((trial, sol.status, rep.findings))
    assert not failures
    assert time.perf_counter() - start < 60
