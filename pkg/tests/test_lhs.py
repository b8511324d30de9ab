import copy
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import nnls

from boundloc import hermlin, lhs, states
from boundloc.hermlin import Operator, Povm


@pytest.fixture(scope="module")
def ghz_run():
    return lhs.construct_lhs(states.ghz())


def random_qubit_state(rng):
    return states.random_density_matrix((2,), rng).data


def test_icosahedron_polytope_shape():
    p = lhs.icosahedron_polytope()
    assert len(p) == 76 and p.n_projective == 72 and p.n_trivial == 4
    assert p.axes.shape == (6, 3)
    # the six axes are the vertex pairs: mutual |cos| = 1/sqrt(5)
    g = np.abs(p.axes @ p.axes.T)
    off = g[~np.eye(6, dtype=bool)]
    np.testing.assert_allclose(off, 1 / math.sqrt(5), atol=1e-12)
    assert p.digest() == lhs.polytope("icosa76").digest()
    with pytest.raises(lhs.LhsError):
        lhs.polytope("dodeca")


def test_strategy_reduction_counts():
    s = lhs.reduce_strategies(lhs.icosahedron_polytope())
    assert len(s) == 64 and s.responses.shape == (64, 76)
    single = lhs.relabelling_polytope([[0, 0, 1]])
    assert len(lhs.reduce_strategies(single)) == 2
    trivial = lhs.MeasurementPolytope((Povm([np.eye(2)]),), np.zeros((0, 3)), 0, 1)
    assert len(lhs.reduce_strategies(trivial)) == 1


def test_strategy_reduction_rejects_general_povms():
    trine = lhs.rank_one_povm([1 / 3] * 3, lhs.c3v_directions(np.array([0, 0, 1.0]), math.pi / 2, 0)[1:])
    p = lhs.MeasurementPolytope((trine,), np.zeros((0, 3)), 0, 0)
    with pytest.raises(lhs.UnsupportedPolytope):
        lhs.reduce_strategies(p)


def test_reduced_strategies_answer_nonzero_elements():
    p = lhs.icosahedron_polytope()
    s = lhs.reduce_strategies(p)
    for lam, x in itertools.product(range(len(s)), range(len(p))):
        e = p.povms[x][s.responses[lam, x]]
        assert np.abs(e).max() > 0.4


def test_noise_model_validation():
    with pytest.raises(lhs.LhsError):
        lhs.NoiseModel(1.5)
    with pytest.raises(lhs.LhsError):
        lhs.NoiseModel(0.5, np.diag([1.2, -0.2]))


def test_noisy_povm_limits():
    m = Povm.projective([0.3, -0.4, 0.5])
    np.testing.assert_allclose(lhs.noisy_povm(m, lhs.NoiseModel(1.0)).elements[0], m.elements[0], atol=1e-15)
    white = lhs.noisy_povm(m, lhs.NoiseModel(0.0))
    for e, orig in zip(white, m):
        np.testing.assert_allclose(e, np.trace(orig).real / 2 * np.eye(2), atol=1e-15)
    up = np.diag([1.0, 0.0])
    biased = lhs.noisy_povm(m, lhs.NoiseModel(0.0, up))
    np.testing.assert_allclose(biased.elements[0], m.elements[0][0, 0] * np.eye(2), atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eta=st.floats(0.05, 1.0))
def test_noisy_measurement_equivalence(seed, eta):
    """Tr_A[(noisy E (x) 1) chi] == Tr_A[(E (x) 1) (eta chi + (1-eta) xi (x) Tr_A chi)]."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    chi = g + g.conj().T  # need not be PSD
    xi = random_qubit_state(rng)
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    e = h @ h.conj().T
    noisy = lhs.noisy_element(e, eta, xi)
    bc = np.einsum("aiaj->ij", chi.reshape(2, 4, 2, 4))
    mixed = eta * chi + (1 - eta) * np.kron(xi, bc)

    def steer(op, m):
        return np.einsum("ab,biaj->ij", op, m.reshape(2, 4, 2, 4))

    np.testing.assert_allclose(steer(noisy, chi), steer(e, mixed), atol=1e-12)


def test_assemblage_matches_oracle_and_is_nonsignalling():
    rng = np.random.default_rng(3)
    rho = states.random_density_matrix((2, 2, 2), rng)
    povms = lhs.icosahedron_polytope().povms[:12] + lhs.icosahedron_polytope().povms[-2:]
    sig = lhs.assemblage(rho, povms, 0)
    marginal = hermlin.partial_trace(rho, [1, 2]).data
    for m, row in zip(povms, sig):
        np.testing.assert_allclose(sum(row), marginal, atol=1e-13)
        for e, s in zip(m, row):
            # oracle: Tr_A[(E (x) 1) rho] via explicit index contraction
            ref = np.einsum("ab,biaj->ij", e, rho.data.reshape(2, 4, 2, 4))
            np.testing.assert_allclose(s, ref, atol=1e-13)
    last = lhs.assemblage(rho, povms[:1], 2)
    np.testing.assert_allclose(sum(last[0]), hermlin.partial_trace(rho, [0, 1]).data, atol=1e-13)
    with pytest.raises(hermlin.IndexOutOfRange):
        lhs.assemblage(rho, povms, 3)


def test_povm_from_directions():
    d = lhs.c3v_directions(np.array([0.0, 0.0, 1.0]), math.radians(110), 0.3)
    alpha, res = lhs.povm_from_directions(d)
    assert res < 1e-12 and np.all(alpha > 0)
    m = lhs.rank_one_povm(alpha, d)
    np.testing.assert_allclose(sum(m.elements), np.eye(2), atol=1e-12)


def test_octahedron_projective_shrinking():
    r = lhs.shrinking_factor(lhs.octahedron_polytope(), resolution=400, kind="projective")
    assert abs(r.eta_grid - 1 / math.sqrt(3)) < 0.01
    assert r.eta_grid >= 1 / math.sqrt(3) - 1e-9  # the diagonal is the hardest direction


def test_same_axis_samples_have_eta_one():
    p = lhs.icosahedron_polytope()
    lp = lhs.ShrinkLp(p)
    for ax in p.axes:
        assert lp.eta(Povm.projective(ax)) == pytest.approx(1.0, abs=1e-9)
        assert lp.eta(Povm.projective(-ax)) == pytest.approx(1.0, abs=1e-9)
    assert lp.eta(Povm([np.eye(2)])) == pytest.approx(1.0, abs=1e-9)


def test_shrinking_factor_decreases_with_more_samples():
    p = lhs.icosahedron_polytope()
    grid = lhs.sample_grid(60)
    small = lhs.shrinking_factor(p, samples=grid[:40], refine=False)
    big = lhs.shrinking_factor(p, samples=grid, refine=False)
    assert big.eta_grid <= small.eta_grid + 1e-12
    assert 0.6 < big.eta_grid <= 1.0
    with pytest.raises(lhs.LhsError):
        pentagon = [[math.cos(2 * math.pi * k / 5), math.sin(2 * math.pi * k / 5), 0] for k in range(5)]
        lhs.ShrinkLp(p).eta(lhs.rank_one_povm([0.2] * 5, pentagon))


def test_shrinking_lp_is_a_valid_decomposition():
    """Recover the mixture weights and rebuild the noisy POVM from polytope elements."""
    p = lhs.icosahedron_polytope()
    lp = lhs.ShrinkLp(p)
    m = lhs.sample_grid(30)[45]
    eta = lp.eta(m)
    noisy = lhs.noisy_povm(m, lhs.NoiseModel(eta))
    target = np.zeros((p.slots, 4))
    target[: len(noisy)] = noisy.bloch()
    _, res = nnls(np.vstack([lp.hull, np.ones(len(p))]), np.r_[target.reshape(-1), 1.0])
    assert res < 1e-7
    assert eta < 1.0
    # a little more visibility must leave the hull
    over = lhs.noisy_povm(m, lhs.NoiseModel(min(1.0, eta + 1e-3)))
    target[: len(over)] = over.bloch()
    _, res_over = nnls(np.vstack([lp.hull, np.ones(len(p))]), np.r_[target.reshape(-1), 1.0])
    assert res_over > 1e-7


def test_lhs_white_noise_target_is_fully_local():
    q, cert = lhs.construct_lhs(np.eye(8) / 8)
    assert q == pytest.approx(1.0, abs=1e-6)
    assert cert.report.passed


def test_lhs_ghz_is_partial(ghz_run):
    q, cert = ghz_run
    assert 0.0 < q < 1.0
    assert cert.report.passed
    assert cert.report.metrics["min_sigma_eigenvalue"] >= -1e-7


def test_certificate_tampering_is_caught(ghz_run):
    _, cert = ghz_run
    bad = copy.copy(cert)
    bad.sigmas = [-s for s in cert.sigmas]
    rep = lhs.verify_certificate(bad)
    assert not rep.passed
    assert any("not PSD" in f for f in rep.findings)
    shifted = copy.copy(cert)
    shifted.q_star = cert.q_star + 0.01
    assert any("mixing" in f for f in lhs.verify_certificate(shifted).findings)


def test_certificate_json_roundtrip(ghz_run):
    _, cert = ghz_run
    text = json.dumps(cert.to_json())
    back = lhs.LhsCertificate.from_json(text)
    assert back.q_star == cert.q_star
    assert lhs.verify_certificate(back).passed
    obj = json.loads(text)
    obj["polytope"]["hash"] = "0" * 16
    with pytest.raises(lhs.LhsError):
        lhs.LhsCertificate.from_json(obj)


def test_stronger_noise_demands_lower_q(ghz_run):
    q_673, _ = ghz_run
    q_50, cert = lhs.construct_lhs(states.ghz(), noise=lhs.NoiseModel(0.5))
    assert cert.report.passed
    assert q_50 <= q_673 + 1e-6


def test_construct_lhs_rejects_bad_input():
    with pytest.raises(lhs.LhsError):
        lhs.construct_lhs(np.eye(4) / 4)
    with pytest.raises(lhs.LhsError):
        lhs.construct_lhs(np.eye(8) / 8, noise=lhs.NoiseModel(0.0))


def test_repair_makes_equalities_exact():
    rng = np.random.default_rng(5)
    p = lhs.icosahedron_polytope()
    s = lhs.reduce_strategies(p)
    chi = np.eye(8) / 8
    sig = [np.eye(4) / 256 + 1e-6 * (lambda g: g + g.conj().T)(rng.normal(size=(4, 4))) for _ in range(len(s))]
    fixed = lhs.repair_hidden_states(sig, chi, s)
    for r in lhs._constraint_residuals(fixed, chi, s):
        assert np.abs(r).max() < 1e-14
    assert max(np.abs(a - b).max() for a, b in zip(fixed, sig)) < 1e-5


def test_certificate_reproduces_assemblages(ghz_run):
    """Polytope assemblages of chi come from the hidden states; noisy ones match the mixed target."""
    _, cert = ghz_run
    rho = Operator(cert.mixed_target(), (2, 2, 2))
    p = cert.polytope
    chi_assem = lhs.assemblage(Operator(cert.chi, (2, 2, 2)), p.povms[:6], 0)
    for x, row in enumerate(chi_assem):
        for a, s in enumerate(row):
            model = sum((sg for sg, r in zip(cert.sigmas, cert.strategies.responses[:, x]) if r == a),
                        np.zeros((4, 4)))
            np.testing.assert_allclose(s, model, atol=1e-7)
    noisy = [lhs.noisy_povm(m, cert.noise) for m in p.povms[:6]]
    real = lhs.assemblage(rho, p.povms[:6], 0)
    via_chi = lhs.assemblage(Operator(cert.chi, (2, 2, 2)), noisy, 0)
    for r1, r2 in zip(real, via_chi):
        for a, b in zip(r1, r2):
            np.testing.assert_allclose(a, b, atol=1e-7)
