import numpy as np
import pytest

from boundloc import hermlin, states
from boundloc.hermlin import HermitianOperator, Operator


@pytest.fixture(scope="module")
def sigma_verdict():
    return states.certify_entanglement_dps(states.sigma_fnf(), (0,), level=3)


def test_rho_nl_entries_and_symmetries():
    rho = states.rho_nl()
    r = rho.data.real
    assert r[0, 0] == 0.0290 and r[7, 7] == 0.4418 and r[0, 7] == 0.0646
    assert abs(np.trace(r) - (0.0290 + 3 * 0.0412 + 3 * 0.1352 + 0.4418)) < 1e-12
    assert abs(np.trace(r) - 1) < 1e-12
    for k in range(3):
        assert states.check_pt_invariance(rho, k, 1e-12)
    assert states.check_permutation_invariance(rho, 1e-9)
    assert hermlin.min_eigenvalue(rho) >= -1e-3


def test_density_matrix_validation():
    with pytest.raises(states.StateError):
        states.DensityMatrix(np.eye(2))
    with pytest.raises(states.StateError):
        states.DensityMatrix(np.diag([1.5, -0.5]))
    states.DensityMatrix(np.diag([1.0005, -0.0005]))  # within the zoo tolerance


def test_filters_are_adjugates():
    for f, g in zip(states.filters_f(), states.filters_g()):
        prod = f @ g
        assert max(abs(prod[0, 1]), abs(prod[1, 0])) <= 5e-4
        assert abs(prod[0, 0] - prod[1, 1]) <= 5e-4
        assert abs(prod[0, 0] - np.linalg.det(f)) < 1e-15 and abs(prod[0, 0]) > 0


def test_filter_set_contents_and_canonical_form():
    f = states.filters_f()
    assert f.A[0, 0] == 0.4310 and f.C[1, 1] == 0.6440
    for c in f.canonical():
        assert np.linalg.eigvalsh(c.conj().T @ c)[-1] <= 1 + 1e-9
    with pytest.raises(states.StateError):
        states.FilterSet((np.zeros((2, 2)),))


def test_filter_roundtrip():
    out, p = states.apply_filters(states.rho_l(), states.filters_f())
    assert 0 < p <= 1
    assert np.linalg.norm(out.data - states.rho_nl().data) <= 1e-9


def test_filter_inverse_roundtrip_random():
    rng = np.random.default_rng(3)
    rho = states.random_density_matrix((2, 2), rng)
    f = states.FilterSet(tuple(rng.normal(size=(2, 2)) for _ in range(2)))
    mid, _ = states.apply_filters(rho, f, psd_tol=1e-9)
    back, _ = states.apply_filters(mid, f.inverse(), psd_tol=1e-9)
    np.testing.assert_allclose(back.data, rho.data, atol=1e-10)


def test_zero_probability_and_dimension_errors():
    rho = states.pure([1, 0, 0, 0], (2, 2))
    proj = np.diag([0.0, 1.0])
    with pytest.raises(states.StateError):
        states.FilterSet((proj, np.eye(2)))  # singular filters are rejected outright
    with pytest.raises(states.StateError):
        states.apply_filters(rho, states.identity_filters(3))
    near = states.FilterSet((np.diag([1e-9, 1.0]), np.diag([1e-9, 1.0])))
    with pytest.raises(states.ZeroProbability):
        states.apply_filters(rho, near)


def test_rho_l_is_a_state():
    rho = states.rho_l()
    assert abs(rho.trace() - 1) < 1e-12
    assert hermlin.min_eigenvalue(rho) >= -1e-3


def test_sigma_filter_normal_form_and_ppt():
    s = states.sigma_fnf()
    np.testing.assert_allclose(hermlin.partial_trace(s, [0]).data, np.eye(2) / 2, atol=1e-12)
    np.testing.assert_allclose(hermlin.partial_trace(s, [1]).data, np.eye(4) / 4, atol=1e-12)
    assert states.check_ppt(s, 0, 1e-3)
    assert states.check_ppt(s, 1, 1e-3)
    assert hermlin.min_eigenvalue(s) > 0


def test_check_ppt_examples():
    assert not states.check_ppt(states.singlet(), 1)
    assert states.check_ppt(states.maximally_mixed((2, 2)), 0)
    assert not states.check_ppt(states.ghz(), [0])


def test_zoo_lookup():
    assert set(states.ZOO) == {"rho_nl", "rho_l", "sigma_fnf"}
    with pytest.raises(states.StateError):
        states.zoo_state("nope")


def test_symmetric_isometry():
    v = states.symmetric_isometry(3, 2)
    assert v.shape == (9, 6)
    np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-14)
    swap = np.eye(9)[[3 * (i % 3) + i // 3 for i in range(9)]]
    np.testing.assert_allclose(swap @ v, v, atol=1e-14)


def test_dps_singlet_entangled_at_level_one():
    v = states.certify_entanglement_dps(states.singlet(), (0,), level=2)
    assert v.entangled and v.level == 1
    assert v.witness_value < -0.4


def test_dps_separable_state_not_entangled():
    rng = np.random.default_rng(8)
    mix = np.zeros((4, 4), dtype=complex)
    for w in rng.dirichlet(np.ones(4)):
        a = states.random_density_matrix((2,), rng, rank=1).data
        b = states.random_density_matrix((2,), rng, rank=1).data
        mix += w * np.kron(a, b)
    v = states.certify_entanglement_dps(states.DensityMatrix(mix, (2, 2), psd_tol=1e-9), (0,), level=2)
    assert not v.entangled


def test_dps_max_side_guard():
    v = states.certify_entanglement_dps(states.sigma_fnf(), (0,), level=3, max_side=16)
    assert v.status is states.Verdict.INCONCLUSIVE


def test_sigma_entangled_with_valid_witness(sigma_verdict):
    v = sigma_verdict
    assert v.entangled and v.level <= 3
    assert v.witness_value < -v.slack_bound
    # oracle: the witness is nonnegative (up to its slack) on random product states
    rng = np.random.default_rng(11)
    K = v.witness.data
    for _ in range(500):
        a = states.random_density_matrix((2,), rng, rank=1).data
        b = states.random_density_matrix((4,), rng, rank=1).data
        assert np.trace(K @ np.kron(a, b)).real >= -v.slack_bound - 1e-12
    assert abs(np.trace(K @ states.sigma_fnf().data).real - v.witness_value) < 1e-12


def test_as_bipartite_regroups():
    rho = states.ghz()
    bip, da, db = states.as_bipartite(rho, (2,))
    assert (da, db) == (2, 4)
    assert bip.dims == (2, 4)
    with pytest.raises(states.StateError):
        states.as_bipartite(rho, (0, 1, 2))


def test_permutation_invariance_rejects_asymmetric():
    rho = Operator(np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2), (2, 2))
    assert not states.check_permutation_invariance(rho)
    assert states.check_permutation_invariance(HermitianOperator(np.eye(4) / 4, (2, 2)))
