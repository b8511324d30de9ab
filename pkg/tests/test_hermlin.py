import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundloc import hermlin
from boundloc.hermlin import HermitianOperator, Operator, Povm


def rand_op(rng, dims, herm=True):
    n = int(np.prod(dims))
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return HermitianOperator(g + g.conj().T, dims) if herm else Operator(g, dims)


def naive_partial_trace(m, dims, keep):
    """Oracle: explicit index loops."""
    n = len(dims)
    keep = sorted(keep)
    kd = [dims[k] for k in keep]
    out = np.zeros((int(np.prod(kd)),) * 2, dtype=complex)
    for i in itertools.product(*[range(d) for d in dims]):
        for j in itertools.product(*[range(d) for d in dims]):
            if any(i[k] != j[k] for k in range(n) if k not in keep):
                continue
            r = np.ravel_multi_index([i[k] for k in keep], kd)
            c = np.ravel_multi_index([j[k] for k in keep], kd)
            out[r, c] += m[np.ravel_multi_index(i, dims), np.ravel_multi_index(j, dims)]
    return out


def test_basis_ordering_first_subsystem_most_significant():
    ket = np.zeros(8)
    ket[0b011] = 1
    rho = HermitianOperator(np.outer(ket, ket), (2, 2, 2))
    assert np.isclose(hermlin.partial_trace(rho, [0]).data[0, 0], 1)
    assert np.isclose(hermlin.partial_trace(rho, [2]).data[1, 1], 1)


def test_operator_validation():
    with pytest.raises(hermlin.HermlinError):
        Operator(np.eye(4), (2, 3))
    with pytest.raises(hermlin.HermlinError):
        Operator(np.ones((2, 3)))
    with pytest.raises(hermlin.NotHermitian):
        HermitianOperator([[0, 1], [0, 0]])
    op = Operator(np.eye(2))
    with pytest.raises(ValueError):
        op.data[0, 0] = 5


def test_tiny_asymmetry_is_symmetrised():
    m = np.array([[1.0, 0.5 + 1e-14], [0.5, 2.0]])
    h = HermitianOperator(m)
    assert np.allclose(h.data, h.data.conj().T, atol=0)


def test_partial_trace_matches_loop_oracle():
    rng = np.random.default_rng(1)
    dims = (2, 3, 2)
    op = rand_op(rng, dims)
    for keep in ([0], [1], [2], [0, 2], [1, 2]):
        got = hermlin.partial_trace(op, keep).data
        np.testing.assert_allclose(got, naive_partial_trace(op.data, dims, keep), atol=1e-12)


def test_partial_trace_product_state():
    a, b = np.diag([0.3, 0.7]), np.diag([0.1, 0.2, 0.7])
    op = hermlin.kron(HermitianOperator(a), HermitianOperator(b))
    np.testing.assert_allclose(hermlin.partial_trace(op, [0]).data, a, atol=1e-15)
    np.testing.assert_allclose(hermlin.partial_trace(op, [1]).data, b, atol=1e-15)


def test_index_errors():
    op = hermlin.identity((2, 2))
    with pytest.raises(hermlin.IndexOutOfRange):
        hermlin.partial_trace(op, [2])
    with pytest.raises(hermlin.IndexOutOfRange):
        hermlin.partial_transpose(op, 5)


def test_partial_transpose_singlet_spectrum():
    v = np.array([0, 1, -1, 0]) / np.sqrt(2)
    rho = HermitianOperator(np.outer(v, v), (2, 2))
    w = hermlin.eigvalsh(hermlin.partial_transpose(rho, 1))
    np.testing.assert_allclose(sorted(w), [-0.5, 0.5, 0.5, 0.5], atol=1e-13)


def test_partial_transpose_all_parties_is_transpose():
    rng = np.random.default_rng(2)
    op = rand_op(rng, (2, 3))
    np.testing.assert_allclose(hermlin.partial_transpose(op, [0, 1]).data, op.data.T, atol=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), party=st.integers(0, 2))
def test_partial_transpose_involution(seed, party):
    rng = np.random.default_rng(seed)
    op = rand_op(rng, (2, 2, 3), herm=False)
    twice = hermlin.partial_transpose(hermlin.partial_transpose(op, party), party)
    np.testing.assert_array_equal(twice.data, op.data)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_permute_subsystems_moves_kron_factors(seed):
    rng = np.random.default_rng(seed)
    ops = [rand_op(rng, (d,)) for d in (2, 3, 2)]
    full = hermlin.kron(*ops)
    for perm in itertools.permutations(range(3)):
        moved = hermlin.permute_subsystems(full, perm)
        expect = hermlin.kron(*[ops[p] for p in perm])
        assert moved.dims == expect.dims
        np.testing.assert_allclose(moved.data, expect.data, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_jacobi_against_lapack(n, seed):
    rng = np.random.default_rng(seed)
    op = rand_op(rng, (n,))
    spec = hermlin.eig_hermitian(op)
    ref = np.sort(np.linalg.eigvalsh(op.data))[::-1]
    scale = max(1.0, np.abs(ref).max())
    np.testing.assert_allclose(spec.eigenvalues, ref, atol=1e-11 * scale)
    np.testing.assert_allclose(spec.reconstruct(), op.data, atol=1e-11 * scale)
    u = spec.eigenvectors
    np.testing.assert_allclose(u.conj().T @ u, np.eye(n), atol=1e-12)
    assert np.all(np.diff(spec.eigenvalues) <= 0)


def test_jacobi_real_symmetric_stays_real_and_handles_degeneracy():
    m = np.diag([1.0, 1.0, 2.0, 2.0])
    spec = hermlin.eig_hermitian(m)
    np.testing.assert_allclose(spec.eigenvalues, [2, 2, 1, 1])
    assert spec.sweeps == 0


def test_jacobi_larger_matrix():
    rng = np.random.default_rng(3)
    op = rand_op(rng, (40,))
    spec = hermlin.eig_hermitian(op)
    assert np.abs(spec.reconstruct() - op.data).max() < 1e-10


def test_is_psd():
    assert hermlin.is_psd(np.eye(3))
    assert not hermlin.is_psd(np.diag([1.0, -1e-6]))
    assert hermlin.is_psd(np.diag([1.0, -1e-6]), tol=1e-5)


def test_hermitian_basis_orthonormal():
    for n in (1, 2, 3, 4):
        b = hermlin.hermitian_basis(n)
        gram = np.einsum("aij,bji->ab", b, b).real
        np.testing.assert_allclose(gram, np.eye(n * n), atol=1e-15)
        assert all(np.allclose(x, x.conj().T) for x in b)


def test_json_roundtrip():
    rng = np.random.default_rng(4)
    op = rand_op(rng, (2, 3))
    back = hermlin.from_json(hermlin.to_json(op), hermitian=True)
    assert back.dims == (2, 3)
    np.testing.assert_array_equal(back.data, op.data)
    with pytest.raises(hermlin.HermlinError):
        hermlin.from_json({"dims": [2], "re": [[1, 0]], "im": [[0, 0]]})
    with pytest.raises(hermlin.HermlinError):
        hermlin.from_json({"dims": [2]})


def test_povm_validation_and_observable():
    m = Povm.projective([0, 0, 2])
    np.testing.assert_allclose(m.observable(), hermlin.PAULI_Z.data)
    with pytest.raises(hermlin.HermlinError):
        Povm([np.eye(2), np.eye(2)])
    with pytest.raises(hermlin.HermlinError):
        Povm([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])])
    np.testing.assert_allclose(m.bloch(), [[0.5, 0, 0, 0.5], [0.5, 0, 0, -0.5]], atol=1e-15)


def test_bloch_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        row = rng.normal(size=4)
        np.testing.assert_allclose(hermlin.bloch_coordinates(hermlin.from_bloch(row)), row, atol=1e-14)
