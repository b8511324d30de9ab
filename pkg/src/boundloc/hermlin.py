"""Complex linear algebra on multipartite operators.

Operators carry their tensor factorisation (``dims``) alongside a dense
complex matrix in the computational product basis |i1 i2 ... in>, first
subsystem most significant.  For three qubits the row order is therefore
|000>, |001>, |010>, ..., |111>.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class HermlinError(ValueError):
    pass


class IndexOutOfRange(HermlinError, IndexError):
    pass


class NotHermitian(HermlinError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix with a declared subsystem factorisation."""

    data: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, data, dims: Sequence[int] | None = None):
        mat = np.array(data, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise HermlinError(f"operator must be a square matrix, got shape {mat.shape}")
        if dims is None:
            dims = (mat.shape[0],)
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise HermlinError(f"subsystem dimensions must be positive, got {dims}")
        if math.prod(dims) != mat.shape[0]:
            raise HermlinError(f"dims {dims} do not multiply to matrix side {mat.shape[0]}")
        mat.setflags(write=False)
        object.__setattr__(self, "data", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def nsys(self) -> int:
        return len(self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.dims)

    def with_data(self, data) -> "Operator":
        """Same factorisation and subtype, new entries."""
        return type(self)(data, self.dims)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dims={self.dims})\n{self.data!r}"


class HermitianOperator(Operator):
    """Operator whose matrix equals its conjugate transpose.

    Asymmetry up to ``HERMITIAN_TOL`` (relative to the largest entry) is
    removed by symmetrising; anything larger is rejected.
    """

    def __init__(self, data, dims: Sequence[int] | None = None):
        mat = np.array(data, dtype=complex)
        if mat.ndim == 2 and mat.shape[0] == mat.shape[1]:
            scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
            asym = float(np.abs(mat - mat.conj().T).max(initial=0.0))
            if asym > HERMITIAN_TOL * scale:
                raise NotHermitian(f"matrix is not Hermitian (max asymmetry {asym:.3e})")
            mat = (mat + mat.conj().T) / 2
        super().__init__(mat, dims)

    def dag(self) -> "HermitianOperator":
        return self


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order with eigenvectors as matrix columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _as_matrix(op) -> np.ndarray:
    return op.data if isinstance(op, Operator) else np.asarray(op)


def _check_index(op: Operator, idx: int) -> int:
    if not 0 <= idx < op.nsys:
        raise IndexOutOfRange(f"subsystem {idx} out of range for dims {op.dims}")
    return idx


def kron(*ops: Operator) -> Operator:
    """Tensor product; dims of the result are the concatenated dims."""
    if not ops:
        raise HermlinError("kron needs at least one operator")
    ops = [o if isinstance(o, Operator) else Operator(o) for o in ops]
    data = reduce(np.kron, (o.data for o in ops))
    dims = sum((o.dims for o in ops), ())
    if all(isinstance(o, HermitianOperator) for o in ops):
        return HermitianOperator(data, dims)
    return Operator(data, dims)


def partial_trace(op: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every subsystem not listed in ``keep`` (order of ``keep`` is ignored)."""
    keep = sorted(set(keep))
    if not keep:
        raise HermlinError("keep must be a nonempty set of subsystems")
    for k in keep:
        _check_index(op, k)
    n = op.nsys
    dims = op.dims
    tensor = op.data.reshape(dims + dims)
    # trace out from the highest index down so axis numbers stay valid
    cur = n
    for sys in reversed(range(n)):
        if sys in keep:
            continue
        tensor = np.trace(tensor, axis1=sys, axis2=sys + cur)
        cur -= 1
    side = math.prod(dims[k] for k in keep)
    out = tensor.reshape(side, side)
    new_dims = tuple(dims[k] for k in keep)
    return type(op)(out, new_dims) if isinstance(op, HermitianOperator) else Operator(out, new_dims)


def partial_transpose(op: Operator, party: int | Iterable[int]) -> Operator:
    """Transpose the indices of the given subsystem(s) only."""
    parties = [party] if isinstance(party, (int, np.integer)) else list(party)
    for p in parties:
        _check_index(op, int(p))
    n = op.nsys
    axes = list(range(2 * n))
    for p in parties:
        axes[p], axes[p + n] = axes[p + n], axes[p]
    out = op.data.reshape(op.dims + op.dims).transpose(axes).reshape(op.shape)
    return type(op)(out, op.dims) if isinstance(op, HermitianOperator) else Operator(out, op.dims)


def permute_subsystems(op: Operator, perm: Sequence[int]) -> Operator:
    """Reorder tensor factors: new subsystem i is old subsystem ``perm[i]``."""
    perm = list(perm)
    if sorted(perm) != list(range(op.nsys)):
        raise HermlinError(f"{perm} is not a permutation of {op.nsys} subsystems")
    n = op.nsys
    axes = perm + [p + n for p in perm]
    new_dims = tuple(op.dims[p] for p in perm)
    out = op.data.reshape(op.dims + op.dims).transpose(axes).reshape(op.shape)
    return type(op)(out, new_dims) if isinstance(op, HermitianOperator) else Operator(out, new_dims)


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Cyclic Jacobi for a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot, then applies the
    classical real rotation, so real symmetric input stays real.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return a.diagonal().real.copy(), v, 0
    threshold = tol * scale
    for sweep in range(1, max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= threshold:
            return a.diagonal().real.copy(), v, sweep - 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # U acts on columns (p, q): D = diag(1, conj(phase)) then real rotation
                u = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = a[:, [p, q]] @ u
                a[:, [p, q]] = cols
                a[[p, q], :] = u.conj().T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, [p, q]] = v[:, [p, q]] @ u
    raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")


def eig_hermitian(op, tol: float = 1e-14, max_sweeps: int = 60) -> Spectrum:
    """Eigendecomposition of a Hermitian operator by cyclic Jacobi rotations.

    Returns eigenvalues sorted in descending order; columns of
    ``eigenvectors`` are the matching orthonormal eigenvectors.
    """
    mat = _as_matrix(op)
    if not isinstance(op, HermitianOperator):
        mat = HermitianOperator(mat).data
    w, v, sweeps = _jacobi(mat, tol, max_sweeps)
    order = np.argsort(-w, kind="stable")
    return Spectrum(w[order], v[:, order], sweeps)


def eigvalsh(op) -> np.ndarray:
    return eig_hermitian(op).eigenvalues


def min_eigenvalue(op) -> float:
    return float(eig_hermitian(op).eigenvalues[-1])


def is_psd(op, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol``."""
    return min_eigenvalue(op) >= -tol


def identity(dims: Sequence[int] | int) -> HermitianOperator:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return HermitianOperator(np.eye(math.prod(dims)), dims)


PAULI_X = HermitianOperator([[0, 1], [1, 0]])
PAULI_Y = HermitianOperator([[0, -1j], [1j, 0]])
PAULI_Z = HermitianOperator([[1, 0], [0, -1]])


def bloch_operator(vec: Sequence[float]) -> np.ndarray:
    """n . sigma for a 3-vector n."""
    x, y, z = vec
    return x * PAULI_X.data + y * PAULI_Y.data + z * PAULI_Z.data


class Povm:
    """Finite list of PSD operators summing to the identity."""

    def __init__(self, elements, tol: float = 1e-9):
        mats = [np.array(_as_matrix(e), dtype=complex) for e in elements]
        if not mats:
            raise HermlinError("a POVM needs at least one element")
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise HermlinError("POVM elements must share one square shape")
        for a, m in enumerate(mats):
            if float(np.abs(m - m.conj().T).max()) > tol:
                raise NotHermitian(f"POVM element {a} is not Hermitian")
            lam = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
            if lam < -tol:
                raise HermlinError(f"POVM element {a} has eigenvalue {lam:.3e}")
        dev = float(np.abs(sum(mats) - np.eye(d)).max())
        if dev > tol:
            raise HermlinError(f"POVM elements sum to identity only within {dev:.3e}")
        self.elements = tuple((m + m.conj().T) / 2 for m in mats)
        for m in self.elements:
            m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, a: int) -> np.ndarray:
        return self.elements[a]

    def __iter__(self):
        return iter(self.elements)

    def observable(self) -> np.ndarray:
        """M_1 - M_2 for a two-outcome POVM."""
        if len(self) != 2:
            raise HermlinError("observable needs exactly two outcomes")
        return self.elements[0] - self.elements[1]

    @classmethod
    def from_observable(cls, obs, tol: float = 1e-9) -> "Povm":
        """Two-outcome POVM {(1 + A)/2, (1 - A)/2} of a ±1-bounded observable A."""
        a = np.asarray(_as_matrix(obs), dtype=complex)
        eye = np.eye(a.shape[0])
        return cls([(eye + a) / 2, (eye - a) / 2], tol=tol)

    @classmethod
    def projective(cls, vec, tol: float = 1e-9) -> "Povm":
        """Qubit measurement along a Bloch direction (normalised here)."""
        v = np.asarray(vec, dtype=float)
        return cls.from_observable(bloch_operator(v / np.linalg.norm(v)), tol=tol)

    def bloch(self) -> np.ndarray:
        """Qubit elements as rows (w, x, y, z) with M = w 1 + (x, y, z) . sigma."""
        if self.dim != 2:
            raise HermlinError("Bloch coordinates need a qubit POVM")
        return np.array([bloch_coordinates(m) for m in self.elements])

    def to_json(self) -> dict:
        return {"elements": [to_json(Operator(m)) for m in self.elements]}

    @classmethod
    def from_json(cls, obj) -> "Povm":
        return cls([from_json(e).data for e in obj["elements"]])


def bloch_coordinates(m) -> np.ndarray:
    """(w, x, y, z) with m = w 1 + x X + y Y + z Z, for a Hermitian 2x2 m."""
    m = np.asarray(_as_matrix(m))
    return np.array([np.trace(p @ m).real / 2 for p in
                     (np.eye(2), PAULI_X.data, PAULI_Y.data, PAULI_Z.data)])


def from_bloch(row) -> np.ndarray:
    w, x, y, z = row
    return w * np.eye(2) + bloch_operator((x, y, z))


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices (Hilbert-Schmidt), shape (n*n, n, n)."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        out.append(e)
    r = 1.0 / math.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = r
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = -1j * r
            e[j, i] = 1j * r
            out.append(e)
    return np.array(out)


def to_json(op: Operator) -> dict:
    return {
        "dims": list(op.dims),
        "re": op.data.real.tolist(),
        "im": op.data.imag.tolist(),
    }


def from_json(obj: dict | str, hermitian: bool = False) -> Operator:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        dims = [int(d) for d in obj["dims"]]
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise HermlinError(f"malformed operator JSON: {exc}") from exc
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise HermlinError("operator JSON: re/im must be equal-shape square matrices")
    cls = HermitianOperator if hermitian else Operator
    return cls(re + 1j * im, dims)
