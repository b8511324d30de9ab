"""State zoo, local filtering and PPT / entanglement checks."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import conic, hermlin
from .hermlin import HermitianOperator, Operator

ZOO_PSD_TOL = 1e-3
TRACE_TOL = 1e-9


class StateError(ValueError):
    pass


class ZeroProbability(StateError):
    pass


class DensityMatrix(HermitianOperator):
    """Unit-trace Hermitian operator whose spectrum is nonnegative up to ``psd_tol``.

    The default tolerance accommodates states typed in with four decimals.
    """

    def __init__(self, data, dims: Sequence[int] | None = None, psd_tol: float = ZOO_PSD_TOL):
        super().__init__(data, dims)
        tr = np.trace(self.data)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"trace {tr.real:.12f} differs from 1")
        lam = float(np.linalg.eigvalsh(self.data)[0])
        if lam < -psd_tol:
            raise StateError(f"minimum eigenvalue {lam:.3e} below -{psd_tol:g}")


def normalized(op, dims=None, psd_tol: float = ZOO_PSD_TOL) -> DensityMatrix:
    mat = op.data if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    dims = dims if dims is not None else (op.dims if isinstance(op, Operator) else None)
    return DensityMatrix(mat / np.trace(mat), dims, psd_tol=psd_tol)


# -- zoo --------------------------------------------------------------------

# Distinct entries r_ij (1-based, upper triangle) of the nonlocal three-qubit state.
_RHO_NL_ENTRIES = {
    0.0290: [(1, 1)],
    -0.0098: [(1, 2), (1, 3), (1, 5)],
    -0.0083: [(1, 4), (1, 6), (1, 7), (2, 3), (2, 5), (3, 5)],
    0.0646: [(1, 8), (2, 7), (3, 6), (4, 5)],
    0.0412: [(2, 2), (3, 3), (5, 5)],
    -0.0335: [(2, 4), (2, 6), (3, 4), (3, 7), (5, 6), (5, 7)],
    -0.0598: [(2, 8), (3, 8), (4, 6), (4, 7), (5, 8), (6, 7)],
    0.1352: [(4, 4), (6, 6), (7, 7)],
    0.0102: [(4, 8), (6, 8), (7, 8)],
    0.4418: [(8, 8)],
}

_F = (
    [[0.4310, -0.2971], [-0.2488, 0.7291]],
    [[0.0342, -0.0808], [-0.3664, 0.8688]],
    [[0.3268, -0.1873], [-0.1773, 0.6440]],
)
_G = (
    [[0.7291, 0.2971], [0.2488, 0.4310]],
    [[0.8688, 0.0808], [0.3664, 0.0342]],
    [[0.6440, 0.1873], [0.1773, 0.3268]],
)

SIGMA_XI = (1.3219, 1.3219, 1.1348)


def rho_nl_matrix() -> np.ndarray:
    r = np.zeros((8, 8))
    for value, positions in _RHO_NL_ENTRIES.items():
        for i, j in positions:
            r[i - 1, j - 1] = r[j - 1, i - 1] = value
    return r


def rho_nl() -> DensityMatrix:
    """Three-qubit PPT state violating Sliwa's inequality #5."""
    return DensityMatrix(rho_nl_matrix(), (2, 2, 2))


@dataclass(frozen=True)
class FilterSet:
    """One local Kraus operator per party, stored as given (not rescaled)."""

    filters: tuple[np.ndarray, ...]

    def __post_init__(self):
        fs = tuple(np.array(f, dtype=complex) for f in self.filters)
        for k, f in enumerate(fs):
            if f.ndim != 2 or f.shape[0] != f.shape[1]:
                raise StateError(f"filter {k} is not square")
            if abs(np.linalg.det(f)) <= 1e-12:
                raise StateError(f"filter {k} is not invertible")
        object.__setattr__(self, "filters", fs)

    def __len__(self):
        return len(self.filters)

    def __getitem__(self, k):
        return self.filters[k]

    @property
    def A(self):
        return self.filters[0]

    @property
    def B(self):
        return self.filters[1]

    @property
    def C(self):
        return self.filters[2]

    def canonical(self) -> "FilterSet":
        """Each filter divided by its largest singular value, so F^dag F <= 1."""
        return FilterSet(tuple(f / np.linalg.norm(f, 2) for f in self.filters))

    def inverse(self) -> "FilterSet":
        return FilterSet(tuple(np.linalg.inv(f) for f in self.filters))

    def total(self) -> np.ndarray:
        out = np.eye(1)
        for f in self.filters:
            out = np.kron(out, f)
        return out


def filters_f() -> FilterSet:
    return FilterSet(tuple(np.array(f) for f in _F))


def filters_g() -> FilterSet:
    return FilterSet(tuple(np.array(g) for g in _G))


def identity_filters(n: int = 3, d: int = 2) -> FilterSet:
    return FilterSet(tuple(np.eye(d) for _ in range(n)))


def apply_filters(rho: Operator, f: FilterSet, psd_tol: float = ZOO_PSD_TOL):
    """Filter every party locally; returns the renormalised state and the success probability.

    Filters are rescaled to their canonical form first, which changes the
    success probability but not the output state.
    """
    if len(f) != rho.nsys or any(fk.shape[0] != d for fk, d in zip(f.filters, rho.dims)):
        raise StateError(f"filter set does not match subsystem dims {rho.dims}")
    F = f.canonical().total()
    out = F @ rho.data @ F.conj().T
    # Hermitian in exact arithmetic; at small success probability the
    # renormalisation magnifies rounding asymmetry past the Hermitian check
    out = (out + out.conj().T) / 2
    p = float(np.trace(out).real)
    if p <= 1e-14:
        raise ZeroProbability(f"filtering succeeds with probability {p:.3e}")
    return DensityMatrix(out / p, rho.dims, psd_tol=psd_tol), p


def rho_l() -> DensityMatrix:
    """The local state: the G-filtered nonlocal state."""
    return apply_filters(rho_nl(), filters_g())[0]


def _sigma_fnf_terms():
    h_a = [
        np.array([[0, 0], [1, 0]], dtype=float),
        np.array([[0, -1], [0, 0]], dtype=float),
        np.diag([1, -1]) / math.sqrt(2),
    ]
    h1 = np.zeros((4, 4))
    h1[0, 3], h1[1, 0], h1[2, 1], h1[3, 2] = -0.0983, -0.6393, -0.4158, -0.6393
    h2 = np.zeros((4, 4))
    h2[0, 1], h2[1, 2], h2[2, 3], h2[3, 0] = 0.6393, 0.4158, 0.6393, 0.0983
    h3 = np.diag([-0.4859, -0.5137, 0.5137, 0.4859])
    return h_a, [h1, h2, h3]


def sigma_fnf() -> DensityMatrix:
    """Qubit-ququart PPT entangled state in filter normal form.

    sigma = (1 + sum_k xi_k H_k^A (x) H_k^B) / (d_A d_B)
    """
    h_a, h_b = _sigma_fnf_terms()
    corr = sum(xi * np.kron(a, b) for xi, a, b in zip(SIGMA_XI, h_a, h_b))
    return DensityMatrix((np.eye(8) + corr) / 8, (2, 4))


ZOO = {"rho_nl": rho_nl, "rho_l": rho_l, "sigma_fnf": sigma_fnf}


def zoo_state(name: str) -> DensityMatrix:
    try:
        return ZOO[name]()
    except KeyError:
        raise StateError(f"unknown state {name!r}; choose from {sorted(ZOO)}") from None


# -- simple states used throughout tests and examples ----------------------


def pure(vec, dims) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()), dims, psd_tol=1e-9)


def maximally_mixed(dims) -> DensityMatrix:
    n = math.prod(dims)
    return DensityMatrix(np.eye(n) / n, dims, psd_tol=0)


def singlet() -> DensityMatrix:
    return pure([0, 1, -1, 0], (2, 2))


def ghz(n: int = 3) -> DensityMatrix:
    v = np.zeros(2**n)
    v[0] = v[-1] = 1
    return pure(v, (2,) * n)


def random_density_matrix(dims, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    n = math.prod(dims)
    rank = rank or n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m), dims, psd_tol=1e-9)


# -- checks -----------------------------------------------------------------


def ppt_min_eigenvalue(rho: Operator, cut: int | Sequence[int]) -> float:
    return hermlin.min_eigenvalue(hermlin.partial_transpose(HermitianOperator(rho.data, rho.dims), cut))


def check_ppt(rho: Operator, cut: int | Sequence[int], tol: float = 1e-9) -> bool:
    """Partial transpose over ``cut`` is PSD up to ``tol`` (use 1e-3 for zoo states)."""
    return ppt_min_eigenvalue(rho, cut) >= -tol


def check_pt_invariance(rho: Operator, party: int, tol: float = 1e-12) -> bool:
    pt = hermlin.partial_transpose(rho, party).data
    return float(np.abs(pt - rho.data).max()) <= tol


def party_permutations(n: int):
    return list(itertools.permutations(range(n)))


def check_permutation_invariance(rho: Operator, tol: float = 1e-9) -> bool:
    """Invariant under every relabelling of the (equal-dimension) parties."""
    if len(set(rho.dims)) != 1:
        raise StateError("permutation invariance needs equal subsystem dimensions")
    for perm in party_permutations(rho.nsys):
        moved = hermlin.permute_subsystems(rho, perm).data
        if float(np.abs(moved - rho.data).max()) > tol:
            return False
    return True


def symmetrize_parties(rho: Operator) -> np.ndarray:
    perms = party_permutations(rho.nsys)
    return sum(hermlin.permute_subsystems(rho, p).data for p in perms) / len(perms)


# -- DPS hierarchy ----------------------------------------------------------


class Verdict(str, enum.Enum):
    SEPARABLE_AT_LEVEL = "Separable-at-level-k"
    ENTANGLED = "Entangled"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class EntanglementVerdict:
    status: Verdict
    level: int
    witness: HermitianOperator | None = None
    witness_value: float = float("nan")
    margin: float = float("nan")
    slack_bound: float = float("nan")
    details: dict = field(default_factory=dict)

    @property
    def entangled(self) -> bool:
        return self.status is Verdict.ENTANGLED


def as_bipartite(rho: Operator, cut: Sequence[int]) -> tuple[HermitianOperator, int, int]:
    """Regroup ``rho`` into (parties in ``cut``) x (the rest)."""
    cut = sorted(set(cut))
    rest = [k for k in range(rho.nsys) if k not in cut]
    if not cut or not rest:
        raise StateError("a bipartition needs parties on both sides")
    moved = hermlin.permute_subsystems(rho, cut + rest)
    da = math.prod(rho.dims[k] for k in cut)
    db = math.prod(rho.dims[k] for k in rest)
    return HermitianOperator(moved.data, (da, db)), da, db


def symmetric_isometry(d: int, k: int) -> np.ndarray:
    """Columns: orthonormal (real) basis of the symmetric subspace of (C^d)^{(x)k}."""
    cols = []
    for combo in itertools.combinations_with_replacement(range(d), k):
        v = np.zeros(d**k)
        for perm in set(itertools.permutations(combo)):
            v[np.ravel_multi_index(perm, (d,) * k)] = 1.0
        cols.append(v / np.linalg.norm(v))
    return np.array(cols).T


@dataclass
class _DpsLevel:
    """Affine parametrisation of Bose-symmetric extensions and the PSD maps on them."""

    rho: np.ndarray
    da: int
    db: int
    k: int
    real: bool

    def __post_init__(self):
        da, db, k = self.da, self.db, self.k
        self.V = np.kron(np.eye(da), symmetric_isometry(db, k))  # A (x) Sym -> A (x) B^k
        self.nin = self.V.shape[1]
        self.full_dims = (da,) + (db,) * k
        basis_in = hermlin.hermitian_basis(self.nin)
        basis_out = hermlin.hermitian_basis(da * db)
        if self.real:
            basis_in = basis_in[np.abs(basis_in.imag).max(axis=(1, 2)) == 0]
            basis_out = basis_out[np.abs(basis_out.imag).max(axis=(1, 2)) == 0]
        self.basis_in, self.basis_out = basis_in, basis_out
        images = np.array([self.marginal(b) for b in basis_in])
        self.R = np.einsum("rij,cji->rc", basis_out, images).real
        target = np.einsum("rij,ji->r", basis_out, self.rho).real
        w0, *_ = np.linalg.lstsq(self.R, target, rcond=None)
        self.W0 = np.tensordot(w0, basis_in, axes=1)
        self.particular_residual = float(np.abs(self.marginal(self.W0) - self.rho).max())
        null = sla.null_space(self.R)
        self.N = np.tensordot(null.T, basis_in, axes=1) if null.size else np.zeros((0, self.nin, self.nin))

    def lift(self, w: np.ndarray) -> np.ndarray:
        return self.V @ w @ self.V.conj().T

    def marginal(self, w: np.ndarray) -> np.ndarray:
        op = Operator(self.lift(w), self.full_dims)
        return hermlin.partial_trace(op, [0, 1]).data

    def pt_maps(self):
        """One PSD map per inequivalent cut: transpose the first j copies, j = 1..k."""
        out = []
        for j in range(1, self.k + 1):
            parties = list(range(1, j + 1))
            out.append(lambda w, parties=parties: hermlin.partial_transpose(
                Operator(self.lift(w), self.full_dims), parties).data)
        return out

    def adjoint_pt(self, j: int, x: np.ndarray) -> np.ndarray:
        """Adjoint of the j-th PT map: V^dag (X^{T_parties}) V."""
        parties = list(range(1, j + 1))
        xt = hermlin.partial_transpose(Operator(x, self.full_dims), parties).data
        return self.V.conj().T @ xt @ self.V


def _dps_level(rho: HermitianOperator, da: int, db: int, k: int, settings: conic.SolverSettings):
    real = bool(np.abs(rho.data.imag).max() == 0)
    lev = _DpsLevel(rho.data, da, db, k, real)
    nfree = len(lev.N)
    nvars = nfree + 1  # extension directions plus the margin t
    lmi = conic.LmiModel(nvars)
    maps = [lambda w: w] + lev.pt_maps()
    # the margin moves along the identity on A (x) Sym, whose images under all
    # the maps are positive definite; a bare identity on the lifted space
    # would cap the margin at zero because lifts vanish off the symmetric part
    shift = np.eye(lev.nin)
    for fn in maps:
        F0 = fn(lev.W0)
        side = F0.shape[0]
        Fs = np.empty((nvars, side, side), dtype=complex if not real else float)
        for i, n in enumerate(lev.N):
            Fs[i] = fn(n).real if real else fn(n)
        Fs[nfree] = -(fn(shift).real if real else fn(shift))
        lmi.add_lmi(F0.real if real else F0, Fs)
    obj = np.zeros(nvars)
    obj[nfree] = 1.0
    prob = lmi.build(obj)
    sol = conic.solve(prob, settings)
    return lev, lmi, prob, sol


def dps_witness(lev: _DpsLevel, multipliers: Sequence[np.ndarray]):
    """Entanglement witness from the dual multipliers of one DPS level.

    Returns (K, slack) with the guarantee Tr(K s) >= -slack for every
    normalised state s that has a PPT Bose-symmetric extension at this
    level.  Multipliers are first projected onto the PSD cone.
    """
    psd = []
    for x in multipliers:
        w, v = np.linalg.eigh((x + x.conj().T) / 2)
        psd.append((v * np.clip(w, 0, None)) @ v.conj().T)
    Y = psd[0].copy()
    for j, x in enumerate(psd[1:], start=1):
        Y = Y + lev.adjoint_pt(j, x)
    coords = np.einsum("cij,ji->c", lev.basis_in, Y).real
    kc, *_ = np.linalg.lstsq(lev.R.T, coords, rcond=None)
    K = np.tensordot(kc, lev.basis_out, axes=1)
    E = Y - np.tensordot(lev.R.T @ kc, lev.basis_in, axes=1)
    slack = float(np.abs(np.linalg.eigvalsh((E + E.conj().T) / 2)).max())
    return (K + K.conj().T) / 2, slack


def recheck_witness(K: np.ndarray, rho: np.ndarray, multipliers: Sequence[np.ndarray], lev: _DpsLevel) -> dict:
    """Solver-independent recheck: rebuild the witness, bound its slack, evaluate on rho."""
    K2, slack = dps_witness(lev, multipliers)
    value = float(np.trace(K2 @ rho).real)
    min_eigs = [hermlin.min_eigenvalue(HermitianOperator((x + x.conj().T) / 2)) for x in multipliers]
    return dict(value=value, slack=slack, witness_mismatch=float(np.abs(K2 - K).max()),
                min_multiplier_eig=min(min_eigs))


def certify_entanglement_dps(rho: Operator, cut: Sequence[int] = (0,), level: int = 2,
                             settings: conic.SolverSettings | None = None,
                             max_side: int = 160) -> EntanglementVerdict:
    """Search for a PPT Bose-symmetric extension of ``rho`` at levels 1..``level``.

    The second side of the bipartition is copied.  Infeasibility (negative
    optimal margin) yields ``Entangled`` with a witness; the witness is
    accepted only when Tr(K rho) < -slack after an independent recheck.
    Feasibility at the last level yields ``Separable-at-level-k``, which is
    not a separability proof.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    settings = settings or conic.SolverSettings()
    bip, da, db = as_bipartite(rho, cut)
    last = None
    for k in range(1, level + 1):
        if da * db**k > max_side:
            return EntanglementVerdict(Verdict.INCONCLUSIVE, k - 1,
                                       details={"reason": f"level {k} exceeds max_side={max_side}"})
        lev, lmi, prob, sol = _dps_level(bip, da, db, k, settings)
        if sol.status in (conic.Status.PRIMAL_INFEASIBLE, conic.Status.DUAL_INFEASIBLE):
            return EntanglementVerdict(Verdict.INCONCLUSIVE, k,
                                       details={"reason": f"solver status {sol.status.value}"})
        # a stalled iterate is still usable: the witness recheck below does not
        # rely on optimality, only on the multipliers and the residual bound
        margin = sol.dual_objective
        mults = [lmi.multiplier(sol, b) for b in range(len(lmi.lmis))]
        K, slack = dps_witness(lev, mults)
        check = recheck_witness(K, bip.data, mults, lev)
        info = dict(margin=margin, primal_bound=sol.primal_objective, iterations=sol.iterations,
                    solver_status=sol.status.value, check=check,
                    particular_residual=lev.particular_residual)
        last = (k, sol, info)
        if check["value"] < -check["slack"]:
            return EntanglementVerdict(Verdict.ENTANGLED, k, HermitianOperator(K, (da, db)),
                                       check["value"], margin, check["slack"], info)
    k, sol, info = last
    if sol.status is conic.Status.OPTIMAL and sol.dual_objective >= 0:
        return EntanglementVerdict(Verdict.SEPARABLE_AT_LEVEL, k, margin=sol.dual_objective, details=info)
    return EntanglementVerdict(Verdict.INCONCLUSIVE, k, margin=sol.dual_objective, details=info)
