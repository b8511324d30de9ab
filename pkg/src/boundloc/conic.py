"""Dense primal-dual interior-point solver for small semidefinite programs.

Standard form (minimisation)::

    primal:  min <C, X>   s.t.  <A_i, X> = b_i,  X in K
    dual:    max b.y      s.t.  sum_i y_i A_i + S = C,  S in K

where K is a product of real PSD blocks and nonnegative orthants
("nonneg" blocks, stored as vectors).  Complex Hermitian data enters
through :func:`embed_hermitian`; :class:`Model` and :class:`LmiModel`
do that bookkeeping.

The iteration is an infeasible-start Mehrotra predictor-corrector with
the HKM search direction and a dense Cholesky factorisation of the Schur
complement.  Infeasibility detection is a divergence heuristic on the
iterates, nothing more.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from . import hermlin

log = logging.getLogger(__name__)

PSD = "psd"
NONNEG = "nonneg"


class SolverError(RuntimeError):
    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITERATION_LIMIT = "IterationLimit"
    ILL_CONDITIONED = "IllConditioned"


@dataclass(frozen=True)
class Block:
    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in (PSD, NONNEG):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("block size must be positive")


@dataclass
class Constraint:
    """<A, X> = rhs with A given per block (missing blocks are zero)."""

    coeffs: dict[int, np.ndarray]
    rhs: float


@dataclass
class SdpProblem:
    blocks: list[Block]
    objective: list[np.ndarray | None]
    constraints: list[Constraint]

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("SdpProblem needs at least one constraint")
        if len(self.objective) != len(self.blocks):
            raise ValueError("one objective entry per block required")
        self.objective = [self._check(k, c, "objective") for k, c in enumerate(self.objective)]
        for i, con in enumerate(self.constraints):
            if not math.isfinite(con.rhs):
                raise ValueError(f"constraint {i}: right-hand side is not finite")
            con.coeffs = {int(k): self._check(k, a, f"constraint {i}") for k, a in con.coeffs.items()}

    def _check(self, k: int, a, what: str) -> np.ndarray:
        if not 0 <= k < len(self.blocks):
            raise ValueError(f"{what}: block index {k} out of range")
        blk = self.blocks[k]
        if a is None:
            return np.zeros((blk.size, blk.size) if blk.kind == PSD else blk.size)
        a = np.asarray(a, dtype=float)
        if blk.kind == PSD:
            if a.shape != (blk.size, blk.size):
                raise ValueError(f"{what}: block {k} expects {blk.size}x{blk.size}, got {a.shape}")
            if not np.allclose(a, a.T, atol=1e-12, rtol=0):
                raise ValueError(f"{what}: block {k} coefficient is not symmetric")
            a = (a + a.T) / 2
        elif a.shape != (blk.size,):
            raise ValueError(f"{what}: block {k} expects a vector of length {blk.size}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{what}: block {k} has non-finite entries")
        return a

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def b(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints])

    def to_json(self) -> dict:
        """Dump for cross-checking against external solvers."""
        def enc(a):
            return np.asarray(a).tolist()
        return {
            "blocks": [{"kind": b.kind, "size": b.size} for b in self.blocks],
            "objective": [enc(c) for c in self.objective],
            "constraints": [
                {"coeffs": {str(k): enc(a) for k, a in c.coeffs.items()}, "rhs": c.rhs}
                for c in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "SdpProblem":
        if isinstance(obj, str):
            obj = json.loads(obj)
        blocks = [Block(b["kind"], int(b["size"])) for b in obj["blocks"]]
        cons = [
            Constraint({int(k): np.array(a) for k, a in c["coeffs"].items()}, float(c["rhs"]))
            for c in obj["constraints"]
        ]
        return cls(blocks, [np.array(c) for c in obj["objective"]], cons)


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class SdpSolution:
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    status: Status
    gap: float
    residuals: tuple[float, float]
    primal_objective: float
    dual_objective: float
    iterations: int
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def raise_for_status(self) -> "SdpSolution":
        if not self.optimal:
            raise SolverError(f"solver finished with status {self.status.value}", self)
        return self


# -- compiled problem -------------------------------------------------------


class _Compiled:
    """Per-block stacked constraint data: rows touching the block and their matrices."""

    def __init__(self, p: SdpProblem):
        self.p = p
        self.m = p.m
        self.b = p.b
        self.C = p.objective
        self.rows: list[np.ndarray] = []
        self.A: list[np.ndarray] = []
        for k, blk in enumerate(p.blocks):
            rows = [i for i, c in enumerate(p.constraints) if k in c.coeffs]
            self.rows.append(np.array(rows, dtype=int))
            if blk.kind == PSD:
                stack = np.zeros((len(rows), blk.size, blk.size))
            else:
                stack = np.zeros((len(rows), blk.size))
            for j, i in enumerate(rows):
                stack[j] = p.constraints[i].coeffs[k]
            self.A.append(stack)

    def op(self, X: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.m)
        for rows, A, x in zip(self.rows, self.A, X):
            if len(rows):
                out[rows] += A.reshape(len(rows), -1) @ x.ravel()
        return out

    def adj(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for blk, rows, A in zip(self.p.blocks, self.rows, self.A):
            if len(rows):
                out.append(np.tensordot(y[rows], A, axes=1))
            else:
                out.append(np.zeros((blk.size, blk.size)) if blk.kind == PSD else np.zeros(blk.size))
        return out


def _inner(U, V) -> float:
    return float(sum(np.vdot(u, v).real for u, v in zip(U, V)))


def _norm(U) -> float:
    return math.sqrt(sum(float(np.vdot(u, u).real) for u in U))


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


def _max_step(x: np.ndarray, dx: np.ndarray, kind: str) -> float:
    """Largest alpha with x + alpha dx still in the cone (inf when unbounded)."""
    if kind == NONNEG:
        neg = dx < 0
        if not np.any(neg):
            return math.inf
        return float(np.min(-x[neg] / dx[neg]))
    L = np.linalg.cholesky(x)
    w = sla.solve_triangular(L, dx, lower=True)
    w = sla.solve_triangular(L, w.T, lower=True).T
    lam = np.linalg.eigvalsh(_sym(w))[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _initial_point(c: _Compiled):
    X, Z = [], []
    bnorm = np.abs(c.b)
    for blk, rows, A, C in zip(c.p.blocks, c.rows, c.A, c.C):
        n = blk.size
        anorm = np.linalg.norm(A.reshape(len(rows), -1), axis=1) if len(rows) else np.zeros(0)
        xi = max(10.0, math.sqrt(n))
        if len(rows):
            xi = max(xi, n * float(np.max((1 + bnorm[rows]) / (1 + anorm))))
        eta = max(10.0, math.sqrt(n), float(np.linalg.norm(C)), float(anorm.max(initial=0.0)))
        if blk.kind == PSD:
            X.append(xi * np.eye(n))
            Z.append(eta * np.eye(n))
        else:
            X.append(np.full(n, xi))
            Z.append(np.full(n, eta))
    return X, np.zeros(c.m), Z


def _schur(c: _Compiled, X, Zinv) -> np.ndarray:
    M = np.zeros((c.m, c.m))
    for blk, rows, A, x, zi in zip(c.p.blocks, c.rows, c.A, X, Zinv):
        k = len(rows)
        if not k:
            continue
        if blk.kind == PSD:
            G = x @ A @ zi  # X A_j Z^-1 for every row j
            Mb = A.reshape(k, -1) @ G.transpose(0, 2, 1).reshape(k, -1).T
        else:
            Mb = (A * (x * zi)) @ A.T
        M[np.ix_(rows, rows)] += _sym(Mb)
    return M


class _SchurFactor:
    def __init__(self, M: np.ndarray):
        self.M = M
        try:
            self.cho = sla.cho_factor(M, lower=True, check_finite=True)
            self.lu = None
        except (np.linalg.LinAlgError, ValueError):
            self.cho = None
            try:
                self.lu = sla.lu_factor(M, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise np.linalg.LinAlgError(str(exc)) from exc
            if np.any(np.abs(np.diag(self.lu[0])) <= 1e-14 * max(1.0, np.abs(M).max())):
                raise np.linalg.LinAlgError("Schur complement is singular")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.cho is not None:
            out = sla.cho_solve(self.cho, rhs)
        else:
            out = sla.lu_solve(self.lu, rhs)
        if not np.all(np.isfinite(out)):
            raise np.linalg.LinAlgError("non-finite Schur solution")
        return out


def solve(p: SdpProblem, s: SolverSettings | None = None) -> SdpSolution:
    """Solve ``p``; the returned status says whether the result is usable."""
    s = s or SolverSettings()
    c = _Compiled(p)
    kinds = [blk.kind for blk in p.blocks]
    ntot = sum(blk.size for blk in p.blocks)
    X, y, Z = _initial_point(c)
    bnorm = 1.0 + float(np.linalg.norm(c.b))
    cnorm = 1.0 + _norm(c.C)
    history: list[dict] = []
    status = Status.ITERATION_LIMIT
    stalls = 0
    it = 0

    def finish(st: Status, rp, Rd, pobj, dobj, gap):
        return SdpSolution(
            X=X, y=y, S=Z, status=st, gap=gap,
            residuals=(float(np.linalg.norm(rp)) / bnorm, _norm(Rd) / cnorm),
            primal_objective=pobj, dual_objective=dobj,
            iterations=it, history=history,
        )

    while True:
        AX = c.op(X)
        ATy = c.adj(y)
        rp = c.b - AX
        Rd = [Ci - Zi - Ai for Ci, Zi, Ai in zip(c.C, Z, ATy)]
        pobj = _inner(c.C, X)
        dobj = float(c.b @ y)
        xz = _inner(X, Z)
        mu = xz / ntot
        pinf = float(np.linalg.norm(rp)) / bnorm
        dinf = _norm(Rd) / cnorm
        denom = 1.0 + abs(pobj) + abs(dobj)
        gap = max(abs(pobj - dobj), xz) / denom
        history.append(dict(iter=it, pobj=pobj, dobj=dobj, gap=gap, pinf=pinf, dinf=dinf, mu=mu))
        log.debug("it %3d pobj % .9e dobj % .9e gap %.2e pinf %.2e dinf %.2e",
                  it, pobj, dobj, gap, pinf, dinf)

        if gap <= s.gap_tol and pinf <= s.feas_tol and dinf <= s.feas_tol:
            return finish(Status.OPTIMAL, rp, Rd, pobj, dobj, gap)
        # Farkas-type rays: the dual objective running away certifies primal
        # infeasibility, the primal objective running away dual infeasibility
        if dobj > 0:
            ray = _norm([a + z for a, z in zip(ATy, Z)]) / dobj
            if ray < s.feas_tol and dobj > 1e3:
                return finish(Status.PRIMAL_INFEASIBLE, rp, Rd, pobj, dobj, gap)
        if pobj < 0:
            ray = float(np.linalg.norm(AX)) / -pobj
            if ray < s.feas_tol and -pobj > 1e3:
                return finish(Status.DUAL_INFEASIBLE, rp, Rd, pobj, dobj, gap)
        if it >= s.max_iter or stalls >= 5:
            return finish(Status.ITERATION_LIMIT, rp, Rd, pobj, dobj, gap)
        it += 1

        Zinv = []
        for kind, z in zip(kinds, Z):
            if kind == PSD:
                Lz = sla.cho_factor(z, lower=True)
                Zinv.append(_sym(sla.cho_solve(Lz, np.eye(len(z)))))
            else:
                Zinv.append(1.0 / z)
        try:
            fac = _SchurFactor(_schur(c, X, Zinv))
        except np.linalg.LinAlgError:
            return finish(Status.ILL_CONDITIONED, rp, Rd, pobj, dobj, gap)

        def direction(Rc):
            # Rc is the complementarity residual sigma*mu*I - XZ (- corrector term)
            T = []
            for kind, x, zi, rc, rd in zip(kinds, X, Zinv, Rc, Rd):
                if kind == PSD:
                    T.append((rc - x @ rd) @ zi)
                else:
                    T.append((rc - x * rd) * zi)
            rhs = rp - c.op([_sym(t) if k == PSD else t for k, t in zip(kinds, T)])
            dy = fac.solve(rhs)
            dZ = [rd - a for rd, a in zip(Rd, c.adj(dy))]
            dX = []
            for kind, x, zi, rc, dz in zip(kinds, X, Zinv, Rc, dZ):
                if kind == PSD:
                    dX.append(_sym((rc - x @ dz) @ zi))
                else:
                    dX.append((rc - x * dz) * zi)
            return dX, dy, dZ

        def steps(dX, dZ):
            ap = min((_max_step(x, d, k) for k, x, d in zip(kinds, X, dX)), default=math.inf)
            ad = min((_max_step(z, d, k) for k, z, d in zip(kinds, Z, dZ)), default=math.inf)
            return ap, ad

        XZ = [x @ z if k == PSD else x * z for k, x, z in zip(kinds, X, Z)]
        try:
            dXa, dya, dZa = direction([-xz_ for xz_ in XZ])
            ap, ad = steps(dXa, dZa)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [z + ad * d for z, d in zip(Z, dZa)]) / ntot
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
            Rc = []
            for k, xz_, dx, dz in zip(kinds, XZ, dXa, dZa):
                if k == PSD:
                    Rc.append(sigma * mu * np.eye(len(xz_)) - xz_ - dx @ dz)
                else:
                    Rc.append(sigma * mu - xz_ - dx * dz)
            dX, dy, dZ = direction(Rc)
            ap, ad = steps(dX, dZ)
        except np.linalg.LinAlgError:
            return finish(Status.ILL_CONDITIONED, rp, Rd, pobj, dobj, gap)
        ap = min(1.0, s.step_fraction * ap)
        ad = min(1.0, s.step_fraction * ad)
        stalls = stalls + 1 if max(ap, ad) < 1e-8 else 0
        X = [x + ap * d for x, d in zip(X, dX)]
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]


# -- verification -----------------------------------------------------------


@dataclass
class VerificationReport:
    passed: bool
    findings: list[str]
    metrics: dict[str, float]

    def to_json(self) -> dict:
        return {"passed": self.passed, "findings": list(self.findings),
                "metrics": {k: float(v) for k, v in self.metrics.items()}}


def verify_solution(p: SdpProblem, sol: SdpSolution, tol: float = 1e-7) -> VerificationReport:
    """Recompute residuals, gap and cone membership from scratch.

    Uses only the problem data and the returned (X, y, S); eigenvalues come
    from the Jacobi routine in :mod:`hermlin`, not from the solver's LAPACK
    path.
    """
    findings = []
    b = p.b
    AX = np.array([
        sum(float(np.sum(a * sol.X[k])) for k, a in con.coeffs.items()) for con in p.constraints
    ])
    primal = float(np.linalg.norm(b - AX)) / (1.0 + float(np.linalg.norm(b)))
    ATy = [np.zeros_like(x) for x in sol.X]
    for yi, con in zip(sol.y, p.constraints):
        for k, a in con.coeffs.items():
            ATy[k] = ATy[k] + yi * a
    Rd = [c - s_ - a for c, s_, a in zip(p.objective, sol.S, ATy)]
    dual = _norm(Rd) / (1.0 + _norm(p.objective))
    pobj = _inner(p.objective, sol.X)
    dobj = float(b @ sol.y)
    denom = 1.0 + abs(pobj) + abs(dobj)
    gap = abs(pobj - dobj) / denom
    comp = _inner(sol.X, sol.S) / denom

    def cone_min(blk, v):
        if blk.kind == NONNEG:
            return float(np.min(v))
        return hermlin.min_eigenvalue(hermlin.HermitianOperator(_sym(v)))

    min_x = min(cone_min(blk, x) for blk, x in zip(p.blocks, sol.X))
    min_s = min(cone_min(blk, z) for blk, z in zip(p.blocks, sol.S))
    metrics = dict(primal_residual=primal, dual_residual=dual, gap=gap,
                   complementarity=comp, min_eig_X=min_x, min_eig_S=min_s)
    if primal > tol:
        findings.append(f"primal residual {primal:.3e} exceeds {tol:g}")
    if dual > tol:
        findings.append(f"dual residual {dual:.3e} exceeds {tol:g}")
    if gap > tol:
        findings.append(f"duality gap {gap:.3e} exceeds {tol:g}")
    if comp > tol:
        findings.append(f"complementarity {comp:.3e} exceeds {tol:g}")
    if min_x < -tol:
        findings.append(f"primal block has negative eigenvalue {min_x:.3e}")
    if min_s < -tol:
        findings.append(f"dual slack has negative eigenvalue {min_s:.3e}")
    return VerificationReport(not findings, findings, metrics)


# -- complex Hermitian modelling --------------------------------------------


def embed_hermitian(h) -> np.ndarray:
    """Real symmetric image [[Re H, -Im H], [Im H, Re H]] of a Hermitian matrix."""
    h = hermlin.HermitianOperator(h.data if isinstance(h, hermlin.Operator) else h).data
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed(x: np.ndarray) -> np.ndarray:
    """Complex Hermitian matrix represented by a (not necessarily structured) real embedding."""
    n = x.shape[0] // 2
    x11, x12, x21, x22 = x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:]
    out = (x11 + x22) / 2 + 1j * (x21 - x12) / 2
    return (out + out.conj().T) / 2


@dataclass(frozen=True)
class Var:
    block: int
    n: int
    kind: str
    complex: bool


class Model:
    """Primal-form builder: PSD (optionally complex Hermitian) and nonnegative variables,
    linear equalities ``sum Tr(G X) = rhs`` and a linear objective to minimise."""

    def __init__(self):
        self.blocks: list[Block] = []
        self.vars: list[Var] = []
        self._obj: dict[int, np.ndarray] = {}
        self.constraints: list[Constraint] = []

    def psd(self, n: int, complex: bool = True) -> Var:
        v = Var(len(self.blocks), n, PSD, complex)
        self.blocks.append(Block(PSD, 2 * n if complex else n))
        self.vars.append(v)
        return v

    def nonneg(self, n: int = 1) -> Var:
        v = Var(len(self.blocks), n, NONNEG, False)
        self.blocks.append(Block(NONNEG, n))
        self.vars.append(v)
        return v

    @staticmethod
    def _coeff(v: Var, g) -> np.ndarray:
        g = np.asarray(g)
        if v.kind == NONNEG:
            return np.real(np.broadcast_to(g, (v.n,))).astype(float)
        if v.complex:
            return embed_hermitian(g) / 2
        return _sym(np.real(g))

    def add_eq(self, terms: Sequence[tuple[Var, object]], rhs: float) -> int:
        coeffs: dict[int, np.ndarray] = {}
        for v, g in terms:
            a = self._coeff(v, g)
            coeffs[v.block] = coeffs[v.block] + a if v.block in coeffs else a
        self.constraints.append(Constraint(coeffs, float(rhs)))
        return len(self.constraints) - 1

    def add_hermitian_eq(self, terms: Sequence[tuple[Var, Callable[[np.ndarray], np.ndarray]]],
                         rhs, tol: float = 1e-13) -> list[int]:
        """Impose ``sum_v L_v(X_v) = rhs`` for real-linear maps L_v into Hermitian matrices.

        One real equation per Hermitian basis element of the output space;
        rows that vanish identically are dropped (and must then have zero
        right-hand side).
        """
        rhs = np.asarray(rhs, dtype=complex)
        nout = rhs.shape[0]
        out_basis = hermlin.hermitian_basis(nout)
        per_var = []
        for v, fn in terms:
            if v.kind == NONNEG:
                # maps take the coordinate vector and return a Hermitian matrix
                basis = np.eye(v.n)
            else:
                basis = hermlin.hermitian_basis(v.n) if v.complex else _real_sym_basis(v.n)
            images = np.array([fn(bc) for bc in basis])
            # R[r, c] = Tr(E_r L(B_c))
            R = np.einsum("rij,cji->rc", out_basis, images).real
            per_var.append((v, basis, R))
        rows = []
        for r, er in enumerate(out_basis):
            val = float(np.trace(er @ rhs).real)
            terms_r = []
            for v, basis, R in per_var:
                if np.abs(R[r]).max() > tol:
                    g = R[r] if v.kind == NONNEG else np.tensordot(R[r], basis, axes=1)
                    terms_r.append((v, g))
            if not terms_r:
                if abs(val) > 1e-9:
                    raise ValueError("inconsistent equality: zero row with nonzero right-hand side")
                continue
            rows.append(self.add_eq(terms_r, val))
        return rows

    def minimize(self, terms: Sequence[tuple[Var, object]]):
        self._obj = {}
        for v, g in terms:
            a = self._coeff(v, g)
            self._obj[v.block] = self._obj.get(v.block, 0) + a

    def build(self) -> SdpProblem:
        obj = [self._obj.get(k) for k in range(len(self.blocks))]
        return SdpProblem(list(self.blocks), obj, list(self.constraints))

    @staticmethod
    def value(sol: SdpSolution, v: Var) -> np.ndarray:
        x = sol.X[v.block]
        if v.kind == NONNEG:
            return x.copy()
        return unembed(x) if v.complex else x.copy()


def _real_sym_basis(n: int) -> np.ndarray:
    basis = hermlin.hermitian_basis(n)
    return np.array([b for b in basis if np.abs(b.imag).max() == 0]).astype(complex)


class LmiModel:
    """Dual-form builder: maximise ``obj . y`` subject to Hermitian LMIs
    ``F0 + sum_i y_i F_i >= 0`` with free real ``y``.

    The primal variables attached to each LMI block are the Lagrange
    multipliers; they are what entanglement witnesses and similar dual
    certificates are built from.
    """

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.lmis: list[tuple[np.ndarray, np.ndarray, bool]] = []

    def add_lmi(self, F0, Fs) -> int:
        F0 = np.asarray(F0, dtype=complex)
        Fs = np.asarray(Fs, dtype=complex).reshape(self.nvars, *F0.shape)
        is_complex = bool(np.abs(F0.imag).max(initial=0) > 0 or np.abs(Fs.imag).max(initial=0) > 0)
        self.lmis.append((F0, Fs, is_complex))
        return len(self.lmis) - 1

    def build(self, obj: Sequence[float]) -> SdpProblem:
        obj = np.asarray(obj, dtype=float)
        blocks, C, per_block = [], [], []
        for F0, Fs, cplx in self.lmis:
            if cplx:
                blocks.append(Block(PSD, 2 * F0.shape[0]))
                C.append(embed_hermitian(F0) / 2)
                per_block.append(np.array([-embed_hermitian(f) / 2 for f in Fs]))
            else:
                blocks.append(Block(PSD, F0.shape[0]))
                C.append(_sym(F0.real))
                per_block.append(np.array([-_sym(f.real) for f in Fs]))
        cons = []
        for i in range(self.nvars):
            coeffs = {k: A[i] for k, A in enumerate(per_block) if np.abs(A[i]).max() > 0}
            cons.append(Constraint(coeffs, float(obj[i])))
        return SdpProblem(blocks, C, cons)

    def multiplier(self, sol: SdpSolution, k: int) -> np.ndarray:
        """Complex Hermitian multiplier of LMI ``k`` (scaled so that <F, W> pairs as Tr(F W))."""
        x = sol.X[k]
        return unembed(x) if self.lmis[k][2] else x.astype(complex)

    def slack(self, y: np.ndarray, k: int) -> np.ndarray:
        F0, Fs, _ = self.lmis[k]
        return F0 + np.tensordot(y, Fs, axes=1)
