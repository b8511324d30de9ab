"""Correlator Bell inequalities, Bell operators, local bounds and see-saw search."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import conic, hermlin
from .hermlin import HermitianOperator, Operator, Povm
from .states import DensityMatrix, party_permutations

ENUMERATION_CAP = 2**20


class BellError(ValueError):
    pass


class DimensionMismatch(BellError):
    pass


class TooLarge(BellError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Term:
    """Coefficient times a product of observables; setting 0 marks an absent party."""

    coeff: float
    settings: tuple[int, ...]


@dataclass(frozen=True)
class BellInequality:
    parties: int
    settings: int
    outcomes: int
    terms: tuple[Term, ...]
    local_bound: float
    name: str = "custom"

    def __post_init__(self):
        if self.outcomes != 2:
            raise BellError("only two-outcome (correlator) inequalities are supported")
        terms = tuple(t if isinstance(t, Term) else Term(float(t[0]), tuple(t[1])) for t in self.terms)
        for t in terms:
            if not math.isfinite(t.coeff):
                raise BellError("coefficients must be finite")
            if len(t.settings) != self.parties:
                raise BellError(f"term {t} does not list one setting per party")
            if any(not 0 <= s <= self.settings for s in t.settings):
                raise BellError(f"term {t} uses a setting outside 0..{self.settings}")
        object.__setattr__(self, "terms", terms)

    def to_json(self) -> dict:
        return {
            "scenario": {"parties": self.parties, "settings": self.settings, "outcomes": self.outcomes},
            "terms": [{"coeff": t.coeff, "settings": list(t.settings)} for t in self.terms],
            "local_bound": self.local_bound,
        }

    @classmethod
    def from_json(cls, obj: dict | str, name: str = "custom") -> "BellInequality":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            sc = obj["scenario"]
            terms = tuple(Term(float(t["coeff"]), tuple(int(s) for s in t["settings"])) for t in obj["terms"])
            return cls(int(sc["parties"]), int(sc["settings"]), int(sc["outcomes"]), terms,
                       float(obj["local_bound"]), name)
        except (KeyError, TypeError) as exc:
            raise BellError(f"malformed inequality JSON: {exc}") from exc

    def relabel_parties(self, perm: Sequence[int]) -> "BellInequality":
        terms = tuple(Term(t.coeff, tuple(t.settings[p] for p in perm)) for t in self.terms)
        return BellInequality(self.parties, self.settings, self.outcomes, terms, self.local_bound, self.name)

    def algebraic_maximum(self) -> float:
        return float(sum(abs(t.coeff) for t in self.terms))


def merge_terms(terms: Sequence[Term]) -> tuple[Term, ...]:
    """Sum coefficients of identical setting patterns, keeping first-seen order and dropping zeros."""
    acc: dict[tuple[int, ...], float] = {}
    for t in terms:
        acc[t.settings] = acc.get(t.settings, 0.0) + t.coeff
    return tuple(Term(c, s) for s, c in acc.items() if c != 0.0)


def symmetrize(coeff: float, pattern: Sequence[int]) -> list[Term]:
    """Orbit of a setting pattern under party permutations, each distinct pattern once."""
    seen = []
    for perm in itertools.permutations(range(len(pattern))):
        moved = tuple(pattern[p] for p in perm)
        if moved not in seen:
            seen.append(moved)
    return [Term(float(coeff), s) for s in seen]


def sliwa5() -> BellInequality:
    """sym[A1 + A1B2 - A2B2 - A1B1C1 - A2B1C1 + A2B2C2] <= 3."""
    generators = [
        (1, (1, 0, 0)),
        (1, (1, 2, 0)),
        (-1, (2, 2, 0)),
        (-1, (1, 1, 1)),
        (-1, (2, 1, 1)),
        (1, (2, 2, 2)),
    ]
    terms = [t for c, pat in generators for t in symmetrize(c, pat)]
    return BellInequality(3, 2, 2, merge_terms(terms), 3.0, "sliwa5")


def chsh() -> BellInequality:
    terms = (Term(1, (1, 1)), Term(1, (1, 2)), Term(1, (2, 1)), Term(-1, (2, 2)))
    return BellInequality(2, 2, 2, terms, 2.0, "chsh")


INEQUALITIES = {"sliwa5": sliwa5, "chsh": chsh}


def inequality(name: str) -> BellInequality:
    try:
        return INEQUALITIES[name]()
    except KeyError:
        raise BellError(f"unknown inequality {name!r}; choose from {sorted(INEQUALITIES)}") from None


# -- measurements and correlations ------------------------------------------


@dataclass(frozen=True)
class MeasurementSet:
    """``povms[party][setting]``; settings are 0-based here, 1-based in inequality terms."""

    povms: tuple[tuple[Povm, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "povms", tuple(tuple(p) for p in self.povms))

    @property
    def parties(self) -> int:
        return len(self.povms)

    def observable(self, party: int, setting: int) -> np.ndarray:
        return self.povms[party][setting].observable()

    def dims(self) -> tuple[int, ...]:
        return tuple(p[0].dim for p in self.povms)

    def replace(self, party: int, povms: Sequence[Povm]) -> "MeasurementSet":
        new = list(self.povms)
        new[party] = tuple(povms)
        return MeasurementSet(tuple(new))

    @classmethod
    def symmetric(cls, povms: Sequence[Povm], parties: int) -> "MeasurementSet":
        return cls(tuple(tuple(povms) for _ in range(parties)))

    @classmethod
    def from_observables(cls, observables: Sequence[Sequence[np.ndarray]], tol: float = 1e-9) -> "MeasurementSet":
        return cls(tuple(tuple(Povm.from_observable(o, tol) for o in party) for party in observables))

    def to_json(self) -> dict:
        return {"povms": [[m.to_json() for m in party] for party in self.povms]}


def paper_measurements() -> MeasurementSet:
    """A1 = -0.7909 Z - 0.6119 X, A2 = -0.2344 Z + 0.9721 X for every party."""
    x, z = hermlin.PAULI_X.data, hermlin.PAULI_Z.data
    a1 = -0.7909 * z - 0.6119 * x
    a2 = -0.2344 * z + 0.9721 * x
    return MeasurementSet.from_observables([[a1, a2]] * 3)


@dataclass(frozen=True)
class CorrelationTensor:
    """p[a_1, ..., a_n, x_1, ..., x_n] with 0-based outcomes and settings."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim % 2:
            raise BellError("table needs outcome and setting axes for every party")
        n = p.ndim // 2
        if np.any(p < -1e-9) or np.any(p > 1 + 1e-9):
            raise BellError("probabilities outside [0, 1]")
        sums = p.sum(axis=tuple(range(n)))
        if np.abs(sums - 1).max() > 1e-9:
            raise BellError("outcome slices do not sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def parties(self) -> int:
        return self.p.ndim // 2

    def marginal(self, keep: Sequence[int]) -> np.ndarray:
        """Marginal over kept parties, indexed [outcomes..., settings of all parties...]."""
        drop = tuple(k for k in range(self.parties) if k not in keep)
        return self.p.sum(axis=drop)

    def nonsignalling_violation(self) -> float:
        """Largest change of any marginal when a dropped party switches setting."""
        n = self.parties
        worst = 0.0
        for k in range(n):
            m = self.p.sum(axis=k)  # outcome axis k removed; its setting axis now at n - 1 + k
            ax = n - 1 + k
            worst = max(worst, float(np.abs(m - m.take([0], axis=ax)).max()))
        return worst

    def correlator(self, settings: Sequence[int]) -> float:
        """<prod of +-1 outcomes> for the present parties (setting 0 = absent), 1-based settings."""
        n = self.parties
        idx: list = [slice(None)] * n
        for k, s in enumerate(settings):
            idx.append(s - 1 if s > 0 else 0)
        table = self.p[tuple(idx)]
        sign = np.ones(table.shape)
        for k, s in enumerate(settings):
            if s > 0:
                shape = [1] * n
                shape[k] = 2
                sign = sign * np.array([1.0, -1.0]).reshape(shape)
        return float((table * sign).sum())


def correlations(rho: Operator, m: MeasurementSet) -> CorrelationTensor:
    """Born-rule table p(a...|x...) = Tr[(M_a|x (x) ...) rho]."""
    if rho.dims != m.dims():
        raise DimensionMismatch(f"state dims {rho.dims} vs measurement dims {m.dims()}")
    n = m.parties
    t = rho.data.reshape(rho.dims + rho.dims)
    letters = "abcdefghij"[:n]
    upper = "ABCDEFGHIJ"[:n]
    # stack POVM elements per party: shape (settings, outcomes, d, d)
    stacks = [np.array([[e for e in povm] for povm in party]) for party in m.povms]
    # Tr[(M (x) N ...) rho] = sum M[I, i] N[J, j] ... rho[i, j, ..., I, J, ...]
    labels = iter("klmnpqrstuvwyz")
    xs = [next(labels) for _ in range(n)]
    os_ = [next(labels) for _ in range(n)]
    spec_ops = [f"{xs[k]}{os_[k]}{upper[k]}{letters[k]}" for k in range(n)]
    spec_rho = "".join(letters) + "".join(upper)
    out = "".join(os_) + "".join(xs)
    p = np.einsum(",".join(spec_ops + [spec_rho]) + "->" + out, *stacks, t).real
    return CorrelationTensor(np.clip(p, 0.0, None) if np.all(p > -1e-12) else p)


def bell_value(ineq: BellInequality, table: CorrelationTensor) -> float:
    return float(sum(t.coeff * table.correlator(t.settings) for t in ineq.terms))


def bell_operator(ineq: BellInequality, m: MeasurementSet) -> HermitianOperator:
    if m.parties != ineq.parties:
        raise DimensionMismatch("measurement set and inequality have different party counts")
    dims = m.dims()
    out = np.zeros((math.prod(dims),) * 2, dtype=complex)
    for t in ineq.terms:
        mats = [m.observable(k, s - 1) if s else np.eye(dims[k]) for k, s in enumerate(t.settings)]
        out += t.coeff * hermlin.kron(*[Operator(x) for x in mats]).data
    return HermitianOperator(out, dims)


def quantum_value(ineq: BellInequality, rho: Operator, m: MeasurementSet) -> float:
    return float(np.trace(bell_operator(ineq, m).data @ rho.data).real)


def local_bound(ineq: BellInequality) -> float:
    """Maximum over every deterministic +-1 assignment of all (party, setting) pairs."""
    nbits = ineq.parties * ineq.settings
    if 2**nbits > ENUMERATION_CAP:
        raise TooLarge(f"{2**nbits} deterministic strategies exceed the cap {ENUMERATION_CAP}")
    vals = 1 - 2 * ((np.arange(2**nbits)[:, None] >> np.arange(nbits)) & 1)
    vals = vals.reshape(-1, ineq.parties, ineq.settings).astype(float)
    total = np.zeros(len(vals))
    for t in ineq.terms:
        prod = np.ones(len(vals))
        for k, s in enumerate(t.settings):
            if s:
                prod = prod * vals[:, k, s - 1]
        total += t.coeff * prod
    return float(total.max())


# -- see-saw ----------------------------------------------------------------


def _effective_operators(ineq: BellInequality, rho: Operator, m: MeasurementSet, party: int):
    """Tr(B rho) = const + sum_x Tr(K_x A_x) for party's observables A_x."""
    dims = m.dims()
    d = dims[party]
    K = np.zeros((ineq.settings, d, d), dtype=complex)
    const = 0.0
    for t in ineq.terms:
        mats = [m.observable(k, s - 1) if s else np.eye(dims[k]) for k, s in enumerate(t.settings)]
        if t.settings[party] == 0:
            op = hermlin.kron(*[Operator(x) for x in mats]).data
            const += t.coeff * float(np.trace(op @ rho.data).real)
            continue
        mats[party] = np.eye(d)
        op = hermlin.kron(*[Operator(x) for x in mats]).data
        red = hermlin.partial_trace(Operator(op @ rho.data, dims), [party]).data
        # Tr[(A (x) rest) rho] = Tr[A Tr_rest((1 (x) rest) rho)]; transpose to act on A from the left
        K[t.settings[party] - 1] += t.coeff * red
    return K, const


def _best_two_outcome(K: np.ndarray) -> Povm:
    """argmax Tr(K (M1 - M2)) over two-outcome POVMs: M1 = projector on the positive part of K."""
    w, v = np.linalg.eigh((K + K.conj().T) / 2)
    pos = v[:, w > 0]
    m1 = pos @ pos.conj().T
    return Povm([m1, np.eye(K.shape[0]) - m1])


def seesaw_measurements(rho: Operator, ineq: BellInequality, party: int, m: MeasurementSet) -> list[Povm]:
    """Optimal POVMs of one party with everything else fixed.

    The objective is linear in the party's POVMs; for two outcomes the SDP
    optimum is the projector onto the positive eigenspace of the effective
    operator, computed here directly.  The incoming POVMs are kept where
    they are already optimal, so the step never decreases the value.
    """
    K, _ = _effective_operators(ineq, rho, m, party)
    out = []
    for x, old in enumerate(m.povms[party]):
        new = _best_two_outcome(K[x])
        gain = np.trace(K[x] @ (new.observable() - old.observable())).real
        out.append(new if gain > 1e-13 else old)
    return out


@dataclass(frozen=True)
class StateConstraints:
    ppt_cuts: tuple[tuple[int, ...], ...] = ()
    pt_invariant: tuple[int, ...] = ()
    symmetric: bool = False

    @property
    def empty(self) -> bool:
        return not (self.ppt_cuts or self.pt_invariant or self.symmetric)


def ppt_symmetric_constraints(parties: int = 3) -> StateConstraints:
    """PPT on every single-party cut, PT-invariance under every party, party symmetry."""
    return StateConstraints(tuple((k,) for k in range(parties)), tuple(range(parties)), True)


def invariant_basis(dims: Sequence[int], c: StateConstraints) -> np.ndarray:
    """Orthonormal basis of traceless Hermitian matrices fixed by the constraint group."""
    n = math.prod(dims)
    nsys = len(dims)
    perms = party_permutations(nsys) if c.symmetric else [tuple(range(nsys))]
    pt_sets = [()]
    for k in c.pt_invariant:
        pt_sets = pt_sets + [s + (k,) for s in pt_sets]
    # close the PT subsets under the permutations so the average is a projector
    if c.symmetric and c.pt_invariant:
        closed = {tuple(sorted(s)) for s in pt_sets}
        for s in list(closed):
            for p in perms:
                closed.add(tuple(sorted(p.index(k) for k in s)))
        pt_sets = sorted(closed)

    def average(h):
        op = Operator(h, dims)
        acc = np.zeros((n, n), dtype=complex)
        for p in perms:
            moved = hermlin.permute_subsystems(op, p)
            for s in pt_sets:
                acc += hermlin.partial_transpose(moved, s).data if s else moved.data
        return acc / (len(perms) * len(pt_sets))

    basis = hermlin.hermitian_basis(n)
    imgs = np.array([average(b) for b in basis])
    coords = np.einsum("rij,cji->cr", basis, imgs).real  # column c: image of basis c
    # drop the identity direction: work in the traceless complement
    ident = np.einsum("rii->r", basis).real / math.sqrt(n)
    coords = coords - np.outer(coords @ ident, ident)
    u, s, _ = np.linalg.svd(coords)
    rank = int((s > 1e-9).sum())
    return np.tensordot(u[:, :rank].T, basis, axes=1)


def seesaw_state(ineq: BellInequality, m: MeasurementSet, constraints: StateConstraints = StateConstraints(),
                 settings: conic.SolverSettings | None = None, basis: np.ndarray | None = None) -> DensityMatrix:
    """State maximising Tr(B rho) under the requested linear and PPT constraints.

    Without constraints the optimum is the top eigenvector of B.
    """
    B = bell_operator(ineq, m)
    dims = B.dims
    n = B.shape[0]
    if constraints.empty:
        w, v = np.linalg.eigh(B.data)
        return DensityMatrix(np.outer(v[:, -1], v[:, -1].conj()), dims, psd_tol=1e-9)
    E = invariant_basis(dims, constraints) if basis is None else basis
    lmi = conic.LmiModel(len(E))
    lmi.add_lmi(np.eye(n) / n, E)
    for cut in constraints.ppt_cuts:
        if set(cut) <= set(constraints.pt_invariant):
            continue  # implied by PT-invariance
        pt = lambda h: hermlin.partial_transpose(Operator(h, dims), cut).data  # noqa: E731
        lmi.add_lmi(pt(np.eye(n) / n), np.array([pt(e) for e in E]))
    obj = np.einsum("ij,kji->k", B.data, E).real
    sol = conic.solve(lmi.build(obj), settings or conic.SolverSettings())
    if sol.status in (conic.Status.PRIMAL_INFEASIBLE, conic.Status.DUAL_INFEASIBLE):
        raise SolverFailure(f"state SDP ended with status {sol.status.value}")
    rho = np.eye(n) / n + np.tensordot(sol.y, E, axes=1)
    rho = (rho + rho.conj().T) / 2
    # clip the tiny negative spectrum an interior iterate can carry at the boundary
    lam = np.linalg.eigvalsh(rho)[0]
    if lam < 0:
        t = -lam / (1.0 / n - lam)
        rho = (1 - t) * rho + t * np.eye(n) / n
    return DensityMatrix(rho / np.trace(rho).real, dims, psd_tol=1e-9)


def random_projective(rng: np.random.Generator, settings: int) -> list[Povm]:
    out = []
    for _ in range(settings):
        v = rng.normal(size=3)
        out.append(Povm.projective(v))
    return out


@dataclass
class SeesawRun:
    value: float
    rho: DensityMatrix
    m: MeasurementSet
    history: list[float]
    rounds: int


@dataclass
class SeesawResult:
    value: float
    rho: DensityMatrix
    m: MeasurementSet
    runs: list[SeesawRun] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": self.value, "rho": hermlin.to_json(self.rho), "measurements": self.m.to_json(),
                "restart_values": [r.value for r in self.runs],
                "rounds": [r.rounds for r in self.runs]}


def _symmetric_step(ineq, rho, m: MeasurementSet, grid: int = 201):
    """Symmetric measurement update: best mixture of current and single-party-optimal POVMs.

    The value along M_t = (1-t) M + t M' is a polynomial in t; t = 0 is
    included, so the step never decreases the value.
    """
    cand = seesaw_measurements(rho, ineq, 0, m)
    cur = m.povms[0]
    best_t, best_val, best_m = 0.0, quantum_value(ineq, rho, m), m
    for t in np.linspace(0, 1, grid)[1:]:
        mix = [Povm([(1 - t) * a + t * b for a, b in zip(p, q)]) for p, q in zip(cur, cand)]
        mt = MeasurementSet.symmetric(mix, m.parties)
        val = quantum_value(ineq, rho, mt)
        if val > best_val:
            best_t, best_val, best_m = t, val, mt
    return best_m, best_val


def seesaw_run(ineq: BellInequality, rng: np.random.Generator, constraints: StateConstraints,
               symmetric_measurements: bool = True, max_rounds: int = 200, tol: float = 1e-7,
               optimize_state: bool = True, basis: np.ndarray | None = None,
               settings: conic.SolverSettings | None = None) -> SeesawRun:
    if symmetric_measurements:
        m = MeasurementSet.symmetric(random_projective(rng, ineq.settings), ineq.parties)
    else:
        m = MeasurementSet(tuple(tuple(random_projective(rng, ineq.settings)) for _ in range(ineq.parties)))
    dims = m.dims()
    rho = DensityMatrix(np.eye(math.prod(dims)) / math.prod(dims), dims, psd_tol=0)
    value = quantum_value(ineq, rho, m)
    history = [value]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        before = value
        if optimize_state:
            new = seesaw_state(ineq, m, constraints, settings, basis)
            v = quantum_value(ineq, new, m)
            if v > value:
                rho, value = new, v
            history.append(value)
        if symmetric_measurements:
            m, value = _symmetric_step(ineq, rho, m)
            history.append(value)
        else:
            for k in range(ineq.parties):
                cand = m.replace(k, seesaw_measurements(rho, ineq, k, m))
                v = quantum_value(ineq, rho, cand)
                if v >= value:
                    m, value = cand, v
                history.append(value)
        if value - before < tol:
            break
    return SeesawRun(value, rho, m, history, rounds)


def seesaw(ineq: BellInequality, restarts: int = 20, seed: int = 7,
           constraints: StateConstraints = StateConstraints(), symmetric_measurements: bool = True,
           max_rounds: int = 200, tol: float = 1e-7, optimize_state: bool = True) -> SeesawResult:
    """Best of ``restarts`` seeded see-saw runs; the value is recomputed from correlations.

    No global optimality is implied.
    """
    if restarts < 1:
        raise BellError("restarts must be at least 1")
    basis = None
    if optimize_state and not constraints.empty:
        basis = invariant_basis(tuple([2] * ineq.parties), constraints)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]
    runs = [seesaw_run(ineq, r, constraints, symmetric_measurements, max_rounds, tol,
                       optimize_state, basis) for r in rngs]
    best = max(runs, key=lambda r: r.value)
    value = bell_value(ineq, correlations(best.rho, best.m))
    return SeesawResult(value, best.rho, best.m, runs)
