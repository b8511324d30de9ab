"""Local hidden-state models for a qubit party measured with arbitrary POVMs.

A finite set of qubit POVMs (the polytope) is shrunk against white-ish
noise: if every noisy POVM of the continuum is a convex mixture of polytope
POVMs (shrinking factor ``eta``), then an LHS model for the polytope on a
suitably "unshrunk" operator chi yields an LHS model for all POVMs on the
target state.  This module builds the polytope, reduces its deterministic
strategies, computes shrinking factors by linear programming and solves the
LHS construction SDP with a certificate that can be rechecked without the
solver.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize, nnls

from . import conic, hermlin
from .hermlin import HermitianOperator, Operator, Povm
from .states import DensityMatrix, StateError

CERT_TOL = 1e-7
NEAR_OPTIMAL = 1e-6
PHI = (1 + math.sqrt(5)) / 2


class LhsError(ValueError):
    pass


class UnsupportedPolytope(LhsError):
    pass


class SolverFailure(RuntimeError):
    pass


# -- polytopes --------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementPolytope:
    povms: tuple[Povm, ...]
    axes: np.ndarray
    n_projective: int
    n_trivial: int
    name: str = "custom"

    def __post_init__(self):
        for x, m in enumerate(self.povms):
            if m.dim != 2:
                raise LhsError(f"POVM {x} is not a qubit POVM")
            if any(np.linalg.eigvalsh(e)[0] < -1e-12 for e in m):
                raise LhsError(f"POVM {x} has a non-PSD element")
            if np.abs(sum(m.elements) - np.eye(2)).max() > 1e-12:
                raise LhsError(f"POVM {x} is not complete")

    def __len__(self):
        return len(self.povms)

    @property
    def slots(self) -> int:
        return max(len(m) for m in self.povms)

    def bloch_table(self) -> np.ndarray:
        """Shape (N, slots, 4): Bloch rows of every element, zero-padded."""
        out = np.zeros((len(self), self.slots, 4))
        for x, m in enumerate(self.povms):
            out[x, : len(m)] = m.bloch()
        return out

    def digest(self) -> str:
        return hashlib.sha256(np.round(self.bloch_table(), 12).tobytes()).hexdigest()[:16]


def _canonical_axis(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    for c in v:
        if abs(c) > 1e-9:
            return v if c > 0 else -v
    raise LhsError("zero axis")


def relabelling_polytope(axes, slots: int = 4, name: str = "custom") -> MeasurementPolytope:
    """All placements of {P+, P-} into ``slots`` outcomes per axis, plus all placements of the identity."""
    axes = np.array([_canonical_axis(a) for a in axes])
    eye, zero = np.eye(2), np.zeros((2, 2))
    povms = []
    for v in axes:
        plus = (eye + hermlin.bloch_operator(v)) / 2
        minus = eye - plus
        for i, j in itertools.permutations(range(slots), 2):
            els = [zero] * slots
            els[i], els[j] = plus, minus
            povms.append(Povm(els, tol=1e-12))
    n_proj = len(povms)
    for i in range(slots):
        els = [zero] * slots
        els[i] = eye
        povms.append(Povm(els, tol=1e-12))
    return MeasurementPolytope(tuple(povms), axes, n_proj, slots, name)


def icosahedron_vertices() -> np.ndarray:
    verts = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            verts += [(0, s1, s2 * PHI), (s1, s2 * PHI, 0), (s2 * PHI, 0, s1)]
    verts = np.array(verts, dtype=float)
    return verts / np.linalg.norm(verts, axis=1)[:, None]


def icosahedron_axes() -> np.ndarray:
    axes = []
    for v in icosahedron_vertices():
        c = _canonical_axis(v)
        if not any(np.allclose(c, a) for a in axes):
            axes.append(c)
    return np.array(axes)


def icosahedron_polytope() -> MeasurementPolytope:
    """76 POVMs: 6 axes x 12 relabellings of {P+, P-, 0, 0} plus 4 of {1, 0, 0, 0}."""
    return relabelling_polytope(icosahedron_axes(), 4, "icosa76")


def octahedron_polytope() -> MeasurementPolytope:
    return relabelling_polytope(np.eye(3), 4, "octa40")


POLYTOPES = {"icosa76": icosahedron_polytope, "octa40": octahedron_polytope}


def polytope(name: str) -> MeasurementPolytope:
    try:
        return POLYTOPES[name]()
    except KeyError:
        raise LhsError(f"unknown polytope {name!r}; choose from {sorted(POLYTOPES)}") from None


# -- deterministic strategies -----------------------------------------------


@dataclass(frozen=True)
class DeterministicStrategySet:
    """Strategies indexed by one sign per axis.

    ``responses[l, x]`` is the outcome strategy ``l`` gives for POVM ``x``.
    """

    signs: np.ndarray
    responses: np.ndarray
    axes: np.ndarray
    structure: tuple
    notes: tuple[str, ...]

    def __len__(self):
        return len(self.signs)


def _classify(m: Povm, axes: list[np.ndarray], tol: float = 1e-9):
    roles = []
    for a, e in enumerate(m):
        w, *vec = hermlin.bloch_coordinates(e)
        vec = np.array(vec)
        if abs(w) < tol and np.linalg.norm(vec) < tol:
            continue
        if abs(w - 1) < tol and np.linalg.norm(vec) < tol:
            roles.append(("identity", a, None))
        elif abs(w - 0.5) < tol and abs(np.linalg.norm(vec) - 0.5) < tol:
            roles.append(("projector", a, 2 * vec))
        else:
            raise UnsupportedPolytope("element is neither zero, identity nor a rank-1 projector")
    if len(roles) == 1 and roles[0][0] == "identity":
        return ("trivial", roles[0][1])
    if len(roles) == 2 and all(r[0] == "projector" for r in roles):
        (_, i, u), (_, j, v) = roles
        if np.abs(u + v).max() > tol:
            raise UnsupportedPolytope("projectors are not complementary")
        c = _canonical_axis(u)
        k = next((k for k, ax in enumerate(axes) if np.abs(ax - c).max() < tol), None)
        if k is None:
            axes.append(c)
            k = len(axes) - 1
        plus, minus = (i, j) if np.abs(u - c).max() < tol else (j, i)
        return ("projective", k, plus, minus)
    raise UnsupportedPolytope("POVM is not a relabelled projective or trivial measurement")


def reduce_strategies(p: MeasurementPolytope) -> DeterministicStrategySet:
    """Deterministic strategies that can carry weight in an LHS model for ``p``.

    A strategy answering an outcome whose element is zero must have
    sigma_lambda = 0, so it is dropped.  The remaining answers of every
    projective POVM depend only on which of P+/P- is chosen; grouping the
    raw strategies by that choice for one representative per axis gives an
    equivalent model indexed by one sign per axis.  Trivial POVMs always
    answer their identity slot.
    """
    axes: list[np.ndarray] = []
    structure = tuple(_classify(m, axes) for m in p.povms)
    n_axes = len(axes)
    patterns = list(itertools.product((1, -1), repeat=n_axes))
    signs = np.array(patterns, dtype=int).reshape(len(patterns), n_axes)
    responses = np.zeros((len(signs), len(p)), dtype=int)
    for x, st in enumerate(structure):
        if st[0] == "trivial":
            responses[:, x] = st[1]
        else:
            _, k, plus, minus = st
            responses[:, x] = np.where(signs[:, k] == 1, plus, minus)
    slots = p.slots
    notes = (
        f"raw strategies: {slots}^{len(p)}",
        "strategies answering a zero element force sigma_lambda = 0 and are eliminated",
        f"projective answers grouped per axis: 2^{n_axes} = {len(signs)} sign patterns",
        "trivial POVMs answer their identity slot",
    )
    return DeterministicStrategySet(signs, responses, np.array(axes).reshape(n_axes, 3), structure, notes)


# -- noise ------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    eta: float
    xi: np.ndarray = field(default_factory=lambda: np.eye(2) / 2)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise LhsError(f"eta must lie in [0, 1], got {self.eta}")
        xi = np.array(self.xi, dtype=complex)
        try:
            DensityMatrix(xi, psd_tol=1e-12)
        except StateError as exc:
            raise LhsError(f"xi is not a qubit state: {exc}") from exc
        object.__setattr__(self, "xi", xi)

    def to_json(self) -> dict:
        return {"eta": self.eta, "xi": hermlin.to_json(Operator(self.xi))}


def noisy_element(m, eta: float, xi) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return eta * m + (1 - eta) * np.trace(xi @ m) * np.eye(m.shape[0])


def noisy_povm(m: Povm, noise: NoiseModel) -> Povm:
    return Povm([noisy_element(e, noise.eta, noise.xi) for e in m])


def assemblage(rho: Operator, povms: Sequence[Povm], party: int = 0) -> list[list[np.ndarray]]:
    """sigma_{a|x} = Tr_party[(M_{a|x} on ``party``) rho] for every POVM x and outcome a."""
    if not 0 <= party < rho.nsys:
        raise hermlin.IndexOutOfRange(f"party {party} out of range for dims {rho.dims}")
    rest = [k for k in range(rho.nsys) if k != party]
    out = []
    for m in povms:
        row = []
        for e in m:
            factors = [e if k == party else np.eye(d) for k, d in enumerate(rho.dims)]
            full = hermlin.kron(*[Operator(f) for f in factors]).data
            row.append(hermlin.partial_trace(Operator(full @ rho.data, rho.dims), rest).data)
        out.append(row)
    return out


def _ptrace_first(m: np.ndarray, d_first: int = 2) -> np.ndarray:
    n = m.shape[0] // d_first
    return np.trace(m.reshape(d_first, n, d_first, n), axis1=0, axis2=2)


def _steer_first(e: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """Tr_A[(E (x) 1) chi] for a qubit A in front."""
    n = chi.shape[0] // 2
    return _ptrace_first(np.kron(e, np.eye(n)) @ chi)


def _pt_second_qubit(m: np.ndarray) -> np.ndarray:
    return m.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


# -- shrinking factor -------------------------------------------------------


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    phi = math.pi * (3 - math.sqrt(5)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def povm_from_directions(dirs) -> tuple[np.ndarray, float]:
    """Nonnegative weights alpha with sum alpha = 1, sum alpha n = 0 (NNLS), and the residual."""
    dirs = np.asarray(dirs, dtype=float)
    A = np.vstack([np.ones(len(dirs)), dirs.T])
    alpha, res = nnls(A, np.array([1.0, 0, 0, 0]))
    return alpha, res


def rank_one_povm(alpha, dirs) -> Povm:
    """Elements alpha_a (1 + n_a . sigma)."""
    return Povm([a * (np.eye(2) + hermlin.bloch_operator(n)) for a, n in zip(alpha, dirs)])


class ShrinkLp:
    """Largest eta with noisy(M, eta) in the convex hull of the polytope, by one LP per M."""

    def __init__(self, p: MeasurementPolytope, xi=None):
        self.p = p
        self.xi = np.eye(2) / 2 if xi is None else np.asarray(xi, dtype=complex)
        table = p.bloch_table()  # (N, slots, 4)
        self.slots = table.shape[1]
        self.hull = table.reshape(len(p), -1).T  # (slots*4, N)
        self.evaluations = 0

    def eta(self, m) -> float:
        rows = m.bloch() if isinstance(m, Povm) else np.asarray(m, dtype=float)
        if len(rows) > self.slots:
            raise LhsError(f"sample has {len(rows)} outcomes, polytope only {self.slots}")
        tgt = np.zeros((self.slots, 4))
        tgt[: len(rows)] = rows
        t = np.array([np.trace(self.xi @ hermlin.from_bloch(r)).real for r in tgt])
        direction = tgt.copy()
        direction[:, 0] -= t
        offset = np.zeros_like(tgt)
        offset[:, 0] = t
        n = self.hull.shape[1]
        A_eq = np.hstack([self.hull, -direction.reshape(-1, 1)])
        A_eq = np.vstack([A_eq, np.r_[np.ones(n), 0.0]])
        b_eq = np.r_[offset.reshape(-1), 1.0]
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n + [(0, 1)], method="highs")
        self.evaluations += 1
        if res.status != 0:
            # eta = 0 is always feasible when the polytope contains a trivial POVM
            return 0.0
        return float(res.x[-1])


def _frame(n):
    ref = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(n, ref)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def c3v_directions(apex, theta, azimuth) -> np.ndarray:
    """Apex plus three directions at polar angle ``theta`` from it, 120 degrees apart."""
    e1, e2 = _frame(apex)
    out = [apex]
    for k in range(3):
        ph = azimuth + 2 * math.pi * k / 3
        out.append(math.cos(theta) * apex + math.sin(theta) * (math.cos(ph) * e1 + math.sin(ph) * e2))
    return np.array(out)


POLAR_ANGLES_DEG = (90.0, 100.0, 105.0, 110.0, 120.0)
AZIMUTHS_DEG = (0.0, 40.0, 80.0)


def sample_grid(resolution: int = 2000, kind: str = "povm",
                polar_angles=POLAR_ANGLES_DEG, azimuths=AZIMUTHS_DEG) -> list[Povm]:
    """Extremal qubit POVMs seeded by a Fibonacci grid of Bloch directions.

    ``kind='projective'``: {n, -n} for every grid direction.  ``kind='povm'``
    adds, for every grid direction as apex, trines (polar angle 90 degrees)
    and four-outcome C3v tetrads at the listed polar angles and azimuths.
    """
    dirs = fibonacci_sphere(resolution)
    out = [rank_one_povm([0.5, 0.5], [n, -n]) for n in dirs]
    if kind == "projective":
        return out
    if kind != "povm":
        raise LhsError(f"unknown sample kind {kind!r}")
    for n in dirs:
        for th in polar_angles:
            for az in azimuths:
                d = c3v_directions(n, math.radians(th), math.radians(az))
                if abs(th - 90.0) < 1e-12:
                    d = d[1:]
                alpha, res = povm_from_directions(d)
                if res > 1e-10:
                    continue
                keep = alpha > 1e-12
                out.append(rank_one_povm(alpha[keep], d[keep]))
    return out


@dataclass
class ShrinkResult:
    eta_grid: float
    eta_refined: float
    worst: Povm
    n_samples: int
    evaluations: int
    resolution: int
    kind: str

    def to_json(self) -> dict:
        return {"eta_grid": self.eta_grid, "eta_refined": self.eta_refined,
                "worst_povm": self.worst.to_json(), "n_samples": self.n_samples,
                "lp_evaluations": self.evaluations, "resolution": self.resolution, "kind": self.kind}


def _angles_to_dirs(params):
    th, ph = params[0::2], params[1::2]
    return np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def _dirs_to_angles(dirs):
    out = []
    for x, y, z in dirs:
        out += [math.acos(max(-1.0, min(1.0, z))), math.atan2(y, x)]
    return np.array(out)


def refine_worst(lp: ShrinkLp, start: Povm, max_evals: int = 1500) -> tuple[float, Povm]:
    """Nelder-Mead over rank-one POVM directions, starting from ``start``.

    Off-grid, so the result estimates the continuum minimum rather than
    certifying it.
    """
    rows = start.bloch()
    dirs = rows[:, 1:] / rows[:, [0]]
    while len(dirs) < min(4, lp.slots):
        dirs = np.vstack([dirs, dirs[-1]])

    def value(params):
        d = _angles_to_dirs(params)
        alpha, res = povm_from_directions(d)
        if res > 1e-9:
            return 1.0 + res
        keep = alpha > 1e-12
        return lp.eta(rank_one_povm(alpha[keep], d[keep]))

    x0 = _dirs_to_angles(dirs)
    res = minimize(value, x0, method="Nelder-Mead",
                   options={"maxfev": max_evals, "xatol": 1e-6, "fatol": 1e-9})
    d = _angles_to_dirs(res.x)
    alpha, _ = povm_from_directions(d)
    keep = alpha > 1e-12
    return float(res.fun), rank_one_povm(alpha[keep], d[keep])


def shrinking_factor(p: MeasurementPolytope, xi=None, resolution: int = 2000, kind: str = "povm",
                     samples: Sequence[Povm] | None = None, refine: bool = True,
                     refine_starts: int = 3) -> ShrinkResult:
    """Smallest LP shrinking factor over a sample of extremal POVMs.

    ``eta_grid`` is exact (up to LP tolerance) as the minimum over the
    sampled POVMs; ``eta_refined`` additionally minimises off the grid
    and is an estimate for the full continuum.
    """
    lp = ShrinkLp(p, xi)
    samples = list(samples) if samples is not None else sample_grid(resolution, kind)
    if not samples:
        raise LhsError("no samples to evaluate")
    etas = np.array([lp.eta(m) for m in samples])
    order = np.argsort(etas, kind="stable")
    eta_grid = float(etas[order[0]])
    worst = samples[order[0]]
    eta_ref, worst_ref = eta_grid, worst
    if refine and kind == "povm":
        for idx in order[:refine_starts]:
            val, m = refine_worst(lp, samples[idx])
            if val < eta_ref:
                eta_ref, worst_ref = val, m
    return ShrinkResult(eta_grid, eta_ref, worst_ref if eta_ref < eta_grid else worst,
                        len(samples), lp.evaluations, resolution, kind)


# -- LHS construction -------------------------------------------------------


@dataclass
class LhsCertificate:
    chi: np.ndarray
    sigmas: list[np.ndarray]
    noise: NoiseModel
    q_star: float
    target: np.ndarray
    polytope: MeasurementPolytope
    strategies: DeterministicStrategySet
    solver: dict = field(default_factory=dict)
    report: conic.VerificationReport | None = None

    def mixed_target(self, q: float | None = None) -> np.ndarray:
        q = self.q_star if q is None else q
        n = self.target.shape[0]
        return q * self.target + (1 - q) * np.eye(n) / n

    def to_json(self) -> dict:
        op = lambda m: hermlin.to_json(Operator(m))  # noqa: E731
        return {
            "polytope": {"name": self.polytope.name, "hash": self.polytope.digest(),
                         "size": len(self.polytope)},
            "strategy_count": len(self.strategies),
            "reduction": list(self.strategies.notes),
            "eta": self.noise.eta,
            "xi": op(self.noise.xi),
            "q_star": self.q_star,
            "target": op(self.target),
            "chi": op(self.chi),
            "sigmas": [op(s) for s in self.sigmas],
            "solver": self.solver,
            "verification": self.report.to_json() if self.report else None,
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "LhsCertificate":
        if isinstance(obj, str):
            obj = json.loads(obj)
        p = polytope(obj["polytope"]["name"])
        if p.digest() != obj["polytope"]["hash"]:
            raise LhsError("polytope hash does not match the named polytope")
        strategies = reduce_strategies(p)
        if len(strategies) != obj["strategy_count"]:
            raise LhsError("strategy count does not match the polytope")
        sig = [hermlin.from_json(s).data for s in obj["sigmas"]]
        noise = NoiseModel(float(obj["eta"]), hermlin.from_json(obj["xi"]).data)
        return cls(hermlin.from_json(obj["chi"]).data, sig, noise, float(obj["q_star"]),
                   hermlin.from_json(obj["target"]).data, p, strategies, obj.get("solver", {}))


def _affine_chi(target: np.ndarray, noise: NoiseModel):
    """chi(q) = chi0 + q chi1 solving eta chi + (1-eta) xi (x) Tr_A chi = q target + (1-q) 1/d."""
    n = target.shape[0]
    white = np.eye(n) / n

    def solve_for(t):
        bc = _ptrace_first(t)
        return (t - (1 - noise.eta) * np.kron(noise.xi, bc)) / noise.eta

    chi0 = solve_for(white)
    chi1 = solve_for(target) - chi0
    return chi0, chi1


def construct_lhs(target, p: MeasurementPolytope | None = None, noise: NoiseModel | None = None,
                  settings: conic.SolverSettings | None = None,
                  interior_weight: float = 1e-4) -> tuple[float, LhsCertificate]:
    """Largest q in [0, 1] for which q target + (1-q) 1/8 has an LHS model certified via ``p``.

    chi is eliminated through the mixing identity, so the SDP variables are
    the hidden states sigma_lambda, their partial transposes and q.  chi is
    not required to be PSD: only the assemblages it generates must be.

    The solver output is repaired to satisfy the equalities exactly.  If the
    repaired certificate fails verification and xi is maximally mixed, it is
    mixed with weight ``interior_weight`` into the uniform q = 0 model first,
    which lowers the returned q* by that fraction.  The returned certificate
    always carries its verification report; check ``report.passed``.
    """
    p = p or icosahedron_polytope()
    noise = noise or NoiseModel(0.673)
    if noise.eta <= 0:
        raise LhsError("eta must be positive")
    tmat = np.asarray(target.data if isinstance(target, Operator) else target, dtype=complex)
    if tmat.shape != (8, 8):
        raise LhsError("target must be a three-qubit operator")
    strategies = reduce_strategies(p)
    chi0, chi1 = _affine_chi(tmat, noise)

    model = conic.Model()
    sig = [model.psd(4) for _ in range(len(strategies))]
    tau = [model.psd(4) for _ in range(len(strategies))]
    qs = model.nonneg(2)  # (q, 1 - q)
    model.add_eq([(qs, np.array([1.0, 1.0]))], 1.0)

    def q_map(c):
        return lambda x: x[0] * c

    for s, t in zip(sig, tau):
        model.add_hermitian_eq([(s, _pt_second_qubit), (t, lambda x: -x)], np.zeros((4, 4)))
    ident = lambda x: x  # noqa: E731
    bc0, bc1 = _ptrace_first(chi0), _ptrace_first(chi1)
    model.add_hermitian_eq([(s, ident) for s in sig] + [(qs, q_map(-bc1))], bc0)
    eye = np.eye(2)
    for k, ax in enumerate(strategies.axes):
        plus = (eye + hermlin.bloch_operator(ax)) / 2
        c0, c1 = _steer_first(plus, chi0), _steer_first(plus, chi1)
        terms = [(s, ident) for s, sg in zip(sig, strategies.signs) if sg[k] == 1]
        model.add_hermitian_eq(terms + [(qs, q_map(-c1))], c0)
    model.minimize([(qs, np.array([-1.0, 0.0]))])
    prob = model.build()
    sol = conic.solve(prob, settings or conic.SolverSettings())
    if sol.status is conic.Status.PRIMAL_INFEASIBLE:
        raise SolverFailure("LHS SDP is infeasible even at q = 0")
    if not sol.optimal and not (sol.gap <= NEAR_OPTIMAL and max(sol.residuals) <= NEAR_OPTIMAL):
        raise SolverFailure(f"LHS SDP ended with status {sol.status.value} (gap {sol.gap:.2e})")
    q_sol = float(np.clip(model.value(sol, qs)[0], 0.0, 1.0))
    raw = [model.value(sol, s) for s in sig]
    uniform = _uniform_hidden_states(strategies, noise)
    weights = [0.0] + ([interior_weight] if uniform is not None and interior_weight > 0 else [])
    for w in weights:
        # w > 0 pulls towards the strictly positive q = 0 model so the exact
        # repair cannot push a hidden state out of the PSD/PPT cones
        sigmas = raw if w == 0 else [(1 - w) * a + w * b for a, b in zip(raw, uniform)]
        q = (1 - w) * q_sol
        chi = chi0 + q * chi1
        sigmas = repair_hidden_states(sigmas, chi, strategies)
        cert = LhsCertificate(chi, sigmas, noise, q, tmat, p, strategies,
                              solver={"status": sol.status.value, "iterations": sol.iterations,
                                      "gap": sol.gap, "constraints": prob.m, "interior_weight": w})
        cert.report = verify_certificate(cert)
        if cert.report.passed:
            break
    return q, cert


def _uniform_hidden_states(strategies: DeterministicStrategySet, noise: NoiseModel):
    """Hidden states of the white-noise target when xi is maximally mixed: all equal to 1/(4N)."""
    if np.abs(noise.xi - np.eye(2) / 2).max() > 1e-15:
        return None
    n = len(strategies)
    return [np.eye(4, dtype=complex) / (4 * n) for _ in range(n)]


def _constraint_residuals(sigmas, chi, strategies) -> list[np.ndarray]:
    out = [sum(sigmas) - _ptrace_first(chi)]
    eye = np.eye(2)
    for k, ax in enumerate(strategies.axes):
        plus = (eye + hermlin.bloch_operator(ax)) / 2
        out.append(sum(s for s, sg in zip(sigmas, strategies.signs) if sg[k] == 1) - _steer_first(plus, chi))
    return out


def repair_hidden_states(sigmas, chi, strategies) -> list[np.ndarray]:
    """Minimum-norm Hermitian correction making every assemblage equality exact.

    The equalities are linear in the hidden states, so this is one least
    squares solve; the correction is of the order of the solver residual.
    """
    basis = hermlin.hermitian_basis(4)
    n = len(sigmas)
    n_axes = len(strategies.axes)
    rows = (1 + n_axes) * 16
    A = np.zeros((rows, n * 16))
    for lam in range(n):
        blocks = [True] + [strategies.signs[lam, k] == 1 for k in range(n_axes)]
        for r, on in enumerate(blocks):
            if on:
                A[r * 16:(r + 1) * 16, lam * 16:(lam + 1) * 16] = np.eye(16)
    res = _constraint_residuals(sigmas, chi, strategies)
    b = np.concatenate([np.einsum("rij,ji->r", basis, h).real for h in res])
    delta, *_ = np.linalg.lstsq(A, -b, rcond=None)
    delta = delta.reshape(n, 16)
    out = []
    for s, d in zip(sigmas, delta):
        fixed = s + np.tensordot(d, basis, axes=1)
        out.append((fixed + fixed.conj().T) / 2)
    return out


def verify_certificate(c: LhsCertificate, tol: float = CERT_TOL, n_random: int = 100,
                       seed: int = 0) -> conic.VerificationReport:
    """Recheck every defining identity of ``c`` from its matrices alone."""
    findings, metrics = [], {}
    eta, xi = c.noise.eta, c.noise.xi
    chi = np.asarray(c.chi)
    if len(c.sigmas) != len(c.strategies):
        findings.append("hidden-state count differs from strategy count")
    # hidden states: PSD and PPT
    min_eig, min_pt = math.inf, math.inf
    for s in c.sigmas:
        h = HermitianOperator(s)
        min_eig = min(min_eig, hermlin.min_eigenvalue(h))
        min_pt = min(min_pt, hermlin.min_eigenvalue(HermitianOperator(_pt_second_qubit(h.data))))
    metrics["min_sigma_eigenvalue"], metrics["min_sigma_pt_eigenvalue"] = min_eig, min_pt
    if min_eig < -tol:
        findings.append(f"hidden state not PSD (min eigenvalue {min_eig:.3e})")
    if min_pt < -tol:
        findings.append(f"hidden state not PPT (min eigenvalue {min_pt:.3e})")
    # no-signalling marginal
    bc = _ptrace_first(chi)
    dev = float(np.abs(sum(c.sigmas) - bc).max())
    metrics["marginal_residual"] = dev
    if dev > tol:
        findings.append(f"sum of hidden states differs from Tr_A chi by {dev:.3e}")
    # assemblage equalities for every POVM of the polytope
    worst = 0.0
    for x, m in enumerate(c.polytope.povms):
        for a, e in enumerate(m):
            lhs_side = _steer_first(e, chi)
            rhs_side = sum((s for s, r in zip(c.sigmas, c.strategies.responses[:, x]) if r == a),
                           np.zeros((4, 4), dtype=complex))
            worst = max(worst, float(np.abs(lhs_side - rhs_side).max()))
    metrics["assemblage_residual"] = worst
    if worst > tol:
        findings.append(f"assemblage equality violated by {worst:.3e}")
    # mixing identity
    if not 0.0 <= c.q_star <= 1.0:
        findings.append(f"q* = {c.q_star} outside [0, 1]")
    mixed = c.mixed_target()
    lhs_mix = eta * chi + (1 - eta) * np.kron(xi, bc)
    dev = float(np.abs(lhs_mix - mixed).max())
    metrics["mixing_residual"] = dev
    if dev > tol:
        findings.append(f"mixing identity violated by {dev:.3e}")
    # noisy-measurement equivalence on random POVM elements
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        e = g @ g.conj().T
        e /= np.linalg.eigvalsh(e)[-1]
        lhs_side = _steer_first(noisy_element(e, eta, xi), chi)
        rhs_side = _steer_first(e, mixed)
        worst = max(worst, float(np.abs(lhs_side - rhs_side).max()))
    metrics["noisy_equivalence_residual"] = worst
    if worst > tol:
        findings.append(f"noisy-measurement equivalence violated by {worst:.3e}")
    metrics["q_star"] = c.q_star
    return conic.VerificationReport(not findings, findings, metrics)
