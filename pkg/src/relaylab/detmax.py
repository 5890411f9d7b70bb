"""Barrier interior-point solver for log-det hypograph programs.

Problems handled here have the form::

    maximize    t
    subject to  t_j <= sum_k w_k * logdet(I + (1/w_k) * sum_v G_kv X_v G_kv^H)
                sum_v Re tr(W_v X_v) + c^T s <= b
                F_0 + sum_v a_v G_v X_v G_v^H  >= 0      (PSD)
                X_v >= 0,  s_i >= lower_i

where the X_v are Hermitian matrix variables, s are scalar variables and
each w_k is either the constant 1 or a scalar variable (a perspective
term, concave jointly in (X, w)).

The method is the classical barrier scheme: for mu = 1, 10, 100, ... the
centering problem ``minimize -mu * t + phi(x)`` is solved by Newton's
method with backtracking line search, where ``phi`` sums ``-log(slack)``
over scalar constraints and ``-logdet`` over matrix constraints.  It stops
once ``m / mu < tol`` with ``m`` the total barrier degree.  Hermitian
variables are stored by their n^2 real coordinates (diagonal, real parts,
imaginary parts of the strict upper triangle) so every Newton system is
real and symmetric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

log = logging.getLogger(__name__)

ALPHA = 0.01
BETA = 0.5
MU0 = 1.0
MU_FACTOR = 10.0
NEWTON_EPS = 1e-9
MAX_NEWTON_PER_STAGE = 100
MAX_NEWTON_TOTAL = 1000
REG_START = 1e-12
REG_MAX = 1e-6


class SolverError(RuntimeError):
    pass


class InfeasibleStart(SolverError):
    """The initial point is not strictly feasible."""


class NumericalBreakdown(SolverError):
    """The Newton system stayed singular after regularization."""


class MaxIterations(SolverError):
    """Iteration budget exhausted; ``solution`` holds the best iterate."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


# -- problem description --------------------------------------------------------

@dataclass(frozen=True)
class MatrixVar:
    name: str
    dim: int


@dataclass(frozen=True)
class ScalarVar:
    name: str
    lower: Optional[float] = 0.0  # None: unbounded


@dataclass
class LogDetTerm:
    """``w * logdet(I + (1/w) * sum G X G^H)`` with ``w`` a scalar variable, or
    ``logdet(I + sum G X G^H)`` when ``bandwidth`` is None."""

    factors: list[tuple[str, np.ndarray]]
    bandwidth: Optional[str] = None


@dataclass
class Hypograph:
    target: str
    terms: list[LogDetTerm]
    label: str = ""


@dataclass
class LinearConstraint:
    """``sum Re tr(W X) + sum c * s <= bound``."""

    traces: list[tuple[str, np.ndarray]] = field(default_factory=list)
    scalars: list[tuple[str, float]] = field(default_factory=list)
    bound: float = 0.0
    label: str = ""


@dataclass
class PsdConstraint:
    """``const + sum coef * G X G^H  >= 0``."""

    parts: list[tuple[str, np.ndarray, float]]
    const: Optional[np.ndarray] = None
    label: str = ""


@dataclass
class DetMaxProblem:
    matrix_vars: list[MatrixVar]
    scalar_vars: list[ScalarVar]
    hypographs: list[Hypograph]
    objective: str
    linear: list[LinearConstraint] = field(default_factory=list)
    psd: list[PsdConstraint] = field(default_factory=list)
    initial: dict = field(default_factory=dict)

    def matrix_dims(self) -> dict[str, int]:
        return {v.name: v.dim for v in self.matrix_vars}

    def validate(self) -> None:
        mats = self.matrix_dims()
        scal = {v.name for v in self.scalar_vars}
        if len(mats) != len(self.matrix_vars) or len(scal) != len(self.scalar_vars) or set(mats) & scal:
            raise ValueError("duplicate variable names")
        if self.objective not in scal:
            raise ValueError(f"objective {self.objective!r} is not a scalar variable")

        def check_factor(name, g, cols_only=False):
            if name not in mats:
                raise ValueError(f"unknown matrix variable {name!r}")
            g = np.asarray(g)
            if g.ndim != 2 or g.shape[1] != mats[name]:
                raise ValueError(f"factor for {name!r} has shape {g.shape}, expected (*, {mats[name]})")
            return g.shape[0]

        for h in self.hypographs:
            if h.target not in scal:
                raise ValueError(f"hypograph target {h.target!r} is not a scalar variable")
            for term in h.terms:
                if term.bandwidth is not None and term.bandwidth not in scal:
                    raise ValueError(f"unknown bandwidth variable {term.bandwidth!r}")
                rows = {check_factor(n, g) for n, g in term.factors}
                if len(rows) != 1:
                    raise ValueError("log-det factors disagree on output dimension")
        for c in self.linear:
            for n, w in c.traces:
                if n not in mats or np.shape(w) != (mats[n], mats[n]):
                    raise ValueError(f"bad trace weight for {n!r}")
            for n, _ in c.scalars:
                if n not in scal:
                    raise ValueError(f"unknown scalar {n!r}")
        for c in self.psd:
            rows = {check_factor(n, g) for n, g, _ in c.parts}
            if c.const is not None:
                rows.add(np.shape(c.const)[0])
            if len(rows) != 1:
                raise ValueError("PSD constraint parts disagree on dimension")

    def dump(self) -> str:
        """Human-readable listing, one declaration or constraint per line."""

        def fac(n, g):
            g = np.asarray(g)
            return f"G[{g.shape[0]}x{g.shape[1]}] {n} G^H"

        lines = []
        for v in self.matrix_vars:
            lines.append(f"var hermitian {v.name} {v.dim}")
        for v in self.scalar_vars:
            lines.append(f"var scalar {v.name} " + ("free" if v.lower is None else f">= {v.lower:g}"))
        lines.append(f"maximize {self.objective}")
        for h in self.hypographs:
            terms = []
            for t in h.terms:
                inner = " + ".join(fac(n, g) for n, g in t.factors)
                terms.append(f"{t.bandwidth} * logdet(I + ({inner}) / {t.bandwidth})" if t.bandwidth
                             else f"logdet(I + {inner})")
            lines.append(f"hyp {h.label or '-'}: {h.target} <= " + " + ".join(terms))
        for c in self.linear:
            parts = [f"tr(W[{np.shape(w)[0]}] {n})" for n, w in c.traces]
            parts += [f"{a:g}*{n}" for n, a in c.scalars]
            lines.append(f"lin {c.label or '-'}: " + " + ".join(parts) + f" <= {c.bound:.17g}")
        for c in self.psd:
            parts = [f"{a:+g} {fac(n, g)}" for n, g, a in c.parts]
            const = "C + " if c.const is not None else ""
            lines.append(f"psd {c.label or '-'}: {const}" + " ".join(parts) + " >= 0")
        return "\n".join(lines) + "\n"


@dataclass
class Diagnostics:
    iterations: int
    stages: int
    mu: float
    gap: float
    newton_decrement: float
    kkt_residual: float
    converged: bool
    stage_objectives: list[float]
    regularization: float = 0.0


@dataclass
class DetMaxSolution:
    objective_value: float  # nats, min of the objective's hypograph right-hand sides
    values: dict
    diagnostics: Diagnostics

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged


# -- Hermitian coordinates --------------------------------------------------------

def hermitian_basis(n: int) -> np.ndarray:
    """Basis E_p (n^2, n, n) with X = sum x_p E_p."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for i in range(n):
        basis[k, i, i] = 1.0
        k += 1
    iu, ju = np.triu_indices(n, 1)
    for i, j in zip(iu, ju):
        basis[k, i, j] = basis[k, j, i] = 1.0
        k += 1
    for i, j in zip(iu, ju):
        basis[k, i, j] = 1j
        basis[k, j, i] = -1j
        k += 1
    return basis


def pack_hermitian(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    iu = np.triu_indices(x.shape[0], 1)
    return np.concatenate([np.real(np.diag(x)), np.real(x[iu]), np.imag(x[iu])])


def unpack_hermitian(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    x = np.zeros((n, n), dtype=complex)
    x[iu] = v[n:n + k] + 1j * v[n + k:]
    x = x + x.conj().T
    x[np.diag_indices(n)] = v[:n]
    return x


# -- compiled form ----------------------------------------------------------------

@dataclass
class _Affine:
    """S(x) = const + sum_p x[idx_p] * mats_p (Hermitian)."""

    idx: np.ndarray
    mats: np.ndarray
    const: np.ndarray

    def value(self, x):
        return self.const + np.tensordot(x[self.idx], self.mats, axes=1)


def _logdet_affine(aff: _Affine, x, order: int):
    """log det S(x) with gradient/Hessian w.r.t. x[idx]; None if S is not PD."""
    s = aff.value(x)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return None
    d = np.real(np.diag(chol))
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        return None
    ld = 2.0 * float(np.sum(np.log(d)))
    if not order:
        return ld, None, None
    linv = np.linalg.inv(chol)
    b = linv @ aff.mats @ linv.conj().T
    grad = np.real(np.einsum("kii->k", b))
    bf = b.reshape(b.shape[0], -1)
    hess = -np.real(bf @ bf.conj().T)
    return ld, grad, hess


@dataclass
class _Term:
    aff: _Affine
    w_pos: int  # position of the bandwidth inside aff.idx, -1 if constant
    rows: int

    def evaluate(self, x, order):
        r = _logdet_affine(self.aff, x, order)
        if r is None:
            return None
        h, gh, Hh = r
        if self.w_pos < 0:
            return h, gh, Hh
        w = x[self.aff.idx[self.w_pos]]
        if w <= 0:
            return None
        n = self.rows
        f = w * h - n * w * np.log(w)
        if not order:
            return f, None, None
        g = w * gh
        g[self.w_pos] += h - n * (np.log(w) + 1.0)
        H = w * Hh
        H[self.w_pos, :] += gh
        H[:, self.w_pos] += gh
        H[self.w_pos, self.w_pos] -= n / w
        return f, g, H


@dataclass
class _Hyp:
    target: int
    terms: list[_Term]


class CompiledProblem:
    """Index layout plus the barrier function of a DetMaxProblem."""

    def __init__(self, problem: DetMaxProblem):
        problem.validate()
        self.problem = problem
        self.offsets: dict[str, tuple[int, int]] = {}
        pos = 0
        self._basis = {}
        for v in problem.matrix_vars:
            self.offsets[v.name] = (pos, v.dim)
            pos += v.dim * v.dim
            if v.dim not in self._basis:
                self._basis[v.dim] = hermitian_basis(v.dim)
        self.scalar_index: dict[str, int] = {}
        for v in problem.scalar_vars:
            self.scalar_index[v.name] = pos
            pos += 1
        self.n = pos
        self.t_index = self.scalar_index[problem.objective]

        rows_a, rhs, self.linear_labels = [], [], []
        for c in problem.linear:
            a = np.zeros(self.n)
            for name, w in c.traces:
                off, dim = self.offsets[name]
                w = np.asarray(w, dtype=complex)
                # Re tr(W E_p) for each basis element
                a[off:off + dim * dim] += np.real(np.einsum("ij,kji->k", w, self._basis[dim]))
            for name, coef in c.scalars:
                a[self.scalar_index[name]] += coef
            rows_a.append(a)
            rhs.append(c.bound)
            self.linear_labels.append(c.label)
        for v in problem.scalar_vars:
            if v.lower is not None:
                a = np.zeros(self.n)
                a[self.scalar_index[v.name]] = -1.0
                rows_a.append(a)
                rhs.append(-v.lower)
                self.linear_labels.append(f"{v.name} >= {v.lower:g}")
        self.A = np.array(rows_a).reshape(len(rows_a), self.n)
        self.b = np.array(rhs, dtype=float)

        self.lmis: list[_Affine] = []
        self.lmi_labels: list[str] = []
        for v in problem.matrix_vars:
            off, dim = self.offsets[v.name]
            self.lmis.append(_Affine(np.arange(off, off + dim * dim), self._basis[dim].copy(),
                                     np.zeros((dim, dim), dtype=complex)))
            self.lmi_labels.append(f"{v.name} >= 0")
        for c in problem.psd:
            idx, mats = self._images([(n, g, a) for n, g, a in c.parts])
            dim = mats.shape[1]
            const = np.zeros((dim, dim), dtype=complex) if c.const is None else np.asarray(c.const, dtype=complex)
            self.lmis.append(_Affine(idx, mats, const))
            self.lmi_labels.append(c.label or "psd")

        self.hyps: list[_Hyp] = []
        for h in problem.hypographs:
            terms = []
            for t in h.terms:
                idx, mats = self._images([(n, g, 1.0) for n, g in t.factors])
                rows = mats.shape[1]
                eye = np.eye(rows, dtype=complex)
                if t.bandwidth is None:
                    aff = _Affine(idx, mats, eye)
                    w_pos = -1
                else:
                    aff = _Affine(np.append(idx, self.scalar_index[t.bandwidth]),
                                  np.concatenate([mats, eye[None]]), np.zeros_like(eye))
                    w_pos = len(idx)
                terms.append(_Term(aff, w_pos, rows))
            self.hyps.append(_Hyp(self.scalar_index[h.target], terms))

        # barrier degree: one per scalar inequality, dim per LMI
        self.degree = len(self.b) + len(self.hyps) + sum(l.const.shape[0] for l in self.lmis)

    def _images(self, parts):
        idx, mats = [], []
        for name, g, coef in parts:
            off, dim = self.offsets[name]
            g = np.asarray(g, dtype=complex)
            idx.append(np.arange(off, off + dim * dim))
            mats.append(coef * (g @ self._basis[dim] @ g.conj().T))
        return np.concatenate(idx), np.concatenate(mats)

    # packing ----------------------------------------------------------------
    def pack(self, values: dict) -> np.ndarray:
        x = np.zeros(self.n)
        for name, (off, dim) in self.offsets.items():
            x[off:off + dim * dim] = pack_hermitian(values[name])
        for name, i in self.scalar_index.items():
            x[i] = float(values[name])
        return x

    def unpack(self, x) -> dict:
        out = {}
        for name, (off, dim) in self.offsets.items():
            out[name] = unpack_hermitian(x[off:off + dim * dim], dim)
        for name, i in self.scalar_index.items():
            out[name] = float(x[i])
        return out

    # evaluation -------------------------------------------------------------
    def hypograph_values(self, x) -> list[float]:
        vals = []
        for h in self.hyps:
            total = 0.0
            for term in h.terms:
                r = term.evaluate(x, 0)
                if r is None:
                    return None
                total += r[0]
            vals.append(total)
        return vals

    def objective_value(self, x) -> float:
        vals = self.hypograph_values(x)
        return min(v for v, h in zip(vals, self.hyps) if h.target == self.t_index)

    def barrier(self, x, order: int = 2):
        """Barrier phi(x) with gradient and Hessian; None outside the domain."""
        n = self.n
        g = np.zeros(n) if order else None
        H = np.zeros((n, n)) if order else None
        slack = self.b - self.A @ x
        if np.any(slack <= 0):
            return None
        val = -float(np.sum(np.log(slack)))
        if order:
            inv = 1.0 / slack
            g += self.A.T @ inv
            H += (self.A.T * inv ** 2) @ self.A
        for lmi in self.lmis:
            r = _logdet_affine(lmi, x, order)
            if r is None:
                return None
            val -= r[0]
            if order:
                ix = lmi.idx
                g[ix] -= r[1]
                H[np.ix_(ix, ix)] -= r[2]
        for hyp in self.hyps:
            s = -x[hyp.target]
            if order:
                sg = np.zeros(n)
                sg[hyp.target] = -1.0
                sH = np.zeros((n, n))
            for term in hyp.terms:
                r = term.evaluate(x, order)
                if r is None:
                    return None
                s += r[0]
                if order:
                    ix = term.aff.idx
                    sg[ix] += r[1]
                    sH[np.ix_(ix, ix)] += r[2]
            if not s > 0:
                return None
            val -= np.log(s)
            if order:
                g -= sg / s
                H += np.outer(sg, sg) / s ** 2 - sH / s
        return val, g, H


# -- solver -----------------------------------------------------------------------

def _initial_point(cp: CompiledProblem) -> np.ndarray:
    p = cp.problem
    values = dict(p.initial)
    for v in p.matrix_vars:
        if v.name not in values:
            raise InfeasibleStart(f"no initial value for {v.name!r}")
    targets = {h.target for h in p.hypographs}
    for v in p.scalar_vars:
        if v.name not in values and v.name not in targets:
            values[v.name] = 1.0 if v.lower is not None else 0.0
    for t in targets:
        values.setdefault(t, 0.0)
    x = cp.pack(values)
    hv = cp.hypograph_values(x)
    if hv is None:
        raise InfeasibleStart("log-det terms undefined at the initial point")
    for name in targets:
        if name not in p.initial:
            i = cp.scalar_index[name]
            x[i] = min(v for v, h in zip(hv, cp.hyps) if h.target == i) - 1.0
    return x


def _newton_step(H, g):
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    reg = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(H + reg * scale * np.eye(len(g)))
            y = np.linalg.solve(chol, -g)
            dx = np.linalg.solve(chol.T, y)
            if np.all(np.isfinite(dx)):
                return dx, reg
        except np.linalg.LinAlgError:
            pass
        reg = REG_START if reg == 0.0 else reg * 10.0
        if reg > REG_MAX:
            raise NumericalBreakdown("Newton system singular after regularization")


def solve(problem: DetMaxProblem, tol: float = 1e-6) -> DetMaxSolution:
    """Maximize ``problem.objective`` to within ``tol`` nats of the optimum.

    Raises InfeasibleStart, NumericalBreakdown or MaxIterations (the latter
    carries the best iterate as ``exc.solution``).
    """
    cp = CompiledProblem(problem)
    x = _initial_point(cp)
    e_t = np.zeros(cp.n)
    e_t[cp.t_index] = 1.0
    if cp.barrier(x, 0) is None:
        raise InfeasibleStart("initial point is not strictly feasible:\n" + problem.dump())

    mu = MU0
    iters = 0
    stages = 0
    stage_obj: list[float] = []
    lam2 = np.inf
    max_reg = 0.0
    gnorm = np.inf
    converged = False
    while True:
        stages += 1
        for _ in range(MAX_NEWTON_PER_STAGE):
            val, g, H = cp.barrier(x, 2)
            f0 = -mu * x[cp.t_index] + val
            g = g - mu * e_t
            dx, reg = _newton_step(H, g)
            max_reg = max(max_reg, reg)
            lam2 = float(-g @ dx)
            gnorm = float(np.linalg.norm(g))
            iters += 1
            if lam2 / 2.0 <= NEWTON_EPS:
                break
            step = 1.0
            while step > 1e-20:
                xn = x + step * dx
                r = cp.barrier(xn, 0)
                if r is not None and -mu * xn[cp.t_index] + r[0] <= f0 - ALPHA * step * lam2:
                    break
                step *= BETA
            else:
                # no progress possible at this precision; centering is as good as it gets
                break
            x = xn
            if iters >= MAX_NEWTON_TOTAL:
                break
        stage_obj.append(cp.objective_value(x))
        if iters >= MAX_NEWTON_TOTAL:
            break
        if cp.degree / mu < tol:
            converged = True
            break
        mu *= MU_FACTOR

    diag = Diagnostics(
        iterations=iters, stages=stages, mu=mu, gap=cp.degree / mu,
        newton_decrement=float(np.sqrt(max(lam2, 0.0))), kkt_residual=gnorm / mu,
        converged=converged, stage_objectives=stage_obj, regularization=max_reg,
    )
    values = cp.unpack(x)
    sol = DetMaxSolution(cp.objective_value(x), values, diag)
    if not converged:
        raise MaxIterations(f"barrier method stopped after {iters} Newton steps", sol)
    return sol


# -- independent check ------------------------------------------------------------

@dataclass
class CheckReport:
    feasible: bool
    objective: float  # recomputed, nats
    claimed: float
    violations: list[str]

    def __bool__(self):
        return self.feasible


def _logdet_plain(m):
    sign, ld = np.linalg.slogdet(m)
    return ld if sign.real > 0 else -np.inf


def check_solution(problem: DetMaxProblem, sol: DetMaxSolution, rtol: float = 1e-8) -> CheckReport:
    """Re-evaluate every constraint from the raw variable values."""
    v = sol.values
    bad: list[str] = []

    def scalar(name):
        return float(v[name])

    for mv in problem.matrix_vars:
        x = np.asarray(v[mv.name])
        if np.max(np.abs(x - x.conj().T), initial=0.0) > rtol * max(1.0, np.linalg.norm(x)):
            bad.append(f"{mv.name} not Hermitian")
        lo = np.linalg.eigvalsh(0.5 * (x + x.conj().T))[0] if mv.dim else 0.0
        if lo < -1e-9 * max(1.0, np.linalg.norm(x)):
            bad.append(f"{mv.name} not PSD (min eig {lo:.3e})")
    for sv in problem.scalar_vars:
        if sv.lower is not None and scalar(sv.name) < sv.lower - rtol * max(1.0, abs(sv.lower)):
            bad.append(f"{sv.name} below {sv.lower}")
    rhs_obj = []
    for h in problem.hypographs:
        total = 0.0
        for term in h.terms:
            k = sum(np.asarray(g) @ np.asarray(v[n]) @ np.asarray(g).conj().T for n, g in term.factors)
            eye = np.eye(k.shape[0])
            if term.bandwidth is None:
                total += _logdet_plain(eye + k)
            else:
                w = scalar(term.bandwidth)
                total += w * _logdet_plain(eye + k / w) if w > 0 else 0.0
        t = scalar(h.target)
        if t - total > rtol * max(1.0, abs(total)):
            bad.append(f"hypograph {h.label or h.target}: {t:.12g} > {total:.12g}")
        if h.target == problem.objective:
            rhs_obj.append(total)
    for c in problem.linear:
        lhs = sum(np.real(np.trace(np.asarray(w) @ np.asarray(v[n]))) for n, w in c.traces)
        lhs += sum(a * scalar(n) for n, a in c.scalars)
        if lhs - c.bound > rtol * max(1.0, abs(c.bound)):
            bad.append(f"linear {c.label or '-'}: {lhs:.12g} > {c.bound:.12g}")
    for c in problem.psd:
        f = sum(a * np.asarray(g) @ np.asarray(v[n]) @ np.asarray(g).conj().T for n, g, a in c.parts)
        if c.const is not None:
            f = f + c.const
        f = 0.5 * (f + f.conj().T)
        lo = np.linalg.eigvalsh(f)[0]
        if lo < -rtol * max(1.0, np.linalg.norm(f)):
            bad.append(f"psd {c.label or '-'}: min eig {lo:.3e}")
    obj = min(rhs_obj) if rhs_obj else float("nan")
    if abs(obj - sol.objective_value) > rtol * max(1.0, abs(obj)):
        bad.append(f"objective mismatch: claimed {sol.objective_value:.12g}, recomputed {obj:.12g}")
    return CheckReport(not bad, float(obj), float(sol.objective_value), bad)
