"""Full-duplex cut-set bound, decode-and-forward rate and MIMO reference capacities."""

from __future__ import annotations

import numpy as np

from . import detmax
from .channel import ChannelRealization, PowerConstraints, equivalent_blocks
from .detmax import Hypograph, LinearConstraint, LogDetTerm, MatrixVar, PsdConstraint, ScalarVar
from .hermitian import SingularBlock, schur_complement, waterfill_capacity
from .reports import RateReport, run_solver

DEFAULT_TOL = 1e-6


def active_antennas(ch: ChannelRealization, pc: PowerConstraints, per_antenna: bool):
    """Indices and budgets of transmit antennas that may radiate.

    A zero budget pins the antenna's row/column of the covariance to zero, so
    it is dropped from the program instead of leaving an empty interior.
    """
    cfg = ch.config
    a1, a2 = pc.antenna_budgets(cfg.m1, cfg.m2)
    if per_antenna:
        idx1 = np.flatnonzero(a1 > 0) if pc.p1 > 0 else np.array([], dtype=int)
        idx2 = np.flatnonzero(a2 > 0) if pc.p2 > 0 else np.array([], dtype=int)
        return idx1, idx2, a1[idx1], a2[idx2]
    idx1 = np.arange(cfg.m1) if pc.p1 > 0 else np.array([], dtype=int)
    idx2 = np.arange(cfg.m2) if pc.p2 > 0 else np.array([], dtype=int)
    return idx1, idx2, None, None


def _initial_diag(total: float, count: int, budgets) -> np.ndarray:
    # half of the node budget, spread evenly, kept strictly inside per-antenna caps
    d = np.full(count, total / (2 * count))
    if budgets is not None:
        d = np.minimum(d, 0.5 * np.asarray(budgets))
    return d


def embed(q: np.ndarray, idx: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    out[np.ix_(idx, idx)] = q
    return out


def _relay_program(first_cut: np.ndarray, h11: np.ndarray, h12: np.ndarray, pc: PowerConstraints,
                   b1=None, b2=None) -> detmax.DetMaxProblem:
    """max t s.t. t <= logdet(I + G Qc G^H), t <= logdet(I + [H11 H12] Q [..]^H),
    per-node traces, Q - C1 Qc C1^T >= 0.  ``first_cut`` is H1 (cut-set) or H21 (DF)."""
    m1, m2 = h11.shape[1], h12.shape[1]
    m = m1 + m2
    eye = np.eye(m)
    c1, c2 = eye[:, :m1], eye[:, m1:]
    linear = [LinearConstraint(traces=[("Q", c1 @ c1.T)], bound=pc.p1, label="source power")]
    if m2:
        linear.append(LinearConstraint(traces=[("Q", c2 @ c2.T)], bound=pc.p2, label="relay power"))
    for k, budgets in ((0, b1), (m1, b2)):
        for i, p in enumerate(() if budgets is None else budgets):
            w = np.zeros((m, m))
            w[k + i, k + i] = 1.0
            linear.append(LinearConstraint(traces=[("Q", w)], bound=float(p), label=f"antenna {k + i}"))
    d = np.concatenate([_initial_diag(pc.p1, m1, b1), _initial_diag(pc.p2, m2, b2) if m2 else []])
    q0 = np.diag(d).astype(complex)
    return detmax.DetMaxProblem(
        matrix_vars=[MatrixVar("Q", m), MatrixVar("Qc", m1)],
        scalar_vars=[ScalarVar("t", None)],
        hypographs=[
            Hypograph("t", [LogDetTerm([("Qc", first_cut)])], label="first cut"),
            Hypograph("t", [LogDetTerm([("Q", np.hstack([h11, h12]))])], label="second cut"),
        ],
        objective="t",
        linear=linear,
        psd=[PsdConstraint([("Q", np.eye(m), 1.0), ("Qc", c1, -1.0)], label="Q - C1 Qc C1^T")],
        initial={"Q": q0, "Qc": 0.5 * q0[:m1, :m1]},
    )


def _relay_rate(scheme, ch, pc, per_antenna, tol, use_h1: bool) -> RateReport:
    cfg = ch.config
    idx1, idx2, b1, b2 = active_antennas(ch, pc, per_antenna)
    if idx1.size == 0:
        return RateReport(scheme, 0.0, values={"Q": np.zeros((cfg.m, cfg.m), complex),
                                               "Qc": np.zeros((cfg.m1, cfg.m1), complex)})
    h11 = ch.h11[:, idx1]
    h21 = ch.h21[:, idx1]
    h12 = ch.h12[:, idx2]
    first = np.vstack([h11, h21]) if use_h1 else h21
    prob = _relay_program(first, h11, h12, pc, b1, b2)
    sol = run_solver(scheme, detmax.solve, prob, tol)
    full_idx = np.concatenate([idx1, cfg.m1 + idx2])
    values = {
        "Q": embed(sol.values["Q"], full_idx, cfg.m),
        "Qc": embed(sol.values["Qc"], idx1, cfg.m1),
        "problem": prob,
        "solution": sol,
    }
    return RateReport(scheme, sol.objective_value, sol.diagnostics, values)


def cutset_rate(ch: ChannelRealization, pc: PowerConstraints, per_antenna: bool = False,
                tol: float = DEFAULT_TOL) -> RateReport:
    """Full-duplex cut-set upper bound (PSD-relaxed conditional covariance)."""
    return _relay_rate("cs", ch, pc, per_antenna, tol, use_h1=True)


def df_rate(ch: ChannelRealization, pc: PowerConstraints, per_antenna: bool = False,
            tol: float = DEFAULT_TOL) -> RateReport:
    """Full-duplex decode-and-forward rate; the first cut sees only H21."""
    return _relay_rate("df", ch, pc, per_antenna, tol, use_h1=False)


def direct_capacity(ch: ChannelRealization, pc: PowerConstraints) -> RateReport:
    q, rate = waterfill_capacity(ch.h11, pc.p1)
    return RateReport("direct", rate, values={"Q11": q})


def colocated_dest_capacity(ch: ChannelRealization, pc: PowerConstraints) -> RateReport:
    h1, _ = equivalent_blocks(ch)
    q, rate = waterfill_capacity(h1, pc.p1)
    return RateReport("coloc-dst", rate, values={"Q11": q})


def colocated_source_capacity(ch: ChannelRealization, pc: PowerConstraints,
                              tol: float = DEFAULT_TOL) -> RateReport:
    """Capacity of the M x N1 channel [H11 H12] with separate block power budgets."""
    cfg = ch.config
    idx1, idx2, _, _ = active_antennas(ch, pc, False)
    full_idx = np.concatenate([idx1, cfg.m1 + idx2])
    if full_idx.size == 0:
        return RateReport("coloc-src", 0.0, values={"Q": np.zeros((cfg.m, cfg.m), complex)})
    g = np.hstack([ch.h11[:, idx1], ch.h12[:, idx2]])
    m1, m = idx1.size, full_idx.size
    eye = np.eye(m)
    linear = []
    if m1:
        linear.append(LinearConstraint(traces=[("Q", eye[:, :m1] @ eye[:, :m1].T)], bound=pc.p1,
                                       label="source power"))
    if m > m1:
        linear.append(LinearConstraint(traces=[("Q", eye[:, m1:] @ eye[:, m1:].T)], bound=pc.p2,
                                       label="relay power"))
    d = np.concatenate([_initial_diag(pc.p1, m1, None) if m1 else [],
                        _initial_diag(pc.p2, m - m1, None) if m > m1 else []])
    prob = detmax.DetMaxProblem(
        matrix_vars=[MatrixVar("Q", m)],
        scalar_vars=[ScalarVar("t", None)],
        hypographs=[Hypograph("t", [LogDetTerm([("Q", g)])])],
        objective="t",
        linear=linear,
        initial={"Q": np.diag(d).astype(complex)},
    )
    sol = run_solver("coloc-src", detmax.solve, prob, tol)
    return RateReport("coloc-src", sol.objective_value, sol.diagnostics,
                      {"Q": embed(sol.values["Q"], full_idx, cfg.m), "problem": prob, "solution": sol})


def schur_tightness(report: RateReport, m1: int) -> float:
    """Smallest eigenvalue of Schur(Q) - Qc at a cut-set/DF solution (>= 0 up to
    rounding when the relaxed constraint holds).  NaN if Q22 is singular."""
    try:
        s = schur_complement(report.values["Q"], m1)
    except SingularBlock:
        return float("nan")
    return float(np.linalg.eigvalsh(s - report.values["Qc"])[0])
