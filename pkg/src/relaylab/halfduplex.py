"""Half-duplex relaying: cut-set bound, decode-and-forward and two-hop rates
with the bandwidth split (w1, w2) optimized jointly with the covariances.

The relay listens in Band 1 and talks in Band 2.  Every rate of a band is a
perspective ``w * logdet(I + X / w)``, which puts the sub-band noise power
``w`` inside the log-det.  The barrier needs ``w > 0``, so after the joint
solve the two endpoint allocations (all bandwidth to one band) are
evaluated separately and the best of the three is reported.
"""

from __future__ import annotations

import numpy as np

from . import detmax
from .channel import ChannelRealization, PowerConstraints
from .detmax import Hypograph, LinearConstraint, LogDetTerm, MatrixVar, ScalarVar
from .fullduplex import DEFAULT_TOL, _initial_diag, active_antennas, embed
from .hermitian import waterfill_capacity
from .reports import BandAllocation, HalfDuplexSolution, run_solver

W_INIT = 0.45


def _perspective(w: float, g: np.ndarray, x: np.ndarray) -> float:
    if w <= 0:
        return 0.0
    k = g @ x @ g.conj().T
    sign, ld = np.linalg.slogdet(np.eye(k.shape[0]) + k / w)
    return float(w * ld)


class _Layout:
    """Active-antenna view of a realization for the half-duplex programs."""

    def __init__(self, ch, pc, per_antenna):
        self.cfg = ch.config
        self.idx1, self.idx2, self.b1, self.b2 = active_antennas(ch, pc, per_antenna)
        self.m1, self.m2 = self.idx1.size, self.idx2.size
        self.m = self.m1 + self.m2
        self.h11 = ch.h11[:, self.idx1]
        self.h21 = ch.h21[:, self.idx1]
        self.h12 = ch.h12[:, self.idx2]
        self.h1 = np.vstack([self.h11, self.h21])
        self.ht1 = np.hstack([self.h11, self.h12])
        eye = np.eye(self.m)
        self.c1, self.c2 = eye[:, :self.m1], eye[:, self.m1:]
        self.full_idx = np.concatenate([self.idx1, self.cfg.m1 + self.idx2])

    def per_antenna_rows(self, band1: str | None, band2: str | None):
        """Per-antenna caps summed over both bands."""
        rows = []
        for i, p in enumerate(() if self.b1 is None else self.b1):
            traces = []
            if band1:
                w = np.zeros((self.m1, self.m1))
                w[i, i] = 1.0
                traces.append((band1, w))
            if band2 == "Q2":
                w = np.zeros((self.m, self.m))
                w[i, i] = 1.0
                traces.append((band2, w))
            if traces:
                rows.append(LinearConstraint(traces=traces, bound=float(p), label=f"antenna {i}"))
        for j, p in enumerate(() if self.b2 is None or band2 is None else self.b2):
            if band2 == "Q2":
                w = np.zeros((self.m, self.m))
                w[self.m1 + j, self.m1 + j] = 1.0
            else:
                w = np.zeros((self.m2, self.m2))
                w[j, j] = 1.0
            rows.append(LinearConstraint(traces=[(band2, w)], bound=float(p), label=f"relay antenna {j}"))
        return rows


def _bands_program(lay: _Layout, pc: PowerConstraints, scheme: str, fixed: tuple | None):
    """Joint program for hcs/hdf.  ``fixed`` = (w1, w2) in {(1, 0), (0, 1)} drops
    the empty band and treats the other as the full unit band."""
    m1, m = lay.m1, lay.m
    use1 = fixed is None or fixed[0] > 0
    use2 = fixed is None or fixed[1] > 0
    bw1 = "w1" if fixed is None else None
    bw2 = "w2" if fixed is None else None

    def term(var, g, bw):
        return LogDetTerm([(var, g)], bw)

    src_cut, dst_cut = [], []
    if scheme == "hcs":
        if use1:
            src_cut.append(term("Q1", lay.h1, bw1))  # R1
        if use2:
            src_cut.append(term("Q2", lay.h11 @ lay.c1.T, bw2))  # R2
    else:
        if use1:
            src_cut.append(term("Q1", lay.h21, bw1))  # Rr
    if use1:
        dst_cut.append(term("Q1", lay.h11, bw1))  # Rd
    if use2:
        dst_cut.append(term("Q2", lay.ht1, bw2))  # Rc

    mats, init = [], {}
    bands = int(use1) + int(use2)
    d_src = _initial_diag(pc.p1, m1, lay.b1) / bands  # source budget shared by the bands
    if use1:
        mats.append(MatrixVar("Q1", m1))
        init["Q1"] = np.diag(d_src).astype(complex)
    if use2:
        mats.append(MatrixVar("Q2", m))
        d_rel = _initial_diag(pc.p2, lay.m2, lay.b2) if lay.m2 else np.zeros(0)
        init["Q2"] = np.diag(np.concatenate([d_src, d_rel])).astype(complex)

    source_traces = []
    if use1:
        source_traces.append(("Q1", np.eye(m1)))
    if use2:
        source_traces.append(("Q2", lay.c1 @ lay.c1.T))
    linear = [LinearConstraint(traces=source_traces, bound=pc.p1, label="source power")]
    if use2 and lay.m2:
        linear.append(LinearConstraint(traces=[("Q2", lay.c2 @ lay.c2.T)], bound=pc.p2, label="relay power"))
    linear += lay.per_antenna_rows("Q1" if use1 else None, "Q2" if use2 else None)

    scalars = [ScalarVar("t", None)]
    if fixed is None:
        scalars += [ScalarVar("w1", 0.0), ScalarVar("w2", 0.0)]
        linear.append(LinearConstraint(scalars=[("w1", 1.0), ("w2", 1.0)], bound=1.0, label="bandwidth"))
        init["w1"] = init["w2"] = W_INIT
    hyps = [Hypograph("t", src_cut, label="source cut"), Hypograph("t", dst_cut, label="destination cut")]
    return detmax.DetMaxProblem(mats, scalars, hyps, "t", linear=linear, initial=init)


def _twohop_program(lay: _Layout, pc: PowerConstraints):
    mats = [MatrixVar("Q1", lay.m1), MatrixVar("Q22", lay.m2)]
    linear = [
        LinearConstraint(traces=[("Q1", np.eye(lay.m1))], bound=pc.p1, label="source power"),
        LinearConstraint(traces=[("Q22", np.eye(lay.m2))], bound=pc.p2, label="relay power"),
        LinearConstraint(scalars=[("w1", 1.0), ("w2", 1.0)], bound=1.0, label="bandwidth"),
    ]
    linear += lay.per_antenna_rows("Q1", "Q22")
    init = {
        "Q1": np.diag(_initial_diag(pc.p1, lay.m1, lay.b1)).astype(complex),
        "Q22": np.diag(_initial_diag(pc.p2, lay.m2, lay.b2)).astype(complex),
        "w1": W_INIT, "w2": W_INIT,
    }
    hyps = [
        Hypograph("t", [LogDetTerm([("Q1", lay.h21)], "w1")], label="source-relay"),
        Hypograph("t", [LogDetTerm([("Q22", lay.h12)], "w2")], label="relay-destination"),
    ]
    scalars = [ScalarVar("t", None), ScalarVar("w1", 0.0), ScalarVar("w2", 0.0)]
    return detmax.DetMaxProblem(mats, scalars, hyps, "t", linear=linear, initial=init)


def _components(scheme, lay: _Layout, q1, q2, w1, w2) -> dict:
    """Internal per-band rates (nats) recomputed from the covariances."""
    if scheme == "twohop":
        return {"Rsr": _perspective(w1, lay.h21, q1), "Rrd": _perspective(w2, lay.h12, q2)}
    comp = {
        "Rd": _perspective(w1, lay.h11, q1),
        "Rc": _perspective(w2, lay.ht1, q2),
    }
    if scheme == "hcs":
        comp["R1"] = _perspective(w1, lay.h1, q1)
        comp["R2"] = _perspective(w2, lay.h11 @ lay.c1.T, q2)
    else:
        comp["Rr"] = _perspective(w1, lay.h21, q1)
    return comp


def _rate_from(scheme, comp) -> float:
    if scheme == "hcs":
        return min(comp["R1"] + comp["R2"], comp["Rd"] + comp["Rc"])
    if scheme == "hdf":
        return min(comp["Rr"], comp["Rd"] + comp["Rc"])
    return min(comp["Rsr"], comp["Rrd"])


def _candidate(scheme, lay, pc, tol, fixed):
    """(q1, q2, w1, w2, diagnostics) for the joint solve or one endpoint."""
    m1, m = lay.m1, lay.m
    zero1 = np.zeros((m1, m1), complex)
    zero2 = np.zeros((lay.m2, lay.m2) if scheme == "twohop" else (m, m), complex)
    if scheme == "twohop":
        prob = _twohop_program(lay, pc)
        sol = run_solver(scheme, detmax.solve, prob, tol)
        v = sol.values
        return v["Q1"], v["Q22"], v["w1"], v["w2"], sol.diagnostics
    if fixed == (1.0, 0.0) and scheme == "hcs":
        # relay never transmits: the destination cut is the direct channel
        q, _ = waterfill_capacity(lay.h11, pc.p1)
        if lay.b1 is None:
            return q, zero2, 1.0, 0.0, None
    if fixed == (0.0, 1.0) and scheme == "hdf":
        return zero1, zero2, 0.0, 1.0, None  # relay hears nothing
    prob = _bands_program(lay, pc, scheme, fixed)
    sol = run_solver(scheme, detmax.solve, prob, tol)
    v = sol.values
    if fixed is None:
        return v["Q1"], v["Q2"], v["w1"], v["w2"], sol.diagnostics
    q1 = v.get("Q1", zero1)
    q2 = v.get("Q2", zero2)
    return q1, q2, fixed[0], fixed[1], sol.diagnostics


def _solve_half(scheme, ch, pc, per_antenna, tol) -> HalfDuplexSolution:
    lay = _Layout(ch, pc, per_antenna)
    cfg = lay.cfg
    if lay.m1 == 0:
        return HalfDuplexSolution(scheme, 0.0, bands=BandAllocation(0.5, 0.5),
                                  components={}, values={})
    if scheme == "twohop" and lay.m2 == 0:
        return HalfDuplexSolution(scheme, 0.0, bands=BandAllocation(1.0, 0.0), components={}, values={})
    fixes = [None] if scheme == "twohop" else [None, (1.0, 0.0), (0.0, 1.0)]
    best = None
    joint_diag = None
    for fixed in fixes:
        q1, q2, w1, w2, diag = _candidate(scheme, lay, pc, tol, fixed)
        if fixed is None:
            joint_diag = diag
            # unused bandwidth never hurts a perspective term: hand it out
            s = w1 + w2
            w1, w2 = w1 / s, w2 / s
        comp = _components(scheme, lay, q1, q2, w1, w2)
        rate = _rate_from(scheme, comp)
        if best is None or rate > best[0]:
            best = (rate, q1, q2, w1, w2, comp)
    rate, q1, q2, w1, w2, comp = best
    diag = joint_diag
    values = {"Q11_band1": embed(q1, lay.idx1, cfg.m1)}
    if scheme == "twohop":
        values["Q22_band2"] = embed(q2, lay.idx2, cfg.m2)
    else:
        values["Q_band2"] = embed(q2, lay.full_idx, cfg.m)
    return HalfDuplexSolution(scheme, rate, diag, values, bands=BandAllocation(w1, w2), components=comp)


def hcs_rate(ch: ChannelRealization, pc: PowerConstraints, tol: float = DEFAULT_TOL,
             per_antenna: bool = False) -> HalfDuplexSolution:
    """Half-duplex cut-set bound."""
    return _solve_half("hcs", ch, pc, per_antenna, tol)


def hdf_rate(ch: ChannelRealization, pc: PowerConstraints, tol: float = DEFAULT_TOL,
             per_antenna: bool = False) -> HalfDuplexSolution:
    """Half-duplex decode-and-forward rate."""
    return _solve_half("hdf", ch, pc, per_antenna, tol)


def twohop_rate(ch: ChannelRealization, pc: PowerConstraints, tol: float = DEFAULT_TOL,
                per_antenna: bool = False) -> HalfDuplexSolution:
    """Orthogonal two-hop relaying rate."""
    return _solve_half("twohop", ch, pc, per_antenna, tol)
