"""Brute-force reference values for single-antenna relay channels.

With one antenna per terminal every covariance reduces to a few scalars
(powers, a correlation coefficient, a bandwidth split), so each program can
be maximized by exhaustive grid search.  The grids start at step 1e-3 and
are refined by zooming around the best cell.  Nothing here touches the
barrier solver.  All values are in nats unless a name says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalarInstance:
    h11: complex
    h21: complex
    h12: complex
    p1: float = 1.0
    p2: float = 1.0

    @property
    def gains(self):
        return abs(self.h11) ** 2, abs(self.h21) ** 2, abs(self.h12) ** 2


def _plog(w, x):
    """w * log(1 + x / w), continuous extension 0 at w = 0."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    safe = np.where(w > 0, w, 1.0)
    return np.where(w > 0, safe * np.log1p(x / safe), 0.0)


def grid_maximize(f, bounds, points: int = 1001, zooms: int = 6):
    """Maximize a vectorized ``f(*coords)`` over a box by zooming grid search.

    Returns (value, argmax).  The first pass has ``points`` nodes per axis;
    each zoom re-grids +-2 cells around the incumbent.
    """
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    best_val, best_x = -np.inf, None
    for _ in range(zooms + 1):
        axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = f(*mesh)
        k = np.unravel_index(np.nanargmax(vals), vals.shape)
        if vals[k] >= best_val:
            best_val = float(vals[k])
            best_x = np.array([m[k] for m in mesh])
        cell = (hi - lo) / (points - 1)
        lo = np.maximum(np.array([b[0] for b in bounds]), best_x - 2 * cell)
        hi = np.minimum(np.array([b[1] for b in bounds]), best_x + 2 * cell)
        points = min(points, 81)
    return best_val, best_x


def nested_maximize(f, outer, inner, points: int = 1001, inner_points: int = 201, zooms: int = 6):
    """max_x max_y f(x, y) for max-min objectives whose optimum sits on a ridge.

    A joint 2-D grid can step over a thin diagonal ridge; here the inner
    coordinate is zoomed separately for every outer node, so the outer
    search only sees the (continuous) inner optimum.  Returns (value, x, y).
    """

    def inner_best(x):
        lo = np.full(x.shape, float(inner[0]))
        hi = np.full(x.shape, float(inner[1]))
        t = np.linspace(0.0, 1.0, inner_points)
        for _ in range(zooms + 2):
            y = lo[:, None] + (hi - lo)[:, None] * t
            vals = f(x[:, None], y)
            k = np.nanargmax(vals, axis=1)
            best_y = y[np.arange(x.size), k]
            cell = (hi - lo) / (inner_points - 1)
            lo = np.maximum(inner[0], best_y - 2 * cell)
            hi = np.minimum(inner[1], best_y + 2 * cell)
        return vals[np.arange(x.size), k], best_y

    def outer_f(x):
        return inner_best(np.ravel(x))[0].reshape(np.shape(x))

    val, xs = grid_maximize(outer_f, [outer], points=points, zooms=zooms)
    _, y = inner_best(np.array([xs[0]]))
    return val, float(xs[0]), float(y[0])


def cutset_oracle(inst: ScalarInstance, decode_forward: bool = False) -> float:
    """Correlation rho (outer) and source power fraction a (inner), relay at full power."""
    g11, g21, g12 = inst.gains
    g_first = g21 if decode_forward else g11 + g21
    p1, p2 = inst.p1, inst.p2

    def f(rho, a):
        q11 = a * p1
        first = np.log1p(g_first * q11 * (1 - rho ** 2))
        second = np.log1p(g11 * q11 + g12 * p2 + 2 * rho * np.sqrt(g11 * g12 * q11 * p2))
        return np.minimum(first, second)

    return nested_maximize(f, (0.0, 1.0), (0.0, 1.0))[0]


def df_oracle(inst: ScalarInstance) -> float:
    return cutset_oracle(inst, decode_forward=True)


def _band_rates(inst: ScalarInstance, w1, a1):
    """Per-band rates with a fraction a1 of the source power in Band 1 and
    coherent (rho = 1) source/relay transmission in Band 2."""
    g11, g21, g12 = inst.gains
    w2 = 1.0 - w1
    q1 = a1 * inst.p1
    q2 = (1.0 - a1) * inst.p1
    coherent = (np.sqrt(g11 * q2) + np.sqrt(g12 * inst.p2)) ** 2
    return {
        "R1": _plog(w1, (g11 + g21) * q1),
        "R2": _plog(w2, g11 * q2),
        "Rr": _plog(w1, g21 * q1),
        "Rd": _plog(w1, g11 * q1),
        "Rc": _plog(w2, coherent),
    }


def hcs_oracle(inst: ScalarInstance) -> float:
    def f(w1, a1):
        r = _band_rates(inst, w1, a1)
        return np.minimum(r["R1"] + r["R2"], r["Rd"] + r["Rc"])

    return nested_maximize(f, (0.0, 1.0), (0.0, 1.0))[0]


def hdf_oracle(inst: ScalarInstance) -> float:
    def f(w1, a1):
        r = _band_rates(inst, w1, a1)
        return np.minimum(r["Rr"], r["Rd"] + r["Rc"])

    return nested_maximize(f, (0.0, 1.0), (0.0, 1.0))[0]


def twohop_oracle(inst: ScalarInstance) -> tuple[float, float]:
    """(rate, w1): 1-D grid over w1 at full powers."""
    g11, g21, g12 = inst.gains

    def f(w1):
        return np.minimum(_plog(w1, g21 * inst.p1), _plog(1.0 - w1, g12 * inst.p2))

    val, x = grid_maximize(f, [(0.0, 1.0)], points=10001)
    return val, float(x[0])


def coloc_source_oracle(inst: ScalarInstance) -> float:
    """Grid over both antenna powers and the relative phase."""
    g11, _, g12 = inst.gains

    def f(a, b, theta):
        q1, q2 = a * inst.p1, b * inst.p2
        return np.log1p(g11 * q1 + g12 * q2 + 2 * np.sqrt(g11 * g12 * q1 * q2) * np.cos(theta))

    return grid_maximize(f, [(0.0, 1.0), (0.0, 1.0), (0.0, np.pi)], points=101)[0]


def cf_chain(inst: ScalarInstance, scheme: str = "WZ") -> dict:
    """Closed-form scalar compress-and-forward chain."""
    g11, g21, g12 = inst.gains
    p1, p2 = inst.p1, inst.p2
    r11 = np.log1p(g11 * p1)
    r12 = np.log1p(g12 * p2 / (1.0 + g11 * p1))
    s22 = 1.0 + g21 * p1
    s11 = 1.0 + g11 * p1
    s21_sq = g21 * g11 * p1 ** 2
    s = s22 if scheme.upper() == "RD" else s22 - s21_sq / s11
    d = s * np.exp(-r12)
    a_sq = 1.0 - d / s
    gain = a_sq * g21 / (d + a_sq) if a_sq > 0 else 0.0
    r_cf = np.log1p(g11 * p1 + gain * p1)
    return {"R11": float(r11), "R12": float(r12), "R_CF": float(r_cf), "D": float(d), "A": float(np.sqrt(a_sq)),
            "S": float(s)}


ORACLES = {
    "cs": cutset_oracle,
    "df": df_oracle,
    "hcs": hcs_oracle,
    "hdf": hdf_oracle,
    "twohop": lambda inst: twohop_oracle(inst)[0],
    "coloc-src": coloc_source_oracle,
    "cf-rd": lambda inst: cf_chain(inst, "RD")["R_CF"],
    "cf-wz": lambda inst: cf_chain(inst, "WZ")["R_CF"],
}


def random_instances(count: int, seed: int = 0) -> list[ScalarInstance]:
    """Scalar instances with CN(0, s^2) channels, s drawn log-uniform in [0.3, 3],
    and powers log-uniform in [0.3, 3]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s = np.exp(rng.uniform(np.log(0.3), np.log(3.0), size=3))
        h = s * (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        p = np.exp(rng.uniform(np.log(0.3), np.log(3.0), size=2))
        out.append(ScalarInstance(complex(h[0]), complex(h[1]), complex(h[2]), float(p[0]), float(p[1])))
    return out

