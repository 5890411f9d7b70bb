"""Monte-Carlo experiment engine.

Every trial draws one channel realization and feeds that same object to
every requested scheme.  Trials run on a process pool (size capped by
``RELAYLAB_THREADS``) and are collected in trial order, so results do not
depend on scheduling.  A failed solve is recorded and left out of the
statistics instead of aborting the run.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channel import AntennaConfig, PowerConstraints, Topology, TopologyDegenerate, realization
from .compress import cf_rate
from .fullduplex import (
    DEFAULT_TOL,
    colocated_dest_capacity,
    colocated_source_capacity,
    cutset_rate,
    df_rate,
    direct_capacity,
)
from .halfduplex import hcs_rate, hdf_rate, twohop_rate
from .reports import SchemeError

log = logging.getLogger(__name__)

BASE_SCHEMES = ("direct", "cs", "df", "hcs", "hdf", "twohop", "cf-rd", "cf-wz", "coloc-src", "coloc-dst")
PER_ANTENNA_SCHEMES = ("cs", "df", "hcs", "hdf", "twohop")
PA_SUFFIX = "+pa"
HALF_DUPLEX = ("hcs", "hdf", "twohop")


def parse_scheme(name: str) -> tuple[str, bool]:
    """'cs+pa' -> ('cs', True).  Raises ValueError for unknown names."""
    base, pa = (name[: -len(PA_SUFFIX)], True) if name.endswith(PA_SUFFIX) else (name, False)
    if base not in BASE_SCHEMES or (pa and base not in PER_ANTENNA_SCHEMES):
        raise ValueError(f"unknown scheme {name!r}")
    return base, pa


def evaluate_scheme(name: str, ch, pc: PowerConstraints, per_antenna: bool = False,
                    tol: float = DEFAULT_TOL) -> tuple[float, Optional[float]]:
    """Rate in bits (and w1 for half-duplex schemes) of one scheme on one realization."""
    base, pa = parse_scheme(name)
    pa = pa or per_antenna
    if base == "direct":
        return direct_capacity(ch, pc).rate_bits, None
    if base == "cs":
        return cutset_rate(ch, pc, pa, tol).rate_bits, None
    if base == "df":
        return df_rate(ch, pc, pa, tol).rate_bits, None
    if base in HALF_DUPLEX:
        fn = {"hcs": hcs_rate, "hdf": hdf_rate, "twohop": twohop_rate}[base]
        sol = fn(ch, pc, tol, per_antenna=pa)
        return sol.rate_bits, sol.bands.w1
    if base == "cf-rd":
        return cf_rate(ch, pc, "RD").rate_bits, None
    if base == "cf-wz":
        return cf_rate(ch, pc, "WZ").rate_bits, None
    if base == "coloc-src":
        return colocated_source_capacity(ch, pc, tol).rate_bits, None
    return colocated_dest_capacity(ch, pc).rate_bits, None


@dataclass(frozen=True)
class ExperimentSpec:
    cfg: AntennaConfig = AntennaConfig()
    pc: PowerConstraints = PowerConstraints()
    topo: Topology = Topology()
    schemes: tuple[str, ...] = ("cs", "df", "direct")
    trials: int = 50
    seed: int = 1
    per_antenna: bool = False
    tol: float = DEFAULT_TOL
    dx_list: Optional[tuple[float, ...]] = None  # sweep positions; dy, eta from topo

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        for s in self.schemes:
            parse_scheme(s)
        if len(set(self.schemes)) != len(self.schemes):
            raise ValueError("duplicate scheme names")
        if self.dx_list is not None and len(self.dx_list) == 0:
            raise ValueError("dx list is empty")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class Failure:
    scheme: str
    trial: int
    error: str


@dataclass
class ExperimentResult:
    schemes: tuple[str, ...]
    trials: int
    rates: dict  # scheme -> array (trials,), NaN where the solve failed
    w1: dict  # half-duplex scheme -> array (trials,)
    failures: list[Failure] = field(default_factory=list)
    checksums: list[str] = field(default_factory=list)

    def samples(self, scheme: str) -> np.ndarray:
        r = self.rates[scheme]
        return r[np.isfinite(r)]

    def cdf(self, scheme: str) -> list[tuple[float, float]]:
        return empirical_cdf(self.samples(scheme))

    def mean(self, scheme: str) -> float:
        s = self.samples(scheme)
        return float(np.mean(s)) if s.size else float("nan")

    def stderr(self, scheme: str) -> float:
        s = self.samples(scheme)
        return float(np.std(s, ddof=1) / math.sqrt(s.size)) if s.size > 1 else float("nan")

    def mean_w1(self, scheme: str) -> float:
        if scheme not in self.w1:
            return float("nan")
        w = self.w1[scheme][np.isfinite(self.w1[scheme])]
        return float(np.mean(w)) if w.size else float("nan")

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / (self.trials * len(self.schemes))


def empirical_cdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Steps (v, F(v)) at each distinct sorted sample; ties share the higher step."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    values, counts = np.unique(x, return_counts=True)
    return list(zip(values.tolist(), (np.cumsum(counts) / x.size).tolist()))


def _trial(args):
    spec, topo, trial = args
    ch = realization(spec.cfg, topo, spec.seed, trial)
    out = {}
    for name in spec.schemes:
        try:
            out[name] = evaluate_scheme(name, ch, spec.pc, spec.per_antenna, spec.tol) + (None,)
        except SchemeError as exc:
            out[name] = (float("nan"), None, str(exc))
        except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            out[name] = (float("nan"), None, f"{name}: {exc}")
    return ch.checksum(), out


def worker_count() -> int:
    env = os.environ.get("RELAYLAB_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap) if int(env) > 0 else cap)
        except ValueError:
            log.warning("ignoring RELAYLAB_THREADS=%r", env)
    return cap


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _assemble(spec: ExperimentSpec, outputs) -> ExperimentResult:
    rates = {s: np.full(spec.trials, np.nan) for s in spec.schemes}
    w1 = {s: np.full(spec.trials, np.nan) for s in spec.schemes if parse_scheme(s)[0] in HALF_DUPLEX}
    failures, sums = [], []
    for k, (checksum, out) in enumerate(outputs):
        sums.append(checksum)
        for name in spec.schemes:
            rate, w, err = out[name]
            rates[name][k] = rate
            if name in w1 and w is not None:
                w1[name][k] = w
            if err is not None:
                failures.append(Failure(name, k, err))
                log.warning("trial %d: %s", k, err)
    return ExperimentResult(tuple(spec.schemes), spec.trials, rates, w1, failures, sums)


def run(spec: ExperimentSpec, workers: Optional[int] = None) -> ExperimentResult:
    """Evaluate every scheme on ``spec.trials`` shared realizations at ``spec.topo``."""
    spec.validate()
    spec.topo.amplitude_scales()
    workers = worker_count() if workers is None else workers
    jobs = [(spec, spec.topo, k) for k in range(spec.trials)]
    return _assemble(spec, _map(_trial, jobs, workers))


@dataclass
class SweepRow:
    dx: float
    scheme: str
    mean_rate_bits: float
    stderr_bits: float
    mean_w1: float  # NaN for schemes without a band split
    ok: int
    failed: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    per_dx: dict  # dx -> ExperimentResult
    skipped: list[tuple[float, str]]  # degenerate positions

    def row(self, dx: float, scheme: str) -> SweepRow:
        for r in self.rows:
            if r.scheme == scheme and math.isclose(r.dx, dx, abs_tol=1e-9):
                return r
        raise KeyError((dx, scheme))

    @property
    def failure_rate(self) -> float:
        total = sum(r.ok + r.failed for r in self.rows)
        return sum(r.failed for r in self.rows) / total if total else 0.0


def position_sweep(spec: ExperimentSpec, workers: Optional[int] = None) -> SweepResult:
    """Run every scheme at each relay position ``(dx, topo.dy)`` with the same fading."""
    spec.validate()
    if spec.dx_list is None:
        raise ValueError("sweep needs a dx list")
    workers = worker_count() if workers is None else workers
    topos, skipped = [], []
    for dx in spec.dx_list:
        topo = replace(spec.topo, dx=float(dx))
        try:
            topo.amplitude_scales()
        except TopologyDegenerate as exc:
            skipped.append((float(dx), str(exc)))
            continue
        topos.append(topo)
    jobs = [(spec, topo, k) for topo in topos for k in range(spec.trials)]
    outputs = _map(_trial, jobs, workers)
    rows, per_dx = [], {}
    for i, topo in enumerate(topos):
        res = _assemble(spec, outputs[i * spec.trials:(i + 1) * spec.trials])
        per_dx[topo.dx] = res
        for name in spec.schemes:
            ok = res.samples(name).size
            rows.append(SweepRow(topo.dx, name, res.mean(name), res.stderr(name),
                                 res.mean_w1(name), ok, spec.trials - ok))
    return SweepResult(rows, per_dx, skipped)


def dx_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive grid, values rounded to 12 decimals to keep labels clean."""
    if step <= 0 or stop < start:
        raise ValueError("dx grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + k * step, 12) for k in range(n))
