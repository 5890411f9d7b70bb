"""Relay channel realizations: geometry, path loss and seeded Rayleigh fading.

The source sits at (0, 0), the destination at (1, 0) and the relay at
(dx, dy).  Channel matrices are

    H11 = Hw1
    H21 = (dx^2 + dy^2) ** (-eta / 4) * Hw2
    H12 = ((1 - dx)^2 + dy^2) ** (-eta / 4) * Hw3

with i.i.d. unit-variance circularly symmetric complex Gaussian entries in
the Hw matrices.

Randomness
----------
Trial ``k`` of seed ``s`` draws from a PCG64 generator seeded with
``numpy.random.SeedSequence([s, k])`` (SeedSequence hashes its entropy
words, so neighbouring trials get unrelated streams).  Complex entries are
produced by the Box-Muller transform from pairs of uniforms ``u1, u2`` in
(0, 1]::

    g = sqrt(-2 ln u1) * (cos(2 pi u2) + i sin(2 pi u2)) / sqrt(2)

drawn row-major for Hw1, then Hw2, then Hw3.  The draws depend on
(seed, trial, antenna counts) only, never on the topology, so a sweep over
relay positions reuses the same fading.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

D_MIN = 1e-3
DUMP_VERSION = 1


class TopologyDegenerate(ValueError):
    """Relay (numerically) on top of the source or the destination."""


@dataclass(frozen=True)
class AntennaConfig:
    m1: int = 4
    n1: int = 4
    m2: int = 4
    n2: int = 4

    def __post_init__(self):
        for name in ("m1", "n1", "m2", "n2"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"antenna count {name} must be >= 1")

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def is_scalar(self) -> bool:
        return self.m1 == self.n1 == self.m2 == self.n2 == 1


@dataclass(frozen=True)
class Topology:
    dx: float = 1 / 3
    dy: float = 1 / 2
    eta: float = 4.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("path-loss exponent must be >= 0")

    @property
    def source_relay_distance(self) -> float:
        return float(np.hypot(self.dx, self.dy))

    @property
    def relay_destination_distance(self) -> float:
        return float(np.hypot(1.0 - self.dx, self.dy))

    def amplitude_scales(self) -> tuple[float, float]:
        """Amplitude factors applied to (Hw2, Hw3)."""
        r_sr = self.source_relay_distance
        r_rd = self.relay_destination_distance
        if min(r_sr, r_rd) < D_MIN:
            raise TopologyDegenerate(
                f"relay at ({self.dx}, {self.dy}) is within {D_MIN} of a terminal"
            )
        return r_sr ** (-self.eta / 2), r_rd ** (-self.eta / 2)


@dataclass(frozen=True)
class PowerConstraints:
    """Per-node budgets P1, P2 (linear), optionally per-antenna budgets."""

    p1: float = 1.0
    p2: float = 1.0
    per_antenna1: Optional[tuple[float, ...]] = None
    per_antenna2: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        vals = [self.p1, self.p2, *(self.per_antenna1 or ()), *(self.per_antenna2 or ())]
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError("power budgets must be finite and >= 0")

    @classmethod
    def from_db(cls, p1_db: float = 0.0, p2_db: float = 0.0) -> "PowerConstraints":
        return cls(10 ** (p1_db / 10), 10 ** (p2_db / 10))

    def antenna_budgets(self, m1: int, m2: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-antenna budgets, defaulting to an equal split of the node budget."""
        a1 = np.full(m1, self.p1 / m1) if self.per_antenna1 is None else np.asarray(self.per_antenna1, float)
        a2 = np.full(m2, self.p2 / m2) if self.per_antenna2 is None else np.asarray(self.per_antenna2, float)
        if a1.shape != (m1,) or a2.shape != (m2,):
            raise ValueError("per-antenna budget length does not match antenna count")
        return a1, a2


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h11: np.ndarray  # N1 x M1, source -> destination
    h21: np.ndarray  # N2 x M1, source -> relay
    h12: np.ndarray  # N1 x M2, relay -> destination
    trial: int = field(default=0, compare=False)

    def __post_init__(self):
        h11, h21, h12 = (np.asarray(h, dtype=complex) for h in (self.h11, self.h21, self.h12))
        if h11.ndim != 2 or h21.ndim != 2 or h12.ndim != 2:
            raise ValueError("channel matrices must be 2-D")
        if h21.shape[1] != h11.shape[1] or h12.shape[0] != h11.shape[0]:
            raise ValueError("inconsistent channel dimensions")
        if not all(np.all(np.isfinite(h)) for h in (h11, h21, h12)):
            raise ValueError("channel matrices must be finite")
        for name, h in (("h11", h11), ("h21", h21), ("h12", h12)):
            h.setflags(write=False)
            object.__setattr__(self, name, h)

    @classmethod
    def scalar(cls, h11: complex, h21: complex, h12: complex) -> "ChannelRealization":
        return cls(np.array([[h11]]), np.array([[h21]]), np.array([[h12]]))

    @property
    def config(self) -> AntennaConfig:
        return AntennaConfig(self.h11.shape[1], self.h11.shape[0], self.h12.shape[1], self.h21.shape[0])

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for h in (self.h11, self.h21, self.h12):
            digest.update(np.ascontiguousarray(h).tobytes())
        return digest.hexdigest()[:16]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(trial)])))


def complex_gaussian(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """CN(0, 1) entries by Box-Muller, row-major."""
    n = shape[0] * shape[1]
    u = 1.0 - rng.random((n, 2))  # (0, 1]
    radius = np.sqrt(-2.0 * np.log(u[:, 0]))
    g = radius * np.exp(2j * np.pi * u[:, 1]) / np.sqrt(2.0)
    return g.reshape(shape)


def fading_draws(cfg: AntennaConfig, seed: int, trial: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = trial_rng(seed, trial)
    hw1 = complex_gaussian(rng, (cfg.n1, cfg.m1))
    hw2 = complex_gaussian(rng, (cfg.n2, cfg.m1))
    hw3 = complex_gaussian(rng, (cfg.n1, cfg.m2))
    return hw1, hw2, hw3


def realization(cfg: AntennaConfig, topo: Topology, seed: int, trial: int) -> ChannelRealization:
    s21, s12 = topo.amplitude_scales()
    hw1, hw2, hw3 = fading_draws(cfg, seed, trial)
    return ChannelRealization(hw1, s21 * hw2, s12 * hw3, trial=trial)


def generate_realizations(cfg: AntennaConfig, topo: Topology, seed: int, count: int) -> list[ChannelRealization]:
    if count < 1:
        raise ValueError("count must be >= 1")
    topo.amplitude_scales()  # fail fast on degenerate geometry
    return [realization(cfg, topo, seed, k) for k in range(count)]


def equivalent_blocks(ch: ChannelRealization) -> tuple[np.ndarray, np.ndarray]:
    """(H1, H1_tilde): first block column [H11; H21] and first block row [H11, H12] of H."""
    return np.vstack([ch.h11, ch.h21]), np.hstack([ch.h11, ch.h12])


def block_channel(ch: ChannelRealization) -> np.ndarray:
    """Full N x M matrix [[H11, H12], [H21, 0]]."""
    zero = np.zeros((ch.h21.shape[0], ch.h12.shape[1]), dtype=complex)
    return np.block([[ch.h11, ch.h12], [ch.h21, zero]])


# -- channel dump (JSON lines) ------------------------------------------------
#
# line 1: {"format": "relaylab-channels", "version": 1, "cfg": {...},
#          "topo": {...}, "seed": s}
# then one line per trial: {"trial": k, "h11": [[re, im], ...], ...}
# with entries row-major, decimal floats (repr, round-trips exactly).

def _encode(h: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in h.ravel()]


def _decode(rows: list, shape: Sequence[int]) -> np.ndarray:
    arr = np.array([complex(re, im) for re, im in rows], dtype=complex)
    return arr.reshape(shape)


def dump_channels(path, cfg: AntennaConfig, topo: Topology, seed: int,
                  realizations: Iterable[ChannelRealization]) -> None:
    header = {
        "format": "relaylab-channels",
        "version": DUMP_VERSION,
        "cfg": {"m1": cfg.m1, "n1": cfg.n1, "m2": cfg.m2, "n2": cfg.n2},
        "topo": {"dx": topo.dx, "dy": topo.dy, "eta": topo.eta},
        "seed": int(seed),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for ch in realizations:
            rec = {"trial": ch.trial, "h11": _encode(ch.h11), "h21": _encode(ch.h21), "h12": _encode(ch.h12)}
            fh.write(json.dumps(rec) + "\n")


def load_channels(path) -> tuple[dict, list[ChannelRealization]]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "relaylab-channels" or header.get("version") != DUMP_VERSION:
            raise ValueError(f"{path}: not a version-{DUMP_VERSION} channel dump")
        c = header["cfg"]
        out = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(ChannelRealization(
                _decode(rec["h11"], (c["n1"], c["m1"])),
                _decode(rec["h21"], (c["n2"], c["m1"])),
                _decode(rec["h12"], (c["n1"], c["m2"])),
                trial=rec["trial"],
            ))
    return header, out
