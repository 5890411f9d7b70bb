"""Rate reports shared by the scheme modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detmax import Diagnostics, SolverError

LN2 = float(np.log(2.0))


def to_bits(nats: float) -> float:
    return nats / LN2


class SchemeError(RuntimeError):
    """A scheme evaluation failed; ``scheme`` names it, ``cause`` is the solver error."""

    def __init__(self, scheme: str, cause: Exception):
        super().__init__(f"{scheme}: {cause}")
        self.scheme = scheme
        self.cause = cause


@dataclass
class RateReport:
    scheme: str
    rate_nats: float
    diagnostics: Optional[Diagnostics] = None
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        # the solver value is tol-close from below; exact zero is the floor
        self.rate_nats = max(0.0, float(self.rate_nats))

    @property
    def rate_bits(self) -> float:
        return to_bits(self.rate_nats)


@dataclass(frozen=True)
class BandAllocation:
    w1: float
    w2: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 > 1 + 1e-12:
            raise ValueError(f"invalid band allocation ({self.w1}, {self.w2})")


@dataclass
class HalfDuplexSolution(RateReport):
    bands: Optional[BandAllocation] = None
    components: dict = field(default_factory=dict)  # internal rates, nats


def run_solver(scheme: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SolverError as exc:
        raise SchemeError(scheme, exc) from exc
