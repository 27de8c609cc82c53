"""The in-memory problem bundle shared by the checking modules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import DomainSet, SampleSpec, as_point
from .maps import PiecewiseMap


@dataclass(frozen=True)
class GregusConstants:
    """Weights (c1, c2, c3) of the quadratic Gregus-type inequality.

    With ``strict=False`` the sums c1 + 2 c2 and c1 + c3 may not exceed 1 (+1e-12);
    ``equality`` reports whether both sums hit 1 (the non-strict regime).
    With ``strict=True`` both sums must stay below 1.
    """

    c1: float = 1.0
    c2: float = 0.0
    c3: float = 0.0
    strict: bool = False

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) < 0:
            raise ValueError("Gregus constants must be nonnegative")
        s1, s2 = self.c1 + 2 * self.c2, self.c1 + self.c3
        if self.strict:
            if not (s1 < 1 and s2 < 1):
                raise ValueError(f"strict regime needs c1+2c2<1 and c1+c3<1, got {s1}, {s2}")
        elif s1 > 1 + 1e-12 or s2 > 1 + 1e-12:
            raise ValueError(f"need c1+2c2<=1 and c1+c3<=1, got {s1}, {s2}")

    @property
    def equality(self) -> bool:
        return abs(self.c1 + 2 * self.c2 - 1) <= 1e-12 and abs(self.c1 + self.c3 - 1) <= 1e-12

    def scaled(self, k: float) -> GregusConstants:
        """(k^2 c1, k^2 c2, k^2 c3); strict whenever 0 < k < 1."""
        k2 = k * k
        return GregusConstants(k2 * self.c1, k2 * self.c2, k2 * self.c3, strict=k < 1)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.c1, self.c2, self.c3)


@dataclass(frozen=True)
class Schedule:
    k_values: tuple[float, ...]
    rule: str = "harmonic"

    def __post_init__(self):
        ks = tuple(float(k) for k in self.k_values)
        object.__setattr__(self, "k_values", ks)
        if len(ks) < 3:
            raise ValueError("a schedule needs at least 3 terms")
        if not all(0 < k < 1 for k in ks):
            raise ValueError("schedule terms must lie in (0, 1)")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("schedule must be strictly increasing")

    @classmethod
    def harmonic(cls, n: int = 12) -> Schedule:
        return cls(tuple(i / (i + 1) for i in range(1, n + 1)), "harmonic")

    @classmethod
    def geometric(cls, r: float = 0.5, n: int = 12) -> Schedule:
        if not 0 < r < 1:
            raise ValueError("geometric ratio must lie in (0, 1)")
        return cls(tuple(1 - r**i for i in range(1, n + 1)), f"geometric:{r!r}")

    @classmethod
    def parse(cls, text: str, n: int = 12) -> Schedule:
        if text == "harmonic":
            return cls.harmonic(n)
        if text.startswith("geometric"):
            _, _, r = text.partition(":")
            return cls.geometric(float(r) if r else 0.5, n)
        raise ValueError(f"unknown schedule {text!r}")


@dataclass(frozen=True)
class Tolerances:
    membership: float = 1e-9
    affinity: float = 1e-9
    coincidence: float = 1e-7
    inequality: float = 1e-9
    inner_1d: float = 1e-9
    inner_2d: float = 1e-6

    def inner(self, dim: int) -> float:
        return self.inner_1d if dim == 1 else self.inner_2d


@dataclass(frozen=True)
class Problem:
    domain: DomainSet
    q: np.ndarray
    A: PiecewiseMap
    B: PiecewiseMap
    S: PiecewiseMap
    T: PiecewiseMap
    constants: GregusConstants = field(default_factory=GregusConstants)
    sampling: SampleSpec = field(default_factory=SampleSpec)
    schedule: Schedule = field(default_factory=Schedule.harmonic)
    tolerances: Tolerances = field(default_factory=Tolerances)
    u: np.ndarray | None = None
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "q", as_point(self.q, self.domain.dimension))
        if self.u is not None:
            object.__setattr__(self, "u", as_point(self.u, self.domain.dimension))

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def maps(self) -> dict[str, PiecewiseMap]:
        return {"A": self.A, "B": self.B, "S": self.S, "T": self.T}

    def with_(self, **changes) -> Problem:
        return replace(self, **changes)

    @classmethod
    def build(cls, domain: DomainSet, q, A=None, B=None, S=None, T=None, **kw) -> Problem:
        """Missing maps default to: A -> identity, B -> A, S and T -> identity."""
        ident = PiecewiseMap.identity(domain)
        A = A or ident
        return cls(domain, q, A, B or A, S or ident, T or ident, **kw)
