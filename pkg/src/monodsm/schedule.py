"""Regularization schedules eps(t) with closed-form derivative and integral."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ScheduleError

DEFAULT_C0 = 1.0
DEFAULT_C1 = 1.0
DEFAULT_B = 0.5


@dataclass(frozen=True)
class EpsilonSchedule:
    """Constant ``eps`` or power law ``c1 / (c0 + t)**b`` with ``0 < b < 1``.

    Build with :meth:`constant` or :meth:`power_law`.
    """

    kind: str
    eps_value: float = 0.0
    c0: float = DEFAULT_C0
    c1: float = DEFAULT_C1
    b: float = DEFAULT_B

    def __post_init__(self):
        if self.kind == "constant":
            if not (math.isfinite(self.eps_value) and self.eps_value > 0):
                raise ScheduleError(f"constant eps must be > 0, got {self.eps_value}")
        elif self.kind == "power-law":
            if not (math.isfinite(self.c0) and self.c0 > 0):
                raise ScheduleError(f"c0 must be > 0, got {self.c0}")
            if not (math.isfinite(self.c1) and self.c1 > 0):
                raise ScheduleError(f"c1 must be > 0, got {self.c1}")
            if not (0.0 < self.b < 1.0):
                raise ScheduleError(f"b must lie strictly inside (0, 1), got {self.b}")
        else:
            raise ScheduleError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, eps: float) -> "EpsilonSchedule":
        return cls("constant", eps_value=float(eps))

    @classmethod
    def power_law(cls, c0: float = DEFAULT_C0, c1: float = DEFAULT_C1,
                  b: float = DEFAULT_B) -> "EpsilonSchedule":
        return cls("power-law", c0=float(c0), c1=float(c1), b=float(b))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def eps(self, t: float) -> float:
        _check_time(t)
        if self.is_constant:
            return self.eps_value
        return self.c1 * (self.c0 + t) ** (-self.b)

    def eps_dot(self, t: float) -> float:
        _check_time(t)
        if self.is_constant:
            return 0.0
        return -self.b * self.c1 * (self.c0 + t) ** (-self.b - 1.0)

    def eps_integral(self, t: float) -> float:
        """Exact ``int_0^t eps(s) ds``."""
        _check_time(t)
        if self.is_constant:
            return self.eps_value * t
        a = 1.0 - self.b
        # c0^a * expm1(a*log1p(t/c0)) avoids cancellation for small t
        return self.c1 * self.c0 ** a * math.expm1(a * math.log1p(t / self.c0)) / a

    def t_eps_product(self, t: float) -> float:
        return t * self.eps(t)

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"kind": "constant", "eps": self.eps_value}
        return {"kind": "power-law", "c0": self.c0, "c1": self.c1, "b": self.b}

    def uses_default_parameters(self) -> bool:
        return (not self.is_constant and self.c0 == DEFAULT_C0
                and self.c1 == DEFAULT_C1 and self.b == DEFAULT_B)


def _check_time(t):
    if not t >= 0:
        raise ScheduleError(f"schedule evaluated at negative or invalid time {t}")
