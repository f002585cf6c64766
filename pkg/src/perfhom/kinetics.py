"""Monotone scalar kinetics: sigma, sigma-hat, g and beta of the models.

Every kinetics is vectorised: ``k(s)`` evaluates, ``k.deriv(s)`` gives the
(clipped) derivative, ``k.primitive(s)`` the antiderivative from 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError, KineticsError

CLIP = 1e-10


class Kinetics:
    name = "kinetics"
    # points where the derivative may blow up; Newton steps never jump over them
    kinks: tuple = ()
    # True when the graph is multivalued somewhere (Heaviside, Signorini)
    multivalued = False

    def __call__(self, s):
        raise NotImplementedError

    def deriv(self, s):
        s = np.asarray(s, float)
        h = 1e-7 * np.maximum(1.0, np.abs(s))
        return (self(s + h) - self(s - h)) / (2.0 * h)

    def primitive(self, s):
        """int_0^s k, by Gauss-Legendre on [0, s] (overridden when exact)."""
        s = np.asarray(s, float)
        x, w = np.polynomial.legendre.leggauss(16)
        t = 0.5 * (x + 1.0)
        vals = self(np.multiply.outer(s, t))
        return 0.5 * s * (vals @ w)

    def jumps(self):
        """List of (location, lower value, upper value)."""
        return []

    def limits(self, s):
        """One-sided limits (sigma(s-), sigma(s+))."""
        s = np.asarray(s, float)
        lo, hi = self(s), self(s)
        for x, a, b in self.jumps():
            at = s == x
            lo = np.where(at, a, lo)
            hi = np.where(at, b, hi)
        return lo, hi

    def describe(self) -> str:
        return self.name

    def check_monotone(self, lo=-10.0, hi=10.0, n=1000) -> bool:
        s = np.linspace(lo, hi, n)
        v = self(s)
        v = v[np.isfinite(v)]
        return bool(np.all(np.diff(v) >= -1e-14 * np.maximum(1.0, np.abs(v[1:]))))


@dataclass(frozen=True, eq=False)
class Linear(Kinetics):
    slope: float = 1.0

    def __post_init__(self):
        if not self.slope >= 0:
            raise KineticsError("linear kinetics needs a nonnegative slope")

    @property
    def name(self):
        return f"linear:{self.slope:g}"

    def __call__(self, s):
        return self.slope * np.asarray(s, float)

    def deriv(self, s):
        return np.full(np.shape(s), self.slope, float)

    def primitive(self, s):
        s = np.asarray(s, float)
        return 0.5 * self.slope * s * s


@dataclass(frozen=True, eq=False)
class Power(Kinetics):
    """lam * sign(s) |s|^q, 0 < q <= 1."""

    lam: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if not (self.lam >= 0 and 0 < self.q <= 1):
            raise KineticsError("power kinetics needs lam >= 0 and q in (0, 1]")

    @property
    def name(self):
        return f"power:{self.q:g}:{self.lam:g}"

    @property
    def kinks(self):
        return (0.0,) if self.q < 1 else ()

    def __call__(self, s):
        s = np.asarray(s, float)
        return self.lam * np.sign(s) * np.abs(s) ** self.q

    def deriv(self, s):
        a = np.maximum(np.abs(np.asarray(s, float)), CLIP)
        return self.lam * self.q * a ** (self.q - 1.0)

    def primitive(self, s):
        a = np.abs(np.asarray(s, float))
        return self.lam * a ** (self.q + 1.0) / (self.q + 1.0)


@dataclass(frozen=True, eq=False)
class PositivePower(Kinetics):
    """lam * (s_+)^q: the one-sided root kinetics sqrt(s_+) and friends."""

    lam: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if not (self.lam >= 0 and 0 < self.q <= 1):
            raise KineticsError("power kinetics needs lam >= 0 and q in (0, 1]")

    @property
    def name(self):
        return f"ppower:{self.q:g}:{self.lam:g}"

    @property
    def kinks(self):
        return (0.0,) if self.q < 1 else ()

    def __call__(self, s):
        return self.lam * np.maximum(np.asarray(s, float), 0.0) ** self.q

    def deriv(self, s):
        s = np.asarray(s, float)
        a = np.maximum(s, CLIP)
        return np.where(s > 0, self.lam * self.q * a ** (self.q - 1.0),
                        self.lam * self.q * CLIP ** (self.q - 1.0) * (s == 0))

    def primitive(self, s):
        a = np.maximum(np.asarray(s, float), 0.0)
        return self.lam * a ** (self.q + 1.0) / (self.q + 1.0)


@dataclass(frozen=True, eq=False)
class Heaviside(Kinetics):
    """Graph 0 for s < 0, [0, 1] at 0, 1 for s > 0; evaluated as its lower
    branch at the jump."""

    multivalued = True
    name = "heaviside"

    def __call__(self, s):
        return (np.asarray(s, float) > 0).astype(float)

    def deriv(self, s):
        return np.zeros(np.shape(s))

    def primitive(self, s):
        return np.maximum(np.asarray(s, float), 0.0)

    def jumps(self):
        return [(0.0, 0.0, 1.0)]


@dataclass(frozen=True, eq=False)
class Signorini(Kinetics):
    """Empty for s < 0, (-inf, 0] at 0, sigma0(s) for s > 0."""

    sigma0: Kinetics = None

    multivalued = True

    def __post_init__(self):
        if self.sigma0 is None:
            object.__setattr__(self, "sigma0", Linear(1.0))

    @property
    def name(self):
        return f"signorini[{self.sigma0.name}]"

    def __call__(self, s):
        s = np.asarray(s, float)
        with np.errstate(invalid="ignore"):
            return np.where(s < 0, -np.inf, np.where(s > 0, self.sigma0(np.maximum(s, 0.0)), 0.0))

    def deriv(self, s):
        return self.sigma0.deriv(np.maximum(np.asarray(s, float), 0.0))

    def jumps(self):
        return [(0.0, -np.inf, 0.0)]


@dataclass(frozen=True, eq=False)
class Table(Kinetics):
    """Monotone piecewise-linear interpolation, constant beyond the ends."""

    xs: tuple = (0.0, 1.0)
    ys: tuple = (0.0, 1.0)

    def __post_init__(self):
        x = np.asarray(self.xs, float)
        y = np.asarray(self.ys, float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise KineticsError("table needs matching 1D samples")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) < 0):
            raise KineticsError("table must be strictly increasing in x and nondecreasing in y")
        object.__setattr__(self, "xs", tuple(x.tolist()))
        object.__setattr__(self, "ys", tuple(y.tolist()))

    @property
    def name(self):
        return "table"

    def __call__(self, s):
        return np.interp(np.asarray(s, float), self.xs, self.ys)

    def deriv(self, s):
        s = np.asarray(s, float)
        x = np.asarray(self.xs)
        y = np.asarray(self.ys)
        slope = np.diff(y) / np.diff(x)
        k = np.clip(np.searchsorted(x, s, side="right") - 1, 0, x.size - 2)
        inside = (s >= x[0]) & (s <= x[-1])
        return np.where(inside, slope[k], 0.0)

    @classmethod
    def smoothed_heaviside(cls, width: float = 1e-2) -> "Table":
        return cls((-1.0, 0.0, width, 1.0), (0.0, 0.0, 1.0, 1.0))


@dataclass(frozen=True, eq=False)
class Zero(Kinetics):
    name = "zero"

    def __call__(self, s):
        return np.zeros(np.shape(s))

    def deriv(self, s):
        return np.zeros(np.shape(s))

    def primitive(self, s):
        return np.zeros(np.shape(s))


class Custom(Kinetics):
    """Wrap arbitrary value/derivative callables."""

    def __init__(self, fn: Callable, dfn: Callable | None = None, name: str = "custom",
                 kinks: tuple = ()):
        self._fn = fn
        self._dfn = dfn
        self.name = name
        self.kinks = tuple(kinks)

    def __call__(self, s):
        return np.asarray(self._fn(np.asarray(s, float)), float)

    def deriv(self, s):
        if self._dfn is None:
            return super().deriv(s)
        return np.asarray(self._dfn(np.asarray(s, float)), float)


class Scaled(Kinetics):
    """c * k(s)."""

    def __init__(self, base: Kinetics, c: float):
        self.base, self.c = base, float(c)
        self.name = f"{c:g}*{base.name}"
        self.kinks = base.kinks

    def __call__(self, s):
        return self.c * self.base(s)

    def deriv(self, s):
        return self.c * self.base.deriv(s)

    def primitive(self, s):
        return self.c * self.base.primitive(s)


class UForm(Kinetics):
    """sigma(u) = sigma_hat(1) - sigma_hat(1 - u): the kinetics seen by u = 1 - w."""

    def __init__(self, sigma_hat: Kinetics):
        self.base = sigma_hat
        self.name = f"uform[{sigma_hat.name}]"
        self.kinks = tuple(1.0 - k for k in sigma_hat.kinks)
        self._s1 = float(sigma_hat(1.0))

    def __call__(self, s):
        return self._s1 - self.base(1.0 - np.asarray(s, float))

    def deriv(self, s):
        return self.base.deriv(1.0 - np.asarray(s, float))


class Truncated(Kinetics):
    """beta_m with beta_m' = min(m, beta'), beta_m(0) = 0, for a Power beta."""

    def __init__(self, base: Power, m: float):
        if not isinstance(base, Power):
            raise ArgumentError("truncation implemented for power kinetics")
        self.base, self.m = base, float(m)
        lam, q = base.lam, base.q
        self.s_m = (lam * q / self.m) ** (1.0 / (1.0 - q)) if q < 1 and lam > 0 else 0.0
        self.name = f"trunc[{base.name},{m:g}]"

    def __call__(self, s):
        s = np.asarray(s, float)
        a = np.abs(s)
        lam, q, sm = self.base.lam, self.base.q, self.s_m
        inner = self.m * a
        outer = lam * a ** q - lam * sm ** q + self.m * sm
        return np.sign(s) * np.where(a <= sm, inner, outer)

    def deriv(self, s):
        a = np.abs(np.asarray(s, float))
        return np.minimum(self.m, self.base.deriv(a))

    def primitive(self, s):
        a = np.abs(np.asarray(s, float))
        lam, q, sm, m = self.base.lam, self.base.q, self.s_m, self.m
        inner = 0.5 * m * a * a
        outer = (0.5 * m * sm * sm + lam * (a ** (q + 1) - sm ** (q + 1)) / (q + 1)
                 + (m * sm - lam * sm ** q) * (a - sm))
        return np.where(a <= sm, inner, outer)


def parse_kinetics(desc: str) -> Kinetics:
    """"linear:a", "power:q:lam", "ppower:q:lam", "heaviside",
    "table:width" (smoothed Heaviside), "signorini:<inner>", "zero"."""
    parts = desc.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "linear":
            return Linear(float(parts[1]) if len(parts) > 1 else 1.0)
        if kind == "power":
            return Power(lam=float(parts[2]) if len(parts) > 2 else 1.0, q=float(parts[1]))
        if kind == "ppower":
            return PositivePower(lam=float(parts[2]) if len(parts) > 2 else 1.0, q=float(parts[1]))
        if kind == "heaviside":
            return Heaviside()
        if kind == "table":
            return Table.smoothed_heaviside(float(parts[1]) if len(parts) > 1 else 1e-2)
        if kind == "signorini":
            return Signorini(parse_kinetics(":".join(parts[1:])) if len(parts) > 1 else Linear(1.0))
        if kind == "zero":
            return Zero()
    except (IndexError, ValueError) as exc:
        raise ArgumentError(f"bad kinetics descriptor {desc!r}: {exc}") from exc
    raise ArgumentError(f"unknown kinetics {desc!r}")
