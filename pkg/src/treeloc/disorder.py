"""Disorder densities for the on-site potential.

Three families are supported: a uniform box, the Cauchy law and a
tabulated density read from a two-column text file.  Every density
carries the scalar functionals the rest of the package needs: the
sup-norm, a Lipschitz constant and a power-law tail envelope
``rho(v) <= C_tail / |v|**(1 + tail_exponent)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "DisorderDensity",
    "Uniform",
    "Cauchy",
    "Tabulated",
    "density_eval",
    "sample",
    "window_extrema",
    "load_tabulated",
    "parse_disorder",
]


class DisorderDensity:
    """Base class.  Subclasses implement ``pdf``, ``cdf`` and ``ppf``.

    Instances are immutable and safe to share between threads.
    """

    kind: ClassVar[str] = "abstract"

    # scalar functionals, filled by subclasses
    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        raise NotImplementedError

    @property
    def tail(self) -> tuple[float, float]:
        """``(tail_exponent, C_tail)`` with tail_exponent in (0, 1)."""
        raise NotImplementedError

    def pdf(self, v):
        raise NotImplementedError

    def cdf(self, v):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """I.i.d. draws by inverse-CDF sampling."""
        return self.ppf(rng.random(size))

    def window_extrema(self, E: float, alpha: float) -> tuple[float, float]:
        """(inf, sup) of the density over ``[E - alpha, E + alpha]``."""
        z = np.linspace(E - alpha, E + alpha, 20001)
        vals = self.pdf(z)
        return float(vals.min()), float(vals.max())

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Uniform(DisorderDensity):
    """Uniform density on ``[-halfwidth, halfwidth]``.

    The density is not Lipschitz on the real line.  ``lipschitz`` reports
    the constant inside the support (zero), which is all that matters
    away from the edges.
    """

    halfwidth: float = 1.0
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("uniform halfwidth must be > 0")

    @property
    def sup_norm(self) -> float:
        return 0.5 / self.halfwidth

    @property
    def lipschitz(self) -> float:
        return 0.0

    @property
    def tail(self) -> tuple[float, float]:
        # sup_v rho(v) |v|^{3/2} is reached at the support edge
        return 0.5, 0.5 * math.sqrt(self.halfwidth)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(np.abs(v) <= self.halfwidth, 0.5 / self.halfwidth, 0.0)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return np.clip((v + self.halfwidth) / (2 * self.halfwidth), 0.0, 1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return (2 * u - 1) * self.halfwidth

    def window_extrema(self, E, alpha):
        w = self.halfwidth
        lo, hi = E - alpha, E + alpha
        top = 0.5 / w
        if hi < -w or lo > w:
            return 0.0, 0.0
        if lo >= -w and hi <= w:
            return top, top
        return 0.0, top

    @property
    def label(self):
        return "uniform" if self.halfwidth == 1.0 else f"uniform(w={self.halfwidth:g})"


@dataclass(frozen=True)
class Cauchy(DisorderDensity):
    """Cauchy density ``scale / (pi (v^2 + scale^2))``."""

    scale: float = 1.0
    kind: ClassVar[str] = "cauchy"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("cauchy scale must be > 0")

    @property
    def sup_norm(self) -> float:
        return 1.0 / (math.pi * self.scale)

    @property
    def lipschitz(self) -> float:
        # max |rho'| sits at v = scale / sqrt(3)
        return 3 * math.sqrt(3) / (8 * math.pi * self.scale**2)

    @property
    def tail(self) -> tuple[float, float]:
        # sup_v rho(v) |v|^{3/2}, attained at v^2 = 3 scale^2
        return 0.5, 3**0.75 * math.sqrt(self.scale) / (4 * math.pi)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        g = self.scale
        return g / (math.pi * (v * v + g * g))

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return 0.5 + np.arctan(v / self.scale) / math.pi

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * np.tan(math.pi * (u - 0.5))

    def window_extrema(self, E, alpha):
        lo, hi = E - alpha, E + alpha
        nearest = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
        farthest = max(abs(lo), abs(hi))
        return float(self.pdf(farthest)), float(self.pdf(nearest))

    @property
    def label(self):
        return "cauchy" if self.scale == 1.0 else f"cauchy(gamma={self.scale:g})"


class Tabulated(DisorderDensity):
    """Piecewise-linear density on a grid, with power-law tails.

    Outside the table the density continues as
    ``rho(v_end) * (|v_end| / |v|)**tail_power``.  The table is
    renormalized so that grid plus tails integrate to one.  Functionals
    that are not supplied are estimated by scanning the grid; a warning
    says so.
    """

    kind: ClassVar[str] = "tabulated"

    def __init__(self, v, rho, tail_power: float = 2.0, *, sup_norm=None,
                 lipschitz=None, tail=None, source: str | None = None):
        v = np.asarray(v, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if v.ndim != 1 or v.shape != rho.shape:
            raise ValueError("tabulated density needs matching 1-d arrays")
        if len(v) < 64:
            raise ValueError("tabulated density needs at least 64 rows")
        if np.any(np.diff(v) <= 0):
            raise ValueError("tabulated abscissas must be strictly increasing")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise ValueError("tabulated density values must be finite and >= 0")
        if tail_power <= 1:
            raise ValueError("tail power must exceed 1 for integrability")
        if (rho[0] > 0 and v[0] >= 0) or (rho[-1] > 0 and v[-1] <= 0):
            raise ValueError("nonzero tail requires the table to straddle 0")
        self._v = v
        self._p = tail_power
        self.source = source

        cell = 0.5 * (rho[1:] + rho[:-1]) * np.diff(v)
        left = rho[0] * abs(v[0]) / (tail_power - 1)
        right = rho[-1] * abs(v[-1]) / (tail_power - 1)
        total = cell.sum() + left + right
        if not total > 0:
            raise ValueError("tabulated density has zero mass")
        self._rho = rho / total
        self._cum = np.concatenate([[left], left + np.cumsum(cell)]) / total
        self._left = left / total
        self._right = right / total

        scanned = []
        if sup_norm is None:
            sup_norm = float(self._rho.max())
            scanned.append("sup_norm")
        if lipschitz is None:
            lipschitz = float(np.max(np.abs(np.diff(self._rho)) / np.diff(v)))
            scanned.append("lipschitz")
        if tail is None:
            tail = self._scan_tail(0.5)
            scanned.append("tail")
        if scanned:
            log.warning("tabulated density: %s estimated by grid scan "
                        "(approximate)", ", ".join(scanned))
        self._sup = float(sup_norm)
        self._lip = float(lipschitz)
        self._tail = (float(tail[0]), float(tail[1]))

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and np.array_equal(self._v, other._v)
                and np.array_equal(self._rho, other._rho) and self._p == other._p)

    def __hash__(self):
        return hash((self._v.tobytes(), self._rho.tobytes(), self._p))

    def _scan_tail(self, expo):
        if self._p < 1 + expo:
            raise ValueError("tail decays slower than |v|^-(1+tail_exponent)")
        # per-cell bound: max rho times max |v|^(1+expo) over the cell ends
        vv = np.abs(self._v) ** (1 + expo)
        c = float(np.max(np.maximum(self._rho[1:], self._rho[:-1])
                         * np.maximum(vv[1:], vv[:-1])))
        # the tails scale like |v|^{-p}; with p >= 1 + expo the edge value bounds them
        return expo, c

    @property
    def sup_norm(self):
        return self._sup

    @property
    def lipschitz(self):
        return self._lip

    @property
    def tail(self):
        return self._tail

    @property
    def grid(self):
        return self._v.copy(), self._rho.copy()

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self._v, self._rho, left=0.0, right=0.0)
        lo, hi = self._v[0], self._v[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            below = v < lo
            above = v > hi
            if self._rho[0] > 0:
                out = np.where(below, self._rho[0] * (abs(lo) / np.abs(v)) ** self._p, out)
            if self._rho[-1] > 0:
                out = np.where(above, self._rho[-1] * (abs(hi) / np.abs(v)) ** self._p, out)
        return out

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        x, r, c = self._v, self._rho, self._cum
        i = np.clip(np.searchsorted(x, v, side="right") - 1, 0, len(x) - 2)
        u = np.clip(v - x[i], 0.0, None)
        h = x[i + 1] - x[i]
        u = np.minimum(u, h)
        inner = c[i] + r[i] * u + (r[i + 1] - r[i]) * u * u / (2 * h)
        q = self._p - 1
        with np.errstate(divide="ignore", invalid="ignore"):
            lower = self._left * (abs(x[0]) / np.abs(v)) ** q
            upper = 1.0 - self._right * (abs(x[-1]) / np.abs(v)) ** q
        out = np.where(v < x[0], lower, inner)
        out = np.where(v > x[-1], upper, out)
        return np.clip(out, 0.0, 1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        x, r, c = self._v, self._rho, self._cum
        q = self._p - 1
        i = np.clip(np.searchsorted(c, u, side="right") - 1, 0, len(x) - 2)
        h = x[i + 1] - x[i]
        a = r[i]
        slope = (r[i + 1] - r[i]) / h
        rem = u - c[i]
        # solve a*s + slope*s^2/2 = rem on [0, h]
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(a * a + 2 * slope * rem, 0.0))
            s_quad = 2 * rem / (a + disc)
            s_lin = np.where(a > 0, rem / a, 0.0)
        s = np.where(np.abs(slope) > 1e-14, s_quad, s_lin)
        s = np.where(np.isfinite(s), s, 0.0)
        out = x[i] + np.clip(s, 0.0, h)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self._left > 0:
                out = np.where(u < c[0], -abs(x[0]) * (self._left / u) ** (1 / q), out)
            if self._right > 0:
                out = np.where(u > c[-1], abs(x[-1]) * (self._right / (1 - u)) ** (1 / q), out)
        return out

    def window_extrema(self, E, alpha):
        z = np.linspace(E - alpha, E + alpha, 20001)
        inside = self._v[(self._v >= E - alpha) & (self._v <= E + alpha)]
        vals = self.pdf(np.concatenate([z, inside]))
        return float(vals.min()), float(vals.max())

    @property
    def label(self):
        return f"file:{self.source}" if self.source else "tabulated"

    def __repr__(self):
        return f"Tabulated(n={len(self._v)}, tail_power={self._p}, source={self.source!r})"


def load_tabulated(path, tail_power: float = 2.0, **kw) -> Tabulated:
    """Read a two-column ``v rho(v)`` whitespace-separated file."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return Tabulated(data[:, 0], data[:, 1], tail_power, source=str(path), **kw)


def parse_disorder(text: str) -> DisorderDensity:
    """``uniform``, ``cauchy``, ``uniform:W``, ``cauchy:GAMMA`` or ``file:<path>``."""
    if text.startswith("file:"):
        path = Path(text[5:])
        if not path.exists():
            raise ValueError(f"disorder file not found: {path}")
        return load_tabulated(path)
    name, _, arg = text.partition(":")
    if name == "uniform":
        return Uniform(float(arg) if arg else 1.0)
    if name == "cauchy":
        return Cauchy(float(arg) if arg else 1.0)
    raise ValueError(f"unknown disorder {text!r}: use uniform, cauchy or file:<path>")


def density_eval(d: DisorderDensity, v):
    """Evaluate the density; scalar in, float out."""
    out = d.pdf(v)
    return float(out) if np.ndim(out) == 0 else out


def sample(d: DisorderDensity, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def window_extrema(d: DisorderDensity, E: float, alpha: float) -> tuple[float, float]:
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    return d.window_extrema(E, alpha)
