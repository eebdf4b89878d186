"""Discretized transfer kernel and its Perron eigenpair.

The operator acts on functions of a real variable x by

    (F a)(x) = int K(x, y) a(y) dy,   K(x, y) = t^(2-s) / |x|^(2-s) * rho(-t^2/x - y)

where rho is the bare disorder density, the effective density, or its
closed Cauchy form.  At s = 1 the localization criterion is
lambda_max = 1/K.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import DisorderDensity
from .rde import CauchyParams, EffectiveDensity, ModelParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelGrid:
    """Symmetric log-spaced abscissas with midpoint-rule cell widths.

    ``edges`` holds the cell boundaries (length ``2n + 1``, including the
    gap ``[-x_min, x_min]`` which carries no node).
    """

    abscissas: np.ndarray
    weights: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    x_min: float
    x_max: float

    @property
    def n(self) -> int:
        return len(self.abscissas) // 2

    def __len__(self):
        return len(self.abscissas)


def build_grid(x_min: float, x_max: float, n: int) -> KernelGrid:
    """``n`` points per sign, log-spaced in ``|x|`` over ``[x_min, x_max]``."""
    if not x_min > 0:
        raise ValueError("x_min must be > 0")
    if not x_max > x_min:
        raise ValueError("x_max must exceed x_min")
    if n < 64:
        raise ValueError("n must be >= 64")
    p = np.geomspace(x_min, x_max, n)
    p[0], p[-1] = x_min, x_max
    mid = 0.5 * (p[1:] + p[:-1])
    lo = np.concatenate([[x_min], mid])
    hi = np.concatenate([mid, [x_max]])
    x = np.concatenate([-p[::-1], p])
    lower = np.concatenate([-hi[::-1], lo])
    upper = np.concatenate([-lo[::-1], hi])
    w = upper - lower
    return KernelGrid(x, w, lower, upper, float(x_min), float(x_max))


def grid_for(t: float, x_max: float = 1e4, per_decade: int = 160,
             x_min_factor: float | None = None, n: int | None = None) -> KernelGrid:
    """Default grid: ``x_min = x_min_factor * t^2`` and a fixed density per decade.

    The default factor ``10 / x_max`` keeps ``-t^2/x`` inside the grid for
    every row, so a(x) stays regular down to the smallest node.
    """
    if x_min_factor is None:
        x_min_factor = 10.0 / x_max
    x_min = x_min_factor * t * t
    if n is None:
        n = max(64, int(math.ceil(per_decade * math.log10(x_max / x_min))))
    return build_grid(x_min, x_max, n)


# --------------------------------------------------------------------------
# density sources


@dataclass(frozen=True)
class Bare:
    """Bare disorder density (method A)."""

    density: DisorderDensity
    scale: float = 1.0

    def pdf(self, z):
        return self.scale * self.density.pdf(z)

    def cdf(self, z):
        return self.scale * self.density.cdf(z)


@dataclass(frozen=True)
class Effective:
    """Population-dynamics effective density (method B)."""

    density: EffectiveDensity
    scale: float = 1.0

    def pdf(self, z):
        return self.scale * self.density.pdf(z)

    def cdf(self, z):
        return self.scale * self.density.cdf(z)


@dataclass(frozen=True)
class CauchyClosed:
    """Closed-form effective density for Cauchy disorder (method B)."""

    density: CauchyParams
    scale: float = 1.0

    def pdf(self, z):
        return self.scale * self.density.pdf(z)

    def cdf(self, z):
        return self.scale * self.density.cdf(z)


def as_source(obj):
    if isinstance(obj, (Bare, Effective, CauchyClosed)):
        return obj
    if isinstance(obj, DisorderDensity):
        return Bare(obj)
    if isinstance(obj, EffectiveDensity):
        return Effective(obj)
    if isinstance(obj, CauchyParams):
        return CauchyClosed(obj)
    raise TypeError(f"cannot use {type(obj).__name__} as a kernel density source")


def kernel_value(source, params: ModelParams, x, y):
    """Continuum kernel ``K(x, y)``."""
    src = as_source(source)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t, s = params.t, params.s
    return t ** (2 - s) / np.abs(x) ** (2 - s) * src.pdf(-t * t / x - y)


@dataclass
class DiscreteKernel:
    """Matrix ``M[i, j]`` acting on samples ``a(y_j)``.

    ``quadrature='cell'`` integrates the density exactly over each cell,
    ``M[i, j] = pref(x_i) * (F(u_i - lower_j) - F(u_i - upper_j))`` with
    ``u_i = -t^2 / x_i``; ``quadrature='nystrom'`` uses ``K(x_i, y_j) w_j``.
    Cell integration stays accurate when log cells are wider than the
    scale of the density.
    """

    grid: KernelGrid
    params: ModelParams
    source: object
    quadrature: str
    matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]

    def dump(self, path):
        """Binary dump: int64 rows, int64 cols, then float64 entries row-major."""
        m = np.ascontiguousarray(self.matrix, dtype="<f8")
        with open(path, "wb") as fh:
            np.array(m.shape, dtype="<i8").tofile(fh)
            m.tofile(fh)


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = np.fromfile(fh, dtype="<i8", count=2)
        data = np.fromfile(fh, dtype="<f8", count=rows * cols)
    return data.reshape(rows, cols)


def assemble_kernel(source, params: ModelParams, grid: KernelGrid, *,
                    quadrature: str = "cell", block: int = 256) -> DiscreteKernel:
    src = as_source(source)
    t, s = params.t, params.s
    x = grid.abscissas
    pref = t ** (2 - s) / np.abs(x) ** (2 - s)
    u = -t * t / x
    n = len(x)
    M = np.empty((n, n))
    if quadrature == "cell":
        for r0 in range(0, n, block):
            ub = u[r0:r0 + block, None]
            M[r0:r0 + block] = src.cdf(ub - grid.lower[None, :]) - src.cdf(ub - grid.upper[None, :])
    elif quadrature == "nystrom":
        for r0 in range(0, n, block):
            M[r0:r0 + block] = src.pdf(u[r0:r0 + block, None] - x[None, :]) * grid.weights[None, :]
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    # cdf differences can round to tiny negatives
    np.maximum(M, 0.0, out=M)
    M *= pref[:, None]
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("non-finite kernel entries")
    return DiscreteKernel(grid, params, src, quadrature, M,
                          {"n_per_sign": grid.n, "x_min": grid.x_min, "x_max": grid.x_max})


@dataclass
class EigenResult:
    lam: float
    eigenvector: np.ndarray
    iterations: int
    residual: float
    converged: bool = True


class EigenNotConverged(RuntimeError):
    def __init__(self, msg, result: EigenResult):
        super().__init__(msg)
        self.result = result


def power_iteration(A: np.ndarray, weights: np.ndarray | None = None, tol: float = 1e-12,
                    max_iter: int = 10_000) -> EigenResult:
    """Dominant eigenpair of a nonnegative matrix by power iteration.

    Vectors are normalized in the weighted L1 norm; the eigenvalue is the
    growth of that norm per step.
    """
    n = A.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    a = np.full(n, 1.0 / w.sum())
    lam = float("nan")
    res = float("inf")
    for it in range(1, max_iter + 1):
        b = A @ a
        lam = float(w @ np.abs(b))
        if not lam > 0:
            raise FloatingPointError("iterate vanished; the kernel has no positive mass")
        b /= lam
        res = float(w @ np.abs(b - a))
        a = b
        if res < tol:
            return EigenResult(lam, a, it, res, True)
    result = EigenResult(lam, a, max_iter, res, False)
    raise EigenNotConverged(
        f"power iteration did not converge in {max_iter} steps (residual {res:.3g})", result)


def leading_eigen(kernel: DiscreteKernel, tol: float = 1e-12, max_iter: int = 10_000) -> EigenResult:
    if not tol > 0:
        raise ValueError("tol must be > 0")
    return power_iteration(kernel.matrix, kernel.grid.weights, tol, max_iter)


def eigenvector_profile(res: EigenResult, grid: KernelGrid, window=(0.05, 0.5)) -> np.ndarray:
    """Two columns ``(x, |x| a(x))`` scaled so the median over ``window`` is 1."""
    x = grid.abscissas
    prof = np.abs(x) * res.eigenvector
    sel = (np.abs(x) >= window[0]) & (np.abs(x) <= window[1])
    med = float(np.median(prof[sel])) if sel.any() else 0.0
    if med > 0:
        prof = prof / med
    return np.column_stack([x, prof])


def write_profile(path, profile: np.ndarray, header: str = ""):
    np.savetxt(path, profile, fmt="%.6g", header=header, comments="# ")


def flatness(profile: np.ndarray, lo: float = 0.02, hi: float = 0.5) -> float:
    """max/min of the profile over ``lo <= |x| <= hi``."""
    ax = np.abs(profile[:, 0])
    v = profile[(ax >= lo) & (ax <= hi), 1]
    return float(v.max() / v.min())


def lam_at(source, params: ModelParams, grid: KernelGrid | None = None, *,
           quadrature: str = "cell", tol: float = 1e-12, **grid_kw) -> EigenResult:
    """Assemble and solve in one call."""
    if grid is None:
        grid = grid_for(params.t, **grid_kw)
    return leading_eigen(assemble_kernel(source, params, grid, quadrature=quadrature), tol)
