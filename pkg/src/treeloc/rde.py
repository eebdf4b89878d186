"""Population dynamics for the real cavity recursion.

A pool of ``N`` real resolvent samples represents the law of the cavity
Green function ``Gamma``.  One sweep replaces every element by

    1 / (V - E - t^2 * sum_{i=1}^K Gamma_i)

with ``V`` fresh from the disorder density and the ``Gamma_i`` resampled
with replacement from the previous pool.  The effective density is the
law of ``V - E - t^2 * sum_{i=1}^{K-1} Gamma_i``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from .disorder import Cauchy, DisorderDensity, Uniform

log = logging.getLogger(__name__)

TINY = 1e-300


@dataclass(frozen=True)
class ModelParams:
    """Branching number, hopping (or scaled coupling), energy, moment exponent.

    Exactly one of ``t`` and ``g`` is given; the other follows from
    ``t = g / (K log K)``.
    """

    K: int
    t: float | None = None
    g: float | None = None
    E: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ValueError("K must be an integer >= 2")
        if (self.t is None) == (self.g is None):
            raise ValueError("give exactly one of t and g")
        scale = self.K * math.log(self.K)
        # t = 0 is kept as the decoupled limit
        if self.t is None:
            if not self.g >= 0:
                raise ValueError("g must be >= 0")
            object.__setattr__(self, "t", self.g / scale)
        else:
            if not self.t >= 0:
                raise ValueError("t must be >= 0")
            object.__setattr__(self, "g", self.t * scale)
        # s up to 2 is allowed for the quenched free energy
        if not 0 < self.s <= 2:
            raise ValueError("s must lie in (0, 2]")

    @classmethod
    def from_g(cls, K, g, E=0.0, s=1.0):
        return cls(K=K, g=g, E=E, s=s)

    @classmethod
    def from_t(cls, K, t, E=0.0, s=1.0):
        return cls(K=K, t=t, E=E, s=s)


@dataclass
class ResolventPool:
    samples: np.ndarray
    depth: int
    params: ModelParams
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("pool depth must be >= 1")

    @property
    def size(self) -> int:
        return len(self.samples)

    def draw_sums(self, rng: np.random.Generator, count: int, k: int) -> np.ndarray:
        """Sums of ``k`` pool elements drawn with replacement, ``count`` times."""
        if k == 0:
            return np.zeros(count)
        idx = rng.integers(0, self.size, size=(k, count))
        out = self.samples[idx[0]]
        for row in idx[1:]:
            out += self.samples[row]
        return out

    def to_csv(self, path):
        p = self.params
        header = (f"# depth={self.depth} seed={self.seed} K={p.K} t={p.t!r} "
                  f"E={p.E!r}\nindex,gamma")
        idx = np.arange(self.size)
        np.savetxt(path, np.column_stack([idx, self.samples]), delimiter=",",
                   header=header, comments="", fmt=["%d", "%.17g"])

    @classmethod
    def from_csv(cls, path, params: ModelParams, depth=None, seed=None):
        meta = {}
        with open(path) as fh:
            first = fh.readline()
        if first.startswith("#"):
            for tok in first[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2 if meta else 1,
                          ndmin=2)
        if depth is None:
            depth = int(meta.get("depth", 1))
        if seed is None and meta.get("seed", "None") != "None":
            seed = int(meta["seed"])
        return cls(data[:, 1].copy(), depth, params, seed)


def _denominators(d, params, rng, n, shift):
    """``V - E - shift`` for ``n`` fresh V, redrawing V where it is ~0."""
    den = d.sample(rng, n) - params.E - shift
    bad = np.flatnonzero(np.abs(den) < TINY)
    while bad.size:
        den[bad] = d.sample(rng, bad.size) - params.E - shift[bad]
        bad = bad[np.abs(den[bad]) < TINY]
    return den


def init_pool(d: DisorderDensity, params: ModelParams, N: int, seed: int) -> ResolventPool:
    """Depth-one pool: ``N`` draws of ``1 / (V - E)``."""
    if N < 1000:
        raise ValueError("pool size must be >= 1000")
    rng = np.random.default_rng(seed)
    den = _denominators(d, params, rng, N, np.zeros(N))
    return ResolventPool(1.0 / den, 1, params, seed)


def sweep_pool(pool: ResolventPool, d: DisorderDensity, rng: np.random.Generator,
               params: ModelParams | None = None) -> ResolventPool:
    """One application of the recursion to every pool element."""
    p = params or pool.params
    t2 = p.t * p.t
    N = pool.size
    shift = t2 * pool.draw_sums(rng, N, p.K)
    den = _denominators(d, p, rng, N, shift)
    return ResolventPool(1.0 / den, pool.depth + 1, p, pool.seed)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def converge_pool(d: DisorderDensity, params: ModelParams, N: int = 200_000,
                  seed: int = 0, *, check_every: int = 10, needed: int = 3,
                  max_sweeps: int = 500, min_depth: int = 2) -> ResolventPool:
    """Sweep from the depth-one pool until the law stops moving.

    Convergence: the KS distance between pools ``check_every`` sweeps
    apart stays below ``2 / sqrt(N)`` for ``needed`` consecutive checks.
    The pool is returned either way; ``diagnostics['converged']`` says
    whether the criterion was met.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    pool = init_pool(d, params, N, seed)
    ref = pool.samples
    target = 2.0 / math.sqrt(N)
    streak = 0
    history = []
    while pool.depth - 1 < max_sweeps:
        pool = sweep_pool(pool, d, rng)
        if (pool.depth - 1) % check_every == 0:
            ks = ks_distance(ref, pool.samples)
            history.append(ks)
            ref = pool.samples
            streak = streak + 1 if ks < target else 0
            if streak >= needed and pool.depth >= min_depth:
                break
    pool.diagnostics = {"converged": streak >= needed, "sweeps": pool.depth - 1,
                        "ks_history": history, "ks_target": target}
    if streak < needed:
        log.warning("pool not converged after %d sweeps (last KS %.3g, target %.3g)",
                    pool.depth - 1, history[-1] if history else float("nan"), target)
    return pool


# --------------------------------------------------------------------------
# effective density


@dataclass
class EffectiveDensity:
    """Tabulated density of ``V - E - t^2 sum_{i<K} Gamma_i``.

    ``cdf_values`` are the distribution function at the grid nodes; the
    kernel integrates the density over cells through it.  Beyond
    ``+-z_max`` both density and distribution follow a power law with the
    fitted exponent.
    """

    grid: np.ndarray
    values: np.ndarray
    cdf_values: np.ndarray
    tail_amplitude: float
    tail_exponent: float
    se: np.ndarray | None = None
    n_samples: int = 0
    estimator: str = "convolution"
    diagnostics: dict = field(default_factory=dict)

    @property
    def z_max(self) -> float:
        return float(self.grid[-1])

    @property
    def mass_left(self) -> float:
        return float(self.cdf_values[0])

    @property
    def mass_right(self) -> float:
        return float(1.0 - self.cdf_values[-1])

    @property
    def normalization(self) -> float:
        """Grid quadrature plus the mass carried by the tail model."""
        inner = np.trapezoid(self.values, self.grid)
        return float(inner + self.mass_left + self.mass_right)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.interp(z, self.grid, self.values)
        p = self.tail_exponent
        lo, hi = self.grid[0], self.grid[-1]
        a_left = self.mass_left * (p - 1) * (-lo) ** (p - 1) if self.mass_left > 0 else 0.0
        a_right = self.mass_right * (p - 1) * hi ** (p - 1) if self.mass_right > 0 else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(z < lo, a_left * np.abs(z) ** -p, out)
            out = np.where(z > hi, a_right * np.abs(z) ** -p, out)
        return out

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.interp(z, self.grid, self.cdf_values)
        q = self.tail_exponent - 1
        lo, hi = self.grid[0], self.grid[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(z < lo, self.mass_left * (-lo / np.abs(z)) ** q, out)
            out = np.where(z > hi, 1.0 - self.mass_right * (hi / np.abs(z)) ** q, out)
        return out

    def sup(self) -> float:
        return float(self.values.max())

    def to_csv(self, path):
        header = (f"# tail_amplitude={self.tail_amplitude:.17g} "
                  f"tail_exponent={self.tail_exponent:.17g}\n"
                  f"# mass_left={self.mass_left:.17g} mass_right={self.mass_right:.17g} "
                  f"n_samples={self.n_samples} estimator={self.estimator}\n"
                  "z,density")
        np.savetxt(path, np.column_stack([self.grid, self.values]), delimiter=",",
                   header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        n_comment = 0
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                n_comment += 1
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    meta[key] = val
        data = np.loadtxt(path, delimiter=",", skiprows=n_comment + 1, ndmin=2)
        z, rho = data[:, 0], data[:, 1]
        ml, mr = float(meta["mass_left"]), float(meta["mass_right"])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(z))])
        cdf = ml + cum * (1 - ml - mr) / cum[-1]
        return cls(z, rho, cdf, float(meta["tail_amplitude"]), float(meta["tail_exponent"]),
                   n_samples=int(meta.get("n_samples", 0)),
                   estimator=meta.get("estimator", "convolution"))


def hybrid_grid(z_max: float = 20.0, z_lin: float = 4.0, dz: float = 5e-4,
                n_log: int = 200) -> np.ndarray:
    """Uniform spacing ``dz`` on ``[-z_lin, z_lin]``, log spacing out to ``z_max``."""
    if z_lin >= z_max:
        z_lin = z_max
        n_log = 0
    m = int(round(z_lin / dz))
    z_lin = m * dz
    lin = np.arange(-m, m + 1) * dz
    if n_log == 0:
        return lin
    outer = np.geomspace(z_lin, z_max, n_log + 1)[1:]
    return np.concatenate([-outer[::-1], lin, outer])


def _uniform_mixture(S, w, shift, z):
    """Exact density, cdf and s.e. of ``V - shift - S`` for ``V ~ U[-w, w]``."""
    S = np.sort(S)
    M = len(S)
    cs = np.concatenate([[0.0], np.cumsum(S)])
    a = z + shift
    lo = np.searchsorted(S, -w - a, side="left")
    hi = np.searchsorted(S, w - a, side="right")
    frac = (hi - lo) / M
    dens = frac / (2 * w)
    se = np.sqrt(frac * (1 - frac) / M) / (2 * w)
    # cdf: E[clip((a + S + w) / 2w, 0, 1)]
    lo_o = np.searchsorted(S, -w - a, side="right")
    hi_o = np.searchsorted(S, w - a, side="left")
    n_mid = hi_o - lo_o
    s_mid = cs[hi_o] - cs[lo_o]
    cdf = ((a + w) * n_mid + s_mid) / (2 * w * M) + (M - hi_o) / M
    return dens, np.clip(cdf, 0.0, 1.0), se


def _generic_mixture(S, d, shift, z, dz, near=2.0, n_far=400):
    """``E_S f(z + shift + S)`` for f in (pdf, cdf, pdf^2) by binning S.

    S inside ``[-near, near]`` goes onto a lattice of spacing ``dz``
    (linear weights); the rest into log-spaced bins represented by their
    mean.  Lattice points of ``z`` are handled with FFT convolutions.
    """
    M = len(S)
    inner = np.abs(S) <= near
    Si = S[inner]
    L = int(math.ceil(near / dz))
    pos = (Si + L * dz) / dz
    j = np.floor(pos).astype(np.int64)
    frac = pos - j
    hist = np.bincount(j, weights=1 - frac, minlength=2 * L + 2)
    hist += np.bincount(j + 1, weights=frac, minlength=2 * L + 2)
    hist = hist[: 2 * L + 2]
    lattice = (np.arange(2 * L + 2) - L) * dz

    So = S[~inner]
    if So.size:
        edges = np.geomspace(near, max(np.abs(So).max(), near * 1.01) * 1.0001, n_far + 1)
        sgn = np.sign(So)
        b = np.clip(np.searchsorted(edges, np.abs(So)) - 1, 0, n_far - 1) + np.where(sgn > 0, n_far, 0)
        cnt = np.bincount(b, minlength=2 * n_far)
        tot = np.bincount(b, weights=So, minlength=2 * n_far)
        keep = cnt > 0
        far_s, far_w = tot[keep] / cnt[keep], cnt[keep].astype(float)
    else:
        far_s, far_w = np.zeros(0), np.zeros(0)

    funcs = (d.pdf, d.cdf, lambda u: d.pdf(u) ** 2)
    out = [np.zeros_like(z) for _ in funcs]

    on_lattice = np.abs(np.round(z / dz) * dz - z) < 1e-9 * dz
    zl = z[on_lattice]
    if zl.size:
        k = np.round(zl / dz).astype(np.int64)
        kmin, kmax = k.min(), k.max()
        # f on u_m = shift + m dz, m from kmin - L to kmax + L + 1
        m = np.arange(kmin - L, kmax + L + 2)
        u = shift + m * dz
        for f, o in zip(funcs, out):
            fu = f(u)
            # out[k] = sum_b hist[b] f(shift + (k + b - L) dz)
            conv = signal.fftconvolve(fu, hist[::-1], mode="valid")
            o[on_lattice] = conv[k - kmin]
    zo = z[~on_lattice]
    if zo.size:
        nz = hist > 0
        pts = np.concatenate([lattice[nz], far_s])
        wts = np.concatenate([hist[nz], far_w])
        for f, o in zip(funcs, out):
            vals = np.empty(zo.size)
            for c0 in range(0, zo.size, 64):
                block = zo[c0:c0 + 64]
                vals[c0:c0 + 64] = f(block[:, None] + shift + pts[None, :]) @ wts
            o[~on_lattice] = vals
    if far_s.size and zl.size:
        for f, o in zip(funcs, out):
            o[on_lattice] += f(zl[:, None] + shift + far_s[None, :]) @ far_w
    dens, cdf, sq = (o / M for o in out)
    se = np.sqrt(np.maximum(sq - dens**2, 0.0) / M)
    return dens, np.clip(cdf, 0.0, 1.0), se


def _kde(Z, grid, dz, bandwidth):
    """Gaussian KDE of samples ``Z`` at ``grid`` through a binned lattice."""
    M = len(Z)
    h = bandwidth
    lo, hi = grid[0] - 10 * h, grid[-1] + 10 * h
    sel = Z[(Z > lo) & (Z < hi)]
    nb = int(math.ceil((hi - lo) / dz))
    counts, edges = np.histogram(sel, bins=nb, range=(lo, hi))
    centers = 0.5 * (edges[1:] + edges[:-1])
    nz = counts > 0
    c, w = centers[nz], counts[nz].astype(float)
    dens = np.empty(grid.size)
    for c0 in range(0, grid.size, 256):
        g = grid[c0:c0 + 256]
        dens[c0:c0 + 256] = np.exp(-0.5 * ((g[:, None] - c[None, :]) / h) ** 2) @ w
    dens /= M * h * math.sqrt(2 * math.pi)
    return dens


def _fit_tail(Z, z_max, min_count=100):
    u = z_max / 2
    a = np.abs(Z)
    big = a[a > u]
    if big.size < min_count:
        raise ValueError(
            f"only {big.size} composite samples beyond z_max/2 = {u:g}; "
            "the tail cannot be fitted, enlarge z_max or the sample count")
    expo = 1.0 + big.size / np.log(big / u).sum()
    amp = 0.5 * (big.size / len(Z)) * (expo - 1) * u ** (expo - 1)
    return float(amp), float(expo), int(big.size)


def effective_density(pool: ResolventPool, d: DisorderDensity,
                      params: ModelParams | None = None, *, n_samples: int = 2_000_000,
                      z_max: float = 20.0, z_lin: float = 4.0, dz: float = 5e-4,
                      seed: int | None = None, estimator: str = "convolution",
                      grid: np.ndarray | None = None) -> EffectiveDensity:
    """Estimate the effective density from a converged pool.

    ``estimator='convolution'`` averages the known bare density over
    draws of ``S = t^2 sum_{i<K} Gamma_i``:  rho_eff(z) = E rho(z + E + S).
    That is unbiased at every z and carries no smoothing, so the edges of
    a box density survive.  ``estimator='kde'`` is the Gaussian kernel
    estimate on composite samples with Silverman's bandwidth clipped to
    ``[1e-4, 0.1]``.
    """
    p = params or pool.params
    if pool.depth < 2:
        raise ValueError("effective density needs a pool of depth >= 2")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    rng = np.random.default_rng(
        np.random.SeedSequence([pool.seed or 0, 2] if seed is None else [seed, 2]))
    S = p.t * p.t * pool.draw_sums(rng, n_samples, p.K - 1)
    V = d.sample(rng, n_samples)
    Z = V - p.E - S
    amp, expo, n_tail = _fit_tail(Z, z_max)

    z = hybrid_grid(z_max, z_lin, dz) if grid is None else np.asarray(grid, float)
    if estimator == "convolution":
        if isinstance(d, Uniform):
            dens, cdf, se = _uniform_mixture(S, d.halfwidth, p.E, z)
        else:
            dens, cdf, se = _generic_mixture(S, d, p.E, z, dz)
    elif estimator == "kde":
        sigma = float(np.std(Z))
        h = float(np.clip(1.06 * sigma * n_samples ** -0.2, 1e-4, 0.1))
        dens = _kde(Z, z, dz, h)
        se = np.sqrt(dens / (n_samples * h * 2 * math.sqrt(math.pi)))
        ml = np.mean(Z < z[0])
        mr = np.mean(Z > z[-1])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(z))])
        cdf = ml + cum * (1 - ml - mr) / cum[-1]
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    eff = EffectiveDensity(z, dens, cdf, amp, expo, se, n_samples, estimator)
    eff.diagnostics = {"n_tail": n_tail, "pool_depth": pool.depth,
                       "pool_size": pool.size}
    return eff


# --------------------------------------------------------------------------
# Cauchy closure


@dataclass(frozen=True)
class CauchyParams:
    location: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("Cauchy scale must be > 0")

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        c = self.scale
        return c / (math.pi * ((z - self.location) ** 2 + c * c))

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 + np.arctan((z - self.location) / self.scale) / math.pi

    def sup(self):
        return 1.0 / (math.pi * self.scale)


class NotConverged(RuntimeError):
    pass


def _reciprocal(x0, c):
    r = x0 * x0 + c * c
    return x0 / r, c / r


def cauchy_fixed_point(params: ModelParams, gamma: float = 1.0, *, tol: float = 1e-12,
                       max_iter: int = 100_000) -> tuple[CauchyParams, CauchyParams]:
    """Fixed point of the recursion inside the Cauchy family.

    Returns the law of ``Gamma`` and the effective density, both Cauchy.
    """
    K, t2, E = params.K, params.t**2, params.E
    m, sig = _reciprocal(-E, gamma)
    for it in range(max_iter):
        m_new, s_new = _reciprocal(-E - t2 * K * m, gamma + t2 * K * sig)
        if abs(m_new - m) <= tol and abs(s_new - sig) <= tol:
            m, sig = m_new, s_new
            break
        m, sig = m_new, s_new
    else:
        raise NotConverged(f"Cauchy map did not converge in {max_iter} iterations")
    eff = CauchyParams(-E - t2 * (K - 1) * m, gamma + t2 * (K - 1) * sig)
    return CauchyParams(m, sig), eff


def cauchy_effective(d: Cauchy, params: ModelParams) -> CauchyParams:
    return cauchy_fixed_point(params, d.scale)[1]


# --------------------------------------------------------------------------
# density estimates valid for any converged pool


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool | None
    note: str = ""


def tail_check(pool: ResolventPool, d: DisorderDensity, x=None) -> Check:
    """``P(|Gamma| > x) <= 2 ||rho||_inf / x`` on ``x in [1, 100]``, with 3 s.e. slack."""
    x = np.geomspace(1, 100, 41) if x is None else np.asarray(x, float)
    a = np.sort(np.abs(pool.samples))
    N = len(a)
    surv = 1.0 - np.searchsorted(a, x, side="right") / N
    se = np.sqrt(surv * (1 - surv) / N)
    bound = 2 * d.sup_norm / x
    excess = surv - bound - 3 * se
    k = int(np.argmax(surv / bound))
    return Check("tail_bound", float(surv[k] * x[k]), float(2 * d.sup_norm),
                 bool(np.all(excess <= 0)), "max of x P(|Gamma|>x) over [1, 100]")


def sup_check(eff: EffectiveDensity, d: DisorderDensity) -> Check:
    k = int(np.argmax(eff.values))
    se = 0.0 if eff.se is None else float(eff.se[k])
    return Check("sup_norm", float(eff.values[k]), d.sup_norm + 3 * se,
                 bool(eff.values[k] <= d.sup_norm + 3 * se), "max of effective density")


def lipschitz_check(eff: EffectiveDensity, d: DisorderDensity, span: float = 2.0,
                    step: float = 0.05) -> Check:
    """Pairwise differences ``|rho(e) - rho(e')| <= C |e - e'| + 3 (se + se')``."""
    if isinstance(d, Uniform):
        return Check("lipschitz", float("nan"), d.lipschitz, None,
                     "box density is not globally Lipschitz; not applicable")
    e = np.arange(-span, span + step / 2, step)
    v = eff.pdf(e)
    se = np.interp(e, eff.grid, eff.se) if eff.se is not None else np.zeros_like(e)
    diff = np.abs(v[:, None] - v[None, :])
    allow = d.lipschitz * np.abs(e[:, None] - e[None, :]) + 3 * (se[:, None] + se[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(diff > 0, diff / np.abs(e[:, None] - e[None, :]), 0.0)
    np.fill_diagonal(slope, 0.0)
    return Check("lipschitz", float(slope.max()), d.lipschitz, bool(np.all(diff <= allow)),
                 "largest difference quotient on a 0.05 lattice")


def pareto_check(pool: ResolventPool, d: DisorderDensity, params: ModelParams | None = None,
                 cap: float = 1e3, n: int = 1_000_000, seed: int = 0) -> Check:
    """Mean of ``t^2 sum_{i<K} min(Gamma_i^+, cap)`` against ``||rho|| K t^2 log cap``."""
    p = params or pool.params
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    pos = np.clip(pool.samples, 0.0, cap)
    idx = rng.integers(0, pool.size, size=(max(p.K - 1, 1), n))
    val = float(p.t**2 * pos[idx].sum(axis=0).mean())
    ref = d.sup_norm * p.K * p.t**2 * math.log(cap)
    ratio = val / ref if ref > 0 else float("nan")
    return Check("pareto", val, ref, bool(0.1 <= ratio <= 10), "within a factor 10")


def positivity_check(pool: ResolventPool, lo: float = 0.05, hi: float = 5.0,
                     bins: int = 100) -> Check:
    """Every bin of a histogram of Gamma over ``[-hi,-lo] U [lo,hi]`` is occupied."""
    edges = np.geomspace(lo, hi, bins // 2 + 1)
    g = pool.samples
    cp, _ = np.histogram(g[g > 0], bins=edges)
    cn, _ = np.histogram(-g[g < 0], bins=edges)
    least = int(min(cp.min(), cn.min()))
    return Check("positivity", float(least), 1.0, least >= 1, "smallest bin count")


def histogram(pool: ResolventPool, lim: float = 20.0, bins: int = 200):
    edges = np.linspace(-lim, lim, bins + 1)
    counts, _ = np.histogram(pool.samples, bins=edges)
    return edges, counts


def appendix_checks(pool: ResolventPool, eff: EffectiveDensity, d: DisorderDensity,
                    params: ModelParams | None = None, seed: int = 0) -> list[Check]:
    return [tail_check(pool, d), sup_check(eff, d), lipschitz_check(eff, d),
            pareto_check(pool, d, params, seed=seed), positivity_check(pool)]
