"""Critical couplings by five routes, plus closed-form bounds.

Methods
-------
A   kernel eigenvalue with the bare density
B   kernel eigenvalue with the effective density (closed form for Cauchy)
C   extrapolated quenched free energy from pooled cavity runs
D   smallest root of the first-order large-K equation
E   as D with the second-order correction factor
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cavity import extrapolated_free_energy
from .disorder import Cauchy, DisorderDensity, Uniform, window_extrema
from .kernel import CauchyClosed, Effective, assemble_kernel, grid_for, leading_eigen
from .rde import ModelParams, cauchy_fixed_point, converge_pool, effective_density

log = logging.getLogger(__name__)

# second-order coefficient of method E; reproduces the reference tables
E_COEFF = math.pi**2 / 48


def klogk(K: int) -> float:
    return K * math.log(K)


@dataclass
class ThresholdResult:
    method: str
    K: int
    E: float
    g_c: float | None
    uncertainty: float
    disorder: str = ""
    interval: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def t_c(self) -> float | None:
        return None if self.g_c is None else self.g_c / klogk(self.K)

    def disorder_strength(self, d: DisorderDensity | None = None) -> float | None:
        """Critical W (uniform) or gamma (Cauchy) at unit hopping."""
        if self.g_c is None or d is None:
            return None
        if isinstance(d, Uniform):
            return W_from_g(self.g_c, self.K, d.halfwidth)
        if isinstance(d, Cauchy):
            return gamma_from_g(self.g_c, self.K, d.scale)
        return None


CSV_COLUMNS = ["method", "disorder", "K", "E", "g_c", "t_c", "uncertainty",
               "W_c_or_gamma_c", "diagnostics_json"]


def fmt6(x) -> str:
    """6 significant digits, empty for absent values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6g}"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(fmt6(float(v))) if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def result_row(res: ThresholdResult, d: DisorderDensity | None = None) -> list[str]:
    diag = json.dumps(_jsonable(res.diagnostics), sort_keys=True, separators=(",", ":"))
    return [res.method, res.disorder, str(res.K), fmt6(res.E), fmt6(res.g_c), fmt6(res.t_c),
            fmt6(res.uncertainty), fmt6(res.disorder_strength(d)), diag]


# --------------------------------------------------------------------------
# unit conversions


def W_from_g(g: float, K: int, halfwidth: float = 1.0) -> float:
    return 2 * halfwidth * klogk(K) / g


def g_from_W(W: float, K: int, halfwidth: float = 1.0) -> float:
    return 2 * halfwidth * klogk(K) / W


def gamma_from_g(g: float, K: int, scale: float = 1.0) -> float:
    return scale * klogk(K) / g


def g_from_gamma(gamma: float, K: int, scale: float = 1.0) -> float:
    return scale * klogk(K) / gamma


# --------------------------------------------------------------------------
# closed forms


def _rho_at(d: DisorderDensity, E: float) -> float:
    rho = float(d.pdf(E))
    if not rho > 0:
        raise ValueError(f"rho(E) = 0 at E = {E}; the Lifshitz-tail regime is not supported")
    return rho


def gc_asymptotic(d: DisorderDensity, E: float = 0.0) -> float:
    return 1.0 / (4.0 * _rho_at(d, E))


def _smallest_root(f, g_hi: float, g_lo: float = 1e-6, steps: int = 10_000,
                   xtol: float = 1e-12) -> float | None:
    gs = np.geomspace(g_lo, g_hi, steps + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.array([f(g) for g in gs])
    pos = np.flatnonzero(vals > 0)
    if pos.size == 0:
        return None
    k = pos[0]
    if k == 0:
        return float(gs[0])
    a, b = gs[k - 1], gs[k]
    while b - a > xtol:
        m = 0.5 * (a + b)
        if f(m) > 0:
            b = m
        else:
            a = m
    return float(0.5 * (a + b))


def _large_k_root(rho: float, K: int, coeff: float) -> float | None:
    lk = math.log(klogk(K))
    llk = math.log(math.log(K))

    def f(g):
        L = math.log(g) - lk
        arg = -4.0 * rho * L * (1.0 + coeff / (L * L))
        if not arg > 0:
            return -math.inf
        return math.log(g) - llk + math.log(arg)

    # admissible g keeps log g - log(K log K) < 0
    return _smallest_root(f, klogk(K) * (1 - 1e-12))


def gc_formula_D(d: DisorderDensity, K: int, E: float = 0.0) -> float | None:
    """Smallest root of ``log g - log log K + log(-4 rho(E) L)``, ``L = log(g / K log K)``."""
    return _large_k_root(_rho_at(d, E), K, 0.0)


def gc_formula_E(d: DisorderDensity, K: int, coeff: float = E_COEFF) -> float | None:
    """As ``gc_formula_D`` at ``E = 0`` with the factor ``1 + coeff / L^2``."""
    return _large_k_root(_rho_at(d, 0.0), K, coeff)


def corollary_bounds(d: DisorderDensity, K: int, eps: float) -> tuple[float, float]:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    base = 1.0 / (klogk(K) * 4.0 * d.sup_norm)
    return (1 - eps) * base, (1 + eps) * base


def free_energy_lower_bound(d: DisorderDensity, params: ModelParams, alpha: float) -> float:
    """``log t + log[-4 m log t + 2 M log alpha - 2 C]_+``; ``-inf`` when the bracket is <= 0."""
    t = params.t
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    m, M = window_extrema(d, params.E, alpha)
    arg = -4 * m * math.log(t) + 2 * M * math.log(alpha) - 2 * d.lipschitz
    if arg <= 0:
        return -math.inf
    return math.log(t) + math.log(arg)


def appendix_constants(d: DisorderDensity, G: float) -> tuple[float, float]:
    """Envelope constants for the effective density tail: ``(C1, small_z)``."""
    if not G > 0:
        raise ValueError("G must be > 0")
    vs, Cs = d.tail
    rho = d.sup_norm
    return 8 ** (1 + vs) * Cs + 4 * G * G * rho * rho, 2 ** (1 + vs) * rho


# --------------------------------------------------------------------------
# numerical thresholds


@dataclass
class EigenOptions:
    # None: DEFAULT_BRACKET for A; for B a window of +/- b_window around the A root
    bracket: tuple[float, float] | None = None
    b_window: float = 0.1
    tol: float = 2.5e-4
    max_expand: int = 4
    x_max: float = 1e4
    per_decade: int = 160
    n: int | None = None
    x_min_factor: float | None = None
    quadrature: str = "cell"
    eig_tol: float = 1e-12
    pool_size: int = 200_000
    n_samples: int = 2_000_000
    z_max: float = 20.0
    estimator: str = "convolution"
    max_sweeps: int = 500
    seed: int = 2024


DEFAULT_BRACKET = (0.05, 2.0)


class NotBracketed(RuntimeError):
    pass


def _bisect(fun, lo, hi, tol, max_expand, lower_limit=1e-4):
    """Bisection on the sign of ``fun``, expanding the bracket if needed."""
    f_lo, f_hi = fun(lo), fun(hi)
    n_exp = 0
    while f_lo * f_hi > 0 and n_exp < max_expand:
        n_exp += 1
        if f_lo > 0:
            lo = max(lo / 2, lower_limit)
            f_lo = fun(lo)
        else:
            hi = hi * 2
            f_hi = fun(hi)
    if f_lo * f_hi > 0:
        raise NotBracketed(
            f"criterion not bracketed on [{lo:g}, {hi:g}]: values {f_lo:.4g}, {f_hi:.4g}")
    evals = 2 + n_exp
    while 0.5 * (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        evals += 1
        if f_mid == 0:
            lo = hi = mid
            break
        if (f_mid > 0) == (f_hi > 0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return lo, hi, evals, n_exp


def eigen_lambda(method: str, d: DisorderDensity, params: ModelParams,
                 opts: EigenOptions, diag: dict | None = None):
    """Leading eigenvalue at ``s = 1`` for method A or B."""
    if method == "A":
        source = d
    elif method == "B":
        if isinstance(d, Cauchy):
            source = CauchyClosed(cauchy_fixed_point(params, d.scale)[1])
        else:
            pool = converge_pool(d, params, opts.pool_size, opts.seed,
                                 max_sweeps=opts.max_sweeps)
            eff = effective_density(pool, d, params, n_samples=opts.n_samples,
                                    z_max=opts.z_max, seed=opts.seed,
                                    estimator=opts.estimator)
            source = Effective(eff)
            if diag is not None:
                diag.setdefault("pool_sweeps", []).append(pool.diagnostics["sweeps"])
                if not pool.diagnostics["converged"]:
                    diag["pool_not_converged"] = diag.get("pool_not_converged", 0) + 1
    else:
        raise ValueError(f"eigen threshold needs method A or B, got {method!r}")
    grid = grid_for(params.t, opts.x_max, opts.per_decade, opts.x_min_factor, opts.n)
    res = leading_eigen(assemble_kernel(source, params, grid, quadrature=opts.quadrature),
                        opts.eig_tol)
    if diag is not None:
        diag["grid_n"] = grid.n
        diag.setdefault("iterations", []).append(res.iterations)
    return res.lam


def threshold_eigen(method: str, d: DisorderDensity, K: int, E: float = 0.0,
                    opts: EigenOptions | None = None) -> ThresholdResult:
    opts = opts or EigenOptions()
    _rho_at(d, E)
    diag: dict = {}

    def fun(g):
        p = ModelParams(K=K, g=g, E=E, s=1.0)
        return math.log(eigen_lambda(method, d, p, opts, diag) * K)

    bracket = opts.bracket
    if bracket is None and method == "B" and not isinstance(d, Cauchy):
        # at small g too few composite samples reach the tail-fit region
        g_a = threshold_eigen("A", d, K, E, replace(opts, bracket=None)).g_c
        bracket = (g_a * (1 - opts.b_window), g_a * (1 + opts.b_window))
        diag["bracket_from_A"] = round(g_a, 6)
    lo, hi, evals, n_exp = _bisect(fun, *(bracket or DEFAULT_BRACKET), opts.tol,
                                   opts.max_expand)
    diag.update({"evaluations": evals, "bracket_expansions": n_exp,
                 "x_max": opts.x_max, "quadrature": opts.quadrature})
    if method == "B" and not isinstance(d, Cauchy):
        diag.update({"pool_size": opts.pool_size, "n_samples": opts.n_samples,
                     "estimator": opts.estimator})
        diag["pool_sweeps"] = max(diag.get("pool_sweeps", [0]))
    diag["iterations"] = max(diag.pop("iterations", [0]))
    return ThresholdResult(method, K, E, 0.5 * (lo + hi), 0.5 * (hi - lo), d.label,
                           None, diag)


@dataclass
class CavityOptions:
    N_list: tuple[int, ...] = (10_000, 30_000, 100_000)
    R_list: tuple[int, ...] = (1000, 3000)
    seeds: int = 4
    bracket: tuple[float, float] = (0.05, 2.0)
    n_scan: int = 6
    tol: float = 2e-3
    s: float = 1.0
    burn_in_frac: float = 0.1
    basis: str = "auto"
    z_resolve: float = 2.0
    max_evals: int = 16
    seed: int = 2024


def threshold_cavity(d: DisorderDensity, K: int, E: float = 0.0,
                     opts: CavityOptions | None = None, runner=None) -> ThresholdResult:
    """Root of ``phi(g) + log K`` with statistical stopping.

    A geometric scan over the bracket isolates a sign change; bisection
    then continues while the bracket is wider than ``tol`` and the sign
    at the midpoint is resolved at ``z_resolve`` standard errors.
    """
    opts = opts or CavityOptions()
    _rho_at(d, E)
    seeds = [int(x) for x in np.random.SeedSequence(opts.seed).generate_state(opts.seeds)]
    evals = []

    def fun(g):
        p = ModelParams(K=K, g=g, E=E, s=opts.s)
        ex = extrapolated_free_energy(d, p, opts.N_list, opts.R_list, seeds,
                                      burn_in_frac=opts.burn_in_frac, basis=opts.basis,
                                      runner=runner)
        val = ex.phi_inf + math.log(K)
        evals.append((g, val, ex.stderr))
        log.info("cavity g=%.5f phi+logK=%.5f se=%.2g", g, val, ex.stderr)
        return val, ex.stderr

    lo_b, hi_b = opts.bracket
    scan = np.geomspace(lo_b, hi_b, opts.n_scan)
    vals = []
    lo = hi = None
    for g in scan:
        v, se = fun(g)
        vals.append(v)
        if len(vals) > 1 and vals[-2] < 0 <= v:
            lo, hi = scan[len(vals) - 2], g
            break
    diag = {"N_list": list(opts.N_list), "R_list": list(opts.R_list), "seeds": opts.seeds,
            "s": opts.s, "basis": opts.basis}
    if lo is None:
        diag["evaluations"] = [list(e) for e in evals]
        raise NotBracketed(f"cavity criterion not bracketed by scan over [{lo_b:g}, {hi_b:g}]")
    resolved = True
    while hi - lo > opts.tol and len(evals) < opts.max_evals:
        mid = 0.5 * (lo + hi)
        v, se = fun(mid)
        if not abs(v) > opts.z_resolve * se:
            resolved = False
            break
        if v > 0:
            hi = mid
        else:
            lo = mid
    diag["evaluations"] = [list(e) for e in evals]
    diag["resolved"] = resolved
    g_c = 0.5 * (lo + hi)
    return ThresholdResult("C", K, E, g_c, 0.5 * (hi - lo), d.label, (lo, hi), diag)
