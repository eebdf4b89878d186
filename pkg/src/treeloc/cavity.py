"""Quenched free energy of the tree by pooled cavity iteration.

Each pool element carries a cavity resolvent ``Gamma`` and a normalized
partial partition function ``y``.  A new element picks ``K`` predecessors
``j_1..j_K`` and sets

    Gamma' = 1 / (V - E - t^2 sum_a Gamma_{j_a})
    y'     = |t Gamma'|^s * sum_a y_{j_a}

After every sweep the log of the pool mean of ``y'`` is recorded and
``y'`` is divided by that mean.  The reported free energy is the mean
increment after burn-in minus ``log K``, so that the localization
threshold sits at ``-log K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disorder import DisorderDensity
from .rde import ModelParams, _denominators


@dataclass
class FreeEnergyRun:
    params: ModelParams
    N: int
    R: int
    increments: np.ndarray
    seed: int
    burn_in: int

    @property
    def estimate(self) -> float:
        return self.estimate_at(self.R)

    def estimate_at(self, R: int, burn_in_frac: float | None = None) -> float:
        """Estimate from the first ``R`` sweeps, burn-in ``R * burn_in_frac``."""
        if not 0 < R <= self.R:
            raise ValueError(f"R must lie in (0, {self.R}]")
        frac = self.burn_in / self.R if burn_in_frac is None else burn_in_frac
        b = int(R * frac)
        return float(self.increments[b:R].mean()) - math.log(self.params.K)

    def stderr_at(self, R: int | None = None) -> float:
        """Naive standard error from batch means (20 batches)."""
        R = self.R if R is None else R
        b = int(R * self.burn_in / self.R)
        inc = self.increments[b:R]
        nb = 20
        m = len(inc) // nb
        if m < 1:
            return float("nan")
        means = inc[: nb * m].reshape(nb, m).mean(axis=1)
        return float(means.std(ddof=1) / math.sqrt(nb))

    def to_csv(self, path):
        idx = np.arange(1, self.R + 1)
        np.savetxt(path, np.column_stack([idx, self.increments]), delimiter=",",
                   header="sweep_index,delta_phi", comments="", fmt=["%d", "%.6g"])


def free_energy_run(d: DisorderDensity, params: ModelParams, N: int, R: int, seed: int,
                    *, burn_in_frac: float = 0.1, min_pool: int = 10_000) -> FreeEnergyRun:
    if N < min_pool:
        raise ValueError(f"pool size must be >= {min_pool}")
    if R < 10:
        raise ValueError("R must be >= 10")
    if not 0 <= burn_in_frac < 1:
        raise ValueError("burn_in_frac must lie in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, N, 3]))
    K, t, s = params.K, params.t, params.s
    t2 = t * t
    gam = 1.0 / _denominators(d, params, rng, N, np.zeros(N))
    y = np.ones(N)
    inc = np.empty(R)
    for r in range(R):
        idx = rng.integers(0, N, size=(K, N))
        gsum = gam[idx[0]]
        ysum = y[idx[0]]
        for a in range(1, K):
            gsum += gam[idx[a]]
            ysum += y[idx[a]]
        gam = 1.0 / _denominators(d, params, rng, N, t2 * gsum)
        w = np.abs(t * gam)
        if s != 1:
            w **= s
        y = w * ysum
        mean = y.mean()
        if not (np.isfinite(mean) and mean > 0):
            raise FloatingPointError(f"pool partition function degenerate at sweep {r + 1}")
        inc[r] = math.log(mean)
        y /= mean
    return FreeEnergyRun(params, N, R, inc, seed, int(R * burn_in_frac))


@dataclass
class ScalingFit:
    stage: str
    coefficients: dict
    residual_rms: float
    stderr: dict = field(default_factory=dict)

    @property
    def limit(self) -> float:
        return self.coefficients["phi_inf"]


def _lstsq(X, y, sigma=None):
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(
            f"ill-conditioned scaling fit (condition number {cond:.3g}); widen the size range")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    cov = None
    if sigma is not None:
        Xi = np.linalg.pinv(X)
        cov = Xi @ np.diag(np.asarray(sigma, float) ** 2) @ Xi.T
    return coef, rms, cov


def fit_R(R_values, phi_values, sigma=None) -> ScalingFit:
    """Fit ``phi(R) = phi_inf + a / R``.  Two distinct R give an exact solve."""
    R = np.asarray(R_values, dtype=float)
    y = np.asarray(phi_values, dtype=float)
    if len(np.unique(R)) < 2:
        raise ValueError("R extrapolation needs at least two distinct R values")
    X = np.column_stack([np.ones_like(R), 1.0 / R])
    coef, rms, cov = _lstsq(X, y, sigma)
    se = {} if cov is None else {"phi_inf": float(np.sqrt(cov[0, 0])), "a": float(np.sqrt(cov[1, 1]))}
    return ScalingFit("R_extrapolation", {"phi_inf": float(coef[0]), "a": float(coef[1])}, rms, se)


def fit_runs_R(runs) -> ScalingFit:
    """``fit_R`` over a list of runs at fixed N."""
    Ns = {r.N for r in runs}
    if len(Ns) != 1:
        raise ValueError("runs passed to fit_runs_R must share N")
    return fit_R([r.R for r in runs], [r.estimate for r in runs])


def fit_N(N_values, phi_values, sigma=None, basis: str = "auto") -> ScalingFit:
    """Fit ``phi(N) = phi_inf + b / log N + c / log(N)^2``.

    ``basis='full'`` needs at least four distinct N spanning two decades.
    ``basis='reduced'`` drops the ``1/log N`` term and needs two.
    ``basis='auto'`` picks full when its requirements hold, else reduced.
    """
    N = np.asarray(N_values, dtype=float)
    y = np.asarray(phi_values, dtype=float)
    distinct = np.unique(N)
    full_ok = len(distinct) >= 4 and distinct[-1] / distinct[0] >= 100
    if basis == "auto":
        basis = "full" if full_ok else "reduced"
    L = np.log(N)
    if basis == "full":
        if not full_ok:
            raise ValueError("full N extrapolation needs >= 4 distinct N spanning >= 2 decades")
        X = np.column_stack([np.ones_like(L), 1 / L, 1 / L**2])
    elif basis == "reduced":
        if len(distinct) < 2:
            raise ValueError("N extrapolation needs at least two distinct N values")
        X = np.column_stack([np.ones_like(L), 1 / L**2])
    else:
        raise ValueError(f"unknown basis {basis!r}")
    coef, rms, cov = _lstsq(X, y, sigma)
    if basis == "full":
        c = {"phi_inf": float(coef[0]), "b": float(coef[1]), "c": float(coef[2])}
    else:
        c = {"phi_inf": float(coef[0]), "b": 0.0, "c": float(coef[1])}
    se = {} if cov is None else {"phi_inf": float(np.sqrt(cov[0, 0]))}
    fit = ScalingFit("N_extrapolation", c, rms, se)
    fit.coefficients["basis"] = basis
    return fit


@dataclass
class Extrapolation:
    """Two-stage extrapolated free energy at one coupling."""

    params: ModelParams
    phi_inf: float
    stderr: float
    per_seed: np.ndarray
    table: dict


def extrapolated_free_energy(d: DisorderDensity, params: ModelParams, N_list, R_list,
                             seeds, *, burn_in_frac: float = 0.1, basis: str = "auto",
                             runner=None) -> Extrapolation:
    """R then N extrapolation for every seed; mean and s.e. across seeds.

    Shorter R values reuse the prefix of the longest run at each (N, seed).
    """
    R_list = sorted(set(int(r) for r in R_list))
    N_list = sorted(set(int(n) for n in N_list))
    R_max = R_list[-1]
    jobs = [(seed, N) for seed in seeds for N in N_list]
    run = lambda job: free_energy_run(d, params, job[1], R_max, job[0], burn_in_frac=burn_in_frac)
    runs = list(runner(run, jobs)) if runner else [run(j) for j in jobs]
    by = {j: r for j, r in zip(jobs, runs)}
    table = {}
    per_seed = []
    for seed in seeds:
        phiN = []
        for N in N_list:
            vals = [by[(seed, N)].estimate_at(R, burn_in_frac) for R in R_list]
            table[(seed, N)] = vals
            phiN.append(fit_R(R_list, vals).limit if len(R_list) > 1 else vals[0])
        per_seed.append(fit_N(N_list, phiN, basis=basis).limit if len(N_list) > 1 else phiN[0])
    per_seed = np.array(per_seed)
    se = float(per_seed.std(ddof=1) / math.sqrt(len(per_seed))) if len(per_seed) > 1 else float("nan")
    return Extrapolation(params, float(per_seed.mean()), se, per_seed, table)
