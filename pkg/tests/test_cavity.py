import math

import numpy as np
import pytest
from scipy import stats

from treeloc.cavity import (FreeEnergyRun, extrapolated_free_energy, fit_N, fit_R, fit_runs_R,
                            free_energy_run)
from treeloc.disorder import Cauchy, Uniform
from treeloc.rde import ModelParams, cauchy_fixed_point


# -- fits ---------------------------------------------------------------------

def test_fit_R_exact():
    R = np.array([1000, 2000, 5000])
    fit = fit_R(R, 0.7 + 3 / R)
    assert fit.stage == "R_extrapolation"
    assert fit.limit == pytest.approx(0.7, abs=1e-12)
    assert fit.coefficients["a"] == pytest.approx(3.0, abs=1e-9)
    assert fit.residual_rms < 1e-12


def test_fit_R_noise_within_propagated_error():
    R = np.array([1000, 2000, 5000, 10000])
    rng = np.random.default_rng(4)
    sigma = np.full(len(R), 1e-3)
    z = []
    for _ in range(200):
        fit = fit_R(R, 0.7 + 3 / R + rng.normal(0, 1e-3, len(R)), sigma)
        z.append((fit.limit - 0.7) / fit.stderr["phi_inf"])
    z = np.abs(np.array(z))
    assert z.max() < 4 and np.mean(z > 3) < 0.02


def test_fit_R_constant():
    fit = fit_R([1000, 3000, 9000], [0.25] * 3)
    assert fit.limit == pytest.approx(0.25, abs=1e-14)
    assert fit.coefficients["a"] == pytest.approx(0.0, abs=1e-9)


def test_fit_R_rejects_equal_R():
    with pytest.raises(ValueError):
        fit_R([1000, 1000, 1000], [0.1, 0.2, 0.3])


def test_fit_N_exact_full_basis():
    N = np.array([1e4, 1e5, 1e6, 4e6])
    L = np.log(N)
    fit = fit_N(N, -0.69 + 0.5 / L - 1.2 / L**2)
    assert fit.coefficients["basis"] == "full"
    assert fit.limit == pytest.approx(-0.69, abs=1e-10)
    assert fit.coefficients["b"] == pytest.approx(0.5, abs=1e-8)
    assert fit.coefficients["c"] == pytest.approx(-1.2, abs=1e-7)


def test_fit_N_noise_within_5_sigma():
    N = np.array([1e4, 3e4, 1e5, 3e5, 1e6, 4e6])
    L = np.log(N)
    rng = np.random.default_rng(8)
    for _ in range(50):
        y = -0.69 + 0.5 / L - 1.2 / L**2 + rng.normal(0, 1e-3, len(N))
        fit = fit_N(N, y, sigma=np.full(len(N), 1e-3))
        assert abs(fit.limit + 0.69) < 5 * fit.stderr["phi_inf"]


def test_fit_N_independent_data():
    fit = fit_N([1e4, 1e5, 1e6, 4e6], [-0.5] * 4)
    assert fit.limit == pytest.approx(-0.5, abs=1e-12)
    assert fit.coefficients["b"] == pytest.approx(0.0, abs=1e-9)
    assert fit.coefficients["c"] == pytest.approx(0.0, abs=1e-9)


def test_fit_N_auto_falls_back_to_reduced():
    N = np.array([1e4, 3e4, 1e5])
    L = np.log(N)
    fit = fit_N(N, -0.7 + 2.0 / L**2)
    assert fit.coefficients["basis"] == "reduced"
    assert fit.limit == pytest.approx(-0.7, abs=1e-10)
    with pytest.raises(ValueError):
        fit_N(N, -0.7 + 2.0 / L**2, basis="full")


def test_fit_N_ill_conditioned_rejected():
    N = 1e4 * (1 + np.array([0.0, 1e-13]))
    with pytest.raises(np.linalg.LinAlgError, match="widen"):
        fit_N(N, [0.1, 0.2], basis="reduced")


# -- runs -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def run():
    return free_energy_run(Uniform(), ModelParams(K=2, g=0.15), 10_000, 200, seed=3)


def test_run_invariants(run):
    assert isinstance(run, FreeEnergyRun)
    assert run.increments.shape == (200,) and np.all(np.isfinite(run.increments))
    assert run.burn_in == 20
    assert run.estimate == pytest.approx(run.increments[20:].mean() - math.log(2), rel=1e-15)
    assert run.estimate_at(100) == pytest.approx(run.increments[10:100].mean() - math.log(2))


def test_run_deterministic(run):
    again = free_energy_run(Uniform(), ModelParams(K=2, g=0.15), 10_000, 200, seed=3)
    assert np.array_equal(run.increments, again.increments)


def test_run_csv(tmp_path, run):
    run.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "sweep_index,delta_phi" and len(lines) == 201
    back = np.loadtxt(tmp_path / "r.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 0], np.arange(1, 201))
    np.testing.assert_allclose(back[:, 1], run.increments, rtol=1e-5)


@pytest.mark.parametrize("kw", [dict(N=5000, R=100), dict(N=10_000, R=5)])
def test_run_rejects(kw):
    with pytest.raises(ValueError):
        free_energy_run(Uniform(), ModelParams(K=2, g=0.15), seed=0, **kw)


def test_fit_runs_R_uses_prefix_estimates(run):
    short = FreeEnergyRun(run.params, run.N, 100, run.increments[:100], run.seed, 10)
    fit = fit_runs_R([short, run])
    assert fit.limit == pytest.approx(
        fit_R([100, 200], [run.estimate_at(100), run.estimate]).limit, rel=1e-14)


def annealed_check(d, params, expected, seeds=range(4), N=10_000, R=1000):
    est = np.array([free_energy_run(d, params, N, R, s).estimate for s in seeds])
    se = est.std(ddof=1) / math.sqrt(len(est))
    assert abs(est.mean() - expected) < 3 * se + 1e-4, (est.mean(), expected, se)


def test_annealed_regime_uniform():
    # small t and s: log-moment of |t/V|^s is finite and the path sum is self-averaging
    s, t = 0.3, 1e-4
    annealed_check(Uniform(), ModelParams(K=2, t=t, s=s), s * math.log(t) - math.log(1 - s))


def test_annealed_regime_cauchy_closed_moment():
    s, t = 0.3, 1e-3
    p = ModelParams(K=2, t=t, s=s)
    law, _ = cauchy_fixed_point(p, 1.0)
    assert law.location == 0
    # E|X|^s = c^s / cos(pi s / 2) for a centered Cauchy law of scale c
    expected = s * math.log(t * law.scale) - math.log(math.cos(math.pi * s / 2))
    annealed_check(Cauchy(), p, expected)


def test_monotone_in_t():
    gs = np.linspace(0.10, 0.20, 5)
    runs = [free_energy_run(Uniform(), ModelParams(K=2, g=g), 10_000, 500, seed=1) for g in gs]
    est = np.array([r.estimate for r in runs])
    se = np.array([r.stderr_at() for r in runs])
    for i in range(4):
        for j in range(i + 1, 5):
            assert est[j] - est[i] > -2 * math.hypot(se[i], se[j])


def test_seed_spread_scales_with_pool_size():
    p = ModelParams(K=2, g=0.3)
    spread = []
    for N in (10_000, 40_000):
        est = [free_energy_run(Uniform(), p, N, 500, seed).estimate for seed in range(16)]
        spread.append(np.var(est, ddof=1))
    ratio = spread[1] / spread[0]
    # variance ratio consistent with 1/4 at the 1% two-sided F level, and below 1
    lo, hi = stats.f.ppf([0.005, 0.995], 15, 15)
    assert 0.25 * lo <= ratio <= 0.25 * hi
    assert ratio < 1


def test_extrapolation_runner_and_table():
    calls = []

    def runner(fun, jobs):
        calls.extend(jobs)
        return [fun(j) for j in jobs]

    ex = extrapolated_free_energy(Uniform(), ModelParams(K=2, g=0.3), (10_000, 20_000),
                                  (100, 200), [0, 1], runner=runner)
    assert calls == [(0, 10_000), (0, 20_000), (1, 10_000), (1, 20_000)]
    assert len(ex.per_seed) == 2 and np.isfinite(ex.stderr)
    assert ex.phi_inf == pytest.approx(ex.per_seed.mean())
    assert set(ex.table) == set(calls) and all(len(v) == 2 for v in ex.table.values())


@pytest.mark.slow
def test_critical_free_energy_near_minus_log_K():
    r = free_energy_run(Uniform(), ModelParams(K=2, g=0.153), 100_000, 5000, seed=0)
    assert abs(r.estimate + math.log(2)) < 0.02


@pytest.mark.slow
def test_s_independence_at_criticality():
    # single-N estimates differ strongly at s = 1.5; the extrapolated limits agree
    out = []
    for s in (1.0, 1.5):
        ex = extrapolated_free_energy(Uniform(), ModelParams(K=2, g=0.153, s=s),
                                      (10_000, 30_000, 100_000), (1000, 3000), range(4))
        out.append((ex.phi_inf, ex.stderr))
    (a, sa), (b, sb) = out
    assert abs(a - b) < 3 * math.hypot(sa, sb)
