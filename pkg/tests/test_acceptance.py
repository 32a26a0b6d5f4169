"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line; the terminal summary
(see conftest) lists all of them together. The same experiments are
checked in as ``experiments/acceptance.yaml`` for the CLI.
"""

import math
import time

import numpy as np
import pytest

from predclass import (
    BernoulliMeasure,
    LaplacePredictor,
    MixturePredictor,
    UniformMeasure,
    WeightScheme,
    bernoulli_grid,
    build_gamma_prime,
    build_nu,
    build_rho_r,
    build_t_set,
    greedy_cover,
    jensen_gap_check,
    kl_exact,
    kl_identity,
    kl_monte_carlo,
    point_mass,
    random_markov,
    tv_ladder,
)
from predclass.cover import gamma_prime_bound_slack, nu_lower_bound_slack
from predclass.exact import all_paths
from predclass.harness import load_specs, run_experiment


def verdict(label, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, detail


def test_criterion_01_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(200):
        mu = random_markov(int(rng.integers(0, 3)), rng)
        rho = random_markov(int(rng.integers(0, 3)), rng)
        for n in range(1, 11):
            worst = max(worst, abs(kl_exact(mu, rho, n).value - kl_identity(mu, rho, n).value))
    elapsed = time.perf_counter() - t0
    verdict("01 conditional-sum == marginal KL", worst <= 1e-9 and elapsed < 60,
            f"max |gap| = {worst:.3e} (tol 1e-9), {elapsed:.1f}s (limit 60s)")


def test_criterion_02_markov_bound():
    measures = bernoulli_grid(0.1)
    rng = np.random.default_rng(2)
    measures += [random_markov(1, rng) for _ in range(20)]
    worst = -math.inf
    for rho in (UniformMeasure(), LaplacePredictor()):
        for mu in measures:
            for n in range(1, 13):
                worst = max(worst, build_t_set(mu, rho, n).complement_mu_mass - 1 / n)
    verdict("02 mu(X^n minus T) <= 1/n", worst <= 1e-12,
            f"max excess over 1/n = {worst:.3e} over {len(measures) * 2 * 12} cases")


def test_criterion_03_dominance():
    mix = MixturePredictor.from_scheme(bernoulli_grid(0.1), WeightScheme("inverse_square"))
    worst_exact = -math.inf
    for comp, w in zip(mix.components, mix.weights):
        for n in range(1, 13):
            worst_exact = max(worst_exact, kl_exact(comp, mix, n).value + math.log(w))
    # the point masses hit the bound with zero variance, so allow 1e-12 rounding
    worst_mc = -math.inf
    for comp, w in zip(mix.components, mix.weights):
        est = kl_monte_carlo(comp, mix, 1000, 10**4, seed=3)
        limit = -math.log(w)
        worst_mc = max(worst_mc, est.value - 3 * est.std_error - limit - 1e-12 * limit)
    verdict("03 d_n(mu_k, mix) <= -ln w_k", worst_exact <= 1e-12 and worst_mc <= 0,
            f"exact n<=12 max excess {worst_exact:.3e}; "
            f"MC n=1000 max (d - 3se + ln w) {worst_mc:.3e}")


def test_criterion_04_cover_trace():
    rho = LaplacePredictor()
    grid = bernoulli_grid(0.1)
    problems = []
    for n in range(1, 11):
        cov = greedy_cover(grid, rho, n)
        p_rho = np.exp(rho.log_marginals(all_paths(n)))
        prev = np.zeros(2**n, dtype=bool)
        for step in cov.steps:
            if np.any(prev & ~step.covered):
                problems.append(f"n={n} k={step.k} not nested")
            if p_rho[step.covered & ~prev].sum() > 1 / step.k + 1e-12:
                problems.append(f"n={n} k={step.k} increment above 1/k")
            prev = step.covered
        m = list(cov.masses) + [cov.residual]
        if any(b > a * (1 + 1e-12) for a, b in zip(m, m[1:])):
            problems.append(f"n={n} m_k increases")
        left = max(float(p_rho[t.mask & ~prev].sum()) for t in cov.tsets)
        if cov.residual != 0.0 or left != 0.0:
            problems.append(f"n={n} residual {cov.residual}, uncovered {left}")
    hand = greedy_cover([point_mass(0), point_mass(1)], UniformMeasure(), 1)
    if not (hand.K == 2 and hand.masses == (0.5, 0.5) and hand.chosen == (0, 1)):
        problems.append(f"hand trace K={hand.K} m={hand.masses}")
    verdict("04 greedy cover invariants", not problems,
            "; ".join(problems) or "n=1..10 exact; point masses K=2, m=(1/2, 1/2)")


def test_criterion_05_nu_lower_bound():
    nu = build_nu(bernoulli_grid(0.1), LaplacePredictor(), 8)
    worst = min(nu_lower_bound_slack(nu, n) for n in range(1, 9))
    verdict("05 nu(x) >= w_n w_k rho(x) / 2n on T_k^n", worst >= -1e-12,
            f"min log slack {worst:.4f} over n=1..8")


def test_criterion_06_gamma_prime():
    grid = bernoulli_grid(0.1)
    gp = build_gamma_prime(grid, 6)
    worst = min(gamma_prime_bound_slack(gp, grid, n) for n in range(1, 7))
    verdict("06 gamma'(x) >= w_n |X|^-n mu(x)", worst >= -1e-12,
            f"min log slack {worst:.4f} over n=1..6")


def test_criterion_07_laplace():
    mu, lap = BernoulliMeasure(0.3), LaplacePredictor()
    rates = [kl_exact(mu, lap, n).rate for n in (4, 8, 12)]
    mc = kl_monte_carlo(mu, lap, 1000, 10**4, seed=7)
    ok = rates[0] > rates[1] > rates[2] and mc.rate <= 0.01
    verdict("07 Laplace predicts Bernoulli(0.3)", ok,
            f"exact rates {', '.join(f'{r:.5f}' for r in rates)}; "
            f"MC n=1000 rate {mc.rate:.5f} (se {mc.std_error / 1000:.1e}, limit 0.01)")


def test_criterion_08_rho_r():
    mu = random_markov(2, np.random.default_rng(8))
    rho = build_rho_r(4)
    r50 = kl_monte_carlo(mu, rho, 50, 10**4, seed=8).rate
    r1000 = kl_monte_carlo(mu, rho, 1000, 10**4, seed=8).rate
    verdict("08 rho_R predicts a Markov(2) source", r1000 <= r50 / 3,
            f"rate n=50 {r50:.5f}, n=1000 {r1000:.5f}, ratio {r1000 / r50:.3f} (limit 1/3)")


def test_criterion_09_nu_end_to_end():
    t0 = time.perf_counter()
    nu = build_nu(bernoulli_grid(0.05), LaplacePredictor(), 12)
    mu = BernoulliMeasure(1 / math.pi)
    rates = [kl_exact(mu, nu, n).rate for n in (4, 8, 12)]
    mc = kl_monte_carlo(mu, nu, 2000, 10**4, seed=9)
    elapsed = time.perf_counter() - t0
    ok = rates[0] > rates[1] > rates[2] and mc.rate <= 0.05 and elapsed < 300
    verdict("09 cover-built nu on off-grid Bernoulli(1/pi)", ok,
            f"exact rates {', '.join(f'{r:.5f}' for r in rates)}; MC n=2000 rate {mc.rate:.5f} "
            f"(limit 0.05); {elapsed:.1f}s (limit 300s)")


def test_criterion_10_merging():
    mu = BernoulliMeasure(0.3)
    mix = MixturePredictor([BernoulliMeasure(0.3), BernoulliMeasure(0.7)], [0.5, 0.5])
    posts, worst_tv, monotone = [], 0.0, True
    for seed in range(1, 101):
        h = mu.sample(500, seed)
        posts.append(mix.posterior_weights(h)[0])
        tv = [e.value for e in tv_ladder(mu, mix, h, range(1, 7))]
        worst_tv = max(worst_tv, max(tv))
        monotone &= all(b >= a - 1e-12 for a, b in zip(tv, tv[1:]))
    mean = float(np.mean(posts))
    ok = mean >= 0.99 and worst_tv <= 0.01 and monotone
    verdict("10 posterior merging and TV", ok,
            f"mean posterior {mean:.6f} (>= 0.99); max TV {worst_tv:.2e} (<= 0.01); "
            f"nondecreasing in horizon: {monotone}")


def test_criterion_11_jensen():
    rng = np.random.default_rng(11)
    full = [tuple(p) for p in all_paths(6)]
    held = 0
    for _ in range(100):
        mu, rho = BernoulliMeasure(rng.uniform()), BernoulliMeasure(rng.uniform())
        idx = rng.choice(len(full), size=int(rng.integers(1, len(full) + 1)), replace=False)
        held += jensen_gap_check(mu, rho, [full[i] for i in idx])
    verdict("11 Jensen bound on random subsets", held == 100, f"{held}/100 triples hold")


@pytest.mark.slow
def test_checked_in_suite_fast_experiments():
    """The exact (non Monte Carlo) experiments of the YAML suite pass their bounds."""
    specs, _ = load_specs("experiments/acceptance.yaml")
    for spec in specs:
        if spec.estimator == "monte_carlo":
            continue
        report = run_experiment(spec, write=False)
        assert report.passed, [b.detail for b in report.summary if not b.passed]
