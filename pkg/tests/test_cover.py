import math

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
    build_t_set,
    greedy_cover,
    point_mass,
    random_markov,
)
from predclass.config import measure_from_spec
from predclass.cover import NuPredictor, gamma_prime_bound_slack, nu_lower_bound_slack
from predclass.errors import EnumerationCapError, InputError, SpecError
from predclass.exact import all_paths, closed_form_log_marginals

from conftest import all_strings


def greedy_oracle(class_C, rho, n):
    """Set-based greedy cover with plain dicts, ties to the lowest index."""
    strings = all_strings(n)
    r = {x: math.exp(rho.log_marginal(x)) for x in strings}
    tsets = [{x for x in strings if math.exp(m.log_marginal(x)) >= r[x] / n} for m in class_C]
    covered, chosen, masses = set(), [], []
    while True:
        gains = [sum(r[x] for x in t - covered) for t in tsets]
        top = max(gains)
        if top <= 0:
            return chosen, masses
        j = next(i for i, g in enumerate(gains) if g >= top * (1 - 1e-12))
        chosen.append(j)
        masses.append(gains[j])
        covered |= tsets[j]


# --- T-sets -----------------------------------------------------------------


def test_t_set_hand_example():
    t = build_t_set(BernoulliMeasure(0.9), UniformMeasure(), 2)
    assert t.members() == [(0, 0)]
    assert t.mu_mass == pytest.approx(0.81)
    assert t.complement_mu_mass == pytest.approx(0.19)
    assert t.rho_mass == pytest.approx(0.25)


def test_t_set_of_reference_is_everything():
    rho = LaplacePredictor()
    for n in (1, 4, 7):
        assert len(build_t_set(rho, rho, n)) == 2**n


def test_t_set_point_mass():
    t = build_t_set(point_mass(0), UniformMeasure(), 3)
    assert t.members() == [(0, 0, 0)]
    assert t.mu_mass == 1.0


@pytest.mark.parametrize("rho", [UniformMeasure(), LaplacePredictor()], ids=["uniform", "laplace"])
def test_markov_bound_everywhere(rho):
    rng = np.random.default_rng(11)
    measures = bernoulli_grid(0.1) + [random_markov(1, rng) for _ in range(5)]
    for mu in measures:
        for n in range(1, 13):
            assert build_t_set(mu, rho, n).complement_mu_mass <= 1 / n + 1e-12


def test_t_set_bad_horizon():
    with pytest.raises(InputError):
        build_t_set(UniformMeasure(), UniformMeasure(), 0)


# --- greedy cover -------------------------------------------------------------


def test_cover_point_masses_hand_trace():
    cov = greedy_cover([point_mass(0), point_mass(1)], UniformMeasure(), 1)
    assert cov.chosen == (0, 1)
    assert cov.K == 2
    assert cov.masses == (0.5, 0.5) and cov.residual == 0.0
    rows = cov.trace_rows()
    assert [r["m_k"] for r in rows] == [0.5, 0.5, 0.0]
    assert [r["rho_cum_mass"] for r in rows] == [0.5, 1.0, 1.0]


def test_cover_tie_goes_to_lowest_index():
    cov = greedy_cover([point_mass(1), point_mass(0)], UniformMeasure(), 1)
    assert cov.chosen == (0, 1)


def test_cover_singleton_class():
    mu = BernoulliMeasure(0.2)
    cov = greedy_cover([mu], LaplacePredictor(), 6)
    assert cov.K == 1
    np.testing.assert_array_equal(cov.steps[0].covered, build_t_set(mu, LaplacePredictor(), 6).mask)


@pytest.mark.parametrize("n", [1, 3, 6, 8])
def test_cover_matches_set_oracle(n):
    grid = bernoulli_grid(0.1)
    rho = LaplacePredictor()
    cov = greedy_cover(grid, rho, n)
    chosen, masses = greedy_oracle(grid, rho, n)
    assert list(cov.chosen) == chosen
    np.testing.assert_allclose(cov.masses, masses, rtol=1e-12)


def test_cover_union_beats_best_single_set():
    grid = bernoulli_grid(0.1)
    rho = LaplacePredictor()
    cov = greedy_cover(grid, rho, 8)
    best = max(t.rho_mass for t in cov.tsets)
    assert cov.steps[-1].rho_cum_mass >= best - 1e-15


@pytest.mark.parametrize("n", range(1, 11))
def test_cover_trace_invariants(n):
    grid = bernoulli_grid(0.1)
    rho = LaplacePredictor()
    cov = greedy_cover(grid, rho, n)
    p_rho = np.exp(rho.log_marginals(all_paths(n)))
    prev = np.zeros(2**n, dtype=bool)
    for step in cov.steps:
        assert np.all(step.covered >= prev)  # nested
        assert p_rho[step.covered & ~prev].sum() <= 1 / step.k + 1e-12
        prev = step.covered
    m = list(cov.masses) + [cov.residual]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(m, m[1:]))
    assert cov.residual == 0.0
    # nothing any member could add is left uncovered
    union = np.any([t.mask for t in cov.tsets], axis=0)
    assert not np.any(union & ~cov.steps[-1].covered & (p_rho > 0))
    assert cov.K <= 2**n


def test_cover_rejects_empty_class():
    with pytest.raises(InputError):
        greedy_cover([], UniformMeasure(), 2)


def test_cover_cap():
    with pytest.raises(EnumerationCapError):
        greedy_cover([UniformMeasure()], UniformMeasure(), 5, cap=4)


# --- nu -----------------------------------------------------------------------


def test_nu_single_point_mass():
    nu = build_nu([point_mass(0)], UniformMeasure(), 1)
    # horizon and cover weights renormalise to 1 over the one-term truncation
    w1 = nu.horizon_weights[0] * nu.cover_weights[0][0]
    assert w1 == 1.0
    assert math.exp(nu.log_marginal((0,))) == pytest.approx(0.5 * 0.5 + 0.5 * w1, abs=1e-15)
    assert math.exp(nu.log_marginal((1,))) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("regularizer", ["gamma", "gamma_prime"])
def test_nu_normalises(regularizer):
    nu = build_nu(bernoulli_grid(0.1), LaplacePredictor(), 8, regularizer=regularizer)
    for m in range(1, 9):
        total = np.exp(closed_form_log_marginals([nu], m)[0]).sum()
        assert abs(total - 1) <= 1e-10


def test_nu_conditionals_by_marginal_ratio():
    nu = build_nu(bernoulli_grid(0.25), LaplacePredictor(), 5)
    for h in [(), (0,), (1, 1, 0), (0,) * 8]:
        ratio = [nu.log_marginal(h + (a,)) - nu.log_marginal(h) for a in (0, 1)]
        np.testing.assert_allclose(nu.next_log_probs(h), ratio, atol=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_nu_lower_bound(n):
    nu = build_nu(bernoulli_grid(0.1), LaplacePredictor(), 8)
    assert nu_lower_bound_slack(nu, n) >= -1e-12


def test_nu_lower_bound_direct():
    nu = build_nu(bernoulli_grid(0.2), UniformMeasure(), 5)
    for n in range(1, 6):
        cov = nu.covers[n - 1]
        for x in all_strings(n):
            idx = int("".join(map(str, x)), 2)
            for step, wk in zip(cov.steps, nu.cover_weights[n - 1]):
                if step.covered[idx]:
                    bound = 0.5 * nu.horizon_weights[n - 1] * wk * 2.0**-n / n
                    assert math.exp(nu.log_marginal(x)) >= bound * (1 - 1e-12)


def test_nu_rejects_fast_decaying_horizon_weights():
    with pytest.raises(SpecError):
        build_nu([point_mass(0)], UniformMeasure(), 3, WeightScheme("geometric"))
    with pytest.raises(SpecError):
        NuPredictor([point_mass(0)], UniformMeasure(), 3, horizon_scheme=WeightScheme("geometric"))


def test_nu_subexponential_custom_weights():
    ok = WeightScheme("custom", tuple(1.0 / n for n in range(1, 9)))
    assert ok.is_subexponential()
    steep = WeightScheme("custom", tuple(10.0**-n for n in range(1, 9)))
    assert not steep.is_subexponential()


def test_nu_unknown_regularizer():
    with pytest.raises(SpecError):
        build_nu([point_mass(0)], UniformMeasure(), 1, regularizer="beta")


def test_nu_spec_round_trip():
    nu = build_nu(bernoulli_grid(0.25), LaplacePredictor(), 4)
    again = measure_from_spec(nu.to_spec())
    paths = all_paths(9)
    np.testing.assert_allclose(again.log_marginals(paths), nu.log_marginals(paths), rtol=0, atol=1e-15)


def test_nu_horizon_component():
    nu = build_nu([point_mass(0), point_mass(1)], UniformMeasure(), 2)
    nu1 = nu.horizon_component(1)
    assert isinstance(nu1, MixturePredictor)
    np.testing.assert_allclose(nu1.weights, [0.8, 0.2])


def test_nu_trace_rows_terminal_row():
    nu = build_nu([point_mass(0), point_mass(1)], UniformMeasure(), 2)
    rows = nu.trace_rows()
    assert [(r["n"], r["k"], r["component_id"]) for r in rows] == [
        (1, 1, 0), (1, 2, 1), (1, 3, ""), (2, 1, 0), (2, 2, 1), (2, 3, ""),
    ]


# --- gamma prime --------------------------------------------------------------


def test_gamma_prime_point_masses():
    gp = build_gamma_prime([point_mass(0), point_mass(1)], 1)
    np.testing.assert_allclose(gp.votes[0], [1, 1])
    g1 = gp.horizon_component(1)
    np.testing.assert_allclose(np.exp(g1.log_marginals(np.array([[0], [1]]))), [0.5, 0.5])
    np.testing.assert_allclose(np.exp(gp.log_marginals(np.array([[0], [1]]))), [0.5, 0.5])


def test_gamma_prime_singleton_class():
    mu = BernoulliMeasure(0.3)
    gp = build_gamma_prime([mu], 4)
    paths = all_paths(4)
    np.testing.assert_allclose(gp.log_marginals(paths), mu.log_marginals(paths), atol=1e-14)
    for n in range(1, 5):
        assert gamma_prime_bound_slack(gp, [mu], n) >= 0


@pytest.mark.parametrize("n", range(1, 7))
def test_gamma_prime_bound_on_grid(n):
    grid = bernoulli_grid(0.1)
    gp = build_gamma_prime(grid, 6)
    assert gamma_prime_bound_slack(gp, grid, n) >= -1e-12


def test_gamma_prime_normalises():
    gp = build_gamma_prime(bernoulli_grid(0.1), 6)
    for m in (1, 4, 8):
        assert abs(np.exp(closed_form_log_marginals([gp], m)[0]).sum() - 1) <= 1e-10
