import numpy as np
import pytest
import yaml

from predclass import bernoulli_grid, build_nu, LaplacePredictor
from predclass.config import (
    class_from_spec,
    dump_spec,
    load_measure,
    measure_from_spec,
    save_measure,
    scheme_from_spec,
)
from predclass.errors import SpecError
from predclass.exact import all_paths

SPECS = [
    {"family": "bernoulli", "p": 0.3},
    {"family": "point_mass", "symbol": 1},
    {"family": "uniform", "alphabet": 3},
    {"family": "markov", "order": 1, "transitions": [[0.9, 0.1], [0.2, 0.8]]},
    {"family": "markov", "order": 1, "transitions": [[0.9, 0.1], [0.2, 0.8]], "initial": [0.3, 0.7]},
    {"family": "random_markov", "order": 2, "seed": 3},
    {"family": "laplace"},
    {"family": "laplace", "alpha": 0.5},
    {"family": "markov_laplace", "order": 2},
    {"family": "rho_r", "k_max": 3},
    {"family": "rho_r", "k_max": 2, "scheme": "geometric"},
    {"family": "mixture", "components": [{"family": "bernoulli", "p": 0.3},
                                         {"family": "bernoulli", "p": 0.7}], "weights": [0.5, 0.5]},
    {"family": "mixture", "components": [{"grid": "bernoulli", "step": 0.25}], "scheme": "inverse_square"},
    {"family": "nu", "class": {"grid": "bernoulli", "step": 0.25}, "rho": {"family": "laplace"}, "n_max": 4},
    {"family": "nu", "class": [{"family": "point_mass", "symbol": 0}], "rho": {"family": "uniform"},
     "n_max": 2, "regularizer": "gamma_prime"},
    {"family": "gamma_prime", "class": {"grid": "bernoulli", "step": 0.5}, "n_max": 3},
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s["family"])
def test_round_trip_through_yaml(spec, tmp_path):
    m = measure_from_spec(spec)
    path = tmp_path / "m.yaml"
    save_measure(m, path)
    again = load_measure(path)
    a = m.alphabet.size
    paths = all_paths(6, a)
    np.testing.assert_array_equal(again.log_marginals(paths), m.log_marginals(paths))
    # and the serialised form is a fixed point
    assert yaml.safe_load(dump_spec(again.to_spec())) == yaml.safe_load(path.read_text())


def test_class_from_spec_variants():
    assert len(class_from_spec({"grid": "bernoulli", "step": 0.1})) == 11
    mixed = class_from_spec([
        {"grid": "bernoulli", "step": 0.5},
        {"random_markov": {"order": 1, "count": 4, "seed": 0}},
        {"family": "uniform"},
    ])
    assert len(mixed) == 3 + 4 + 1
    again = class_from_spec([{"random_markov": {"order": 1, "count": 4, "seed": 0}}])
    for a, b in zip(mixed[3:7], again):
        np.testing.assert_array_equal(a.transitions, b.transitions)


def test_scheme_from_spec():
    assert scheme_from_spec(None).rule == "inverse_square"
    assert scheme_from_spec("geometric").rule == "geometric"
    s = scheme_from_spec({"weights": [3, 1]})
    assert s.rule == "custom"
    np.testing.assert_allclose(s.weights(2), [0.75, 0.25])


@pytest.mark.parametrize(
    "spec",
    [
        {"p": 0.3},
        {"family": "gaussian"},
        {"family": "bernoulli"},
        {"family": "bernoulli", "p": 2.0},
        {"family": "markov", "transitions": [[0.5, 0.6], [0.5, 0.5]]},
        {"family": "mixture", "components": [{"family": "uniform"}], "weights": [1], "scheme": "geometric"},
        {"family": "mixture", "components": []},
        {"family": "nu", "class": [{"family": "uniform"}], "rho": {"family": "uniform"}, "n_max": 2,
         "scheme": "geometric"},
    ],
)
def test_bad_specs(spec):
    with pytest.raises(SpecError):
        measure_from_spec(spec)


def test_nu_spec_is_reusable(tmp_path):
    nu = build_nu(bernoulli_grid(0.5), LaplacePredictor(), 3)
    save_measure(nu, tmp_path / "nu.yaml")
    text = (tmp_path / "nu.yaml").read_text()
    assert "family: mixture" in text
    loaded = load_measure(tmp_path / "nu.yaml")
    np.testing.assert_array_equal(loaded.log_marginals(all_paths(5)), nu.log_marginals(all_paths(5)))
