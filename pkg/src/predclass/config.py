"""YAML specs for measures, predictors and measure classes.

A spec is a mapping with a ``family`` key plus family parameters::

    family: bernoulli        # p: probability of symbol 0
    p: 0.3

    family: markov           # rows indexed by context code, oldest symbol first
    order: 1
    transitions: [[0.9, 0.1], [0.2, 0.8]]
    initial: [0.5, 0.5]      # optional, uniform over X^k by default

    family: random_markov    # Dirichlet rows drawn from a seeded generator
    order: 2
    seed: 3

    family: point_mass       # symbol: 0 or 1
    family: uniform          # alphabet: 2
    family: laplace          # alphabet, alpha (1 = add-one, 0.5 = KT)
    family: markov_laplace   # order, alphabet, alpha
    family: rho_r            # k_max, scheme, alphabet, alpha
    family: mixture          # components: [spec, ...]; weights: [...] or scheme: {...}
    family: nu               # class, rho, n_max, scheme, regularizer (gamma | gamma_prime)
    family: gamma_prime      # class, n_max, scheme

A class is a list whose items are measure specs, ``{grid: bernoulli, step: 0.1}``
or ``{random_markov: {order: 1, count: 20, seed: 0}}``. A
weight scheme is ``{rule: inverse_square | geometric | custom, weights: [...]}``
or just the rule name. ``to_spec()`` output of every measure is accepted back
by :func:`measure_from_spec` unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from predclass.errors import InputError, SpecError
from predclass.measures import (
    Alphabet,
    BernoulliMeasure,
    MarkovMeasure,
    ProcessMeasure,
    UniformMeasure,
    bernoulli_grid,
    point_mass,
    random_markov,
)
from predclass.predictors import (
    LaplacePredictor,
    MarkovLaplacePredictor,
    MixturePredictor,
    RhoR,
    WeightScheme,
)


def _require(spec: dict, key: str):
    if key not in spec:
        raise SpecError(f"{spec.get('family', '?')} spec is missing {key!r}")
    return spec[key]


def _alphabet(spec: dict) -> Alphabet:
    return Alphabet(int(spec.get("alphabet", 2)))


def scheme_from_spec(spec) -> WeightScheme:
    if spec is None:
        return WeightScheme()
    if isinstance(spec, str):
        return WeightScheme(spec)
    if not isinstance(spec, dict):
        raise SpecError(f"weight scheme must be a mapping or a rule name, got {spec!r}")
    weights = spec.get("weights")
    return WeightScheme(spec.get("rule", "custom" if weights else "inverse_square"),
                        tuple(weights) if weights is not None else None)


def class_from_spec(spec) -> list[ProcessMeasure]:
    """Expand a class spec into a list of measures.

    Accepts a single grid mapping or a list whose items are measure specs,
    ``{grid: bernoulli, step: s}`` or ``{random_markov: {order, count, seed}}``.
    """
    if isinstance(spec, dict):
        spec = [spec]
    if not isinstance(spec, list) or not spec:
        raise SpecError("a class must be a nonempty list of specs or a grid mapping")
    out = []
    for item in spec:
        if isinstance(item, dict) and "grid" in item:
            if item["grid"] != "bernoulli":
                raise SpecError(f"unknown grid {item['grid']!r}")
            try:
                out += bernoulli_grid(float(_require(item, "step")))
            except InputError as exc:
                raise SpecError(str(exc)) from exc
        elif isinstance(item, dict) and "random_markov" in item:
            params = item["random_markov"]
            rng = np.random.default_rng(int(params.get("seed", 0)))
            alphabet = _alphabet(params)
            out += [
                random_markov(int(params["order"]), rng, alphabet)
                for _ in range(int(params.get("count", 1)))
            ]
        else:
            out.append(measure_from_spec(item))
    return out


def measure_from_spec(spec: dict) -> ProcessMeasure:
    if isinstance(spec, ProcessMeasure):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise SpecError(f"measure spec must be a mapping with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family not in _BUILDERS:
        raise SpecError(f"unknown family {family!r}")
    try:
        return _BUILDERS[family](spec)
    except InputError as exc:
        raise SpecError(f"{family}: {exc}") from exc


def _mixture(spec):
    comps = class_from_spec(_require(spec, "components"))
    if "weights" in spec:
        if "scheme" in spec:
            raise SpecError("mixture takes either 'weights' or 'scheme', not both")
        return MixturePredictor(comps, np.asarray(spec["weights"], dtype=np.float64))
    return MixturePredictor.from_scheme(comps, scheme_from_spec(spec.get("scheme")))


def _nu(spec):
    from predclass.cover import build_nu

    return build_nu(
        class_from_spec(_require(spec, "class")),
        measure_from_spec(_require(spec, "rho")),
        int(_require(spec, "n_max")),
        scheme_from_spec(spec.get("scheme")),
        spec.get("regularizer", "gamma"),
    )


def _gamma_prime(spec):
    from predclass.cover import build_gamma_prime

    return build_gamma_prime(
        class_from_spec(_require(spec, "class")),
        int(_require(spec, "n_max")),
        scheme_from_spec(spec.get("scheme")),
    )


_BUILDERS = {
    "bernoulli": lambda s: BernoulliMeasure(_require(s, "p")),
    "point_mass": lambda s: point_mass(int(_require(s, "symbol"))),
    "uniform": lambda s: UniformMeasure(_alphabet(s)),
    "markov": lambda s: MarkovMeasure(
        _require(s, "transitions"), s.get("initial"), _alphabet(s)
    ),
    "random_markov": lambda s: random_markov(
        int(_require(s, "order")),
        np.random.default_rng(int(_require(s, "seed"))),
        _alphabet(s),
        float(s.get("concentration", 1.0)),
    ),
    "laplace": lambda s: LaplacePredictor(_alphabet(s), float(s.get("alpha", 1.0))),
    "markov_laplace": lambda s: MarkovLaplacePredictor(
        int(_require(s, "order")), _alphabet(s), float(s.get("alpha", 1.0))
    ),
    "rho_r": lambda s: RhoR(
        int(_require(s, "k_max")),
        scheme_from_spec(s.get("scheme")),
        _alphabet(s),
        float(s.get("alpha", 1.0)),
    ),
    "mixture": _mixture,
    "nu": _nu,
    "gamma_prime": _gamma_prime,
}


def load_yaml(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise SpecError(f"{path}: top level must be a mapping")
    return data


def dump_spec(spec: dict) -> str:
    return yaml.safe_dump(spec, sort_keys=False, default_flow_style=None)


def save_measure(measure: ProcessMeasure, path) -> None:
    Path(path).write_text(dump_spec(measure.to_spec()))


def load_measure(path) -> ProcessMeasure:
    return measure_from_spec(load_yaml(path))
