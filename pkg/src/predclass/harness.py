"""Experiment runner: specs in, CSV reports and bound checks out.

An experiment spec is a mapping (usually loaded from YAML)::

    name: laplace_vs_bernoulli
    kind: kl                  # kl | tv | posterior | markov_bound | dominance
                              # | cover | normalization | jensen
    generator: {family: bernoulli, p: 0.3}
    predictor: {family: laplace}
    horizons: [4, 8, 12]
    estimator: exact          # exact | identity | monte_carlo
    samples: 10000            # monte_carlo only
    seeds: [1]
    bounds:
      - {metric: kl_rate, check: decreasing}

Every report row carries the experiment name, the seed that produced it and
the estimator, so a report is a pure function of the experiment file.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from predclass import config
from predclass.cover import (
    NuPredictor,
    build_gamma_prime,
    build_t_set,
    gamma_prime_bound_slack,
    nu_lower_bound_slack,
)
from predclass.divergence import (
    kl_exact,
    kl_identity,
    kl_monte_carlo,
    jensen_sides,
    tv_ladder,
)
from predclass.errors import MissingQuantityError, SpecError
from predclass.exact import all_paths, walk_levels
from predclass.measures import BernoulliMeasure, ProcessMeasure, random_markov
from predclass.predictors import MixturePredictor

KINDS = (
    "kl",
    "tv",
    "posterior",
    "markov_bound",
    "dominance",
    "cover",
    "normalization",
    "jensen",
    "identity",
    "gamma_prime",
)
ESTIMATORS = ("exact", "identity", "monte_carlo")
NATS_METRICS = {"kl", "kl_rate", "dominance_kl"}
COLUMNS = (
    "experiment",
    "metric",
    "n",
    "value_nats",
    "value_bits",
    "method",
    "samples",
    "std_error",
    "seed",
    "label",
    "limit",
)


@dataclass
class ExperimentSpec:
    name: str
    kind: str = "kl"
    generator: Any = None
    predictor: Any = None
    horizons: list = field(default_factory=list)
    estimator: str = "exact"
    samples: int = 0
    seeds: list = field(default_factory=list)
    history_length: int = 0
    component: int = 0
    measures: Any = None
    rhos: Any = None
    cover: Any = None
    trials: int = 0
    bounds: list = field(default_factory=list)
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise SpecError(f"unknown experiment keys: {sorted(extra)}")
        if "name" not in data:
            raise SpecError("experiment spec needs a name")
        spec = cls(**data)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"{self.name}: unknown kind {self.kind!r}")
        if self.estimator not in ESTIMATORS:
            raise SpecError(f"{self.name}: unknown estimator {self.estimator!r}")
        if not self.horizons:
            raise SpecError(f"{self.name}: horizons must be nonempty")
        hs = [int(h) for h in self.horizons]
        if any(h < 1 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise SpecError(f"{self.name}: horizons must be positive and strictly ascending")
        self.horizons = hs
        self.seeds = [int(s) for s in self.seeds]
        needs_seed = self.estimator == "monte_carlo" or self.kind in (
            "tv", "posterior", "jensen", "identity")
        if needs_seed and not self.seeds:
            raise SpecError(f"{self.name}: seeds must be nonempty for sampled runs")
        if self.estimator == "monte_carlo" and self.samples < 1:
            raise SpecError(f"{self.name}: monte_carlo needs samples >= 1")
        needs = {
            "kl": ("generator", "predictor"),
            "tv": ("generator", "predictor"),
            "posterior": ("generator", "predictor"),
            "markov_bound": ("measures", "rhos"),
            "dominance": ("predictor",),
            "cover": ("cover",),
            "normalization": ("predictor",),
            "jensen": (),
            "identity": (),
            "gamma_prime": ("cover",),
        }[self.kind]
        for key in needs:
            if getattr(self, key) is None:
                raise SpecError(f"{self.name}: kind {self.kind!r} needs {key!r}")
        for b in self.bounds:
            if "metric" not in b:
                raise SpecError(f"{self.name}: every bound needs a metric")


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    metric: str
    n: int
    value: float
    method: str = ""
    samples: int = 0
    std_error: float = 0.0
    seed: int | None = None
    label: str = ""
    limit: float | None = None

    def as_csv(self) -> dict:
        bits = self.value / math.log(2) if self.metric in NATS_METRICS else None
        return {
            "experiment": self.experiment,
            "metric": self.metric,
            "n": self.n,
            "value_nats": _fmt(self.value),
            "value_bits": _fmt(bits),
            "method": self.method,
            "samples": self.samples,
            "std_error": _fmt(self.std_error),
            "seed": "" if self.seed is None else self.seed,
            "label": self.label,
            "limit": _fmt(self.limit),
        }


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _parse(x: str):
    return None if x == "" else float(x)


@dataclass(frozen=True)
class BoundResult:
    name: str
    passed: bool
    detail: str = ""
    row: ReportRow | None = None


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.summary)

    def select(self, metric: str, experiment: str | None = None) -> list[ReportRow]:
        return [
            r
            for r in self.rows
            if r.metric == metric and (experiment is None or r.experiment == experiment)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.as_csv())
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bound", "passed", "detail"])
        for b in self.summary:
            writer.writerow([b.name, int(b.passed), b.detail])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path) -> EvalReport:
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(
                    ReportRow(
                        experiment=rec["experiment"],
                        metric=rec["metric"],
                        n=int(rec["n"]),
                        value=float(rec["value_nats"]),
                        method=rec["method"],
                        samples=int(rec["samples"] or 0),
                        std_error=float(rec["std_error"] or 0.0),
                        seed=int(rec["seed"]) if rec["seed"] else None,
                        label=rec["label"],
                        limit=_parse(rec["limit"]),
                    )
                )
        return cls(rows)


# ---------------------------------------------------------------------------
# experiment kinds
# ---------------------------------------------------------------------------


def _measure(spec) -> ProcessMeasure:
    return config.measure_from_spec(spec)


def _kl_rows(spec, mu, rho, cap, jobs, label="", metric="kl", limit=None):
    rows = []
    seeds = spec.seeds if spec.estimator == "monte_carlo" else [None]
    for seed in seeds:
        for n in spec.horizons:
            if spec.estimator == "exact":
                est = kl_exact(mu, rho, n, cap)
            elif spec.estimator == "identity":
                est = kl_identity(mu, rho, n, cap)
            else:
                est = kl_monte_carlo(mu, rho, n, spec.samples, seed, jobs)
            common = dict(
                experiment=spec.name,
                n=n,
                method=est.method,
                samples=est.mc_samples,
                seed=seed,
                label=label,
            )
            rows.append(ReportRow(metric=metric, value=est.value, std_error=est.std_error,
                                  limit=limit, **common))
            if metric == "kl":
                rows.append(ReportRow(metric="kl_rate", value=est.rate,
                                      std_error=est.std_error / n, **common))
    return rows


def _run_kl(spec, cap, jobs):
    return _kl_rows(spec, _measure(spec.generator), _measure(spec.predictor), cap, jobs)


def _run_tv(spec, cap, jobs):
    mu, rho = _measure(spec.generator), _measure(spec.predictor)
    rows = []
    for seed in spec.seeds:
        h = mu.sample(spec.history_length, seed)
        for est in tv_ladder(mu, rho, h, spec.horizons, cap):
            rows.append(
                ReportRow(spec.name, "tv", est.horizon, est.value, "exact-enumeration",
                          seed=seed, label=f"L={spec.history_length}")
            )
    return rows


def _run_posterior(spec, cap, jobs):
    mu, mix = _measure(spec.generator), _measure(spec.predictor)
    if not isinstance(mix, MixturePredictor):
        raise SpecError(f"{spec.name}: posterior experiments need a mixture predictor")
    wanted = set(spec.horizons)
    per_seed = {n: [] for n in spec.horizons}
    rows = []
    for seed in spec.seeds:
        path = mu.sample(spec.horizons[-1], seed).to_array()
        state = mix.initial_state(1)
        for t in range(1, len(path) + 1):
            mix.cond_log_probs(state)
            state = mix.advance(state, path[t - 1 : t])
            if t in wanted:
                logw = state["logw"][0]
                post = np.exp(logw - logw.max())
                value = float(post[spec.component] / post.sum())
                per_seed[t].append(value)
                rows.append(ReportRow(spec.name, "posterior", t, value, "sampled-path",
                                      seed=seed, label=f"component={spec.component}"))
    for n in spec.horizons:
        vals = np.asarray(per_seed[n])
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rows.append(ReportRow(spec.name, "posterior_mean", n, float(vals.mean()),
                              "sampled-path", samples=len(vals), std_error=se,
                              label=f"component={spec.component}"))
    return rows


def _run_markov_bound(spec, cap, jobs):
    mus = config.class_from_spec(spec.measures)
    rhos = config.class_from_spec(spec.rhos)
    rows = []
    for i, mu in enumerate(mus):
        for j, rho in enumerate(rhos):
            for n in spec.horizons:
                t = build_t_set(mu, rho, n, cap)
                rows.append(ReportRow(spec.name, "markov_complement", n, t.complement_mu_mass,
                                      "exact-enumeration", label=f"mu={i};rho={j}",
                                      limit=1.0 / n))
    return rows


def _run_dominance(spec, cap, jobs):
    mix = _measure(spec.predictor)
    if not isinstance(mix, MixturePredictor):
        raise SpecError(f"{spec.name}: dominance experiments need a mixture predictor")
    rows = []
    for k, (comp, w) in enumerate(zip(mix.components, mix.weights)):
        rows += _kl_rows(spec, comp, mix, cap, jobs, label=f"k={k}", metric="dominance_kl",
                         limit=-math.log(w))
    return rows


def _run_cover(spec, cap, jobs):
    nu = _measure({"family": "nu", **spec.cover})
    if not isinstance(nu, NuPredictor):
        raise SpecError(f"{spec.name}: cover spec did not produce a nu predictor")
    rows = []
    for n in spec.horizons:
        if n > nu.n_max:
            raise SpecError(f"{spec.name}: horizon {n} exceeds n_max {nu.n_max}")
        cov = nu.covers[n - 1]
        m = np.asarray(cov.masses + (cov.residual,))
        nest = sum(
            int(np.any(a.covered & ~b.covered)) for a, b in zip(cov.steps, cov.steps[1:])
        )
        prev = np.zeros_like(cov.steps[0].covered) if cov.steps else None
        disjoint = -math.inf
        p_rho = np.exp(nu.rho.log_marginals(all_paths(n, nu.alphabet.size)))
        for step in cov.steps:
            disjoint = max(disjoint, float(p_rho[step.covered & ~prev].sum()) - 1.0 / step.k)
            prev = step.covered
        common = dict(experiment=spec.name, n=n, method="exact-enumeration")
        rows += [
            ReportRow(metric="cover_K", value=float(cov.K), **common),
            *[ReportRow(metric="cover_m", value=g, label=f"k={i + 1}", **common)
              for i, g in enumerate(cov.masses)],
            ReportRow(metric="cover_residual", value=cov.residual, limit=0.0, **common),
            ReportRow(metric="cover_nesting_violations", value=float(nest), limit=0.0, **common),
            ReportRow(metric="cover_m_increase", value=float(np.max(np.diff(m), initial=-math.inf)),
                      limit=0.0, **common),
            ReportRow(metric="cover_disjoint_excess", value=disjoint, limit=0.0, **common),
            ReportRow(metric="nu_lower_slack", value=nu_lower_bound_slack(nu, n, cap),
                      limit=0.0, **common),
        ]
    return rows


def _run_normalization(spec, cap, jobs):
    pred = _measure(spec.predictor)
    rows = []
    wanted = set(spec.horizons)
    worst, where = 0.0, ()
    for t, log_mass, conds in walk_levels([pred], spec.horizons[-1], cap=cap):
        if conds is None:
            break
        live = log_mass[0] > -np.inf
        err = np.abs(np.exp(conds[0]).sum(axis=1) - 1.0)
        err[~live] = 0.0
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            where = tuple(all_paths(t, pred.alphabet.size)[i]) if t else ()
        if t + 1 in wanted:
            label = "worst=" + "".join(map(str, where))
            rows.append(ReportRow(spec.name, "normalization_error", t + 1, worst,
                                  "exact-enumeration", label=label, limit=1e-12))
    return rows


def _run_jensen(spec, cap, jobs):
    rows = []
    for seed in spec.seeds:
        rng = np.random.default_rng(seed)
        for n in spec.horizons:
            paths = all_paths(n, 2)
            for trial in range(spec.trials):
                mu = BernoulliMeasure(rng.uniform())
                rho = BernoulliMeasure(rng.uniform())
                size = int(rng.integers(1, len(paths) + 1))
                pick = paths[rng.choice(len(paths), size=size, replace=False)]
                lhs, rhs = jensen_sides(mu, rho, [tuple(p) for p in pick])
                gap = lhs - rhs if math.isfinite(lhs) else math.inf
                tol = 1e-12 * max(1.0, abs(rhs))
                rows.append(ReportRow(spec.name, "jensen_gap", n, gap, "exact-enumeration",
                                      seed=seed, label=f"trial={trial}", limit=-tol))
    return rows


def _run_identity(spec, cap, jobs):
    """Conditional-sum and marginal forms of d_n on random Markov pairs."""
    rows = []
    for seed in spec.seeds:
        rng = np.random.default_rng(seed)
        for trial in range(spec.trials):
            mu = random_markov(int(rng.integers(0, 3)), rng)
            rho = random_markov(int(rng.integers(0, 3)), rng)
            for n in spec.horizons:
                a = kl_exact(mu, rho, n, cap).value
                b = kl_identity(mu, rho, n, cap).value
                rows.append(ReportRow(spec.name, "identity_gap", n, abs(a - b),
                                      "exact-enumeration", seed=seed,
                                      label=f"trial={trial}", limit=1e-9))
    return rows


def _run_gamma_prime(spec, cap, jobs):
    class_C = config.class_from_spec(spec.cover["class"])
    gp = build_gamma_prime(class_C, int(spec.cover["n_max"]),
                           config.scheme_from_spec(spec.cover.get("scheme")), cap)
    return [
        ReportRow(spec.name, "gamma_prime_slack", n, gamma_prime_bound_slack(gp, class_C, n, cap),
                  "exact-enumeration", limit=0.0)
        for n in spec.horizons
    ]


_RUNNERS = {
    "kl": _run_kl,
    "tv": _run_tv,
    "posterior": _run_posterior,
    "markov_bound": _run_markov_bound,
    "dominance": _run_dominance,
    "cover": _run_cover,
    "normalization": _run_normalization,
    "jensen": _run_jensen,
    "identity": _run_identity,
    "gamma_prime": _run_gamma_prime,
}

# bounds that compare against the row's own limit, and their direction
_LIMIT_DIRECTION = {
    "markov_complement": "le",
    "dominance_kl": "le",
    "cover_residual": "le",
    "cover_nesting_violations": "le",
    "cover_m_increase": "le",
    "cover_disjoint_excess": "le",
    "nu_lower_slack": "ge",
    "normalization_error": "le",
    "jensen_gap": "ge",
    "identity_gap": "le",
    "gamma_prime_slack": "ge",
}


def run_experiment(spec, cap: int | None = None, jobs: int = 1, write: bool = True) -> EvalReport:
    """Run one experiment, check its declared bounds, write its CSV if requested."""
    if isinstance(spec, dict):
        spec = ExperimentSpec.from_dict(spec)
    else:
        spec.validate()
    report = EvalReport(_RUNNERS[spec.kind](spec, cap, jobs))
    report.summary = verify_bounds(report, spec.bounds, experiment=spec.name)
    if write and spec.output:
        report.write_csv(spec.output)
    return report


def run_suite(specs: Sequence, cap: int | None = None, jobs: int = 1) -> EvalReport:
    """Run experiments in a worker pool; rows are collected in spec order."""
    specs = [ExperimentSpec.from_dict(s) if isinstance(s, dict) else s for s in specs]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda s: run_experiment(s, cap, 1, write=False), specs))
    else:
        parts = [run_experiment(s, cap, 1, write=False) for s in specs]
    report = EvalReport()
    for part in parts:
        report.rows += part.rows
        report.summary += part.summary
    return report


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def verify_bounds(report: EvalReport, bounds: Sequence[dict], experiment: str | None = None):
    """Check declared inequalities against report rows.

    Each bound names a ``metric`` and a ``check``:

    ``limit``         value <= row limit (``>=`` for slack-type metrics)
    ``upper``/``lower`` value <= / >= ``value`` (+ ``se_margin`` standard errors)
    ``decreasing``    strictly decreasing in n, per (label, seed)
    ``nondecreasing`` nondecreasing in n up to ``tol``, per (label, seed)
    ``ratio``         value at ``n_num`` <= ``max_ratio`` * value at ``n_den``

    Optional ``n`` (list) and ``label`` restrict the rows considered. Returns one
    :class:`BoundResult` per bound; a failing result carries the violating row.
    """
    results = []
    for b in bounds:
        metric = b["metric"]
        check = b.get("check", "limit")
        name = b.get("name") or ":".join(
            str(x) for x in (experiment, metric, check, b.get("label"), b.get("n")) if x
        )
        rows = report.select(metric, b.get("experiment", experiment))
        if "n" in b:
            keep = set(b["n"])
            rows = [r for r in rows if r.n in keep]
        if "label" in b:
            rows = [r for r in rows if r.label == b["label"]]
        if not rows:
            raise MissingQuantityError(f"bound {name!r}: no rows for metric {metric!r}")
        results.append(_check(name, check, b, rows))
    return results


def _groups(rows):
    out = {}
    for r in rows:
        out.setdefault((r.label, r.seed), []).append(r)
    return {k: sorted(v, key=lambda r: r.n) for k, v in out.items()}


def _describe(r: ReportRow) -> str:
    return (f"{r.experiment} {r.metric} n={r.n} label={r.label!r} seed={r.seed} "
            f"value={r.value!r} limit={r.limit!r}")


def _check(name, check, b, rows) -> BoundResult:
    tol = float(b.get("tol", 1e-12))
    k = float(b.get("se_margin", 0.0))
    if check == "limit":
        for r in rows:
            direction = b.get("direction") or _LIMIT_DIRECTION.get(r.metric, "le")
            if r.limit is None:
                raise MissingQuantityError(f"bound {name!r}: row has no limit: {_describe(r)}")
            margin = k * (r.std_error if math.isfinite(r.std_error) else 0.0)
            if direction == "le":
                ok = r.value <= r.limit + tol * max(1.0, abs(r.limit)) + margin
            else:
                ok = r.value >= r.limit - tol * max(1.0, abs(r.limit)) - margin
            if not ok:
                return BoundResult(name, False, _describe(r), r)
        return BoundResult(name, True, f"{len(rows)} rows")
    if check in ("upper", "lower"):
        target = float(b["value"])
        for r in rows:
            margin = k * (r.std_error if math.isfinite(r.std_error) else 0.0)
            ok = r.value <= target + margin if check == "upper" else r.value >= target - margin
            if not ok:
                return BoundResult(name, False, _describe(r) + f" target={target}", r)
        return BoundResult(name, True, f"{len(rows)} rows")
    if check in ("decreasing", "nondecreasing"):
        for group in _groups(rows).values():
            for prev, cur in zip(group, group[1:]):
                ok = cur.value < prev.value if check == "decreasing" else cur.value >= prev.value - tol
                if not ok:
                    return BoundResult(name, False, _describe(cur) + f" after {prev.value!r}", cur)
        return BoundResult(name, True, f"{len(rows)} rows")
    if check == "ratio":
        num_n, den_n, cap = int(b["n_num"]), int(b["n_den"]), float(b["max_ratio"])
        for group in _groups(rows).values():
            by_n = {r.n: r for r in group}
            if num_n not in by_n or den_n not in by_n:
                raise MissingQuantityError(f"bound {name!r}: needs rows at n={num_n} and n={den_n}")
            num, den = by_n[num_n], by_n[den_n]
            if not num.value <= cap * den.value:
                return BoundResult(name, False, _describe(num) + f" vs {den.value!r}", num)
        return BoundResult(name, True, f"{len(rows)} rows")
    raise SpecError(f"bound {name!r}: unknown check {check!r}")


def load_specs(path) -> tuple[list[ExperimentSpec], dict]:
    """Experiments from a YAML file holding either one spec or ``experiments: [...]``."""
    data = config.load_yaml(path)
    items = data.get("experiments", [data])
    return [ExperimentSpec.from_dict(d) for d in items], data
