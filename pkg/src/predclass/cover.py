"""Per-horizon greedy covers of X^n and the predictors built from them.

For a reference predictor ``rho`` and a finite class ``C`` of measures:

* ``T_mu^n`` is the set of strings where ``mu(x) >= rho(x) / n``;
* the greedy cover at horizon ``n`` repeatedly picks the class member whose
  ``T``-set claims the most not-yet-covered ``rho``-mass;
* ``nu_n`` mixes the picked members with prior weights, and
  ``nu = 1/2 reg + 1/2 sum_n w_n nu_n`` adds a regulariser that keeps every
  feasible string away from probability zero.

Class members are an explicit finite list, so every maximum over the class
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from predclass.errors import InputError, InvariantError, SpecError
from predclass.exact import all_paths, closed_form_log_marginals
from predclass.measures import ProcessMeasure, UniformMeasure
from predclass.predictors import MixturePredictor, WeightScheme

# relative slack when comparing masses that are equal in exact arithmetic
MASS_TOL = 1e-12


@dataclass(frozen=True)
class TSet:
    """``{x in X^n : mu(x) >= rho(x) / n}`` as a boolean mask over X^n."""

    n: int
    mask: np.ndarray
    mu_mass: float
    rho_mass: float
    complement_mu_mass: float
    alphabet_size: int = 2

    def members(self) -> list[tuple]:
        paths = all_paths(self.n, self.alphabet_size)[self.mask]
        return [tuple(int(s) for s in row) for row in paths]

    def __len__(self):
        return int(self.mask.sum())


def _t_mask(log_mu: np.ndarray, log_rho: np.ndarray, n: int) -> np.ndarray:
    return log_mu >= log_rho - math.log(n)


def _make_tset(log_mu, log_rho, n, a) -> TSet:
    mask = _t_mask(log_mu, log_rho, n)
    p_mu = np.exp(log_mu)
    tset = TSet(
        n=n,
        mask=mask,
        mu_mass=float(p_mu[mask].sum()),
        rho_mass=float(np.exp(log_rho[mask]).sum()),
        complement_mu_mass=float(p_mu[~mask].sum()),
        alphabet_size=a,
    )
    if tset.complement_mu_mass > 1.0 / n + MASS_TOL:
        raise InvariantError(
            f"mu(X^n minus T) = {tset.complement_mu_mass} exceeds 1/n at n={n}; "
            "is mu normalised?"
        )
    return tset


def build_t_set(
    mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int | None = None
) -> TSet:
    if n < 1:
        raise InputError("T-sets are defined for n >= 1")
    log_mu, log_rho = closed_form_log_marginals([mu, rho], n, cap)
    return _make_tset(log_mu, log_rho, n, mu.alphabet.size)


@dataclass(frozen=True)
class CoverStep:
    k: int
    component: int
    gain: float
    covered: np.ndarray
    rho_cum_mass: float


@dataclass(frozen=True)
class CoverResult:
    n: int
    steps: tuple
    tsets: tuple
    residual: float

    @property
    def K(self) -> int:
        return len(self.steps)

    @property
    def chosen(self) -> tuple:
        return tuple(s.component for s in self.steps)

    @property
    def masses(self) -> tuple:
        """``m_1 .. m_K``; the next one, ``residual``, is zero."""
        return tuple(s.gain for s in self.steps)

    def trace_rows(self) -> list[dict]:
        rows = [
            {
                "n": self.n,
                "k": s.k,
                "component_id": s.component,
                "m_k": s.gain,
                "rho_cum_mass": s.rho_cum_mass,
                "K_n": self.K,
            }
            for s in self.steps
        ]
        last = self.steps[-1].rho_cum_mass if self.steps else 0.0
        rows.append(
            {
                "n": self.n,
                "k": self.K + 1,
                "component_id": "",
                "m_k": self.residual,
                "rho_cum_mass": last,
                "K_n": self.K,
            }
        )
        return rows


def greedy_cover(
    class_C: Sequence[ProcessMeasure],
    rho: ProcessMeasure,
    n: int,
    cap: int | None = None,
) -> CoverResult:
    """Greedy cover of X^n by T-sets of class members.

    Each round takes ``argmax_mu rho(T_mu^n minus covered)``; ties (within a
    relative 1e-12) go to the lowest class index. Rounds stop once that
    maximum is zero.
    """
    class_C = list(class_C)
    if not class_C:
        raise InputError("the class must be nonempty")
    if n < 1:
        raise InputError("covers are defined for n >= 1")
    a = rho.alphabet.size
    *log_mus, log_rho = closed_form_log_marginals(class_C + [rho], n, cap)
    tsets = tuple(_make_tset(lm, log_rho, n, a) for lm in log_mus)
    p_rho = np.exp(log_rho)
    masks = np.stack([t.mask for t in tsets])
    covered = np.zeros(p_rho.shape[0], dtype=bool)
    steps = []
    while True:
        fresh = masks & ~covered[None, :]
        gains = fresh.astype(np.float64) @ p_rho
        top = float(gains.max())
        if not top > 0:
            break
        j = int(np.flatnonzero(gains >= top * (1.0 - MASS_TOL))[0])
        covered = covered | masks[j]
        steps.append(
            CoverStep(
                k=len(steps) + 1,
                component=j,
                gain=float(gains[j]),
                covered=covered.copy(),
                rho_cum_mass=float(p_rho[covered].sum()),
            )
        )
    return CoverResult(n=n, steps=tuple(steps), tsets=tsets, residual=max(top, 0.0))


class GammaPrime(MixturePredictor):
    """Regulariser built from class members only.

    At each horizon ``n``, every string that some member makes feasible
    votes for its most likely member; ``gamma'_n`` is the uniform average of
    the voted members and ``gamma' = sum_n w_n gamma'_n``.
    """

    family = "gamma_prime"

    def __init__(
        self,
        class_C: Sequence[ProcessMeasure],
        n_max: int,
        scheme: WeightScheme = WeightScheme(),
        cap: int | None = None,
    ):
        class_C = list(class_C)
        if not class_C:
            raise InputError("the class must be nonempty")
        if n_max < 1:
            raise InputError("n_max must be >= 1")
        self.class_C = class_C
        self.n_max = n_max
        self.horizon_weights = scheme.weights(n_max)
        self.feasible_counts = []
        self.votes = []
        total = np.zeros(len(class_C))
        for n in range(1, n_max + 1):
            logs = np.stack(closed_form_log_marginals(class_C, n, cap))
            feasible = np.max(logs, axis=0) > -np.inf
            winners = np.argmax(logs[:, feasible], axis=0)
            votes = np.bincount(winners, minlength=len(class_C)).astype(np.float64)
            self.feasible_counts.append(int(feasible.sum()))
            self.votes.append(votes)
            total += self.horizon_weights[n - 1] * votes / feasible.sum()
        keep = np.flatnonzero(total > 0)
        self.member_index = keep
        super().__init__([class_C[j] for j in keep], total[keep])

    def horizon_component(self, n: int) -> MixturePredictor:
        """``gamma'_n`` on its own."""
        votes = self.votes[n - 1]
        keep = np.flatnonzero(votes > 0)
        return MixturePredictor([self.class_C[j] for j in keep], votes[keep])

    def to_spec(self):
        return MixturePredictor.to_spec(self) | {"family": "mixture"}


def build_gamma_prime(
    class_C: Sequence[ProcessMeasure],
    n_max: int,
    scheme: WeightScheme = WeightScheme(),
    cap: int | None = None,
) -> GammaPrime:
    return GammaPrime(class_C, n_max, scheme, cap)


class NuPredictor(MixturePredictor):
    """``1/2 reg + 1/2 sum_{n <= n_max} w_n nu_n`` with ``nu_n = sum_k w_k mu_k^n``.

    Horizon weights and per-cover component weights are renormalised over
    their finite truncations, so the result is a probability measure. The
    whole thing is flattened into one mixture over the regulariser and the
    class members any cover picked.
    """

    family = "nu"

    def __init__(
        self,
        class_C: Sequence[ProcessMeasure],
        rho: ProcessMeasure,
        n_max: int,
        scheme: WeightScheme = WeightScheme(),
        regularizer: str = "gamma",
        horizon_scheme: WeightScheme | None = None,
        cap: int | None = None,
    ):
        class_C = list(class_C)
        horizon_scheme = horizon_scheme or scheme
        if not horizon_scheme.is_subexponential():
            raise SpecError(
                f"horizon weights must decay subexponentially; {horizon_scheme.rule!r} does not"
            )
        if n_max < 1:
            raise InputError("n_max must be >= 1")
        self.class_C = class_C
        self.rho = rho
        self.n_max = n_max
        self.covers = [greedy_cover(class_C, rho, n, cap) for n in range(1, n_max + 1)]
        self.horizon_weights = horizon_scheme.weights(n_max)
        self.cover_weights = [scheme.weights(c.K) for c in self.covers]
        class_w = np.zeros(len(class_C))
        for wn, cov, wk in zip(self.horizon_weights, self.covers, self.cover_weights):
            for step, w in zip(cov.steps, wk):
                class_w[step.component] += 0.5 * wn * w
        if regularizer == "gamma":
            reg = UniformMeasure(rho.alphabet)
        elif regularizer == "gamma_prime":
            reg = build_gamma_prime(class_C, n_max, horizon_scheme, cap)
        else:
            raise SpecError(f"unknown regularizer {regularizer!r}")
        self.regularizer = reg
        self.regularizer_name = regularizer
        keep = np.flatnonzero(class_w > 0)
        self.member_index = keep
        super().__init__(
            [reg] + [class_C[j] for j in keep], np.concatenate([[0.5], class_w[keep]])
        )

    def horizon_component(self, n: int) -> MixturePredictor:
        """``nu_n`` on its own."""
        cov = self.covers[n - 1]
        return MixturePredictor([self.class_C[j] for j in cov.chosen], self.cover_weights[n - 1])

    def trace_rows(self) -> list[dict]:
        return [row for cov in self.covers for row in cov.trace_rows()]

    def to_spec(self):
        return MixturePredictor.to_spec(self) | {"family": "mixture"}


def build_nu(
    class_C: Sequence[ProcessMeasure],
    rho: ProcessMeasure,
    n_max: int,
    scheme: WeightScheme = WeightScheme(),
    regularizer: str = "gamma",
    cap: int | None = None,
) -> NuPredictor:
    return NuPredictor(class_C, rho, n_max, scheme, regularizer, cap=cap)


def nu_lower_bound_slack(nu: NuPredictor, n: int, cap: int | None = None) -> float:
    """Smallest ``ln nu(x) - ln(w_n w_k rho(x) / (2n))`` over ``x in T_k^n``, ``k <= K_n``.

    Nonnegative when the lower bound holds; ``+inf`` when no string
    qualifies with positive ``rho``-mass.
    """
    cov = nu.covers[n - 1]
    log_nu, log_rho = closed_form_log_marginals([nu, nu.rho], n, cap)
    wn = nu.horizon_weights[n - 1]
    worst = math.inf
    for step, wk in zip(cov.steps, nu.cover_weights[n - 1]):
        sel = step.covered & (log_rho > -np.inf)
        if not sel.any():
            continue
        bound = math.log(0.5 * wn * wk / n) + log_rho[sel]
        worst = min(worst, float(np.min(log_nu[sel] - bound)))
    return worst


def gamma_prime_bound_slack(
    gp: GammaPrime, class_C: Sequence[ProcessMeasure], n: int, cap: int | None = None
) -> float:
    """Smallest ``ln gamma'(x) - ln(w_n |X|^-n mu(x))`` over ``mu in C`` and feasible ``x``."""
    logs = closed_form_log_marginals([gp] + list(class_C), n, cap)
    log_gp, log_mus = logs[0], np.stack(logs[1:])
    feasible = np.max(log_mus, axis=0) > -np.inf
    base = math.log(gp.horizon_weights[n - 1]) - n * math.log(gp.alphabet.size)
    worst = math.inf
    for lm in log_mus:
        sel = feasible & (lm > -np.inf)
        if sel.any():
            worst = min(worst, float(np.min(log_gp[sel] - base - lm[sel])))
    return worst
