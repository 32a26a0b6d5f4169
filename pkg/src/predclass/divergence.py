"""Prediction-quality metrics: expected cumulative KL divergence and total variation.

All values are in nats.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from predclass import kernels
from predclass.errors import InputError, UndefinedConditionalError
from predclass.exact import check_cap, closed_form_log_marginals, walk_levels
from predclass.measures import History, ProcessMeasure, as_history, paths_of

EXACT = "exact-enumeration"
IDENTITY = "identity-eq2"
MONTE_CARLO = "monte-carlo"

# Monte Carlo paths are simulated in fixed-size chunks, each with its own
# spawned seed, so results do not depend on the worker count.
MC_CHUNK = 4096


@dataclass(frozen=True)
class KlEstimate:
    n: int
    value: float
    method: str
    mc_samples: int = 0
    std_error: float = 0.0
    infinite: bool = False

    @property
    def rate(self) -> float:
        """Per-symbol divergence ``d_n / n``."""
        return self.value / self.n if self.n else 0.0

    @property
    def bits(self) -> float:
        return self.value / math.log(2)


@dataclass(frozen=True)
class TvEstimate:
    horizon: int
    history: History
    value: float


def kl_exact(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int | None = None) -> KlEstimate:
    """``d_n(mu, rho)`` as the mu-expected sum of per-step conditional KL terms."""
    _same_alphabet(mu, rho)
    total = 0.0
    for t, log_mass, conds in walk_levels([mu, rho], n, cap=cap):
        if conds is None:
            break
        live = log_mass[0] > -np.inf
        step = kernels.row_kl(conds[0][live], conds[1][live])
        if np.any(step == np.inf):
            return KlEstimate(n, math.inf, EXACT, infinite=True)
        total += float(np.dot(np.exp(log_mass[0][live]), step))
    return KlEstimate(n, max(total, 0.0), EXACT)


def kl_identity(mu: ProcessMeasure, rho: ProcessMeasure, n: int, cap: int | None = None) -> KlEstimate:
    """``d_n(mu, rho)`` as the KL divergence between the length-n marginals."""
    _same_alphabet(mu, rho)
    lm, lr = closed_form_log_marginals([mu, rho], n, cap)
    live = lm > -np.inf
    if np.any(lr[live] == -np.inf):
        return KlEstimate(n, math.inf, IDENTITY, infinite=True)
    total = float(np.dot(np.exp(lm[live]), lm[live] - lr[live]))
    return KlEstimate(n, max(total, 0.0), IDENTITY)


def path_kl(
    mu: ProcessMeasure, rho: ProcessMeasure, n: int, batch: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-path cumulative conditional KL along ``batch`` paths drawn from ``mu``."""
    s_mu = mu.initial_state(batch)
    s_rho = rho.initial_state(batch)
    acc = np.zeros(batch)
    for _ in range(n):
        c_mu = mu.cond_log_probs(s_mu)
        c_rho = rho.cond_log_probs(s_rho)
        acc += kernels.row_kl(c_mu, c_rho)
        sym = kernels.sample_rows(c_mu, rng.random(batch))
        s_mu = mu.advance(s_mu, sym)
        s_rho = rho.advance(s_rho, sym)
    return acc


def kl_monte_carlo(
    mu: ProcessMeasure,
    rho: ProcessMeasure,
    n: int,
    samples: int,
    seed: int,
    jobs: int = 1,
) -> KlEstimate:
    """Sample-mean estimate of ``d_n(mu, rho)``.

    The inner sum over the next symbol is computed exactly; only the paths
    are sampled. ``std_error`` is the standard error of the mean (NaN for a
    single sample).
    """
    _same_alphabet(mu, rho)
    if samples < 1:
        raise InputError(f"samples must be >= 1, got {samples}")
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(i):
        return path_kl(mu, rho, n, sizes[i], np.random.default_rng(seeds[i]))

    if jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    values = np.concatenate(parts)
    if np.any(values == np.inf):
        return KlEstimate(n, math.inf, MONTE_CARLO, samples, math.nan, infinite=True)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return KlEstimate(n, mean, MONTE_CARLO, samples, se)


def tv_ladder(
    mu: ProcessMeasure,
    rho: ProcessMeasure,
    h_cond,
    horizons: Iterable[int],
    cap: int | None = None,
) -> list[TvEstimate]:
    """Total variation between conditional futures at several horizons.

    At horizon ``h`` this is ``1/2 sum_y |mu(y|x) - rho(y|x)|`` over
    ``y in X^h``, the exact supremum over events decided by the next ``h``
    symbols; it is nondecreasing in ``h`` and bounds the full distance from
    below.
    """
    _same_alphabet(mu, rho)
    h_cond = as_history(h_cond, mu.alphabet)
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise InputError("horizons must be >= 1")
    check_cap(mu.alphabet.size, horizons[-1], cap)
    states = []
    for m in (mu, rho):
        try:
            states.append(m.state_after(h_cond))
        except UndefinedConditionalError as exc:
            raise UndefinedConditionalError(f"cannot condition: {exc}") from None
    wanted = set(horizons)
    out = []
    for t, log_mass, _ in walk_levels([mu, rho], horizons[-1], states=states, cap=cap):
        if t in wanted:
            diff = np.abs(np.exp(log_mass[0]) - np.exp(log_mass[1]))
            value = min(max(0.5 * float(diff.sum()), 0.0), 1.0)
            out.append(TvEstimate(t, h_cond, value))
    return out


def tv_horizon(
    mu: ProcessMeasure, rho: ProcessMeasure, h_cond, horizon: int, cap: int | None = None
) -> TvEstimate:
    return tv_ladder(mu, rho, h_cond, [horizon], cap)[0]


def jensen_sides(mu: ProcessMeasure, rho: ProcessMeasure, histories) -> tuple[float, float]:
    """Both sides of the Jensen bound on a set ``A`` of equal-length histories.

    Left: ``-sum_{x in A} mu(x) ln(rho(x)/mu(x))``.
    Right: ``-mu(A) ln(rho(A)/mu(A))``.
    """
    _same_alphabet(mu, rho)
    paths = np.unique(paths_of(list(histories), mu.alphabet), axis=0)
    if paths.shape[0] == 0:
        raise InputError("the history set is empty")
    lm = mu.log_marginals(paths)
    lr = rho.log_marginals(paths)
    pm = np.exp(lm)
    mass_mu = float(pm.sum())
    if not mass_mu > 0:
        raise InputError("the history set has mu-probability zero")
    live = pm > 0
    if np.any(lr[live] == -np.inf):
        lhs = math.inf
    else:
        lhs = float(np.dot(pm[live], lm[live] - lr[live]))
    mass_rho = float(np.exp(lr).sum())
    rhs = math.inf if mass_rho == 0 else -mass_mu * math.log(mass_rho / mass_mu)
    return lhs, rhs


def jensen_gap_check(mu: ProcessMeasure, rho: ProcessMeasure, A, tol: float = 1e-12) -> bool:
    """Whether the Jensen bound holds on ``A`` (up to ``tol`` relative rounding)."""
    lhs, rhs = jensen_sides(mu, rho, A)
    if lhs == math.inf:
        return True
    return lhs >= rhs - tol * max(1.0, abs(rhs))


def _same_alphabet(mu: ProcessMeasure, rho: ProcessMeasure):
    if mu.alphabet.size != rho.alphabet.size:
        raise InputError("measures are defined over different alphabets")
