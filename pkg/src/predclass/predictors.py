"""Laplace-type predictors and countable (finite in practice) mixtures.

Predictors implement the same :class:`~predclass.measures.ProcessMeasure`
protocol as the generative measures, so they can be mixed, enumerated and
scored interchangeably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from predclass import kernels
from predclass.errors import InputError, SpecError, UndefinedPosteriorError
from predclass.measures import BINARY, Alphabet, ProcessMeasure, as_history

INVERSE_SQUARE_NORMALIZER = 6.0 / math.pi**2
_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightScheme:
    """Prior weights over an ordered list, indexed from 1.

    ``inverse_square``: ``w_k = (6 / pi^2) k^-2``; ``geometric``: ``w_k = 2^-k``;
    ``custom``: the given list. :meth:`weights` renormalises over the
    truncation.
    """

    rule: str = "inverse_square"
    values: tuple | None = None

    def __post_init__(self):
        if self.rule not in ("inverse_square", "geometric", "custom"):
            raise SpecError(f"unknown weight rule {self.rule!r}")
        if self.rule == "custom":
            if not self.values:
                raise SpecError("custom weight scheme needs a nonempty list of weights")
            vals = tuple(float(v) for v in self.values)
            if any(not v > 0 or not math.isfinite(v) for v in vals):
                raise SpecError("custom weights must be positive and finite")
            object.__setattr__(self, "values", vals)
        elif self.values is not None:
            raise SpecError(f"{self.rule} scheme takes no explicit weights")

    def raw(self, count: int) -> np.ndarray:
        k = np.arange(1, count + 1, dtype=np.float64)
        if self.rule == "inverse_square":
            return INVERSE_SQUARE_NORMALIZER / k**2
        if self.rule == "geometric":
            return 0.5**k
        if count > len(self.values):
            raise SpecError(f"custom scheme has {len(self.values)} weights, {count} needed")
        return np.asarray(self.values[:count], dtype=np.float64)

    def weights(self, count: int) -> np.ndarray:
        if count < 1:
            raise SpecError("need at least one weight")
        return normalize_weights(self.raw(count))

    def is_subexponential(self, horizon: int = 64) -> bool:
        """Whether ``-ln w_n`` grows sublinearly in ``n``.

        Geometric decay is rejected outright. Custom lists pass when every
        listed weight satisfies ``w_n >= w_1 n^-4``, a polynomial envelope.
        """
        if self.rule == "inverse_square":
            return True
        if self.rule == "geometric":
            return False
        w = np.asarray(self.values)
        n = np.arange(1, len(w) + 1, dtype=np.float64)
        return bool(np.all(w >= w[0] * n**-4.0 * (1 - 1e-12)))

    def to_spec(self) -> dict:
        spec = {"rule": self.rule}
        if self.rule == "custom":
            spec["weights"] = list(self.values)
        return spec


def normalize_weights(w) -> np.ndarray:
    """Divide by the sum unless the sum is already 1 within 1e-12."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or np.any(~(w > 0)) or not np.all(np.isfinite(w)):
        raise InputError("weights must be a nonempty vector of positive finite reals")
    total = w.sum()
    if abs(total - 1.0) <= _SUM_TOL:
        return w.copy()
    return w / total


class MarkovLaplacePredictor(ProcessMeasure):
    """The k-order generalisation of the Laplace predictor.

    After a length-k context ``c`` has been followed ``n_c`` times, ``n_{c,a}``
    of them by ``a``, the next symbol ``a`` gets probability
    ``(n_{c,a} + alpha) / (n_c + |X| alpha)``. The first ``k`` symbols are
    predicted uniformly. ``alpha=1`` is add-one smoothing; ``alpha=0.5`` is the
    KT estimator.
    """

    family = "markov_laplace"

    def __init__(self, order: int, alphabet: Alphabet = BINARY, alpha: float = 1.0):
        if int(order) != order or order < 0:
            raise InputError(f"order must be a nonnegative integer, got {order}")
        if not alpha > 0:
            raise InputError(f"smoothing constant must be positive, got {alpha}")
        self.order = int(order)
        self.alphabet = alphabet
        self.alpha = float(alpha)
        self._n_ctx = alphabet.size**self.order
        self._uniform = np.full(alphabet.size, -math.log(alphabet.size))

    def initial_state(self, batch):
        return {
            "t": 0,
            "batch": batch,
            "code": np.zeros(batch, dtype=np.int64),
            "counts": np.zeros((batch, self._n_ctx, self.alphabet.size), dtype=np.int64),
        }

    def cond_log_probs(self, state):
        if state["t"] < self.order:
            return np.repeat(self._uniform[None, :], state["batch"], axis=0)
        c = kernels.gather_counts(state["counts"], state["code"]) + self.alpha
        return np.log(c) - np.log(c.sum(axis=1, keepdims=True))

    def advance(self, state, symbols):
        symbols = np.asarray(symbols, dtype=np.int64)
        if state["t"] >= self.order:
            kernels.scatter_counts(state["counts"], state["code"], symbols)
            state["code"] = (state["code"] * self.alphabet.size + symbols) % self._n_ctx
        else:
            state["code"] = state["code"] * self.alphabet.size + symbols
        state["t"] += 1
        return state

    def log_marginals(self, paths):
        # product of Dirichlet-multinomial terms, one per context
        paths = np.asarray(paths, dtype=np.int64)
        batch, n = paths.shape
        a, k = self.alphabet.size, self.order
        counts = np.zeros((batch, self._n_ctx, a))
        rows = np.arange(batch)
        code = np.zeros(batch, dtype=np.int64)
        for t in range(min(n, k)):
            code = code * a + paths[:, t]
        for t in range(k, n):
            np.add.at(counts, (rows, code, paths[:, t]), 1.0)
            code = (code * a + paths[:, t]) % self._n_ctx
        al = self.alpha
        per_ctx = (
            np.sum(gammaln(counts + al), axis=2)
            - a * gammaln(al)
            + gammaln(a * al)
            - gammaln(counts.sum(axis=2) + a * al)
        )
        return per_ctx.sum(axis=1) - min(n, k) * math.log(a)

    def to_spec(self):
        spec = {"family": self.family, "order": self.order, "alphabet": self.alphabet.size}
        if self.alpha != 1.0:
            spec["alpha"] = self.alpha
        return spec


class LaplacePredictor(MarkovLaplacePredictor):
    """``P(x_{n+1}=a | x_1..n) = (#{i <= n: x_i = a} + 1) / (n + |X|)``."""

    family = "laplace"

    def __init__(self, alphabet: Alphabet = BINARY, alpha: float = 1.0):
        super().__init__(0, alphabet, alpha)

    def to_spec(self):
        spec = {"family": self.family, "alphabet": self.alphabet.size}
        if self.alpha != 1.0:
            spec["alpha"] = self.alpha
        return spec


def laplace_conditional(h, a: int, alphabet: Alphabet = BINARY) -> float:
    """Laplace probability that the symbol after ``h`` is ``a``."""
    h = as_history(h, alphabet)
    if not 0 <= a < alphabet.size:
        raise InputError(f"symbol {a} outside alphabet of size {alphabet.size}")
    return (h.symbols.count(a) + 1) / (len(h) + alphabet.size)


class MixturePredictor(ProcessMeasure):
    """``sum_k w_k mu_k`` over a finite list of component measures.

    The state carries ``ln(w_k mu_k(x_1..t))`` per component, so conditionals
    are posterior-weighted averages of component conditionals.
    """

    family = "mixture"

    def __init__(
        self,
        components: Sequence[ProcessMeasure],
        weights,
        scheme: WeightScheme | None = None,
    ):
        components = list(components)
        if not components:
            raise InputError("a mixture needs at least one component")
        sizes = {c.alphabet.size for c in components}
        if len(sizes) != 1:
            raise InputError("mixture components must share one alphabet")
        w = normalize_weights(weights)
        if w.size != len(components):
            raise InputError(f"{len(components)} components but {w.size} weights")
        self.components = components
        self.weights = w
        with np.errstate(divide="ignore"):
            self.log_weights = np.log(w)
        self.alphabet = components[0].alphabet
        self.scheme = scheme

    @classmethod
    def from_scheme(cls, components, scheme: WeightScheme = WeightScheme()):
        components = list(components)
        return cls(components, scheme.weights(len(components)), scheme=scheme)

    def initial_state(self, batch):
        return {
            "t": 0,
            "batch": batch,
            "logw": np.repeat(self.log_weights[None, :], batch, axis=0),
            "parts": [c.initial_state(batch) for c in self.components],
        }

    def _component_conds(self, state):
        cached = state.get("cache")
        if cached is not None:
            return cached
        comp = np.stack(
            [c.cond_log_probs(s) for c, s in zip(self.components, state["parts"])],
            axis=1,
        )
        state["cache"] = comp
        return comp

    def cond_log_probs(self, state):
        return kernels.mixture_log_cond(state["logw"], self._component_conds(state))

    def advance(self, state, symbols):
        symbols = np.asarray(symbols, dtype=np.int64)
        comp = self._component_conds(state)
        kernels.posterior_update(state["logw"], comp, symbols)
        state["parts"] = [
            c.advance(s, symbols) for c, s in zip(self.components, state["parts"])
        ]
        state["cache"] = None
        state["t"] += 1
        return state

    def component_log_marginals(self, paths) -> np.ndarray:
        """``ln mu_k(x)`` for every row of ``paths`` and every component, ``(m, K)``."""
        return np.stack([c.log_marginals(paths) for c in self.components], axis=1)

    def log_marginals(self, paths):
        paths = np.asarray(paths)
        if paths.ndim == 2 and paths.shape[1] == 0:
            # the empty prefix has mass 1 exactly, whatever the weight rounding
            return np.zeros(paths.shape[0])
        joint = self.component_log_marginals(paths) + self.log_weights[None, :]
        return kernels.logsumexp_rows(joint)

    def posterior_weights(self, h) -> np.ndarray:
        h = as_history(h, self.alphabet)
        state, _ = self.consume(h.to_array()[None, :])
        logw = state["logw"][0]
        top = logw.max()
        if top == -np.inf:
            raise UndefinedPosteriorError(
                f"every component assigns probability zero to {h.symbols}"
            )
        post = np.exp(logw - top)
        return post / post.sum()

    def to_spec(self):
        spec = {
            "family": self.family,
            "components": [c.to_spec() for c in self.components],
        }
        if self.scheme is not None and self.scheme.rule != "custom":
            spec["scheme"] = self.scheme.to_spec()
        else:
            spec["weights"] = self.weights.tolist()
        return spec


class RhoR(MixturePredictor):
    """Mixture of the k-order Laplace predictors for ``k = 0 .. k_max``."""

    family = "rho_r"

    def __init__(
        self,
        k_max: int,
        scheme: WeightScheme = WeightScheme(),
        alphabet: Alphabet = BINARY,
        alpha: float = 1.0,
    ):
        if int(k_max) != k_max or k_max < 0:
            raise InputError(f"k_max must be a nonnegative integer, got {k_max}")
        comps = [MarkovLaplacePredictor(k, alphabet, alpha) for k in range(int(k_max) + 1)]
        super().__init__(comps, scheme.weights(len(comps)), scheme=scheme)
        self.k_max = int(k_max)
        self.alpha = float(alpha)

    def to_spec(self):
        spec = {
            "family": self.family,
            "k_max": self.k_max,
            "alphabet": self.alphabet.size,
            "scheme": self.scheme.to_spec(),
        }
        if self.alpha != 1.0:
            spec["alpha"] = self.alpha
        return spec


def build_rho_r(
    k_max: int,
    scheme: WeightScheme = WeightScheme(),
    alphabet: Alphabet = BINARY,
    alpha: float = 1.0,
) -> RhoR:
    return RhoR(k_max, scheme, alphabet, alpha)


def mixture_log_marginal(m: MixturePredictor, h) -> float:
    """``ln sum_k w_k mu_k(h)``."""
    return m.log_marginal(h)


def posterior_weights(m: MixturePredictor, h) -> np.ndarray:
    """Bayes posterior over the mixture components after observing ``h``."""
    return m.posterior_weights(h)
