"""Process measures over a finite alphabet.

Every measure follows one sequential protocol so that exact enumeration,
sampling and Monte Carlo evaluation can drive any of them in batches:

``initial_state(batch)`` -> state
``cond_log_probs(state)`` -> ``(batch, |X|)`` array of next-symbol log-probs
``advance(state, symbols)`` -> state after appending ``symbols``

A state is a dict of numpy arrays indexed by batch row (plus the integer
keys ``"t"`` and ``"batch"``); :func:`take_state` re-indexes it. Probabilities
live in natural-log space, with ``-inf`` for exact zeros.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from predclass import kernels
from predclass.errors import InputError, UndefinedConditionalError

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """The symbols ``0 .. size-1``."""

    size: int = 2

    def __post_init__(self):
        if isinstance(self.size, bool) or int(self.size) != self.size or self.size < 2:
            raise InputError(f"alphabet size must be an integer >= 2, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))


BINARY = Alphabet(2)


@dataclass(frozen=True)
class History:
    """A finite observed prefix ``x_1 .. x_n``."""

    alphabet: Alphabet
    symbols: tuple = ()

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        for s in syms:
            if not 0 <= s < self.alphabet.size:
                raise InputError(
                    f"symbol {s} outside alphabet of size {self.alphabet.size}"
                )
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def of(cls, symbols: Iterable[int] = (), alphabet: Alphabet = BINARY) -> History:
        return cls(alphabet, tuple(symbols))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return History(self.alphabet, self.symbols[item])
        return self.symbols[item]

    def append(self, symbol: int) -> History:
        return History(self.alphabet, self.symbols + (int(symbol),))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)


def as_history(h, alphabet: Alphabet) -> History:
    """Coerce a sequence of ints (or a History) to a History over ``alphabet``."""
    if isinstance(h, History):
        if h.alphabet.size != alphabet.size:
            raise InputError(
                f"history alphabet size {h.alphabet.size} != measure alphabet "
                f"size {alphabet.size}"
            )
        return h
    return History(alphabet, tuple(h))


def take_state(state, idx):
    """Select batch rows ``idx`` from a (possibly nested) state."""
    if isinstance(state, dict):
        out = {}
        for key, val in state.items():
            if key == "batch":
                out[key] = len(idx)
            else:
                out[key] = take_state(val, idx)
        return out
    if isinstance(state, list):
        return [take_state(s, idx) for s in state]
    if isinstance(state, np.ndarray):
        return state[idx]
    return state


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=np.float64))


class ProcessMeasure(abc.ABC):
    """A probability measure on one-way infinite sequences over an alphabet."""

    family: str = "abstract"
    alphabet: Alphabet = BINARY

    # -- sequential protocol ------------------------------------------------

    @abc.abstractmethod
    def initial_state(self, batch: int) -> dict:
        """State for ``batch`` empty histories."""

    @abc.abstractmethod
    def cond_log_probs(self, state: dict) -> np.ndarray:
        """Next-symbol log-probabilities, shape ``(batch, |X|)``."""

    @abc.abstractmethod
    def advance(self, state: dict, symbols: np.ndarray) -> dict:
        """Append one symbol per batch row. May mutate ``state``."""

    @abc.abstractmethod
    def to_spec(self) -> dict:
        """Plain-data description accepted by :func:`predclass.config.measure_from_spec`."""

    # -- derived operations -------------------------------------------------

    def consume(self, paths: np.ndarray, state: dict | None = None):
        """Run the state over ``paths`` (shape ``(batch, n)``).

        Returns ``(state, log_prob)`` where ``log_prob`` is the chain-rule
        log-probability of each row.
        """
        paths = np.asarray(paths, dtype=np.int64)
        batch = paths.shape[0]
        if state is None:
            state = self.initial_state(batch)
        total = np.zeros(batch)
        rows = np.arange(batch)
        for t in range(paths.shape[1]):
            cond = self.cond_log_probs(state)
            total += cond[rows, paths[:, t]]
            state = self.advance(state, paths[:, t])
        return state, total

    def log_marginals(self, paths: np.ndarray) -> np.ndarray:
        """``ln mu(x_1..n)`` for each row of ``paths``. Subclasses override with closed forms."""
        return self.consume(paths)[1]

    def log_marginal(self, h) -> float:
        h = as_history(h, self.alphabet)
        return float(self.log_marginals(h.to_array()[None, :])[0])

    def state_after(self, h) -> dict:
        """State after ``h``; raises if ``h`` has probability zero."""
        h = as_history(h, self.alphabet)
        state, lp = self.consume(h.to_array()[None, :])
        if lp[0] == -np.inf:
            raise UndefinedConditionalError(
                f"{self.family}: history {h.symbols} has probability zero"
            )
        return state

    def next_log_probs(self, h) -> np.ndarray:
        return self.cond_log_probs(self.state_after(h))[0].copy()

    def sample_paths(self, n: int, batch: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``batch`` independent length-``n`` paths by sequential sampling."""
        paths = np.empty((batch, n), dtype=np.int64)
        state = self.initial_state(batch)
        for t in range(n):
            cond = self.cond_log_probs(state)
            sym = kernels.sample_rows(cond, rng.random(batch))
            paths[:, t] = sym
            state = self.advance(state, sym)
        return paths

    def sample(self, n: int, seed: int) -> History:
        if n < 0:
            raise InputError(f"n must be >= 0, got {n}")
        rng = np.random.default_rng(seed)
        return History(self.alphabet, tuple(self.sample_paths(n, 1, rng)[0]))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()!r})"


def _const_rows(row: np.ndarray, batch: int) -> np.ndarray:
    return np.repeat(row[None, :], batch, axis=0)


class BernoulliMeasure(ProcessMeasure):
    """Binary i.i.d. process; ``p`` is the probability of symbol 0."""

    family = "bernoulli"

    def __init__(self, p: float):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise InputError(f"Bernoulli p must lie in [0, 1], got {p}")
        self.p = p
        self.alphabet = BINARY
        self._row = _safe_log([p, 1.0 - p])

    def initial_state(self, batch):
        return {"t": 0, "batch": batch}

    def cond_log_probs(self, state):
        return _const_rows(self._row, state["batch"])

    def advance(self, state, symbols):
        state["t"] += 1
        return state

    def log_marginals(self, paths):
        paths = np.asarray(paths, dtype=np.int64)
        zeros = np.sum(paths == 0, axis=1)
        ones = paths.shape[1] - zeros
        lz = np.where(zeros > 0, zeros * self._row[0] if self.p > 0 else -np.inf, 0.0)
        lo = np.where(ones > 0, ones * self._row[1] if self.p < 1 else -np.inf, 0.0)
        return lz + lo

    def to_spec(self):
        return {"family": self.family, "p": self.p}


def point_mass(symbol: int) -> BernoulliMeasure:
    """delta_0 or delta_1: the binary process repeating ``symbol`` forever."""
    if symbol not in (0, 1):
        raise InputError("point masses are defined on the binary alphabet")
    return BernoulliMeasure(1.0 if symbol == 0 else 0.0)


def bernoulli_grid(step: float) -> list[BernoulliMeasure]:
    """Bernoulli measures with p = 0, step, 2*step, ..., 1."""
    count = round(1.0 / step)
    if count < 1 or abs(count * step - 1.0) > 1e-9:
        raise InputError(f"grid step must divide 1, got {step}")
    return [BernoulliMeasure(i / count) for i in range(count + 1)]


class UniformMeasure(ProcessMeasure):
    """The i.i.d. measure with equal symbol probabilities."""

    family = "uniform"

    def __init__(self, alphabet: Alphabet = BINARY):
        self.alphabet = alphabet
        self._row = np.full(alphabet.size, -np.log(alphabet.size))

    def initial_state(self, batch):
        return {"t": 0, "batch": batch}

    def cond_log_probs(self, state):
        return _const_rows(self._row, state["batch"])

    def advance(self, state, symbols):
        state["t"] += 1
        return state

    def log_marginals(self, paths):
        paths = np.asarray(paths)
        return np.full(paths.shape[0], -paths.shape[1] * np.log(self.alphabet.size))

    def to_spec(self):
        return {"family": self.family, "alphabet": self.alphabet.size}


class MarkovMeasure(ProcessMeasure):
    """Order-k Markov measure.

    ``transitions`` has shape ``(|X|**k, |X|)``; row ``c`` is the next-symbol
    distribution after the context whose base-|X| code is ``c`` (oldest symbol
    most significant). ``initial`` is a distribution over the first ``k``
    symbols, uniform when omitted.
    """

    family = "markov"

    def __init__(self, transitions, initial=None, alphabet: Alphabet | None = None):
        trans = np.array(transitions, dtype=np.float64)
        if trans.ndim != 2:
            raise InputError("transitions must be a 2-d table")
        size = trans.shape[1]
        self.alphabet = alphabet or Alphabet(size)
        if size != self.alphabet.size:
            raise InputError("transition rows must have one entry per symbol")
        order = 0
        while size**order < trans.shape[0]:
            order += 1
        if size**order != trans.shape[0]:
            raise InputError(
                f"{trans.shape[0]} transition rows is not a power of {size}"
            )
        _check_distribution_rows(trans, "transition")
        if initial is None:
            init = np.full(size**order, 1.0 / size**order)
        else:
            init = np.array(initial, dtype=np.float64).ravel()
            if init.shape != (size**order,):
                raise InputError(f"initial distribution must have {size**order} entries")
            _check_distribution_rows(init[None, :], "initial")
        self.order = order
        self.transitions = trans
        self.initial = init
        self._explicit_initial = initial is not None
        self._log_t = _safe_log(trans)
        # prefix masses of the initial block, lengths 0..k
        masses = [init]
        for _ in range(order):
            masses.append(masses[-1].reshape(-1, size).sum(axis=1))
        self._log_prefix = [_safe_log(m) for m in reversed(masses)]
        self._n_ctx = size**order

    def initial_state(self, batch):
        return {"t": 0, "batch": batch, "code": np.zeros(batch, dtype=np.int64)}

    def cond_log_probs(self, state):
        t, code = state["t"], state["code"]
        if t >= self.order:
            return self._log_t[code]
        a = self.alphabet.size
        nxt = self._log_prefix[t + 1][code[:, None] * a + np.arange(a)[None, :]]
        cur = self._log_prefix[t][code]
        dead = cur == -np.inf
        out = nxt - np.where(dead, 0.0, cur)[:, None]
        out[dead] = -np.inf
        return out

    def advance(self, state, symbols):
        code = state["code"] * self.alphabet.size + symbols
        if state["t"] >= self.order:
            code %= self._n_ctx
        state["code"] = code
        state["t"] += 1
        return state

    def log_marginals(self, paths):
        paths = np.asarray(paths, dtype=np.int64)
        batch, n = paths.shape
        a, k = self.alphabet.size, self.order
        head = min(n, k)
        code = np.zeros(batch, dtype=np.int64)
        for t in range(head):
            code = code * a + paths[:, t]
        total = self._log_prefix[head][code].copy()
        for t in range(k, n):
            total += self._log_t[code, paths[:, t]]
            code = (code * a + paths[:, t]) % self._n_ctx
        return total

    def to_spec(self):
        spec = {
            "family": self.family,
            "alphabet": self.alphabet.size,
            "order": self.order,
            "transitions": self.transitions.tolist(),
        }
        if self._explicit_initial:
            spec["initial"] = self.initial.tolist()
        return spec


def _check_distribution_rows(rows: np.ndarray, what: str):
    if np.any(rows < 0) or not np.all(np.isfinite(rows)):
        raise InputError(f"{what} probabilities must be finite and nonnegative")
    err = np.abs(rows.sum(axis=1) - 1.0)
    if np.any(err > _ROW_TOL):
        raise InputError(f"{what} rows must sum to 1 (max error {err.max():.3g})")


def random_markov(
    order: int, rng: np.random.Generator, alphabet: Alphabet = BINARY, concentration: float = 1.0
) -> MarkovMeasure:
    """Markov measure with Dirichlet-distributed transition rows."""
    a = alphabet.size
    rows = rng.dirichlet(np.full(a, concentration), size=a**order)
    # renormalise so rows pass the 1e-12 check exactly
    rows /= rows.sum(axis=1, keepdims=True)
    return MarkovMeasure(rows, alphabet=alphabet)


# module-level forms of the core operations


def log_marginal(measure: ProcessMeasure, h) -> float:
    """``ln mu(x_1..n)``; ``-inf`` for zero-probability prefixes."""
    return measure.log_marginal(h)


def next_log_probs(measure: ProcessMeasure, h) -> np.ndarray:
    """``ln mu(x_{n+1} = a | x_1..n)`` for every symbol ``a``."""
    return measure.next_log_probs(h)


def sample(measure: ProcessMeasure, n: int, rng_seed: int) -> History:
    """A length-``n`` history drawn from ``measure``; deterministic given the seed."""
    return measure.sample(n, rng_seed)


def paths_of(histories: Sequence, alphabet: Alphabet) -> np.ndarray:
    """Stack equal-length histories into an ``(m, n)`` int array."""
    rows = [as_history(h, alphabet).symbols for h in histories]
    lengths = {len(r) for r in rows}
    if len(lengths) > 1:
        raise InputError("histories must share one length")
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), -1)
