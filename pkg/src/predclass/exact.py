"""Exact enumeration over X^n.

Strings of length n are indexed lexicographically, first symbol most
significant, so index ``i`` at level ``t`` has children ``i*|X| + a``.
"""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from predclass.errors import EnumerationCapError
from predclass.measures import ProcessMeasure, take_state

# paths are capped at 2**cap, i.e. horizon 16 on a binary alphabet
DEFAULT_EXACT_CAP = 16


def check_cap(alphabet_size: int, n: int, cap: int | None = None) -> None:
    cap = DEFAULT_EXACT_CAP if cap is None else cap
    if n < 0:
        raise EnumerationCapError(f"horizon must be >= 0, got {n}")
    if alphabet_size**n > 2**cap:
        raise EnumerationCapError(
            f"|X|^n = {alphabet_size}^{n} paths exceeds the exact cap 2^{cap}; "
            "use the Monte Carlo estimator"
        )


def all_paths(n: int, alphabet_size: int = 2) -> np.ndarray:
    """Every string in X^n as rows of an ``(|X|^n, n)`` array, lexicographic."""
    idx = np.arange(alphabet_size**n, dtype=np.int64)
    powers = alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % alphabet_size


def path_index(symbols: Sequence[int], alphabet_size: int = 2) -> int:
    code = 0
    for s in symbols:
        code = code * alphabet_size + int(s)
    return code


def walk_levels(
    measures: Sequence[ProcessMeasure],
    n: int,
    states: Sequence[dict] | None = None,
    cap: int | None = None,
) -> Iterator[tuple[int, list[np.ndarray], list[np.ndarray] | None]]:
    """Breadth-first walk of the prefix tree shared by ``measures``.

    Yields ``(t, log_mass, conds)`` for ``t = 0 .. n``: ``log_mass[j]`` holds
    the log-probability of every length-t continuation under measure ``j``
    (relative to the starting states), ``conds[j]`` the next-symbol
    log-probabilities at each of them. At ``t = n`` ``conds`` is ``None``.
    """
    measures = list(measures)
    a = measures[0].alphabet.size
    check_cap(a, n, cap)
    if states is None:
        states = [m.initial_state(1) for m in measures]
    else:
        states = [take_state(s, np.zeros(1, dtype=np.int64)) for s in states]
    log_mass = [np.zeros(1) for _ in measures]
    width = 1
    for t in range(n):
        conds = [m.cond_log_probs(s) for m, s in zip(measures, states)]
        yield t, log_mass, conds
        parent = np.repeat(np.arange(width), a)
        symbols = np.tile(np.arange(a, dtype=np.int64), width)
        states = [m.advance(take_state(s, parent), symbols) for m, s in zip(measures, states)]
        log_mass = [(lm[:, None] + c).ravel() for lm, c in zip(log_mass, conds)]
        width *= a
    yield n, log_mass, None


def level_log_marginals(
    measures: Sequence[ProcessMeasure], n: int, cap: int | None = None
) -> list[np.ndarray]:
    """Chain-rule log-marginals of every string in X^n, one array per measure."""
    *_, (_, log_mass, _) = walk_levels(measures, n, cap=cap)
    return log_mass


def closed_form_log_marginals(
    measures: Sequence[ProcessMeasure], n: int, cap: int | None = None
) -> list[np.ndarray]:
    """Log-marginals of every string in X^n via each measure's ``log_marginals``."""
    a = measures[0].alphabet.size
    check_cap(a, n, cap)
    paths = all_paths(n, a)
    return [m.log_marginals(paths) for m in measures]
