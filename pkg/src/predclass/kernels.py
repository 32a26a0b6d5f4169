"""Hot numeric kernels, in a numba flavour and a pure-numpy flavour.

Both flavours share signatures and -inf conventions:

* a log-probability of ``-inf`` is an exact zero;
* a row whose normaliser is ``-inf`` (zero-probability history) yields a row
  of ``-inf`` rather than NaN;
* ``0 * log(0 / q)`` is 0 and ``p * log(p / 0)`` is ``+inf``.

The module-level names (``logsumexp_rows``, ``mixture_log_cond``, ...) are
bound to the numba flavour unless numba is missing or disabled through
``PREDCLASS_DISABLE_NUMBA``. ``NUMPY_KERNELS`` and ``NUMBA_KERNELS`` expose
both flavours explicitly for parity tests and benchmarks.
"""

import math

import numpy as np

from predclass._accel import HAVE_NUMBA, USE_NUMBA, njit

NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# numpy flavour
# ---------------------------------------------------------------------------


def _np_logsumexp_rows(x):
    m = np.max(x, axis=1)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(x - shift[:, None]), axis=1))
    out = shift + s
    out[~np.isfinite(m)] = NEG_INF
    return out


def _np_mixture_log_cond(logw, comp):
    joint = logw[:, :, None] + comp
    m = np.max(joint, axis=1)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        num = shift + np.log(np.sum(np.exp(joint - shift[:, None, :]), axis=1))
    num[~np.isfinite(m)] = NEG_INF
    den = _np_logsumexp_rows(logw)
    dead = ~np.isfinite(den)
    out = num - np.where(dead, 0.0, den)[:, None]
    out[dead] = NEG_INF
    return out


def _np_posterior_update(logw, comp, symbols):
    rows = np.arange(logw.shape[0])
    logw += comp[rows, :, symbols]


def _np_row_kl(logp, logq):
    p = np.exp(logp)
    with np.errstate(invalid="ignore"):
        diff = logp - logq
        terms = np.where(p > 0.0, p * diff, 0.0)
    return np.sum(terms, axis=1)


def _np_sample_rows(logp, u):
    cdf = np.cumsum(np.exp(logp), axis=1)
    idx = np.sum(cdf <= u[:, None], axis=1)
    # u can land past the float cdf total; fall back to the last live symbol
    last_live = logp.shape[1] - 1 - np.argmax(np.isfinite(logp[:, ::-1]), axis=1)
    return np.minimum(idx, last_live).astype(np.int64)


def _np_gather_counts(counts, ctx):
    return counts[np.arange(counts.shape[0]), ctx, :]


def _np_scatter_counts(counts, ctx, symbols):
    counts[np.arange(counts.shape[0]), ctx, symbols] += 1


# ---------------------------------------------------------------------------
# numba flavour
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _nb_logsumexp_rows(x):
    b, k = x.shape
    out = np.empty(b)
    for i in range(b):
        m = -np.inf
        for j in range(k):
            if x[i, j] > m:
                m = x[i, j]
        if m == -np.inf:
            out[i] = -np.inf
            continue
        s = 0.0
        for j in range(k):
            s += math.exp(x[i, j] - m)
        out[i] = m + math.log(s)
    return out


@njit(cache=True, nogil=True)
def _nb_mixture_log_cond(logw, comp):
    b, k, a = comp.shape
    out = np.empty((b, a))
    for i in range(b):
        m = -np.inf
        for j in range(k):
            if logw[i, j] > m:
                m = logw[i, j]
        if m == -np.inf:
            for s in range(a):
                out[i, s] = -np.inf
            continue
        den = 0.0
        for j in range(k):
            den += math.exp(logw[i, j] - m)
        den = m + math.log(den)
        for s in range(a):
            ms = -np.inf
            for j in range(k):
                v = logw[i, j] + comp[i, j, s]
                if v > ms:
                    ms = v
            if ms == -np.inf:
                out[i, s] = -np.inf
                continue
            acc = 0.0
            for j in range(k):
                acc += math.exp(logw[i, j] + comp[i, j, s] - ms)
            out[i, s] = ms + math.log(acc) - den
    return out


@njit(cache=True, nogil=True)
def _nb_posterior_update(logw, comp, symbols):
    b, k = logw.shape
    for i in range(b):
        s = symbols[i]
        for j in range(k):
            logw[i, j] += comp[i, j, s]


@njit(cache=True, nogil=True)
def _nb_row_kl(logp, logq):
    b, a = logp.shape
    out = np.zeros(b)
    for i in range(b):
        acc = 0.0
        for s in range(a):
            lp = logp[i, s]
            if lp == -np.inf:
                continue
            lq = logq[i, s]
            if lq == -np.inf:
                acc = np.inf
                break
            acc += math.exp(lp) * (lp - lq)
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
def _nb_sample_rows(logp, u):
    b, a = logp.shape
    out = np.empty(b, dtype=np.int64)
    for i in range(b):
        cdf = 0.0
        pick = -1
        last_live = 0
        for s in range(a):
            if logp[i, s] == -np.inf:
                continue
            last_live = s
            cdf += math.exp(logp[i, s])
            if pick < 0 and u[i] < cdf:
                pick = s
        out[i] = pick if pick >= 0 else last_live
    return out


@njit(cache=True, nogil=True)
def _nb_gather_counts(counts, ctx):
    b, _, a = counts.shape
    out = np.empty((b, a), dtype=counts.dtype)
    for i in range(b):
        for s in range(a):
            out[i, s] = counts[i, ctx[i], s]
    return out


@njit(cache=True, nogil=True)
def _nb_scatter_counts(counts, ctx, symbols):
    for i in range(counts.shape[0]):
        counts[i, ctx[i], symbols[i]] += 1


NUMPY_KERNELS = {
    "logsumexp_rows": _np_logsumexp_rows,
    "mixture_log_cond": _np_mixture_log_cond,
    "posterior_update": _np_posterior_update,
    "row_kl": _np_row_kl,
    "sample_rows": _np_sample_rows,
    "gather_counts": _np_gather_counts,
    "scatter_counts": _np_scatter_counts,
}

NUMBA_KERNELS = {
    "logsumexp_rows": _nb_logsumexp_rows,
    "mixture_log_cond": _nb_mixture_log_cond,
    "posterior_update": _nb_posterior_update,
    "row_kl": _nb_row_kl,
    "sample_rows": _nb_sample_rows,
    "gather_counts": _nb_gather_counts,
    "scatter_counts": _nb_scatter_counts,
}

BACKEND = "numba" if USE_NUMBA else "numpy"
_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

logsumexp_rows = _active["logsumexp_rows"]
mixture_log_cond = _active["mixture_log_cond"]
posterior_update = _active["posterior_update"]
row_kl = _active["row_kl"]
sample_rows = _active["sample_rows"]
gather_counts = _active["gather_counts"]
scatter_counts = _active["scatter_counts"]

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "NUMBA_KERNELS",
    "NUMPY_KERNELS",
    "gather_counts",
    "logsumexp_rows",
    "mixture_log_cond",
    "posterior_update",
    "row_kl",
    "sample_rows",
    "scatter_counts",
]
