"""Compare the numba and pure-numpy kernel backends.

Two levels:

* kernel micro-benchmarks, calling both flavours in-process;
* end-to-end workloads, each run in a subprocess with and without
  ``PREDCLASS_DISABLE_NUMBA`` (the flag is read at import time).

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat=5):
    fn()  # warm-up / JIT compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def micro(batch):
    from predclass.kernels import NUMBA_KERNELS, NUMPY_KERNELS

    rng = np.random.default_rng(0)
    k, a = 22, 2
    logw = np.log(rng.dirichlet(np.ones(k), size=batch))
    comp = np.log(rng.dirichlet(np.ones(a), size=(batch, k)))
    logp = np.log(rng.dirichlet(np.ones(a), size=batch))
    logq = np.log(rng.dirichlet(np.ones(a), size=batch))
    u = rng.random(batch)
    counts = rng.integers(0, 50, size=(batch, 16, a))
    ctx = rng.integers(0, 16, size=batch)
    sym = rng.integers(0, a, size=batch)
    cases = {
        "mixture_log_cond": lambda K: K["mixture_log_cond"](logw, comp),
        "logsumexp_rows": lambda K: K["logsumexp_rows"](logw),
        "row_kl": lambda K: K["row_kl"](logp, logq),
        "sample_rows": lambda K: K["sample_rows"](logp, u),
        "gather_counts": lambda K: K["gather_counts"](counts, ctx),
        "scatter_counts": lambda K: K["scatter_counts"](counts, ctx, sym),
        "posterior_update": lambda K: K["posterior_update"](logw.copy(), comp, sym),
    }
    rows = []
    for name, call in cases.items():
        t_np = _best(lambda: call(NUMPY_KERNELS))
        t_nb = _best(lambda: call(NUMBA_KERNELS))
        rows.append((name, t_np, t_nb))
    return rows


def workloads(quick):
    from predclass import (
        BernoulliMeasure,
        LaplacePredictor,
        bernoulli_grid,
        build_nu,
        build_rho_r,
        kl_exact,
        kl_monte_carlo,
        random_markov,
    )

    samples = 2000 if quick else 10000
    src = random_markov(2, np.random.default_rng(8))
    nu = build_nu(bernoulli_grid(0.05), LaplacePredictor(), 12)
    jobs = {
        "mc_laplace_n1000": lambda: kl_monte_carlo(BernoulliMeasure(0.3), LaplacePredictor(), 1000, samples, 1),
        "mc_rho_r_n1000": lambda: kl_monte_carlo(src, build_rho_r(4), 1000, samples, 1),
        "mc_nu_n2000": lambda: kl_monte_carlo(BernoulliMeasure(1 / np.pi), nu, 2000, samples, 1),
        "exact_rho_r_n16": lambda: kl_exact(src, build_rho_r(4), 16),
    }
    out = {}
    for name, fn in jobs.items():
        fn_small = jobs[name]
        t0 = time.perf_counter()
        fn_small()
        out[name] = time.perf_counter() - t0
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        from predclass.kernels import BACKEND

        # one untimed warm-up so JIT compilation is excluded
        workloads(quick=True)
        print(json.dumps({"backend": BACKEND, "times": workloads(args.quick)}))
        return

    print(f"{'kernel (batch 10000)':<22}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, t_np, t_nb in micro(10000):
        print(f"{name:<22}{t_np:>12.6f}{t_nb:>12.6f}{t_np / t_nb:>10.2f}")

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, PREDCLASS_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--child"] + (["--quick"] if args.quick else [])
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        data = json.loads(proc.stdout.strip().splitlines()[-1])
        results[data["backend"]] = data["times"]
    print()
    print(f"{'workload':<22}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name in results["numpy"]:
        t_np, t_nb = results["numpy"][name], results["numba"][name]
        print(f"{name:<22}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
