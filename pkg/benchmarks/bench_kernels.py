"""Time the compiled inner kernel against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]

Each case runs a full one-point evaluation under both backends and reports the
best wall time, the number of integrand evaluations and the largest difference
between the two values.
"""
import argparse
import time

from ginibre_sv import _backend
from ginibre_sv.onepoint import eval_finite_n, eval_limit_real
from ginibre_sv.phases import FiniteParams, ScaledParams

CASES = {
    "limit-real (1, 1, 0)": lambda: eval_limit_real(ScaledParams(1.0, 1.0, 0.0)),
    "limit-real (1, 8, 0)": lambda: eval_limit_real(ScaledParams(1.0, 8.0, 0.0)),
    "finite-n N=50": lambda: eval_finite_n(FiniteParams.from_scaled(50, 1.0, 1.0)),
}


def best_of(fn, repeat):
    best, res = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        res = fn()
        best = min(best, time.perf_counter() - t)
    return best, res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled kernel not built; only the Python fallback is timed")
    print(f"{'case':<24}{'backend':<10}{'seconds':>10}{'evals':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, fn in CASES.items():
        out = {}
        for b in backends:
            _backend.use(b)
            out[b] = best_of(fn, args.repeat)
        base = out["python"]
        for b, (t, r) in out.items():
            diff = abs(r.value - base[1].value)
            print(f"{name:<24}{b:<10}{t:>10.3f}{r.n_evals:>10d}{base[0] / t:>9.1f}{diff:>12.2e}")
    _backend.use("auto")


if __name__ == "__main__":
    main()
