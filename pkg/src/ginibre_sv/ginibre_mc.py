"""Seeded Monte Carlo for real and complex Ginibre matrices.

Entries have mean 0 and E|x|^2 = 1/N; in the complex case the real and
imaginary parts are independent with variance 1/(2N) each.  Sample ``i`` of a
run with seed ``s`` is drawn from its own Philox stream keyed by
``SeedSequence(s, spawn_key=(i, attempt))``, so results do not depend on how
samples are spread over workers.  Normals come from numpy's ziggurat sampler;
streams are therefore bit-reproducible within one numpy version only.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterator, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

__all__ = [
    "Kind", "EnsembleSpec", "SvSample", "DensityTable", "SvdFailure",
    "draw_matrix", "sample_singular_values", "smallest_singular_values", "smallest_sv_histogram",
    "resolvent_trace_mean", "edelman_density", "edelman_cdf", "ks_to_edelman", "ks_two_sample",
    "median_smallest_eigenvalue", "resolve_threads", "write_resolvent_csv", "write_sigma_min_csv",
]

log = logging.getLogger(__name__)

#: retries with a perturbed substream before an SVD failure is fatal
MAX_SVD_RETRIES = 3
CHUNK = 256


class Kind(str, Enum):
    REAL = "real"
    COMPLEX = "complex"


class SvdFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    kind: Kind
    n_dim: int
    z: complex = 0j
    seed: int = 0
    n_samples: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "z", complex(self.z))
        if int(self.n_dim) != self.n_dim or self.n_dim < 2:
            raise ValueError("n_dim must be an integer >= 2")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be positive")


@dataclass
class SvSample:
    sample_index: int
    singular_values: np.ndarray   # ascending


@dataclass
class DensityTable:
    """Histogram on fixed bins.

    ``values`` is normalised according to ``normalization`` ("count", "pdf"
    or "cdf"); ``counts`` always holds raw counts.  The pdf is normalised by
    the number of samples inside the bin range, reported as ``n_inside``,
    so it integrates to one over the bins.
    """
    bin_edges: np.ndarray
    counts: np.ndarray
    values: np.ndarray
    normalization: str
    n_inside: int
    n_total: int

    def to_csv(self, fh: IO[str]):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count", "pdf"])
        width = np.diff(self.bin_edges)
        pdf = self.counts / (max(self.n_inside, 1) * width)
        for lo, hi, c, p in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts, pdf):
            w.writerow([repr(float(lo)), repr(float(hi)), str(int(c)), repr(float(p))])


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else GINIBRE_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("GINIBRE_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return int(threads)


def _generator(seed: int, index: int, attempt: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index), int(attempt)))
    return np.random.Generator(np.random.Philox(ss))


def draw_matrix(spec: EnsembleSpec, index: int, attempt: int = 0) -> np.ndarray:
    """X - z for sample ``index``; real dtype when both X and z are real."""
    g = _generator(spec.seed, index, attempt)
    N = spec.n_dim
    if spec.kind is Kind.REAL:
        X = g.standard_normal((N, N)) / math.sqrt(N)
    else:
        X = (g.standard_normal((N, N)) + 1j * g.standard_normal((N, N))) / math.sqrt(2 * N)
    if spec.z.imag == 0 and spec.kind is Kind.REAL:
        z = spec.z.real
    else:
        X = X.astype(complex)
        z = spec.z
    X[np.diag_indices(N)] -= z
    return X


def _one(spec: EnsembleSpec, i: int) -> np.ndarray:
    for attempt in range(MAX_SVD_RETRIES + 1):
        try:
            sv = np.linalg.svd(draw_matrix(spec, i, attempt), compute_uv=False)
            return sv[::-1].copy()
        except np.linalg.LinAlgError:
            log.warning("SVD did not converge for sample %d (attempt %d); redrawing", i, attempt)
    raise SvdFailure(f"SVD failed for sample {i} after {MAX_SVD_RETRIES} retries")


def _chunks(n, size=CHUNK):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _map_chunks(fn, spec: EnsembleSpec, threads: int):
    """Apply ``fn(spec, start, stop)`` over sample chunks, results in index order."""
    chunks = _chunks(spec.n_samples)
    if threads <= 1:
        for s, e in chunks:
            yield fn(spec, s, e)
        return
    with ThreadPoolExecutor(max_workers=threads) as ex:
        yield from ex.map(lambda c: fn(spec, *c), chunks)


def sample_singular_values(spec: EnsembleSpec, threads: Optional[int] = None) -> Iterator[SvSample]:
    """Stream of ascending singular values of X - z, one item per sample, in index order."""
    def block(sp, s, e):
        return [SvSample(i, _one(sp, i)) for i in range(s, e)]
    for blk in _map_chunks(block, spec, resolve_threads(threads)):
        yield from blk


def _collect(spec, threads, reducer):
    def block(sp, s, e):
        return np.array([reducer(_one(sp, i)) for i in range(s, e)])
    return np.concatenate(list(_map_chunks(block, spec, resolve_threads(threads))))


def smallest_singular_values(spec: EnsembleSpec, threads: Optional[int] = None) -> np.ndarray:
    """sigma_min(X - z) per sample, in index order."""
    return _collect(spec, threads, lambda sv: sv[0])


def smallest_sv_histogram(spec: EnsembleSpec, scale: str = "ByN", bins: int = 80,
                          range_: Sequence[float] = (0.0, 3.2), normalization: str = "pdf",
                          threads: Optional[int] = None, data: Optional[np.ndarray] = None) -> DensityTable:
    """Histogram of N sigma_min(X - z).

    ``data`` may carry precomputed sigma_min values (unscaled) to avoid resampling.
    """
    if scale != "ByN":
        raise ValueError("only the ByN scaling is supported")
    if spec.n_samples < 1000:
        raise ValueError("a histogram needs at least 10^3 samples")
    s = smallest_singular_values(spec, threads) if data is None else np.asarray(data)
    x = spec.n_dim * s
    counts, edges = np.histogram(x, bins=bins, range=tuple(range_))
    inside = int(counts.sum())
    if normalization == "count":
        vals = counts.astype(float)
    elif normalization == "pdf":
        vals = counts / (inside * np.diff(edges))
    elif normalization == "cdf":
        vals = np.cumsum(counts) / inside
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return DensityTable(edges, counts, vals, normalization, inside, int(x.size))


def resolvent_trace_mean(spec: EnsembleSpec, E: float, eps: float, threads: Optional[int] = None):
    """Mean and standard error of (1/N) sum_i 1/(sigma_i^2 - E - i eps).

    Returns
    -------
    dict with ``mean`` (complex) and ``std_error`` (complex; real and imaginary
    parts are the component-wise standard errors).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    w = complex(E, eps)
    vals = _collect(spec, threads, lambda sv: np.mean(1.0 / (sv * sv - w)))
    n = vals.size
    mean = vals.mean()
    se = complex(vals.real.std(ddof=1), vals.imag.std(ddof=1)) / math.sqrt(n) if n > 1 else complex("nan")
    return {"mean": complex(mean), "std_error": se, "n": n}


def median_smallest_eigenvalue(spec: EnsembleSpec, threads: Optional[int] = None) -> float:
    """Median over samples of the smallest eigenvalue sigma_min^2 of (X - z)(X - z)*."""
    return float(np.median(smallest_singular_values(spec, threads) ** 2))


def edelman_density(kind: Union[Kind, str], x):
    """Limiting density of N sigma_min at z = 0: 2x e^{-x^2} (complex), (1+x) e^{-x^2/2-x} (real)."""
    kind = Kind(kind)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = 2 * x * np.exp(-x * x) if kind is Kind.COMPLEX else (1 + x) * np.exp(-0.5 * x * x - x)
    return out[()] if out.ndim == 0 else out


def edelman_cdf(kind: Union[Kind, str], x):
    """Distribution functions 1 - e^{-x^2} (complex) and 1 - e^{-x^2/2-x} (real)."""
    kind = Kind(kind)
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    out = -np.expm1(-x * x) if kind is Kind.COMPLEX else -np.expm1(-0.5 * x * x - x)
    return out[()] if out.ndim == 0 else out


def ks_to_edelman(kind: Union[Kind, str], scaled: np.ndarray) -> float:
    """KS distance of N sigma_min samples to the limiting law of ``kind``."""
    return float(stats.kstest(scaled, lambda x: edelman_cdf(kind, x)).statistic)


def ks_two_sample(x: np.ndarray, y: np.ndarray) -> float:
    return float(stats.ks_2samp(x, y).statistic)


def write_resolvent_csv(fh: IO[str], rows: List[dict]):
    """rows: dicts with E, eps, mean, std_error."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["E", "eps", "re_mean", "im_mean", "re_se", "im_se"])
    for r in rows:
        m, s = r["mean"], r["std_error"]
        w.writerow([repr(float(r["E"])), repr(float(r["eps"])), repr(m.real), repr(m.imag),
                    repr(s.real), repr(s.imag)])


def write_sigma_min_csv(fh: IO[str], sigma_min: np.ndarray):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["sample_index", "sigma_min"])
    for i, s in enumerate(sigma_min):
        w.writerow([str(i), repr(float(s))])
