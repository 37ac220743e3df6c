"""Monte Carlo estimators for Shapley, main, and total effects.

The Shapley estimator walks, per sample, a random permutation of the variable
indices, replacing coordinates of one draw x by a second draw y one at a time
and crediting each step's pick-freeze increment to the variable just swapped.
Sharing a single permutation across all variables keeps the cost at (d+1)N
model evaluations while leaving every per-variable estimate unbiased; the
per-sample increments also yield an unbiased estimate of each estimator's
variance and hence confidence intervals.

All estimators partition the N samples into fixed-size chunks, give chunk k
the RNG stream id k, and merge per-chunk moments in ascending chunk order, so
reports are bitwise identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParameterError
from .inputs import InputSpace, RngStream, permutation_rows
from .models import ModelFunction

_CHUNK = 4096


@dataclass(frozen=True)
class EstimatorConfig:
    """Sample size, seed, worker count, and CI multiplier for one run."""

    n: int
    seed: int
    workers: int = 1
    ci_z: float = 1.96

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"sample size must be >= 2, got {self.n}")
        if self.workers < 1:
            raise ParameterError(f"worker count must be >= 1, got {self.workers}")
        if not self.ci_z > 0:
            raise ParameterError(f"ci multiplier must be > 0, got {self.ci_z}")


@dataclass(frozen=True)
class ShapleyReport:
    """Per-variable Shapley estimates with variances and confidence bounds.

    variance_of_estimator / ci_low / ci_high are None for the winding-stairs
    variant, whose correlated samples admit no unbiased variance estimate.
    sigma2_estimate is the plain sum of the estimates; sigma2_from_pairs is
    the mean of 0.5*(f(x)-f(y))^2 over the sample pairs, equal to it up to
    rounding by the per-sample telescoping identity. Estimates may be
    negative; they are never clamped.
    """

    d: int
    n: int
    estimates: tuple[float, ...]
    variance_of_estimator: tuple[float, ...] | None
    ci_low: tuple[float, ...] | None
    ci_high: tuple[float, ...] | None
    sigma2_estimate: float
    sigma2_from_pairs: float
    eval_count: int
    seed: int


@dataclass(frozen=True)
class EffectReport:
    """Pick-freeze main or total effect estimates with per-variable variances."""

    d: int
    n: int
    values: tuple[float, ...]
    variance_of_estimator: tuple[float, ...]
    kind: str
    eval_count: int
    seed: int


def pickfreeze_increment(f_x: float, f_minus: float, f_plus: float) -> float:
    """One permutation-walk increment (F - (F- + F+)/2) * (F- - F+).

    F is the value at the base point, F- the value before the current
    variable's coordinate is swapped, F+ the value after. Algebraically equal
    to 0.5*(F - F+)^2 - 0.5*(F - F-)^2.
    """
    if not (math.isfinite(f_x) and math.isfinite(f_minus) and math.isfinite(f_plus)):
        raise EvaluationError(
            f"pick-freeze increment needs finite values, got ({f_x}, {f_minus}, {f_plus})")
    return (f_x - 0.5 * (f_minus + f_plus)) * (f_minus - f_plus)


class _Moments:
    """Running per-variable mean and sum of squared deviations (M2).

    Chunks are merged with the pairwise-update rule; merging in a fixed order
    makes the result independent of how the chunks were computed.
    """

    def __init__(self, width: int):
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def merge(self, count: int, mean: np.ndarray, m2: np.ndarray) -> None:
        if count == 0:
            return
        total = self.count + count
        delta = mean - self.mean
        self.mean = self.mean + delta * (count / total)
        self.m2 = self.m2 + m2 + delta * delta * (self.count * count / total)
        self.count = total


def _chunk_moments(values: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    count = values.shape[0]
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return count, mean, m2


def _chunks(n: int) -> list[tuple[int, int, int]]:
    """(chunk index, start sample, chunk size) triples covering range(n)."""
    return [(k, s, min(s + _CHUNK, n) - s)
            for k, s in enumerate(range(0, n, _CHUNK))]


def _run_chunks(task, n: int, workers: int) -> list:
    """Evaluate task(chunk) for every chunk; results in ascending chunk order."""
    chunks = _chunks(n)
    if workers == 1 or len(chunks) == 1:
        return [task(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, chunks))


def _checked_batch(f: ModelFunction, points: np.ndarray, start: int) -> np.ndarray:
    try:
        values = f.evaluate_batch(points)
    except EvaluationError as exc:
        raise EvaluationError(
            f"evaluation failed in samples [{start}, {start + points.shape[0]}): {exc}"
        ) from exc
    bad = np.nonzero(~np.isfinite(values))[0]
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(
            f"non-finite model output {values[i]!r} at sample {start + i}: "
            f"x = {points[i].tolist()}")
    return values


def _require_match(f: ModelFunction, space: InputSpace) -> None:
    if f.dim != space.d:
        raise ParameterError(
            f"model dimension {f.dim} does not match input space dimension {space.d}")


def estimate_shapley_all(f: ModelFunction, space: InputSpace,
                         cfg: EstimatorConfig) -> ShapleyReport:
    """Estimate all d Shapley effects simultaneously from N permutation walks.

    Costs exactly (d+1)N model evaluations. The report carries the unbiased
    per-variable variance estimates and ci_z-sigma confidence intervals.
    """
    _require_match(f, space)
    d = space.d

    def task(chunk):
        k, start, count = chunk
        gen = RngStream(cfg.seed, stream=k).generator()
        x = space.sample(count, gen)
        y = space.sample(count, gen)
        perms = permutation_rows(gen, count, d)
        fx = _checked_batch(f, x, start)
        rows = np.arange(count)
        z = x.copy()
        g = np.empty((count, d))
        fprev = fx
        for step in range(d):
            cols = perms[:, step]
            z[rows, cols] = y[rows, cols]
            fz = _checked_batch(f, z, start)
            g[rows, cols] = (fx - 0.5 * (fprev + fz)) * (fprev - fz)
            fprev = fz
        pairs = 0.5 * (fx - fprev) ** 2
        return _chunk_moments(g), _chunk_moments(pairs[:, None])

    before = f.eval_count
    results = _run_chunks(task, cfg.n, cfg.workers)
    eval_count = f.eval_count - before

    g_stats = _Moments(d)
    pair_stats = _Moments(1)
    for g_part, pair_part in results:
        g_stats.merge(*g_part)
        pair_stats.merge(*pair_part)

    estimates = g_stats.mean
    variance = g_stats.m2 / (cfg.n * (cfg.n - 1))
    half = cfg.ci_z * np.sqrt(variance)
    return ShapleyReport(
        d=d,
        n=cfg.n,
        estimates=tuple(estimates.tolist()),
        variance_of_estimator=tuple(variance.tolist()),
        ci_low=tuple((estimates - half).tolist()),
        ci_high=tuple((estimates + half).tolist()),
        sigma2_estimate=math.fsum(estimates.tolist()),
        sigma2_from_pairs=float(pair_stats.mean[0]),
        eval_count=eval_count,
        seed=cfg.seed,
    )


def estimate_shapley_winding(f: ModelFunction, space: InputSpace,
                             cfg: EstimatorConfig, *, cyclic: bool = False) -> ShapleyReport:
    """Winding-stairs Shapley estimator: pair consecutive points of one sequence.

    Reusing each walk's final value as the next pair's base value cuts the
    cost to d*N + 1 evaluations, or d*N when `cyclic` closes the sequence by
    pairing the last point with the first (the run is then not extensible in
    N). The pairs overlap, so no unbiased variance estimate exists and the
    variance and CI fields are None. The run is single-stream and sequential;
    cfg.workers is ignored.
    """
    _require_match(f, space)
    d = space.d
    n = cfg.n
    gen = RngStream(cfg.seed, stream=0).generator()
    points = space.sample(n if cyclic else n + 1, gen)
    perms = permutation_rows(gen, n, d)

    before = f.eval_count
    first = _checked_batch(f, points[:1], 0)
    carry = float(first[0])

    g_stats = _Moments(d)
    pair_stats = _Moments(1)
    for k, start, count in _chunks(n):
        end = start + count
        base_pts = points[start:end]
        if cyclic:
            nxt = points.take(np.arange(start + 1, end + 1) % n, axis=0)
        else:
            nxt = points[start + 1:end + 1]
        rows = np.arange(count)
        z = base_pts.copy()
        fstep = np.empty((count, d))
        for step in range(d):
            cols = perms[start:end, step]
            z[rows, cols] = nxt[rows, cols]
            if cyclic and end == n and step == d - 1:
                # The final walk ends at the first point; reuse its cached value.
                if count > 1:
                    fstep[:-1, step] = _checked_batch(f, z[:-1], start)
                fstep[-1, step] = float(first[0])
            else:
                fstep[:, step] = _checked_batch(f, z, start)
        fbase = np.empty(count)
        fbase[0] = carry
        fbase[1:] = fstep[:-1, d - 1]
        carry = float(fstep[-1, d - 1])

        g = np.empty((count, d))
        fprev = fbase
        for step in range(d):
            cols = perms[start:end, step]
            fz = fstep[:, step]
            g[rows, cols] = (fbase - 0.5 * (fprev + fz)) * (fprev - fz)
            fprev = fz
        pairs = 0.5 * (fbase - fstep[:, d - 1]) ** 2
        g_stats.merge(*_chunk_moments(g))
        pair_stats.merge(*_chunk_moments(pairs[:, None]))

    eval_count = f.eval_count - before
    estimates = g_stats.mean
    return ShapleyReport(
        d=d,
        n=n,
        estimates=tuple(estimates.tolist()),
        variance_of_estimator=None,
        ci_low=None,
        ci_high=None,
        sigma2_estimate=math.fsum(estimates.tolist()),
        sigma2_from_pairs=float(pair_stats.mean[0]),
        eval_count=eval_count,
        seed=cfg.seed,
    )


def estimate_main_effects(f: ModelFunction, space: InputSpace,
                          cfg: EstimatorConfig) -> EffectReport:
    """Pick-freeze main effects: mean of f(x) * (f(x_j, y_-j) - f(y)) per j.

    Pairing the mu^2 correction f(x)f(y) with each sample keeps the whole
    estimator one sample mean, so the same per-term variance estimate applies.
    Costs (d+2)N evaluations.
    """
    _require_match(f, space)
    d = space.d

    def task(chunk):
        k, start, count = chunk
        gen = RngStream(cfg.seed, stream=k).generator()
        x = space.sample(count, gen)
        y = space.sample(count, gen)
        fx = _checked_batch(f, x, start)
        fy = _checked_batch(f, y, start)
        terms = np.empty((count, d))
        w = y.copy()
        for j in range(d):
            w[:, j] = x[:, j]
            fw = _checked_batch(f, w, start)
            terms[:, j] = fx * (fw - fy)
            w[:, j] = y[:, j]
        return _chunk_moments(terms)

    before = f.eval_count
    results = _run_chunks(task, cfg.n, cfg.workers)
    eval_count = f.eval_count - before

    stats = _Moments(d)
    for part in results:
        stats.merge(*part)
    variance = stats.m2 / (cfg.n * (cfg.n - 1))
    return EffectReport(
        d=d,
        n=cfg.n,
        values=tuple(stats.mean.tolist()),
        variance_of_estimator=tuple(variance.tolist()),
        kind="main",
        eval_count=eval_count,
        seed=cfg.seed,
    )


def estimate_total_effects(f: ModelFunction, space: InputSpace,
                           cfg: EstimatorConfig) -> EffectReport:
    """Pick-freeze total effects: mean of 0.5 * (f(x) - f(y_j, x_-j))^2 per j.

    Costs (d+1)N evaluations; values are non-negative by construction.
    """
    _require_match(f, space)
    d = space.d

    def task(chunk):
        k, start, count = chunk
        gen = RngStream(cfg.seed, stream=k).generator()
        x = space.sample(count, gen)
        y = space.sample(count, gen)
        fx = _checked_batch(f, x, start)
        terms = np.empty((count, d))
        v = x.copy()
        for j in range(d):
            v[:, j] = y[:, j]
            fv = _checked_batch(f, v, start)
            terms[:, j] = 0.5 * (fx - fv) ** 2
            v[:, j] = x[:, j]
        return _chunk_moments(terms)

    before = f.eval_count
    results = _run_chunks(task, cfg.n, cfg.workers)
    eval_count = f.eval_count - before

    stats = _Moments(d)
    for part in results:
        stats.merge(*part)
    variance = stats.m2 / (cfg.n * (cfg.n - 1))
    return EffectReport(
        d=d,
        n=cfg.n,
        values=tuple(stats.mean.tolist()),
        variance_of_estimator=tuple(variance.tolist()),
        kind="total",
        eval_count=eval_count,
        seed=cfg.seed,
    )
