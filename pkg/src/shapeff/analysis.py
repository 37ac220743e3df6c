"""Error metrics and convergence studies for the effect estimators.

A convergence study runs R independently seeded trials at each sample size N,
scores every trial by a sum of squared errors, and fits the log-log slope of
mean SSE against N. With exact reference indices the SSE is taken against
them; without a closed form the trial-mean variant is used, which estimates
the same expected SSE from the scatter of the trials alone.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EvaluationError, ParameterError
from .estimators import (EstimatorConfig, estimate_main_effects,
                         estimate_shapley_all, estimate_shapley_winding,
                         estimate_total_effects)
from .inputs import InputSpace
from .models import ModelFunction
from .reference import SensitivityIndices

ESTIMATOR_KINDS = ("shapley", "shapley-winding", "main", "total")


def sse_exact(estimates: Sequence[float], exact: Sequence[float]) -> float:
    """Sum of squared errors of an estimate vector against exact indices."""
    estimates = np.asarray(estimates, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if estimates.shape != exact.shape or estimates.ndim != 1:
        raise ParameterError(
            f"vector shapes differ: {estimates.shape} vs {exact.shape}")
    return math.fsum(((estimates - exact) ** 2).tolist())


def sse_samplemean(estimates: np.ndarray) -> float:
    """Expected-SSE estimate from R trials alone: scatter about the trial mean.

    For an R x d table of per-trial estimates, returns
    (1/(R-1)) * sum_r sum_j (est[r, j] - colmean[j])^2.
    """
    estimates = np.asarray(estimates, dtype=float)
    if estimates.ndim != 2:
        raise ParameterError(f"expected an R x d table, got shape {estimates.shape}")
    r = estimates.shape[0]
    if r < 2:
        raise ParameterError(f"the trial-mean SSE needs R >= 2 trials, got {r}")
    centered = estimates - estimates.mean(axis=0)
    return math.fsum((centered ** 2).ravel().tolist()) / (r - 1)


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    """Derive a stable 64-bit seed for trial r at sample size N.

    Uses a keyed digest rather than Python's hash(), which is salted per
    process and would break reproducibility across runs.
    """
    digest = hashlib.blake2b(f"{n}:{trial}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "big")) % (1 << 64)


@dataclass(frozen=True)
class ConvergenceStudy:
    """All trial SSEs of one model/estimator pair across a ladder of N values.

    sse_per_trial maps (N, r) with r in 1..R to the trial's SSE (in
    sample-mean mode, to its squared deviation from the trial mean).
    fitted_slope is the least-squares slope of log2(mean SSE) against
    log2(N), or None when any mean SSE is zero.
    """

    model: str
    estimator: str
    ns: tuple[int, ...]
    trials: int
    mode: str
    sse_per_trial: Mapping[tuple[int, int], float]
    mean_sse: Mapping[int, float]
    fitted_slope: float | None


def _run_estimator(kind: str, f: ModelFunction, space: InputSpace,
                   cfg: EstimatorConfig) -> np.ndarray:
    if kind == "shapley":
        return np.asarray(estimate_shapley_all(f, space, cfg).estimates)
    if kind == "shapley-winding":
        return np.asarray(estimate_shapley_winding(f, space, cfg).estimates)
    if kind == "main":
        return np.asarray(estimate_main_effects(f, space, cfg).values)
    if kind == "total":
        return np.asarray(estimate_total_effects(f, space, cfg).values)
    raise ParameterError(f"unknown estimator kind {kind!r}; expected one of {ESTIMATOR_KINDS}")


def _exact_vector(kind: str, exact: SensitivityIndices) -> np.ndarray:
    if kind in ("shapley", "shapley-winding"):
        return np.asarray(exact.shapley)
    if kind == "main":
        return np.asarray(exact.main)
    return np.asarray(exact.total)


def convergence_study(f: ModelFunction, space: InputSpace, kind: str,
                      ns: Sequence[int], trials: int, base_seed: int, *,
                      exact: SensitivityIndices | None = None,
                      workers: int = 1) -> ConvergenceStudy:
    """Run R seeded trials of one estimator at each N and score SSE decay.

    Pass `exact` to score against closed-form indices; leave it None to fall
    back to the trial-mean SSE variant (the only option when no closed form
    exists, as for the plate model).
    """
    ns = [int(n) for n in ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ParameterError(f"sample sizes must be non-empty and ascending, got {ns}")
    if trials < 2:
        raise ParameterError(f"need at least 2 trials, got {trials}")
    if kind not in ESTIMATOR_KINDS:
        raise ParameterError(f"unknown estimator kind {kind!r}; expected one of {ESTIMATOR_KINDS}")

    mode = "exact" if exact is not None else "sample-mean"
    sse_per_trial: dict[tuple[int, int], float] = {}
    mean_sse: dict[int, float] = {}
    for n in ns:
        rows = []
        for r in range(1, trials + 1):
            cfg = EstimatorConfig(n=n, seed=trial_seed(base_seed, n, r), workers=workers)
            try:
                rows.append(_run_estimator(kind, f, space, cfg))
            except EvaluationError as exc:
                raise EvaluationError(f"trial {r} at N={n} failed: {exc}") from exc
        table = np.vstack(rows)
        if exact is not None:
            target = _exact_vector(kind, exact)
            for r in range(1, trials + 1):
                sse_per_trial[(n, r)] = sse_exact(table[r - 1], target)
            mean_sse[n] = math.fsum(sse_per_trial[(n, r)] for r in range(1, trials + 1)) / trials
        else:
            centered = table - table.mean(axis=0)
            for r in range(1, trials + 1):
                sse_per_trial[(n, r)] = math.fsum((centered[r - 1] ** 2).tolist())
            mean_sse[n] = sse_samplemean(table)

    slope = None
    if all(v > 0 for v in mean_sse.values()) and len(ns) >= 2:
        x = np.log2(np.asarray(ns, dtype=float))
        y = np.log2(np.asarray([mean_sse[n] for n in ns]))
        slope = float(np.polyfit(x, y, 1)[0])

    return ConvergenceStudy(
        model=f.name,
        estimator=kind,
        ns=tuple(ns),
        trials=trials,
        mode=mode,
        sse_per_trial=sse_per_trial,
        mean_sse=mean_sse,
        fitted_slope=slope,
    )


def convergence_csv_lines(study: ConvergenceStudy) -> list[str]:
    """Render a study in the convergence CSV format.

    One row per (N, trial), then a `#summary` section of (N, mean SSE) rows,
    then a final `#slope,<value|na>` line.
    """
    lines = ["model,estimator,N,trial,sse"]
    for n in study.ns:
        for r in range(1, study.trials + 1):
            sse = study.sse_per_trial[(n, r)]
            lines.append(f"{study.model},{study.estimator},{n},{r},{sse:.17g}")
    lines.append("#summary")
    for n in study.ns:
        lines.append(f"{n},{study.mean_sse[n]:.17g}")
    slope = "na" if study.fitted_slope is None else f"{study.fitted_slope:.17g}"
    lines.append(f"#slope,{slope}")
    return lines
