"""Input model: marginal distributions, product input spaces, seeded sampling.

All randomness flows through :class:`RngStream`, a ``(seed, stream)`` pair
mapped to a PCG64 generator through ``numpy.random.SeedSequence``. Equal pairs
reproduce the same sequence bitwise; distinct stream ids yield statistically
independent streams, which the estimators use to parallelize over fixed-size
sample chunks without losing determinism.

Sampling is inverse-transform throughout: a matrix of uniforms is pushed
through each marginal's quantile function column by column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError

# Uniform draws are (k + 0.5) / 2^53 for k in [0, 2^53): strictly inside (0, 1),
# so quantile transforms of unbounded marginals never produce infinities.
_U53 = 1 << 53


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on [lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = _require_finite("lo", self.lo)
        hi = _require_finite("hi", self.hi)
        if not lo < hi:
            raise ParameterError(f"uniform needs lo < hi, got [{lo}, {hi}]")

    def quantile(self, u):
        _check_unit_open(u)
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Normal:
    """Normal distribution given by mean and standard deviation.

    Configuration files and the physical test case use the coefficient of
    variation instead; build those with :meth:`from_cv` (sd = |mean| * cv).
    """

    mean: float
    sd: float

    def __post_init__(self):
        _require_finite("mean", self.mean)
        sd = _require_finite("sd", self.sd)
        if sd < 0:
            raise ParameterError(f"normal sd must be >= 0, got {sd}")

    @classmethod
    def from_cv(cls, mean: float, cv: float) -> "Normal":
        mean = _require_finite("mean", mean)
        cv = _require_finite("cv", cv)
        if cv < 0:
            raise ParameterError(f"normal cv must be >= 0, got {cv}")
        return cls(mean, abs(mean) * cv)

    def quantile(self, u):
        _check_unit_open(u)
        return self.mean + self.sd * ndtri(np.asarray(u, dtype=float))

    def pdf(self, x):
        if self.sd == 0:
            raise ParameterError("degenerate normal (sd=0) has no density")
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2.0 * math.pi))

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class LogNormal:
    """Log-normal distribution of the variable itself, given mean and CV.

    The underlying normal parameters follow by moment matching:
    sigma_ln^2 = ln(1 + cv^2), mu_ln = ln(mean) - sigma_ln^2 / 2.
    """

    mean: float
    cv: float

    def __post_init__(self):
        mean = _require_finite("mean", self.mean)
        cv = _require_finite("cv", self.cv)
        if mean <= 0:
            raise ParameterError(f"lognormal mean must be > 0, got {mean}")
        if cv <= 0:
            raise ParameterError(f"lognormal cv must be > 0, got {cv}")

    @property
    def sigma_ln(self) -> float:
        return math.sqrt(math.log1p(self.cv * self.cv))

    @property
    def mu_ln(self) -> float:
        return math.log(self.mean) - 0.5 * math.log1p(self.cv * self.cv)

    def quantile(self, u):
        _check_unit_open(u)
        return np.exp(self.mu_ln + self.sigma_ln * ndtri(np.asarray(u, dtype=float)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        z = (np.log(x[pos]) - self.mu_ln) / self.sigma_ln
        out[pos] = np.exp(-0.5 * z * z) / (x[pos] * self.sigma_ln * math.sqrt(2.0 * math.pi))
        return out

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)


MarginalDistribution = Union[Uniform, Normal, LogNormal]


def _check_unit_open(u) -> None:
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ParameterError("quantile argument must lie strictly in (0, 1)")


@dataclass(frozen=True)
class InputSpace:
    """Product of independent marginals; one draw is a d-vector."""

    marginals: tuple[MarginalDistribution, ...]

    def __init__(self, marginals: Sequence[MarginalDistribution]):
        marginals = tuple(marginals)
        if len(marginals) == 0:
            raise ParameterError("input space needs at least one marginal")
        object.__setattr__(self, "marginals", marginals)

    @property
    def d(self) -> int:
        return len(self.marginals)

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """Draw an (n, d) matrix of independent rows from the product density."""
        if n < 1:
            raise ParameterError(f"sample size must be >= 1, got {n}")
        k = gen.integers(0, _U53, size=(n, self.d))
        u = (k.astype(np.float64) + 0.5) / _U53
        out = np.empty((n, self.d), dtype=np.float64)
        for j, marginal in enumerate(self.marginals):
            out[:, j] = marginal.quantile(u[:, j])
        return out


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream id).

    A single stream must not be shared across threads; hand each worker its
    own stream id instead.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.stream) < (1 << 32):
            raise ParameterError(f"stream id must be in [0, 2^32), got {self.stream}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) % (1 << 64), spawn_key=(int(self.stream),)
        )
        return np.random.Generator(np.random.PCG64(ss))


def inverse_cdf(dist: MarginalDistribution, u: float) -> float:
    """The u-quantile of a marginal, for u strictly inside (0, 1)."""
    return float(dist.quantile(u))


def sample_matrix(space: InputSpace, n: int, rng: RngStream) -> np.ndarray:
    """Draw n i.i.d. points from the input space as an (n, d) matrix."""
    return space.sample(n, rng.generator())


def random_permutation(d: int, rng: RngStream) -> np.ndarray:
    """Uniformly random permutation of the variable indices 0..d-1."""
    if d < 1:
        raise ParameterError(f"permutation size must be >= 1, got {d}")
    return rng.generator().permutation(d)


def permutation_rows(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n independent uniform permutations of 0..d-1, one per row."""
    rows = np.tile(np.arange(d), (n, 1))
    gen.permuted(rows, axis=1, out=rows)
    return rows
