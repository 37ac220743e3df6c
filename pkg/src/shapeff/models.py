"""Functions under analysis.

:class:`ModelFunction` wraps any scalar-valued function of a d-vector with a
thread-safe evaluation counter, so the estimators' cost contracts can be
checked for builtin and user-supplied models alike. Builtin test functions
carry vectorized implementations and canonical input spaces; external
simulators are driven over a line-based stdin/stdout protocol.
"""

from __future__ import annotations

import math
import subprocess
import threading
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, ParameterError
from .inputs import InputSpace, LogNormal, Normal, Uniform


class ModelFunction:
    """A pure function f: R^d -> R with an evaluation counter.

    ``vectorized=True`` means ``func`` maps an (n, d) array to an (n,) array;
    otherwise it maps a single d-vector to a float and batches are looped.
    The counter increments by the number of points evaluated and uses a lock,
    so concurrent evaluation from several threads stays consistent.
    """

    def __init__(self, dim: int, func: Callable, *, name: str = "model",
                 vectorized: bool = False):
        if dim < 1:
            raise ParameterError(f"model dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self.name = name
        self._func = func
        self._vectorized = vectorized
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self) -> int:
        return self._count

    def reset_count(self) -> None:
        with self._lock:
            self._count = 0

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ParameterError(
                f"{self.name} expects a vector of length {self.dim}, got shape {x.shape}")
        if self._vectorized:
            value = float(np.asarray(self._func(x[None, :]))[0])
        else:
            value = float(self._func(x))
        with self._lock:
            self._count += 1
        return value

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate f at every row of an (n, d) array; counts n evaluations."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ParameterError(
                f"{self.name} expects an (n, {self.dim}) batch, got shape {points.shape}")
        if self._vectorized:
            values = np.asarray(self._func(points), dtype=float)
        else:
            values = np.array([float(self._func(row)) for row in points])
        with self._lock:
            self._count += points.shape[0]
        return values

    def __repr__(self) -> str:
        return f"ModelFunction({self.name!r}, dim={self.dim}, eval_count={self._count})"


def ishigami(a: float = 7.0, b: float = 0.1) -> ModelFunction:
    """Three-variable benchmark (1 + b*x3^4) sin(x1) + a sin(x2)^2."""
    if not (a > 0 and b > 0):
        raise ParameterError(f"ishigami needs a > 0 and b > 0, got a={a}, b={b}")

    def f(X):
        return (1.0 + b * X[:, 2] ** 4) * np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2

    return ModelFunction(3, f, name="ishigami", vectorized=True)


def ishigami_space() -> InputSpace:
    return InputSpace([Uniform(-math.pi, math.pi)] * 3)


def sobol_g(a: Sequence[float]) -> ModelFunction:
    """Product benchmark prod_j (|4x_j - 2| + a_j) / (1 + a_j) on [0, 1]^d."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ParameterError("sobol_g needs a non-empty 1-d weight vector")
    if np.any(a < 0):
        raise ParameterError("sobol_g weights must be non-negative")

    def f(X):
        return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=1)

    return ModelFunction(a.size, f, name="sobol-g", vectorized=True)


def sobol_g_space(d: int) -> InputSpace:
    return InputSpace([Uniform(0.0, 1.0)] * d)


def plate_buckling() -> ModelFunction:
    """Buckling strength of a uniaxially compressed rectangular plate.

    Six inputs: width, thickness, yield stress, elastic modulus, initial
    deflection, residual stress. The first four must be positive for the
    slenderness lambda = (x1/x2) sqrt(x3/x4) to be real; non-positive draws
    raise instead of propagating NaN.
    """

    def f(X):
        bad = np.nonzero(np.any(X[:, :4] <= 0, axis=1))[0]
        if bad.size:
            i = int(bad[0])
            raise EvaluationError(
                f"plate-buckling needs positive x1..x4; offending point {X[i].tolist()}")
        lam = (X[:, 0] / X[:, 1]) * np.sqrt(X[:, 2] / X[:, 3])
        return ((2.1 / lam - 0.9 / lam ** 2)
                * (1.0 - 0.75 * X[:, 4] / lam)
                * (1.0 - 2.0 * X[:, 1] * X[:, 5] / X[:, 0]))

    return ModelFunction(6, f, name="plate-buckling", vectorized=True)


def plate_buckling_space() -> InputSpace:
    """The published input model for the plate: means and CVs per variable."""
    return InputSpace([
        Normal.from_cv(23.808, 0.028),      # width
        LogNormal(0.525, 0.044),            # thickness
        LogNormal(44.2, 0.1235),            # yield stress
        Normal.from_cv(28623.0, 0.076),     # elastic modulus
        Normal.from_cv(0.35, 0.05),         # initial deflection
        Normal.from_cv(5.25, 0.07),         # residual stress
    ])


def constant_model(value: float, dim: int) -> ModelFunction:
    """f(x) = value for every x; all sensitivity indices are exactly zero."""
    value = float(value)

    def f(X):
        return np.full(X.shape[0], value)

    return ModelFunction(dim, f, name="constant", vectorized=True)


class ExternalModel:
    """Adapter for a black-box simulator speaking the line protocol.

    Each request is one line of d space-separated decimal floats; the process
    must answer one decimal float per line, in order. EOF on its stdin tells
    the process to finish. Access is serialized (one in-flight request), so
    the wrapped model is safe to call from several threads.
    """

    def __init__(self, command: Sequence[str], dim: int):
        if dim < 1:
            raise ParameterError(f"external model dimension must be >= 1, got {dim}")
        self.command = list(command)
        if not self.command:
            raise ParameterError("external model command must be non-empty")
        self.dim = int(dim)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()
        self._line = 0

    def _ensure_started(self) -> None:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                )
            except OSError as exc:
                raise EvaluationError(f"cannot start external model {self.command}: {exc}")

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ParameterError(
                f"external model expects a vector of length {self.dim}, got shape {x.shape}")
        with self._lock:
            self._ensure_started()
            proc = self._proc
            self._line += 1
            line_no = self._line
            request = " ".join(format(v, ".17g") for v in x)
            try:
                proc.stdin.write(request + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                raise EvaluationError(
                    f"external model closed its input at line {line_no}"
                    f"{self._exit_note()}")
            reply = proc.stdout.readline()
            if reply == "":
                raise EvaluationError(
                    f"external model produced no reply for line {line_no}"
                    f"{self._exit_note()}")
            try:
                return float(reply.strip())
            except ValueError:
                raise EvaluationError(
                    f"external model sent a malformed reply at line {line_no}: {reply.strip()!r}")

    def _exit_note(self) -> str:
        if self._proc is None:
            return ""
        code = self._proc.poll()
        if code is None:
            return ""
        err = ""
        try:
            err = self._proc.stderr.read().strip()
        except Exception:
            pass
        note = f" (process exited with code {code}"
        if err:
            note += f"; stderr: {err[:200]}"
        return note + ")"

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin and not proc.stdin.closed:
                proc.stdin.close()
            proc.wait(timeout=5)
        except Exception:
            proc.kill()
            proc.wait()

    def as_model(self) -> ModelFunction:
        return ModelFunction(self.dim, self.evaluate, name="external")

    def __enter__(self) -> "ExternalModel":
        self._ensure_started()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def external_model(command: Sequence[str], dim: int) -> ModelFunction:
    """Wrap an external simulator; the subprocess lives as long as the adapter.

    Use :class:`ExternalModel` directly when you need explicit lifecycle
    control (it is a context manager).
    """
    return ExternalModel(command, dim).as_model()
