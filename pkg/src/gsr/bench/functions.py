"""Standard synthetic test functions in their usual minimization form.

All functions take an ``(n, d)`` array and return ``n`` values. The harness
maximizes ``-f`` (see :func:`eval_benchmark`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def ackley(X, a=20.0, b=0.2, c=2.0 * math.pi):
    X = np.atleast_2d(X)
    d = X.shape[1]
    t1 = -a * np.exp(-b * np.sqrt((X**2).sum(1) / d))
    t2 = -np.exp(np.cos(c * X).sum(1) / d)
    return t1 + t2 + a + math.e


def beale(X):
    X = np.atleast_2d(X)
    x, y = X[:, 0], X[:, 1]
    return (1.5 - x + x * y) ** 2 + (2.25 - x + x * y**2) ** 2 + (2.625 - x + x * y**3) ** 2


def branin(X):
    X = np.atleast_2d(X)
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array([
    [10, 3, 17, 3.5, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
], dtype=float)
_H6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
], dtype=float)


def hartmann6(X):
    X = np.atleast_2d(X)
    inner = (_H6_A[None, :, :] * (X[:, None, :] - _H6_P[None, :, :]) ** 2).sum(2)
    return -(np.exp(-inner) * _H6_ALPHA).sum(1)


def levy(X):
    X = np.atleast_2d(X)
    w = 1.0 + (X - 1.0) / 4.0
    t1 = np.sin(math.pi * w[:, 0]) ** 2
    wi = w[:, :-1]
    mid = ((wi - 1.0) ** 2 * (1.0 + 10.0 * np.sin(math.pi * wi + 1.0) ** 2)).sum(1)
    wd = w[:, -1]
    t3 = (wd - 1.0) ** 2 * (1.0 + np.sin(2.0 * math.pi * wd) ** 2)
    return t1 + mid + t3


def rosenbrock(X):
    X = np.atleast_2d(X)
    return (100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1.0) ** 2).sum(1)


def griewank(X):
    X = np.atleast_2d(X)
    i = np.sqrt(np.arange(1, X.shape[1] + 1))
    return (X**2).sum(1) / 4000.0 - np.cos(X / i).prod(1) + 1.0


def styblinski_tang(X):
    X = np.atleast_2d(X)
    return 0.5 * (X**4 - 16.0 * X**2 + 5.0 * X).sum(1)


def six_hump_camel(X):
    X = np.atleast_2d(X)
    x, y = X[:, 0], X[:, 1]
    return (4.0 - 2.1 * x**2 + x**4 / 3.0) * x**2 + x * y + (-4.0 + 4.0 * y**2) * y**2


FUNCTIONS = {
    "ackley": ackley,
    "beale": beale,
    "branin": branin,
    "hartmann6": hartmann6,
    "levy": levy,
    "rosenbrock": rosenbrock,
    "griewank": griewank,
    "styblinski_tang": styblinski_tang,
    "six_hump_camel": six_hump_camel,
}

_ST_MIN = -39.16616570377142


def _default_box(fid: str, dim: int):
    boxes = {
        "ackley": (-32.768, 32.768),
        "levy": (-10.0, 10.0),
        "rosenbrock": (-5.0, 10.0),
        "griewank": (-600.0, 600.0),
        "styblinski_tang": (-5.0, 5.0),
        "hartmann6": (0.0, 1.0),
        "beale": (-4.5, 4.5),
    }
    if fid == "branin":
        return ((-5.0, 10.0), (0.0, 15.0))
    if fid == "six_hump_camel":
        return ((-3.0, 3.0), (-2.0, 2.0))
    return (boxes[fid],) * dim


_FIXED_DIM = {"beale": 2, "branin": 2, "hartmann6": 6, "six_hump_camel": 2}


def _minimizers(fid: str, dim: int) -> list[np.ndarray]:
    if fid in ("ackley", "griewank"):
        return [np.zeros(dim)]
    if fid in ("levy", "rosenbrock"):
        return [np.ones(dim)]
    if fid == "styblinski_tang":
        return [np.full(dim, -2.903534027771178)]
    if fid == "beale":
        return [np.array([3.0, 0.5])]
    if fid == "branin":
        return [np.array([-math.pi, 12.275]), np.array([math.pi, 2.275]), np.array([9.42478, 2.475])]
    if fid == "hartmann6":
        return [np.array([0.20168952, 0.15001069, 0.47687398, 0.27533243, 0.31165162, 0.65730054])]
    if fid == "six_hump_camel":
        return [np.array([0.0898, -0.7126]), np.array([-0.0898, 0.7126])]
    raise KeyError(fid)


_MIN_VALUE = {
    "ackley": 0.0, "beale": 0.0, "branin": 0.397887, "hartmann6": -3.322368, "levy": 0.0,
    "rosenbrock": 0.0, "griewank": 0.0, "six_hump_camel": -1.0316,
}


@dataclass(frozen=True)
class BenchmarkSpec:
    fid: str
    dim: int = 2
    bounds: tuple[tuple[float, float], ...] | None = None
    noise_sigma: float = 0.0
    negate: bool = True

    def __post_init__(self):
        if self.fid not in FUNCTIONS:
            raise ValueError(f"unknown benchmark {self.fid!r}")
        dim = _FIXED_DIM.get(self.fid, self.dim)
        if self.fid in _FIXED_DIM and self.dim != dim:
            object.__setattr__(self, "dim", dim)
        bounds = self.bounds if self.bounds is not None else _default_box(self.fid, dim)
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != dim:
            raise ValueError("bounds do not match dimension")
        if any(lo >= hi for lo, hi in bounds):
            raise ValueError("degenerate bounds")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        object.__setattr__(self, "bounds", bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def raw(self, X) -> np.ndarray:
        return FUNCTIONS[self.fid](np.atleast_2d(np.asarray(X, float)))

    def value(self, X) -> np.ndarray:
        """Noiseless value in the harness sign convention."""
        v = self.raw(X)
        return -v if self.negate else v

    @property
    def minimizers(self) -> list[np.ndarray]:
        return _minimizers(self.fid, self.dim)

    @property
    def optimum(self) -> float:
        """Best attainable harness value (max of ``-f`` when negated)."""
        if self.fid == "styblinski_tang":
            fmin = _ST_MIN * self.dim
        else:
            fmin = _MIN_VALUE[self.fid]
        return -fmin if self.negate else fmin


def eval_benchmark(spec: BenchmarkSpec, x, rng: np.random.Generator | None = None) -> float:
    x = np.asarray(x, float).reshape(-1)
    lo, hi = spec.lower, spec.upper
    slack = 1e-12 * (hi - lo)
    if x.size != spec.dim or np.any(x < lo - slack) or np.any(x > hi + slack):
        raise ValueError(f"design {x.tolist()} outside the benchmark bounds")
    y = float(spec.value(x)[0])
    if spec.noise_sigma > 0.0:
        rng = np.random.default_rng() if rng is None else rng
        y += spec.noise_sigma * float(rng.standard_normal())
    return y
