"""Numeric substrate: checked dense matrices, named deterministic RNG streams,
and Beta-distribution sampling."""

from __future__ import annotations

import math

import numpy as np

# The sole numeric container: a 2-D, row-major, float64 ndarray.
Matrix = np.ndarray

PURPOSES = ("init", "shuffle", "beta", "select-tiebreak", "data-gen", "test-data-gen")

_MAX_SEED = 2**64


class RngStream:
    """Deterministic random stream keyed by (seed, purpose[, salt]).

    The same key always replays the same draw sequence; streams with distinct
    purposes or salts are statistically independent (the tag is mixed into the
    seed material of a counter-based generator). Single-owner: never share one
    stream between concurrent tasks.
    """

    def __init__(self, seed: int, purpose: str, salt: tuple[int, ...] = ()):
        if purpose not in PURPOSES:
            raise ValueError(f"unknown rng purpose {purpose!r}; expected one of {PURPOSES}")
        seed = int(seed)
        if not 0 <= seed < _MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.purpose = purpose
        self.salt = tuple(int(s) for s in salt)
        key = (PURPOSES.index(purpose), *self.salt)
        self.gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=key))
        )

    def substream(self, *salt: int) -> "RngStream":
        """A fresh independent stream under the same seed and purpose."""
        return RngStream(self.seed, self.purpose, self.salt + salt)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, purpose={self.purpose!r}, salt={self.salt})"


def ensure_finite(values: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{context}: non-finite values encountered")
    return values


def as_matrix(values, context: str = "matrix") -> Matrix:
    """Validate and coerce to a finite, positive-shape, row-major float64 matrix."""
    out = np.asarray(values, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{context}: expected a 2-D array, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{context}: dimensions must be positive, got shape {out.shape}")
    return ensure_finite(np.ascontiguousarray(out), context)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = as_matrix(a, "matmul lhs")
    b = as_matrix(b, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: lhs {a.shape} vs rhs {b.shape}")
    return ensure_finite(a @ b, "matmul result")


def sample_beta(alpha: float, beta: float, rng: RngStream) -> float:
    """One draw from Beta(alpha, beta).

    Uses Johnk's method when both shapes are <= 1 (accurate in the small-shape
    regime) and the ratio of Marsaglia-Tsang gamma variates otherwise.
    """
    if not (alpha > 0.0 and beta > 0.0):
        raise ValueError(f"beta shape parameters must be positive, got ({alpha}, {beta})")
    if alpha <= 1.0 and beta <= 1.0:
        return _johnk(alpha, beta, rng)
    x = _gamma_marsaglia_tsang(alpha, rng)
    y = _gamma_marsaglia_tsang(beta, rng)
    return x / (x + y)


def _johnk(alpha: float, beta: float, rng: RngStream) -> float:
    while True:
        u = rng.gen.random()
        v = rng.gen.random()
        x = u ** (1.0 / alpha)
        y = v ** (1.0 / beta)
        if x + y > 1.0:
            continue
        if x + y > 0.0:
            return x / (x + y)
        if u > 0.0 and v > 0.0:
            # both powers underflowed: form x/(x+y) in log space
            d = math.log(v) / beta - math.log(u) / alpha
            return 1.0 / (1.0 + math.exp(min(d, 700.0)))
        # pathological zero uniforms: retry


def _gamma_marsaglia_tsang(shape: float, rng: RngStream) -> float:
    if shape < 1.0:
        # boost: Gamma(a) = Gamma(a+1) * U^(1/a)
        u = rng.gen.random()
        while u == 0.0:
            u = rng.gen.random()
        return _gamma_marsaglia_tsang(shape + 1.0, rng) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.gen.standard_normal()
        v = (1.0 + c * x) ** 3
        if v <= 0.0:
            continue
        u = rng.gen.random()
        if u < 1.0 - 0.0331 * x**4:
            return d * v
        if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def shuffled_pairs(n: int, rng: RngStream) -> list[tuple[int, int]]:
    """floor(n/2) disjoint index pairs from a seeded shuffle of range(n).

    When n is odd, one index is left unpaired.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 items to pair, got {n}")
    perm = rng.gen.permutation(n)
    return [(int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(n // 2)]
