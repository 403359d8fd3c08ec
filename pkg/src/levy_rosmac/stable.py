"""Symmetric alpha-stable variates and the Levy-measure normalization.

The standard symmetric law used everywhere here has characteristic
function ``exp(-|xi|**alpha)``: alpha=2 is N(0, 2), alpha=1 is standard Cauchy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class StableNoiseSpec:
    alpha: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha!r}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError(f"sigma must be finite and non-negative, got {self.sigma!r}")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator with the 128-bit key built
    from both integers, so distinct stream ids never share a sequence.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed | (self.stream_id << 64)))


def levy_constant(alpha: float) -> float:
    """Normalization ``c(1, alpha)`` of the symmetric Levy measure
    ``c |u|^(-1-alpha) du``, for alpha strictly between 0 and 2."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"levy_constant needs alpha in (0, 2), got {alpha!r}")
    log_c = (
        math.log(alpha)
        + math.lgamma(0.5 * (1.0 + alpha))
        - (1.0 - alpha) * math.log(2.0)
        - 0.5 * math.log(math.pi)
        - math.lgamma(1.0 - 0.5 * alpha)
    )
    return math.exp(log_c)


@numba.njit(cache=True)
def cms_scalar(alpha, u, w):
    """Chambers-Mallows-Stuck map from ``u ~ U[0, 1)`` and ``w ~ Exp(1)``
    to one standard symmetric stable draw."""
    v = math.pi * (u - 0.5)
    if alpha == 1.0:
        return math.tan(v)
    if alpha == 2.0:
        return 2.0 * math.sin(v) * math.sqrt(w)
    return (
        math.sin(alpha * v)
        / math.cos(v) ** (1.0 / alpha)
        * (math.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


@numba.njit(cache=True)
def _cms_array(alpha, u, w):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = cms_scalar(alpha, u[i], w[i])
    return out


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def sample_standard_stable(alpha: float, rng, size: int | None = None):
    """Draw from the standard symmetric alpha-stable law.

    ``rng`` is an :class:`RngStream` (a fresh generator is built from it, so
    the same stream always gives the same draws) or a live numpy Generator.
    Returns a float when ``size`` is None, else an array of that length.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha!r}")
    gen = _as_generator(rng)
    n = 1 if size is None else int(size)
    u = gen.random(n)
    w = gen.standard_exponential(n)
    out = _cms_array(float(alpha), u, w)
    return float(out[0]) if size is None else out


def sample_increment(spec: StableNoiseSpec, dt: float, rng, size: int | None = None):
    """Increment of ``sigma * L^alpha`` over a time step ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if spec.sigma == 0.0:
        return 0.0 if size is None else np.zeros(int(size))
    scale = spec.sigma * dt ** (1.0 / spec.alpha)
    return scale * sample_standard_stable(spec.alpha, rng, size)


def stable_chf(xi, alpha: float):
    """Characteristic function of the standard symmetric law."""
    return np.exp(-np.abs(xi) ** alpha)
