"""Stationary density of the Levy-driven model from its non-local
Fokker-Planck equation on a truncated rectangle.

Cell-centred finite volumes: upwind fluxes for the drift (no flux through
the outer walls) and, per axis, a one-dimensional symmetric stable jump
operator with zero density outside the domain. The drift flux is first-order
by default; ``DriftScheme.VAN_LEER`` reconstructs face values with van Leer
limited slopes, which removes most of the numerical diffusion.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .model import ModelParams, attractor, holling_f, holling_f_prime
from .stable import StableNoiseSpec, levy_constant

logger = logging.getLogger(__name__)

INSTABILITY_BOUND = 1e6


class FpeInstabilityError(RuntimeError):
    pass


class DriftScheme(str, enum.Enum):
    UPWIND = "upwind"
    VAN_LEER = "vanleer"


class InitialDensity(str, enum.Enum):
    GAUSSIAN_BUMP_AT_ATTRACTOR = "GaussianBumpAtAttractor"
    UNIFORM = "Uniform"


@dataclass
class DensityGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    values: np.ndarray = field(repr=False)  # shape (nx, ny), first index along x

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty domain")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("need at least 3 cells per axis")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.nx, self.ny):
            raise ValueError(f"values has shape {self.values.shape}, expected {(self.nx, self.ny)}")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def xc(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def mass(self) -> float:
        return float(self.values.sum() * self.hx * self.hy)

    def normalized(self) -> DensityGrid:
        return self.with_values(self.values / self.mass())

    def with_values(self, values) -> DensityGrid:
        return DensityGrid(self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny, values)

    def mode_index(self) -> tuple[int, int]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return int(i), int(j)

    def mode(self) -> tuple[float, float]:
        i, j = self.mode_index()
        return float(self.xc[i]), float(self.yc[j])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Index of the cell containing ``(x, y)``, projected onto the grid."""
        i = int(np.clip(np.floor((x - self.x_min) / self.hx), 0, self.nx - 1))
        j = int(np.clip(np.floor((y - self.y_min) / self.hy), 0, self.ny - 1))
        return i, j

    def histogram(self, points) -> DensityGrid:
        """Normalized histogram of ``points`` (n, 2) on this grid; points
        outside the rectangle are clamped onto its edge cells."""
        pts = np.asarray(points, dtype=float)
        i = np.clip(np.floor((pts[:, 0] - self.x_min) / self.hx), 0, self.nx - 1).astype(int)
        j = np.clip(np.floor((pts[:, 1] - self.y_min) / self.hy), 0, self.ny - 1).astype(int)
        counts = np.zeros((self.nx, self.ny))
        np.add.at(counts, (i, j), 1.0)
        return self.with_values(counts / (pts.shape[0] * self.hx * self.hy))

    def l1_distance(self, other: DensityGrid) -> float:
        return float(np.abs(self.values - other.values).sum() * self.hx * self.hy)

    def to_text(self) -> str:
        """Matrix format: a ``# x_min x_max y_min y_max nx ny`` header, then
        ny rows (increasing y) of nx densities (increasing x)."""
        lines = [f"# {self.x_min!r} {self.x_max!r} {self.y_min!r} {self.y_max!r} {self.nx} {self.ny}"]
        for row in self.values.T:
            lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> DensityGrid:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].lstrip("#").split()
        x_min, x_max, y_min, y_max = map(float, head[:4])
        nx, ny = int(head[4]), int(head[5])
        rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
        if rows.shape != (ny, nx):
            raise ValueError(f"matrix body has shape {rows.shape}, header says {(ny, nx)}")
        return cls(x_min, x_max, y_min, y_max, nx, ny, rows.T)


@dataclass(frozen=True)
class FpeConfig:
    params: ModelParams
    noise_x: StableNoiseSpec = StableNoiseSpec(1.5, 0.1)
    noise_y: StableNoiseSpec = StableNoiseSpec(1.5, 0.1)
    x_min: float = 0.0
    x_max: float = 30.0
    y_min: float = 0.0
    y_max: float = 60.0
    nx: int = 150
    ny: int = 150
    dt: float | None = None  # None: largest step allowed by the stability bound
    tol: float = 1e-4
    max_steps: int = 500_000
    initial: InitialDensity = InitialDensity.GAUSSIAN_BUMP_AT_ATTRACTOR
    drift_scheme: DriftScheme = DriftScheme.UPWIND

    def __post_init__(self):
        for spec in (self.noise_x, self.noise_y):
            if not 0.0 < spec.alpha < 2.0:
                raise ValueError(f"Fokker-Planck solver needs alpha in (0, 2), got {spec.alpha!r}")
            if not spec.sigma > 0.0:
                raise ValueError(f"Fokker-Planck solver needs sigma > 0, got {spec.sigma!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        object.__setattr__(self, "initial", InitialDensity(self.initial))
        object.__setattr__(self, "drift_scheme", DriftScheme(self.drift_scheme))

    def empty_grid(self) -> DensityGrid:
        return DensityGrid(self.x_min, self.x_max, self.y_min, self.y_max,
                           self.nx, self.ny, np.zeros((self.nx, self.ny)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial"] = self.initial.value
        d["drift_scheme"] = self.drift_scheme.value
        return d


# --- jump operator ---------------------------------------------------------

def _jump_weights(n: int, h: float, alpha: float):
    """Far-field weights for offsets 1..n-1, the near-field Taylor coefficient,
    and the total measure of ``|u| >= h``."""
    c = levy_constant(alpha)
    j = np.arange(1, n)
    lo = np.maximum((j - 0.5) * h, h)
    hi = (j + 0.5) * h
    # exact kernel mass of each offset cell; |u| < h is handled by the Taylor term
    w = c / alpha * (lo**-alpha - hi**-alpha)
    taylor = c * h ** (2.0 - alpha) / (2.0 - alpha)
    return w, taylor, c


@lru_cache(maxsize=32)
def _jump_matrix_cached(n: int, h: float, alpha: float, sigma: float) -> np.ndarray:
    w, taylor, c = _jump_weights(n, h, alpha)
    idx = np.arange(n)
    off = np.abs(idx[:, None] - idx[None, :])
    m = np.zeros((n, n))
    mask = off > 0
    m[mask] = w[off[mask] - 1]
    # kernel mass of |u| >= h: in-domain weights plus the exterior tail, where p = 0
    total_far = 2.0 * c / alpha * h**-alpha
    second = taylor / h**2
    m[idx, idx] = -total_far - 2.0 * second
    m[idx[:-1], idx[:-1] + 1] += second
    m[idx[1:], idx[1:] - 1] += second
    m *= sigma**alpha
    m.setflags(write=False)
    return m


def jump_matrix(n: int, h: float, spec: StableNoiseSpec) -> np.ndarray:
    """Dense matrix of the discrete jump operator on ``n`` cells of width ``h``."""
    if not 0.0 < spec.alpha < 2.0:
        raise ValueError(f"jump operator needs alpha in (0, 2), got {spec.alpha!r}")
    if n < 3:
        raise ValueError("row length must be at least 3")
    return _jump_matrix_cached(int(n), float(h), float(spec.alpha), float(spec.sigma))


def jump_operator_1d(values, h: float, spec: StableNoiseSpec) -> np.ndarray:
    """``sigma^alpha * int (p(x+u) - p(x)) nu_alpha(du)`` at every cell of a row,
    taking ``p = 0`` outside the row."""
    p = np.asarray(values, dtype=float)
    return jump_matrix(p.size, h, spec) @ p


def jump_diagonal(h: float, spec: StableNoiseSpec) -> float:
    """Magnitude of the (constant) diagonal of the jump operator."""
    c = levy_constant(spec.alpha)
    a = spec.alpha
    return spec.sigma**a * (2.0 * c / a * h**-a + 2.0 * c * h**-a / (2.0 - a))


# --- drift -----------------------------------------------------------------

def model_velocity(params: ModelParams):
    def velocity(x, y):
        fx = holling_f(x, params)
        return params.r * x - params.c * x * x - y * fx, (params.E * fx - params.mu) * y
    return velocity


def _face_velocities(grid: DensityGrid, velocity):
    """Normal velocities on interior faces: (nx-1, ny) for x, (nx, ny-1) for y."""
    xf = grid.x_min + np.arange(1, grid.nx) * grid.hx
    yf = grid.y_min + np.arange(1, grid.ny) * grid.hy
    bx, _ = velocity(*np.meshgrid(xf, grid.yc, indexing="ij"))
    _, by = velocity(*np.meshgrid(grid.xc, yf, indexing="ij"))
    return np.broadcast_to(bx, (grid.nx - 1, grid.ny)), np.broadcast_to(by, (grid.nx, grid.ny - 1))


def _van_leer_slopes(p: np.ndarray, axis: int) -> np.ndarray:
    """Limited cell slopes (per cell, not per length); zero in the end cells."""
    d = np.diff(p, axis=axis)
    lo = d.take(np.arange(d.shape[axis] - 1), axis=axis)
    hi = d.take(np.arange(1, d.shape[axis]), axis=axis)
    prod = lo * hi
    inner = np.where(prod > 0, 2 * prod / np.where(prod > 0, lo + hi, 1.0), 0.0)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    return np.pad(inner, pad)


class _UpwindDivergence:
    """``-d/dx(b1 p) - d/dy(b2 p)`` with upwind fluxes and closed outer walls."""

    def __init__(self, grid: DensityGrid, velocity, scheme: DriftScheme = DriftScheme.UPWIND):
        self.scheme = DriftScheme(scheme)
        bx, by = _face_velocities(grid, velocity)
        self.bx_pos, self.bx_neg = np.maximum(bx, 0.0), np.minimum(bx, 0.0)
        self.by_pos, self.by_neg = np.maximum(by, 0.0), np.minimum(by, 0.0)
        self.hx, self.hy = grid.hx, grid.hy
        self.max_speed = (np.max(np.abs(bx)) if bx.size else 0.0,
                          np.max(np.abs(by)) if by.size else 0.0)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        if self.scheme is DriftScheme.UPWIND:
            west, east, south, north = p[:-1, :], p[1:, :], p[:, :-1], p[:, 1:]
        else:
            sx = 0.5 * _van_leer_slopes(p, 0)
            sy = 0.5 * _van_leer_slopes(p, 1)
            west, east = p[:-1, :] + sx[:-1, :], p[1:, :] - sx[1:, :]
            south, north = p[:, :-1] + sy[:, :-1], p[:, 1:] - sy[:, 1:]
        fx = (self.bx_pos * west + self.bx_neg * east) / self.hx
        fy = (self.by_pos * south + self.by_neg * north) / self.hy
        out = np.zeros_like(p)
        out[:-1, :] -= fx
        out[1:, :] += fx
        out[:, :-1] -= fy
        out[:, 1:] += fy
        return out


def drift_divergence(grid: DensityGrid, params: ModelParams, velocity=None,
                     scheme: DriftScheme = DriftScheme.UPWIND) -> np.ndarray:
    """Conservative upwind discretization of the transport term.

    ``velocity(x, y) -> (b1, b2)`` overrides the model vector field.
    """
    return _UpwindDivergence(grid, velocity or model_velocity(params), scheme)(grid.values)


def drift_divergence_expanded(grid: DensityGrid, params: ModelParams) -> np.ndarray:
    """Transport term in product-rule form, ``-(div b) p - b . grad p``, with
    centred differences (one-sided at the walls). Used as a cross-check."""
    X, Y = grid.mesh()
    fx = holling_f(X, params)
    fpx = holling_f_prime(X, params)
    p = grid.values
    coef = 2 * params.c * X + Y * fpx + params.mu - params.E * fx - params.r
    px = np.gradient(p, grid.hx, axis=0)
    py = np.gradient(p, grid.hy, axis=1)
    return (coef * p
            + (params.c * X * X + Y * fx - params.r * X) * px
            + Y * (params.mu - params.E * fx) * py)


# --- time stepping ---------------------------------------------------------

class FokkerPlanckOperator:
    """The full discrete right-hand side for one configuration."""

    def __init__(self, config: FpeConfig, velocity=None):
        self.config = config
        grid = config.empty_grid()
        self.hx, self.hy = grid.hx, grid.hy
        self.transport = _UpwindDivergence(grid, velocity or model_velocity(config.params), config.drift_scheme)
        self.jx = jump_matrix(grid.nx, grid.hx, config.noise_x)
        self.jy = jump_matrix(grid.ny, grid.hy, config.noise_y)
        self.lam_x = jump_diagonal(grid.hx, config.noise_x)
        self.lam_y = jump_diagonal(grid.hy, config.noise_y)

    def stable_dt(self) -> float:
        sx, sy = self.transport.max_speed
        return 0.5 / (sx / self.hx + sy / self.hy + self.lam_x + self.lam_y)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.transport(p) + self.jx @ p + p @ self.jy.T


def initial_density(config: FpeConfig) -> DensityGrid:
    grid = config.empty_grid()
    if config.initial is InitialDensity.UNIFORM:
        values = np.ones((grid.nx, grid.ny))
    else:
        cx, cy = attractor(config.params)
        sx = 0.1 * (config.x_max - config.x_min)
        sy = 0.1 * (config.y_max - config.y_min)
        X, Y = grid.mesh()
        values = np.exp(-0.5 * ((X - cx) / sx) ** 2 - 0.5 * ((Y - cy) / sy) ** 2)
    return grid.with_values(values).normalized()


def _advance(p: np.ndarray, dt: float, op: FokkerPlanckOperator, cell_area: float) -> np.ndarray:
    new = p + dt * op(p)
    if not np.all(np.abs(new) <= INSTABILITY_BOUND):
        raise FpeInstabilityError(f"density exceeded {INSTABILITY_BOUND:g}; reduce dt")
    np.maximum(new, 0.0, out=new)
    new /= new.sum() * cell_area
    return new


def step(grid: DensityGrid, config: FpeConfig, *, velocity=None) -> DensityGrid:
    """One explicit pseudo-time step followed by clipping and renormalization."""
    op = FokkerPlanckOperator(config, velocity)
    dt = config.dt if config.dt is not None else op.stable_dt()
    return grid.with_values(_advance(grid.values, dt, op, grid.hx * grid.hy))


@dataclass
class StationaryResult:
    grid: DensityGrid
    converged: bool
    iterations: int
    residual: float
    dt: float
    residual_history: list[tuple[int, float]] = field(default_factory=list, repr=False)

    def metadata(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.residual,
            "dt": self.dt,
            "mass": self.grid.mass(),
            "mode": list(self.grid.mode()),
            "peak_density": float(self.grid.values.max()),
            "residual_history": [[n, r] for n, r in self.residual_history],
        }


def solve_stationary(config: FpeConfig, initial: DensityGrid | None = None,
                     history_every: int = 1000) -> StationaryResult:
    """March in pseudo-time until ``||p_new - p_old||_1 / dt < tol``.

    Non-convergence within ``max_steps`` is reported through ``converged``.
    """
    op = FokkerPlanckOperator(config)
    dt = config.dt if config.dt is not None else op.stable_dt()
    grid = initial if initial is not None else initial_density(config)
    area = grid.hx * grid.hy
    p = grid.values
    history = []
    residual = math.inf
    n = 0
    for n in range(1, config.max_steps + 1):
        new = _advance(p, dt, op, area)
        residual = float(np.abs(new - p).sum() * area / dt)
        p = new
        if n % history_every == 0 or n == 1:
            history.append((n, residual))
        if residual < config.tol:
            break
    converged = residual < config.tol
    if history[-1][0] != n:
        history.append((n, residual))
    if not converged:
        logger.warning("no stationary state after %d steps (residual %.3g > tol %.3g)",
                       n, residual, config.tol)
    return StationaryResult(grid.with_values(p), converged, n, residual, dt, history)


def write_density(result: StationaryResult, config: FpeConfig, matrix_path, meta_path) -> None:
    with open(matrix_path, "w") as fh:
        fh.write(result.grid.to_text())
    meta = {"config": config.to_dict(), "convergence": result.metadata()}
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
