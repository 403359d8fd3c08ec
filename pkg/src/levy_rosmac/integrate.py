"""Path integration: RK4 for the deterministic model, Euler steps with exact
stable increments for the Levy-driven model, and Monte Carlo ensembles."""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import pandas as pd

from .model import ModelParams, State
from .stable import RngStream, StableNoiseSpec, cms_scalar

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e9


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    noise_x: StableNoiseSpec = StableNoiseSpec(2.0, 0.0)
    noise_y: StableNoiseSpec = StableNoiseSpec(2.0, 0.0)
    dt: float = 0.01
    t_end: float = 100.0
    initial: State = State(20.0, 10.0)
    seed: int = 0
    clamp_nonnegative: bool = False
    record_stride: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be at least dt, got t_end={self.t_end!r}, dt={self.dt!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride!r}")
        object.__setattr__(self, "initial", State(*map(float, self.initial)))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def deterministic(self) -> bool:
        return self.noise_x.sigma == 0.0 and self.noise_y.sigma == 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 2), columns X, Y
    diverged: bool = False
    stream_id: int | None = None

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def final(self) -> State:
        return State(*self.states[-1])


@dataclass
class Ensemble:
    config: SimConfig
    n_traj: int
    trajectories: list[Trajectory] = field(repr=False)

    @property
    def diverged(self) -> np.ndarray:
        return np.array([t.diverged for t in self.trajectories])

    def final_states(self) -> np.ndarray:
        return np.array([t.states[-1] for t in self.trajectories])


@numba.njit(cache=True, inline="always")
def _drift_nb(x, y, r, mu, c, E, C, k):
    f = C * x * x / (x * x + k * k)
    return r * x - c * x * x - y * f, (E * f - mu) * y


def _params_tuple(p: ModelParams):
    return (p.r, p.mu, p.c, p.E, p.C, p.k)


def _n_records(n_steps: int, stride: int) -> int:
    return n_steps // stride + 1 + (1 if n_steps % stride else 0)


def _record_times(n_steps: int, stride: int, dt: float) -> np.ndarray:
    steps = list(range(0, n_steps + 1, stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=float) * dt


@numba.njit(cache=True, nogil=True)
def _rk4_path(x, y, p, dt, n_steps, stride, out):
    r, mu, c, E, C, k = p
    out[0, 0] = x
    out[0, 1] = y
    j = 1
    for n in range(1, n_steps + 1):
        k1x, k1y = _drift_nb(x, y, r, mu, c, E, C, k)
        k2x, k2y = _drift_nb(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, r, mu, c, E, C, k)
        k3x, k3y = _drift_nb(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, r, mu, c, E, C, k)
        k4x, k4y = _drift_nb(x + dt * k3x, y + dt * k3y, r, mu, c, E, C, k)
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not (abs(x) <= 1e9 and abs(y) <= 1e9):
            return j, True
        if n % stride == 0 or n == n_steps:
            out[j, 0] = x
            out[j, 1] = y
            j += 1
    return j, False


@numba.njit(cache=True, nogil=True)
def _euler_path(gen, x, y, p, ax, sx, ay, sy, dt, n_steps, stride, clamp, use_drift, out):
    r, mu, c, E, C, k = p
    scale_x = sx * dt ** (1.0 / ax)
    scale_y = sy * dt ** (1.0 / ay)
    out[0, 0] = x
    out[0, 1] = y
    j = 1
    for n in range(1, n_steps + 1):
        if use_drift:
            bx, by = _drift_nb(x, y, r, mu, c, E, C, k)
        else:
            bx, by = 0.0, 0.0
        nx = x + bx * dt
        ny = y + by * dt
        if sx > 0.0:
            u = gen.random()
            nx += scale_x * cms_scalar(ax, u, gen.standard_exponential())
        if sy > 0.0:
            u = gen.random()
            ny += scale_y * cms_scalar(ay, u, gen.standard_exponential())
        if clamp:
            nx = max(nx, 0.0)
            ny = max(ny, 0.0)
        x = nx
        y = ny
        if not (abs(x) <= 1e9 and abs(y) <= 1e9):
            return j, True
        if n % stride == 0 or n == n_steps:
            out[j, 0] = x
            out[j, 1] = y
            j += 1
    return j, False


def integrate_ode(config: SimConfig) -> Trajectory:
    """Fixed-step classical Runge-Kutta integration of the noise-free model."""
    if not config.deterministic:
        raise ValueError("integrate_ode requires both noise intensities to be zero")
    n_steps, stride = config.n_steps, int(config.record_stride)
    out = np.empty((_n_records(n_steps, stride), 2))
    x0, y0 = config.initial
    j, diverged = _rk4_path(x0, y0, _params_tuple(config.params), config.dt, n_steps, stride, out)
    if diverged:
        logger.warning("deterministic path from %s left |state| <= %g", config.initial, DIVERGENCE_BOUND)
    times = _record_times(n_steps, stride, config.dt)
    return Trajectory(times[:j], out[:j], diverged)


def integrate_sde(config: SimConfig, stream_id: int = 0, *, zero_drift: bool = False) -> Trajectory:
    """Euler scheme for the Levy-driven model on stream ``(config.seed, stream_id)``.

    ``zero_drift`` switches the vector field off, leaving a pure stable walk.
    A path whose state leaves ``|.| <= 1e9`` stops early and is flagged.
    """
    n_steps, stride = config.n_steps, int(config.record_stride)
    out = np.empty((_n_records(n_steps, stride), 2))
    gen = RngStream(config.seed, stream_id).generator()
    nx_, ny_ = config.noise_x, config.noise_y
    x0, y0 = config.initial
    j, diverged = _euler_path(
        gen, x0, y0, _params_tuple(config.params),
        float(nx_.alpha), float(nx_.sigma), float(ny_.alpha), float(ny_.sigma),
        config.dt, n_steps, stride, bool(config.clamp_nonnegative), not zero_drift, out,
    )
    times = _record_times(n_steps, stride, config.dt)
    return Trajectory(times[:j], out[:j], diverged, stream_id)


def worker_count() -> int:
    """Worker threads allowed by ``LEVY_ROSMAC_THREADS`` (auto when unset)."""
    raw = os.environ.get("LEVY_ROSMAC_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _map(fn, items, n_workers=None):
    n_workers = worker_count() if n_workers is None else n_workers
    if n_workers <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items))


def run_ensemble(config: SimConfig, n_traj: int, stream_ids=None, n_workers=None) -> Ensemble:
    """Simulate ``n_traj`` independent paths, path ``i`` on stream ``stream_ids[i]``
    (default ``i``). Results do not depend on the worker count."""
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj!r}")
    ids = list(range(n_traj)) if stream_ids is None else [int(s) for s in stream_ids]
    if len(ids) != n_traj:
        raise ValueError("stream_ids must have n_traj entries")
    trajectories = _map(lambda i: integrate_sde(config, i), ids, n_workers)
    n_bad = sum(t.diverged for t in trajectories)
    if n_bad:
        logger.info("%d of %d trajectories diverged", n_bad, n_traj)
    return Ensemble(config, n_traj, trajectories)


def sample_endpoints(config: SimConfig, n_traj: int, n_workers=None) -> tuple[np.ndarray, np.ndarray]:
    """Terminal states of ``n_traj`` paths without keeping the paths.

    Returns ``(states, diverged)``; diverged rows hold the last finite state.
    """
    cfg = replace(config, record_stride=config.n_steps)

    def one(i):
        tr = integrate_sde(cfg, i)
        return tr.states[-1], tr.diverged

    res = _map(one, list(range(n_traj)), n_workers)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def phase_portrait(params: ModelParams, initials, t_end: float, dt: float = 0.01,
                   record_stride: int = 10) -> list[Trajectory]:
    initials = list(initials)
    if not initials:
        raise ValueError("phase_portrait needs at least one initial state")
    return [
        integrate_ode(SimConfig(params, dt=dt, t_end=t_end, initial=State(*s), record_stride=record_stride))
        for s in initials
    ]


def _padded_states(e: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    n_steps, stride = e.config.n_steps, int(e.config.record_stride)
    times = _record_times(n_steps, stride, e.config.dt)
    arr = np.full((e.n_traj, times.size, 2), np.nan)
    for i, tr in enumerate(e.trajectories):
        arr[i, : tr.states.shape[0]] = tr.states
    return times, arr


def ensemble_stats(e: Ensemble) -> pd.DataFrame:
    """Per recorded time: mean, median, quartiles, IQR, min and max of X and Y
    over the trajectories still alive, plus the cumulative flagged count."""
    if not e.trajectories:
        raise ValueError("empty ensemble")
    times, arr = _padded_states(e)
    cols = {"t": times}
    with warnings.catch_warnings():
        # times at which every path has diverged legitimately give NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        for j, name in enumerate("XY"):
            v = arr[:, :, j]
            q25, med, q75 = np.nanpercentile(v, [25, 50, 75], axis=0)
            cols[f"{name}_mean"] = np.nanmean(v, axis=0)
            cols[f"{name}_median"] = med
            cols[f"{name}_q25"] = q25
            cols[f"{name}_q75"] = q75
            cols[f"{name}_iqr"] = q75 - q25
            cols[f"{name}_min"] = np.nanmin(v, axis=0)
            cols[f"{name}_max"] = np.nanmax(v, axis=0)
    alive = ~np.isnan(arr[:, :, 0])
    cols["n_active"] = alive.sum(axis=0)
    cols["n_flagged"] = e.n_traj - cols["n_active"]
    return pd.DataFrame(cols)
