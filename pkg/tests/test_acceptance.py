"""Acceptance checks, one reported line per criterion (see the terminal summary).

The density criteria are the slow part: four 150x150 stationary solves, a
300x300 refinement and a 10^5-path Monte Carlo run.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest
from scipy import integrate

from conftest import report, stationary
from levy_rosmac.fpe import FpeConfig, jump_operator_1d, solve_stationary
from levy_rosmac.integrate import (
    SimConfig,
    ensemble_stats,
    integrate_ode,
    integrate_sde,
    phase_portrait,
    run_ensemble,
    sample_endpoints,
)
from levy_rosmac.model import (
    ModelParams,
    attractor,
    bifurcation_mu,
    coexistence_exists,
    eigenvalues_2x2,
    equilibria,
    jacobian_at,
)
from levy_rosmac.stable import RngStream, StableNoiseSpec, levy_constant, sample_standard_stable

SETS = [(0.2, 0.25), (0.5, 0.14), (1.5, 0.22), (2.5, 0.2)]
PAPER_POINTS = {(0.2, 0.25): (10.0, 0.0), (0.5, 0.14): (7.34, 7.40), (1.5, 0.22): (11.06, 25.7),
                (2.5, 0.2): (10.0, 46.0)}
QUIET = StableNoiseSpec(2.0, 0.0)


def test_c1_equilibrium_closed_forms():
    worst = 0.0
    for (r, mu), target in PAPER_POINTS.items():
        reps = equilibria(ModelParams(r=r, mu=mu))
        pt = reps[-1].point  # Z3 when it exists, otherwise Z2
        worst = max(worst, abs(pt.x - target[0]), abs(pt.y - target[1]))
    assert report("1", worst <= 0.05, f"max component error {worst:.4f} (tol 0.05)")


def test_c2_eigenvalues():
    p = ModelParams(r=0.2, mu=0.25)
    ev2 = sorted(eigenvalues_2x2(jacobian_at((10.0, 0.0), p)), key=lambda z: z.real)
    err2 = max(abs(ev2[0] - (-0.2)), abs(ev2[1] - (-0.05)))
    q = ModelParams(r=0.5, mu=0.14)
    ev3 = eigenvalues_2x2(jacobian_at(attractor(q), q))
    err3 = min(max(abs(ev3[0] - complex(-0.126, 0.220)), abs(ev3[1] - complex(-0.126, -0.220))),
               max(abs(ev3[1] - complex(-0.126, 0.220)), abs(ev3[0] - complex(-0.126, -0.220))))
    ok = err2 < 1e-12 and err3 < 0.005
    assert report("2", ok, f"Z2 error {err2:.1e} (tol 1e-12); Z3 error {err3:.4f} (tol 0.005)")


def test_c3_transcritical_switch():
    rng = np.random.default_rng(3)
    worst = 0.0
    flips = True
    for r in rng.uniform(0.0, 2.5, 50):
        p0 = ModelParams(r=r, mu=0.1)

        def lam2(mu):
            p = ModelParams(r=r, mu=mu)
            return max(ev.real for ev in eigenvalues_2x2(jacobian_at((r / p.c, 0.0), p)))

        lo, hi = 1e-9, p0.E * p0.C - 1e-12
        assert lam2(lo) > 0 > lam2(hi)
        while hi - lo >= 1e-10:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if lam2(mid) > 0 else (lo, mid)
        mu_t = bifurcation_mu(r, p0)
        worst = max(worst, abs(0.5 * (lo + hi) - mu_t))
        flips &= coexistence_exists(ModelParams(r=r, mu=lo)) and not coexistence_exists(ModelParams(r=r, mu=hi))
    ok = worst < 1e-10 and flips
    assert report("3", ok, f"max |bisection - mu_T| {worst:.1e}, coexistence flips at the same bracket: {flips}")


def test_c4_deterministic_convergence():
    initials = [(x, y) for x in (2.5, 12.5, 22.5, 30.0) for y in (5.0, 17.5, 30.0)]
    worst = 0.0
    for r, mu in SETS:
        p = ModelParams(r=r, mu=mu)
        target = np.array(attractor(p))
        for tr in phase_portrait(p, initials, t_end=600):
            worst = max(worst, float(np.linalg.norm(np.array(tr.final) - target)))
    assert report("4", worst < 0.05, f"max distance to attractor {worst:.1e} over 48 runs (tol 0.05)")


def test_c5_stable_sampler():
    g = sample_standard_stable(2.0, RngStream(1), size=10**6)
    c = sample_standard_stable(1.0, RngStream(2), size=10**6)
    q1, q3 = np.quantile(c, [0.25, 0.75])
    ecf_ok, worst_z = True, 0.0
    for alpha in (0.6, 1.2, 1.5, 1.8):
        x = sample_standard_stable(alpha, RngStream(3, int(alpha * 10)), size=10**6)
        for xi in (0.5, 1.0, 2.0):
            v = np.cos(xi * x)
            z = abs(v.mean() - math.exp(-xi**alpha)) / (v.std(ddof=1) / math.sqrt(v.size))
            worst_z = max(worst_z, z)
            ecf_ok &= z < 3
    ok = 1.99 <= g.var() <= 2.01 and abs(q1 + 1) < 0.01 and abs(q3 - 1) < 0.01 and ecf_ok
    assert report("5", ok, f"var {g.var():.4f}; quartiles ({q1:.4f}, {q3:.4f}); worst ECF z-score {worst_z:.2f}")


def test_c6_sde_degeneracy():
    cfg = SimConfig(ModelParams(r=1.5, mu=0.22), initial=(20.0, 10.0), t_end=100.0, dt=0.001,
                    record_stride=10**6)
    e, o = integrate_sde(cfg).final, integrate_ode(cfg).final
    d = math.hypot(e.x - o.x, e.y - o.y)
    assert report("6", d < 0.01, f"Euler vs RK4 endpoint distance {d:.2e} (tol 0.01)")


def test_c7_small_noise_attraction():
    spec = StableNoiseSpec(1.5, 0.01)
    ens = run_ensemble(SimConfig(ModelParams(r=1.5, mu=0.22), spec, spec, initial=(20.0, 10.0), t_end=300.0,
                                 seed=7), 500)
    ends = ens.final_states()[~ens.diverged]
    mean_err = math.hypot(*(ends.mean(axis=0) - (11.06, 25.7)))
    inside = np.mean(np.hypot(ends[:, 0] - 11.06, ends[:, 1] - 25.7) < 5.0)
    ok = mean_err < 1.0 and inside >= 0.95
    assert report("7", ok, f"mean endpoint error {mean_err:.3f} (tol 1.0); {inside:.1%} within radius 5; "
                           f"{int(ens.diverged.sum())} of 500 flagged")


def test_c8_noise_spread_monotone():
    iqr = []
    for s in (0.001, 0.09, 0.7):
        cfg = SimConfig(ModelParams(r=1.5, mu=0.22), QUIET, StableNoiseSpec(1.0, s), initial=(20.0, 10.0),
                        t_end=300.0, seed=8)
        iqr.append(float(ensemble_stats(run_ensemble(cfg, 500))["Y_iqr"].iloc[-1]))
    ok = iqr[0] < iqr[1] < iqr[2]
    assert report("8", ok, "terminal Y IQR " + " < ".join(f"{v:.4g}" for v in iqr))


def _direct_jump(p, x, alpha, half_width):
    """Adaptive quadrature of int (p(x+u) - p(x)) nu(du) with p = 0 beyond +-half_width."""
    c = levy_constant(alpha)
    eps = 1e-4

    def second(u):
        if u == 0.0:
            return (p(x + eps) + p(x - eps) - 2 * p(x)) / eps**2
        return (p(x + u) + p(x - u) - 2 * p(x)) / u**2

    near = integrate.quad(second, 0.0, 1.0, weight="alg", wvar=(1 - alpha, 0))[0]
    far_end = half_width + abs(x)
    far = integrate.quad(lambda u: (p(x + u) + p(x - u)) * u ** (-1 - alpha), 1.0, far_end,
                         points=[half_width - abs(x)], limit=200)[0]
    return c * (near + far) - 2 * c / alpha * p(x)


def test_c9_jump_operator_oracle():
    L, n = 5.0, 201
    h = 2 * L / n
    x = -L + (np.arange(n) + 0.5) * h
    nodes = np.flatnonzero(np.abs(x) <= L / 2)[::10]
    worst_g, worst_q = 0.0, 0.0
    for alpha in (0.8, 1.5):
        spec = StableNoiseSpec(alpha, 1.0)
        gauss = lambda v: math.exp(-0.5 * v * v) if abs(v) <= L else 0.0
        quad_ = lambda v: v * v if abs(v) <= L else 0.0
        og = jump_operator_1d(np.exp(-0.5 * x**2), h, spec)
        oq = jump_operator_1d(x**2, h, spec)
        ref_g = np.array([_direct_jump(gauss, x[i], alpha, L) for i in nodes])
        ref_q = np.array([_direct_jump(quad_, x[i], alpha, L) for i in nodes])
        worst_g = max(worst_g, np.max(np.abs(og[nodes] - ref_g)) / np.max(np.abs(ref_g)))
        worst_q = max(worst_q, np.max(np.abs(oq[nodes] - ref_q) / np.abs(ref_q)))
    ok = worst_g < 0.02 and worst_q < 0.01
    assert report("9", ok, f"Gaussian max error {worst_g:.2%} of peak (tol 2%); quadratic max relative "
                           f"error {worst_q:.2%} (tol 1%)")


# --- stationary density ----------------------------------------------------

def _fmt(pt):
    return f"({pt[0]:.2f}, {pt[1]:.2f})"


def _cells_off(grid, point):
    i, j = grid.mode_index()
    ci, cj = grid.cell_of(*point)
    return max(abs(i - ci), abs(j - cj))


def test_c10_mode_coexistence():
    t0 = time.perf_counter()
    _, res = stationary(1.5, 0.22)
    off = _cells_off(res.grid, (11.06, 25.7))
    ok = res.converged and off <= 2
    assert report("10 mode (c)", ok, f"mode {_fmt(res.grid.mode())} is {off} cells from (11.06, 25.7); "
                                     f"{res.iterations} steps, {time.perf_counter() - t0:.0f} s")


def test_c10_mode_prey_only():
    # Z2 sits on y = 0; the grid is centred there so the zero-exterior
    # convention does not cut the peak in half (default-domain case in test_fpe)
    _, res = stationary(0.2, 0.25, y_min=-29.8, y_max=30.2)
    off = _cells_off(res.grid, (10.0, 0.0))
    ok = res.converged and off <= 2
    assert report("10 mode (a)", ok, f"mode {_fmt(res.grid.mode())} is {off} cells from (10, 0) "
                                     "on y in [-29.8, 30.2]")


def test_c10_peak_ordering():
    peaks = {rm: float(stationary(*rm)[1].grid.values.max()) for rm in [(0.2, 0.25), (0.5, 0.14), (1.5, 0.22)]}
    low = peaks[(1.5, 0.22)]
    ok = low < peaks[(0.2, 0.25)] and low < peaks[(0.5, 0.14)]
    assert report("10 peaks", ok, "peak heights " + ", ".join(f"{k}: {v:.4f}" for k, v in peaks.items()))


@lru_cache(maxsize=None)
def mc_endpoints():
    p = ModelParams(r=1.5, mu=0.22)
    spec = StableNoiseSpec(1.5, 0.1)
    cfg = SimConfig(p, spec, spec, t_end=200.0, initial=attractor(p), seed=2024)
    t0 = time.perf_counter()
    pts, flagged = sample_endpoints(cfg, 10**5)
    return pts[~flagged], int(flagged.sum()), time.perf_counter() - t0


def _l1_to_mc(scheme):
    _, res = stationary(1.5, 0.22, scheme=scheme)
    pts, flagged, secs = mc_endpoints()
    l1 = res.grid.l1_distance(res.grid.histogram(pts))
    return l1, f"L1 {l1:.3f} (tol 0.15) against {len(pts)} unflagged endpoints ({flagged} flagged, MC {secs:.0f} s)"


@pytest.mark.xfail(strict=True, reason="first-order upwind numerical diffusion widens the 150x150 density "
                                       "about twofold; see the limited-scheme line")
def test_c10_l1_first_order_upwind():
    l1, detail = _l1_to_mc("upwind")
    assert report("10 L1 (upwind)", l1 < 0.15, detail)


def test_c10_l1_limited_scheme():
    l1, detail = _l1_to_mc("vanleer")
    assert report("10 L1 (vanleer)", l1 < 0.15, detail)


def test_c11_refinement():
    t0 = time.perf_counter()
    coarse_cfg, coarse = stationary(1.5, 0.22)
    fine_cfg = FpeConfig(coarse_cfg.params, nx=300, ny=300)
    # start from the coarse answer; the stationary state does not depend on the start
    start = fine_cfg.empty_grid().with_values(np.kron(coarse.grid.values, np.ones((2, 2)))).normalized()
    fine = solve_stationary(fine_cfg, initial=start, history_every=5000)
    fi, fj = fine.grid.mode_index()
    ci, cj = coarse.grid.mode_index()
    moved = max(abs(fi // 2 - ci), abs(fj // 2 - cj))
    ok = fine.converged and moved <= 1
    assert report("11", ok, f"coarse mode {_fmt(coarse.grid.mode())}, fine mode {_fmt(fine.grid.mode())}: moved {moved} "
                            f"coarse cell(s); {fine.iterations} fine steps, {time.perf_counter() - t0:.0f} s")
