from functools import lru_cache

from levy_rosmac.fpe import FpeConfig, solve_stationary
from levy_rosmac.model import ModelParams


@lru_cache(maxsize=None)
def stationary(r, mu, n=150, y_min=0.0, y_max=60.0, scheme="upwind"):
    """Full-size stationary solves are slow, so each one runs once per session."""
    cfg = FpeConfig(ModelParams(r=r, mu=mu), nx=n, ny=n, y_min=y_min, y_max=y_max, drift_scheme=scheme)
    return cfg, solve_stationary(cfg, history_every=5000)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def report(label: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
