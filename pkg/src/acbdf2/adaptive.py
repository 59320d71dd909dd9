"""Step-size controller driven by a one-step / two-step comparison.

Each level is computed twice: once with the one-step scheme and once with
the two-step scheme, from the same history.  Their relative distance

    e = || u2 - u1 || / || u2 ||

estimates the temporal error.  A level is accepted when ``e < tol``;
either way the next trial step is

    tau_ada = rho * sqrt(tol / e) * tau_current

clamped to ``[tau_min, tau_max]``, and on acceptance additionally capped so
the realized step ratio never exceeds ``ratio_cap`` (the cap keeps every
accepted ratio inside the zero-stability window; disable it to reproduce
uncapped behavior).  A rejected level is recomputed with the shrunken step;
the shrink factor is at most ``rho < 1`` per rejection, and a step that
keeps failing after ``max_rejects`` tries raises :class:`TooManyRejects`.

The estimate uses the grid-weighted l2 norm by default; the max norm is
available behind the ``error_norm`` switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spatial import Grid2D, l2_norm, max_norm
from .stepper import NewtonConfig, StepRecord, StepperState, bdf2_step
from .kernels import step_kernels
from .time_mesh import S0_LIMIT

#: default ratio cap, just inside the zero-stability window
DEFAULT_RATIO_CAP = S0_LIMIT - 1e-6


class TooManyRejects(RuntimeError):
    """A level kept failing the accuracy test after the allowed retries."""


class ZeroReference(ValueError):
    """Error estimate undefined because the reference solution is zero."""


@dataclass
class AdaptiveConfig:
    """Controller tuning; defaults follow the usual phase-field practice."""

    rho: float = 0.6
    tol: float = 1e-4
    tau_max: float = 0.1
    tau_min: float = 1e-3
    ratio_cap: float | None = DEFAULT_RATIO_CAP
    max_rejects: int = 20
    error_norm: str = "l2"

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("safety factor must lie in (0, 1]")
        if not self.tol > 0.0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.ratio_cap is not None and not self.ratio_cap > 0.0:
            raise ValueError("ratio cap must be positive (or None)")
        if self.max_rejects < 1:
            raise ValueError("allow at least one reject")
        if self.error_norm not in ("l2", "max"):
            raise ValueError("error norm must be 'l2' or 'max'")


def error_estimate(u1: np.ndarray, u2: np.ndarray, h: float, norm: str = "l2") -> float:
    """Relative distance of the two candidate solutions."""
    if norm == "l2":
        ref = l2_norm(u2, h)
        diff = l2_norm(u2 - u1, h)
    elif norm == "max":
        ref = max_norm(u2)
        diff = max_norm(u2 - u1)
    else:
        raise ValueError("error norm must be 'l2' or 'max'")
    if ref == 0.0:
        raise ZeroReference("reference solution vanishes")
    return diff / ref


def tau_ada(e: float, tau_cur: float, cfg: AdaptiveConfig) -> float:
    """Next trial step, ``rho sqrt(tol/e) tau``, clamped to the step window.

    ``e = 0`` (identical candidates) asks for the largest admissible step.
    """
    if e < 0.0:
        raise ValueError("error estimate cannot be negative")
    if e == 0.0:
        return cfg.tau_max
    trial = cfg.rho * math.sqrt(cfg.tol / e) * tau_cur
    return min(cfg.tau_max, max(cfg.tau_min, trial))


@dataclass
class AdvanceResult:
    """Outcome of one accepted level."""

    u: np.ndarray
    record: StepRecord
    tau_next: float
    rejected: list[StepRecord]
    newton_iters_onestep: int


def advance(
    state: StepperState,
    tau: float,
    grid: Grid2D,
    eps: float,
    cfg: AdaptiveConfig,
    newton_cfg: NewtonConfig | None = None,
    source_at=None,
) -> AdvanceResult:
    """Compute the next accepted level starting from trial step ``tau``.

    Does not mutate ``state``; the caller folds the result in.  Records for
    rejected trials carry the candidate's diagnostics with
    ``accepted=False``; energy fields of all records are left as NaN for the
    run loop to fill (the modified energy needs the following ratio, which
    is unknown until the next level is accepted).
    """
    if newton_cfg is None:
        newton_cfg = NewtonConfig()
    rejected: list[StepRecord] = []
    first = state.n == 0 or state.u_prev2 is None
    for attempt in range(cfg.max_rejects + 1):
        if first:
            # both schemes coincide on the starting level
            u1, iters1 = bdf2_step(
                state, tau, grid, eps, source_at, newton_cfg,
                kernels=step_kernels(tau, 0.0),
            )
            u2, iters2 = u1, iters1
            ratio = 0.0
            e = 0.0
        else:
            u1, iters1 = bdf2_step(
                state, tau, grid, eps, source_at, newton_cfg,
                kernels=step_kernels(tau, 0.0),
            )
            ratio = tau / state.tau_prev
            u2, iters2 = bdf2_step(
                state, tau, grid, eps, source_at, newton_cfg,
                kernels=step_kernels(tau, ratio),
            )
            e = error_estimate(u1, u2, grid.h, cfg.error_norm)
        record = StepRecord(
            n=state.n + 1,
            t=state.t + tau,
            tau=tau,
            ratio=ratio,
            e_est=e,
            accepted=e < cfg.tol,
            newton_iters=iters2,
            max_norm=max_norm(u2),
            energy=math.nan,
            modified_energy=math.nan,
            s0_ok=bool(ratio < S0_LIMIT),
            maxp_bound_ok=False,
        )
        if e < cfg.tol:
            tau_next = tau_ada(e, tau, cfg)
            if cfg.ratio_cap is not None:
                tau_next = min(tau_next, cfg.ratio_cap * tau)
            return AdvanceResult(
                u=u2,
                record=record,
                tau_next=tau_next,
                rejected=rejected,
                newton_iters_onestep=iters1,
            )
        rejected.append(record)
        tau = tau_ada(e, tau, cfg)
    raise TooManyRejects(
        f"level {state.n + 1} rejected {len(rejected)} times "
        f"(last e = {e:g} at tau = {rejected[-1].tau:g})"
    )
