"""Benchmark problems: manufactured-solution accuracy, bubbles, coarsening.

The accuracy study marches a forced problem whose exact solution is known,
on a random nonuniform mesh, and reports the worst-case nodal error over
the march together with the largest step of the mesh; pairing runs at N and
2N steps gives the observed temporal order.  The two phase-field initial
states reproduce the classic qualitative benchmarks: four tangent circular
interfaces that merge and shrink, and a small random perturbation that
coarsens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import step_kernels
from .spatial import Grid2D, max_norm
from .stepper import NewtonConfig, StepperState, bdf2_step
from .time_mesh import S0_LIMIT, TimeMesh

#: diffusion coefficient of the forced accuracy problem, 1 / (8 pi^2)
MMS_EPS2 = 1.0 / (8.0 * math.pi * math.pi)


class MmsProblem:
    """Forced problem with exact solution ``sin(2 pi x) sin(2 pi y) sin t``.

    On the unit square with diffusion ``1/(8 pi^2)`` the Laplacian term
    reduces to ``-u``, so the source has the closed form
    ``g = s cos t + (s sin t)^3`` with ``s = sin(2 pi x) sin(2 pi y)``.
    """

    eps2 = MMS_EPS2
    eps = math.sqrt(MMS_EPS2)
    L = 1.0
    T = 1.0

    @staticmethod
    def shape(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.sin(2.0 * math.pi * X) * np.sin(2.0 * math.pi * Y)

    @classmethod
    def exact(cls, X: np.ndarray, Y: np.ndarray, t: float) -> np.ndarray:
        return cls.shape(X, Y) * math.sin(t)

    @classmethod
    def source(cls, X: np.ndarray, Y: np.ndarray, t: float) -> np.ndarray:
        s = cls.shape(X, Y)
        return s * math.cos(t) + (s * math.sin(t)) ** 3


def random_mesh(n_steps: int, total_time: float, seed: int) -> TimeMesh:
    """Random nonuniform mesh: ``tau_k = T eps_k / sum eps``, uniform draws.

    The last step absorbs the rounding error so the node times end exactly
    at ``total_time``.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(seed)
    draws = rng.uniform(0.0, 1.0, n_steps)
    steps = total_time * draws / draws.sum()
    steps[-1] = total_time - steps[:-1].sum()
    return TimeMesh(steps)


@dataclass
class ConvergenceRow:
    """One line of the accuracy table."""

    N: int
    tau_max: float
    err_inf: float
    order: float
    num_ratio_violations: int


@dataclass
class MmsRunResult:
    """Raw outcome of one accuracy march (order filled in by the sweep)."""

    N: int
    seed: int
    tau_max: float
    err_inf: float
    num_ratio_violations: int
    newton_iters: list[int]


def convergence_order(err_coarse: float, err_fine: float,
                      tau_coarse: float, tau_fine: float) -> float:
    """``log(e_c / e_f) / log(tau_c / tau_f)``; NaN when undefined."""
    if err_coarse <= 0.0 or err_fine <= 0.0:
        return math.nan
    if tau_coarse <= 0.0 or tau_fine <= 0.0 or tau_coarse == tau_fine:
        return math.nan
    return math.log(err_coarse / err_fine) / math.log(tau_coarse / tau_fine)


def run_mms(
    n_steps: int,
    seed: int,
    M: int = 256,
    newton_cfg: NewtonConfig | None = None,
) -> MmsRunResult:
    """March the forced problem on a fresh random mesh and measure the error.

    The error is the max over all levels of the nodal max-norm distance to
    the exact solution.  Ratio violations count the steps whose ratio
    reaches the zero-stability limit; the march itself tolerates them.
    """
    grid = Grid2D(M=M, L=MmsProblem.L)
    mesh = random_mesh(n_steps, MmsProblem.T, seed)
    X, Y = grid.meshgrid()

    def source_at(t: float) -> np.ndarray:
        return MmsProblem.source(X, Y, t)

    state = StepperState(
        u_prev=MmsProblem.exact(X, Y, 0.0),
        u_prev2=None,
        n=0,
        t=0.0,
    )
    times = mesh.times
    err = 0.0
    iters_per_step: list[int] = []
    for k in range(1, n_steps + 1):
        tau = mesh.tau(k)
        u, iters = bdf2_step(state, tau, grid, MmsProblem.eps, source_at, newton_cfg)
        iters_per_step.append(iters)
        state = StepperState(
            u_prev=u, u_prev2=state.u_prev, n=k, t=times[k], tau_prev=tau
        )
        err = max(err, max_norm(u - MmsProblem.exact(X, Y, times[k])))
    ratios = mesh.ratios
    return MmsRunResult(
        N=n_steps,
        seed=seed,
        tau_max=float(mesh.steps.max()),
        err_inf=err,
        num_ratio_violations=int(np.sum(ratios[1:] >= S0_LIMIT)),
        newton_iters=iters_per_step,
    )


def mms_sweep(
    n_list: list[int],
    seed: int,
    M: int = 256,
    newton_cfg: NewtonConfig | None = None,
) -> list[ConvergenceRow]:
    """Accuracy table over a list of step counts, one mesh per count.

    Every count draws its mesh from the same seed, so a finer mesh extends
    the coarser one's draw sequence; the largest steps then shrink in
    rough proportion to the count and the order column stays meaningful.
    The order column compares each row with the previous one and is NaN on
    the first row.
    """
    results = [run_mms(n_steps, seed, M, newton_cfg) for n_steps in n_list]
    rows: list[ConvergenceRow] = []
    for i, res in enumerate(results):
        order = math.nan
        if i > 0:
            prev = results[i - 1]
            order = convergence_order(
                prev.err_inf, res.err_inf, prev.tau_max, res.tau_max
            )
        rows.append(
            ConvergenceRow(
                N=res.N,
                tau_max=res.tau_max,
                err_inf=res.err_inf,
                order=order,
                num_ratio_violations=res.num_ratio_violations,
            )
        )
    return rows


def four_bubble_init(grid: Grid2D, eps: float) -> np.ndarray:
    """Four tangent circular interfaces of radius 0.2 around the origin.

    Product of four tanh profiles; the field sits near -1 outside the
    circles, near +1 inside, with interfaces of width ``eps``.
    """
    X, Y = grid.meshgrid()
    r2 = 0.2 * 0.2

    def bubble(cx: float, cy: float) -> np.ndarray:
        return np.tanh(((X - cx) ** 2 + (Y - cy) ** 2 - r2) / eps)

    return -(
        bubble(0.3, 0.0) * bubble(-0.3, 0.0) * bubble(0.0, 0.3) * bubble(0.0, -0.3)
    )


def coarsening_init(
    grid: Grid2D, seed: int, base: float = 0.0, amp: float = 0.05
) -> np.ndarray:
    """Uniform random perturbation ``base + amp * U(-1, 1)`` per node."""
    if amp < 0.0:
        raise ValueError("perturbation amplitude cannot be negative")
    rng = np.random.default_rng(seed)
    return base + amp * rng.uniform(-1.0, 1.0, (grid.M, grid.M))
