"""One implicit step of the phase-field dynamics, plus the energy monitors.

The discrete problem at level ``n`` is

    b0 (u - u_prev) + b1 (u_prev - u_prev2) = eps^2 Lap u - (u^3 - u) + g,

solved by a damped-free Newton iteration whose linear systems are symmetric
positive definite whenever ``b0 > 1``; that inequality is exactly the
step-size solvability bound ``tau_n < (1+2 r_n)/(1+ r_n)``, which is checked
up front.  The Jacobian is applied matrix-free and each Newton correction is
computed by conjugate gradients with Jacobi preconditioning.  The Newton
initial guess is the previous time level, which keeps the iteration in the
quadratic regime for every step size the safeguards admit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import Bdf2Kernels, step_kernels
from .spatial import Grid2D, laplacian_apply, max_norm
from .time_mesh import solvability_bound


class NewtonDiverged(RuntimeError):
    """Newton or its inner linear solve failed to reach tolerance."""


class SolvabilityViolated(ValueError):
    """Step size at or above the unique-solvability bound."""


@dataclass
class NewtonConfig:
    """Newton controls: residual max-norm tolerance, iteration caps."""

    tol: float = 1e-12
    max_iter: int = 50
    lin_rtol: float = 1e-13
    lin_max_iter: int = 2000

    def __post_init__(self) -> None:
        eps = np.finfo(float).eps
        if not self.tol >= eps:
            raise ValueError("Newton tolerance below machine precision")
        if self.max_iter < 1 or self.lin_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        if not 0.0 < self.lin_rtol < 1.0:
            raise ValueError("linear tolerance must lie in (0, 1)")


@dataclass
class StepperState:
    """March state after ``n`` completed steps: ``u_prev = u^n`` at ``t``."""

    u_prev: np.ndarray
    u_prev2: np.ndarray | None
    n: int
    t: float
    tau_prev: float = 0.0


@dataclass
class StepRecord:
    """Diagnostics of one attempted step; one CSV row of the run log."""

    n: int
    t: float
    tau: float
    ratio: float
    e_est: float
    accepted: bool
    newton_iters: int
    max_norm: float
    energy: float
    modified_energy: float
    s0_ok: bool
    maxp_bound_ok: bool

    FIELDS = (
        "n", "t", "tau", "ratio", "e_est", "accepted", "newton_iters",
        "max_norm", "energy", "modified_energy", "s0_ok", "maxp_bound_ok",
    )


@dataclass(frozen=True)
class EnergyPair:
    """Plain and modified energy at one completed level."""

    n: int
    energy: float
    modified_energy: float


def jacobian_apply(u: np.ndarray, v: np.ndarray, b0: float, grid: Grid2D, eps: float) -> np.ndarray:
    """Directional derivative of the step residual at ``u``, applied to ``v``."""
    return (b0 - 1.0 + 3.0 * u * u) * v - eps * eps * laplacian_apply(v, grid.h)


def _pcg(
    react: np.ndarray,
    e2: float,
    h: float,
    b: np.ndarray,
    diag: np.ndarray,
    rtol: float,
    max_iter: int,
) -> np.ndarray:
    """Jacobi-preconditioned CG on ``react v - e2 Lap v = b``, zero guess.

    ``react`` is the pointwise reaction coefficient ``b0 - 1 + 3 u^2``; the
    operator is SPD for ``b0 > 1``.  Stops at ``||residual||_2 <= rtol
    ||b||_2``.  The loop works in preallocated buffers and allocates
    nothing per iteration.
    """
    bf = b.ravel()
    b_norm = math.sqrt(float(np.dot(bf, bf)))
    x = np.zeros_like(b, order="C")
    if b_norm == 0.0:
        return x
    r = b.copy()
    z = np.empty_like(b, order="C")
    np.divide(r, diag, out=z)
    p = z.copy()
    ap = np.empty_like(b, order="C")
    lap = np.empty_like(b, order="C")
    scratch = np.empty_like(b, order="C")
    rf = r.ravel()
    zf = z.ravel()
    pf = p.ravel()
    apf = ap.ravel()
    rz = float(np.dot(rf, zf))
    target = rtol * b_norm
    for _ in range(max_iter):
        laplacian_apply(p, h, out=lap, scratch=scratch)
        np.multiply(react, p, out=ap)
        lap *= e2
        ap -= lap
        alpha = rz / float(np.dot(pf, apf))
        np.multiply(p, alpha, out=scratch)
        x += scratch
        np.multiply(ap, alpha, out=scratch)
        r -= scratch
        if math.sqrt(float(np.dot(rf, rf))) <= target:
            return x
        np.divide(r, diag, out=z)
        rz_new = float(np.dot(rf, zf))
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise NewtonDiverged("inner linear solve stalled")


def nonlinear_solve(
    u0: np.ndarray,
    const: np.ndarray,
    b0: float,
    grid: Grid2D,
    eps: float,
    cfg: NewtonConfig,
    trace: list[float] | None = None,
    anchor: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Solve ``b0 (u - anchor) - eps^2 Lap u + u^3 - u = const`` from ``u0``.

    ``anchor = None`` means the zero field, i.e. the plain equation
    ``b0 u - eps^2 Lap u + u^3 - u = const``.

    The unknown is carried internally as the increment ``w = u - anchor``
    and the cubic is expanded about the anchor, so every ``w``-dependent
    term of the residual scales with ``w`` itself.  For short steps ``b0``
    is huge and the naive form cannot converge: one ulp of ``u`` already
    moves ``b0 u`` by more than the tolerance, while one ulp of the small
    increment moves it by a negligible amount.

    Returns the root and the number of Newton sweeps (residual evaluations);
    a start point already at the root counts as one sweep.  ``trace``, when
    given, collects the residual max-norms.

    Early corrections solve the linear system loosely and the tolerance
    tightens with the square of the residual drop, so the quadratic tail of
    the outer iteration is preserved at a fraction of the inner work; the
    configured ``lin_rtol`` acts as the floor.
    """
    h = grid.h
    e2 = eps * eps
    lap = np.empty_like(u0, order="C")
    scratch = np.empty_like(u0, order="C")
    residual = np.empty_like(u0, order="C")
    react = np.empty_like(u0, order="C")
    diag = np.empty_like(u0, order="C")
    # base residual at w = 0: everything that does not move with w
    if anchor is None:
        w = u0.copy()
        base = np.negative(const)
        lin_coef = b0 - 1.0
        cubic_shift = None
    else:
        w = u0 - anchor
        laplacian_apply(anchor, h, out=lap, scratch=scratch)
        base = anchor * anchor
        base -= 1.0
        base *= anchor
        lap *= e2
        base -= lap
        base -= const
        lin_coef = b0 - 1.0 + 3.0 * anchor * anchor
        cubic_shift = 3.0 * anchor
    u = np.empty_like(u0, order="C")
    res_prev = None
    for sweep in range(1, cfg.max_iter + 1):
        # residual in increment form:
        #   (b0 - 1 + 3 a^2) w + (3 a + w) w^2 - e2 Lap w + base
        laplacian_apply(w, h, out=lap, scratch=scratch)
        np.multiply(w, w, out=residual)
        if cubic_shift is None:
            residual *= w
        else:
            np.add(cubic_shift, w, out=scratch)
            residual *= scratch
        np.multiply(lin_coef, w, out=scratch)
        residual += scratch
        np.multiply(lap, e2, out=scratch)
        residual -= scratch
        residual += base
        res_norm = max_norm(residual)
        if trace is not None:
            trace.append(res_norm)
        if anchor is None:
            u[...] = w
        else:
            np.add(anchor, w, out=u)
        if res_norm <= cfg.tol:
            return u, sweep
        if res_prev is None:
            rtol_k = 1e-4
        else:
            rtol_k = 0.9 * (res_norm / res_prev) ** 2
        rtol_k = max(cfg.lin_rtol, min(rtol_k, 1e-2))
        res_prev = res_norm
        np.multiply(u, u, out=react)
        react *= 3.0
        react += b0 - 1.0
        np.add(react, 4.0 * e2 / (h * h), out=diag)
        np.negative(residual, out=residual)
        delta = _pcg(react, e2, h, residual, diag, rtol_k, cfg.lin_max_iter)
        w += delta
    raise NewtonDiverged(f"no convergence in {cfg.max_iter} Newton sweeps")


def bdf2_step(
    state: StepperState,
    tau: float,
    grid: Grid2D,
    eps: float,
    source_at=None,
    cfg: NewtonConfig | None = None,
    kernels: Bdf2Kernels | None = None,
    trace: list[float] | None = None,
) -> tuple[np.ndarray, int]:
    """Advance one level from ``state`` with step size ``tau``.

    Uses the two-step weights implied by ``state.tau_prev`` (one-step on the
    first level), or explicit ``kernels`` when the caller wants a specific
    scheme, e.g. the one-step comparison solution of the adaptive
    controller.  ``source_at(t)`` must return the source field at time
    ``t``.  Does not mutate ``state``.

    Raises :class:`SolvabilityViolated` when ``tau`` is at or above the
    unique-solvability bound, :class:`NewtonDiverged` on iteration failure.
    """
    if cfg is None:
        cfg = NewtonConfig()
    if kernels is None:
        first = state.n == 0 or state.u_prev2 is None
        ratio = 0.0 if first else tau / state.tau_prev
        kernels = step_kernels(tau, ratio)
    if not kernels.tau < solvability_bound(kernels.ratio):
        raise SolvabilityViolated(
            f"tau = {kernels.tau:g} at ratio {kernels.ratio:g} reaches the "
            f"solvability bound {solvability_bound(kernels.ratio):g}"
        )
    const = np.zeros_like(state.u_prev)
    if kernels.b1 != 0.0:
        const -= kernels.b1 * (state.u_prev - state.u_prev2)
    if source_at is not None:
        const += source_at(state.t + tau)
    return nonlinear_solve(
        state.u_prev, const, kernels.b0, grid, eps, cfg, trace,
        anchor=state.u_prev,
    )


def energy(u: np.ndarray, grid: Grid2D, eps: float) -> float:
    """Discrete free energy, gradient part plus double-well part.

    ``h^2 [ -(eps^2 / 2) <u, Lap u> + (1/4) sum (1 - u^2)^2 ]``; the
    quadrature weight makes values comparable across resolutions.
    """
    h = grid.h
    lap = laplacian_apply(u, h)
    grad_part = -0.5 * eps * eps * float(np.sum(u * lap))
    well = 1.0 - u * u
    well_part = 0.25 * float(np.sum(well * well))
    return h * h * (grad_part + well_part)


def modified_energy(
    u_curr: np.ndarray,
    u_prev: np.ndarray,
    tau: float,
    ratio_next: float,
    grid: Grid2D,
    eps: float,
) -> float:
    """Energy plus the history term that makes dissipation provable.

    ``E[u] + r' tau / (2 (1 + r')) h^2 sum ((u - u_prev)/tau)^2`` with
    ``r'`` the next step ratio; pass 0 after the final step, which reduces
    the value to the plain energy.  Never below the plain energy.
    """
    base = energy(u_curr, grid, eps)
    if ratio_next == 0.0:
        return base
    diff = (u_curr - u_prev) / tau
    weight = ratio_next * tau / (2.0 * (1.0 + ratio_next))
    return base + weight * grid.h * grid.h * float(np.sum(diff * diff))
