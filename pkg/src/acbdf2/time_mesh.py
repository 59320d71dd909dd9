"""Nonuniform time meshes and step-ratio safeguards.

A mesh is the sequence of positive step sizes ``tau_1, ..., tau_N`` covering
``[0, T]``.  Step ratios ``r_k = tau_k / tau_{k-1}`` (with ``r_1 = 0`` by
convention) control both solvability and stability of the two-step scheme,
so this module also provides the admissibility checks and the per-step upper
bounds used by the constraint monitors:

* zero-stability window ``0 < r_k < 1 + sqrt(2)``,
* energy-dissipation window ``0 < r_k < (3 + sqrt(17)) / 2``,
* unique-solvability bound ``tau_n < (1 + 2 r_n) / (1 + r_n)``,
* energy-law step bound (depends on the next ratio as well),
* maximum-principle step bound (depends on the recombination weight ``eta``
  and the spatial resolution).

All comparisons are exact floating-point comparisons; callers that want
slack must build it into the values they pass in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: zero-stability ratio limit, 1 + sqrt(2)
S0_LIMIT = 1.0 + math.sqrt(2.0)

#: energy-dissipation ratio limit, (3 + sqrt(17)) / 2
S1_LIMIT = (3.0 + math.sqrt(17.0)) / 2.0


@dataclass(frozen=True)
class TimeMesh:
    """Immutable sequence of step sizes ``tau_1..tau_N``.

    Ratios and node times are recomputed from the stored steps on demand;
    the steps are the single source of truth.  Step indices in the public
    API are 1-based to match the usual two-step scheme notation.
    """

    steps: np.ndarray

    def __post_init__(self) -> None:
        steps = np.asarray(self.steps, dtype=float).copy()
        if steps.ndim != 1 or steps.size == 0:
            raise ValueError("mesh needs a 1-d, non-empty step array")
        if not np.all(np.isfinite(steps)) or np.any(steps <= 0.0):
            raise ValueError("all step sizes must be finite and positive")
        times = np.concatenate(([0.0], np.cumsum(steps)))
        if np.any(np.diff(times) <= 0.0):
            # a step smaller than the float spacing of t would stall the clock
            raise ValueError("steps too small to advance the node times")
        steps.flags.writeable = False
        object.__setattr__(self, "steps", steps)

    @property
    def n_steps(self) -> int:
        return int(self.steps.size)

    @property
    def ratios(self) -> np.ndarray:
        """Step ratios ``r_k``, with ``r_1 = 0`` by convention."""
        r = np.empty_like(self.steps)
        r[0] = 0.0
        r[1:] = self.steps[1:] / self.steps[:-1]
        return r

    @property
    def times(self) -> np.ndarray:
        """Node times ``t_0 = 0 < t_1 < ... < t_N``."""
        return np.concatenate(([0.0], np.cumsum(self.steps)))

    @property
    def final_time(self) -> float:
        return float(np.sum(self.steps))

    def tau(self, k: int) -> float:
        """Step size ``tau_k`` (1-based)."""
        return float(self.steps[k - 1])

    def ratio(self, k: int) -> float:
        """Step ratio ``r_k`` (1-based, ``r_1 = 0``)."""
        if k == 1:
            return 0.0
        return float(self.steps[k - 1] / self.steps[k - 2])

    @classmethod
    def uniform(cls, total_time: float, n_steps: int) -> "TimeMesh":
        if n_steps < 1:
            raise ValueError("need at least one step")
        return cls(np.full(n_steps, total_time / n_steps))

    @classmethod
    def from_ratios(cls, tau1: float, ratios: np.ndarray) -> "TimeMesh":
        """Build a mesh from the first step and the ratios ``r_2..r_N``."""
        ratios = np.asarray(ratios, dtype=float)
        steps = tau1 * np.concatenate(([1.0], np.cumprod(ratios)))
        return cls(steps)

    def save_text(self, path: str) -> None:
        """One step size per line, full double precision."""
        with open(path, "w", encoding="ascii") as fh:
            for tau in self.steps:
                fh.write(format(tau, ".17g") + "\n")

    @classmethod
    def load_text(cls, path: str) -> "TimeMesh":
        with open(path, "r", encoding="ascii") as fh:
            vals = [float(line) for line in fh if line.strip()]
        return cls(np.asarray(vals))


def check_s0(mesh: TimeMesh) -> np.ndarray:
    """Per-step zero-stability flags: ``0 < r_k < 1 + sqrt(2)``.

    The first step has no ratio and is always admissible.
    """
    r = mesh.ratios
    ok = (r > 0.0) & (r < S0_LIMIT)
    ok[0] = True
    return ok


def check_s1(mesh: TimeMesh) -> np.ndarray:
    """Per-step energy-window flags: ``0 < r_k < (3 + sqrt(17)) / 2``."""
    r = mesh.ratios
    ok = (r > 0.0) & (r < S1_LIMIT)
    ok[0] = True
    return ok


def solvability_bound(ratio):
    """Largest step size with a unique nonlinear solution: ``(1+2r)/(1+r)``.

    The step is admissible when ``tau_n`` is strictly below this value, which
    makes the implicit equation strictly convex.  Accepts scalars or arrays.
    """
    ratio = np.asarray(ratio, dtype=float)
    out = (1.0 + 2.0 * ratio) / (1.0 + ratio)
    return out if out.ndim else float(out)


def energy_law_bound(ratio, ratio_next):
    """Step bound under which the modified energy cannot increase.

    ``min{(1+2r)/(1+r), (2+4r-r^2)/(1+r) - r'/(1+r')}`` where ``r`` is the
    current ratio and ``r'`` the next one (0 after the final step).  The
    second branch can be non-positive for ratio pairs outside the
    energy-dissipation window; a non-positive value means no admissible step.
    """
    ratio = np.asarray(ratio, dtype=float)
    ratio_next = np.asarray(ratio_next, dtype=float)
    first = (1.0 + 2.0 * ratio) / (1.0 + ratio)
    second = (2.0 + 4.0 * ratio - ratio * ratio) / (1.0 + ratio)
    second = second - ratio_next / (1.0 + ratio_next)
    out = np.minimum(first, second)
    return out if out.ndim else float(out)


def max_principle_bound(ratio, eta, stab, eps, h):
    """Step bound under which the solver provably stays in ``[-1, 1]``.

    ``((1+2r) eta - r^2) / (eta^2 (1+r)) * (1 - eta) / (stab + 4 eps^2 / h^2)``

    ``eta`` is the recombination weight, ``stab`` the Lipschitz constant of
    the reaction term on ``[-1, 1]`` (2 for the cubic double well), ``eps``
    the interface parameter and ``h`` the grid spacing.  The bound is zero
    at ``eta = r^2 / (1 + 2r)`` and the usable window is
    ``r^2/(1+2r) <= eta < 1``.
    """
    ratio = np.asarray(ratio, dtype=float)
    eta = np.asarray(eta, dtype=float)
    kappa = ((1.0 + 2.0 * ratio) * eta - ratio * ratio) / (eta * eta * (1.0 + ratio))
    out = kappa * (1.0 - eta) / (stab + 4.0 * eps * eps / (h * h))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConstraintReport:
    """Per-step admissibility flags for a whole mesh.

    Each field is a boolean array of length ``N`` (index ``k-1`` holds step
    ``k``).  A flag is false exactly when the corresponding inequality fails
    at that step; nothing is clamped or repaired here.
    """

    s0: np.ndarray
    s1: np.ndarray
    solvability: np.ndarray
    energy_law: np.ndarray
    max_principle: np.ndarray

    _NAMES = ("s0", "s1", "solvability", "energy_law", "max_principle")

    def first_violation(self, name: str) -> int | None:
        """1-based index of the first violating step, or None."""
        flags = getattr(self, name)
        bad = np.flatnonzero(~flags)
        return int(bad[0]) + 1 if bad.size else None

    def all_ok(self) -> bool:
        return all(bool(getattr(self, n).all()) for n in self._NAMES)

    def summary(self) -> dict[str, int | None]:
        return {n: self.first_violation(n) for n in self._NAMES}


def constraint_report(
    mesh: TimeMesh,
    *,
    eps: float,
    h: float,
    eta: float,
    stab: float = 2.0,
) -> ConstraintReport:
    """Evaluate every safeguard on every step of a mesh.

    The energy-law bound at step ``k`` uses the following ratio ``r_{k+1}``,
    taken as 0 after the final step.
    """
    steps = mesh.steps
    r = mesh.ratios
    r_next = np.concatenate((r[1:], [0.0]))
    solv = steps < solvability_bound(r)
    elaw = steps <= energy_law_bound(r, r_next)
    maxp = steps <= max_principle_bound(r, eta, stab, eps, h)
    return ConstraintReport(
        s0=check_s0(mesh),
        s1=check_s1(mesh),
        solvability=solv,
        energy_law=elaw,
        max_principle=maxp,
    )
