"""Run orchestration: march a configured problem and write its artifacts.

One run produces, under the configured output directory:

* ``steps.csv``: one row per attempted level (rejected trials included),
  schema ``n,t,tau,ratio,e_est,accepted,newton_iters,max_norm,energy,
  modified_energy,s0_ok,maxp_bound_ok``, floats at 17 significant digits;
* binary field snapshots at the scheduled times (first accepted level at or
  past each scheduled time);
* ``summary.json``: run totals and constraint bookkeeping.

The modified energy of a level depends on the ratio of the following step,
so each record is finalized one acceptance later; the final level uses a
zero next ratio, collapsing its modified energy to the plain energy.  With
fixed seeds the march is sequential and deterministic, so repeated runs
produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveConfig, advance
from .config import RunConfig
from .experiments import MmsProblem, coarsening_init, four_bubble_init, random_mesh
from .kernels import choose_eta
from .spatial import Grid2D, max_norm, read_snapshot, write_snapshot, write_text_field
from .stepper import (
    NewtonConfig,
    StepRecord,
    StepperState,
    bdf2_step,
    energy,
    modified_energy,
)
from .time_mesh import (
    S0_LIMIT,
    S1_LIMIT,
    TimeMesh,
    energy_law_bound,
    max_principle_bound,
)

log = logging.getLogger(__name__)

CSV_HEADER = ",".join(StepRecord.FIELDS)

#: Lipschitz constant of the double-well derivative on [-1, 1]
STAB_CONSTANT = 2.0


class ConstraintAbort(RuntimeError):
    """Raised internally when an enforced safeguard fails."""

    def __init__(self, name: str, step: int):
        self.name = name
        self.step = step
        super().__init__(f"constraint '{name}' violated at step {step}")


@dataclass
class RunResult:
    records: list[StepRecord]
    summary: dict
    u_final: np.ndarray
    grid: Grid2D


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_steps_csv(path: Path, records: list[StepRecord]) -> None:
    lines = [CSV_HEADER]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, f)) for f in StepRecord.FIELDS))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


class _Monitors:
    """Constraint policies, violation counts, one-shot warnings."""

    NAMES = ("s0", "s1", "energy_law", "max_principle")

    def __init__(self, policy_of: dict[str, str]):
        self.policy_of = policy_of
        self.counts = {n: 0 for n in self.NAMES}
        self.first = {n: None for n in self.NAMES}

    def event(self, name: str, step: int) -> None:
        self.counts[name] += 1
        if self.first[name] is None:
            self.first[name] = step
            if self.policy_of[name] == "warn":
                log.warning("constraint '%s' first violated at step %d", name, step)
        if self.policy_of[name] == "enforce":
            raise ConstraintAbort(name, step)

    def active(self, name: str) -> bool:
        return self.policy_of[name] != "off"


class _Run:
    """Mutable march state shared by the three schemes."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.grid = Grid2D(M=cfg.domain.M, L=cfg.domain.L, origin=cfg.domain.origin)
        self.eps = cfg.domain.eps
        self.newton_cfg = NewtonConfig(
            tol=cfg.newton.tol,
            max_iter=cfg.newton.max_iter,
            lin_rtol=cfg.newton.lin_rtol,
        )
        self.monitors = _Monitors(
            {n: getattr(cfg.constraints, n) for n in _Monitors.NAMES}
        )
        self.records: list[StepRecord] = []
        self.rejected_count = 0
        self.onestep_iters: list[int] = []
        self.schedule = sorted(cfg.output.snapshots)
        self.sched_idx = 0
        self.snapshots_written: list[str] = []
        self.eta = self._run_eta()
        self.u0, self.source_at = self._initial_state()
        self.state = StepperState(
            u_prev=self.u0, u_prev2=None, n=0, t=0.0, tau_prev=0.0
        )
        # record awaiting its modified-energy finalization
        self.pending: StepRecord | None = None
        self.energy_initial = energy(self.u0, self.grid, self.eps)
        self.max_norm_overall = max_norm(self.u0)
        self.min_norm_overall = self.max_norm_overall
        self.aborted: str | None = None
        self.solver_error: str | None = None

    # -- setup -----------------------------------------------------------

    def _run_eta(self) -> float:
        cfg = self.cfg
        ceiling = S0_LIMIT - 1e-6
        if cfg.time.scheme == "uniform":
            r_s = 1.0
        elif cfg.time.scheme == "adaptive":
            cap = cfg.adaptive.ratio_cap
            r_s = min(cap, ceiling) if cap is not None else ceiling
        else:  # random-mesh: pick from the realized ratios
            mesh = self._build_mesh()
            r_s = float(mesh.ratios[1:].max()) if mesh.n_steps > 1 else 1.0
        return choose_eta(min(max(r_s, 1.0), ceiling))

    def _build_mesh(self) -> TimeMesh:
        cfg = self.cfg
        if cfg.time.scheme == "uniform":
            n = max(1, round(cfg.time.T / cfg.time.tau))
            return TimeMesh.uniform(cfg.time.T, n)
        if cfg.time.scheme == "random-mesh":
            return random_mesh(cfg.time.n, cfg.time.T, cfg.time.seed)
        raise ValueError("adaptive runs build their mesh on the fly")

    def _initial_state(self):
        cfg, grid = self.cfg, self.grid
        kind = cfg.init.kind
        if kind == "four_bubble":
            return four_bubble_init(grid, self.eps), None
        if kind == "coarsening":
            return coarsening_init(grid, cfg.init.seed, cfg.init.base, cfg.init.amp), None
        if kind == "mms":
            X, Y = grid.meshgrid()

            def source_at(t: float) -> np.ndarray:
                return MmsProblem.source(X, Y, t)

            return MmsProblem.exact(X, Y, 0.0), source_at
        if kind == "file":
            u, _ = read_snapshot(cfg.init.path)
            if u.shape != (grid.M, grid.M):
                raise ValueError(
                    f"initial field is {u.shape[0]}x{u.shape[1]}, grid wants {grid.M}"
                )
            return u, None
        raise ValueError(f"unknown init kind '{kind}'")

    # -- bookkeeping -----------------------------------------------------

    def _flags(self, tau: float, ratio: float) -> tuple[bool, bool]:
        s0_ok = bool(ratio < S0_LIMIT)
        maxp_ok = bool(
            tau
            <= max_principle_bound(ratio, self.eta, STAB_CONSTANT, self.eps, self.grid.h)
        )
        return s0_ok, maxp_ok

    def _finalize_pending(self, ratio_next: float) -> None:
        """Fill the waiting record's modified energy; run the lagged check."""
        rec = self.pending
        if rec is None:
            return
        rec.modified_energy = modified_energy(
            self.state.u_prev,
            self.state.u_prev2,
            self.state.tau_prev,
            ratio_next,
            self.grid,
            self.eps,
        )
        if self.monitors.active("energy_law"):
            if not rec.tau <= energy_law_bound(rec.ratio, ratio_next):
                self.monitors.event("energy_law", rec.n)
        self.pending = None

    def _accept(self, u: np.ndarray, rec: StepRecord) -> None:
        """Fold an accepted level into the march state."""
        rec.energy = energy(u, self.grid, self.eps)
        rec.s0_ok, rec.maxp_bound_ok = self._flags(rec.tau, rec.ratio)
        self._finalize_pending(rec.ratio)
        self.records.append(rec)
        self.pending = rec
        self.state = StepperState(
            u_prev=u,
            u_prev2=self.state.u_prev,
            n=rec.n,
            t=rec.t,
            tau_prev=rec.tau,
        )
        self.max_norm_overall = max(self.max_norm_overall, rec.max_norm)
        self.min_norm_overall = min(self.min_norm_overall, rec.max_norm)
        if self.monitors.active("s0") and not rec.s0_ok:
            self.monitors.event("s0", rec.n)
        if self.monitors.active("s1") and not rec.ratio < S1_LIMIT:
            self.monitors.event("s1", rec.n)
        if self.monitors.active("max_principle") and not rec.maxp_bound_ok:
            self.monitors.event("max_principle", rec.n)

    def _maybe_snapshot(self, out_dir: Path | None, t: float, u: np.ndarray) -> None:
        if out_dir is None:
            return
        slack = 1e-9 * max(1.0, self.cfg.time.T)
        while self.sched_idx < len(self.schedule) and t >= self.schedule[self.sched_idx] - slack:
            sched_t = self.schedule[self.sched_idx]
            name = f"snap_t{sched_t:g}.acf"
            write_snapshot(str(out_dir / name), u, t)
            if self.cfg.output.snapshot_text:
                write_text_field(str(out_dir / (name + ".txt")), u)
            self.snapshots_written.append(name)
            self.sched_idx += 1

    # -- marches ---------------------------------------------------------

    def march(self, out_dir: Path | None) -> None:
        self._maybe_snapshot(out_dir, 0.0, self.u0)
        try:
            if self.cfg.time.scheme == "adaptive":
                self._march_adaptive(out_dir)
            else:
                self._march_mesh(out_dir)
            self._finalize_pending(0.0)
        except ConstraintAbort as exc:
            self.aborted = exc.name
            raise

    def _march_mesh(self, out_dir: Path | None) -> None:
        mesh = self._build_mesh()
        times = mesh.times
        for k in range(1, mesh.n_steps + 1):
            tau = mesh.tau(k)
            u, iters = bdf2_step(
                self.state, tau, self.grid, self.eps, self.source_at, self.newton_cfg
            )
            rec = StepRecord(
                n=k,
                t=float(times[k]),
                tau=tau,
                ratio=mesh.ratio(k),
                e_est=math.nan,
                accepted=True,
                newton_iters=iters,
                max_norm=max_norm(u),
                energy=math.nan,
                modified_energy=math.nan,
                s0_ok=True,
                maxp_bound_ok=True,
            )
            self._accept(u, rec)
            self._maybe_snapshot(out_dir, rec.t, u)

    def _march_adaptive(self, out_dir: Path | None) -> None:
        cfg = self.cfg
        acfg = AdaptiveConfig(
            rho=cfg.adaptive.rho,
            tol=cfg.adaptive.tol,
            tau_max=cfg.adaptive.tau_max,
            tau_min=cfg.adaptive.tau_min,
            ratio_cap=cfg.adaptive.ratio_cap,
            max_rejects=cfg.adaptive.max_rejects,
            error_norm=cfg.adaptive.norm,
        )
        T = cfg.time.T
        if "time.tau" in cfg.explicit_keys:
            tau = min(max(cfg.time.tau, acfg.tau_min), acfg.tau_max)
        else:
            tau = acfg.tau_min
        end_slack = 1e-12 * max(1.0, T)
        while self.state.t < T - end_slack:
            tau = min(tau, T - self.state.t)  # clip the final step to land on T
            res = advance(
                self.state,
                tau,
                self.grid,
                self.eps,
                acfg,
                self.newton_cfg,
                self.source_at,
            )
            for rej in res.rejected:
                rej.s0_ok, rej.maxp_bound_ok = self._flags(rej.tau, rej.ratio)
                self.records.append(rej)
            self.rejected_count += len(res.rejected)
            self.onestep_iters.append(res.newton_iters_onestep)
            self._accept(res.u, res.record)
            self._maybe_snapshot(out_dir, res.record.t, res.u)
            tau = res.tau_next

    # -- outputs ---------------------------------------------------------

    def build_summary(self) -> dict:
        accepted = [r for r in self.records if r.accepted]
        iters = [r.newton_iters for r in accepted]
        final_rec = accepted[-1] if accepted else None
        return {
            "scheme": self.cfg.time.scheme,
            "eta": self.eta,
            "total_steps": len(accepted),
            "rejected_steps": self.rejected_count,
            "final_time": final_rec.t if final_rec else 0.0,
            "energy_initial": self.energy_initial,
            "final_energy": final_rec.energy if final_rec else self.energy_initial,
            "final_modified_energy": (
                final_rec.modified_energy if final_rec else self.energy_initial
            ),
            "max_norm_overall": self.max_norm_overall,
            "min_norm_overall": self.min_norm_overall,
            "newton_iters_median": float(statistics.median(iters)) if iters else 0.0,
            "newton_iters_total": sum(iters)
            + sum(r.newton_iters for r in self.records if not r.accepted)
            + sum(self.onestep_iters),
            "constraint_violations": dict(self.monitors.counts),
            "first_violations": dict(self.monitors.first),
            "snapshots": list(self.snapshots_written),
            "aborted": self.aborted,
            "solver_error": self.solver_error,
        }

    def write_outputs(self, out_dir: Path | None) -> None:
        if out_dir is None:
            return
        if self.cfg.output.csv:
            write_steps_csv(out_dir / "steps.csv", self.records)
        (out_dir / "summary.json").write_text(
            json.dumps(self.build_summary(), indent=2, sort_keys=True) + "\n",
            encoding="ascii",
        )


def run_simulation(cfg: RunConfig, out_dir: str | None = None) -> RunResult:
    """March a configured run and write its artifacts.

    The artifact directory is ``out_dir`` when given, else the configured
    ``output.dir``; an empty string suppresses artifacts entirely.  Partial
    artifacts are still written when the march stops early (solver failure
    or an enforced constraint), so failed runs leave evidence; the
    exception then propagates to the caller.
    """
    run = _Run(cfg)
    target = out_dir if out_dir is not None else cfg.output.dir
    out_path: Path | None = None
    if target:
        out_path = Path(target)
        out_path.mkdir(parents=True, exist_ok=True)
    try:
        run.march(out_path)
    except ConstraintAbort:
        run.write_outputs(out_path)
        raise
    except Exception as exc:
        run.solver_error = str(exc)
        run.write_outputs(out_path)
        raise
    run.write_outputs(out_path)
    return RunResult(
        records=run.records,
        summary=run.build_summary(),
        u_final=run.state.u_prev,
        grid=run.grid,
    )
