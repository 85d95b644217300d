"""Domain homotopy driver: deform the ball into the target, re-solving.

The family g_t(r) = t*g(r) + (1-t)*sqrt(a^2 - r^2) starts at the ball
B_a (where every conclusion is verified directly) and ends at the target
profile. Each accepted step re-solves on the deformed domain with a warm
start from the previous solution and passes a gate set: Newton converged,
first eigenvalue above its margin, census equal to one nondegenerate
on-axis maximum, monotonicity margins within tolerance. A gate failure
halves the step and retries from the last good parameter; once the step
underflows t_step_min the failing parameter is recorded as
first_failure_t — the numerical analogue of the infimum at which the
conclusions would break. A completed run reaches t = 1 with every gate
green and the full verification suite (plus, in three dimensions, the
voxel-oracle comparison) passing at the target.

Grid resolution is fixed across t on a bounding box covering the whole
family, so fields at different t are directly comparable and the warm
start is an identity wherever the domain did not move.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .domain import HomotopyFamily, MeridianDomain, MeridianGrid, build_grid
from .errors import CplabError, IndefiniteOperatorError, EigenFailureError
from .interp import Bicubic
from .morse import find_critical_points
from .nonlinearity import Nonlinearity
from .solver import Field, TOL_PDE_DEFAULT, newton_solve
from .stability import smallest_eigenvalue, is_stable
from .verify import check_monotonicity, eps_disc, run_verification

logger = logging.getLogger(__name__)

T_STEP0_DEFAULT = 0.05
T_STEP_MIN_DEFAULT = 1e-3
LAMBDA_JUMP_FACTOR = 10.0


@dataclass
class StepRecord:
    t: float
    converged: bool
    lambda1: float
    cp_count: int
    m_z: float
    m_r: float
    runtime_s: float


@dataclass
class ContinuationRecord:
    steps: list = field(default_factory=list)
    rejections: list = field(default_factory=list)  # (t, reason)
    first_failure_t: float | None = None
    completed: bool = False
    lambda1_lipschitz: float = 0.0
    final_verification: object = None
    oracle_comparison: dict | None = None

    @property
    def final_t(self) -> float:
        return self.steps[-1].t if self.steps else np.nan


def warm_start_transfer(u_prev: Field, grid_prev: MeridianGrid,
                        grid_next: MeridianGrid) -> Field:
    """Move a solution to the next grid: interpolate, zero outside, clamp.

    Bicubic interpolation of the previous values at the new inside nodes;
    nodes that were outside the previous domain start at 0, and the result
    is clamped below at 0 (the stable branch is nonnegative). On identical
    grids the transfer is an exact identity.
    """
    vals_prev = np.where(grid_prev.inside, u_prev.values, 0.0)
    if (grid_prev.nr == grid_next.nr and grid_prev.nz == grid_next.nz
            and np.array_equal(grid_prev.rs, grid_next.rs)
            and np.array_equal(grid_prev.zs, grid_next.zs)):
        carried = np.where(grid_next.inside & grid_prev.inside, vals_prev, 0.0)
        return Field(grid_next, np.maximum(carried, 0.0), u_prev.n)
    interp = Bicubic(grid_prev.rs, grid_prev.zs, vals_prev)
    Z, R = np.meshgrid(grid_next.zs, grid_next.rs, indexing="ij")
    sel = grid_next.inside
    vals = interp.value(R[sel], Z[sel])
    if grid_prev.g is not None:
        was_inside = np.abs(Z[sel]) < np.asarray(grid_prev.g(R[sel]), float)
        vals = np.where(was_inside, vals, 0.0)
    out = np.zeros(R.shape)
    out[sel] = np.maximum(vals, 0.0)
    return Field(grid_next, out, u_prev.n)


def _evaluate_gates(grid, n, nl, u, tol_pde, phi0):
    """Run the per-step gate set; returns (ok, reason, metrics, eigenfield)."""
    eps = eps_disc(grid)
    try:
        stab = smallest_eigenvalue(grid, n, u, nl, phi0=phi0)
    except (IndefiniteOperatorError, EigenFailureError) as exc:
        return False, f"eigen failure: {exc}", {"lambda1": np.nan}, None
    metrics = {"lambda1": stab.lambda1}
    if not is_stable(stab):
        return False, f"lambda1 {stab.lambda1:.3g} below margin", metrics, stab.eigenfield

    census = find_critical_points(u)
    metrics["cp_count"] = len(census.points)
    cp_ok = (census.unique_nondegenerate_max and census.points
             and census.points[0].on_axis)
    if not cp_ok:
        kinds = [p.type for p in census.points]
        return False, f"census {kinds} is not one on-axis nondegenerate max", metrics, stab.eigenfield

    m_z, m_r, pct_z, pct_r = check_monotonicity(u)
    metrics.update(m_z=m_z, m_r=m_r)
    if not (m_z <= eps and m_r <= eps and pct_z < 0.0 and pct_r < 0.0):
        return False, f"monotonicity margins ({m_z:.3g}, {m_r:.3g}) exceed {eps:.3g}", metrics, stab.eigenfield
    return True, "", metrics, stab.eigenfield


def run_homotopy(target: MeridianDomain, nl: Nonlinearity, nr: int, nz: int,
                 t_step0: float = T_STEP0_DEFAULT,
                 t_step_min: float = T_STEP_MIN_DEFAULT,
                 tol_pde: float = TOL_PDE_DEFAULT,
                 seed: int = 0, uniqueness_seeds: int = 5,
                 oracle_n: int = 0, field_sink=None) -> ContinuationRecord:
    """Drive the homotopy from the ball to the target domain.

    `oracle_n` > 0 runs the voxel oracle comparison at t = 1 (only
    meaningful for n = 3). The t = 0 solve must succeed for a conforming
    nonlinearity; its failure is a setup error, not a recorded one.
    `field_sink(t, field)` is called for every accepted step when given.
    """
    if t_step0 > 0.1:
        raise ValueError("t_step0 must not exceed 0.1")
    n = target.n
    family = HomotopyFamily(target)
    rmax = max(family.a, target.profile.R)
    zmax = family.a
    record = ContinuationRecord()

    def grid_at(t):
        return build_grid(family, nr, nz, t=t, rmax=rmax, zmax=zmax)

    t0 = time.perf_counter()
    grid = grid_at(0.0)
    u, rep = newton_solve(grid, n, nl, Field.zeros(grid, n), tol_pde=tol_pde)
    if not rep.converged:
        raise CplabError("homotopy setup failed: the ball solve did not converge")
    ok, reason, metrics, phi = _evaluate_gates(grid, n, nl, u, tol_pde, None)
    if not ok:
        raise CplabError(f"homotopy setup failed on the ball: {reason}")
    record.steps.append(StepRecord(0.0, True, metrics["lambda1"],
                                   metrics["cp_count"], metrics["m_z"],
                                   metrics["m_r"], time.perf_counter() - t0))
    if field_sink is not None:
        field_sink(0.0, u)

    # A target identical to the ball keeps the family constant; jump to 1.
    probe = np.linspace(0.0, rmax, 257)
    trivial = bool(np.max(np.abs(family.profile_at(probe, 1.0)
                                 - family.profile_at(probe, 0.0))) <= 1e-13 * max(family.a, 1.0))

    t = 0.0
    step = t_step0 if not trivial else 1.0
    consecutive = 0
    jumps = []
    while t < 1.0:
        t_next = min(1.0, t + step)
        t_try0 = time.perf_counter()
        grid_next = grid_at(t_next)
        u_start = warm_start_transfer(u, grid, grid_next)
        failure = None
        try:
            u_next, rep = newton_solve(grid_next, n, nl, u_start, tol_pde=tol_pde)
            if not rep.converged:
                failure = f"Newton stalled at residual {rep.final_residual:.3g}"
        except IndefiniteOperatorError as exc:
            failure = f"indefinite linearization: {exc}"

        metrics = {}
        if failure is None:
            phi_start = None
            if phi is not None:
                phi_start = warm_start_transfer(
                    Field(grid, np.abs(phi.values), n), grid, grid_next)
            ok, reason, metrics, phi_next = _evaluate_gates(
                grid_next, n, nl, u_next, tol_pde, phi_start)
            if not ok:
                failure = reason

        if failure is None and len(jumps) >= 3:
            jump = abs(metrics["lambda1"] - record.steps[-1].lambda1)
            if jump > LAMBDA_JUMP_FACTOR * float(np.median(jumps)):
                failure = (f"lambda1 jump {jump:.3g} exceeds "
                           f"{LAMBDA_JUMP_FACTOR}x running median")

        if failure is not None:
            record.rejections.append((t_next, failure))
            logger.info("homotopy step to t=%.5f rejected: %s", t_next, failure)
            step *= 0.5
            consecutive = 0
            if step < t_step_min:
                record.first_failure_t = t_next
                break
            continue

        jumps.append(abs(metrics["lambda1"] - record.steps[-1].lambda1))
        if t_next > t:
            record.lambda1_lipschitz = max(record.lambda1_lipschitz,
                                           jumps[-1] / (t_next - t))
        record.steps.append(StepRecord(t_next, True, metrics["lambda1"],
                                       metrics["cp_count"], metrics["m_z"],
                                       metrics["m_r"],
                                       time.perf_counter() - t_try0))
        t, grid, u, phi = t_next, grid_next, u_next, phi_next
        if field_sink is not None:
            field_sink(t, u)
        consecutive += 1
        if consecutive >= 3:
            step = min(2.0 * step, t_step0)
            consecutive = 0

    if t >= 1.0 and record.first_failure_t is None:
        report = run_verification(grid, n, nl, u, tol_pde=tol_pde,
                                  seeds=uniqueness_seeds, seed=seed)
        record.final_verification = report
        oracle_ok = True
        if oracle_n > 0 and n == 3:
            from . import oracle3d
            try:
                vox = oracle3d.solve_3d(target, nl, oracle_n, tol=1e-8)
                linf_rel, offset = oracle3d.compare_with_axisymmetric(vox, u)
                rot, mir = oracle3d.symmetry_witnesses(vox)
                vmax = float(np.abs(vox.values[vox.mask]).max())
                record.oracle_comparison = {
                    "linf_rel": linf_rel, "cp_offset_cells": offset,
                    "rotation_witness": rot, "mirror_witness": mir,
                    "max_value": vmax,
                }
                oracle_ok = (linf_rel <= 2e-2 and offset <= 2.0
                             and rot <= 5e-3 * vmax and mir <= 5e-3 * vmax)
            except CplabError as exc:
                logger.warning("oracle comparison failed: %s", exc)
                record.oracle_comparison = {"error": str(exc)}
                oracle_ok = False
        record.completed = bool(report.passed and oracle_ok)
    return record


__all__ = ["ContinuationRecord", "StepRecord", "run_homotopy", "warm_start_transfer"]
