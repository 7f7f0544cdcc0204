"""Unsupervised weak-residual losses: the exact per-step defects of the
reference schemes, evaluated on arbitrary coefficient trajectories.

A residual takes the predicted snapshots for a segment (shape
(steps, coeffs...)) together with the frozen anchor snapshot the segment
inherits, and reports the summed squared defects.  Feeding a reference
solver's own snapshots (anchor = snapshot 0, steps = the rest) yields
machine-level zero, the property that makes loss minimization equivalent
to solving the scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import InputSample
from .schemes import (
    AdvectionScheme,
    BurgersScheme,
    ConvectionDiffusionScheme,
    DiffusionReactionScheme,
    KuramotoSivashinskyScheme,
    NavierStokesScheme,
)
from .solvers import Trajectory

__all__ = [
    "ResidualReport",
    "residual_dre",
    "residual_burgers",
    "residual_advection",
    "residual_cde",
    "residual_kse",
    "residual_nse",
    "split_solution",
]


@dataclass
class ResidualReport:
    """Decomposition of a residual total into per-step sums and, on
    request, the full per-(step, coefficient) tensor."""

    total: float
    per_step: np.ndarray
    per_term: np.ndarray | None = None


def split_solution(traj: Trajectory):
    """(anchor, steps) view of a full solver trajectory."""
    return traj.snapshots[0], traj.snapshots[1:]


def _steps_of(traj) -> np.ndarray:
    return traj.snapshots if isinstance(traj, Trajectory) else np.asarray(traj)


def _stack_prev(anchor: np.ndarray, steps: np.ndarray) -> np.ndarray:
    return np.concatenate([anchor[None], steps[:-1]], axis=0)


def _report(defects: np.ndarray, keep_terms: bool) -> ResidualReport:
    d = np.asarray(defects)
    if np.iscomplexobj(d):
        sq = d.real**2 + d.imag**2
    else:
        sq = d * d
    per_step = sq.reshape(sq.shape[0], -1).sum(axis=1)
    return ResidualReport(
        total=float(per_step.sum()),
        per_step=per_step,
        per_term=sq if keep_terms else None,
    )


def residual_dre(traj, f, anchor, scheme: DiffusionReactionScheme, *, keep_terms=False) -> ResidualReport:
    """Implicit-Euler weak defect of the diffusion-reaction scheme."""
    steps = _steps_of(traj)
    if steps.ndim != 2 or steps.shape[1] != scheme.n_coeffs:
        raise ValueError("trajectory does not match the Legendre representation")
    f_nodes = f.grid_values if isinstance(f, InputSample) else np.asarray(f)
    f_proj = scheme.project_forcing(f_nodes)
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps, f_proj), keep_terms)


def residual_burgers(traj, anchor, scheme: BurgersScheme, *, keep_terms=False) -> ResidualReport:
    """RK4 defect of the viscous Burgers scheme."""
    steps = _steps_of(traj)
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps), keep_terms)


def residual_advection(traj, a, anchor, scheme: AdvectionScheme, *, keep_terms=False) -> ResidualReport:
    """RK4 defect of the variable-coefficient advection scheme."""
    steps = _steps_of(traj)
    a_grid = a.grid_values if isinstance(a, InputSample) else np.asarray(a)
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps, a_grid), keep_terms)


def residual_cde(traj, anchor, scheme: ConvectionDiffusionScheme, *, keep_terms=False) -> ResidualReport:
    """Implicit-Euler defect on the (enriched) convection-diffusion basis,
    corrector row included when present."""
    steps = _steps_of(traj)
    if steps.shape[-1] != scheme.n_coeffs:
        raise ValueError("trajectory does not match the basis width")
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps), keep_terms)


def residual_kse(traj, anchor, scheme: KuramotoSivashinskyScheme, *, keep_terms=False) -> ResidualReport:
    """ETDRK4 defect (with the exp(c dt) propagation of the scheme)."""
    steps = _steps_of(traj)
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps), keep_terms)


def residual_nse(traj, anchor, scheme: NavierStokesScheme, *, keep_terms=False) -> ResidualReport:
    """Heun-corrector defect with the predictor state recomputed from the
    previous snapshot exactly as the solver does."""
    steps = _steps_of(traj)
    prev = _stack_prev(np.asarray(anchor), steps)
    return _report(scheme.defect(prev, steps), keep_terms)
