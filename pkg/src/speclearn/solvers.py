"""Classical spectral reference solvers for the six PDE families.

These produce the ground-truth coefficient trajectories that the losses
are checked against and that evaluation uses as references.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .sampling import InputSample
from .schemes import (
    AdvectionScheme,
    BlowUpError,
    BurgersScheme,
    ConvectionDiffusionScheme,
    DiffusionReactionScheme,
    KuramotoSivashinskyScheme,
    NavierStokesScheme,
    poisson_curl,
)
from .spectral import (
    FourierGrid,
    LegendreBasis,
    dft_1d,
    dft_2d,
    dirichlet_basis,
    idft_1d,
    idft_2d,
)

__all__ = [
    "FAMILIES",
    "PdeProblem",
    "Trajectory",
    "cached_basis",
    "solve_diffusion_reaction",
    "solve_burgers",
    "solve_advection",
    "solve_cde_boundary_layer",
    "solve_kse_2d",
    "solve_nse_2d",
    "solve_reference",
    "poisson_curl",
    "advection_initial_condition",
    "kolmogorov_forcing",
    "reconstruct_grid",
]

FAMILIES = (
    "diffusion_reaction",
    "burgers",
    "advection",
    "convection_diffusion_bl",
    "kse_2d",
    "nse_2d",
)

_DEFAULTS: dict[str, dict[str, Any]] = {
    "diffusion_reaction": dict(nu=0.01, mu=-0.01, N=50, dt=0.01, T=1.0, Q=10, R=10),
    "burgers": dict(nu=0.5, mu=5.0, N=32, dt=0.01, T=1.0, Q=10, R=10),
    "advection": dict(N=32, dt=0.01, T=1.0, Q=10, R=10),
    "convection_diffusion_bl": dict(nu=1e-6, mu=1.0, N=32, dt=0.01, T=1.0, Q=10, R=10),
    "kse_2d": dict(N=30, dt=0.01, T=0.5, Q=10, R=5),
    "nse_2d": dict(reynolds=200.0, N=32, dt=0.01, T=0.5, Q=10, R=5),
}


@dataclass
class PdeProblem:
    """One PDE family with its physical and discretization parameters."""

    family: str
    N: int
    dt: float
    T: float
    Q: int
    R: int
    nu: float | None = None
    mu: float | None = None
    reynolds: float | None = None
    forcing: Any = None  # problem-level forcing (NSE); samples carry the rest

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if abs(self.T - self.dt * self.Q * self.R) > 1e-12 * max(1.0, self.T):
            raise ValueError("T must equal dt * Q * R")
        self.T = self.dt * self.Q * self.R
        if self.family == "nse_2d" and self.reynolds is None:
            raise ValueError("Reynolds number required for nse_2d")

    @classmethod
    def defaults(cls, family: str, **overrides) -> "PdeProblem":
        if family not in _DEFAULTS:
            raise ValueError(f"unknown family {family!r}")
        kw = dict(_DEFAULTS[family])
        kw.update(overrides)
        if "T" not in overrides and {"dt", "Q", "R"} & overrides.keys():
            kw["T"] = kw["dt"] * kw["Q"] * kw["R"]
        return cls(family=family, **kw)

    @property
    def steps(self) -> int:
        return self.Q * self.R


@dataclass
class Trajectory:
    """Time-ordered coefficient snapshots, snapshot 0 being the initial
    projection, plus QR steps."""

    snapshots: np.ndarray
    representation: str  # legendre | legendre_enriched | fourier1d | fourier2d
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.snapshots.shape[0] - 1


@functools.lru_cache(maxsize=32)
def cached_basis(N: int, M: int | None = None, corrector_nu: float | None = None) -> LegendreBasis:
    return dirichlet_basis(N, M=M, corrector_nu=corrector_nu)


def _grid_values(f) -> np.ndarray:
    return f.grid_values if isinstance(f, InputSample) else np.asarray(f)


def solve_diffusion_reaction(problem: PdeProblem, f) -> Trajectory:
    """Implicit Euler / Legendre Galerkin for the diffusion-reaction family.

    f may be an InputSample or array on the Gauss-Lobatto nodes, or a
    callable f(x, t) for manufactured-solution runs (evaluated at the new
    time level each step).
    """
    basis = cached_basis(problem.N)
    scheme = DiffusionReactionScheme(basis, problem.nu, problem.mu, problem.dt)
    alpha = scheme.initial_coefficients(None)
    snaps = np.empty((problem.steps + 1, problem.N))
    snaps[0] = alpha
    time_dependent = callable(f)
    if not time_dependent:
        f_proj = scheme.project_forcing(_grid_values(f))
    for r in range(1, problem.steps + 1):
        if time_dependent:
            f_proj = scheme.project_forcing(f(basis.nodes, r * problem.dt))
        try:
            alpha = scheme.step(alpha, f_proj)
        except np.linalg.LinAlgError as err:
            raise np.linalg.LinAlgError(f"singular step {r}: {err}") from err
        snaps[r] = alpha
    return Trajectory(snaps, "legendre")


def solve_burgers(problem: PdeProblem, u0) -> Trajectory:
    grid = FourierGrid(problem.N)
    scheme = BurgersScheme(grid, problem.nu, problem.mu, problem.dt)
    alpha = dft_1d(_grid_values(u0)).values
    snaps = np.empty((problem.steps + 1, problem.N), dtype=complex)
    snaps[0] = alpha
    for r in range(1, problem.steps + 1):
        alpha = scheme.step(alpha)
        if not np.all(np.isfinite(alpha.view(float))):
            raise BlowUpError(r)
        snaps[r] = alpha
    return Trajectory(snaps, "fourier1d")


def advection_initial_condition(grid: FourierGrid) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(grid.nodes))


def solve_advection(problem: PdeProblem, a) -> Trajectory:
    grid = FourierGrid(problem.N)
    scheme = AdvectionScheme(grid, problem.dt)
    a_grid = _grid_values(a)
    alpha = dft_1d(advection_initial_condition(grid)).values
    snaps = np.empty((problem.steps + 1, problem.N), dtype=complex)
    snaps[0] = alpha
    for r in range(1, problem.steps + 1):
        alpha = scheme.step(alpha, a_grid)
        if not np.all(np.isfinite(alpha.view(float))):
            raise BlowUpError(r)
        snaps[r] = alpha
    return Trajectory(snaps, "fourier1d")


def solve_cde_boundary_layer(
    problem: PdeProblem, u0, *, corrector: bool = True
) -> Trajectory:
    """Fully implicit Euler on the (optionally corrector-enriched) basis."""
    basis = cached_basis(
        problem.N, corrector_nu=problem.nu if corrector else None
    )
    scheme = ConvectionDiffusionScheme(
        basis, problem.nu, problem.dt, mu=problem.mu if problem.mu is not None else 1.0
    )
    metadata = {}
    if scheme.condition > 1e14:
        metadata["condition_warning"] = scheme.condition
    alpha = scheme.initial_coefficients(_grid_values(u0))
    snaps = np.empty((problem.steps + 1, scheme.n_coeffs))
    snaps[0] = alpha
    for r in range(1, problem.steps + 1):
        alpha = scheme.step(alpha)
        snaps[r] = alpha
    return Trajectory(
        snaps, "legendre_enriched" if corrector else "legendre", metadata
    )


def solve_kse_2d(problem: PdeProblem, u0, *, printed_symbol: bool = False) -> Trajectory:
    grid = FourierGrid(problem.N, dims=2)
    scheme = KuramotoSivashinskyScheme(grid, problem.dt, printed_symbol=printed_symbol)
    alpha = dft_2d(_grid_values(u0)).values
    snaps = np.empty((problem.steps + 1, problem.N, problem.N), dtype=complex)
    snaps[0] = alpha
    for r in range(1, problem.steps + 1):
        alpha = scheme.step(alpha)
        if not np.all(np.isfinite(alpha.view(float))):
            raise BlowUpError(r)
        snaps[r] = alpha
    return Trajectory(snaps, "fourier2d")


def kolmogorov_forcing(grid: FourierGrid, n: int = 1) -> np.ndarray:
    """f = -n cos(n y) on the 2D grid."""
    y = grid.nodes
    return np.broadcast_to(-n * np.cos(n * y)[None, :], (grid.N, grid.N)).copy()


def solve_nse_2d(problem: PdeProblem, w0, *, forcing: np.ndarray | None = None) -> Trajectory:
    grid = FourierGrid(problem.N, dims=2)
    if forcing is None:
        forcing = (
            _grid_values(problem.forcing)
            if problem.forcing is not None
            else kolmogorov_forcing(grid)
        )
    f_hat = dft_2d(forcing).values
    scheme = NavierStokesScheme(grid, problem.reynolds, problem.dt, f_hat)
    alpha = dft_2d(_grid_values(w0)).values
    snaps = np.empty((problem.steps + 1, problem.N, problem.N), dtype=complex)
    snaps[0] = alpha
    for r in range(1, problem.steps + 1):
        alpha = scheme.step(alpha)
        if not np.all(np.isfinite(alpha.view(float))):
            raise BlowUpError(r)
        snaps[r] = alpha
    return Trajectory(snaps, "fourier2d")


def solve_reference(problem: PdeProblem, sample, **kw) -> Trajectory:
    """Dispatch to the family solver with the sample as its input."""
    return {
        "diffusion_reaction": solve_diffusion_reaction,
        "burgers": solve_burgers,
        "advection": solve_advection,
        "convection_diffusion_bl": solve_cde_boundary_layer,
        "kse_2d": solve_kse_2d,
        "nse_2d": solve_nse_2d,
    }[problem.family](problem, sample, **kw)


def reconstruct_grid(snapshots: np.ndarray, representation: str, basis: LegendreBasis | None = None) -> np.ndarray:
    """Coefficient snapshots -> grid values (last axes are space)."""
    if representation in ("legendre", "legendre_enriched"):
        if basis is None:
            raise ValueError("Legendre reconstruction needs the basis")
        return np.asarray(snapshots) @ basis.values[: snapshots.shape[-1]]
    if representation == "fourier1d":
        return idft_1d(np.asarray(snapshots)).real
    if representation == "fourier2d":
        return idft_2d(np.asarray(snapshots)).real
    raise ValueError(f"unknown representation {representation!r}")
