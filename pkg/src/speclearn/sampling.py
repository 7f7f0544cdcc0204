"""Seeded generation of random input functions: periodic Gaussian random
fields with power-law spectra, squared-exponential processes on the
Legendre grid, shifted positive coefficients, and polynomial initial data.

Every sampler is a pure function of (spec, seed, sample index).  Randomness
comes from a counter-based Philox stream keyed by (seed, index), so sample
p is bit-identical no matter how the batch is split up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import LegendreBasis, hermitian_symmetrize, idft_1d, idft_2d

__all__ = [
    "GrfSpec",
    "InputSample",
    "sample_grf_periodic",
    "sample_forcing_dre",
    "sample_advection_coefficient",
    "sample_cde_initial",
]


@dataclass(frozen=True)
class GrfSpec:
    """Mean-zero periodic Gaussian random field with per-mode standard
    deviation sigma * (|k|^2 + tau^2)^(-gamma/2)."""

    sigma: float
    tau: float
    gamma: float
    dims: int
    N: int
    periodic: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.gamma <= self.dims / 2:
            raise ValueError("gamma must exceed dims/2 for a summable spectrum")
        if self.dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")
        if self.N % 2 != 0 or self.N < 2:
            raise ValueError("N must be even and >= 2")


@dataclass
class InputSample:
    """One drawn input function on the solver grid."""

    kind: str  # forcing | coefficient | initial_condition
    grid_values: np.ndarray
    problem_tag: str = ""
    coeffs: np.ndarray | None = None       # CDE expansion coefficients
    raw_field: np.ndarray | None = None    # pre-shift field for coefficients


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed & (2**64 - 1), index)))


def _mode_amplitudes(spec: GrfSpec) -> np.ndarray:
    k = np.arange(spec.N)
    k[k > spec.N // 2] -= spec.N
    if spec.dims == 1:
        ksq = k.astype(float) ** 2
    else:
        kx, ky = np.meshgrid(k, k, indexing="ij")
        ksq = kx.astype(float) ** 2 + ky.astype(float) ** 2
    amp = spec.sigma * (ksq + spec.tau**2) ** (-spec.gamma / 2.0)
    if spec.dims == 1:
        amp[0] = 0.0
    else:
        amp[0, 0] = 0.0
    return amp


def sample_grf_periodic(spec: GrfSpec, index: int = 0) -> InputSample:
    """Draw one real periodic field whose Fourier coefficients (under the
    package's h-scaled transform) have variance sigma^2 (|k|^2+tau^2)^-gamma.
    """
    if not spec.periodic:
        raise ValueError("spec must be periodic")
    rng = _rng(spec.seed, index)
    shape = (spec.N,) if spec.dims == 1 else (spec.N, spec.N)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    # Hermitian projection of iid N(0,1)+iN(0,1) slots gives E|z_k|^2 = 1
    # on every slot, self-conjugate ones included.
    z = hermitian_symmetrize(z, spec.dims)
    alpha = _mode_amplitudes(spec) * z
    u = idft_1d(alpha) if spec.dims == 1 else idft_2d(alpha)
    resid = np.max(np.abs(u.imag))
    if resid > 1e-13:
        raise AssertionError(f"synthesis left imaginary residue {resid:g}")
    return InputSample(kind="initial_condition", grid_values=u.real)


def sample_forcing_dre(
    seed: int,
    N: int,
    *,
    nodes: np.ndarray | None = None,
    sigma: float = 25.0,
    ell: float = 0.2,
    index: int = 0,
) -> InputSample:
    """Mean-zero Gaussian process with squared-exponential covariance
    sigma^2 exp(-(x-x')^2 / (2 ell^2)) on the Gauss-Lobatto grid.

    Cholesky factorization starts with 1e-10 diagonal jitter and escalates
    tenfold a few times before giving up.
    """
    if N < 2:
        raise ValueError("need at least two basis functions")
    if nodes is None:
        from .spectral import gauss_lobatto

        nodes, _ = gauss_lobatto(N + 2)
    dx = nodes[:, None] - nodes[None, :]
    cov = sigma**2 * np.exp(-(dx**2) / (2.0 * ell**2))
    jitter = 1e-10
    chol = None
    while jitter <= 1e-4:
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(nodes.size))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
    if chol is None:
        raise np.linalg.LinAlgError(
            "covariance factorization failed even with escalated jitter"
        )
    z = _rng(seed, index).standard_normal(nodes.size)
    return InputSample(kind="forcing", grid_values=chol @ z, problem_tag="diffusion_reaction")


def sample_advection_coefficient(spec: GrfSpec, index: int = 0) -> InputSample:
    """Strictly positive variable coefficient a = a_raw - min(a_raw) + 1."""
    raw = sample_grf_periodic(spec, index).grid_values
    a = raw - np.min(raw) + 1.0
    return InputSample(
        kind="coefficient",
        grid_values=a,
        problem_tag="advection",
        raw_field=raw,
    )


def sample_cde_initial(seed: int, basis: LegendreBasis, index: int = 0) -> InputSample:
    """Initial profile (1-x)^4 (1+x) * sum_{j<4} a_j phi_j with a_j ~ U[0,1),
    evaluated on the basis nodes."""
    if basis.N < 4:
        raise ValueError("basis must have at least 4 functions")
    a = _rng(seed, index).random(4)
    x = basis.nodes
    u0 = (1.0 - x) ** 4 * (1.0 + x) * (a @ basis.values[:4])
    return InputSample(
        kind="initial_condition",
        grid_values=u0,
        problem_tag="convection_diffusion_bl",
        coeffs=a,
    )
