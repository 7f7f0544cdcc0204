"""Spectral building blocks: Legendre bases, Gauss-Lobatto quadrature,
discrete Fourier transforms, and the boundary-layer corrector profile.

Conventions (used consistently by every solver and loss in this package):

* Fourier nodes are x_n = 2*pi*n/N on [0, 2*pi); the forward transform is
  the plain sum scaled by the grid spacing h,

      F_xi(u) = h * sum_n exp(-i*xi*x_n) u(x_n),

  and the inverse carries a 1/(2*pi) factor per dimension.  Internally an
  FFT is used; the slow-sum definition is the contract and is what the
  tests check against.
* Wavenumbers are stored in FFT slot order but labelled
  {0, 1, ..., N/2, -N/2+1, ..., -1}; the Nyquist slot carries the +N/2
  label.  First-derivative symbols zero the Nyquist slot so that real
  fields stay real under differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LegendreBasis",
    "FourierGrid",
    "CoeffSpectrum",
    "legendre_eval",
    "legendre_deriv",
    "gauss_lobatto",
    "dirichlet_basis",
    "corrector_eval",
    "corrector_deriv",
    "dft_1d",
    "idft_1d",
    "dft_2d",
    "idft_2d",
    "hermitian_symmetrize",
    "is_hermitian",
]


class RootFindError(RuntimeError):
    """Newton iteration for quadrature nodes failed to converge."""


def legendre_eval(n: int, x):
    """Evaluate the Legendre polynomial L_n at x (scalar or array).

    Uses the three-term recurrence (k+1) L_{k+1} = (2k+1) x L_k - k L_{k-1}.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return p if p.ndim else float(p)


def legendre_deriv(n: int, x):
    """Evaluate L_n'(x) via the derivative recurrence.

    L'_{k+1} = L'_{k-1} + (2k+1) L_k, with L'_0 = 0 and L'_1 = 1.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if n == 0:
        out = np.zeros_like(x)
        return out if out.ndim else float(out)
    p_prev = np.ones_like(x)   # L_0
    p = x.copy()               # L_1
    d_prev = np.zeros_like(x)  # L'_0
    d = np.ones_like(x)        # L'_1
    for k in range(1, n):
        d, d_prev = d_prev + (2 * k + 1) * p, d
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return d if d.ndim else float(d)


def gauss_lobatto(M: int, *, tol: float = 1e-15, max_iter: int = 100):
    """Gauss-Lobatto nodes and weights on [-1, 1].

    Nodes are {-1, +1} plus the roots of L'_{M-1}; weights are
    w_j = 2 / (M (M-1) L_{M-1}(x_j)^2).  The rule integrates polynomials
    of degree <= 2M-3 exactly.  Interior roots come from Newton iteration
    seeded with Chebyshev-Lobatto points.
    """
    if M < 2:
        raise ValueError("need at least two nodes")
    if M == 2:
        nodes = np.array([-1.0, 1.0])
    else:
        # Chebyshev-Lobatto initial guesses for the interior roots.
        x = np.cos(np.pi * np.arange(1, M - 1) / (M - 1))
        n = M - 1
        for it in range(max_iter):
            # Newton on L'_n with L''_n from the ODE
            # (1 - x^2) L''_n = 2 x L'_n - n (n+1) L_n.
            ln = legendre_eval(n, x)
            dln = legendre_deriv(n, x)
            d2ln = (2 * x * dln - n * (n + 1) * ln) / (1.0 - x * x)
            dx = dln / d2ln
            x = x - dx
            if np.max(np.abs(dx)) < tol:
                break
        else:
            raise RootFindError(
                f"Gauss-Lobatto Newton iteration stalled for M={M}"
            )
        nodes = np.concatenate(([-1.0], np.sort(x), [1.0]))
    lm = legendre_eval(M - 1, nodes)
    weights = 2.0 / (M * (M - 1) * lm * lm)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def corrector_eval(nu: float, x):
    """Boundary-layer corrector profile, vanishing at both endpoints.

    exp(-(1+x)/nu) - (1 - (1 - exp(-2/nu))/2 * (x+1)).  The exponential
    underflows to exact zero away from x = -1 for tiny nu, which is the
    correct limit there.
    """
    if nu <= 0:
        raise ValueError("diffusivity must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        layer = np.exp(-(1.0 + x) / nu)
        slope = (1.0 - np.exp(-2.0 / nu)) / 2.0
    out = layer - (1.0 - slope * (x + 1.0))
    return out if out.ndim else float(out)


def corrector_deriv(nu: float, x):
    """Derivative of the boundary-layer corrector."""
    if nu <= 0:
        raise ValueError("diffusivity must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore"):
        layer = np.exp(-(1.0 + x) / nu)
        slope = (1.0 - np.exp(-2.0 / nu)) / 2.0
    out = -layer / nu + slope
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LegendreBasis:
    """Dirichlet Legendre basis phi_n = L_n - L_{n+2} tabulated on a
    Gauss-Lobatto grid, optionally enriched with the boundary-layer
    corrector as an extra row.

    values/derivs have one row per basis function (N rows, or N+1 with the
    corrector appended last) and one column per node.
    """

    N: int
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    corrector_enabled: bool = False
    nu: float | None = None

    @property
    def n_funcs(self) -> int:
        return self.N + 1 if self.corrector_enabled else self.N

    @property
    def M(self) -> int:
        return self.nodes.size

    def mass_matrix(self) -> np.ndarray:
        """Quadrature mass matrix: m[i, j] = sum_k w_k phi_i(x_k) phi_j(x_k)."""
        return (self.values * self.weights) @ self.values.T

    def stiffness_matrix(self) -> np.ndarray:
        """Quadrature stiffness matrix over the derivative tables."""
        return (self.derivs * self.weights) @ self.derivs.T

    def convection_matrix(self) -> np.ndarray:
        """c[n, m] = quadrature of phi_m' phi_n (trial derivative, test value)."""
        return (self.values * self.weights) @ self.derivs.T

    def project_nodal(self, v: np.ndarray) -> np.ndarray:
        """Quadrature projection of nodal values: b_n = sum_k w_k v(x_k) phi_n(x_k)."""
        return (self.values * self.weights) @ np.asarray(v, dtype=float)

    def to_grid(self, alpha: np.ndarray) -> np.ndarray:
        """Reconstruct nodal values from coefficients, last axis = functions."""
        return np.asarray(alpha) @ self.values


def dirichlet_basis(
    N: int,
    *,
    M: int | None = None,
    corrector_nu: float | None = None,
) -> LegendreBasis:
    """Build the N-function Dirichlet basis on M Gauss-Lobatto nodes.

    M defaults to N+2.  When corrector_nu is given, the corrector profile
    (and its derivative) is appended as the last row of the tables.
    """
    if N < 1:
        raise ValueError("need at least one basis function")
    if M is None:
        M = N + 2
    nodes, weights = gauss_lobatto(M)
    rows = N + (1 if corrector_nu is not None else 0)
    values = np.empty((rows, M))
    derivs = np.empty((rows, M))
    for n in range(N):
        values[n] = legendre_eval(n, nodes) - legendre_eval(n + 2, nodes)
        derivs[n] = legendre_deriv(n, nodes) - legendre_deriv(n + 2, nodes)
    # Endpoint values telescope to zero analytically; pin them so the
    # Dirichlet property is exact rather than within rounding.
    values[:N, 0] = 0.0
    values[:N, -1] = 0.0
    if corrector_nu is not None:
        values[N] = corrector_eval(corrector_nu, nodes)
        derivs[N] = corrector_deriv(corrector_nu, nodes)
        values[N, 0] = 0.0
        values[N, -1] = 0.0
    for arr in (values, derivs):
        arr.flags.writeable = False
    return LegendreBasis(
        N=N,
        nodes=nodes,
        weights=weights,
        values=values,
        derivs=derivs,
        corrector_enabled=corrector_nu is not None,
        nu=corrector_nu,
    )


def _wavenumbers(N: int) -> np.ndarray:
    k = np.arange(N)
    k[k > N // 2] -= N
    return k


@dataclass(frozen=True)
class FourierGrid:
    """Uniform periodic grid on [0, 2*pi)^dims with labelled wavenumbers."""

    N: int
    dims: int = 1
    nodes: np.ndarray = field(init=False)
    wavenumbers: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.N % 2 != 0 or self.N < 2:
            raise ValueError("mode count must be even and >= 2")
        if self.dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")
        nodes = self.h * np.arange(self.N)
        wn = _wavenumbers(self.N)
        nodes.flags.writeable = False
        wn.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "wavenumbers", wn)

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.N

    def deriv_symbol(self) -> np.ndarray:
        """i*xi along one axis, with the Nyquist slot zeroed so that
        differentiation maps real fields to real fields."""
        k = self.wavenumbers.astype(float)
        k = k.copy()
        k[self.N // 2] = 0.0
        return 1j * k

    def mesh_wavenumbers(self):
        """2D labelled wavenumber meshes (kx, ky), index order [x, y]."""
        if self.dims != 2:
            raise ValueError("2D grids only")
        k = self.wavenumbers
        return np.meshgrid(k, k, indexing="ij")

    def laplacian_symbol(self) -> np.ndarray:
        """|k|^2 per mode (1D: xi^2 vector; 2D: xi_x^2 + xi_y^2 array)."""
        if self.dims == 1:
            return self.wavenumbers.astype(float) ** 2
        kx, ky = self.mesh_wavenumbers()
        return (kx.astype(float) ** 2 + ky.astype(float) ** 2)


@dataclass
class CoeffSpectrum:
    """Complex coefficients indexed by wavenumber slot order, optionally
    carrying the exact Hermitian symmetry of a real field.

    dims is the spatial rank (leading axes, if any, are batch axes).
    """

    values: np.ndarray
    real_field: bool = False
    dims: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.real_field and not is_hermitian(self.values, self.dims):
            raise ValueError("spectrum does not satisfy Hermitian symmetry")


def _conj_partner(a: np.ndarray, naxes: int) -> np.ndarray:
    """conj(a) evaluated at the negated wavenumbers of the last naxes axes."""
    lead = a.ndim - naxes
    idx = [np.arange(n) for n in a.shape[:lead]]
    idx += [(-np.arange(n)) % n for n in a.shape[lead:]]
    return np.conj(a[np.ix_(*idx)]) if idx else np.conj(a)


def hermitian_symmetrize(a: np.ndarray, naxes: int | None = None) -> np.ndarray:
    """Project onto the Hermitian subspace: the result satisfies
    values[-k] == conj(values[k]) bit-exactly over the last naxes axes
    (default: all axes)."""
    a = np.asarray(a, dtype=complex)
    if naxes is None:
        naxes = a.ndim
    return (a + _conj_partner(a, naxes)) / 2.0


def is_hermitian(a: np.ndarray, naxes: int | None = None) -> bool:
    """Bit-level check of the real-field conjugate symmetry."""
    a = np.asarray(a, dtype=complex)
    if naxes is None:
        naxes = a.ndim
    return np.array_equal(a, _conj_partner(a, naxes))


def dft_1d(u, *, symmetrize: bool | None = None) -> CoeffSpectrum:
    """Forward transform F_xi(u) = h sum_n exp(-i xi x_n) u(x_n).

    Real input is symmetrized so the Hermitian invariant holds exactly.
    """
    u = np.asarray(u)
    if symmetrize is None:
        symmetrize = np.isrealobj(u)
    n = u.shape[-1]
    h = 2.0 * np.pi / n
    vals = h * np.fft.fft(u, axis=-1)
    if symmetrize:
        vals = hermitian_symmetrize(vals, 1)
    return CoeffSpectrum(vals, real_field=symmetrize, dims=1)


def idft_1d(spec: CoeffSpectrum | np.ndarray):
    """Inverse transform u(x_n) = (1/2pi) sum_xi exp(i xi x_n) alpha_xi."""
    real_field = isinstance(spec, CoeffSpectrum) and spec.real_field
    vals = spec.values if isinstance(spec, CoeffSpectrum) else np.asarray(spec)
    n = vals.shape[-1]
    h = 2.0 * np.pi / n
    out = np.fft.ifft(vals, axis=-1) / h
    return out.real if real_field else out


def dft_2d(u, *, symmetrize: bool | None = None) -> CoeffSpectrum:
    """2D forward transform with an h_x*h_y factor."""
    u = np.asarray(u)
    if symmetrize is None:
        symmetrize = np.isrealobj(u)
    nx, ny = u.shape[-2], u.shape[-1]
    h2 = (2.0 * np.pi / nx) * (2.0 * np.pi / ny)
    vals = h2 * np.fft.fft2(u, axes=(-2, -1))
    if symmetrize:
        vals = hermitian_symmetrize(vals, 2)
    return CoeffSpectrum(vals, real_field=symmetrize, dims=2)


def idft_2d(spec: CoeffSpectrum | np.ndarray):
    """2D inverse transform with a 1/(2pi)^2 factor."""
    real_field = isinstance(spec, CoeffSpectrum) and spec.real_field
    vals = spec.values if isinstance(spec, CoeffSpectrum) else np.asarray(spec)
    nx, ny = vals.shape[-2], vals.shape[-1]
    h2 = (2.0 * np.pi / nx) * (2.0 * np.pi / ny)
    out = np.fft.ifft2(vals, axes=(-2, -1)) / h2
    return out.real if real_field else out
