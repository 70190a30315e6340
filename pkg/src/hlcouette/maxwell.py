"""Closed-form solutions of the fully relaxing variant.

With a zero yield threshold every block relaxes at unit rate and the stress
diffusion coefficient is pinned at alpha by mass conservation, so the
stress density solves a linear advection-diffusion-relaxation equation
with an explicit heat-kernel representation:

    p(t, sigma) = e^{-t} (K_{alpha t} * p0)(sigma - chi(t))
                  + int_0^t e^{-(t-s)} K_{alpha (t-s)}(sigma - chi(t) + chi(s)) ds,

where K_v is the centered Gaussian of variance 2 v and chi(t) = int_0^t b.
The mean stress obeys the relaxation balance tau' + tau = b exactly.

Everything here is evaluated against the cell-centered stress grid through
exact cell averages of Gaussians (normal CDF differences), so the kernels
degenerate gracefully to point deposits as their variance goes to zero; the
memory integral is regularized by the substitution w = sqrt(t - s), under
which the delta endpoint becomes a smooth integrand for Gauss-Legendre
quadrature.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .errors import ValidationError
from .grids import SigmaGrid
from .protocols import Forcing

# Gauss-Legendre points for the memory integral; enough for mass errors
# far below the 1e-8 contract on this smooth integrand.
MEMORY_QUAD_POINTS = 96


def kernel_cell_averages(grid: SigmaGrid, mean: float, variance: float) -> np.ndarray:
    """Cell averages of a Gaussian with given mean and variance.

    variance = 0 returns the exact cell averages of a point mass: all mass
    in the containing cell, split evenly when the mean sits on an edge.
    """
    if variance < 0:
        raise ValidationError("variance must be nonnegative")
    out = np.zeros(grid.n_sigma)
    if variance == 0.0:
        e = grid.edges
        if mean <= e[0] or mean >= e[-1]:
            return out
        j = int(np.searchsorted(e, mean))
        # searchsorted(left): e[j-1] < mean <= e[j]
        if mean == e[j]:
            out[j - 1] += 0.5 / grid.d_sigma
            if j < grid.n_sigma:
                out[j] += 0.5 / grid.d_sigma
        else:
            out[j - 1] = 1.0 / grid.d_sigma
        return out
    std = math.sqrt(variance)
    cdf = ndtr((grid.edges - mean) / std)
    return np.diff(cdf) / grid.d_sigma


def offset_kernel(grid: SigmaGrid, shift: float, variance: float) -> np.ndarray:
    """Cell-averaged kernel on the offset ladder k*d_sigma, k in [-(n-1), n-1].

    Entry k equals the average over cell i of a Gaussian centered at
    sigma_j + shift whenever k = i - j, which turns the p0 convolution into
    a single 1-d convolution.
    """
    n = grid.n_sigma
    ds = grid.d_sigma
    k_edges = ds * (np.arange(-(n - 1), n + 1) - 0.5)  # 2n edges
    if variance == 0.0:
        dens = np.zeros(2 * n - 1)
        rel = shift / ds
        j = math.floor(rel + 0.5)
        if abs(rel - (j - 0.5)) < 1e-12:  # shift sits on an offset-cell edge
            lo = j - 1 + (n - 1)
            if 0 <= lo < dens.size:
                dens[lo] += 0.5 / ds
            if 0 <= lo + 1 < dens.size:
                dens[lo + 1] += 0.5 / ds
        elif -(n - 1) <= j <= n - 1:
            dens[j + n - 1] = 1.0 / ds
        return dens
    cdf = ndtr((k_edges - shift) / math.sqrt(variance))
    return np.diff(cdf) / ds


def maxwell_p(p0: np.ndarray, forcing: Forcing, t: float, grid: SigmaGrid,
              alpha: float, n_quad: int = MEMORY_QUAD_POINTS) -> np.ndarray:
    """Closed-form stress density of the fully relaxing variant at time t.

    p0 are cell values on the grid (treated as point masses at cell
    centers, exact to second order in d_sigma); forcing supplies the
    loading history b whose running integral is the accumulated shear chi.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (grid.n_sigma,):
        raise ValidationError("p0 must be a single grid row")
    if t < 0:
        raise ValidationError("t must be nonnegative")
    if t == 0.0:
        return p0.copy()

    chi_t = forcing.integral(t)
    kern = offset_kernel(grid, chi_t, 2.0 * alpha * t)
    n = grid.n_sigma
    decayed = math.exp(-t) * grid.d_sigma * np.convolve(p0, kern)[n - 1:2 * n - 1]

    # memory term via w = sqrt(t - s): int_0^sqrt(t) 2 w e^{-w^2} K_{alpha w^2}(.) dw
    x, wts = np.polynomial.legendre.leggauss(n_quad)
    w = 0.5 * math.sqrt(t) * (x + 1.0)
    scale = 0.5 * math.sqrt(t) * wts * 2.0 * w * np.exp(-w * w)
    shifts = np.array([chi_t - forcing.integral(t - wi * wi) for wi in w])
    stds = w * math.sqrt(2.0 * alpha)
    args = (grid.edges[None, :] - shifts[:, None]) / stds[:, None]
    memory = scale @ (np.diff(ndtr(args), axis=1) / grid.d_sigma)
    return decayed + memory


def maxwell_tau(tau0: float, forcing: Forcing, t: float) -> float:
    """Mean stress of the fully relaxing variant: tau' + tau = b solved exactly."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    return tau0 * math.exp(-t) + forcing.exp_integral(t)


def kernel_mass_check(grid: SigmaGrid, variance: float) -> float:
    """Total cell-average mass of a centered kernel (grid truncation probe)."""
    return float(grid.mass(kernel_cell_averages(grid, 0.0, variance)))
