"""Discrete Cauchy transform (convolution with 1/(pi z)), its conjugate,
Wirtinger derivatives, the Beurling transform, and the boundary Cauchy
integral with its integration-by-parts residual.

The transform is a zero-padded FFT convolution with the kernel sampled at
cell-center displacements.  The origin sample is exactly zero: the mean
of 1/(pi z) over a centered square cell vanishes by odd symmetry, so the
singular cell needs no regularization parameter.
"""

from __future__ import annotations

import threading
from functools import cached_property

import numpy as np

from .errors import BklabError, GridError
from .grid import DomainSpec, Grid

__all__ = [
    "ConvolutionPlan", "get_plan", "cauchy", "conj_cauchy",
    "wirtinger", "beurling", "boundary_cauchy", "ibp_check",
]


class ConvolutionPlan:
    """Precomputed forward transform of the sampled 1/(pi z) kernel on the
    zero-padded 2N x 2N grid, plus the spectral derivative symbols used by
    the Beurling transform.  Immutable and shareable across threads."""

    def __init__(self, grid: Grid):
        self.grid = grid
        N, h = grid.N, grid.h
        M = 2 * N
        d = ((np.arange(M) + N) % M - N) * h
        W = d[None, :] + 1j * d[:, None]
        K = np.zeros((M, M), dtype=complex)
        nz = W != 0
        K[nz] = 1.0 / (np.pi * W[nz])
        self.kernel_hat = np.fft.fft2(K)
        self.kernel_hat.setflags(write=False)

    @cached_property
    def _pad_freq(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(2 * self.grid.N, d=self.grid.h)

    @cached_property
    def d_symbol(self) -> np.ndarray:
        """Symbol of d = (d_x - i d_y)/2 on the padded grid."""
        xi = self._pad_freq
        sym = 0.5 * (1j * xi[None, :] + xi[:, None])
        sym.setflags(write=False)
        return sym

    def _padded_product(self, f: np.ndarray) -> np.ndarray:
        N = self.grid.N
        fp = np.zeros((2 * N, 2 * N), dtype=complex)
        fp[:N, :N] = f
        return np.fft.fft2(fp) * self.kernel_hat

    def apply(self, f: np.ndarray) -> np.ndarray:
        N = self.grid.N
        out = np.fft.ifft2(self._padded_product(f)) * self.grid.cell_measure
        return out[:N, :N]

    def apply_beurling(self, f: np.ndarray) -> np.ndarray:
        N = self.grid.N
        prod = self._padded_product(f) * self.d_symbol
        return (np.fft.ifft2(prod) * self.grid.cell_measure)[:N, :N]


_PLANS: dict[tuple[float, int], ConvolutionPlan] = {}
_PLANS_LOCK = threading.Lock()


def get_plan(grid: Grid) -> ConvolutionPlan:
    key = (grid.L, grid.N)
    with _PLANS_LOCK:
        plan = _PLANS.get(key)
        if plan is None:
            plan = _PLANS[key] = ConvolutionPlan(grid)
    return plan


def _resolve(f, plan, grid):
    if plan is None:
        if grid is None:
            raise BklabError("cauchy needs a plan or a grid")
        plan = get_plan(grid)
    f = np.asarray(f, dtype=complex)
    if f.shape != (plan.grid.N, plan.grid.N):
        raise GridError(f"field shape {f.shape} does not match plan grid "
                        f"{(plan.grid.N, plan.grid.N)}")
    return f, plan


def cauchy(f: np.ndarray, plan: ConvolutionPlan | None = None,
           grid: Grid | None = None) -> np.ndarray:
    """C f = (1/(pi z)) * f, a right inverse of dbar."""
    f, plan = _resolve(f, plan, grid)
    return plan.apply(f)


def conj_cauchy(f: np.ndarray, plan: ConvolutionPlan | None = None,
                grid: Grid | None = None) -> np.ndarray:
    """Cbar f = (1/(pi zbar)) * f = conj(C(conj f)), bit for bit."""
    f, plan = _resolve(f, plan, grid)
    return np.conj(plan.apply(np.conj(f)))


def beurling(f: np.ndarray, plan: ConvolutionPlan | None = None,
             grid: Grid | None = None) -> np.ndarray:
    """Pi f = d(C f), with d applied spectrally on the padded grid."""
    f, plan = _resolve(f, plan, grid)
    return plan.apply_beurling(f)


def wirtinger(f: np.ndarray, which: str, grid: Grid,
              method: str = "spectral", mask: np.ndarray | None = None) -> np.ndarray:
    """d or dbar of a field.

    method='spectral' differentiates on the periodic grid and suits
    smooth, decaying fields.  method='fd' uses centered differences
    (one-sided at a mask edge) and suits masked or non-periodic fields.
    Convention: d = (d_x - i d_y)/2, dbar = (d_x + i d_y)/2.
    """
    f = grid.check_field(np.asarray(f, dtype=complex))
    if which not in ("d", "dbar"):
        raise BklabError(f"which must be 'd' or 'dbar', got {which!r}")
    sign = -1.0 if which == "d" else 1.0
    if method == "spectral":
        xi = 2 * np.pi * np.fft.fftfreq(grid.N, d=grid.h)
        F = np.fft.fft2(f)
        fx = np.fft.ifft2(F * (1j * xi[None, :]))
        fy = np.fft.ifft2(F * (1j * xi[:, None]))
    elif method == "fd":
        from .util import masked_gradient
        if mask is None:
            mask = np.ones(f.shape, dtype=bool)
            fx = np.gradient(f, grid.h, axis=1)
            fy = np.gradient(f, grid.h, axis=0)
        else:
            fx, fy = masked_gradient(f, mask, grid.h)
    else:
        raise BklabError(f"unknown wirtinger method {method!r}")
    return 0.5 * (fx + sign * 1j * fy)


def boundary_cauchy(trace, domain: DomainSpec):
    """(1/2pi) int_dOmega g(z') eta(z') / (z - z') dsigma(z') on the grid.

    Trapezoid rule over the boundary quadrature nodes.  Cells within h of
    the polyline are not evaluated; the returned `valid` mask marks them.
    Returns (field, valid).
    """
    if callable(trace):
        g = domain.sample_trace(trace)
    else:
        g = np.asarray(trace, dtype=complex)
    if g.size == 0 or g.shape != domain.nodes.shape:
        raise BklabError("trace must be sampled at the domain's quadrature nodes")
    grid = domain.grid
    valid = domain.distance > grid.h
    out = np.zeros((grid.N, grid.N), dtype=complex)
    zflat = grid.Z[valid]
    coeff = g * domain.normals * domain.weights / (2 * np.pi)
    vals = np.empty(zflat.size, dtype=complex)
    chunk = max(1, int(4e6 // max(1, domain.nodes.size)))
    for s in range(0, zflat.size, chunk):
        zz = zflat[s:s + chunk, None]
        vals[s:s + chunk] = (coeff[None, :] / (zz - domain.nodes[None, :])).sum(axis=1)
    out[valid] = vals
    return out, valid


def ibp_check(domain: DomainSpec, f, dbar_f) -> float:
    """Residual of C(chi dbar f) = chi f + boundary integral of Tr f.

    f and dbar_f are callables on complex points.  Returns the sup over
    masked cells more than 3h inside the boundary.
    """
    grid = domain.grid
    F = np.asarray(f(grid.Z), dtype=complex)
    dF = np.asarray(dbar_f(grid.Z), dtype=complex)
    lhs = cauchy(domain.restrict(dF), grid=grid)
    bc, valid = boundary_cauchy(f, domain)
    inner = domain.interior_mask(3 * grid.h) & valid
    resid = lhs - domain.restrict(F) - bc
    return float(np.abs(resid[inner]).max())
