"""Uniform periodic grids and Fourier pseudospectral differentiation.

Fields are real arrays of shape ``(n1, n2)`` with axis 0 along ``y1`` and
axis 1 along ``y2``.  Transforms use the real FFT along the last axis, so
spectral arrays have shape ``(n1, n2 // 2 + 1)``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import BadGridSize


@dataclass(frozen=True)
class SpectralGrid:
    n1: int
    n2: int
    extents: tuple = (2 * np.pi, 2 * np.pi)
    origin: tuple = (0.0, 0.0)

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def spacing(self):
        return (self.extents[0] / self.n1, self.extents[1] / self.n2)

    @property
    def cell_area(self):
        h1, h2 = self.spacing
        return h1 * h2

    @property
    def area(self):
        return self.extents[0] * self.extents[1]

    @cached_property
    def y1(self):
        return self.origin[0] + self.spacing[0] * np.arange(self.n1)

    @cached_property
    def y2(self):
        return self.origin[1] + self.spacing[1] * np.arange(self.n2)

    @cached_property
    def mesh(self):
        return np.meshgrid(self.y1, self.y2, indexing="ij")

    @cached_property
    def wavenumbers(self):
        """Wavevector components ``(k1, k2)`` broadcast to the spectral shape."""
        k1 = 2 * np.pi * np.fft.fftfreq(self.n1, d=self.extents[0] / self.n1)
        k2 = 2 * np.pi * np.fft.rfftfreq(self.n2, d=self.extents[1] / self.n2)
        return np.broadcast_to(k1[:, None], self.spectral_shape), np.broadcast_to(
            k2[None, :], self.spectral_shape
        )

    @property
    def spectral_shape(self):
        return (self.n1, self.n2 // 2 + 1)

    @cached_property
    def _odd_symbols(self):
        # i*k with the Nyquist entries removed so odd derivatives of real fields stay real
        k1, k2 = self.wavenumbers
        k1 = k1.copy()
        k2 = k2.copy()
        k1[self.n1 // 2, :] = 0.0
        k2[:, self.n2 // 2] = 0.0
        return 1j * k1, 1j * k2

    @cached_property
    def ksq(self):
        k1, k2 = self.wavenumbers
        return k1**2 + k2**2

    @cached_property
    def full_wavenumbers(self):
        """``(k1, k2)`` on the full complex spectrum of shape ``(n1, n2)``."""
        k1 = 2 * np.pi * np.fft.fftfreq(self.n1, d=self.extents[0] / self.n1)
        k2 = 2 * np.pi * np.fft.fftfreq(self.n2, d=self.extents[1] / self.n2)
        return np.meshgrid(k1, k2, indexing="ij")

    @cached_property
    def full_odd_symbols(self):
        k1, k2 = (k.copy() for k in self.full_wavenumbers)
        k1[self.n1 // 2, :] = 0.0
        k2[:, self.n2 // 2] = 0.0
        return 1j * k1, 1j * k2

    @cached_property
    def full_ksq(self):
        k1, k2 = self.full_wavenumbers
        return k1**2 + k2**2

    def fft_full(self, v):
        return sfft.fft2(v)

    def ifft_full(self, vh):
        return sfft.ifft2(vh).real

    def wavevector(self, m1, m2):
        return (2 * np.pi * m1 / self.extents[0], 2 * np.pi * m2 / self.extents[1])

    def mode_index(self, m1, m2):
        """Index into the spectral array for integer mode ``(m1, m2)``, ``m2 >= 0``."""
        if m2 < 0:
            raise ValueError("real transforms store only m2 >= 0")
        return (m1 % self.n1, m2)

    def fft(self, v):
        return sfft.rfft2(v)

    def ifft(self, vh):
        return sfft.irfft2(vh, s=self.shape)

    def integrate(self, f):
        """Rectangle rule (spectrally accurate for smooth periodic integrands)."""
        return float(np.sum(f) * self.cell_area)

    def inner(self, u, v):
        return self.integrate(u * v)

    def norm(self, v):
        return np.sqrt(self.inner(v, v))


def build_grid(n1, n2, extents=(2 * np.pi, 2 * np.pi), origin=(0.0, 0.0)):
    for n in (n1, n2):
        if int(n) != n or n < 8 or n % 2:
            raise BadGridSize(f"grid sizes must be even integers >= 8, got {n}")
    if min(extents) <= 0:
        raise BadGridSize(f"extents must be positive, got {extents}")
    return SpectralGrid(int(n1), int(n2), tuple(float(e) for e in extents),
                        tuple(float(o) for o in origin))


def grad(v, grid):
    vh = grid.fft(v)
    ik1, ik2 = grid._odd_symbols
    return grid.ifft(ik1 * vh), grid.ifft(ik2 * vh)


def div(f1, f2, grid):
    ik1, ik2 = grid._odd_symbols
    return grid.ifft(ik1 * grid.fft(f1) + ik2 * grid.fft(f2))


def laplacian(v, grid):
    return grid.ifft(-grid.ksq * grid.fft(v))


def biharmonic(v, grid):
    return grid.ifft(grid.ksq**2 * grid.fft(v))


def hessian(v, grid):
    """Second partials ``(v_11, v_12, v_22)``."""
    vh = grid.fft(v)
    k1, k2 = grid.wavenumbers
    ik1, ik2 = grid._odd_symbols
    return grid.ifft(-(k1**2) * vh), grid.ifft(ik1 * ik2 * vh), grid.ifft(-(k2**2) * vh)


_KINDS = {
    "grad": grad,
    "div": div,
    "laplacian": laplacian,
    "biharmonic": biharmonic,
    "hessian": hessian,
}


def differential(kind, *fields, grid):
    """Dispatch to one of ``grad``, ``div``, ``laplacian``, ``biharmonic``, ``hessian``."""
    try:
        op = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown differential kind {kind!r}") from None
    return op(*fields, grid)
