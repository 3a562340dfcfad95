"""Radial kernels and real spherical harmonics.

Two kernel families are used: the inverse multiquadric (IMQ) for the global
interpolant and polyharmonic splines (PHS) for the local stencil / partition
of unity interpolants.  The spherical harmonics are the real orthonormal
basis, evaluated with a stable normalized associated-Legendre recurrence in
z = cos(colatitude).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # "imq" or "phs"
    epsilon: float = 1.0
    phs_order: int = 1

    def __post_init__(self):
        if self.kind not in ("imq", "phs"):
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "imq" and self.epsilon <= 0.0:
            raise ConfigurationError("IMQ shape parameter must be positive")
        if self.kind == "phs" and self.phs_order < 0:
            raise ConfigurationError("PHS order must be non-negative")

    @classmethod
    def imq(cls, epsilon: float) -> "KernelSpec":
        return cls(kind="imq", epsilon=epsilon)

    @classmethod
    def phs(cls, order: int) -> "KernelSpec":
        return cls(kind="phs", phs_order=order)


def kernel_eval(spec: KernelSpec, r):
    """Evaluate the radial kernel at distance(s) r >= 0.

    IMQ: (1 + (eps*r)^2)^(-1/2).  PHS: r^(2k+1).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ConfigurationError("kernel argument must be non-negative")
    if spec.kind == "imq":
        return 1.0 / np.sqrt(1.0 + (spec.epsilon * r) ** 2)
    return r ** (2 * spec.phs_order + 1)


@dataclass(frozen=True)
class SHBasis:
    degree_L: int

    @property
    def dim(self) -> int:
        return (self.degree_L + 1) ** 2


def sh_degree_for_stencil(n: int) -> tuple[SHBasis, int]:
    """Harmonic degree L = floor((sqrt(n)-1)/2) and PHS order k for a
    stencil/patch of nominal size n.

    k = L, except that k is floored at 1 so the kernel is never rougher
    than r^3.
    """
    if n < 1:
        raise ConfigurationError("stencil size must be at least 1")
    degree = int(np.floor(0.5 * (np.sqrt(n) - 1.0)))
    return SHBasis(degree_L=degree), max(degree, 1)


def sh_eval(basis: SHBasis, x) -> np.ndarray:
    """Evaluate all (L+1)^2 real orthonormal spherical harmonics.

    `x` is a point or an (M, 3) array of on-sphere points.  Output order is
    degree-major with order ascending within each degree:
    [Y_0^0, Y_1^-1, Y_1^0, Y_1^1, Y_2^-2, ...].
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    L = basis.degree_L
    z = np.clip(pts[:, 2], -1.0, 1.0)
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    lam = np.arctan2(pts[:, 1], pts[:, 0])

    # slm[(l, m)] = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!) * P_l^m(z), m >= 0
    slm = {}
    slm[(0, 0)] = np.full(pts.shape[0], 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(1, L + 1):
        slm[(m, m)] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * slm[(m - 1, m - 1)]
    for m in range(0, L):
        slm[(m + 1, m)] = np.sqrt(2.0 * m + 3.0) * z * slm[(m, m)]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            slm[(l, m)] = a * (z * slm[(l - 1, m)] - b * slm[(l - 2, m)])

    out = np.empty((pts.shape[0], basis.dim))
    col = 0
    sqrt2 = np.sqrt(2.0)
    for l in range(L + 1):
        for m in range(-l, l + 1):
            if m < 0:
                out[:, col] = sqrt2 * slm[(l, -m)] * np.sin(-m * lam)
            elif m == 0:
                out[:, col] = slm[(l, 0)]
            else:
                out[:, col] = sqrt2 * slm[(l, m)] * np.cos(m * lam)
            col += 1
    return out[0] if single else out
