"""Velocity fields and initial conditions for the standard transport tests.

All velocities are delivered in Cartesian form: the zonal/meridional
components (u, v) are combined with the local (lambda_hat, theta_hat) basis.
The orientation convention is pinned so that solid-body rotation with
alpha = pi/2 moves the point (1, 0, 0) toward +z, i.e. over the poles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .geometry import from_cartesian, spherical_basis
from .transport import VelocityField

COSINE_BELL_RADIUS = 1.0 / 3.0
DEFORM_PERIOD = 5.0
BELL_CENTER_1 = np.array([np.sqrt(3.0) / 2.0, 0.5, 0.0])
BELL_CENTER_2 = np.array([np.sqrt(3.0) / 2.0, -0.5, 0.0])


def _combine(points, u, v):
    lam, theta = from_cartesian(points)
    lam_hat, theta_hat = spherical_basis(lam, theta)
    return u[..., None] * lam_hat + v[..., None] * theta_hat


def solid_body_velocity(alpha: float = np.pi / 2.0) -> VelocityField:
    """Steady rotation tilted by `alpha` from the equatorial plane."""

    def evaluator(points, t):
        points = np.atleast_2d(points)
        lam, theta = from_cartesian(points)
        u = np.sin(theta) * np.sin(lam) * np.sin(alpha) - np.cos(theta) * np.cos(alpha)
        v = np.cos(lam) * np.sin(alpha)
        return _combine(points, u, v)

    return VelocityField.from_function(evaluator)


def solid_body_axis(alpha: float) -> np.ndarray:
    """Unit angular-velocity vector of the solid-body flow (period 2*pi)."""
    return np.array([0.0, -np.sin(alpha), -np.cos(alpha)])


def rotate_about_axis(points, axis, angle):
    """Rodrigues rotation of point(s) about a unit axis."""
    points = np.asarray(points, dtype=float)
    axis = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    cross = np.cross(np.broadcast_to(axis, points.shape), points)
    dot = points @ axis
    return c * points + s * cross + (1.0 - c) * dot[..., None] * axis


def cosine_bell_ic(points) -> np.ndarray:
    """Williamson cosine bell centered at (1, 0, 0), support radius 1/3."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.arccos(np.clip(points[:, 0], -1.0, 1.0))
    vals = np.where(
        r < COSINE_BELL_RADIUS,
        0.5 * (1.0 + np.cos(np.pi * r / COSINE_BELL_RADIUS)),
        0.0,
    )
    return vals


def deformational_velocity() -> VelocityField:
    """Reversing deformational flow with a zonal background rotation."""
    big_t = DEFORM_PERIOD

    def evaluator(points, t):
        points = np.atleast_2d(points)
        lam, theta = from_cartesian(points)
        lam_p = lam - 2.0 * np.pi * t / big_t
        amp = (10.0 / big_t) * np.cos(np.pi * t / big_t)
        u = amp * np.sin(lam_p) ** 2 * np.sin(2.0 * theta) + (2.0 * np.pi / big_t) * np.cos(theta)
        # sin(2*lam_p), not sin(2*lam - 2*pi*t/T): only the former makes the
        # deformational part autonomous in the rotating frame, which is what
        # guarantees the flow returns the tracer to its start at t = T
        v = amp * np.sin(2.0 * lam_p) * np.cos(theta)
        return _combine(points, u, v)

    return VelocityField.from_function(evaluator)


def deform_cosine_ic(points) -> np.ndarray:
    """Two C^1 cosine bells on a 0.1 background."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(points.shape[0])
    for center in (BELL_CENTER_1, BELL_CENTER_2):
        r = np.arccos(np.clip(points @ center, -1.0, 1.0))
        total += np.where(r < 0.5, 0.5 * (1.0 + np.cos(2.0 * np.pi * r)), 0.0)
    return 0.1 + 0.9 * total


def deform_gauss_ic(points) -> np.ndarray:
    """Two smooth Gaussian bells."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(points.shape[0])
    for center in (BELL_CENTER_1, BELL_CENTER_2):
        d2 = np.sum((points - center) ** 2, axis=1)
        total += np.exp(-5.0 * d2)
    return 0.95 * total


@dataclass(frozen=True)
class TestCase:
    name: str
    velocity: VelocityField
    initial: Callable[[np.ndarray], np.ndarray]
    t_final_default: float
    exact_at: Optional[Callable[[float], Callable[[np.ndarray], np.ndarray]]] = None

    def has_exact(self, t: float) -> bool:
        if self.exact_at is None:
            return False
        try:
            self.exact_at(t)
        except ConfigurationError:
            return False
        return True


def get_testcase(name: str, alpha: float = np.pi / 2.0) -> TestCase:
    if name == "sbr-cosine":
        axis = solid_body_axis(alpha)

        def exact_at(t):
            def exact(points):
                return cosine_bell_ic(rotate_about_axis(points, axis, -t))

            return exact

        return TestCase(
            name=name,
            velocity=solid_body_velocity(alpha),
            initial=cosine_bell_ic,
            t_final_default=2.0 * np.pi,
            exact_at=exact_at,
        )
    if name in ("deform-cosine", "deform-gauss"):
        ic = deform_cosine_ic if name == "deform-cosine" else deform_gauss_ic

        def exact_at(t):
            # the flow reverses itself: the exact solution is known only at
            # multiples of the period, where it equals the initial condition
            cycles = t / DEFORM_PERIOD
            if abs(cycles - round(cycles)) > 1e-10:
                raise ConfigurationError(
                    f"no analytic solution at t={t} for {name!r}"
                )
            return ic

        return TestCase(
            name=name,
            velocity=deformational_velocity(),
            initial=ic,
            t_final_default=DEFORM_PERIOD,
            exact_at=exact_at,
        )
    raise ConfigurationError(f"unknown test case {name!r}")
