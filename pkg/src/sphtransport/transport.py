"""Semi-Lagrangian time stepping on the sphere.

Each step traces every Eulerian node backward through the velocity field with
a fixed-step fifth-order Runge-Kutta-Fehlberg integrator (projecting onto the
sphere after every stage), then interpolates the current field to those
departure points with the configured RBF backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import interp_global, interp_local, interp_pu
from .errors import ConfigurationError, SphTransportError
from .geometry import NodeSet, project_to_sphere

# Fehlberg 6-stage tableau; only the fifth-order solution weights are used
# (fixed time step, no adaptivity).
_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_RKF_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


@dataclass
class ScalarField:
    values: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class VelocityField:
    """Time-dependent tangent vector field, u(points, t) -> (M, 3) array."""

    evaluator: object

    def __call__(self, points, t):
        return self.evaluator(points, t)

    @classmethod
    def from_function(cls, fn, check_tangency: bool = True) -> "VelocityField":
        vf = cls(evaluator=fn)
        if check_tangency:
            rng = np.random.default_rng(7)
            pts = project_to_sphere(rng.standard_normal((64, 3)))
            for t in (0.0, 0.77, 2.5):
                u = fn(pts, t)
                if np.abs(np.einsum("ij,ij->i", u, pts)).max() > 1e-12:
                    raise ConfigurationError("velocity field is not tangent to the sphere")
        return vf


@dataclass
class SLConfig:
    dt: float
    t_final: float
    method: str = "local"  # "global", "local", or "pu"
    n: int = 31
    a: float = interp_pu.DEFAULT_MULTIPLICITY
    epsilon: float | None = None
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if self.method not in ("global", "local", "pu"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        steps = self.t_final / self.dt
        if steps < 1 or abs(steps - round(steps)) > 1e-12 * max(1.0, steps):
            raise ConfigurationError("t_final must be a positive multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


def rk5_backward_step(u: VelocityField, x, t_arrive: float, dt: float):
    """Trace point(s) from t_arrive back to t_arrive - dt along the flow."""
    x = np.asarray(x, dtype=float)
    h = -dt
    stages = []
    for i in range(6):
        xi = x
        if stages:
            incr = sum(aij * kj for aij, kj in zip(_RKF_A[i], stages))
            xi = project_to_sphere(x + h * incr)
        stages.append(np.asarray(u(np.atleast_2d(xi), t_arrive + _RKF_C[i] * h)).reshape(xi.shape))
    total = sum(bi * ki for bi, ki in zip(_RKF_B5, stages))
    return project_to_sphere(x + h * total)


def compute_departures(u: VelocityField, nodes: NodeSet, t_arrive: float, dt: float):
    """Departure points of all nodes for arrival time t_arrive."""
    return rk5_backward_step(u, nodes.points, t_arrive, dt)


def build_backend(cfg: SLConfig, nodes: NodeSet, patch_centers: NodeSet | None = None):
    """Construct the interpolation backend named by cfg.method."""
    if cfg.method == "global":
        gi = interp_global.build_global(nodes, epsilon=cfg.epsilon)
        return _GlobalBackend(gi)
    if cfg.method == "local":
        return _LocalBackend(interp_local.build_stencils(nodes, cfg.n))
    return _PUBackend(interp_pu.build_cover(nodes, cfg.n, cfg.a, patch_centers))


@dataclass
class _GlobalBackend:
    interpolant: interp_global.GlobalInterpolant

    def eval(self, values, targets):
        interp_global.fit_global(self.interpolant, values)
        return interp_global.eval_global(self.interpolant, targets)


@dataclass
class _LocalBackend:
    interpolant: interp_local.LocalInterpolator

    def eval(self, values, targets):
        return interp_local.eval_local(self.interpolant, values, targets)


@dataclass
class _PUBackend:
    cover: interp_pu.PUCover

    def eval(self, values, targets):
        return interp_pu.eval_pu(self.cover, values, targets)


def sl_advect(
    cfg: SLConfig,
    u: VelocityField,
    nodes: NodeSet,
    q0: ScalarField,
    backend=None,
    checkpoint=None,
    diagnostics_fn=None,
) -> ScalarField:
    """Run the advection loop and return the field at t_final.

    `checkpoint(step, time, values, record)` is invoked with a read-only view
    of the nodal values every `checkpoint_every` steps (and at step 0);
    `record` is `diagnostics_fn(values, time)` when that callback is given.
    """
    values = np.asarray(q0.values, dtype=float)
    if values.shape != (nodes.n_nodes,):
        raise ConfigurationError("initial field length does not match node count")
    if backend is None:
        backend = build_backend(cfg, nodes)

    def emit(step, t, vals):
        if checkpoint is None:
            return
        record = diagnostics_fn(vals, t) if diagnostics_fn is not None else None
        view = vals.view()
        view.flags.writeable = False
        checkpoint(step, t, view, record)

    emit(0, 0.0, values)
    for m in range(cfg.n_steps):
        t_arrive = (m + 1) * cfg.dt
        departures = compute_departures(u, nodes, t_arrive, cfg.dt)
        values = np.asarray(backend.eval(values, departures))
        if not np.all(np.isfinite(values)):
            raise SphTransportError(f"non-finite field values at step {m + 1}")
        if (m + 1) % cfg.checkpoint_every == 0 or m + 1 == cfg.n_steps:
            emit(m + 1, t_arrive, values)
    return ScalarField(values=values, time=cfg.n_steps * cfg.dt)
