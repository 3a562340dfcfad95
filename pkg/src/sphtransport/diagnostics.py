"""Error norms, dissipation/dispersion decomposition, and mass traces.

Surface integrals use a plain equal-weight rule (4*pi/N per node), which is
second-order accurate on quasi-uniform node sets.  That floor is what limits
the resolution of the mass-error traces; relative error norms are plain
vector norms over the nodal values and are not quadrature-limited.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .geometry import NodeSet

SPHERE_AREA = 4.0 * np.pi


@dataclass(frozen=True)
class QuadratureRule:
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def mean(self, values) -> float:
        return self.integrate(values) / SPHERE_AREA

    def std(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return float(np.sqrt(max(0.0, self.mean((values - self.mean(values)) ** 2))))


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    rel_l2: Optional[float]
    rel_linf: Optional[float]
    dissipation: Optional[float]
    dispersion: Optional[float]
    mass_error: float
    field_min: float
    field_max: float

    CSV_HEADER = "time,rel_l2,rel_linf,dissipation,dispersion,mass_error,field_min,field_max"

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return ",".join(
            [
                repr(float(self.time)),
                fmt(self.rel_l2),
                fmt(self.rel_linf),
                fmt(self.dissipation),
                fmt(self.dispersion),
                repr(float(self.mass_error)),
                repr(float(self.field_min)),
                repr(float(self.field_max)),
            ]
        )


def equal_weight_rule(nodes: NodeSet) -> QuadratureRule:
    """Equal-weight quadrature: every node carries 4*pi/N."""
    n = nodes.n_nodes
    return QuadratureRule(weights=np.full(n, SPHERE_AREA / n))


def rel_norms(q_num, q_exact) -> tuple[float, float]:
    """Relative l2 and l-infinity errors over the nodal values."""
    q_num = np.asarray(q_num, dtype=float)
    q_exact = np.asarray(q_exact, dtype=float)
    if q_num.shape != q_exact.shape:
        raise ConfigurationError("fields live on different node sets")
    denom2 = np.linalg.norm(q_exact)
    denom_inf = np.abs(q_exact).max() if q_exact.size else 0.0
    if denom2 == 0.0:
        raise ConfigurationError("exact field is identically zero")
    err = q_num - q_exact
    return float(np.linalg.norm(err) / denom2), float(np.abs(err).max() / denom_inf)


def dissipation_dispersion(q_num, q_exact, rule: QuadratureRule) -> tuple[float, float]:
    """Mean-square-error split into amplitude and correlation parts.

    Both components are returned relative to the mean square error, so they
    sum to one; an exact solution returns (0, 0) by convention.
    """
    q_num = np.asarray(q_num, dtype=float)
    q_exact = np.asarray(q_exact, dtype=float)
    mean_e, mean_n = rule.mean(q_exact), rule.mean(q_num)
    sig_e, sig_n = rule.std(q_exact), rule.std(q_num)
    mse = rule.mean((q_exact - q_num) ** 2)
    if mse == 0.0:
        return 0.0, 0.0
    covar = rule.mean((q_exact - mean_e) * (q_num - mean_n))
    dissipation = (sig_e - sig_n) ** 2 + (mean_e - mean_n) ** 2
    dispersion = 2.0 * (sig_e * sig_n - covar)
    return dissipation / mse, dispersion / mse


def mass_error(q_num, q_exact, rule: QuadratureRule) -> float:
    """Absolute error in the mean of the field over the sphere."""
    return abs(rule.mean(np.asarray(q_exact, float) - np.asarray(q_num, float)))


def fit_convergence_rate(pairs) -> float:
    """Fitted order p from (N, error) pairs, error ~ C * N^(-p/2).

    With four or more data points the first (coarsest) one is excluded.
    """
    pairs = sorted((float(n), float(e)) for n, e in pairs)
    if len(pairs) < 2:
        raise ConfigurationError("need at least two (N, error) pairs")
    if any(e <= 0.0 for _, e in pairs):
        raise ConfigurationError("errors must be positive")
    if len(pairs) >= 4:
        pairs = pairs[1:]
    x = np.log([np.sqrt(n) for n, _ in pairs])
    y = np.log([e for _, e in pairs])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def make_record(
    q_num,
    time: float,
    rule: QuadratureRule,
    q_exact=None,
    reference_mass: float | None = None,
) -> DiagnosticsRecord:
    """Assemble one checkpoint record.

    Error-based entries are filled only when an exact field is available;
    the mass error falls back to `reference_mass` (the conserved initial
    mass) when given.
    """
    q_num = np.asarray(q_num, dtype=float)
    if q_exact is not None:
        l2, linf = rel_norms(q_num, q_exact)
        diss, disp = dissipation_dispersion(q_num, q_exact, rule)
        merr = mass_error(q_num, q_exact, rule)
    else:
        l2 = linf = diss = disp = None
        if reference_mass is None:
            raise ConfigurationError("need an exact field or a reference mass")
        merr = abs(reference_mass - rule.mean(q_num))
    return DiagnosticsRecord(
        time=time,
        rel_l2=l2,
        rel_linf=linf,
        dissipation=diss,
        dispersion=disp,
        mass_error=merr,
        field_min=float(q_num.min()),
        field_max=float(q_num.max()),
    )
