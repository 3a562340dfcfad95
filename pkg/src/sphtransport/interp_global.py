"""Global RBF interpolation on the full node set.

One dense IMQ system is assembled and Cholesky-factorized once; fitting a
field is a triangular solve and evaluation is a dense kernel mat-vec.  The
shape parameter can be given explicitly or auto-selected so the factorization
succeeds with an estimated condition number below a cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .basis import KernelSpec, kernel_eval
from .errors import ConfigurationError, NotPositiveDefiniteError
from .geometry import NodeSet

DEFAULT_MAX_CONDITION = 1e12
_CHUNK = 1024


def _pairwise_distances(a: np.ndarray, b: np.ndarray, out=None) -> np.ndarray:
    """Euclidean distances between on-sphere point sets, chunked over rows."""
    if out is None:
        out = np.empty((a.shape[0], b.shape[0]))
    for i0 in range(0, a.shape[0], _CHUNK):
        i1 = min(i0 + _CHUNK, a.shape[0])
        r2 = 2.0 - 2.0 * (a[i0:i1] @ b.T)
        np.sqrt(np.maximum(r2, 0.0), out=out[i0:i1])
    return out


@dataclass
class GlobalInterpolant:
    nodes: NodeSet
    kernel: KernelSpec
    factorization: linalg.Factorization = field(repr=False)
    condition: float
    coeffs: np.ndarray | None = field(default=None, repr=False)

    def fit(self, values: np.ndarray) -> np.ndarray:
        return fit_global(self, values)

    def eval(self, targets: np.ndarray) -> np.ndarray:
        return eval_global(self, targets)


def _try_factorize(r: np.ndarray, epsilon: float, max_condition: float):
    a = 1.0 / np.sqrt(1.0 + (epsilon * r) ** 2)
    try:
        f = linalg.cholesky(a, overwrite_a=True)
    except NotPositiveDefiniteError:
        return None
    cond = linalg.condition_estimate(f)
    if cond > max_condition:
        return None
    return f, cond


def build_global(
    nodes: NodeSet,
    epsilon: float | None = None,
    max_condition: float = DEFAULT_MAX_CONDITION,
) -> GlobalInterpolant:
    """Assemble and factorize the dense IMQ system for `nodes`.

    With `epsilon=None` the shape parameter is chosen by a doubling/halving
    search for the smallest value whose Cholesky factorization succeeds with
    condition estimate <= `max_condition`.  The search starts from a spacing
    aware guess, so typically only a few trial factorizations are needed.
    """
    r = _pairwise_distances(nodes.points, nodes.points)
    if epsilon is not None:
        result = _try_factorize(r, epsilon, np.inf)
        if result is None:
            raise NotPositiveDefiniteError(
                f"IMQ system with epsilon={epsilon} is not positive definite; "
                "try a larger epsilon"
            )
        f, cond = result
        if cond > max_condition:
            # explicit epsilon is honored even when badly conditioned
            pass
        return GlobalInterpolant(
            nodes=nodes, kernel=KernelSpec.imq(epsilon), factorization=f, condition=cond
        )

    eps = max(0.5, 0.02 * np.sqrt(nodes.n_nodes))
    result = _try_factorize(r, eps, max_condition)
    bracketed = True
    if result is None:
        for _ in range(60):
            eps *= 2.0
            result = _try_factorize(r, eps, max_condition)
            if result is not None:
                break
        else:
            raise NotPositiveDefiniteError("auto-epsilon search failed to converge")
    else:
        # feasible at the initial guess: halve towards the accuracy-optimal
        # (smallest feasible) value
        bracketed = False
        while eps > 2 ** -10:
            trial = _try_factorize(r, eps / 2.0, max_condition)
            if trial is None:
                bracketed = True
                break
            eps /= 2.0
            result = trial
    if bracketed:
        # smaller epsilon means a flatter, more accurate kernel, so refine
        # within the bracket (eps/2 infeasible, eps feasible) towards the
        # smallest epsilon that still clears the condition cap
        lo, hi = eps / 2.0, eps
        for _ in range(4):
            mid = np.sqrt(lo * hi)
            trial = _try_factorize(r, mid, max_condition)
            if trial is None:
                lo = mid
            else:
                hi, result = mid, trial
        eps = hi
    f, cond = result
    return GlobalInterpolant(
        nodes=nodes, kernel=KernelSpec.imq(eps), factorization=f, condition=cond
    )


def fit_global(gi: GlobalInterpolant, values: np.ndarray) -> np.ndarray:
    """Solve for the expansion coefficients of the nodal data `values`."""
    values = np.asarray(values, dtype=float)
    if values.shape != (gi.nodes.n_nodes,):
        raise ConfigurationError(
            f"expected {gi.nodes.n_nodes} nodal values, got shape {values.shape}"
        )
    gi.coeffs = linalg.solve(gi.factorization, values)
    return gi.coeffs


def eval_global(gi: GlobalInterpolant, targets: np.ndarray) -> np.ndarray:
    """Evaluate the fitted interpolant at arbitrary on-sphere points."""
    if gi.coeffs is None:
        raise ConfigurationError("fit_global must be called before eval_global")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.empty(targets.shape[0])
    for i0 in range(0, targets.shape[0], _CHUNK):
        i1 = min(i0 + _CHUNK, targets.shape[0])
        r = _pairwise_distances(targets[i0:i1], gi.nodes.points)
        out[i0:i1] = kernel_eval(gi.kernel, r) @ gi.coeffs
    return out
