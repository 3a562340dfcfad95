"""Local augmented RBF stencil interpolation.

Each node gets a stencil of itself plus its n-1 nearest neighbors.  On every
stencil a PHS interpolant augmented with spherical harmonics is set up as a
saddle-point system; interpolation conditions fill the top block, harmonic
moment conditions the bottom.  All systems are LU-factorized once up front
(the PHS kernel is scale-free, so each stencil is assembled in locally
rescaled distances to keep the factorizations accurate).  Evaluation at a
target point uses the stencil whose center is the target's nearest node.

The per-step work runs as batched numpy operations over all targets: the
stored factors are kept in stacked arrays and the triangular solves are
vectorized over the whole target chunk, row by row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .basis import SHBasis, sh_degree_for_stencil, sh_eval
from .errors import ConfigurationError, SingularMatrixError
from .geometry import NodeSet

_CHUNK = 2048
# numerical backstop against catastrophic breakdown; duplicate nodes are
# already rejected at NodeSet construction
_SINGULAR_PIVOT_REL = 1e-18
# restricted to a small cap, the (L+1)^2 spherical harmonics degenerate
# toward the much smaller space of tangent-plane polynomials; directions of
# the evaluated harmonic block below this relative singular value are
# dropped, which keeps every saddle system well conditioned (the dropped
# directions are represented by the retained ones on the stencil to the
# same tolerance, so harmonic reproduction is preserved)
_AUG_DROP_REL = 1e-10


def orthonormal_augmentation(p: np.ndarray):
    """Orthonormalize stacked harmonic blocks `p` (c, n, dim).

    Returns (q, w): q holds orthonormal augmentation columns (near-dependent
    directions zeroed) and w the (c, dim, dim) basis transforms such that
    q = p @ w; evaluating the augmentation at a point x is sh_eval(x) @ w.
    """
    u, s, vt = np.linalg.svd(p, full_matrices=False)
    keep = s > _AUG_DROP_REL * s[:, :1]
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    q = np.where(keep[:, None, :], u, 0.0)
    w = np.transpose(vt, (0, 2, 1)) * inv_s[:, None, :]
    return q, w


def _stencil_systems(pts, scales, phs_exp, sh: SHBasis):
    """Stacked saddle matrices for stencil member coordinates `pts` (c, n, 3).

    Returns (systems, transforms); the augmentation block is orthonormalized
    per stencil and dropped directions get a unit diagonal entry in the
    lower-right block so every system keeps the same size.
    """
    c, n, _ = pts.shape
    dim = sh.dim
    m = n + dim
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    rr = np.sqrt(np.einsum("cijk,cijk->cij", diff, diff))
    rr /= scales[:, None, None]
    systems = np.zeros((c, m, m))
    systems[:, :n, :n] = rr**phs_exp
    p = sh_eval(sh, pts.reshape(-1, 3)).reshape(c, n, dim)
    q, w = orthonormal_augmentation(p)
    systems[:, :n, n:] = q
    systems[:, n:, :n] = np.transpose(q, (0, 2, 1))
    dropped = np.einsum("cij,cij->cj", q, q) == 0.0
    idx = np.arange(dim)
    systems[:, n + idx, n + idx] = dropped.astype(float)
    return systems, w


def _pivots_to_permutation(piv: np.ndarray) -> np.ndarray:
    perm = np.arange(piv.shape[0])
    for i, p in enumerate(piv):
        perm[i], perm[p] = perm[p], perm[i]
    return perm


def _batched_lu_solve(lu_f: np.ndarray, perms: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve per-row systems given stacked LU factors (T, m, m).

    `perms` holds the row permutation of each system; L has unit diagonal.
    """
    m = lu_f.shape[1]
    y = np.take_along_axis(rhs, perms, axis=1)
    for i in range(1, m):
        y[:, i] -= np.einsum("tj,tj->t", lu_f[:, i, :i], y[:, :i])
    for i in range(m - 1, -1, -1):
        if i < m - 1:
            y[:, i] -= np.einsum("tj,tj->t", lu_f[:, i, i + 1:], y[:, i + 1:])
        y[:, i] /= lu_f[:, i, i]
    return y


@dataclass
class LocalInterpolator:
    """All N stencils of one node set, with their factorized saddle systems."""

    nodes: NodeSet
    n: int
    sh: SHBasis
    phs_order: int
    members: np.ndarray = field(repr=False)  # (N, n) indices, ascending distance
    scales: np.ndarray = field(repr=False)  # (N,) per-stencil distance scale
    lu_factors: np.ndarray = field(repr=False)  # (N, n+dim, n+dim)
    perms: np.ndarray = field(repr=False)  # (N, n+dim) row permutations
    aug_transforms: np.ndarray = field(repr=False)  # (N, dim, dim) basis maps

    @property
    def system_size(self) -> int:
        return self.n + self.sh.dim

    def fit_stencil(self, center_index: int, values_on_members) -> np.ndarray:
        """Coefficients (c || d) of one stencil for the given member values."""
        values = np.asarray(values_on_members, dtype=float)
        if values.shape != (self.n,):
            raise ConfigurationError(f"expected {self.n} member values")
        rhs = np.concatenate([values, np.zeros(self.sh.dim)])[None, :]
        return _batched_lu_solve(
            self.lu_factors[center_index][None], self.perms[center_index][None], rhs
        )[0]

    def eval_stencil(self, center_index: int, coeffs, targets) -> np.ndarray:
        """Evaluate one fitted stencil interpolant at arbitrary points."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        pts = self.nodes.points[self.members[center_index]]
        r = np.linalg.norm(targets[:, None, :] - pts[None, :, :], axis=-1)
        r /= self.scales[center_index]
        aug = sh_eval(self.sh, targets) @ self.aug_transforms[center_index]
        e = np.concatenate([r**(2 * self.phs_order + 1), aug], axis=1)
        return e @ coeffs

    def eval(self, field_values, targets) -> np.ndarray:
        return eval_local(self, field_values, targets)


def build_stencils(nodes: NodeSet, n: int) -> LocalInterpolator:
    """Find every node's n-point stencil and factorize all saddle systems."""
    sh, phs_order = sh_degree_for_stencil(n)
    if n <= sh.dim:
        raise ConfigurationError(
            f"stencil size {n} does not exceed the harmonic dimension {sh.dim}"
        )
    if n > nodes.n_nodes:
        raise ConfigurationError(f"stencil size {n} exceeds node count {nodes.n_nodes}")
    # query a few extra neighbors so exact distance ties can be broken by
    # smallest index, matching knn()
    kq = min(n + 8, nodes.n_nodes)
    dists, members = nodes.tree.query(nodes.points, k=kq)
    members = np.atleast_2d(members)
    dists = np.atleast_2d(dists)
    order = np.lexsort((members, dists), axis=-1)
    members = np.take_along_axis(members, order, axis=1)[:, :n]
    dists = np.take_along_axis(dists, order, axis=1)[:, :n]
    # rescale each stencil by its bounding diameter so the PHS block stays
    # O(1); this keeps the saddle systems comfortably factorable
    scales = 2.0 * dists[:, -1]
    if np.any(scales == 0.0):
        raise ConfigurationError("degenerate stencil: duplicate nodes")

    m = n + sh.dim
    phs_exp = 2 * phs_order + 1
    lu_factors = np.empty((nodes.n_nodes, m, m))
    perms = np.empty((nodes.n_nodes, m), dtype=np.intp)
    aug_transforms = np.empty((nodes.n_nodes, sh.dim, sh.dim))
    for i0 in range(0, nodes.n_nodes, _CHUNK):
        i1 = min(i0 + _CHUNK, nodes.n_nodes)
        systems, aug_transforms[i0:i1] = _stencil_systems(
            nodes.points[members[i0:i1]], scales[i0:i1], phs_exp, sh
        )
        for k in range(i0, i1):
            system = systems[k - i0]
            lu_f, piv = sla.lu_factor(system, overwrite_a=True, check_finite=False)
            if np.abs(np.diag(lu_f)).min() < _SINGULAR_PIVOT_REL * np.abs(lu_f).max():
                raise SingularMatrixError(f"singular stencil system at center node {k}")
            lu_factors[k] = lu_f
            perms[k] = _pivots_to_permutation(piv)
    return LocalInterpolator(
        nodes=nodes,
        n=n,
        sh=sh,
        phs_order=phs_order,
        members=members,
        scales=scales,
        lu_factors=lu_factors,
        perms=perms,
        aug_transforms=aug_transforms,
    )


def eval_local(interp: LocalInterpolator, field_values, targets) -> np.ndarray:
    """Interpolate nodal `field_values` to `targets`.

    Each target is served by the stencil centered at its nearest node.
    """
    field_values = np.asarray(field_values, dtype=float)
    if field_values.shape != (interp.nodes.n_nodes,):
        raise ConfigurationError("field length does not match node count")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n = interp.n
    phs_exp = 2 * interp.phs_order + 1
    _, centers = interp.nodes.tree.query(targets)
    centers = np.atleast_1d(centers)
    out = np.empty(targets.shape[0])
    for i0 in range(0, targets.shape[0], _CHUNK):
        i1 = min(i0 + _CHUNK, targets.shape[0])
        kc = centers[i0:i1]
        mem = interp.members[kc]
        rhs = np.zeros((i1 - i0, interp.system_size))
        rhs[:, :n] = field_values[mem]
        coeffs = _batched_lu_solve(interp.lu_factors[kc], interp.perms[kc], rhs)
        pts = interp.nodes.points[mem]
        r = np.linalg.norm(targets[i0:i1, None, :] - pts, axis=-1)
        r /= interp.scales[kc, None]
        aug = np.einsum(
            "ij,ijk->ik", sh_eval(interp.sh, targets[i0:i1]), interp.aug_transforms[kc]
        )
        e = np.concatenate([r**phs_exp, aug], axis=1)
        out[i0:i1] = np.einsum("ij,ij->i", e, coeffs)
    return out
