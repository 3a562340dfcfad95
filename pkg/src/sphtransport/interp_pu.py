"""RBF partition-of-unity interpolation on overlapping spherical caps.

The sphere is covered by M = ceil(a*N/n) caps of common Euclidean radius
R = 2*sqrt(n/N); each cap carries an augmented PHS + spherical-harmonic
interpolant over the nodes it contains, and the cap interpolants are blended
with normalized cubic B-spline weights.  Patch systems are LU-factorized
once at build; fitting per step is one small triangular solve per patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.spatial import cKDTree

from .basis import SHBasis, sh_degree_for_stencil, sh_eval
from .errors import ConfigurationError, SingularMatrixError
from .geometry import NodeSet, project_to_sphere
from .interp_local import orthonormal_augmentation

DEFAULT_MULTIPLICITY = 2.5


def bspline_weight(r):
    """Radially symmetric cubic B-spline, supported on [0, 1)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ConfigurationError("weight argument must be non-negative")
    out = np.where(
        r < 0.5,
        2.0 / 3.0 + 4.0 * (r - 1.0) * r * r,
        np.where(r < 1.0, -4.0 / 3.0 * (r - 1.0) ** 3, 0.0),
    )
    return out if out.ndim else float(out)


def fibonacci_nodes(count: int) -> NodeSet:
    """Quasi-uniform golden-spiral point set of exactly `count` points."""
    if count < 1:
        raise ConfigurationError("need at least one point")
    i = np.arange(count, dtype=float)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / count
    lam = 2.0 * np.pi * i / golden
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.stack([s * np.cos(lam), s * np.sin(lam), z], axis=1)
    return NodeSet.from_points(project_to_sphere(pts))


@dataclass
class Patch:
    center: np.ndarray
    member_indices: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)  # member coordinates (m, 3)
    lu: tuple = field(repr=False)  # (lu_matrix, pivots) of the saddle system
    aug_transform: np.ndarray = field(repr=False)  # (dim, dim) basis map


@dataclass
class PUCover:
    nodes: NodeSet
    patches: list[Patch]
    center_tree: cKDTree = field(repr=False)
    radius: float
    n_target: int
    a_target: float
    sh: SHBasis
    phs_order: int
    uncovered_count: int = 0

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    def eval(self, field_values, targets) -> np.ndarray:
        return eval_pu(self, field_values, targets)


def build_cover(
    nodes: NodeSet,
    n: int,
    a: float = DEFAULT_MULTIPLICITY,
    patch_centers: NodeSet | None = None,
) -> PUCover:
    """Construct the patch cover and invert every patch's saddle system.

    Centers default to a Fibonacci spiral of exactly M = ceil(a*N/n) points;
    a precomputed quasi-uniform center set may be supplied instead.
    """
    big_n = nodes.n_nodes
    if n < 1 or n > big_n:
        raise ConfigurationError(f"nodes-per-patch {n} out of range [1, {big_n}]")
    radius = 2.0 * np.sqrt(n / big_n)
    if patch_centers is None:
        if a < 1.5:
            raise ConfigurationError("patch multiplicity a must be at least 1.5")
        m_patches = int(np.ceil(a * big_n / n))
        patch_centers = fibonacci_nodes(m_patches)
    centers = patch_centers.points
    sh, phs_order = sh_degree_for_stencil(n)
    phs_exp = 2 * phs_order + 1

    covered = np.zeros(big_n, dtype=bool)
    patches = []
    member_lists = nodes.tree.query_ball_point(centers, radius)
    for ell, raw in enumerate(member_lists):
        idx = np.sort(np.asarray(raw, dtype=int))
        pts = nodes.points[idx]
        dist = np.linalg.norm(pts - centers[ell], axis=1)
        inside = dist < radius
        idx, pts = idx[inside], pts[inside]
        if idx.size < sh.dim + 1:
            raise ConfigurationError(
                f"patch {ell} holds {idx.size} nodes, fewer than the "
                f"{sh.dim + 1} needed for degree {sh.degree_L}; decrease n or "
                "refine the nodes"
            )
        covered[idx] = True
        rr = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1) / radius
        m = idx.size
        system = np.zeros((m + sh.dim, m + sh.dim))
        system[:m, :m] = rr**phs_exp
        # orthonormalize the harmonic block per patch: on small caps the
        # harmonics are near-dependent and the raw saddle system can be
        # singular to machine precision
        q, w = orthonormal_augmentation(sh_eval(sh, pts)[None])
        q, w = q[0], w[0]
        system[:m, m:] = q
        system[m:, :m] = q.T
        dropped = (q * q).sum(axis=0) == 0.0
        system[m + np.arange(sh.dim), m + np.arange(sh.dim)] = dropped.astype(float)
        lu_f, piv = sla.lu_factor(system, overwrite_a=True, check_finite=False)
        if np.abs(np.diag(lu_f)).min() < 1e-18 * np.abs(lu_f).max():
            raise SingularMatrixError(f"singular patch system at patch {ell}")
        patches.append(Patch(center=centers[ell], member_indices=idx, points=pts,
                             lu=(lu_f, piv), aug_transform=w))
    if not covered.all():
        missing = int(np.flatnonzero(~covered)[0])
        raise ConfigurationError(
            f"node {missing} lies in no patch; increase the multiplicity a"
        )
    return PUCover(
        nodes=nodes,
        patches=patches,
        center_tree=cKDTree(centers),
        radius=radius,
        n_target=n,
        a_target=a,
        sh=sh,
        phs_order=phs_order,
    )


def pu_weights(cover: PUCover, x) -> list[tuple[int, float]]:
    """Normalized partition-of-unity weights of the patches containing `x`."""
    x = np.asarray(x, dtype=float)
    candidates = cover.center_tree.query_ball_point(x, cover.radius)
    entries = []
    for ell in sorted(candidates):
        d = float(np.linalg.norm(x - cover.patches[ell].center))
        w = bspline_weight(d / cover.radius)
        if w > 0.0:
            entries.append((ell, w))
    total = sum(w for _, w in entries)
    return [(ell, w / total) for ell, w in entries] if total > 0.0 else []


def _fit_patches(cover: PUCover, field_values: np.ndarray) -> list[np.ndarray]:
    coeffs = []
    dim = cover.sh.dim
    for patch in cover.patches:
        rhs = np.concatenate([field_values[patch.member_indices], np.zeros(dim)])
        coeffs.append(sla.lu_solve(patch.lu, rhs, check_finite=False))
    return coeffs


def eval_pu(cover: PUCover, field_values, targets) -> np.ndarray:
    """Interpolate nodal `field_values` to `targets` with the blended cover.

    Patch coefficients depend only on the field, so each patch is fitted once
    and then evaluated at every target it contains.  Targets covered by no
    patch fall back to the nearest patch's interpolant with weight one; each
    such event bumps `cover.uncovered_count`.
    """
    field_values = np.asarray(field_values, dtype=float)
    if field_values.shape != (cover.nodes.n_nodes,):
        raise ConfigurationError("field length does not match node count")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    coeffs = _fit_patches(cover, field_values)
    sh_t = sh_eval(cover.sh, targets)
    phs_exp = 2 * cover.phs_order + 1

    numer = np.zeros(targets.shape[0])
    denom = np.zeros(targets.shape[0])
    target_tree = cKDTree(targets)
    hits = cover.center_tree.query_ball_tree(target_tree, cover.radius)
    for ell, raw in enumerate(hits):
        if not raw:
            continue
        t_idx = np.sort(np.asarray(raw, dtype=int))
        patch = cover.patches[ell]
        tpts = targets[t_idx]
        d = np.linalg.norm(tpts - patch.center, axis=1)
        w = bspline_weight(d / cover.radius)
        inside = w > 0.0
        if not inside.any():
            continue
        t_idx, tpts, w = t_idx[inside], tpts[inside], w[inside]
        r = np.linalg.norm(tpts[:, None, :] - patch.points[None, :, :], axis=-1)
        e = np.concatenate(
            [(r / cover.radius) ** phs_exp, sh_t[t_idx] @ patch.aug_transform], axis=1
        )
        s_vals = e @ coeffs[ell]
        numer[t_idx] += w * s_vals
        denom[t_idx] += w
    out = np.empty(targets.shape[0])
    good = denom > 0.0
    out[good] = numer[good] / denom[good]
    if not good.all():
        bad = np.flatnonzero(~good)
        cover.uncovered_count += bad.size
        _, nearest = cover.center_tree.query(targets[bad])
        nearest = np.atleast_1d(nearest)
        for t, ell in zip(bad, nearest):
            patch = cover.patches[int(ell)]
            r = np.linalg.norm(targets[t] - patch.points, axis=-1)
            e = np.concatenate([(r / cover.radius) ** phs_exp, sh_t[t] @ patch.aug_transform])
            out[t] = e @ coeffs[int(ell)]
    return out
