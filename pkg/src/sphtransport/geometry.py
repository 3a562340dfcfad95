"""Node sets on the unit sphere and the spatial queries built on them.

Points are plain numpy arrays: a single point is a length-3 float array, a
collection is an (N, 3) array.  Everything works with raw 3-D Cartesian
coordinates; Euclidean distance orders points the same way geodesic distance
does on the sphere, so the kd-tree never needs a great-circle metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DataError, ParseError

ON_SPHERE_TOL = 1e-13
MAX_ICOSAHEDRAL_LEVEL = 8
# distances closer than this are treated as exact ties (broken by index)
_TIE_TOL = 1e-12


def project_to_sphere(p):
    """Normalize point(s) onto the unit sphere.  Idempotent."""
    p = np.asarray(p, dtype=float)
    norms = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("cannot project the zero vector to the sphere")
    return p / norms


def to_cartesian(lam, theta):
    """(longitude, latitude) in radians -> Cartesian point(s) on the sphere."""
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ct = np.cos(theta)
    return np.stack([ct * np.cos(lam), ct * np.sin(lam), np.sin(theta)], axis=-1)


def from_cartesian(x):
    """Cartesian point(s) -> (longitude in [-pi, pi], latitude in [-pi/2, pi/2])."""
    x = np.asarray(x, dtype=float)
    lam = np.arctan2(x[..., 1], x[..., 0])
    theta = np.arcsin(np.clip(x[..., 2], -1.0, 1.0))
    return lam, theta


def spherical_basis(lam, theta):
    """Unit tangent vectors (lambda_hat, theta_hat) at the given coordinates.

    At the poles the vectors are defined by the longitude value supplied.
    """
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sl, cl = np.sin(lam), np.cos(lam)
    st, ct = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(lam)
    lam_hat = np.stack([-sl, cl, zero], axis=-1)
    theta_hat = np.stack([-st * cl, -st * sl, ct], axis=-1)
    return lam_hat, theta_hat


@dataclass(frozen=True)
class NodeSet:
    """Fixed Eulerian points on the sphere plus their kd-tree.

    Immutable after construction; safe for concurrent reads.
    """

    points: np.ndarray
    spacing_h: float
    tree: cKDTree = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_points(cls, points) -> "NodeSet":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.ndim != 2 or points.shape[1] != 3:
            raise DataError(f"expected an (N, 3) array, got shape {points.shape}")
        norms = np.linalg.norm(points, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DataError("node set contains off-sphere points")
        tree = cKDTree(points)
        if points.shape[0] >= 2:
            dists, _ = tree.query(points, k=2)
            nn = dists[:, 1]
            if np.any(nn == 0.0):
                raise DataError("node set contains duplicate points")
            spacing_h = float(np.mean(nn))
        else:
            spacing_h = 2.0
        return cls(points=points, spacing_h=spacing_h, tree=tree)


def _icosahedron_vertices():
    # two vertices pinned to the +-z axis; rings at latitude +-atan(1/2)
    theta = np.arctan(0.5)
    verts = [np.array([0.0, 0.0, 1.0])]
    for k in range(5):
        verts.append(to_cartesian(2.0 * np.pi * k / 5.0, theta))
    for k in range(5):
        verts.append(to_cartesian(2.0 * np.pi * k / 5.0 + np.pi / 5.0, -theta))
    verts.append(np.array([0.0, 0.0, -1.0]))
    return np.array(verts)


def _icosahedron_faces():
    faces = []
    for k in range(5):
        kp = (k + 1) % 5
        faces.append((0, 1 + k, 1 + kp))
    for k in range(5):
        kp = (k + 1) % 5
        faces.append((1 + k, 6 + k, 1 + kp))
        faces.append((1 + kp, 6 + k, 6 + kp))
    for k in range(5):
        kp = (k + 1) % 5
        faces.append((11, 6 + kp, 6 + k))
    return faces


def icosahedral_nodes(level: int) -> NodeSet:
    """Icosahedral node set from `level` rounds of edge bisection.

    Midpoints of every edge are projected to the sphere at each round, so the
    level-l nodes are a subset of the level-(l+1) nodes.  N = 10*4^level + 2.
    """
    if level < 0 or level > MAX_ICOSAHEDRAL_LEVEL:
        raise ConfigurationError(
            f"icosahedral level must be in [0, {MAX_ICOSAHEDRAL_LEVEL}], got {level}"
        )
    verts = list(_icosahedron_vertices())
    faces = _icosahedron_faces()
    for _ in range(level):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            idx = midpoint.get(key)
            if idx is None:
                idx = len(verts)
                verts.append(project_to_sphere(verts[a] + verts[b]))
                midpoint[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
        faces = new_faces
    return NodeSet.from_points(np.array(verts))


def icosahedral_nodes_by_frequency(freq: int) -> NodeSet:
    """Icosahedral node set from frequency-`freq` edge subdivision.

    Each icosahedron edge is split into `freq` segments and each face filled
    with the matching triangular lattice before projection, giving
    N = 10*freq^2 + 2.  Covers the node counts (5762, 23042, ...) that plain
    bisection cannot reach.
    """
    if freq < 1 or freq > 2**MAX_ICOSAHEDRAL_LEVEL:
        raise ConfigurationError(f"subdivision frequency out of range: {freq}")
    verts = _icosahedron_vertices()
    faces = _icosahedron_faces()
    points = list(verts)
    if freq > 1:
        edges = []
        seen = set()
        for a, b, c in faces:
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                if key not in seen:
                    seen.add(key)
                    edges.append(key)
        for a, b in edges:
            for i in range(1, freq):
                t = i / freq
                points.append(project_to_sphere((1.0 - t) * verts[a] + t * verts[b]))
        for a, b, c in faces:
            for i in range(1, freq):
                for j in range(1, freq - i):
                    k = freq - i - j
                    p = (i * verts[a] + j * verts[b] + k * verts[c]) / freq
                    points.append(project_to_sphere(p))
    return NodeSet.from_points(np.array(points))


def icosahedral_nodes_by_count(n_nodes: int) -> NodeSet:
    """Icosahedral node set with exactly `n_nodes` points (must be 10*f^2+2)."""
    freq = int(round(np.sqrt((n_nodes - 2) / 10.0)))
    if 10 * freq * freq + 2 != n_nodes:
        raise ConfigurationError(
            f"{n_nodes} is not an icosahedral count (needs N = 10*f^2 + 2)"
        )
    return icosahedral_nodes_by_frequency(freq)


def load_nodes(path) -> NodeSet:
    """Read whitespace-separated x y z triples; '#' starts a comment.

    Points whose norm deviates from 1 by at most 1e-6 are projected onto the
    sphere; larger deviations are rejected.
    """
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 numbers, got {len(parts)}")
            try:
                xyz = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            norm = float(np.linalg.norm(xyz))
            if abs(norm - 1.0) > 1e-6:
                raise DataError(
                    f"{path}:{lineno}: point is off the sphere (norm {norm:.6g})"
                )
            points.append(np.asarray(xyz) / norm)
    if not points:
        raise DataError(f"{path}: no nodes found")
    return NodeSet.from_points(np.array(points))


def nearest_neighbor(nodes: NodeSet, query) -> int:
    """Index of the node closest to `query`; ties go to the smallest index."""
    query = np.asarray(query, dtype=float)
    k = min(4, nodes.n_nodes)
    dists, idx = nodes.tree.query(query, k=k)
    dists, idx = np.atleast_1d(dists), np.atleast_1d(idx)
    tied = idx[dists <= dists[0] + _TIE_TOL]
    return int(tied.min())


def knn(nodes: NodeSet, query, n: int) -> np.ndarray:
    """Indices of the n nearest nodes, ascending distance, index order on ties."""
    if n < 1 or n > nodes.n_nodes:
        raise ConfigurationError(f"knn count {n} out of range [1, {nodes.n_nodes}]")
    query = np.asarray(query, dtype=float)
    k = min(n + 8, nodes.n_nodes)
    dists, idx = nodes.tree.query(query, k=k)
    dists, idx = np.atleast_1d(dists), np.atleast_1d(idx)
    order = np.lexsort((idx, dists))
    return idx[order][:n]
