"""Dissimilarities between locations and agglomerative clustering.

Two regionalizations are supported:

* EDC: dissimilarity ``theta_hat - 1`` from estimated extremal coefficients.
* LEC: one minus the Jaccard index of the (smoothed) local dependence
  ellipses ``{h : ||A h|| <= c}``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import DegenerateMatrixError
from .model import build_matrices

LINKAGES = ("average", "single", "complete")


@dataclass
class DissimilarityMatrix:
    """Symmetric dissimilarities among the locations listed in ``index``."""

    values: np.ndarray
    index: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        self.index = np.asarray(self.index, dtype=np.int64)
        if self.values.shape != (len(self.index), len(self.index)):
            raise ValueError("dissimilarity shape does not match its index")


@dataclass
class Clustering:
    """Cluster labels 1..K per location; 0 marks a location left out."""

    labels: np.ndarray
    K: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def members(self, label):
        return np.flatnonzero(self.labels == label)

    def clusters(self):
        return {int(k): self.members(k) for k in range(1, self.K + 1)}

    def partition(self):
        """Frozen set of member sets; handy for relabel-invariant comparisons."""
        return frozenset(frozenset(int(i) for i in self.members(k))
                         for k in range(1, self.K + 1))


def edc_dissimilarity(theta):
    """theta_hat - 1 for every pair (zero diagonal)."""
    theta = np.asarray(theta, float)
    d = np.clip(theta - 1.0, 0.0, 1.0)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DissimilarityMatrix(d, np.arange(len(d)))


# ---------------------------------------------------------------------------
# local estimate field and smoothing

@dataclass
class LocalEstimateField:
    """Per-location ellipse parameters; excluded entries hold NaN."""

    coords: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    excluded: np.ndarray
    smoothed: bool = False
    form: str = "standard"

    @classmethod
    def from_fits(cls, coords, fits, form="standard"):
        n = len(fits)
        a, b, g = np.full(n, np.nan), np.full(n, np.nan), np.full(n, np.nan)
        excluded = np.ones(n, bool)
        for i, res in enumerate(fits):
            if res is None:
                continue
            p = res.params if hasattr(res, "params") else res
            a[i], b[i], g[i] = p.a, p.b, p.gamma
            excluded[i] = False
        return cls(np.asarray(coords, float), a, b, g, excluded, False, form)

    @classmethod
    def from_parameter_field(cls, pfield):
        n = len(pfield)
        return cls(pfield.coords.copy(), pfield.a.copy(), pfield.b.copy(),
                   pfield.gamma.copy(), np.zeros(n, bool), False, pfield.form)

    @property
    def kept(self):
        return np.flatnonzero(~self.excluded)

    def matrices(self):
        keep = self.kept
        return build_matrices(self.a[keep], self.b[keep], self.gamma[keep], self.form)


def circular_mean_mod_pi(angles, axis=None):
    """Mean of axial angles: half the angle of the mean doubled-angle vector."""
    angles = np.asarray(angles, float)
    c = np.cos(2 * angles).mean(axis=axis)
    s = np.sin(2 * angles).mean(axis=axis)
    out = np.mod(0.5 * np.arctan2(s, c), np.pi)
    return np.where(out >= np.pi, 0.0, out)


def smooth_estimates(est, radius):
    """Local averages of a, b and (axially) gamma within ``radius``."""
    if not radius > 0:
        raise ValueError("smoothing radius must be positive")
    keep = est.kept
    a, b, g = est.a.copy(), est.b.copy(), est.gamma.copy()
    excluded = est.excluded.copy()
    if len(keep):
        tree = cKDTree(est.coords[keep])
        hoods = tree.query_ball_point(est.coords[keep], r=radius * (1 + 1e-9))
        for loc, hood in zip(keep, hoods):
            idx = keep[np.asarray(hood, dtype=np.int64)]
            a[loc] = est.a[idx].mean()
            b[loc] = est.b[idx].mean()
            g[loc] = circular_mean_mod_pi(est.gamma[idx])
    return LocalEstimateField(est.coords.copy(), a, b, g, excluded, True, est.form)


# ---------------------------------------------------------------------------
# ellipse Jaccard dissimilarity

def _relative_quadratic(A1, A2):
    """Eigenvalues (l1 >= l2) of M = B^T B with B = A2 A1^{-1}.

    Mapping L1 onto the unit disk turns L2 into {u : u^T M u <= 1}.
    Also returns the angle of the l1 eigenvector.
    """
    A1 = np.asarray(A1, float)
    A2 = np.asarray(A2, float)
    det1 = A1[..., 0, 0] * A1[..., 1, 1] - A1[..., 0, 1] * A1[..., 1, 0]
    det2 = A2[..., 0, 0] * A2[..., 1, 1] - A2[..., 0, 1] * A2[..., 1, 0]
    if not (np.isfinite(det1).all() and np.isfinite(det2).all()) \
            or (np.abs(det1) == 0).any() or (np.abs(det2) == 0).any():
        raise DegenerateMatrixError("ellipse with zero or infinite area")
    inv1 = np.empty_like(A1)
    inv1[..., 0, 0] = A1[..., 1, 1] / det1
    inv1[..., 0, 1] = -A1[..., 0, 1] / det1
    inv1[..., 1, 0] = -A1[..., 1, 0] / det1
    inv1[..., 1, 1] = A1[..., 0, 0] / det1
    B = A2 @ inv1
    M = np.swapaxes(B, -1, -2) @ B
    p, r, t = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    half = 0.5 * (p + t)
    d = np.hypot(0.5 * (p - t), r)
    l1 = half + d
    detm = (det2 / det1) ** 2
    l2 = detm / l1
    phi = 0.5 * np.arctan2(2 * r, p - t)
    return l1, l2, phi


def _intersection_area(l1, l2):
    """Area of unit disk intersected with {l1 x^2 + l2 y^2 <= 1}, l1 >= l2."""
    l1 = np.asarray(l1, float)
    l2 = np.asarray(l2, float)
    area_e = np.pi / np.sqrt(l1 * l2)
    out = np.where(l2 >= 1.0, area_e, np.pi)
    mixed = (l1 > 1.0) & (l2 < 1.0)
    if np.any(mixed):
        m1, m2 = l1[mixed], l2[mixed]
        cos2 = (1.0 - m2) / (m1 - m2)
        psi = np.arccos(np.sqrt(np.clip(cos2, 0.0, 1.0)))
        # parametric angle of the ellipse at polar angle psi
        tpar = np.arctan2(np.sqrt(m2) * np.sin(psi), np.sqrt(m1) * np.cos(psi))
        out = out.copy() if np.ndim(out) else np.asarray(out, float)
        out[mixed] = 2.0 * tpar / np.sqrt(m1 * m2) + np.pi - 2.0 * psi
    return out


def ellipse_jaccard(A1, A2, level=0.5, method="analytic"):
    """1 - |L1 n L2| / |L1 u L2| for L = {h : ||A h|| <= level}.

    The ratio is unchanged by a common linear map, so the computation runs
    in coordinates where L1 is the unit disk.  ``method`` is ``"analytic"``
    (closed-form sector areas, vectorized over leading axes),
    ``"quadrature"`` (adaptive quadrature over the polar angle) or
    ``"raster"`` (grid counting; slow, for validation).
    """
    if not level > 0:
        raise ValueError("level must be positive")
    l1, l2, phi = _relative_quadratic(A1, A2)
    if method == "analytic":
        inter = _intersection_area(l1, l2)
        area2 = np.pi / np.sqrt(l1 * l2)
        jac = inter / (np.pi + area2 - inter)
        out = np.clip(1.0 - jac, 0.0, 1.0)
        return float(out) if np.ndim(out) == 0 else out
    if np.ndim(l1) != 0:
        raise ValueError(f"method {method!r} handles one pair at a time")
    l1, l2, phi = float(l1), float(l2), float(phi)
    area2 = math.pi / math.sqrt(l1 * l2)
    if method == "quadrature":
        inter = _quadrature_intersection(l1, l2, phi)
    elif method == "raster":
        inter = _raster_intersection(l1, l2, phi)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 1.0 - inter / (math.pi + area2 - inter)


def _quadrature_intersection(l1, l2, phi):
    def radius2(ang):
        c, s = math.cos(ang - phi), math.sin(ang - phi)
        return min(1.0, 1.0 / (l1 * c * c + l2 * s * s))

    kinks = []
    if l1 > 1.0 > l2:
        psi = math.acos(math.sqrt((1.0 - l2) / (l1 - l2)))
        kinks = sorted(np.mod([phi + psi, phi - psi, phi + math.pi - psi,
                               phi + math.pi + psi], 2 * math.pi))
    val, _ = integrate.quad(radius2, 0.0, 2 * math.pi, points=kinks or None,
                            limit=200, epsabs=1e-12, epsrel=1e-10)
    return 0.5 * val


def _raster_intersection(l1, l2, phi, cells=2000):
    c, s = math.cos(phi), math.sin(phi)
    ext = max(1.0, 1.0 / math.sqrt(l2))
    g = (np.arange(cells) + 0.5) / cells * 2 * ext - ext
    x, y = np.meshgrid(g, g)
    u, v = c * x + s * y, -s * x + c * y
    inside = (x * x + y * y <= 1.0) & (l1 * u * u + l2 * v * v <= 1.0)
    return inside.sum() * (2 * ext / cells) ** 2


def lec_dissimilarity(est, chunk=256):
    """Pairwise ellipse Jaccard dissimilarities among non-excluded locations."""
    keep = est.kept
    if len(keep) < 2:
        raise ValueError("need at least two non-excluded locations")
    mats = est.matrices()
    n = len(mats)
    D = np.zeros((n, n))
    for start in range(0, n, chunk):
        rows = mats[start:start + chunk]
        D[start:start + chunk] = ellipse_jaccard(rows[:, None], mats[None, :])
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return DissimilarityMatrix(D, keep)


# ---------------------------------------------------------------------------
# agglomerative clustering

def _merge_distance(linkage, d_ki, d_kj, n_i, n_j):
    if linkage == "average":
        return (n_i * d_ki + n_j * d_kj) / (n_i + n_j)
    if linkage == "single":
        return np.minimum(d_ki, d_kj)
    return np.maximum(d_ki, d_kj)


def agglomerative_cluster(D, K, linkage="average", n_locations=None):
    """Merge clusters until ``K`` remain.

    Each cluster is represented by its lowest row index.  Ties in the merge
    distance go to the lexicographically smallest pair of representatives.
    Labels 1..K are assigned in order of the lowest member.  When ``D`` is a
    :class:`DissimilarityMatrix` the labels are spread back onto
    ``n_locations`` (default ``max(index) + 1``) with 0 for absent rows.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    index = None
    if isinstance(D, DissimilarityMatrix):
        index = D.index
        D = D.values
    dist = np.array(D, dtype=float)
    n = len(dist)
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in [1, {n}], got {K}")
    dist[np.tril_indices(n)] = np.inf  # only i < j is consulted
    full = np.array(D, dtype=float)
    active = np.ones(n, bool)
    size = np.ones(n)
    parent = np.arange(n)
    rowmin = np.full(n, np.inf)
    rowarg = np.full(n, -1)

    def refresh(k):
        row = dist[k]
        j = int(np.argmin(row))
        rowmin[k], rowarg[k] = row[j], j

    for k in range(n - 1):
        refresh(k)
    for _ in range(n - K):
        i = int(np.argmin(rowmin))
        j = int(rowarg[i])
        # new distances from the merged cluster (kept at row i) to the rest
        others = np.flatnonzero(active)
        others = others[(others != i) & (others != j)]
        new = _merge_distance(linkage, full[others, i], full[others, j], size[i], size[j])
        full[others, i] = full[i, others] = new
        size[i] += size[j]
        active[j] = False
        parent[parent == j] = i
        full[j, :] = full[:, j] = np.inf
        dist[j, :] = dist[:, j] = np.inf
        lo = others[others < i]
        hi = others[others > i]
        dist[lo, i] = new[others < i]
        dist[i, hi] = new[others > i]
        rowmin[j] = np.inf
        refresh(i) if hi.size else rowmin.__setitem__(i, np.inf)
        for kk in lo:
            if rowarg[kk] in (i, j):
                refresh(kk)
            elif dist[kk, i] < rowmin[kk] or (dist[kk, i] == rowmin[kk] and i < rowarg[kk]):
                rowmin[kk], rowarg[kk] = dist[kk, i], i
        for kk in others[(others > i) & (others < j)]:
            if rowarg[kk] == j:
                refresh(kk)
    roots = parent
    labels = np.zeros(n, dtype=np.int64)
    next_label = 1
    seen = {}
    for loc in range(n):
        r = roots[loc]
        if r not in seen:
            seen[r] = next_label
            next_label += 1
        labels[loc] = seen[r]
    if index is None:
        return Clustering(labels, K)
    total = n_locations if n_locations is not None else int(index.max()) + 1
    spread = np.zeros(total, dtype=np.int64)
    spread[index] = labels
    return Clustering(spread, K)
