"""Pairwise composite likelihood and its maximization.

Parameters are optimized in transformed coordinates ``(log a, log b, gamma)``
with gamma left free and wrapped into [0, pi) on report; very negative
``log b`` approximates b = 0.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import ClusterTooSmallError, FitFailureError, NoPairsError
from .model import AnisotropyParams, PairData, build_matrix

log = logging.getLogger(__name__)

#: default pair threshold, in units of the members' median nearest-neighbour
#: distance; far pairs carry little information but add variance
PAIR_RADIUS_FACTOR = 2.5
GAMMA_STARTS = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
_LOG_BOUND = 12.0


@dataclass(frozen=True)
class PairSelection:
    """Unordered location pairs (``i[k]``, ``j[k]``) and the threshold used."""

    i: np.ndarray
    j: np.ndarray
    max_distance: float = math.inf

    def __len__(self):
        return len(self.i)


@dataclass
class FitOptions:
    """Optimizer settings; defaults give bounded runtime over many local fits."""

    xatol: float = 1e-6
    maxiter: int = 500
    coarse_xatol: float = 1e-2
    coarse_maxiter: int = 60
    gamma_starts: tuple = GAMMA_STARTS
    form: str = "standard"


@dataclass
class FitResult:
    params: AnisotropyParams
    nll: float
    pairs_used: int
    converged: bool
    starts_tried: int

    def to_dict(self):
        return {"params": self.params.as_dict(), "nll": self.nll,
                "pairs_used": self.pairs_used, "converged": self.converged,
                "starts_tried": self.starts_tried}

    @classmethod
    def from_dict(cls, d):
        p = d["params"]
        return cls(AnisotropyParams(p["a"], p["b"], p["gamma"]), float(d["nll"]),
                   int(d["pairs_used"]), bool(d["converged"]),
                   int(d.get("starts_tried", 0)))


def pair_data(obs):
    """Kernel layout of ``obs``, cached on the object."""
    cached = getattr(obs, "_pair_data", None)
    if cached is None or cached[0] is not obs.data:
        cached = (obs.data, PairData(obs.data))
        obs._pair_data = cached
    return cached[1]


def default_max_distance(coords, members):
    """PAIR_RADIUS_FACTOR times the median nearest-neighbour distance of ``members``.

    None (all pairs) for clusters of fewer than three locations.
    """
    members = np.asarray(members)
    if len(members) < 3:
        return None
    nn = nearest_neighbor_distances(np.asarray(coords, float)[members])
    return PAIR_RADIUS_FACTOR * float(np.median(nn))


def select_pairs(coords, members, max_distance=None):
    """All unordered pairs of ``members`` no farther apart than ``max_distance``."""
    members = np.sort(np.asarray(members, dtype=np.int64))
    ii, jj = np.triu_indices(len(members), k=1)
    pi, pj = members[ii], members[jj]
    if max_distance is None or math.isinf(max_distance):
        return PairSelection(pi, pj, math.inf)
    coords = np.asarray(coords, float)
    d = np.linalg.norm(coords[pi] - coords[pj], axis=1)
    keep = d <= max_distance
    return PairSelection(pi[keep], pj[keep], float(max_distance))


def policy_pairs(coords, members, max_distance="auto"):
    """Pairs under the default threshold policy (``"auto"``) or a fixed one."""
    if max_distance == "auto":
        max_distance = default_max_distance(coords, members)
    return select_pairs(coords, members, max_distance)


def _raw_matrix(la, lb, g, form):
    a = math.exp(min(max(la, -_LOG_BOUND), _LOG_BOUND))
    b = math.exp(min(max(lb, -_LOG_BOUND), _LOG_BOUND))
    s, c = math.sin(g), math.cos(g)
    if form == "rotation":
        return np.array([[c / (a + b), s / (a + b)], [-s / a, c / a]])
    return np.array([[s / a, c / (a + b)], [-c / (a + b), s / b]])


class _Objective:
    def __init__(self, obs, pairs, globals_, form):
        if len(pairs) == 0:
            raise NoPairsError("pair selection is empty")
        self.pi = np.asarray(pairs.i, np.int64)
        self.pj = np.asarray(pairs.j, np.int64)
        self.work = pair_data(obs).work(self.pi, self.pj, globals_.nu)
        self.lag = obs.coords[self.pj] - obs.coords[self.pi]
        self.g = globals_
        self.form = form
        self.evals = 0

    def rho(self, A):
        dist = np.sqrt(np.einsum("pk,pk->p", self.lag @ A.T, self.lag @ A.T))
        return np.exp(-dist ** self.g.alpha)

    def at_matrix(self, A):
        return self.work.nll_sum(self.rho(A))

    def __call__(self, x):
        self.evals += 1
        val = self.at_matrix(_raw_matrix(x[0], x[1], x[2], self.form))
        return val if np.isfinite(val) else np.inf


def _check_members(members):
    members = np.unique(np.asarray(members, dtype=np.int64))
    if len(members) < 2:
        raise ClusterTooSmallError(f"cluster has {len(members)} member(s)")
    return members


def cluster_composite_nll(params, globals_, obs, members, pairs, form="standard"):
    """Negative pairwise composite log-likelihood of ``members`` at ``params``."""
    members = _check_members(members)
    if len(pairs) == 0:
        raise NoPairsError("pair selection is empty")
    if not (np.isin(pairs.i, members).all() and np.isin(pairs.j, members).all()):
        raise ValueError("pairs reference locations outside the member set")
    obj = _Objective(obs, pairs, globals_, form)
    return float(obj.at_matrix(build_matrix(params, form)))


def pair_nll_values(params, globals_, obs, pairs, form="standard"):
    """Per-pair negative log-likelihood contributions (summed over observations)."""
    obj = _Objective(obs, pairs, globals_, form)
    return obj.work.nll_each(obj.rho(build_matrix(params, form)))


def _simplex(x0):
    steps = np.diag([0.5, 0.5, np.pi / 8])
    return np.vstack([x0, x0 + steps])


def _transformed(p):
    return np.array([math.log(p.a), math.log(max(p.b, math.exp(-_LOG_BOUND))), p.gamma])


def _minimize(obj, starts, options):
    """Coarse Nelder-Mead from every start, then a tight run from the best."""
    best = None
    for x0 in starts:
        f0 = obj(x0)
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"initial_simplex": _simplex(x0),
                                "xatol": options.coarse_xatol, "fatol": 1e-3,
                                "maxiter": options.coarse_maxiter})
        x, f = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
        if np.isfinite(f) and (best is None or f < best[1]):
            best = (np.array(x), float(f))
    if best is None:
        raise FitFailureError("no start produced a finite likelihood")
    x0, f0 = best
    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"initial_simplex": _simplex(x0) - 0.9 * (_simplex(x0) - x0),
                            "xatol": options.xatol,
                            "fatol": 1e-9 * max(1.0, abs(f0)),
                            "maxiter": options.maxiter})
    if res.fun <= f0:
        x, f = res.x, float(res.fun)
    else:
        x, f = x0, f0
    converged = bool(res.success) and res.nit < options.maxiter
    return x, f, converged


def _to_params(x):
    la = min(max(x[0], -_LOG_BOUND), _LOG_BOUND)
    lb = min(max(x[1], -_LOG_BOUND), _LOG_BOUND)
    return AnisotropyParams.wrapped(math.exp(la), math.exp(lb), x[2])


def _starts(scale, init, options):
    starts = [np.array([math.log(scale), math.log(scale / 2), g])
              for g in options.gamma_starts]
    if init is not None:
        starts.append(_transformed(init))
    return starts


def fit_cluster_mle(globals_, obs, members, pairs=None, init=None, options=None):
    """Stationary extremal-t anisotropy fit on one cluster.

    ``pairs`` defaults to the threshold policy (all pairs up to 200 members,
    otherwise the 0.3 quantile of within-cluster distances).
    """
    options = options or FitOptions()
    members = _check_members(members)
    if pairs is None:
        pairs = policy_pairs(obs.coords, members)
    obj = _Objective(obs, pairs, globals_, options.form)
    scale = float(np.median(np.linalg.norm(obj.lag, axis=1)))
    starts = _starts(scale, init, options)
    x, f, converged = _minimize(obj, starts, options)
    return FitResult(_to_params(x), f, len(pairs), converged, len(starts))


def nearest_neighbor_distances(coords):
    d, _ = cKDTree(coords).query(coords, k=2)
    return d[:, 1]


def default_epsilon(coords):
    """2.5 times the median nearest-neighbour distance."""
    return 2.5 * float(np.median(nearest_neighbor_distances(np.asarray(coords, float))))


def neighborhood(coords, x, epsilon):
    """Indices u != x with ||x - u|| < epsilon, ascending."""
    coords = np.asarray(coords, float)
    d = np.linalg.norm(coords - coords[x], axis=1)
    idx = np.flatnonzero(d < epsilon)
    return idx[idx != x]


def fit_local_anisotropy(x, globals_, obs, epsilon=None, min_neighbors=4,
                         init=None, options=None):
    """Local ellipse at location ``x`` from the star of pairs (x, u), u near x.

    Returns None when fewer than ``min_neighbors`` locations lie within
    ``epsilon``; such locations are excluded from the local-estimate field.
    """
    options = options or FitOptions()
    if epsilon is None:
        epsilon = default_epsilon(obs.coords)
    nb = neighborhood(obs.coords, x, epsilon)
    if len(nb) < max(min_neighbors, 1):
        log.debug("location %d excluded: %d neighbours within %g", x, len(nb), epsilon)
        return None
    lo = np.minimum(nb, x)
    hi = np.maximum(nb, x)
    pairs = PairSelection(lo, hi, float(epsilon))
    obj = _Objective(obs, pairs, globals_, options.form)
    scale = float(np.max(np.linalg.norm(obj.lag, axis=1)))
    starts = _starts(scale, init, options)
    xopt, f, converged = _minimize(obj, starts, options)
    return FitResult(_to_params(xopt), f, len(pairs), converged, len(starts))


def _local_task(args):
    x, globals_, obs, epsilon, min_neighbors, options = args
    return fit_local_anisotropy(x, globals_, obs, epsilon, min_neighbors, None, options)


def fit_local_field(globals_, obs, epsilon=None, min_neighbors=4, options=None,
                    workers=1):
    """Local fits at every location; excluded locations give None."""
    if epsilon is None:
        epsilon = default_epsilon(obs.coords)
    tasks = [(x, globals_, obs, epsilon, min_neighbors, options) for x in range(obs.n)]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_local_task, tasks, chunksize=8))
    return [_local_task(t) for t in tasks]


def fit_clustering(globals_, obs, labels, max_distance="auto", options=None):
    """Fit every cluster with at least two members; returns {label: FitResult}."""
    labels = np.asarray(labels)
    out = {}
    for lab in np.unique(labels[labels > 0]):
        members = np.flatnonzero(labels == lab)
        if len(members) < 2:
            continue
        pairs = policy_pairs(obs.coords, members, max_distance)
        if len(pairs) == 0:
            continue
        out[int(lab)] = fit_cluster_mle(globals_, obs, members, pairs, None, options)
    return out
