"""Parameter fields, Gaussian fields and max-stable extremal-t fields.

Random streams
--------------
Every draw comes from ``numpy.random.SeedSequence(seed, spawn_key=key)``
where ``key = (stream, replicate, index)``.  ``stream`` separates purposes
(Gaussian fields, max-stable fields), ``replicate`` is the experiment
replicate and ``index`` the observation number.  A field therefore depends
only on the master seed and its own coordinates in that counter space, not
on how many other fields were drawn or in which order.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import IllConditionedCovarianceError, SimulationBudgetError
from .model import (AnisotropyParams, GlobalParams, build_matrices,
                    build_matrix, corr_matrix_nonstationary,
                    corr_matrix_stationary)

log = logging.getLogger(__name__)

PRESETS = ("example1", "example2", "example3", "constant")

STREAM_GAUSSIAN = 1
STREAM_MAXSTABLE = 2

UNIT_FRECHET = "unit_frechet"
RAW = "raw"


def substream(seed, *key):
    """Generator for counter ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular lattice; x varies fastest in the location order."""

    xmin: float = -5.0
    xmax: float = 5.0
    ymin: float = -5.0
    ymax: float = 5.0
    resolution: float = 0.5

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ValueError("empty grid")

    def axes(self):
        nx = int(round((self.xmax - self.xmin) / self.resolution)) + 1
        ny = int(round((self.ymax - self.ymin) / self.resolution)) + 1
        xs = self.xmin + self.resolution * np.arange(nx)
        ys = self.ymin + self.resolution * np.arange(ny)
        return xs, ys

    def coords(self):
        xs, ys = self.axes()
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass
class ParameterField:
    """Per-location anisotropy parameters plus the global parameters."""

    coords: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    globals: GlobalParams
    form: str = "standard"

    def __post_init__(self):
        self.coords = np.asarray(self.coords, float)
        n = len(self.coords)
        self.a = np.broadcast_to(np.asarray(self.a, float), (n,)).copy()
        self.b = np.broadcast_to(np.asarray(self.b, float), (n,)).copy()
        self.gamma = np.broadcast_to(np.asarray(self.gamma, float), (n,)).copy()
        for i in range(n):
            self.params(i)  # validates

    def __len__(self):
        return len(self.coords)

    def params(self, i):
        return AnisotropyParams(float(self.a[i]), float(self.b[i]),
                                float(self.gamma[i]))

    def matrices(self):
        return build_matrices(self.a, self.b, self.gamma, self.form)

    def is_constant(self):
        return all(np.all(v == v[0]) for v in (self.a, self.b, self.gamma))


def build_parameter_field(preset, grid=None, overrides=None, globals_=None,
                          form="standard"):
    """Parameter field of one of the simulation scenarios.

    ``overrides`` maps any of ``a``, ``b``, ``gamma`` to a constant that
    replaces the preset formula.  Angles are reduced modulo pi.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    grid = GridSpec() if grid is None else grid
    globals_ = globals_ or GlobalParams(5.0, 1.0)
    coords = grid.coords() if isinstance(grid, GridSpec) else np.asarray(grid, float)
    x, y = coords[:, 0], coords[:, 1]
    one = np.ones(len(coords))
    if preset == "example1":
        a, b, g = 2.0 * one, (x + 5.0) / 2.0, 0.0 * one
    elif preset == "example2":
        a, b, g = 1.0 * one, 3.0 * one, (-x + 5.0) * np.pi / 2.0
    elif preset == "example3":
        a, b, g = (7.5 - np.hypot(x, y)) / 2.0 + 1.0, 0.0 * one, 0.0 * one
    else:
        a, b, g = 2.0 * one, 1.0 * one, 0.0 * one
    overrides = overrides or {}
    unknown = set(overrides) - {"a", "b", "gamma"}
    if unknown:
        raise ValueError(f"unknown override keys {sorted(unknown)}")
    a = overrides.get("a", a) * one
    b = overrides.get("b", b) * one
    g = np.mod(overrides.get("gamma", g) * one, np.pi)
    g[g >= np.pi] = 0.0
    return ParameterField(coords, a, b, g, globals_, form)


def correlation_matrix(pfield, stationary):
    """Correlation matrix of the underlying Gaussian field.

    A constant field always takes the stationary formula, so both modes give
    bit-identical matrices (and samples) in that case.
    """
    if stationary or pfield.is_constant():
        if not pfield.is_constant():
            raise ValueError("stationary sampling needs a constant parameter field")
        A = build_matrix(pfield.params(0), pfield.form)
        return corr_matrix_stationary(pfield.coords, A, pfield.globals.alpha)
    return corr_matrix_nonstationary(pfield.coords, pfield.matrices(),
                                     pfield.globals.alpha)


@dataclass
class CovarianceFactor:
    """Lower Cholesky factor of a correlation matrix and the jitter used."""

    factor: np.ndarray
    jitter: float
    corr: np.ndarray = field(repr=False)


JITTERS = (0.0,) + tuple(10.0 ** e for e in range(-12, -5))


def factorize(corr):
    """Cholesky factorization with escalating diagonal jitter (cap 1e-6)."""
    corr = np.asarray(corr, float)
    eye = np.eye(len(corr))
    for jitter in JITTERS:
        try:
            L = np.linalg.cholesky(corr + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        if jitter:
            log.info("covariance factorized with jitter %g", jitter)
        return CovarianceFactor(L, jitter, corr)
    raise IllConditionedCovarianceError(
        f"Cholesky failed with jitter up to {JITTERS[-1]:g}")


def gaussian_sample(pfield, stationary, m, seed, replicate=0):
    """m x n matrix of zero-mean unit-variance Gaussian field draws."""
    fac = factorize(correlation_matrix(pfield, stationary))
    rng = substream(seed, STREAM_GAUSSIAN, replicate)
    z = rng.standard_normal((len(pfield), m))
    return (fac.factor @ z).T


@dataclass
class ObservationSet:
    """m observations of a field on n fixed locations."""

    coords: np.ndarray
    data: np.ndarray
    margins: str = UNIT_FRECHET
    ids: list = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, float)
        self.data = np.atleast_2d(np.asarray(self.data, float))
        if self.data.shape[1] != len(self.coords):
            raise ValueError("data columns must match the number of locations")
        if self.margins not in (UNIT_FRECHET, RAW):
            raise ValueError(f"unknown margins tag {self.margins!r}")
        if not np.isfinite(self.data).all():
            raise ValueError("observations must be finite")
        if self.margins == UNIT_FRECHET and not (self.data > 0).all():
            raise ValueError("unit-Frechet observations must be positive")
        if self.ids is None:
            self.ids = [str(i) for i in range(len(self.coords))]
        if len(self.ids) != len(self.coords):
            raise ValueError("one id per location required")

    @property
    def m(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]


def frechet_normalizer(nu):
    """c_nu with E[c_nu max(0, G)^nu] = 1 for standard Gaussian G."""
    moment = 2.0 ** (0.5 * nu - 1.0) * math.exp(special.gammaln(0.5 * (nu + 1.0))) / math.sqrt(math.pi)
    return 1.0 / moment


class _GaussianStream:
    """Correlated Gaussian vectors drawn in blocks from one generator."""

    def __init__(self, L, rng, block=32):
        self.L = L
        self.rng = rng
        self.block = block
        self.buf = None
        self.pos = block

    def next(self):
        if self.pos == self.block:
            self.buf = self.L @ self.rng.standard_normal((self.L.shape[0], self.block))
            self.pos = 0
        col = self.buf[:, self.pos]
        self.pos += 1
        return col


def _exact_field(fac, nu, rng):
    """One extremal-t field by the extremal-functions algorithm.

    For location j the spectral function normalized to 1 at j is
    max(0, T)^nu with T = C[:, j] + W / sqrt(chi2_{nu+1}) and
    W = G - C[:, j] G_j, so Cov(W) = C - C[:, j] C[j, :].
    """
    C = fac.corr
    n = len(C)
    k = nu + 1.0
    gauss = _GaussianStream(fac.factor, rng)
    Z = np.zeros(n)
    for j in range(n):
        col = C[:, j]
        E = rng.standard_exponential()
        zeta = 1.0 / E
        while zeta > Z[j]:
            g = gauss.next()
            chi = rng.chisquare(k)
            t = col + (g - col * g[j]) / math.sqrt(chi)
            y = np.maximum(t, 0.0) ** nu
            y[j] = 1.0
            y *= zeta
            if j == 0 or np.all(y[:j] < Z[:j]):
                np.maximum(Z, y, out=Z)
            E += rng.standard_exponential()
            zeta = 1.0 / E
    return Z


def _spectral_field(fac, nu, rng, accuracy, max_draws):
    """Truncated spectral construction.

    Stops once zeta * c_nu * B^nu falls below the current minimum, where B is
    the Gaussian level with n * P(G > B) = accuracy (a union bound on the
    field maximum).  Later points can then only matter on an event of
    probability at most ``accuracy`` per remaining draw.
    """
    n = fac.factor.shape[0]
    c_nu = frechet_normalizer(nu)
    level = stats.norm.isf(accuracy / n)
    cap = c_nu * max(level, 0.0) ** nu
    gauss = _GaussianStream(fac.factor, rng)
    Y = np.zeros(n)
    gamma = 0.0
    for _ in range(max_draws):
        gamma += rng.standard_exponential()
        zeta = 1.0 / gamma
        ymin = Y.min()
        if ymin > 0 and zeta * cap < ymin:
            return Y
        np.maximum(Y, zeta * c_nu * np.maximum(gauss.next(), 0.0) ** nu, out=Y)
    raise SimulationBudgetError(
        f"accuracy {accuracy:g} not reached within {max_draws} spectral draws")


def max_stable_sample(pfield, stationary, m, seed, replicate=0, method="exact",
                      accuracy=1e-3, max_draws=200_000, first_index=0):
    """m independent extremal-t fields with unit-Frechet margins.

    ``method="exact"`` (default) uses extremal functions; ``"spectral"`` is
    the truncated Poisson construction controlled by ``accuracy``.
    Observation i uses stream key (replicate, first_index + i).
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if method not in ("exact", "spectral"):
        raise ValueError(f"unknown simulation method {method!r}")
    fac = factorize(correlation_matrix(pfield, stationary))
    nu = float(pfield.globals.nu)
    out = np.empty((m, len(pfield)))
    for i in range(m):
        rng = substream(seed, STREAM_MAXSTABLE, replicate, first_index + i)
        if method == "exact":
            out[i] = _exact_field(fac, nu, rng)
        else:
            out[i] = _spectral_field(fac, nu, rng, accuracy, max_draws)
    return ObservationSet(pfield.coords.copy(), out, UNIT_FRECHET)
