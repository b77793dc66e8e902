"""Closed-form mathematics of the anisotropic extremal-t model.

Covers the anisotropy matrix, stationary and kernel-convolution correlations,
the bivariate exponent function with its partial derivatives, the bivariate
log-density and the theoretical extremal coefficient.  Numba kernels at the
bottom sum log-densities over location pairs for the likelihood code.
"""
import functools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateMatrixError, DomainError, NumericalDomainError
from .tdist import (_betacf, integer_df, student_t_cdf, student_t_logpdf,
                    t_log_norm_const)

#: correlations entering the exponent function are capped here
RHO_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class GlobalParams:
    """Process-wide parameters: extremal-t exponent ``nu`` and smoothness ``alpha``."""

    nu: float
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu >= 1):
            raise DomainError(f"nu must be >= 1, got {self.nu}")
        if not (0 < self.alpha <= 2):
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")


@dataclass(frozen=True)
class AnisotropyParams:
    """Ellipse parameters ``a > 0``, ``b >= 0`` and angle ``gamma`` in [0, pi)."""

    a: float
    b: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be positive, got {self.a}")
        if not (np.isfinite(self.b) and self.b >= 0):
            raise DomainError(f"b must be non-negative, got {self.b}")
        if not (0 <= self.gamma < np.pi):
            raise DomainError(f"gamma must lie in [0, pi), got {self.gamma}")

    @classmethod
    def wrapped(cls, a, b, gamma):
        """Build from an unconstrained angle, reducing it modulo pi."""
        g = float(np.mod(gamma, np.pi))
        if g >= np.pi:  # np.mod can round up to exactly pi
            g = 0.0
        return cls(float(a), float(b), g)

    def as_dict(self):
        return {"a": self.a, "b": self.b, "gamma": self.gamma}


def build_matrix(p, form="standard"):
    """Transformation matrix A of an anisotropy parameter set.

    ``form="standard"`` is the 2x2 matrix with entries built from sin/cos of
    gamma over a, a+b and b; an entry sin(gamma)/b with both terms zero is
    taken as 0.  ``form="rotation"`` gives diag(1/(a+b), 1/a) R(-gamma),
    whose level sets have semi-axes a+b along angle gamma and a across it.
    """
    a, b, g = p.a, p.b, p.gamma
    s, c = math.sin(g), math.cos(g)
    if form == "rotation":
        rot = np.array([[c, s], [-s, c]])
        return np.diag([1.0 / (a + b), 1.0 / a]) @ rot
    if form != "standard":
        raise ValueError(f"unknown matrix form {form!r}")
    if b == 0:
        if s != 0:
            raise DegenerateMatrixError(
                f"b = 0 with sin(gamma) = {s:g} gives an infinite entry")
        a22 = 0.0
    else:
        a22 = s / b
    return np.array([[s / a, c / (a + b)],
                     [-c / (a + b), a22]])


def build_matrices(a, b, gamma, form="standard"):
    """Vectorized :func:`build_matrix` over parameter arrays; shape (n, 2, 2)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    gamma = np.asarray(gamma, float)
    s, c = np.sin(gamma), np.cos(gamma)
    out = np.empty(a.shape + (2, 2))
    if form == "rotation":
        out[..., 0, 0] = c / (a + b)
        out[..., 0, 1] = s / (a + b)
        out[..., 1, 0] = -s / a
        out[..., 1, 1] = c / a
        return out
    if form != "standard":
        raise ValueError(f"unknown matrix form {form!r}")
    bad = (b == 0) & (s != 0)
    if bad.any():
        raise DegenerateMatrixError("b = 0 with sin(gamma) != 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        a22 = np.where(b == 0, 0.0, s / np.where(b == 0, 1.0, b))
    out[..., 0, 0] = s / a
    out[..., 0, 1] = c / (a + b)
    out[..., 1, 0] = -c / (a + b)
    out[..., 1, 1] = a22
    return out


def _check_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.isfinite(A).all() or not A.any():
        raise DegenerateMatrixError(f"invalid anisotropy matrix {A!r}")
    return A


def omega(A):
    """Kernel matrix (A^T A)^{-1}."""
    A = _check_matrix(A)
    Q = A.T @ A
    det = Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
    if not det > 0:
        raise DegenerateMatrixError("A^T A is singular")
    return np.array([[Q[1, 1], -Q[0, 1]], [-Q[1, 0], Q[0, 0]]]) / det


def corr_stationary(A, alpha, h):
    """exp(-||A h||^alpha) for lag vectors ``h`` of shape (..., 2)."""
    A = _check_matrix(A)
    h = np.asarray(h, dtype=float)
    dist = np.linalg.norm(h @ A.T, axis=-1)
    out = np.exp(-dist ** alpha)
    return float(out) if out.ndim == 0 else out


def corr_nonstationary(A1, A2, alpha, s1, s2):
    """Kernel-convolution correlation between ``s1`` (matrix A1) and ``s2`` (A2)."""
    om1, om2 = omega(A1), omega(A2)
    mean = 0.5 * (om1 + om2)
    det1, det2 = np.linalg.det(om1), np.linalg.det(om2)
    detm = np.linalg.det(mean)
    delta = np.asarray(s1, float) - np.asarray(s2, float)
    quad = float(delta @ np.linalg.solve(mean, delta))
    pref = det1 ** 0.25 * det2 ** 0.25 / math.sqrt(detm)
    return pref * math.exp(-max(quad, 0.0) ** (0.5 * alpha))


def corr_matrix_stationary(coords, A, alpha):
    """n x n correlation matrix of a stationary field on ``coords`` (n, 2)."""
    coords = np.asarray(coords, float)
    lag = coords[:, None, :] - coords[None, :, :]
    return corr_stationary(A, alpha, lag)


def corr_matrix_nonstationary(coords, mats, alpha):
    """n x n kernel-convolution correlation matrix; ``mats`` has shape (n, 2, 2)."""
    coords = np.asarray(coords, float)
    mats = np.asarray(mats, float)
    if not np.isfinite(mats).all():
        raise DegenerateMatrixError("non-finite anisotropy matrix")
    Q = np.einsum("nki,nkj->nij", mats, mats)
    detq = Q[:, 0, 0] * Q[:, 1, 1] - Q[:, 0, 1] * Q[:, 1, 0]
    if not (detq > 0).all():
        raise DegenerateMatrixError("A^T A is singular at some location")
    # Omega = inv(Q), entries written out for the 2x2 case
    p = Q[:, 1, 1] / detq
    r = -Q[:, 0, 1] / detq
    t = Q[:, 0, 0] / detq
    det_om = 1.0 / detq
    mp = 0.5 * (p[:, None] + p[None, :])
    mr = 0.5 * (r[:, None] + r[None, :])
    mt = 0.5 * (t[:, None] + t[None, :])
    detm = mp * mt - mr * mr
    dx = coords[:, None, 0] - coords[None, :, 0]
    dy = coords[:, None, 1] - coords[None, :, 1]
    quad = (mt * dx * dx - 2.0 * mr * dx * dy + mp * dy * dy) / detm
    pref = (det_om[:, None] * det_om[None, :]) ** 0.25 / np.sqrt(detm)
    out = pref * np.exp(-np.maximum(quad, 0.0) ** (0.5 * alpha))
    np.fill_diagonal(out, 1.0)
    return out


# ---------------------------------------------------------------------------
# exponent function and density

def _check_inputs(y1, y2, rho):
    y1 = np.asarray(y1, float)
    y2 = np.asarray(y2, float)
    rho = np.asarray(rho, float)
    if not ((y1 > 0).all() and (y2 > 0).all()):
        raise DomainError("exponent function needs positive arguments")
    if not ((rho > -1) & (rho < 1)).all():
        raise DomainError("rho must lie strictly inside (-1, 1)")
    return y1, y2, rho


def _standardized(y1, y2, rho, nu):
    k = nu + 1.0
    scale = np.sqrt((1.0 - rho * rho) / k)
    r = (y2 / y1) ** (1.0 / nu)
    return r, scale, (r - rho) / scale, (1.0 / r - rho) / scale


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def exponent_V(y1, y2, rho, g):
    """Bivariate exponent function V(y1, y2) of the extremal-t model."""
    y1, y2, rho = _check_inputs(y1, y2, rho)
    _, _, z1, z2 = _standardized(y1, y2, rho, g.nu)
    k = g.nu + 1.0
    return _out(student_t_cdf(z1, k) / y1 + student_t_cdf(z2, k) / y2)


def exponent_V_partials(y1, y2, rho, g):
    """Analytic (dV/dy1, dV/dy2, d2V/dy1dy2).

    The Student-t density terms from differentiating the two CDF arguments
    cancel in the first derivatives, leaving dV/dy1 = -T(z1)/y1^2.
    """
    y1, y2, rho = _check_inputs(y1, y2, rho)
    nu = g.nu
    k = nu + 1.0
    r, scale, z1, z2 = _standardized(y1, y2, rho, nu)
    v1 = -student_t_cdf(z1, k) / y1 ** 2
    v2 = -student_t_cdf(z2, k) / y2 ** 2
    dens1 = np.exp(student_t_logpdf(z1, k))
    v12 = -dens1 * r / (scale * nu * y1 ** 2 * y2)
    return _out(v1), _out(v2), _out(v12)


def bivariate_log_density(y1, y2, rho, g):
    """log of exp(-V) (V1 V2 - V12)."""
    V = exponent_V(y1, y2, rho, g)
    v1, v2, v12 = exponent_V_partials(y1, y2, rho, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.asarray(V) + np.log(np.asarray(v1) * v2 - v12)
    if not np.isfinite(out).all():
        raise NumericalDomainError("log-density is not finite")
    return _out(out)


def theta_theoretical(rho, g):
    """Pairwise extremal coefficient V(1, 1) for correlation ``rho``."""
    rho = np.asarray(rho, float)
    if not ((rho > -1) & (rho <= 1)).all():
        raise DomainError("rho must lie in (-1, 1]")
    k = g.nu + 1.0
    with np.errstate(divide="ignore"):
        arg = np.sqrt(k) * np.sqrt((1.0 - rho) / (1.0 + rho))
    return _out(2.0 * student_t_cdf(arg, k))


# ---------------------------------------------------------------------------
# likelihood kernels
#
# For fixed nu the ratios r = (y2/y1)^(1/nu) do not depend on the anisotropy
# parameters, so PairWork computes them once per pair set and every
# likelihood evaluation only redoes the rho-dependent part.

_SERIES_FLOOR = -10.0


@njit(cache=True)
def _cdf_kernel(t, k, kint, lbeta):
    """(T_k(t), (k / (k + t^2))^((k+1)/2)) with a shared square root."""
    q = k + t * t
    cos2 = k / q
    if kint > 0 and t > _SERIES_FLOOR:
        sq = math.sqrt(q)
        if kint % 2 == 0:
            term = 1.0
            acc = 1.0
            pw = 1.0
            for j in range(1, kint // 2):
                term *= cos2 * (2 * j - 1) / (2 * j)
                acc += term
            for j in range(kint // 2):
                pw *= cos2
            return 0.5 + 0.5 * (t / sq) * acc, pw * math.sqrt(k) / sq
        theta = math.atan(t / math.sqrt(k))
        term = 1.0
        acc = 1.0
        for j in range(1, (kint - 1) // 2):
            term *= cos2 * (2 * j) / (2 * j + 1)
            acc += term
        pw = 1.0
        for j in range((kint + 1) // 2):
            pw *= cos2
        if kint == 1:
            return 0.5 + theta / math.pi, pw
        return 0.5 + (theta + t * math.sqrt(k) / q * acc) / math.pi, pw
    # incomplete beta route, lower or upper tail
    a = 0.5 * k
    x = cos2
    y = t * t / q
    if x <= 0.0:
        tail = 0.0
    elif y <= 0.0:
        tail = 1.0
    else:
        lbt = lbeta + a * math.log(x) + 0.5 * math.log(y)
        if x < (a + 1.0) / (a + 1.5 + 1.0):
            tail = math.exp(lbt) * _betacf(a, 0.5, x) / a
        else:
            tail = 1.0 - math.exp(lbt) * _betacf(0.5, a, y) / 0.5
    cdf = 0.5 * tail if t <= 0 else 1.0 - 0.5 * tail
    return cdf, math.exp(-0.5 * (k + 1.0) * math.log1p(t * t / k))


@functools.lru_cache(maxsize=None)
def _work_kernel(kint):
    """Pair-sum kernel specialized to one integer df (0 = general df).

    Freezing ``kint`` as a compile-time constant lets numba unroll the series
    loops, which roughly halves the cost per density evaluation.
    """

    @njit(error_model="numpy")
    def kernel(ratio, iyt, pi, pj, rho, nu, lbeta, normc, out):
        k = nu + 1.0
        m = ratio.shape[1]
        for p in range(pi.size):
            rp = rho[p]
            if rp > RHO_MAX:
                rp = RHO_MAX
            scale = math.sqrt((1.0 - rp * rp) / k)
            inv = 1.0 / scale
            cst = normc / (scale * nu)
            i = pi[p]
            j = pj[p]
            acc = 0.0
            for s in range(m):
                r = ratio[p, s]
                t1, d1 = _cdf_kernel((r - rp) * inv, k, kint, lbeta)
                t2, _ = _cdf_kernel((1.0 / r - rp) * inv, k, kint, lbeta)
                iy2 = iyt[j, s]
                inner = t1 * t2 * iy2 + d1 * r * cst
                if inner > 0.0:
                    acc += t1 * iyt[i, s] + t2 * iy2 - math.log(inner)
                else:
                    acc = math.inf
            out[p] = acc

    return kernel


class PairData:
    """Observations laid out for the likelihood kernels.

    ``data`` is the (m, n) unit-Frechet matrix; it is stored transposed so
    that each location's sample is contiguous.
    """

    def __init__(self, data):
        data = np.asarray(data, float)
        self.yt = np.ascontiguousarray(data.T)
        self.lyt = np.log(self.yt)
        self.iyt = 1.0 / self.yt

    def work(self, pi, pj, nu):
        return PairWork(self, pi, pj, nu)

    def nll_each(self, pi, pj, rho, g):
        return self.work(pi, pj, g.nu).nll_each(rho)

    def nll_sum(self, pi, pj, rho, g):
        return self.work(pi, pj, g.nu).nll_sum(rho)


class PairWork:
    """Parameter-free part of the pairwise likelihood for one pair set and nu."""

    def __init__(self, pd, pi, pj, nu):
        self.pd = pd
        self.pi = np.ascontiguousarray(pi, dtype=np.int64)
        self.pj = np.ascontiguousarray(pj, dtype=np.int64)
        self.nu = float(nu)
        k = self.nu + 1.0
        self.kint = integer_df(k)
        self.lbeta = math.lgamma(0.5 * k + 0.5) - math.lgamma(0.5 * k) - math.lgamma(0.5)
        self.normc = math.exp(t_log_norm_const(k))
        self.ratio = np.exp((pd.lyt[self.pj] - pd.lyt[self.pi]) / self.nu)
        # log-Jacobian part -2 log y1 - log y2 of each log-density
        self.jac = (2.0 * pd.lyt[self.pi] + pd.lyt[self.pj]).sum(axis=1)

    def nll_each(self, rho):
        out = np.empty(len(self.pi))
        _work_kernel(self.kint)(self.ratio, self.pd.iyt, self.pi, self.pj,
                                np.ascontiguousarray(rho, dtype=float), self.nu,
                                self.lbeta, self.normc, out)
        return out + self.jac

    def nll_sum(self, rho):
        return float(self.nll_each(rho).sum())
