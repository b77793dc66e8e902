"""Rank transformation to unit-Frechet margins and F-madogram estimates."""
import warnings

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateColumnError
from .simulate import RAW, UNIT_FRECHET, ObservationSet


def _check_columns(data):
    if data.shape[0] < 2:
        raise DegenerateColumnError("at least two observations per location are needed")
    const = np.all(data == data[0], axis=0)
    if const.any():
        raise DegenerateColumnError(
            f"constant data at location index {int(np.flatnonzero(const)[0])}")


def empirical_cdf(data):
    """Average ranks divided by m + 1, column-wise."""
    data = np.asarray(data, float)
    _check_columns(data)
    return rankdata(data, method="average", axis=0) / (data.shape[0] + 1)


def rank_frechet_transform(obs):
    """Map each location's sample to unit-Frechet scale through its ranks."""
    if obs.margins == UNIT_FRECHET:
        warnings.warn("observations are already unit-Frechet; returned unchanged",
                      stacklevel=2)
        return obs
    u = empirical_cdf(obs.data)
    return ObservationSet(obs.coords.copy(), -1.0 / np.log(u), UNIT_FRECHET,
                          list(obs.ids))


def fmadogram_theta_matrix(obs, chunk_elems=20_000_000):
    """Pairwise extremal coefficients from the F-madogram.

    nu_F = mean |F1 - F2| / 2 and theta = (1 + 2 nu_F) / (1 - 2 nu_F),
    clipped to [1, 2] with an exact unit diagonal.
    """
    data = obs.data if isinstance(obs, ObservationSet) else np.asarray(obs, float)
    u = empirical_cdf(data)
    m, n = u.shape
    ut = np.ascontiguousarray(u.T)
    mado = np.empty((n, n))
    step = max(1, chunk_elems // (m * n))
    for start in range(0, n, step):
        block = ut[start:start + step]
        mado[start:start + step] = 0.5 * np.abs(block[:, None, :] - ut[None, :, :]).mean(axis=2)
    mado = 0.5 * (mado + mado.T)
    theta = np.clip((1.0 + 2.0 * mado) / (1.0 - 2.0 * mado), 1.0, 2.0)
    np.fill_diagonal(theta, 1.0)
    return theta


__all__ = ["RAW", "UNIT_FRECHET", "empirical_cdf", "fmadogram_theta_matrix",
           "rank_frechet_transform"]
