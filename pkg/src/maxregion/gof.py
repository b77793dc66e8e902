"""Likelihood comparison of two regionalizations on cluster intersections.

The first clustering plays the EDC role and the second the LEC role.  On
every intersection with at least two members both cluster fits are scored by
the same composite likelihood (same pairs), and the larger value wins.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClusteringMismatchError, MissingFitError
from .fit import cluster_composite_nll, policy_pairs

EDC, LEC, TIE, SKIPPED = "EDC", "LEC", "tie", "skipped"
TIE_TOLERANCE = 1e-9
_SWAP = {EDC: LEC, LEC: EDC, TIE: TIE, SKIPPED: SKIPPED}


@dataclass
class Intersection:
    sigma: int
    tau: int
    members: np.ndarray
    loglik_edc: float = math.nan
    loglik_lec: float = math.nan
    winner: str = SKIPPED

    @property
    def eligible(self):
        return len(self.members) >= 2

    @property
    def difference(self):
        """log-likelihood of LEC minus that of EDC."""
        return self.loglik_lec - self.loglik_edc

    def to_dict(self):
        return {"sigma": self.sigma, "tau": self.tau,
                "members": [int(i) for i in self.members],
                "loglik_edc": _json_float(self.loglik_edc),
                "loglik_lec": _json_float(self.loglik_lec),
                "winner": self.winner}


def _json_float(v):
    return None if not np.isfinite(v) else float(v)


@dataclass
class GofReport:
    n_locations: int
    intersections: list = field(default_factory=list)

    def winner_map(self):
        """Location index -> winner label; skipped locations are absent."""
        out = {}
        for it in self.intersections:
            if it.winner != SKIPPED:
                for loc in it.members:
                    out[int(loc)] = it.winner
        return out

    def counts(self):
        c = {EDC: 0, LEC: 0, TIE: 0, SKIPPED: 0}
        for it in self.intersections:
            c[it.winner] += 1
        return c

    def to_dict(self):
        return {"n_locations": self.n_locations, "counts": self.counts(),
                "intersections": [it.to_dict() for it in self.intersections]}

    @classmethod
    def from_dict(cls, d):
        its = []
        for e in d["intersections"]:
            its.append(Intersection(
                int(e["sigma"]), int(e["tau"]), np.asarray(e["members"], dtype=np.int64),
                math.nan if e["loglik_edc"] is None else float(e["loglik_edc"]),
                math.nan if e["loglik_lec"] is None else float(e["loglik_lec"]),
                e["winner"]))
        return cls(int(d["n_locations"]), its)


def intersect_clusterings(sigma, tau):
    """Non-empty intersections of every sigma cluster with every tau cluster."""
    ls = np.asarray(getattr(sigma, "labels", sigma))
    lt = np.asarray(getattr(tau, "labels", tau))
    if ls.shape != lt.shape:
        raise ClusteringMismatchError(
            f"clusterings cover {ls.size} and {lt.size} locations")
    if not np.array_equal(ls > 0, lt > 0):
        raise ClusteringMismatchError("clusterings label different location sets")
    out = []
    for i in np.unique(ls[ls > 0]):
        in_i = ls == i
        for j in np.unique(lt[in_i]):
            members = np.flatnonzero(in_i & (lt == j))
            out.append(Intersection(int(i), int(j), members))
    return out


def _params(fits, label, role):
    if label not in fits:
        raise MissingFitError(f"no {role} fit for cluster {label}")
    res = fits[label]
    return res.params if hasattr(res, "params") else res


def compare_gof(obs, globals_, sigma, sigma_fits, tau, tau_fits,
                max_distance="auto", form="standard"):
    """Score both fits on each eligible intersection and pick a winner."""
    its = intersect_clusterings(sigma, tau)
    for it in its:
        if not it.eligible:
            continue
        p_edc = _params(sigma_fits, it.sigma, "first-clustering")
        p_lec = _params(tau_fits, it.tau, "second-clustering")
        pairs = policy_pairs(obs.coords, it.members, max_distance)
        if len(pairs) == 0:
            continue
        it.loglik_edc = -cluster_composite_nll(p_edc, globals_, obs, it.members, pairs, form)
        it.loglik_lec = -cluster_composite_nll(p_lec, globals_, obs, it.members, pairs, form)
        diff = it.difference
        if abs(diff) < TIE_TOLERANCE:
            it.winner = TIE
        else:
            it.winner = LEC if diff > 0 else EDC
    return GofReport(len(np.asarray(getattr(sigma, "labels", sigma))), its)


def swap_roles(report):
    """The report obtained by exchanging the two clusterings."""
    its = [Intersection(it.tau, it.sigma, it.members.copy(), it.loglik_lec,
                        it.loglik_edc, _SWAP[it.winner])
           for it in report.intersections]
    its.sort(key=lambda it: (it.sigma, it.tau))
    return GofReport(report.n_locations, its)


@dataclass
class WinnerAggregate:
    """Per-location LEC win fractions over non-skipped replicates."""

    lec_fraction: np.ndarray
    lec_wins: np.ndarray
    edc_wins: np.ndarray
    ties: np.ndarray
    scored: np.ndarray
    replicates: int

    def to_rows(self):
        for i in range(len(self.scored)):
            yield (i, self.lec_fraction[i], int(self.lec_wins[i]), int(self.edc_wins[i]),
                   int(self.ties[i]), int(self.scored[i]))


def aggregate_winner_percentages(reports, n_locations=None):
    """Fraction of scored replicates won by LEC at each location.

    Ties count as scored but not won, and are tallied separately.  Locations
    never scored get NaN.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    n = n_locations if n_locations is not None else reports[0].n_locations
    lec = np.zeros(n, dtype=np.int64)
    edc = np.zeros(n, dtype=np.int64)
    tie = np.zeros(n, dtype=np.int64)
    for rep in reports:
        for loc, w in rep.winner_map().items():
            if w == LEC:
                lec[loc] += 1
            elif w == EDC:
                edc[loc] += 1
            else:
                tie[loc] += 1
    scored = lec + edc + tie
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(scored > 0, lec / np.maximum(scored, 1), np.nan)
    return WinnerAggregate(frac, lec, edc, tie, scored, len(reports))
