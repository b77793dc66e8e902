"""Acceptance criteria 1-9.

Each test carries ``@pytest.mark.acceptance(n)``; the conftest hook prints one
PASS/FAIL line per criterion at the end of the session.
"""
import json
import math
import shutil
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
from scipy import stats

from maxregion.cli import main
from maxregion.config import load_config, apply_overrides
from maxregion.empirical import fmadogram_theta_matrix
from maxregion.experiment import combo_name, load_winners, run_experiment
from maxregion.fit import fit_cluster_mle
from maxregion.model import (AnisotropyParams, GlobalParams, bivariate_log_density,
                             build_matrix, exponent_V, exponent_V_partials, theta_theoretical)
from maxregion.regionalize import (LocalEstimateField, agglomerative_cluster, edc_dissimilarity,
                                   ellipse_jaccard, lec_dissimilarity)
from maxregion.simulate import GridSpec, build_parameter_field, correlation_matrix, max_stable_sample

ROOT = Path(__file__).resolve().parents[1]
G5 = GlobalParams(5.0, 1.0)


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


# 1 ------------------------------------------------------------------------------

@pytest.mark.acceptance(1)
@pytest.mark.slow
def test_extremal_coefficient_consistency():
    t0 = time.perf_counter()
    pf = build_parameter_field("constant", GridSpec(resolution=1.0),
                               {"a": 2.0, "b": 0.0, "gamma": 0.0}, G5)
    obs = max_stable_sample(pf, True, 5000, seed=101)
    th_hat = fmadogram_theta_matrix(obs)
    th = theta_theoretical(correlation_matrix(pf, True), G5)
    rng = np.random.default_rng(7)
    n = pf.coords.shape[0]
    pairs = set()
    while len(pairs) < 20:
        i, j = sorted(rng.choice(n, 2, replace=False).tolist())
        pairs.add((i, j))
    err = max(abs(th_hat[i, j] - th[i, j]) for i, j in pairs)
    elapsed = time.perf_counter() - t0
    report(1, err <= 0.05 and elapsed <= 120, f"max error {err:.4f}, {elapsed:.0f} s")
    assert err <= 0.05
    assert elapsed <= 120


# 2 ------------------------------------------------------------------------------

@pytest.mark.acceptance(2)
def test_closed_form_checkpoint():
    x = math.sqrt(2.0)  # sqrt(nu + 1) * sqrt((1 - 0) / (1 + 0)) with nu = 1
    oracle = 2 * (0.5 + x / (2 * math.sqrt(2 + x * x)))  # df = 2 closed form
    got = theta_theoretical(0.0, GlobalParams(1.0, 1.0))
    report(2, abs(got - oracle) <= 1e-9, f"{got!r} vs {oracle!r}")
    assert got == pytest.approx(1 + 1 / math.sqrt(2), abs=1e-9)
    assert got == pytest.approx(oracle, abs=1e-9)


# 3 ------------------------------------------------------------------------------

def _fd_mixed(F, y1, y2):
    def d(h1, h2):
        return (F(y1 + h1, y2 + h2) - F(y1 + h1, y2 - h2) - F(y1 - h1, y2 + h2)
                + F(y1 - h1, y2 - h2)) / (4 * h1 * h2)
    h1, h2 = 2e-3 * y1, 2e-3 * y2
    return (4 * d(h1 / 2, h2 / 2) - d(h1, h2)) / 3


def _mp_V(y1, y2, rho, nu):
    """Exponent function in 40-digit arithmetic, written from the t CDF via betainc."""
    def tcdf(x, k):
        tail = mpmath.betainc(k / 2, mpmath.mpf(1) / 2, 0, k / (k + x * x), regularized=True) / 2
        return 1 - tail if x > 0 else tail
    nu = mpmath.mpf(nu)
    k = nu + 1
    s = mpmath.sqrt((1 - rho * rho) / k)
    r = (y2 / y1) ** (1 / nu)
    return tcdf((r - rho) / s, k) / y1 + tcdf((1 / r - rho) / s, k) / y2


def _mp_partials(y1, y2, rho, nu):
    with mpmath.workdps(40):
        y1, y2, rho = mpmath.mpf(y1), mpmath.mpf(y2), mpmath.mpf(rho)
        V = lambda a, b: _mp_V(a, b, rho, nu)  # noqa: E731
        h = mpmath.mpf("1e-12")
        d1 = (V(y1 + h, y2) - V(y1 - h, y2)) / (2 * h)
        d2 = (V(y1, y2 + h) - V(y1, y2 - h)) / (2 * h)
        d12 = (V(y1 + h, y2 + h) - V(y1 + h, y2 - h) - V(y1 - h, y2 + h)
               + V(y1 - h, y2 - h)) / (4 * h * h)
        return float(d1), float(d2), float(d12)


@pytest.mark.acceptance(3)
def test_density_and_partials_against_finite_differences():
    rng = np.random.default_rng(2024)
    worst_f, worst_p = 0.0, 0.0
    for _ in range(100):
        y1, y2 = np.exp(rng.uniform(np.log(0.2), np.log(10), 2))
        rho = rng.uniform(-0.8, 0.98)
        g = GlobalParams(rng.uniform(1.0, 10.0), 1.0)
        F = lambda a, b: math.exp(-exponent_V(a, b, rho, g))  # noqa: E731
        dens = math.exp(bivariate_log_density(y1, y2, rho, g))
        worst_f = max(worst_f, abs(dens / _fd_mixed(F, y1, y2) - 1))
        v1, v2, v12 = exponent_V_partials(y1, y2, rho, g)
        # V12 can be 1e-7 of V, beyond what double-precision differences resolve
        f1, f2, f12 = _mp_partials(y1, y2, rho, g.nu)
        worst_p = max(worst_p, abs(v1 / f1 - 1), abs(v2 / f2 - 1), abs(v12 / f12 - 1))
    report(3, worst_f <= 1e-4 and worst_p <= 1e-5,
           f"density rel err {worst_f:.2e}, partials rel err {worst_p:.2e}")
    assert worst_f <= 1e-4
    assert worst_p <= 1e-5


# 4 ------------------------------------------------------------------------------

@pytest.mark.acceptance(4)
@pytest.mark.slow
def test_parameter_recovery():
    t0 = time.perf_counter()
    truth = AnisotropyParams(2.0, 1.0, math.pi / 4)
    pf = build_parameter_field("constant", GridSpec(-4.5, 4.5, -4.5, 4.5, 1.0),
                               truth.as_dict(), G5)
    assert len(pf) == 100
    good = 0
    lines = []
    for trial in range(10):
        obs = max_stable_sample(pf, True, 250, seed=4000 + trial)
        res = fit_cluster_mle(G5, obs, np.arange(100))
        p = res.params
        dg = abs((p.gamma - truth.gamma + math.pi / 2) % math.pi - math.pi / 2)
        ok = abs(p.a / 2 - 1) <= 0.2 and abs(p.b / 1 - 1) <= 0.2 and dg <= 0.15
        good += ok
        lines.append(f"{p.a:.3f}/{p.b:.3f}/{p.gamma:.3f}")
    elapsed = time.perf_counter() - t0
    report(4, good >= 9 and elapsed <= 900,
           f"{good}/10 trials within tolerance, {elapsed:.0f} s: " + ", ".join(lines))
    assert good >= 9
    assert elapsed <= 900


# 5 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def example1_exact():
    pf = build_parameter_field("example1", GridSpec(resolution=0.5), None, G5)
    assert len(pf) == 441
    return pf


def _b_ranges(pf, labels):
    return [float(np.ptp(pf.b[labels == k])) for k in np.unique(labels)]


@pytest.mark.acceptance(5)
def test_edc_clusters_mix_b_values(example1_exact):
    pf = example1_exact
    th = theta_theoretical(correlation_matrix(pf, False), G5)
    labels = agglomerative_cluster(edc_dissimilarity(th), 5).labels
    ranges = _b_ranges(pf, labels)
    report(5, max(ranges) > 1.0, f"EDC b-ranges {ranges}")
    assert max(ranges) > 1.0


@pytest.mark.acceptance(5)
def test_lec_clusters_b_range(example1_exact):
    # 21 distinct b values 0.25 apart cannot be covered by 5 clusters of
    # range <= 0.5 (3 values each), so this bound is expected to fail
    pf = example1_exact
    D = lec_dissimilarity(LocalEstimateField.from_parameter_field(pf))
    labels = agglomerative_cluster(D, 5).labels
    ranges = _b_ranges(pf, labels)
    for x in np.unique(pf.coords[:, 0]):
        assert len(set(labels[pf.coords[:, 0] == x].tolist())) == 1
    report(5, max(ranges) <= 0.5, f"LEC b-ranges {ranges}")
    assert max(ranges) <= 0.5


# 6 ------------------------------------------------------------------------------

@pytest.mark.acceptance(6)
@pytest.mark.slow
def test_desk_scale_winner_fractions(tmp_path):
    cfg = apply_overrides(load_config(ROOT / "scripts" / "configs" / "desk_example1.toml"),
                          {"out": str(tmp_path / "desk")})
    assert (cfg.field.resolution, cfg.simulation.observations, cfg.regionalize.clusters,
            cfg.simulation.replicates) == (0.5, 100, 5, 5)
    t0 = time.perf_counter()
    run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    frac = load_winners(tmp_path / "desk" / f"winners_{combo_name(5.0, 1.0)}.csv")
    share = float(np.mean(np.nan_to_num(frac, nan=0.0) >= 0.6))
    report(6, share >= 0.9, f"LEC fraction >= 0.6 at {share:.3f} of locations, "
           f"mean fraction {np.nanmean(frac):.3f}, {elapsed:.0f} s on one core")
    assert share >= 0.9


# 7 ------------------------------------------------------------------------------

@pytest.mark.acceptance(7)
def test_jaccard_properties():
    rng = np.random.default_rng(77)
    errs = []
    for _ in range(50):
        A = build_matrix(AnisotropyParams(*rng.uniform(0.3, 4, 2), rng.uniform(0, math.pi)))
        B = build_matrix(AnisotropyParams(*rng.uniform(0.3, 4, 2), rng.uniform(0, math.pi)))
        t = rng.uniform(0, 2 * math.pi)
        R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        d = ellipse_jaccard(A, B)
        errs += [abs(ellipse_jaccard(A, A)),
                 abs(ellipse_jaccard(A, 2 * A) - 0.75),
                 abs(ellipse_jaccard(A, B, level=0.9) - d),
                 abs(ellipse_jaccard(A @ R.T, B @ R.T) - d),
                 abs(ellipse_jaccard(A, B, method="quadrature") - d)]
    report(7, max(errs) <= 1e-3, f"max deviation {max(errs):.2e}")
    assert max(errs) <= 1e-3


# 8 ------------------------------------------------------------------------------

@pytest.mark.acceptance(8)
@pytest.mark.slow
def test_max_stability():
    t0 = time.perf_counter()
    pf = build_parameter_field("constant", GridSpec(-2, 2, -2, 2, 1.0),
                               {"a": 2.0, "b": 1.0, "gamma": 0.5}, G5)
    assert len(pf) == 25
    k, m = 10, 2000
    obs = max_stable_sample(pf, True, k * m, seed=808)
    maxima = obs.data.reshape(m, k, 25).max(axis=1) / k
    pvals = [stats.kstest(maxima[:, j], lambda z: np.exp(-1.0 / z)).pvalue for j in range(25)]
    share = float(np.mean(np.array(pvals) >= 0.01))
    elapsed = time.perf_counter() - t0
    report(8, share >= 0.95 and elapsed <= 300,
           f"{share:.2f} of locations pass KS at 1%, {elapsed:.0f} s")
    assert share >= 0.95
    assert elapsed <= 300


# 9 ------------------------------------------------------------------------------

def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.suffix in (".csv", ".json") and p.name != "manifest.json"}


@pytest.mark.acceptance(9)
def test_experiment_determinism(tmp_path):
    out = tmp_path / "det"
    args = ["experiment", "--preset", "example1", "--resolution", "2.0", "--observations", "40",
            "--replicates", "2", "--clusters", "3", "--seed", "99", "--out", str(out)]
    assert main(args) == 0
    first = _snapshot(out)
    digests = json.loads((out / "manifest.json").read_text())["files"]
    shutil.rmtree(out)
    assert main(args) == 0
    second = _snapshot(out)
    same = first == second and digests == json.loads((out / "manifest.json").read_text())["files"]
    report(9, same, f"{len(first)} CSV/JSON files compared")
    assert len(first) > 10
    assert same
