"""Simulation study pipeline: simulate, regionalize twice, fit, compare.

Output layout under ``config.out``::

    config.json                resolved configuration
    locations.csv              id,x,y
    truth.csv                  true a, b, gamma per location
    rep00/observations.csv     one directory per replicate
    rep00/theta.csv
    rep00/nu5_alpha1/          one directory per (nu, alpha)
        edc_labels.csv lec_labels.csv local_estimates.csv
        lec_dissimilarity.csv edc_fits.json lec_fits.json gof.json
    winners_nu5_alpha1.csv     aggregated over replicates (+ .svg)
    manifest.json              timings and sha256 of every other file
"""
import json
import logging
import time
import traceback
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .empirical import fmadogram_theta_matrix, rank_frechet_transform
from .fit import default_epsilon, fit_clustering, fit_local_field
from .gof import aggregate_winner_percentages, compare_gof
from .model import GlobalParams
from .regionalize import (DissimilarityMatrix, LocalEstimateField, agglomerative_cluster,
                          edc_dissimilarity, lec_dissimilarity, smooth_estimates)
from .simulate import RAW, GridSpec, ObservationSet, build_parameter_field, max_stable_sample
from .svg import render_heatmap_svg

log = logging.getLogger(__name__)


class StageFailure(RuntimeError):
    def __init__(self, stage, manifest_path, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.manifest_path = manifest_path


def combo_name(nu, alpha):
    return f"nu{nu:g}_alpha{alpha:g}"


def edc_clustering(theta, K, linkage="average", universe=None):
    """EDC labels over ``universe`` (default: all locations)."""
    D = edc_dissimilarity(theta)
    n = len(D.values)
    if universe is not None and len(universe) < n:
        D = DissimilarityMatrix(D.values[np.ix_(universe, universe)], universe)
    return agglomerative_cluster(D, K, linkage, n_locations=n)


@dataclass
class LecResult:
    clustering: object
    raw: LocalEstimateField
    smoothed: LocalEstimateField
    dissimilarity: DissimilarityMatrix
    epsilon: float
    radius: float


def lec_clustering(obs, globals_, K, linkage="average", epsilon="auto",
                   radius="auto", min_neighbors=4, form="standard", workers=1,
                   fit_options=None):
    """Local fits, smoothing, Jaccard dissimilarity, clustering."""
    eps = default_epsilon(obs.coords) if epsilon in ("auto", None) else float(epsilon)
    rad = 1.5 * eps if radius in ("auto", None) else float(radius)
    fits = fit_local_field(globals_, obs, eps, min_neighbors, fit_options, workers)
    raw = LocalEstimateField.from_fits(obs.coords, fits, form)
    smoothed = smooth_estimates(raw, rad)
    D = lec_dissimilarity(smoothed)
    clus = agglomerative_cluster(D, K, linkage, n_locations=obs.n)
    return LecResult(clus, raw, smoothed, D, eps, rad)


def write_local_estimates(path, ids, raw, smoothed):
    rows = []
    for i in range(len(ids)):
        rows.append([str(ids[i]), int(raw.excluded[i]), raw.a[i], raw.b[i], raw.gamma[i],
                     smoothed.a[i], smoothed.b[i], smoothed.gamma[i]])
    return io._write_rows(path, ["id", "excluded", "a", "b", "gamma",
                                 "a_smooth", "b_smooth", "gamma_smooth"], rows)


class _Run:
    """Bookkeeping for one experiment: files written and stage timings."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.root = Path(cfg.out)
        self.files = []
        self.timings = defaultdict(float)

    def path(self, rel):
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(p)
        return p

    def stage(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                run.current = name
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] += time.perf_counter() - self.t0
                return False

        return _Timer()

    def manifest(self, status, failure=None):
        inventory = {}
        for p in sorted(set(self.files)):
            if p.exists():
                inventory[p.relative_to(self.root).as_posix()] = io.sha256_file(p)
        doc = {"version": __version__, "config": self.cfg.to_dict(), "status": status,
               "timings_seconds": dict(sorted(self.timings.items())), "files": inventory}
        if failure is not None:
            doc["failure"] = failure
        path = self.root / "manifest.json"
        io.write_json(path, doc)
        return doc


def run_experiment(cfg):
    """Execute the full protocol described by ``cfg``; returns the manifest dict."""
    if cfg.is_long_running():
        log.warning("configuration is beyond desk scale and may run for hours")
    run = _Run(cfg)
    run.root.mkdir(parents=True, exist_ok=True)
    try:
        return _execute(run)
    except Exception as exc:
        failure = {"stage": getattr(run, "current", "setup"), "error": repr(exc),
                   "traceback": traceback.format_exc()}
        run.manifest("failed", failure)
        raise StageFailure(failure["stage"], run.root / "manifest.json", exc) from exc


def _execute(run):
    cfg = run.cfg
    fc, sc, rc = cfg.field, cfg.simulation, cfg.regionalize
    with run.stage("setup"):
        grid = GridSpec(fc.xmin, fc.xmax, fc.ymin, fc.ymax, fc.resolution)
        truth = GlobalParams(sc.nu, sc.alpha)
        pfield = build_parameter_field(fc.preset, grid, fc.overrides(), truth, fc.form)
        stationary = pfield.is_constant()
        ids = [str(i) for i in range(len(pfield))]
        io.write_json(run.path("config.json"), cfg.to_dict())
        io.write_locations(run.path("locations.csv"), ids, pfield.coords)
        io._write_rows(run.path("truth.csv"), ["id", "a", "b", "gamma"],
                       ([ids[i], pfield.a[i], pfield.b[i], pfield.gamma[i]]
                        for i in range(len(ids))))
    combos = [(float(nu), float(alpha)) for nu, alpha in cfg.fit.globals]
    reports = {c: [] for c in combos}
    max_distance = cfg.fit.max_distance()
    for r in range(sc.replicates):
        rep = f"rep{r:02d}"
        with run.stage("simulate"):
            obs = max_stable_sample(pfield, stationary, sc.observations, cfg.seed,
                                    replicate=r, method=sc.method, accuracy=sc.accuracy)
            obs.ids = ids
            io.write_observations(run.path(f"{rep}/observations.csv"), obs)
        if sc.transform:
            with run.stage("transform"):
                obs = rank_frechet_transform(ObservationSet(obs.coords, obs.data, RAW, ids))
        theta = None
        if rc.algorithm in ("edc", "both"):
            with run.stage("madogram"):
                theta = fmadogram_theta_matrix(obs)
                io.write_square(run.path(f"{rep}/theta.csv"), ids, theta)
        for nu, alpha in combos:
            g = GlobalParams(nu, alpha)
            sub = f"{rep}/{combo_name(nu, alpha)}"
            lec = None
            if rc.algorithm in ("lec", "both"):
                with run.stage("lec"):
                    lec = lec_clustering(obs, g, rc.clusters, rc.linkage, rc.epsilon,
                                         rc.smoothing_radius, rc.min_neighbors, fc.form,
                                         cfg.workers)
                    io.write_labels(run.path(f"{sub}/lec_labels.csv"), ids, lec.clustering.labels)
                    write_local_estimates(run.path(f"{sub}/local_estimates.csv"), ids,
                                          lec.raw, lec.smoothed)
                    kept = [ids[i] for i in lec.dissimilarity.index]
                    io.write_square(run.path(f"{sub}/lec_dissimilarity.csv"), kept,
                                    lec.dissimilarity.values)
            edc = None
            if theta is not None:
                with run.stage("edc"):
                    universe = lec.dissimilarity.index if lec is not None else None
                    edc = edc_clustering(theta, rc.clusters, rc.linkage, universe)
                    io.write_labels(run.path(f"{sub}/edc_labels.csv"), ids, edc.labels)
            with run.stage("fit"):
                fits = {}
                for name, clus in (("edc", edc), ("lec", lec and lec.clustering)):
                    if clus is None:
                        continue
                    fits[name] = fit_clustering(g, obs, clus.labels, max_distance)
                    io.write_fits(run.path(f"{sub}/{name}_fits.json"), fits[name])
            if edc is not None and lec is not None:
                with run.stage("gof"):
                    report = compare_gof(obs, g, edc, fits["edc"], lec.clustering, fits["lec"],
                                         max_distance, fc.form)
                    io.write_json(run.path(f"{sub}/gof.json"), report.to_dict())
                    reports[(nu, alpha)].append(report)
            if r == 0:
                with run.stage("render"):
                    for name, clus in (("edc", edc), ("lec", lec and lec.clustering)):
                        if clus is not None:
                            svg = render_heatmap_svg(pfield.coords, clus.labels,
                                                     f"{name.upper()} clusters, {sub}",
                                                     boundaries=clus.labels)
                            run.path(f"{sub}/{name}_clusters.svg").write_text(svg)
    with run.stage("aggregate"):
        for (nu, alpha), reps in reports.items():
            if not reps:
                continue
            agg = aggregate_winner_percentages(reps, len(ids))
            stem = f"winners_{combo_name(nu, alpha)}"
            io.write_winners(run.path(f"{stem}.csv"), ids, agg)
            svg = render_heatmap_svg(pfield.coords, agg.lec_fraction,
                                     f"LEC win fraction, {combo_name(nu, alpha)}, "
                                     f"{agg.replicates} replicates", vmin=0.0, vmax=1.0)
            run.path(f"{stem}.svg").write_text(svg)
    run.current = "manifest"
    return run.manifest("complete")


def load_winners(path):
    """Per-location LEC fraction from a winners CSV, as a float array."""
    header, rows = io._read_rows(path)
    col = header.index("lec_fraction")
    return np.array([float(r[col]) for r in rows])


def manifest_matches_directory(root):
    """True when the manifest inventory equals the files present (minus itself)."""
    root = Path(root)
    doc = json.loads((root / "manifest.json").read_text())
    present = {p.relative_to(root).as_posix() for p in root.rglob("*")
               if p.is_file() and p.name != "manifest.json"}
    if present != set(doc["files"]):
        return False
    return all(io.sha256_file(root / k) == v for k, v in doc["files"].items())
