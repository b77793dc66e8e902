"""Command-line entry point: ``python -m maxregion <subcommand> ...``."""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import apply_overrides, config_from_dict, load_config
from .empirical import fmadogram_theta_matrix, rank_frechet_transform
from .errors import MaxRegionError
from .experiment import (StageFailure, edc_clustering, lec_clustering, run_experiment,
                         write_local_estimates)
from .fit import fit_clustering
from .gof import aggregate_winner_percentages, compare_gof
from .model import GlobalParams
from .simulate import RAW, UNIT_FRECHET, GridSpec, build_parameter_field, max_stable_sample
from .svg import render_heatmap_svg

log = logging.getLogger("maxregion")


def _common(p):
    p.add_argument("--config", type=Path, help="TOML experiment configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.add_argument("--preset", choices=["example1", "example2", "example3", "constant"])
    p.add_argument("--nu", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--clusters", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--resolution", type=float)
    p.add_argument("--observations", type=int, help="number of simulated fields m")
    p.add_argument("--algorithm", choices=["edc", "lec", "both"])
    p.add_argument("-v", "--verbose", action="store_true")


def _data_args(p):
    p.add_argument("--data", type=Path, required=True, help="observations CSV")
    p.add_argument("--locations", type=Path, required=True, help="locations CSV")
    p.add_argument("--raw", action="store_true", help="data are not unit-Frechet")


def build_parser():
    parser = argparse.ArgumentParser(prog="maxregion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate max-stable fields on a preset grid")
    _common(p)

    p = sub.add_parser("transform", help="rank-transform observations to unit Frechet")
    _common(p)
    _data_args(p)

    p = sub.add_parser("regionalize", help="EDC and/or LEC clustering of observations")
    _common(p)
    _data_args(p)

    p = sub.add_parser("fit", help="fit a stationary model per cluster")
    _common(p)
    _data_args(p)
    p.add_argument("--labels", type=Path, required=True)

    p = sub.add_parser("gof", help="compare two clusterings on their intersections")
    _common(p)
    _data_args(p)
    p.add_argument("--labels-edc", type=Path, required=True)
    p.add_argument("--labels-lec", type=Path, required=True)
    p.add_argument("--fits-edc", type=Path, required=True)
    p.add_argument("--fits-lec", type=Path, required=True)

    p = sub.add_parser("experiment", help="run the full simulation protocol")
    _common(p)

    p = sub.add_parser("render", help="SVG heat map of one CSV column")
    _common(p)
    p.add_argument("--values", type=Path, required=True, help="CSV with an id column")
    p.add_argument("--locations", type=Path, required=True)
    p.add_argument("--column", default=None, help="column to draw (default: second)")
    p.add_argument("--boundaries", type=Path, help="labels CSV for cluster outlines")
    p.add_argument("--title", default="")
    return parser


def resolve_config(args):
    """Config file (or defaults) with command-line flags applied on top."""
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict({"seed": args.seed if args.seed is not None else 0})
    globals_ = None
    if args.nu is not None or args.alpha is not None:
        nu = args.nu if args.nu is not None else cfg.simulation.nu
        alpha = args.alpha if args.alpha is not None else cfg.simulation.alpha
        globals_ = [[nu, alpha]]
    return apply_overrides(cfg, {
        "seed": args.seed, "out": args.out, "field.preset": args.preset,
        "field.resolution": args.resolution, "simulation.nu": args.nu,
        "simulation.alpha": args.alpha, "simulation.observations": args.observations,
        "simulation.replicates": args.replicates, "regionalize.clusters": args.clusters,
        "regionalize.algorithm": args.algorithm, "fit.globals": globals_})


def _fit_globals(cfg):
    nu, alpha = cfg.fit.globals[0]
    return GlobalParams(float(nu), float(alpha))


def _load_obs(args):
    return io.read_observations(args.data, args.locations, RAW if args.raw else UNIT_FRECHET)


def cmd_simulate(args, cfg):
    out = Path(cfg.out)
    fc, sc = cfg.field, cfg.simulation
    grid = GridSpec(fc.xmin, fc.xmax, fc.ymin, fc.ymax, fc.resolution)
    pf = build_parameter_field(fc.preset, grid, fc.overrides(), GlobalParams(sc.nu, sc.alpha),
                               fc.form)
    ids = [str(i) for i in range(len(pf))]
    io.write_locations(out / "locations.csv", ids, pf.coords)
    for r in range(sc.replicates):
        obs = max_stable_sample(pf, pf.is_constant(), sc.observations, cfg.seed, r,
                                sc.method, sc.accuracy)
        obs.ids = ids
        io.write_observations(out / f"observations_rep{r:02d}.csv", obs)
    print(f"wrote {sc.replicates} replicate(s) of {len(ids)} locations to {out}")


def cmd_transform(args, cfg):
    obs = io.read_observations(args.data, args.locations, RAW)
    res = rank_frechet_transform(obs)
    path = io.write_observations(Path(cfg.out) / "observations_frechet.csv", res)
    print(f"wrote {path}")


def cmd_regionalize(args, cfg):
    out = Path(cfg.out)
    obs = _load_obs(args)
    if obs.margins == RAW:
        obs = rank_frechet_transform(obs)
    rc = cfg.regionalize
    universe = None
    if rc.algorithm in ("lec", "both"):
        lec = lec_clustering(obs, _fit_globals(cfg), rc.clusters, rc.linkage, rc.epsilon,
                             rc.smoothing_radius, rc.min_neighbors, cfg.field.form, cfg.workers)
        universe = lec.dissimilarity.index
        io.write_labels(out / "lec_labels.csv", obs.ids, lec.clustering.labels)
        write_local_estimates(out / "local_estimates.csv", obs.ids, lec.raw, lec.smoothed)
        io.write_square(out / "lec_dissimilarity.csv", [obs.ids[i] for i in universe],
                        lec.dissimilarity.values)
    if rc.algorithm in ("edc", "both"):
        theta = fmadogram_theta_matrix(obs)
        io.write_square(out / "theta.csv", obs.ids, theta)
        edc = edc_clustering(theta, rc.clusters, rc.linkage, universe)
        io.write_labels(out / "edc_labels.csv", obs.ids, edc.labels)
    print(f"wrote clustering output to {out}")


def cmd_fit(args, cfg):
    obs = _load_obs(args)
    _, labels = io.read_labels(args.labels, obs.ids)
    fits = fit_clustering(_fit_globals(cfg), obs, labels, cfg.fit.max_distance(),
                          None)
    path = io.write_fits(Path(cfg.out) / f"{args.labels.stem}_fits.json", fits)
    print(f"wrote {len(fits)} cluster fit(s) to {path}")


def cmd_gof(args, cfg):
    from .regionalize import Clustering
    obs = _load_obs(args)
    _, le = io.read_labels(args.labels_edc, obs.ids)
    _, ll = io.read_labels(args.labels_lec, obs.ids)
    sigma = Clustering(le, int(le.max()))
    tau = Clustering(ll, int(ll.max()))
    report = compare_gof(obs, _fit_globals(cfg), sigma, io.read_fits(args.fits_edc),
                         tau, io.read_fits(args.fits_lec), cfg.fit.max_distance(),
                         cfg.field.form)
    out = Path(cfg.out)
    io.write_json(out / "gof.json", report.to_dict())
    io.write_winners(out / "winners.csv", obs.ids, aggregate_winner_percentages([report], obs.n))
    print("intersections:", report.counts())


def cmd_experiment(args, cfg):
    manifest = run_experiment(cfg)
    print(f"experiment complete: {len(manifest['files'])} files under {cfg.out}")


def cmd_render(args, cfg):
    ids, coords = io.read_locations(args.locations)
    header, rows = io._read_rows(args.values)
    col = header.index(args.column) if args.column else 1
    table = {r[0]: float(r[col]) for r in rows}
    values = np.array([table.get(i, np.nan) for i in ids])
    bounds = None
    if args.boundaries is not None:
        _, bounds = io.read_labels(args.boundaries, ids)
    svg = render_heatmap_svg(coords, values, args.title or header[col], boundaries=bounds)
    path = Path(cfg.out) / f"{args.values.stem}_{header[col]}.svg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    print(f"wrote {path}")


COMMANDS = {"simulate": cmd_simulate, "transform": cmd_transform,
            "regionalize": cmd_regionalize, "fit": cmd_fit, "gof": cmd_gof,
            "experiment": cmd_experiment, "render": cmd_render}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except StageFailure as exc:
        print(f"error: {exc} (see {exc.manifest_path})", file=sys.stderr)
        return 1
    except (MaxRegionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
