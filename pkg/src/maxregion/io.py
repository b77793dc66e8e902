"""Reading and writing the CSV / JSON exchange formats.

Floats are written with ``repr`` so every value round-trips exactly.
"""
import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .simulate import RAW, UNIT_FRECHET, ObservationSet


def fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    return path


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], rows[1:]


def write_locations(path, ids, coords):
    return _write_rows(path, ["id", "x", "y"],
                       ([str(i), x, y] for i, (x, y) in zip(ids, np.asarray(coords))))


def read_locations(path):
    header, rows = _read_rows(path)
    if [h.strip() for h in header] != ["id", "x", "y"]:
        raise ValueError(f"{path}: expected header id,x,y")
    ids = [r[0] for r in rows]
    coords = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
    return ids, coords


def write_observations(path, obs):
    return _write_rows(path, list(obs.ids), (list(row) for row in obs.data))


def read_observations(path, locations_path, margins=UNIT_FRECHET):
    ids, coords = read_locations(locations_path)
    header, rows = _read_rows(path)
    order = {h: k for k, h in enumerate(header)}
    missing = [i for i in ids if i not in order]
    if missing:
        raise ValueError(f"{path}: no column for location ids {missing[:5]}")
    data = np.array([[float(v) for v in r] for r in rows])
    data = data[:, [order[i] for i in ids]]
    return ObservationSet(coords, data, margins, ids)


def write_square(path, ids, values):
    values = np.asarray(values)
    return _write_rows(path, ["id"] + [str(i) for i in ids],
                       ([str(i)] + list(values[k]) for k, i in enumerate(ids)))


def read_square(path):
    header, rows = _read_rows(path)
    ids = header[1:]
    if [r[0] for r in rows] != ids:
        raise ValueError(f"{path}: row ids do not match column ids")
    return ids, np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(ids), len(ids))


def write_labels(path, ids, labels):
    return _write_rows(path, ["id", "label"],
                       ([str(i), int(lab)] for i, lab in zip(ids, labels)))


def read_labels(path, ids=None):
    header, rows = _read_rows(path)
    table = {r[0]: int(r[1]) for r in rows}
    if ids is None:
        return [r[0] for r in rows], np.array([table[r[0]] for r in rows], dtype=np.int64)
    return list(ids), np.array([table.get(str(i), 0) for i in ids], dtype=np.int64)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_fits(path, fits):
    return write_json(path, {str(k): v.to_dict() for k, v in sorted(fits.items())})


def read_fits(path):
    from .fit import FitResult
    return {int(k): FitResult.from_dict(v) for k, v in read_json(path).items()}


def write_winners(path, ids, agg):
    rows = ([str(ids[i]), frac, lw, ew, t, s] for i, frac, lw, ew, t, s in agg.to_rows())
    return _write_rows(path, ["id", "lec_fraction", "lec_wins", "edc_wins", "ties", "scored"],
                       rows)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


__all__ = ["RAW", "UNIT_FRECHET", "read_fits", "read_json", "read_labels",
           "read_locations", "read_observations", "read_square", "sha256_file",
           "write_fits", "write_json", "write_labels", "write_locations",
           "write_observations", "write_square", "write_winners"]
