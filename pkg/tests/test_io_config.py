import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxregion import io
from maxregion.config import apply_overrides, config_from_dict, load_config
from maxregion.errors import ConfigError
from maxregion.fit import FitResult
from maxregion.model import AnisotropyParams
from maxregion.simulate import ObservationSet

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=1e-300, max_value=1e300)


@given(st.lists(finite, min_size=1, max_size=20))
def test_float_format_round_trips(vals):
    for v in vals:
        assert float(io.fmt(v)) == v


def test_observations_round_trip(tmp_path, rng):
    coords = rng.uniform(-5, 5, (6, 2))
    ids = [f"s{i}" for i in range(6)]
    obs = ObservationSet(coords, 1.0 / -np.log(rng.uniform(size=(9, 6))), ids=ids)
    io.write_locations(tmp_path / "loc.csv", ids, coords)
    io.write_observations(tmp_path / "obs.csv", obs)
    back = io.read_observations(tmp_path / "obs.csv", tmp_path / "loc.csv")
    assert back.ids == ids
    assert np.array_equal(back.data, obs.data) and np.array_equal(back.coords, coords)


def test_observations_reordered_columns(tmp_path):
    io.write_locations(tmp_path / "loc.csv", ["b", "a"], [[0, 0], [1, 1]])
    (tmp_path / "obs.csv").write_text("a,b\n1.0,2.0\n3.0,4.0\n")
    back = io.read_observations(tmp_path / "obs.csv", tmp_path / "loc.csv")
    assert back.data.tolist() == [[2.0, 1.0], [4.0, 3.0]]


def test_square_and_labels_round_trip(tmp_path, rng):
    ids = ["0", "1", "2"]
    M = rng.uniform(size=(3, 3))
    io.write_square(tmp_path / "m.csv", ids, M)
    got_ids, got = io.read_square(tmp_path / "m.csv")
    assert got_ids == ids and np.array_equal(got, M)
    io.write_labels(tmp_path / "l.csv", ids, [2, 1, 2])
    assert io.read_labels(tmp_path / "l.csv")[1].tolist() == [2, 1, 2]
    assert io.read_labels(tmp_path / "l.csv", ["2", "9"])[1].tolist() == [2, 0]


def test_fits_round_trip(tmp_path):
    fits = {1: FitResult(AnisotropyParams(1 / 3, 0.1, math.pi / 7), 123.456, 10, True, 5)}
    io.write_fits(tmp_path / "f.json", fits)
    assert io.read_fits(tmp_path / "f.json") == fits


def test_bad_header(tmp_path):
    (tmp_path / "loc.csv").write_text("name,x,y\n")
    with pytest.raises(ValueError):
        io.read_locations(tmp_path / "loc.csv")


# --- config ----------------------------------------------------------------

def test_defaults_are_desk_scale():
    cfg = config_from_dict({"seed": 1})
    assert cfg.field.resolution == 0.5 and cfg.simulation.observations == 100
    assert cfg.simulation.replicates == 5 and cfg.regionalize.clusters == 5
    assert not cfg.is_long_running()


def test_unknown_preset_reports_key():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"seed": 1, "field": {"preset": "example9"}})
    assert err.value.key == "field.preset"


@pytest.mark.parametrize("d,key", [
    ({"seed": 1, "simulation": {"observatons": 5}}, "simulation.observatons"),
    ({"seed": 1, "colour": "red"}, "colour"),
    ({}, "seed"),
    ({"seed": 1, "simulation": {"alpha": 3.0}}, "simulation.alpha"),
    ({"seed": 1, "regionalize": {"clusters": 0}}, "regionalize.clusters"),
    ({"seed": 1, "fit": {"globals": [[5.0]]}}, "fit.globals[0]"),
    ({"seed": 1, "field": {"a": 2.0}}, "field.a"),
    ({"seed": -4}, "seed"),
])
def test_config_errors_name_the_key(d, key):
    with pytest.raises(ConfigError) as err:
        config_from_dict(d)
    assert err.value.key == key


def test_toml_and_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('seed = 4\n[field]\npreset = "example2"\nresolution = 1\n'
                 '[fit]\nglobals = [[3, 0.7], [5, 1.3]]\n')
    cfg = load_config(p)
    assert cfg.field.preset == "example2" and cfg.field.resolution == 1.0
    assert cfg.fit.globals == [[3, 0.7], [5, 1.3]]
    cfg2 = apply_overrides(cfg, {"seed": 9, "regionalize.clusters": 3, "field.preset": None})
    assert cfg2.seed == 9 and cfg2.regionalize.clusters == 3 and cfg2.field.preset == "example2"


def test_invalid_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_full_scale_flagged():
    cfg = config_from_dict({"seed": 1, "field": {"resolution": 0.2},
                            "simulation": {"observations": 250, "replicates": 25}})
    assert cfg.is_long_running()
