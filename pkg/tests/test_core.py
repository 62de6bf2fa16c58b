import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from copulaproc.core import (
    Field,
    Grid,
    RandomStream,
    dump_report,
    jsonify,
    make_uniform_grid,
    parallel_map,
    snapped_grid,
    sup_norm,
)


def test_uniform_grid_endpoints():
    g = make_uniform_grid(1, 2)
    assert_array_equal(g.axes[0], [0.0, 1.0])


def test_uniform_grid_counts():
    g = make_uniform_grid(2, 3)
    assert_array_equal(g.axes[0], [0.0, 0.5, 1.0])
    assert g.npoints == 9
    assert make_uniform_grid(2, 3, with_time=True).npoints == 27


def test_uniform_grid_rejects_small_m():
    with pytest.raises(ValueError):
        make_uniform_grid(2, 1)
    with pytest.raises(ValueError):
        make_uniform_grid(0, 3)


def test_grid_axis_validation():
    with pytest.raises(ValueError):
        Grid(axes=(np.array([0.0, 0.5]),))  # missing 1
    with pytest.raises(ValueError):
        Grid(axes=(np.array([0.1, 1.0]),))  # missing 0
    with pytest.raises(ValueError):
        Grid(axes=(np.array([0.0, 0.5, 0.5, 1.0]),))  # not strictly increasing


def test_grid_construction_idempotent():
    assert make_uniform_grid(3, 7) == make_uniform_grid(3, 7)
    assert snapped_grid(10, 2) == snapped_grid(10, 2)
    assert make_uniform_grid(2, 5) != make_uniform_grid(2, 6)


def test_snapped_grid_alignment():
    g = snapped_grid(4, 2)
    assert_array_equal(g.axes[0], [0.0, 0.25, 0.5, 0.75, 1.0])


def test_grid_points_order_time_slowest():
    g = make_uniform_grid(1, 2, with_time=True)
    pts = g.points()
    # time is the first/slowest coordinate
    assert_array_equal(pts[:, 0], [0.0, 0.0, 1.0, 1.0])
    assert_array_equal(pts[:, 1], [0.0, 1.0, 0.0, 1.0])


def test_sup_norm_examples():
    g = make_uniform_grid(1, 2)
    assert sup_norm(Field(g, [0.0, 0.0])) == 0.0
    assert sup_norm(Field(g, [-3.0, 2.0])) == 3.0
    assert sup_norm(Field(g, [0.25, 0.0])) == 0.25


def test_sup_norm_properties():
    rng = np.random.default_rng(0)
    g = make_uniform_grid(2, 4)
    for _ in range(25):
        f = Field(g, rng.normal(size=g.npoints))
        h = Field(g, rng.normal(size=g.npoints))
        assert sup_norm(f) == sup_norm(-1.0 * f)
        assert sup_norm(f + h) <= sup_norm(f) + sup_norm(h) + 1e-15


def test_field_validation():
    g = make_uniform_grid(2, 3)
    with pytest.raises(ValueError):
        Field(g, np.ones(5))
    with pytest.raises(ValueError):
        Field(g, np.full(9, np.nan))


def test_field_values_read_only():
    f = Field(make_uniform_grid(1, 2), [1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_field_json_round_trip():
    g = make_uniform_grid(2, 3, with_time=True)
    f = Field(g, np.arange(27, dtype=float))
    back = Field.from_json(json.loads(json.dumps(f.to_json())))
    assert back.grid == f.grid
    assert_array_equal(back.values, f.values)


def test_field_csv_layout():
    f = Field(make_uniform_grid(2, 2), [0.0, 1.0, 2.0, 3.0])
    lines = f.to_csv_string().strip().splitlines()
    assert lines[0] == "u1,u2,value"
    assert len(lines) == 5
    assert lines[1].split(",") == ["0.0", "0.0", "0.0"]
    assert lines[-1].split(",") == ["1.0", "1.0", "3.0"]


def test_random_stream_reproducible():
    a = RandomStream(42, 3).generator().random(5)
    b = RandomStream(42, 3).generator().random(5)
    assert_array_equal(a, b)


def test_random_stream_ids_differ():
    a = RandomStream(42, 0).generator().random(5)
    b = RandomStream(42, 1).generator().random(5)
    assert not np.array_equal(a, b)


def test_random_stream_children_independent_and_stable():
    s = RandomStream(7)
    assert_array_equal(s.child(2).generator().random(3),
                       s.child(2).generator().random(3))
    assert not np.array_equal(s.child(0).generator().random(3),
                              s.child(1).generator().random(3))


def test_random_stream_validation():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(0, -2)
    with pytest.raises(ValueError):
        RandomStream(0).child(-1)


def _square(v):
    return v * v


def test_parallel_map_matches_serial(monkeypatch):
    items = list(range(17))
    serial = parallel_map(_square, items, workers=1)
    parallel = parallel_map(_square, items, workers=2)
    assert serial == parallel == [v * v for v in items]
    monkeypatch.setenv("COPULA_PROC_THREADS", "2")
    assert parallel_map(_square, items) == serial


def test_dump_report_handles_numpy_and_is_stable():
    report = {"a": np.float64(1.5), "b": np.arange(3), "c": {"d": np.bool_(True)}}
    text = dump_report(report)
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2], "c": {"d": True}}
    assert text == dump_report(jsonify(report))
