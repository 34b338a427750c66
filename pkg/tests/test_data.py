"""Samplers, ground-truth maps (vs quadrature), and point-cloud CSV IO."""

import numpy as np
import pytest
from scipy.integrate import quad

from otmap.data import (
    GroundTruthMap,
    SourceSpec,
    apply_map,
    ground_truth_value,
    load_csv,
    make_map,
    sample,
    save_csv,
    scalar_map,
    two_moons_frame,
)
from otmap.errors import DataError


def test_uniform_cube_bounds_and_mean():
    spec = SourceSpec("uniform_cube", dim=2)
    x = sample(spec, 10_000, seed=0)
    assert x.shape == (10_000, 2)
    assert (np.abs(x) <= 1.0).all()
    # CLT: |mean| < 3/sqrt(n) with prob ~0.997 per coordinate; assert the loose 0.1
    assert np.abs(x.mean(axis=0)).max() < 0.1


def test_sampling_deterministic():
    spec = SourceSpec("uniform_cube", dim=3)
    a = sample(spec, 100, seed=7)
    b = sample(spec, 100, seed=7)
    c = sample(spec, 100, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_two_moons_noiseless_on_arcs():
    spec = SourceSpec("two_moons", noise=0.0)
    pts = sample(spec, 500, seed=3)
    center, scale = two_moons_frame(spec)
    raw = pts / scale + center
    # distance to the nearest of the two unit circles carrying the arcs
    d_upper = np.abs(np.sqrt((raw**2).sum(axis=1)) - 1.0)
    low = raw - np.asarray(spec.lower_offset)
    d_lower = np.abs(np.sqrt((low**2).sum(axis=1)) - 1.0)
    assert np.minimum(d_upper, d_lower).max() < 1e-12


def test_two_moons_selectors():
    up = sample(SourceSpec("two_moons", moons="upper", noise=0.0), 200, seed=1)
    low = sample(SourceSpec("two_moons", moons="lower", noise=0.0), 200, seed=1)
    # upper arc sits left/above the lower arc in this frame
    assert up.mean(axis=0)[1] > low.mean(axis=0)[1]


def test_two_moons_requires_dim_2():
    with pytest.raises(ValueError):
        SourceSpec("two_moons", dim=3)


def test_exp_map_values():
    gt = GroundTruthMap("coordwise_exp")
    assert abs(scalar_map(gt, 0.0) - (1 - 1.18) / 1.18) < 1e-15
    assert abs(scalar_map(gt, 1.0) - (np.e - 1.18) / 1.18) < 1e-15
    # mean over uniform [-1,1] from the quadrature oracle: close to zero
    mean, _ = quad(lambda t: (np.exp(t) - 1.18) / 1.18, -1, 1)
    assert abs(mean / 2 - (-0.00407)) < 1e-4


def test_signed_square_map_values():
    gt = GroundTruthMap("coordwise_signed_square")
    assert scalar_map(gt, -0.5) == -0.25
    assert scalar_map(gt, 0.0) == 0.0
    assert scalar_map(gt, 0.7) == pytest.approx(0.49)


def test_apply_map_pointwise():
    gt = GroundTruthMap("coordwise_exp")
    spec = SourceSpec("uniform_cube", dim=2)
    x = sample(spec, 50, seed=5)
    y = apply_map(gt, x)
    assert y.shape == x.shape
    assert np.array_equal(y[7], ground_truth_value(gt, x[7]))


def test_identity_table_map():
    gt = make_map("identity")
    x = sample(SourceSpec("uniform_cube", dim=2), 20, seed=9)
    assert np.allclose(apply_map(gt, x), x, atol=1e-15)


def test_maps_strictly_increasing():
    probes = np.linspace(-1, 1, 1000)
    for kind in ("coordwise_exp", "coordwise_signed_square"):
        vals = scalar_map(GroundTruthMap(kind), probes)
        assert (np.diff(vals) > 0).all()


def test_table_map_validates_monotonicity():
    with pytest.raises(ValueError):
        GroundTruthMap("table", knots_x=[0.0, 1.0], knots_y=[1.0, 1.0])
    with pytest.raises(ValueError):
        GroundTruthMap("table", knots_x=[0.0], knots_y=[0.0])


def test_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(16)
    x = rng.normal(size=(40, 3)) * np.pi
    path = tmp_path / "cloud.csv"
    save_csv(x, path, seed=16)
    back = load_csv(path)
    assert np.array_equal(back, x)
    assert path.read_text().splitlines()[0] == "# dim=3 n=40 seed=16"


def test_csv_parse_inline():
    path_content = "0,1\n2,3"

    def write(tmp, content):
        tmp.write_text(content)
        return tmp

    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as d:
        p = write(pathlib.Path(d) / "t.csv", path_content)
        assert np.array_equal(load_csv(p), [[0.0, 1.0], [2.0, 3.0]])


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        load_csv(empty)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(DataError):
        load_csv(ragged)
    words = tmp_path / "words.csv"
    words.write_text("1,foo\n")
    with pytest.raises(DataError):
        load_csv(words)
    with pytest.raises(DataError):
        load_csv(tmp_path / "does_not_exist.csv")


def test_csv_file_source(tmp_path):
    x = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    path = tmp_path / "src.csv"
    save_csv(x, path)
    spec = SourceSpec("csv_file", dim=2, path=str(path))
    assert np.array_equal(sample(spec, 2, seed=0), x[:2])
    with pytest.raises(DataError):
        sample(spec, 10, seed=0)
