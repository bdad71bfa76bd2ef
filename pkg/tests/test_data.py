import numpy as np
import pytest

from graphrep.data import (
    UNKNOWN,
    Role,
    gen_blobs,
    gen_two_moons,
    load_csv,
    parse_csv,
    save_csv,
    split_labels,
)
from graphrep.errors import InvalidConfigError, ParseError


def test_noiseless_moons_on_arcs():
    ds = gen_two_moons(4, noise_sd=0.0, nuisance_dims=0, seed=3)
    up, low = ds.X[ds.y == 0], ds.X[ds.y == 1]
    np.testing.assert_allclose(np.hypot(up[:, 0], up[:, 1]), 1.0, atol=1e-15)
    assert np.all(up[:, 1] >= 0)
    np.testing.assert_allclose(np.hypot(1 - low[:, 0], 0.5 - low[:, 1]), 1.0, atol=1e-15)
    assert np.all(low[:, 1] <= 0.5)


def test_moons_shape_and_counts():
    ds = gen_two_moons(40, 0.1, nuisance_dims=3, nuisance_sd=2.0, seed=1)
    assert ds.X.shape == (40, 5)
    assert np.bincount(ds.y).tolist() == [20, 20]
    with pytest.raises(InvalidConfigError):
        gen_two_moons(41)


def test_generators_deterministic():
    a, b = gen_two_moons(30, 0.1, 2, 1.0, seed=5), gen_two_moons(30, 0.1, 2, 1.0, seed=5)
    assert a.X.tobytes() == b.X.tobytes()
    assert not np.array_equal(a.X, gen_two_moons(30, 0.1, 2, 1.0, seed=6).X)
    c, d = gen_blobs(5, 3, 4, 3, 2.0, 0.5, seed=2), gen_blobs(5, 3, 4, 3, 2.0, 0.5, seed=2)
    assert c.X.tobytes() == d.X.tobytes()
    assert not np.array_equal(c.X, gen_blobs(5, 3, 4, 3, 2.0, 0.5, seed=3).X)


def test_blobs_shapes_and_collapse():
    ds = gen_blobs(7, 3, 5, 3, 4.0, 0.0, seed=0)
    assert ds.X.shape == (21, 5)
    for cls in range(3):
        pts = ds.X[ds.y == cls]
        assert np.all(pts == pts[0])
        expected = np.zeros(5)
        expected[cls] = 4.0
        np.testing.assert_array_equal(pts[0], expected)


def test_blobs_null_task_identical_means():
    ds = gen_blobs(2000, 2, 3, 2, 0.0, 1.0, seed=0)
    diff = ds.X[ds.y == 0].mean(0) - ds.X[ds.y == 1].mean(0)
    assert np.all(np.abs(diff) < 0.15)


def test_moons_not_linearly_separable():
    ds = gen_two_moons(200, 0.0, 0, seed=0)
    Xb = np.hstack([ds.X, np.ones((ds.n, 1))])
    t = np.where(ds.y == 0, 1.0, -1.0)
    w = np.zeros(3)
    converged = False
    for _ in range(1000):
        mistakes = 0
        for x, lab in zip(Xb, t):
            if lab * (w @ x) <= 0:
                w += lab * x
                mistakes += 1
        if mistakes == 0:
            converged = True
            break
    assert not converged


def test_split_labels_arithmetic():
    ds = split_labels(gen_two_moons(40, 0.1, seed=0), 2, 0.5, seed=1)
    for cls in (0, 1):
        roles = ds.roles[ds.y == cls]
        assert (roles == Role.SEED).sum() == 1
        assert (roles == Role.VALIDATION).sum() == 1
    assert (ds.roles == Role.TEST).sum() == 36
    again = split_labels(gen_two_moons(40, 0.1, seed=0), 2, 0.5, seed=1)
    np.testing.assert_array_equal(ds.roles, again.roles)


def test_split_labels_rounds_validation_up():
    ds = split_labels(gen_two_moons(40, 0.1, seed=0), 5, 0.3, seed=0)
    assert (ds.roles == Role.VALIDATION).sum() == 2 * 2
    assert (ds.roles == Role.SEED).sum() == 2 * 3


def test_split_labels_errors():
    ds = gen_two_moons(10, 0.1, seed=0)
    with pytest.raises(InvalidConfigError):
        split_labels(ds, 2, 0.9, seed=0)  # no seed left
    with pytest.raises(InvalidConfigError):
        split_labels(ds, 6, 0.5, seed=0)  # only 5 per class
    with pytest.raises(InvalidConfigError):
        split_labels(ds, 2, 0.0, seed=0)


def test_parse_csv_contract():
    ds = parse_csv("f0,f1,label\n1.5,2,b\n3,4,a\n5,6e-1,?\n")
    assert ds.n_classes == 2
    assert ds.class_names == ["a", "b"]
    assert ds.y.tolist() == [1, 0, UNKNOWN]
    assert ds.roles.tolist() == [Role.SEED, Role.SEED, Role.TEST]
    np.testing.assert_array_equal(ds.X, [[1.5, 2], [3, 4], [5, 0.6]])


@pytest.mark.parametrize(
    "text,line",
    [
        ("f0,f1,label\n1,2,a\n3,b\n", 3),
        ("f0,label\n1,a\nx,b\n", 3),
        ("f0,label\n1,a\n2,\n", 3),
        ("f0,label\nnan,a\n", 2),
        ("g0,label\n1,a\n", 1),
    ],
)
def test_parse_errors_name_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_csv(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_csv_round_trip(tmp_path):
    ds = gen_two_moons(30, 0.3, 2, 5.0, seed=9)
    save_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert (tmp_path / "d.csv").read_bytes().count(b"\r") == 0


def test_csv_round_trip_many_classes(tmp_path):
    ds = gen_blobs(2, 12, 12, 12, 1.0, 0.1, seed=0)
    save_csv(ds, tmp_path / "d.csv")
    np.testing.assert_array_equal(load_csv(tmp_path / "d.csv").y, ds.y)


def test_seed_matrix():
    ds = split_labels(gen_two_moons(20, 0.1, seed=0), 4, 0.5, seed=0)
    Y0 = ds.seed_matrix()
    seeds = ds.indices(Role.SEED)
    assert Y0.sum() == len(seeds)
    assert np.all(Y0[seeds, ds.y[seeds]] == 1)
    assert np.all(Y0[ds.roles != Role.SEED] == 0)
