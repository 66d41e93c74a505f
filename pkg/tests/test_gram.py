import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopnem import InputError, PolicyKernelSpec, RadialKernelSpec, SnapshotDataset, assemble, fill_distance, sparsity
from koopnem.gram import load_dataset, nonzero_fraction, save_dataset


def test_tank_grams(tank_grams, tank_dataset):
    g = tank_grams
    assert g.m == 441
    for G in (g.G_xu, g.G_yy, g.G_xx, g.G_uu):
        assert np.array_equal(G, G.T)
        assert np.all(np.diag(G) == 1.0)
    np.testing.assert_array_equal(g.G_xu, g.G_xx * g.G_uu)
    i, j = 3, 200
    x, y = tank_dataset.states[j, 0], tank_dataset.successors[i, 0]
    assert g.G_xy[j, i] == pytest.approx(max(1 - abs(x - y), 0) ** 2)
    assert 0 < sparsity(g.G_xu) < sparsity(g.G_yy) <= 1


def test_grams_are_read_only(tank_grams):
    with pytest.raises(ValueError):
        tank_grams.G_xu[0, 0] = 2.0


def test_sparsity_examples():
    assert sparsity(np.eye(4)) == pytest.approx(0.25)
    assert sparsity(np.ones((3, 3))) == 1.0
    assert nonzero_fraction(np.eye(4)) == 0.25
    with pytest.raises(InputError):
        sparsity(np.ones((2, 3)))


def test_dataset_validation():
    with pytest.raises(InputError):
        SnapshotDataset(np.zeros((3, 1)), np.zeros((2, 1)), np.zeros((3, 1)))
    with pytest.raises(InputError):
        SnapshotDataset(np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(InputError):
        SnapshotDataset(np.zeros((3, 1)), np.zeros((3, 1)), np.zeros((3, 1)), state_scales=[0.0])


def test_scaling_enters_kernel_distances():
    X = np.array([[0.0, 0.0], [1.0, 10.0]])
    ds = SnapshotDataset(X, np.zeros((2, 1)), X, state_scales=[1.0, 10.0])
    g = assemble(ds, RadialKernelSpec.wendland(1, 1, 2.0), PolicyKernelSpec(1.0))
    r = np.sqrt(2.0)
    assert g.G_xx[0, 1] == pytest.approx((1 - r / 2) ** 2)


def test_dataset_roundtrip(tmp_path, tank_dataset):
    save_dataset(tank_dataset, tmp_path, {"note": "x"})
    back = load_dataset(tmp_path)
    for name in ("states", "policy_params", "successors", "state_scales"):
        assert np.array_equal(getattr(back, name), getattr(tank_dataset, name))
    assert back.metadata["note"] == "x"


def brute_force_fill(ds, C, Cp, w):
    best = []
    for c, cp in zip(C, Cp):
        d = [np.linalg.norm(c - x) + w * np.linalg.norm(cp - p) for x, p in zip(ds.states, ds.policy_params)]
        best.append(min(d))
    return max(best)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), w=st.floats(0.0, 3.0))
def test_fill_distance_matches_brute_force(seed, w):
    rng = np.random.default_rng(seed)
    ds = SnapshotDataset(rng.normal(size=(15, 2)), rng.normal(size=(15, 1)), rng.normal(size=(15, 2)))
    C, Cp = rng.normal(size=(40, 2)), rng.normal(size=(40, 1))
    assert fill_distance(ds, C, Cp, w, chunk=7) == pytest.approx(brute_force_fill(ds, C, Cp, w), rel=1e-12)


def test_fill_distance_of_tank_grid(tank_dataset):
    X = np.linspace(-2, 2, 401)[:, None]
    assert fill_distance(tank_dataset, X) == pytest.approx(0.1, abs=1e-12)
    assert fill_distance(tank_dataset, tank_dataset.states) == 0.0
