import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpstts.dp import NOISE_OFF, STREAM_FREQUENCY, STREAM_START, NoiseSource
from dpstts.errors import CorruptModelFile, InvalidBudget, NonNeighborTransition, VersionMismatch
from dpstts.grid import Cube, CubeTrajectory, GridSpec, cube_from_id
from dpstts.model import (
    STOP,
    FrequencyMatrix,
    add_fm_noise,
    build_frequency_matrix,
    build_model,
    count_starts,
    derive_transition_matrix,
    dumps_model,
    load_model,
    loads_model,
    model_to_dict,
    noisy_start_distribution,
    save_model,
)

import oracles
from helpers import UNIT2, random_cube_dataset

# ids on a 3x3x1 grid are x*3 + y, so st_0=(0,0), st_1=(0,1), st_4=(1,1)
G331 = GridSpec(3, 3, 1)


def traj(*ids, g=G331):
    return CubeTrajectory(tuple(cube_from_id(i, g) for i in ids))


ONE = [traj(0, 1, 4)]
TWO = [traj(0, 1, 4), traj(0, 4)]


# --- start counts ------------------------------------------------------------

def test_count_starts_empty():
    assert count_starts([], G331).tolist() == [0] * 9


def test_count_starts_fixture():
    n = count_starts(TWO, G331)
    assert n[0] == 2 and n.sum() == 2


def test_count_starts_sum_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        g = GridSpec(4, 3, 5, v=2)
        da = random_cube_dataset(rng, g, int(rng.integers(1, 30)))
        assert count_starts(da, g).sum() == len(da)


def test_start_distribution_noise_off():
    assert noisy_start_distribution([2, 0, 0, 0], NOISE_OFF, None).mass.tolist() == [1, 0, 0, 0]
    assert noisy_start_distribution([3, 3, 3, 3], NOISE_OFF, None).mass.tolist() == [0.25] * 4


def test_start_distribution_replay():
    counts = np.array([5, 0, 2, 0, 0, 9, 1, 0], dtype=float)
    got = noisy_start_distribution(counts, 0.5, NoiseSource(7, STREAM_START)).mass
    # independent replay: same frozen stream, add Lap(1/eps), clamp, normalize
    rng = NoiseSource(7, STREAM_START)
    expected = [max(0.0, c + float(rng.laplace(2.0))) for c in counts]
    total = sum(expected)
    assert np.allclose(got, [e / total for e in expected], rtol=0, atol=1e-15)


def test_start_distribution_all_negative_falls_back_to_uniform():
    class Negative:
        def laplace(self, scale, size):
            return -np.ones(size) * 100

    assert noisy_start_distribution([1, 0, 0, 0], 1.0, Negative()).mass.tolist() == [0.25] * 4


def test_start_distribution_rejects_bad_epsilon():
    with pytest.raises(InvalidBudget):
        noisy_start_distribution([1], 0.0, NoiseSource(0))


# --- frequency matrix --------------------------------------------------------

def test_fm_single_trajectory():
    fm = build_frequency_matrix(ONE, G331)
    assert fm.row(0)[1] == pytest.approx(1 / 3)
    assert fm.row(1)[4] == pytest.approx(1 / 3)
    assert fm.row(4)[STOP] == pytest.approx(1 / 3)
    assert fm.total() == pytest.approx(1.0)


def test_fm_two_trajectories():
    fm = build_frequency_matrix(TWO, G331)
    assert fm.row(0)[4] == pytest.approx(1 / 2)
    assert fm.row(4)[STOP] == pytest.approx(1 / 3 + 1 / 2)
    assert fm.total() == pytest.approx(2.0, abs=1e-9)


def test_fm_single_cube():
    fm = build_frequency_matrix([traj(3)], G331)
    assert fm.row(3)[STOP] == 1.0
    assert fm.total() == 1.0


def test_fm_rejects_non_neighbor():
    with pytest.raises(NonNeighborTransition):
        build_frequency_matrix([traj(0, 8)], G331)


def test_fm_matches_weighted_oracle_random():
    rng = np.random.default_rng(1)
    for _ in range(30):
        g = GridSpec(*(int(s) for s in rng.integers(1, 6, 3)), v=int(rng.integers(1, 4)))
        da = random_cube_dataset(rng, g, int(rng.integers(1, 40)))
        fm = build_frequency_matrix(da, g)
        expected = oracles.weighted_occurrences(da, g)
        got = {(i, dst): val for i in range(g.n_cubes) for dst, val in fm.row(i).items() if val}
        assert set(got) == set(expected)
        for key, val in expected.items():
            assert abs(got[key] - float(val)) < 1e-12
        assert abs(fm.total() - len(da)) < 1e-9


def _l1(a, b):
    return float(np.abs(a - b).sum())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_sensitivity_property(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(*(int(s) for s in rng.integers(1, 6, 3)), v=int(rng.integers(1, 4)))
    da = random_cube_dataset(rng, g, int(rng.integers(2, 30)))
    drop = int(rng.integers(len(da)))
    nb = da[:drop] + da[drop + 1:]
    assert _l1(count_starts(da, g), count_starts(nb, g)) == 1
    diff = _l1(build_frequency_matrix(da, g).values, build_frequency_matrix(nb, g).values)
    assert abs(diff - 1) < 1e-9


# --- noise -------------------------------------------------------------------

def test_fm_noise_off_is_identity():
    fm = build_frequency_matrix(TWO, G331)
    assert add_fm_noise(fm, NOISE_OFF, None) == fm


def test_fm_noise_single_cube_grid_only_stop():
    g = GridSpec(1, 1, 1)
    fm = build_frequency_matrix([CubeTrajectory([Cube(0, 0, 0)])], g)
    noisy = add_fm_noise(fm, 1.0, NoiseSource(3))
    k = noisy.values.shape[1] - 1
    assert np.all(noisy.values[0, :k] == 0)
    assert noisy.values[0, k] != 1.0


def test_fm_noise_replay():
    g = GridSpec(3, 2, 3, v=2)
    da = random_cube_dataset(np.random.default_rng(4), g, 10)
    fm = build_frequency_matrix(da, g)
    noisy = add_fm_noise(fm, 0.5, NoiseSource(7, STREAM_FREQUENCY))
    # replay: one scale-2 draw per (cube, slot) in row-major order, kept
    # only where the step stays inside the grid
    steps = oracles.support_steps(g.v)
    draws = NoiseSource(7, STREAM_FREQUENCY).laplace(2.0, (g.n_cubes, len(steps) + 1))
    clean = oracles.weighted_occurrences(da, g)
    for i in range(g.n_cubes):
        c = cube_from_id(i, g)
        row = noisy.row(i)
        expected = {STOP: float(clean.get((i, STOP), 0)) + draws[i, len(steps)]}
        for s, (dx, dy, dt) in enumerate(steps):
            x, y, t = c.x + dx, c.y + dy, c.t + dt
            if 0 <= x < g.g_w and 0 <= y < g.g_h and 0 <= t < g.g_t:
                dst = oracles.cube_key((x, y, t), g)
                expected[dst] = float(clean.get((i, dst), 0)) + draws[i, s]
        assert row.keys() == expected.keys()
        for key in expected:
            assert abs(row[key] - expected[key]) < 1e-12


def test_noise_stays_in_support():
    g = GridSpec(4, 4, 4, v=2)
    da = random_cube_dataset(np.random.default_rng(5), g, 20)
    model = build_model(da, UNIT2, g, 0.1, 0.5, 9)
    fm = build_frequency_matrix(da, g)
    assert np.all(model.tm.probs[~fm.support] == 0)


# --- transition matrix -------------------------------------------------------

def test_tm_fixture_row():
    tm = derive_transition_matrix(build_frequency_matrix(TWO, G331))
    row = tm.row(0)
    assert row.keys() == {1, 4}
    assert row[1] == pytest.approx(0.4, abs=1e-15)
    assert row[4] == pytest.approx(0.6, abs=1e-15)


def test_tm_all_zero_and_negative_rows():
    fm = build_frequency_matrix(TWO, G331)
    values = fm.values.copy()
    values[0] = -1.0 * fm.support[0]
    tm = derive_transition_matrix(FrequencyMatrix(G331, values))
    assert tm.all_zero[0] and np.all(tm.probs[0] == 0)
    assert tm.all_zero[2]  # never visited
    assert not tm.all_zero[4]


def test_tm_rows_normalized_under_noise():
    g = GridSpec(5, 5, 4, v=2)
    da = random_cube_dataset(np.random.default_rng(6), g, 50)
    for eps in (0.1, 1.0, 10.0):
        tm = build_model(da, UNIT2, g, eps, 0.5, 2).tm
        live = ~tm.all_zero
        assert np.allclose(tm.probs[live].sum(axis=1), 1, atol=1e-9, rtol=0)
        assert np.all((tm.probs >= 0) & (tm.probs <= 1))
        assert np.all(tm.probs[tm.all_zero] == 0)


def test_noise_off_matches_estimators():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = GridSpec(*(int(s) for s in rng.integers(1, 7, 3)), v=int(rng.integers(1, 4)))
        da = random_cube_dataset(rng, g, int(rng.integers(1, 60)))
        m = build_model(da, UNIT2, g, NOISE_OFF)
        expected = oracles.conditional(oracles.weighted_occurrences(da, g))
        for i in range(g.n_cubes):
            got = m.tm.row(i)
            assert got.keys() == expected.get(i, {}).keys()
            for dst, p in expected.get(i, {}).items():
                assert abs(got[dst] - float(p)) < 1e-12
        starts = oracles.start_frequencies(da, g)
        assert {i: Fraction(p) for i, p in enumerate(m.start.mass) if p} == {
            i: Fraction(float(p)) for i, p in starts.items()
        }


# --- build_model -------------------------------------------------------------

def test_build_model_fixture():
    m = build_model(TWO, UNIT2, G331, NOISE_OFF)
    assert m.start.mass[0] == 1.0 and m.start.mass.sum() == 1.0
    assert m.tm.row(0) == pytest.approx({1: 0.4, 4: 0.6})


def test_build_model_metadata():
    m = build_model(TWO, UNIT2, G331, 1.0, 0.5, 3)
    assert m.metadata["eps_s"] == 0.5 and m.metadata["eps_m"] == 0.5
    assert m.metadata["seed"] == 3 and m.source_size == 2


def test_build_model_deterministic():
    g = GridSpec(4, 4, 4)
    da = random_cube_dataset(np.random.default_rng(2), g, 30)
    assert dumps_model(build_model(da, UNIT2, g, 1.0, 0.5, 11)) == dumps_model(build_model(da, UNIT2, g, 1.0, 0.5, 11))
    assert build_model(da, UNIT2, g, 1.0, 0.5, 11) != build_model(da, UNIT2, g, 1.0, 0.5, 12)


def test_build_model_rejects_empty():
    with pytest.raises(ValueError):
        build_model([], UNIT2, G331, 1.0)


# --- serialization -----------------------------------------------------------

@pytest.fixture
def fixture_model():
    g = GridSpec(4, 3, 5, v=2)
    da = random_cube_dataset(np.random.default_rng(10), g, 40)
    return build_model(da, UNIT2, g, 1.0, 0.5, 5)


def test_round_trip(fixture_model, tmp_path):
    path = tmp_path / "m.json"
    save_model(fixture_model, path)
    assert load_model(path) == fixture_model
    assert loads_model(dumps_model(fixture_model)) == fixture_model


def test_round_trip_noise_off():
    m = build_model(TWO, UNIT2, G331, NOISE_OFF)
    assert loads_model(dumps_model(m)) == m


def test_truncated_file(fixture_model):
    text = dumps_model(fixture_model)
    with pytest.raises(CorruptModelFile):
        loads_model(text[: len(text) // 2])


def test_bumped_version(fixture_model):
    doc = model_to_dict(fixture_model)
    doc["version"] += 1
    with pytest.raises(VersionMismatch):
        loads_model(json.dumps(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("grid"),
    lambda d: d.__setitem__("format", "other"),
    lambda d: d["transitions"][0][1].append([10 ** 6, 0.5]),
    lambda d: d["start"].append([-3, 0.5]),
    lambda d: d["budget"].__setitem__("delta_split", 2),
])
def test_corrupt_documents(fixture_model, mutate):
    doc = model_to_dict(fixture_model)
    mutate(doc)
    with pytest.raises(CorruptModelFile):
        loads_model(json.dumps(doc))


def test_non_neighbor_target_rejected(fixture_model):
    doc = model_to_dict(fixture_model)
    i = doc["transitions"][0][0]
    far = (i + 2 * 3 * 5) % fixture_model.grid.n_cubes
    doc["transitions"][0][1].append([far, 0.1])
    with pytest.raises(CorruptModelFile):
        loads_model(json.dumps(doc))
