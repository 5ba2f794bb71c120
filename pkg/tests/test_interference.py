import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgbohm.current import CurrentField
from kgbohm.interference import (
    GRID_COLUMNS,
    BeamProfile,
    TwoFrequencyScenario,
    alpha,
    classical_density,
    conventional_density,
    correlation_length,
    decomposition,
    deviation_map,
    grid_rows,
    kg_density,
    sign_flip_set,
    time_average,
    write_grid_csv,
)

freq = st.floats(0.05, 50.0)


def two_slit(w1=1.0, w2=4.0, box=(8.0, 8.0), **kw):
    b1 = BeamProfile(0.3, (3.0, 4.0), 1.5, **kw)
    b2 = BeamProfile(-0.3, (3.0, 4.5), 1.5, **kw)
    return TwoFrequencyScenario(w1, w2, b1, b2, box)


@pytest.fixture(scope="module")
def scenario():
    return two_slit()


def test_alpha_examples():
    assert alpha(1.0, 4.0) == 1.25
    assert alpha(2.0, 2.0) == 1.0
    with pytest.raises(ValueError):
        alpha(0.0, 1.0)


@given(freq, freq)
def test_alpha_symmetric_and_at_least_one(a, b):
    assert alpha(a, b) == pytest.approx(alpha(b, a), rel=1e-15)
    assert alpha(a, b) >= 1.0


def test_profiles_normalized(scenario):
    n1, n2 = scenario.norms()
    assert abs(n1 - 1) < 1e-12 and abs(n2 - 1) < 1e-12


def test_decomposition_identities(scenario, rng):
    x = rng.uniform(0, 8, size=(500, 2))
    for t in (0.0, 0.37, 2.9):
        d = decomposition(scenario, x, t)
        assert np.max(np.abs(d.rho - d.C - d.I)) < 1e-12
        assert np.max(np.abs(d.j0 - d.C - 1.25 * d.I)) < 1e-12
        assert np.max(np.abs((d.j0 - d.rho) - 0.25 * d.I)) < 1e-12


def test_kg_density_agrees_with_current_module(rng):
    sc = two_slit(box=(4.0, 4.0))
    cf = CurrentField(sc.to_wavefunction())
    x = np.c_[np.full(50, 0.8), rng.uniform(0, 4, size=(50, 2)), np.zeros(50)]
    assert np.allclose(cf.signed_time_component(x), kg_density(sc, x[:, 1:3], 0.8), atol=1e-12)


def test_equal_frequencies_no_deviation(rng):
    sc = two_slit(2.0, 2.0)
    x = rng.uniform(0, 8, size=(300, 2))
    for t in (0.0, 1.1):
        assert np.max(np.abs(conventional_density(sc, x, t) - kg_density(sc, x, t))) < 1e-12


def test_full_period_average_is_classical(scenario, rng):
    x = rng.uniform(0, 8, size=(100, 2))
    P = 2 * np.pi / 3
    C = classical_density(scenario, x)
    for kind in ("conventional", "kg"):
        assert np.max(np.abs(time_average(kind, scenario, x, 2 * P) - C)) < 1e-12


def test_partial_window_residual(scenario, rng):
    x = rng.uniform(0, 8, size=(100, 2))
    P = 2 * np.pi / 3
    r1 = time_average("kg", scenario, x, 10.25 * P) - classical_density(scenario, x)
    r2 = time_average("kg", scenario, x, 20.25 * P) - classical_density(scenario, x)
    big = np.abs(r1) > 1e-6
    assert np.allclose(r2[big] / r1[big], 10.25 / 20.25, rtol=1e-6)


def test_sign_flip_set_predicts_negative_j0(scenario, rng):
    x = rng.uniform(0, 8, size=(400, 2))
    flips = sign_flip_set(scenario, x)
    ts = np.linspace(0, 2 * np.pi / 3, 600, endpoint=False)
    jmin = np.min([kg_density(scenario, x, t) for t in ts], axis=0)
    margin = np.abs(jmin) > 1e-6
    assert flips.any() and (~flips).any()
    assert np.array_equal(flips[margin], jmin[margin] < 0)


def test_abs_average_exceeds_classical_on_flip_set(scenario, rng):
    x = rng.uniform(0, 8, size=(400, 2))
    flips = sign_flip_set(scenario, x)
    dev = time_average("abs-kg", scenario, x, 2 * np.pi / 3) - classical_density(scenario, x)
    assert np.all(dev[flips] > 0)
    assert np.all(np.abs(dev[~flips]) < 1e-12)


def test_correlation_length_of_cosine():
    h = 0.01
    x = np.arange(4000) * h
    lam = 2.0
    got = correlation_length(np.cos(2 * np.pi * x / lam), [h])
    assert abs(got - lam * np.arccos(np.exp(-1)) / (2 * np.pi)) < 2 * h
    assert np.isnan(correlation_length(np.ones(50), [h]))


def test_correlation_length_takes_smallest_axis():
    x = np.arange(200) * 0.05
    f = np.cos(x[:, None]) * np.cos(3 * x[None, :])
    assert abs(correlation_length(f, [0.05, 0.05]) - np.arccos(np.exp(-1)) / 3) < 0.05


def test_deviation_map_validation(scenario):
    coarse = [np.linspace(0, 8, 10)] * 2
    with pytest.raises(ValueError):
        deviation_map(scenario, coarse, 1.0)
    with pytest.raises(ValueError):
        deviation_map(scenario, [np.linspace(0, 8, 400)], 1.0)
    with pytest.raises(ValueError):
        time_average("kg", scenario, np.zeros((1, 2)), 0.0)


def test_deviation_map_zero_at_equal_frequency():
    sc = two_slit(2.0, 2.0, box=(2.0, 2.0))
    axes = [np.linspace(0, 2, 17)] * 2
    dm = deviation_map(sc, axes, 3.0)
    assert not np.any(dm.values) and np.isnan(dm.correlation_length)


def test_one_dimensional_plane_beams():
    b1, b2 = BeamProfile(1.0, envelope="plane"), BeamProfile(-1.0, envelope="plane")
    sc = TwoFrequencyScenario(1.0, 4.0, b1, b2, (2 * np.pi,))
    x = np.linspace(0, 2 * np.pi, 50)[:, None]
    d = decomposition(sc, x, 0.3)
    assert np.max(np.abs(d.j0 - d.C - 1.25 * d.I)) < 1e-12
    with pytest.raises(ValueError):
        TwoFrequencyScenario(1.0, 4.0, BeamProfile(1.0), b2, (2 * np.pi,))


def test_scenario_validation():
    with pytest.raises(ValueError):
        BeamProfile(envelope="top-hat")
    with pytest.raises(ValueError):
        TwoFrequencyScenario(1.0, 0.5, BeamProfile(), BeamProfile(), (4.0, 4.0), mass=1.0)
    with pytest.raises(ValueError):
        TwoFrequencyScenario(1.0, 2.0, BeamProfile(), BeamProfile(), (4.0, 4.0, 4.0))


def test_grid_csv(tmp_path):
    sc = two_slit(box=(2.0, 2.0))
    axes = [np.linspace(0.1, 1.9, 5)] * 2
    rows = list(grid_rows(sc, axes, 0.2, 1.0))
    assert len(rows) == 25
    write_grid_csv(tmp_path / "g.csv", rows)
    with open(tmp_path / "g.csv") as fh:
        out = list(csv.reader(fh))
    assert tuple(out[0]) == GRID_COLUMNS
    assert [float(v) for v in out[1]] == list(rows[0])
