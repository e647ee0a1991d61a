import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from greenprint.energy import (
    EnergyParams,
    ParameterError,
    TrainingConfig,
    annual_predictions,
    backsolve_gpu_efficiency,
    carbon_from_energy,
    energy_forward,
    energy_prediction,
    energy_training,
    prediction_grid,
    project_carbon,
)

G = 3.613e9
PIRNATECO = TrainingConfig(15723, 33.75)


def test_energy_forward_pirnateco():
    e = energy_forward(345_000_000, PIRNATECO, EnergyParams(G))
    assert e == pytest.approx(5.067e4, rel=1e-3)
    assert 3 * e == pytest.approx(152_000, rel=1e-3)


def test_energy_forward_trivial():
    assert energy_forward(0, PIRNATECO, EnergyParams()) == 0
    assert energy_forward(10**9, TrainingConfig(1, 1), EnergyParams(1e9)) == 1.0


@pytest.mark.parametrize(
    "flops, epochs, kj, grams",
    [
        (345_000_000, (85 + 15 + 15 + 20) / 4, 152, 10.6),
        (535_000_000, (67 + 30 + 23 + 31) / 4, 264, 18.3),
        (2_479_000_000, (181 + 32 + 34 + 68) / 4, 2547, 176.9),
    ],
)
def test_table_rows(flops, epochs, kj, grams):
    rep = energy_training(flops, TrainingConfig(15723, epochs), EnergyParams(G, 250))
    assert rep.e_training / 1e3 == pytest.approx(kj, rel=0.01)
    assert rep.carbon_training == pytest.approx(grams, rel=0.01)


def test_prediction_energy():
    p = EnergyParams(G)
    one = energy_prediction(345_000_000, 1, p)
    assert one == pytest.approx(0.0955, rel=1e-3)
    assert energy_prediction(345_000_000, 0, p) == 0
    assert energy_prediction(345_000_000, 2, p) == 2 * one


@pytest.mark.parametrize("joules, grams", [(152_000, 10.5556), (3.6e6, 250), (2_547_000, 176.875)])
def test_carbon_from_energy(joules, grams):
    assert carbon_from_energy(joules, 250) == pytest.approx(grams, abs=1e-4)


def test_fleet_projection():
    n = annual_predictions(7.4e9)
    assert n == 64_824_000_000_000
    points = project_carbon(345_000_000, n, EnergyParams(G, 250))
    # 0.0955 J per prediction * 6.48e13 -> ~1.72e6 kWh -> ~4.3e8 g at 250 g/kWh
    assert points[-1].grams == pytest.approx(4.3e8, rel=0.01)
    assert [p.n_predictions for p in points[:3]] == [1, 10, 100]
    assert points[-1].n_predictions == n


def test_grid():
    assert prediction_grid(1) == [1]
    assert prediction_grid(10) == [1, 10]
    assert prediction_grid(250) == [1, 10, 100, 250]


def test_backsolve():
    g = backsolve_gpu_efficiency(345_000_000, PIRNATECO, 152_000)
    assert g == pytest.approx(3.613e9, rel=1e-3)
    assert energy_training(345_000_000, PIRNATECO, EnergyParams(g)).e_training == pytest.approx(152_000, rel=1e-15)
    chin = energy_training(535_000_000, TrainingConfig(15723, 37.75), EnergyParams(g)).e_training
    cerar = energy_training(2_479_000_000, TrainingConfig(15723, 78.75), EnergyParams(g)).e_training
    assert chin == pytest.approx(264_000, rel=0.01)
    assert cerar == pytest.approx(2_547_000, rel=0.01)


@pytest.mark.parametrize("bad", [
    lambda: EnergyParams(0, 250),
    lambda: EnergyParams(1e9, -1),
    lambda: TrainingConfig(0, 1),
    lambda: TrainingConfig(10, 0),
    lambda: backsolve_gpu_efficiency(1, PIRNATECO, 0),
    lambda: carbon_from_energy(-1, 250),
])
def test_parameter_errors(bad):
    with pytest.raises(ParameterError):
        bad()


flops = st.integers(0, 10**12)
positive = st.floats(1e-3, 1e6, allow_nan=False)


@given(flops, st.integers(1, 10**6), positive, st.floats(1e6, 1e13))
def test_training_ratios(m, samples, epochs, g):
    rep = energy_training(m, TrainingConfig(samples, epochs), EnergyParams(g))
    assert rep.e_backward == 2 * rep.e_forward
    assert rep.e_training == 3 * rep.e_forward


@given(st.floats(0, 1e12), st.floats(0, 1e3), st.floats(1, 1e3))
def test_carbon_linear(e, a, ci):
    assert carbon_from_energy(a * e, ci) == pytest.approx(a * carbon_from_energy(e, ci), rel=1e-12, abs=1e-300)


@given(st.integers(1, 10**10), st.integers(1, 10**5), positive, st.floats(1e-3, 1e9))
def test_backsolve_is_right_inverse(m, samples, epochs, target):
    cfg = TrainingConfig(samples, epochs)
    g = backsolve_gpu_efficiency(m, cfg, target)
    assert math.isclose(energy_training(m, cfg, EnergyParams(g)).e_training, target, rel_tol=1e-12)


@given(flops, st.integers(1, 10**5), positive, st.floats(1e6, 1e12), st.integers(2, 5))
def test_forward_linearity(m, samples, epochs, g, k):
    p = EnergyParams(g)
    base = energy_forward(m, TrainingConfig(samples, epochs), p)
    assert energy_forward(k * m, TrainingConfig(samples, epochs), p) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert energy_forward(m, TrainingConfig(k * samples, epochs), p) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert energy_forward(m, TrainingConfig(samples, k * epochs), p) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    assert energy_forward(m, TrainingConfig(samples, epochs), EnergyParams(k * g)) == pytest.approx(base / k, rel=1e-12, abs=1e-300)
