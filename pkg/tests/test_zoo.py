import pytest

from greenprint.arch import normalize_graph
from greenprint.complexity import model_cost
from greenprint.dsl import parse_model, serialize_model
from greenprint.energy import EnergyParams, TrainingConfig, backsolve_gpu_efficiency, energy_training
from greenprint.shapes import infer_shapes
from greenprint.zoo import (
    Category,
    UnknownModel,
    ZooEntry,
    default_training_config,
    get_model,
    list_models,
    shipped_model_text,
)


def test_pirnateco_epochs():
    e = get_model("pirnateco")
    assert e.epochs_by_category == {
        Category.RANDOM: 85, Category.NARROW: 15, Category.WIDE: 15, Category.WITHIN: 20,
    }
    assert e.mean_epochs == 33.75


def test_chin_metadata():
    e = get_model("chin-cnn")
    assert (e.published_weights, e.published_flops) == (13_700_000, 535_000_000)
    assert (e.published_energy_kj, e.published_carbon_g) == (264.0, 18.3)
    assert [e.epochs_by_category[c] for c in (Category.RANDOM, Category.NARROW, Category.WIDE, Category.WITHIN)] == [67, 30, 23, 31]
    assert e.graph is None


def test_unknown():
    with pytest.raises(UnknownModel):
        get_model("nonexistent")


def test_list_models():
    listing = list_models()
    assert listing == sorted(listing)
    assert ("pirnateco", True) in listing
    assert ("cerar-cnn4r", False) in listing
    assert listing == list_models()


def test_training_configs():
    assert default_training_config(Category.RANDOM) == TrainingConfig(15723, 85, 32)
    assert default_training_config("within") == TrainingConfig(15723, 20, 32)
    assert default_training_config(Category.MEAN, "pirnateco").epochs == 33.75
    assert default_training_config("mean", "cerar-cnn4r").epochs == 78.75


def test_entry_invariants():
    with pytest.raises(ValueError):
        ZooEntry("empty")
    with pytest.raises(ValueError):
        ZooEntry("partial", published_weights=1, epochs_by_category={Category.RANDOM: 1})


def test_pirnateco_within_ten_percent():
    cost = model_cost(infer_shapes(normalize_graph(get_model("pirnateco").graph)))
    assert 2.79e6 <= cost.total_params <= 3.41e6
    assert 310.5e6 <= cost.total_flops <= 379.5e6


def test_shipped_file_is_canonical():
    g = get_model("pirnateco").graph
    text = shipped_model_text("pirnateco")
    assert text == serialize_model(g)
    assert parse_model(text) == g


def test_metadata_rows_consistent():
    pirn = get_model("pirnateco")
    cfg = TrainingConfig(15723, pirn.mean_epochs)
    g = backsolve_gpu_efficiency(pirn.published_flops, cfg, pirn.published_energy_kj * 1e3)
    for name, has_graph in list_models():
        e = get_model(name)
        if has_graph or e.published_energy_kj is None:
            continue
        rep = energy_training(e.published_flops, TrainingConfig(15723, e.mean_epochs), EnergyParams(g))
        assert rep.e_training == pytest.approx(e.published_energy_kj * 1e3, rel=0.01)
