"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line."""

import ast
import json
import math
import operator
import random
import time

import numpy as np
import pytest

from greenprint.arch import Conv2D, Dense, Pool, normalize_graph
from greenprint.cli import main
from greenprint.complexity import CountingMode, conv_activation_surcharge, model_cost
from greenprint.dsl import parse_model, serialize_model
from greenprint.energy import (
    EnergyParams,
    TrainingConfig,
    backsolve_gpu_efficiency,
    carbon_from_energy,
    energy_prediction,
    energy_training,
)
from greenprint.executor import Classification, compare_counts, execute_counting, init_weights
from greenprint.metrics import evaluate_predictions
from greenprint.report import analysis_report, digest
from greenprint.shapes import infer_shapes
from greenprint.zoo import get_model
from graphgen import random_desk_graph, random_structural_graph

SAMPLES = 15723


def _arith(text: str) -> int:
    """Evaluate an integer expression made of + and * only."""
    ops = {ast.Add: operator.add, ast.Mult: operator.mul}

    def walk(node):
        if isinstance(node, ast.BinOp) and type(node.op) in ops:
            return ops[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        raise ValueError(f"unexpected token in {text!r}")

    return walk(ast.parse(text, mode="eval").body)


@pytest.mark.criterion(1, "carbon conversion reproduces 10.6 / 18.3 / 176.9 g within 0.05 g")
def test_carbon_conversion():
    for kj, grams in [(152, 10.6), (264, 18.3), (2547, 176.9)]:
        assert abs(carbon_from_energy(kj * 1e3, 250) - grams) <= 0.05


@pytest.mark.criterion(2, "back-solved GPU efficiency reproduces 264 kJ and 2547 kJ within 1%")
def test_cross_consistency():
    g = backsolve_gpu_efficiency(345_000_000, TrainingConfig(SAMPLES, 33.75), 152_000)
    params = EnergyParams(g, 250)
    for flops, epochs, kj in [(535_000_000, 37.75, 264), (2_479_000_000, 78.75, 2547)]:
        e = energy_training(flops, TrainingConfig(SAMPLES, epochs), params).e_training
        assert abs(e / (kj * 1e3) - 1) <= 0.01


@pytest.mark.criterion(3, "PirnatEco params and FLOPs within 10%, derivation per layer")
def test_pirnateco_reconstruction():
    t0 = time.perf_counter()
    sg = infer_shapes(normalize_graph(get_model("pirnateco").graph))
    cost = model_cost(sg, CountingMode.PAPER_FIDELITY)
    assert abs(cost.total_params / 3.1e6 - 1) <= 0.10
    assert abs(cost.total_flops / 345e6 - 1) <= 0.10
    report = analysis_report("pirnateco", cost, digest(b""))
    assert len(report["layers"]) == len(sg.graph.layers)
    for row in report["layers"]:
        assert _arith(row["derivation"]) == row["flops"]
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(4, "200 desk graphs: dense exact, conv +1 per output element, pool FormulaMismatch")
def test_formula_vs_oracle():
    t0 = time.perf_counter()
    seen = set()
    for seed in range(200):
        g = random_desk_graph(random.Random(seed), max_compute_layers=4, max_dim=8)
        sg = infer_shapes(g)
        assert max(max(s.rows, s.cols, s.channels) for pair in sg.shapes for s in pair) <= 8
        s = sg.graph.input_shape
        x = np.random.default_rng(seed).standard_normal((s.rows, s.cols, s.channels))
        _, counts = execute_counting(sg, x, init_weights(sg, seed))
        cost = model_cost(sg)
        report = compare_counts(cost, counts, sg)
        for row, lc, ops in zip(report.rows, cost.per_layer, counts):
            layer = g.layers[row.layer_index]
            x_shape, y_shape = sg.shapes[row.layer_index]
            if isinstance(layer, Dense):
                seen.add("dense")
                assert lc.flops == ops.total
                assert row.classification is Classification.EXACT_MATCH
            elif isinstance(layer, Conv2D):
                seen.add("conv")
                surcharge = conv_activation_surcharge(x_shape, layer.geom, layer.filters, layer.activation)
                assert lc.flops - surcharge == ops.counted_flops + y_shape.elements
                assert row.classification is Classification.FIXED_OFFSET
            elif isinstance(layer, Pool):
                seen.add("pool")
                assert row.classification is Classification.FORMULA_MISMATCH
            else:
                assert row.classification is Classification.EXACT_MATCH
        assert report.ok
    assert seen == {"dense", "conv", "pool"}
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.criterion(5, "7.4e9 users gives ~6.48e13 predictions; curve monotone and linear")
def test_fleet_projection(capsys):
    assert main(["project", "--flops", "345e6", "--users", "7.4e9", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    points = out["curve"]
    n = [p["n_predictions"] for p in points]
    grams = [p["grams"] for p in points]
    assert abs(n[-1] / 6.48e13 - 1) <= 0.01
    assert n == sorted(n) and len(set(n)) == len(n)
    assert all(b > a for a, b in zip(grams, grams[1:]))
    per_prediction = carbon_from_energy(energy_prediction(345_000_000, 1, EnergyParams()), 250)
    for k, gr in zip(n, grams):
        assert math.isclose(gr, k * per_prediction, rel_tol=1e-9)


@pytest.mark.criterion(6, "500 random graphs round-trip byte-identically")
def test_round_trip():
    t0 = time.perf_counter()
    for seed in range(500):
        text = serialize_model(random_structural_graph(random.Random(seed)))
        assert serialize_model(parse_model(text)) == text
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(7, "RMSE >= MDE on 1000 files; 2-row oracle to 1e-9")
def test_mde_rmse():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        rows = rng.uniform(-50, 50, size=(int(rng.integers(1, 40)), 6))
        text = "\n".join(",".join(repr(float(v)) for v in r) for r in rows)
        mde, rmse = evaluate_predictions(text)
        assert rmse >= mde - 1e-12 * max(1.0, mde)
    mde, rmse = evaluate_predictions("0,0,0,3,0,0\n1,1,1,1,5,1\n")
    assert abs(mde - 3.5) <= 1e-9
    assert abs(rmse - math.sqrt(12.5)) <= 1e-9
