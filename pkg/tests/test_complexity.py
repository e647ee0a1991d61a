import random

import pytest

from greenprint.arch import (
    NO_ACTIVATION,
    RELU,
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    Input,
    KernelGeometry,
    ModelGraph,
    Pool,
    PoolKind,
    PoolWithPadding,
    TensorShape,
)
from greenprint.complexity import (
    CountingMode,
    ReluCost,
    flops_conv_filter,
    flops_conv_layer,
    flops_fc,
    flops_pool,
    model_cost,
    param_count,
)
from greenprint.shapes import infer_shapes
from graphgen import random_desk_graph


@pytest.mark.parametrize("args, expected", [((1, 1, RELU), 3), ((100, 10, RELU), 2010), ((4, 2, NO_ACTIVATION), 16)])
def test_flops_fc(args, expected):
    assert flops_fc(*args) == expected


@pytest.mark.parametrize(
    "shape, geom, expected",
    [
        (TensorShape(4, 4, 1), KernelGeometry(2, 2), 81),
        (TensorShape(1, 1, 1), KernelGeometry(1, 1), 3),
        # 16 * 306 positions * (2*2*1*7 + 1)
        (TensorShape(16, 924, 2), KernelGeometry(1, 7, 1, 3), 141_984),
    ],
)
def test_flops_conv_filter(shape, geom, expected):
    assert flops_conv_filter(shape, geom) == expected


def test_flops_conv_layer():
    assert flops_conv_layer(TensorShape(16, 924, 2), KernelGeometry(1, 7, 1, 3), 32, RELU) == 4_544_416
    assert flops_conv_layer(TensorShape(1, 1, 1), KernelGeometry(1, 1), 1, NO_ACTIVATION) == 3
    assert flops_conv_layer(TensorShape(1, 1, 1), KernelGeometry(1, 1), 1, RELU) == 6


def test_relu_per_element_variant():
    # one FLOP per output element instead of the per-filter term
    assert flops_conv_layer(TensorShape(4, 4, 1), KernelGeometry(2, 2), 2, RELU, ReluCost.PER_ELEMENT) == (81 + 9) * 2


@pytest.mark.parametrize(
    "shape, geom, expected",
    [
        (TensorShape(16, 306, 32), KernelGeometry(1, 4, 1, 4), 312_512),
        (TensorShape(1, 1, 1), KernelGeometry(1, 1), 3),
        (TensorShape(2, 2, 1), KernelGeometry(2, 2, 2, 2), 9),
    ],
)
def test_flops_pool(shape, geom, expected):
    assert flops_pool(shape, geom) == expected


def test_pool_padding_rejected():
    with pytest.raises(PoolWithPadding):
        flops_pool(TensorShape(4, 4, 1), KernelGeometry(2, 2, 2, 2, 1, 1))


def test_param_count():
    assert param_count(Dense(3), TensorShape(1, 1, 1000)) == 3003
    assert param_count(Conv2D(32, KernelGeometry(1, 7, 1, 3)), TensorShape(16, 924, 2)) == 480
    assert param_count(Conv2D(32, KernelGeometry(1, 7), bias=False), TensorShape(16, 924, 2)) == 448
    assert param_count(BatchNorm(), TensorShape(5, 5, 64)) == 128
    assert param_count(Flatten(), TensorShape(5, 5, 64)) == 0


def test_input_only_model():
    cost = model_cost(infer_shapes(ModelGraph("m", (Input(TensorShape(1, 1, 1)),))))
    assert (cost.total_flops, cost.total_params) == (0, 0)


def test_extended_mode_charges():
    g = ModelGraph("m", (Input(TensorShape(2, 3, 4)), BatchNorm(), GlobalAvgPool(), Flatten()))
    sg = infer_shapes(g)
    assert model_cost(sg).total_flops == 0
    ext = model_cost(sg, CountingMode.EXTENDED)
    assert [r.flops for r in ext.per_layer] == [0, 48, 28, 0]


def test_monotone_in_filters():
    shape, geom = TensorShape(6, 7, 3), KernelGeometry(3, 2, 1, 2, 1, 0)
    values = [flops_conv_layer(shape, geom, n, RELU) for n in range(1, 20)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_monotone_fc():
    for act in (NO_ACTIVATION, RELU):
        for n in range(1, 20):
            assert flops_fc(n, 5, act) < flops_fc(n + 1, 5, act)
            assert flops_fc(5, n, act) < flops_fc(5, n + 1, act)


@pytest.mark.parametrize("seed", range(100))
def test_totals_and_modes(seed):
    sg = infer_shapes(random_desk_graph(random.Random(seed)))
    base = model_cost(sg)
    ext = model_cost(sg, CountingMode.EXTENDED)
    assert base.total_flops == sum(r.flops for r in base.per_layer)
    assert base.total_params == sum(r.params for r in base.per_layer)
    assert ext.total_flops >= base.total_flops
    assert all(isinstance(r.flops, int) and isinstance(r.params, int) for r in base.per_layer)


@pytest.mark.parametrize("seed", range(50))
def test_additivity_over_concatenation(seed):
    rng = random.Random(seed)
    a = random_desk_graph(rng)
    out = infer_shapes(a).output_shape
    tail = random_desk_graph(rng, shape=out)
    sb = infer_shapes(tail)
    joined = ModelGraph("ab", a.layers + tail.layers[1:])
    total = model_cost(infer_shapes(joined)).total_flops
    assert total == model_cost(infer_shapes(a)).total_flops + model_cost(sb).total_flops


def test_pool_kind_does_not_change_charge():
    shape = TensorShape(4, 6, 3)
    for kind in PoolKind:
        sg = infer_shapes(ModelGraph("p", (Input(shape), Pool(kind, KernelGeometry(2, 3)))))
        assert model_cost(sg).total_flops == flops_pool(shape, KernelGeometry(2, 3))
