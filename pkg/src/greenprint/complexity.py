"""FLOP and parameter accounting for fully connected, convolutional and pooling layers.

A multiply-accumulate counts as 2 FLOPs.  All arithmetic is on Python ints,
so totals are exact.

Two counting modes exist.  ``paper_fidelity`` charges only dense, conv and
pooling layers; ``extended`` also charges batch norm, residual adds,
stand-alone activations and global average pooling.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .arch import (
    Activation,
    ActivationLayer,
    AddFrom,
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    KernelGeometry,
    LayerSpec,
    Pool,
    PoolWithPadding,
    TensorShape,
    layer_kind,
)
from .shapes import ShapedGraph, window_output_shape


class CountingMode(str, Enum):
    PAPER_FIDELITY = "paper_fidelity"
    EXTENDED = "extended"


class ReluCost(str, Enum):
    """How an activation on a conv layer is charged.

    ``printed``: one extra per-filter term ``2*C*Kr*Kc + 1`` per filter.
    ``per_element``: one FLOP per output element.
    """

    PRINTED = "printed"
    PER_ELEMENT = "per_element"


@dataclass(frozen=True)
class LayerCost:
    layer_index: int
    kind: str
    flops: int
    params: int
    input_shape: TensorShape
    output_shape: TensorShape
    derivation: str = ""


@dataclass(frozen=True)
class ModelCost:
    per_layer: tuple[LayerCost, ...]
    total_flops: int
    total_params: int
    mode: CountingMode
    relu_cost: ReluCost = ReluCost.PRINTED


def flops_fc(input_size: int, output_size: int, activation: Activation) -> int:
    """``2*Is*Os`` multiply-adds, plus ``Os`` when a rectifier follows."""
    flops = 2 * input_size * output_size
    if activation.active:
        flops += output_size
    return flops


def _per_position(channels: int, geom: KernelGeometry) -> int:
    # one MAC per kernel tap and channel, plus the bias
    return 2 * channels * geom.k_rows * geom.k_cols + 1


def flops_conv_filter(in_shape: TensorShape, geom: KernelGeometry) -> int:
    out = window_output_shape(in_shape, geom, 1)
    return out.rows * out.cols * _per_position(in_shape.channels, geom)


def flops_conv_layer(
    in_shape: TensorShape,
    geom: KernelGeometry,
    filters: int,
    activation: Activation,
    relu_cost: ReluCost = ReluCost.PRINTED,
) -> int:
    per_filter = flops_conv_filter(in_shape, geom)
    if activation.active:
        if relu_cost is ReluCost.PRINTED:
            per_filter += _per_position(in_shape.channels, geom)
        else:
            out = window_output_shape(in_shape, geom, 1)
            per_filter += out.rows * out.cols
    return per_filter * filters


def conv_activation_surcharge(
    in_shape: TensorShape,
    geom: KernelGeometry,
    filters: int,
    activation: Activation,
    relu_cost: ReluCost = ReluCost.PRINTED,
) -> int:
    """The part of :func:`flops_conv_layer` attributable to the activation."""
    return flops_conv_layer(in_shape, geom, filters, activation, relu_cost) - flops_conv_filter(in_shape, geom) * filters


def flops_pool(in_shape: TensorShape, geom: KernelGeometry) -> int:
    """Pooling charged like a single filter of the same window (no padding allowed)."""
    if geom.padded:
        raise PoolWithPadding(-1)
    return flops_conv_filter(in_shape, geom)


def param_count(layer: LayerSpec, in_shape: TensorShape) -> int:
    if isinstance(layer, Conv2D):
        per_filter = in_shape.channels * layer.geom.window + (1 if layer.bias else 0)
        return layer.filters * per_filter
    if isinstance(layer, Dense):
        return layer.units * (in_shape.elements + (1 if layer.bias else 0))
    if isinstance(layer, BatchNorm):
        return 2 * in_shape.channels
    return 0


def extended_flops(layer: LayerSpec, in_shape: TensorShape) -> int:
    """Charge for layers that the paper-fidelity mode treats as free."""
    if isinstance(layer, BatchNorm):
        return 2 * in_shape.elements
    if isinstance(layer, (AddFrom, ActivationLayer)):
        return in_shape.elements
    if isinstance(layer, GlobalAvgPool):
        return in_shape.elements + in_shape.channels
    return 0


def layer_flops(
    layer: LayerSpec,
    in_shape: TensorShape,
    mode: CountingMode = CountingMode.PAPER_FIDELITY,
    relu_cost: ReluCost = ReluCost.PRINTED,
) -> int:
    if isinstance(layer, Conv2D):
        return flops_conv_layer(in_shape, layer.geom, layer.filters, layer.activation, relu_cost)
    if isinstance(layer, Dense):
        return flops_fc(in_shape.elements, layer.units, layer.activation)
    if isinstance(layer, Pool):
        return flops_pool(in_shape, layer.geom)
    if mode is CountingMode.EXTENDED:
        return extended_flops(layer, in_shape)
    return 0


def derivation(
    layer: LayerSpec,
    in_shape: TensorShape,
    mode: CountingMode = CountingMode.PAPER_FIDELITY,
    relu_cost: ReluCost = ReluCost.PRINTED,
) -> str:
    """Human-readable arithmetic behind :func:`layer_flops`."""
    c = in_shape.channels
    if isinstance(layer, (Conv2D, Pool)):
        g = layer.geom
        out = window_output_shape(in_shape, g, 1)
        per_pos = f"(2*{c}*{g.k_rows}*{g.k_cols}+1)"
        base = f"{out.rows}*{out.cols}*{per_pos}"
        if isinstance(layer, Pool):
            return base
        text = f"{base}*{layer.filters}"
        if layer.activation.active:
            extra = per_pos if relu_cost is ReluCost.PRINTED else f"{out.rows}*{out.cols}"
            text = f"({base}+{extra})*{layer.filters}"
        return text
    if isinstance(layer, Dense):
        text = f"2*{in_shape.elements}*{layer.units}"
        return text + (f"+{layer.units}" if layer.activation.active else "")
    if mode is CountingMode.EXTENDED:
        if isinstance(layer, BatchNorm):
            return f"2*{in_shape.elements}"
        if isinstance(layer, (AddFrom, ActivationLayer)):
            return f"{in_shape.elements}"
        if isinstance(layer, GlobalAvgPool):
            return f"{in_shape.elements}+{c}"
    return "0"


def model_cost(
    sg: ShapedGraph,
    mode: CountingMode = CountingMode.PAPER_FIDELITY,
    relu_cost: ReluCost = ReluCost.PRINTED,
) -> ModelCost:
    mode = CountingMode(mode)
    relu_cost = ReluCost(relu_cost)
    rows = []
    for i, layer in enumerate(sg.graph.layers):
        x, y = sg.shapes[i]
        rows.append(
            LayerCost(
                layer_index=i,
                kind=layer_kind(layer),
                flops=layer_flops(layer, x, mode, relu_cost),
                params=param_count(layer, x),
                input_shape=x,
                output_shape=y,
                derivation=derivation(layer, x, mode, relu_cost),
            )
        )
    return ModelCost(
        per_layer=tuple(rows),
        total_flops=sum(r.flops for r in rows),
        total_params=sum(r.params for r in rows),
        mode=mode,
        relu_cost=relu_cost,
    )
