"""Naive reference execution with operation counting.

Every multiply, add and comparison performed while pushing a real tensor
through the graph is tallied, one increment per scalar operation.  This is
only meant to check the analytic formulas on tiny shapes; anything with a
dimension above :data:`DESK_SCALE_LIMIT` is refused.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .arch import (
    Activation,
    ActivationKind,
    ActivationLayer,
    AddFrom,
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    GraphError,
    Input,
    LabelPoint,
    Pool,
    PoolKind,
    TensorShape,
    layer_kind,
)
from .complexity import (
    CountingMode,
    ModelCost,
    conv_activation_surcharge,
    extended_flops,
)
from .shapes import ShapedGraph

DESK_SCALE_LIMIT = 64


class ShapeMismatch(GraphError):
    reason = "tensor does not match the expected shape"


class DeskScaleExceeded(GraphError):
    reason = f"dimension above the desk-scale limit of {DESK_SCALE_LIMIT}"


@dataclass(frozen=True)
class OpCount:
    muls: int = 0
    adds: int = 0
    comparisons: int = 0

    @property
    def counted_flops(self) -> int:
        return self.muls + self.adds

    @property
    def total(self) -> int:
        return self.muls + self.adds + self.comparisons


class _Counter:
    __slots__ = ("muls", "adds", "comparisons")

    def __init__(self) -> None:
        self.muls = 0
        self.adds = 0
        self.comparisons = 0

    def freeze(self) -> OpCount:
        return OpCount(self.muls, self.adds, self.comparisons)


def check_desk_scale(sg: ShapedGraph) -> None:
    for i, (x, y) in enumerate(sg.shapes):
        for shape in (x, y):
            if max(shape.rows, shape.cols, shape.channels) > DESK_SCALE_LIMIT:
                raise DeskScaleExceeded(i, f"shape {shape}")


def init_weights(sg: ShapedGraph, seed: int = 0, zero_bias: bool = False) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Random ``(weight, bias)`` per parameterised layer, keyed by layer index.

    Conv weights are ``(filters, k_rows, k_cols, channels)``, dense weights
    ``(units, inputs)``, batch norm ``(scale, shift)`` per channel.
    """
    rng = np.random.default_rng(seed)
    weights = {}
    for i, layer in enumerate(sg.graph.layers):
        x = sg.input_of(i)
        if isinstance(layer, Conv2D):
            g = layer.geom
            w = rng.standard_normal((layer.filters, g.k_rows, g.k_cols, x.channels))
            b = rng.standard_normal(layer.filters) if layer.bias else np.zeros(layer.filters)
        elif isinstance(layer, Dense):
            w = rng.standard_normal((layer.units, x.elements))
            b = rng.standard_normal(layer.units) if layer.bias else np.zeros(layer.units)
        elif isinstance(layer, BatchNorm):
            w = rng.uniform(0.5, 1.5, x.channels)
            b = rng.standard_normal(x.channels)
        else:
            continue
        if zero_bias:
            b = np.zeros_like(b)
        weights[i] = (w, b)
    return weights


def _activate(t: np.ndarray, act: Activation, ops: _Counter) -> np.ndarray:
    if not act.active:
        return t
    slope = act.alpha if act.kind is ActivationKind.LEAKY_RELU else 0.0
    out = np.empty_like(t)
    flat_in, flat_out = t.reshape(-1), out.reshape(-1)
    for j in range(flat_in.size):
        v = flat_in[j]
        ops.comparisons += 1
        flat_out[j] = v if v > 0 else slope * v
    return out


def _conv(t: np.ndarray, layer: Conv2D, w: np.ndarray, b: np.ndarray, out_shape: TensorShape, ops: _Counter) -> np.ndarray:
    g = layer.geom
    rows, cols, chans = t.shape
    padded = np.zeros((rows + 2 * g.p_rows, cols + 2 * g.p_cols, chans))
    padded[g.p_rows:g.p_rows + rows, g.p_cols:g.p_cols + cols, :] = t
    out = np.empty((out_shape.rows, out_shape.cols, layer.filters))
    for r in range(out_shape.rows):
        for c in range(out_shape.cols):
            r0, c0 = r * g.s_rows, c * g.s_cols
            for f in range(layer.filters):
                acc = float(b[f])
                for kr in range(g.k_rows):
                    for kc in range(g.k_cols):
                        for ch in range(chans):
                            prod = w[f, kr, kc, ch] * padded[r0 + kr, c0 + kc, ch]
                            ops.muls += 1
                            acc = acc + prod
                            ops.adds += 1
                out[r, c, f] = acc
    return out


def _pool(t: np.ndarray, layer: Pool, out_shape: TensorShape, ops: _Counter) -> np.ndarray:
    g = layer.geom
    out = np.empty((out_shape.rows, out_shape.cols, out_shape.channels))
    for r in range(out_shape.rows):
        for c in range(out_shape.cols):
            r0, c0 = r * g.s_rows, c * g.s_cols
            for ch in range(out_shape.channels):
                acc = t[r0, c0, ch]
                for kr in range(g.k_rows):
                    for kc in range(g.k_cols):
                        if kr == 0 and kc == 0:
                            continue
                        v = t[r0 + kr, c0 + kc, ch]
                        if layer.kind is PoolKind.MAX:
                            ops.comparisons += 1
                            if v > acc:
                                acc = v
                        else:
                            ops.adds += 1
                            acc = acc + v
                if layer.kind is PoolKind.AVG:
                    acc = acc / g.window
                    ops.adds += 1  # division, counted as one add-equivalent
                out[r, c, ch] = acc
    return out


def _dense(t: np.ndarray, layer: Dense, w: np.ndarray, b: np.ndarray, ops: _Counter) -> np.ndarray:
    x = t.reshape(-1)
    out = np.empty(layer.units)
    for o in range(layer.units):
        acc = float(b[o])
        for i in range(x.size):
            prod = w[o, i] * x[i]
            ops.muls += 1
            acc = acc + prod
            ops.adds += 1
        out[o] = acc
    return out.reshape(1, 1, layer.units)


def _batchnorm(t: np.ndarray, scale: np.ndarray, shift: np.ndarray, ops: _Counter) -> np.ndarray:
    out = np.empty_like(t)
    rows, cols, chans = t.shape
    for r in range(rows):
        for c in range(cols):
            for ch in range(chans):
                out[r, c, ch] = t[r, c, ch] * scale[ch] + shift[ch]
                ops.muls += 1
                ops.adds += 1
    return out


def _add(t: np.ndarray, skip: np.ndarray, ops: _Counter) -> np.ndarray:
    out = np.empty_like(t)
    flat_t, flat_s, flat_o = t.reshape(-1), skip.reshape(-1), out.reshape(-1)
    for j in range(flat_t.size):
        flat_o[j] = flat_t[j] + flat_s[j]
        ops.adds += 1
    return out


def _global_avg(t: np.ndarray, ops: _Counter) -> np.ndarray:
    rows, cols, chans = t.shape
    out = np.empty((1, 1, chans))
    for ch in range(chans):
        acc = 0.0
        for r in range(rows):
            for c in range(cols):
                acc = acc + t[r, c, ch]
                ops.adds += 1
        out[0, 0, ch] = acc / (rows * cols)
        ops.adds += 1
    return out


def execute_counting(
    sg: ShapedGraph,
    input_tensor: np.ndarray,
    weights: Optional[dict[int, tuple[np.ndarray, np.ndarray]]] = None,
) -> tuple[np.ndarray, list[OpCount]]:
    """Run ``input_tensor`` (rows, cols, channels) through ``sg``.

    Returns the output tensor and one :class:`OpCount` per layer.  Missing
    ``weights`` are drawn with :func:`init_weights` at seed 0.
    """
    check_desk_scale(sg)
    in_shape = sg.graph.input_shape
    t = np.asarray(input_tensor, dtype=np.float64)
    if t.shape != (in_shape.rows, in_shape.cols, in_shape.channels):
        raise ShapeMismatch(0, f"got {t.shape}, expected {in_shape}")
    if weights is None:
        weights = init_weights(sg)
    labelled: dict[str, np.ndarray] = {}
    counts = []
    for i, layer in enumerate(sg.graph.layers):
        ops = _Counter()
        out_shape = sg.output_of(i)
        if isinstance(layer, Input):
            pass
        elif isinstance(layer, Conv2D):
            src = labelled[layer.source] if layer.source is not None else t
            w, b = weights[i]
            t = _activate(_conv(src, layer, w, b, out_shape, ops), layer.activation, ops)
        elif isinstance(layer, Pool):
            t = _pool(t, layer, out_shape, ops)
        elif isinstance(layer, Dense):
            w, b = weights[i]
            t = _activate(_dense(t, layer, w, b, ops), layer.activation, ops)
        elif isinstance(layer, BatchNorm):
            scale, shift = weights[i]
            t = _batchnorm(t, scale, shift, ops)
        elif isinstance(layer, Flatten):
            t = t.reshape(1, 1, -1)
        elif isinstance(layer, GlobalAvgPool):
            t = _global_avg(t, ops)
        elif isinstance(layer, ActivationLayer):
            t = _activate(t, layer.activation, ops)
        elif isinstance(layer, LabelPoint):
            labelled[layer.label] = t
        elif isinstance(layer, AddFrom):
            t = _add(t, labelled[layer.label], ops)
        else:
            raise GraphError(i, f"executor cannot run {layer_kind(layer)}")
        if t.shape != (out_shape.rows, out_shape.cols, out_shape.channels):
            raise ShapeMismatch(i, f"produced {t.shape}, expected {out_shape}")
        counts.append(ops.freeze())
    return t, counts


class Classification(str, Enum):
    EXACT_MATCH = "ExactMatch"
    FIXED_OFFSET = "FixedOffset"
    FORMULA_MISMATCH = "FormulaMismatch"
    UNEXPECTED = "Unexpected"


@dataclass(frozen=True)
class Discrepancy:
    layer_index: int
    kind: str
    analytic: int
    counted: OpCount
    # analytic minus the executor's comparable count
    difference: int
    classification: Classification
    note: str = ""


@dataclass(frozen=True)
class DiscrepancyReport:
    rows: tuple[Discrepancy, ...]

    @property
    def ok(self) -> bool:
        return all(r.classification is not Classification.UNEXPECTED for r in self.rows)


def compare_counts(analytic: ModelCost, counted: list[OpCount], sg: ShapedGraph) -> DiscrepancyReport:
    """Line analytic per-layer FLOPs up against the executor's tallies.

    Expected outcomes: dense layers match exactly (activation comparisons
    included); conv layers exceed the executor by exactly one FLOP per output
    element once the activation surcharge is set aside; pooling layers never
    match.  Layers the paper-fidelity mode treats as free are checked against
    the extended-mode charge.
    """
    if analytic.mode is not CountingMode.PAPER_FIDELITY:
        raise ValueError("compare_counts expects a paper_fidelity ModelCost")
    rows = []
    for cost, ops in zip(analytic.per_layer, counted):
        i = cost.layer_index
        layer = sg.graph.layers[i]
        x, y = sg.shapes[i]
        note = ""
        if isinstance(layer, Dense):
            diff = cost.flops - ops.total
            cls = Classification.EXACT_MATCH if diff == 0 else Classification.UNEXPECTED
        elif isinstance(layer, Conv2D):
            surcharge = conv_activation_surcharge(x, layer.geom, layer.filters, layer.activation, analytic.relu_cost)
            diff = cost.flops - surcharge - ops.counted_flops
            cls = Classification.FIXED_OFFSET if diff == y.elements else Classification.UNEXPECTED
            note = f"offset = output elements ({y.elements})"
            if surcharge:
                note += f"; activation surcharge {surcharge} set aside, executor did {ops.comparisons} comparisons"
        elif isinstance(layer, Pool):
            diff = cost.flops - ops.counted_flops
            cls = Classification.FORMULA_MISMATCH
            note = f"executor: {ops.comparisons} comparisons, {ops.adds} adds"
        else:
            expected = extended_flops(layer, x)
            diff = expected - ops.total
            cls = Classification.EXACT_MATCH if diff == 0 else Classification.UNEXPECTED
            if expected:
                note = "checked against extended-mode charge"
        rows.append(Discrepancy(i, cost.kind, cost.flops, ops, diff, cls, note))
    return DiscrepancyReport(tuple(rows))


__all__ = [
    "DESK_SCALE_LIMIT",
    "Classification",
    "DeskScaleExceeded",
    "Discrepancy",
    "DiscrepancyReport",
    "OpCount",
    "ShapeMismatch",
    "check_desk_scale",
    "compare_counts",
    "execute_counting",
    "init_weights",
]
