"""Shape propagation through normalized model graphs."""

from __future__ import annotations

from dataclasses import dataclass

from .arch import (
    ActivationLayer,
    AddFrom,
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    GraphError,
    Input,
    KernelGeometry,
    LabelPoint,
    LayerSpec,
    ModelGraph,
    Pool,
    PoolWithPadding,
    ResBlock,
    TensorShape,
    UnexpandedMacro,
    validate_graph,
)


class DegenerateDim(GraphError):
    reason = "kernel larger than padded input"


class DenseOnUnflattenedInput(GraphError):
    reason = "dense layer needs a flattened (1x1xN) input"


class SkipShapeMismatch(GraphError):
    reason = "skip connection joins tensors of different shapes"


def conv_output_dim(i: int, k: int, p: int, s: int) -> int:
    """Number of window positions along one axis: ``floor((i - k + 2p) / s) + 1``.

    Incomplete trailing windows are discarded.
    """
    if i + 2 * p < k:
        raise DegenerateDim(-1, f"input {i} + 2*pad {p} < kernel {k}")
    return (i - k + 2 * p) // s + 1


def window_output_shape(in_shape: TensorShape, geom: KernelGeometry, channels: int) -> TensorShape:
    return TensorShape(
        conv_output_dim(in_shape.rows, geom.k_rows, geom.p_rows, geom.s_rows),
        conv_output_dim(in_shape.cols, geom.k_cols, geom.p_cols, geom.s_cols),
        channels,
    )


@dataclass(frozen=True)
class ShapedGraph:
    graph: ModelGraph
    shapes: tuple[tuple[TensorShape, TensorShape], ...]

    def input_of(self, index: int) -> TensorShape:
        return self.shapes[index][0]

    def output_of(self, index: int) -> TensorShape:
        return self.shapes[index][1]

    @property
    def output_shape(self) -> TensorShape:
        return self.shapes[-1][1]


def _layer_output(index: int, layer: LayerSpec, x: TensorShape) -> TensorShape:
    if isinstance(layer, Conv2D):
        return window_output_shape(x, layer.geom, layer.filters)
    if isinstance(layer, Pool):
        if layer.geom.padded:
            raise PoolWithPadding(index)
        return window_output_shape(x, layer.geom, x.channels)
    if isinstance(layer, Dense):
        if not x.is_flat:
            raise DenseOnUnflattenedInput(index, f"got {x}")
        return TensorShape(1, 1, layer.units)
    if isinstance(layer, Flatten):
        return TensorShape(1, 1, x.elements)
    if isinstance(layer, GlobalAvgPool):
        return TensorShape(1, 1, x.channels)
    if isinstance(layer, (BatchNorm, ActivationLayer, LabelPoint, AddFrom)):
        return x
    if isinstance(layer, ResBlock):
        raise UnexpandedMacro(index)
    raise GraphError(index, f"unsupported layer {layer!r}")


def infer_shapes(g: ModelGraph) -> ShapedGraph:
    """Per-layer ``(input, output)`` shapes for a normalized graph.

    Errors carry the index of the offending layer.
    """
    validate_graph(g)
    x = g.input_shape
    labelled: dict[str, TensorShape] = {}
    shapes: list[tuple[TensorShape, TensorShape]] = []
    for i, layer in enumerate(g.layers):
        if isinstance(layer, Input):
            shapes.append((x, x))
            continue
        if isinstance(layer, Conv2D) and layer.source is not None:
            x = labelled[layer.source]
        try:
            y = _layer_output(i, layer, x)
        except GraphError as exc:
            if exc.index == -1:
                raise type(exc)(i, exc.detail) from None
            raise
        if isinstance(layer, LabelPoint):
            labelled[layer.label] = x
        elif isinstance(layer, AddFrom) and labelled[layer.label] != x:
            raise SkipShapeMismatch(i, f"{layer.label} is {labelled[layer.label]}, current is {x}")
        shapes.append((x, y))
        x = y
    return ShapedGraph(g, tuple(shapes))

