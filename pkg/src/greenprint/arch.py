"""Architecture types: shapes, layer specs, model graphs and their validation.

A model is an ordered list of layers starting with an :class:`Input`.  Skip
connections are expressed with :class:`LabelPoint` / :class:`AddFrom` pairs,
and a convolution may read a labelled tensor instead of its predecessor
(``source``), which is how residual projections are written down.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _require_positive(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


def _require_non_negative(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")


def is_identifier(text: str) -> bool:
    return bool(_IDENT.match(text))


@dataclass(frozen=True)
class TensorShape:
    """Feature map of ``rows x cols x channels``; flat vectors are ``1 x 1 x N``."""

    rows: int
    cols: int
    channels: int

    def __post_init__(self) -> None:
        _require_positive("rows", self.rows)
        _require_positive("cols", self.cols)
        _require_positive("channels", self.channels)

    @property
    def elements(self) -> int:
        return self.rows * self.cols * self.channels

    @property
    def is_flat(self) -> bool:
        return self.rows == 1 and self.cols == 1

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}x{self.channels}"


@dataclass(frozen=True)
class KernelGeometry:
    k_rows: int
    k_cols: int
    s_rows: int = 1
    s_cols: int = 1
    p_rows: int = 0
    p_cols: int = 0

    def __post_init__(self) -> None:
        _require_positive("k_rows", self.k_rows)
        _require_positive("k_cols", self.k_cols)
        _require_positive("s_rows", self.s_rows)
        _require_positive("s_cols", self.s_cols)
        _require_non_negative("p_rows", self.p_rows)
        _require_non_negative("p_cols", self.p_cols)

    @property
    def window(self) -> int:
        return self.k_rows * self.k_cols

    @property
    def padded(self) -> bool:
        return self.p_rows != 0 or self.p_cols != 0


class ActivationKind(str, Enum):
    NONE = "none"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind = ActivationKind.NONE
    alpha: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        if self.alpha < 0:
            raise ValueError(f"activation alpha must be non-negative, got {self.alpha}")
        if self.kind is not ActivationKind.LEAKY_RELU and self.alpha != 0:
            raise ValueError("alpha is only meaningful for leaky_relu")

    @property
    def active(self) -> bool:
        return self.kind is not ActivationKind.NONE


NO_ACTIVATION = Activation()
RELU = Activation(ActivationKind.RELU)


def leaky_relu(alpha: float = 1e-3) -> Activation:
    return Activation(ActivationKind.LEAKY_RELU, alpha)


class PoolKind(str, Enum):
    MAX = "max"
    AVG = "avg"


@dataclass(frozen=True)
class Input:
    shape: TensorShape


@dataclass(frozen=True)
class Conv2D:
    filters: int
    geom: KernelGeometry
    activation: Activation = NO_ACTIVATION
    bias: bool = True
    # Read the tensor named by this label instead of the previous layer's output.
    source: Optional[str] = None

    def __post_init__(self) -> None:
        _require_positive("filters", self.filters)


@dataclass(frozen=True)
class Pool:
    kind: PoolKind
    geom: KernelGeometry

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PoolKind(self.kind))


@dataclass(frozen=True)
class Dense:
    units: int
    activation: Activation = NO_ACTIVATION
    bias: bool = True

    def __post_init__(self) -> None:
        _require_positive("units", self.units)


@dataclass(frozen=True)
class BatchNorm:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class ActivationLayer:
    """Stand-alone nonlinearity with no parameters (e.g. the ReLU after a residual add)."""

    activation: Activation


@dataclass(frozen=True)
class LabelPoint:
    label: str


@dataclass(frozen=True)
class AddFrom:
    label: str


@dataclass(frozen=True)
class ResBlock:
    filters: int
    downsample: bool = False

    def __post_init__(self) -> None:
        _require_positive("filters", self.filters)


LayerSpec = Union[
    Input,
    Conv2D,
    Pool,
    Dense,
    BatchNorm,
    Flatten,
    GlobalAvgPool,
    ActivationLayer,
    LabelPoint,
    AddFrom,
    ResBlock,
]

_KIND_NAMES = {
    Input: "input",
    Conv2D: "conv2d",
    Dense: "dense",
    BatchNorm: "batchnorm",
    Flatten: "flatten",
    GlobalAvgPool: "globalavgpool",
    ActivationLayer: "activation",
    LabelPoint: "label",
    AddFrom: "addfrom",
    ResBlock: "resblock",
}


def layer_kind(layer: LayerSpec) -> str:
    if isinstance(layer, Pool):
        return f"{layer.kind.value}pool"
    return _KIND_NAMES[type(layer)]


@dataclass(frozen=True)
class ModelGraph:
    name: str
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))

    def __iter__(self) -> Iterator[LayerSpec]:
        return iter(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def labels(self) -> dict[str, int]:
        """Label name -> index of its :class:`LabelPoint` (first occurrence wins)."""
        table: dict[str, int] = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, LabelPoint):
                table.setdefault(layer.label, i)
        return table

    @property
    def input_shape(self) -> TensorShape:
        first = self.layers[0]
        if not isinstance(first, Input):
            raise MissingInput(0)
        return first.shape

    @property
    def has_macros(self) -> bool:
        return any(isinstance(layer, ResBlock) for layer in self.layers)


class GraphError(ValueError):
    """Structural problem with a model graph, tied to one layer index.

    ``line`` is filled in when the graph came from a source file.
    """

    reason = "invalid graph"

    def __init__(self, index: int, detail: str = "", line: Optional[int] = None):
        self.index = index
        self.detail = detail
        self.line = line
        super().__init__(self._message())

    def _message(self) -> str:
        msg = f"layer {self.index}: {self.reason}"
        if self.detail:
            msg += f" ({self.detail})"
        if self.line is not None:
            msg = f"line {self.line}: {msg}"
        return msg

    def at_line(self, line: int) -> "GraphError":
        self.line = line
        self.args = (self._message(),)
        return self


class MissingInput(GraphError):
    reason = "graph must start with an input layer"


class MisplacedInput(GraphError):
    reason = "input layer may only appear at position 0"


class DuplicateLabel(GraphError):
    reason = "duplicate label"


class DanglingSkipReference(GraphError):
    reason = "reference to a label that is not defined earlier"


class PoolWithPadding(GraphError):
    reason = "pooling layers take no padding"


class UnexpandedMacro(GraphError):
    reason = "resblock macro must be expanded before analysis"


def validate_graph(g: ModelGraph) -> ModelGraph:
    """Check the structural invariants of ``g`` and return it unchanged.

    Raises the first :class:`GraphError` found, scanning layers in order.
    """
    if not g.layers or not isinstance(g.layers[0], Input):
        raise MissingInput(0)
    seen: set[str] = set()
    for i, layer in enumerate(g.layers):
        if i > 0 and isinstance(layer, Input):
            raise MisplacedInput(i)
        if isinstance(layer, LabelPoint):
            if not is_identifier(layer.label):
                raise GraphError(i, f"bad label name {layer.label!r}")
            if layer.label in seen:
                raise DuplicateLabel(i, layer.label)
            seen.add(layer.label)
        elif isinstance(layer, AddFrom):
            if layer.label not in seen:
                raise DanglingSkipReference(i, layer.label)
        elif isinstance(layer, Conv2D) and layer.source is not None:
            if layer.source not in seen:
                raise DanglingSkipReference(i, layer.source)
        elif isinstance(layer, Pool) and layer.geom.padded:
            raise PoolWithPadding(i)
    return g


def _fresh_label(base: str, taken: set[str]) -> str:
    label = base
    n = 1
    while label in taken:
        label = f"{base}_{n}"
        n += 1
    taken.add(label)
    return label


def expand_resblock(block: ResBlock, entry: str, shortcut: str) -> list[LayerSpec]:
    """Concrete layers for one basic block.

    ``entry`` names the block input; ``shortcut`` names the tensor the final
    add reads (the input itself, or its 1x1 projection when downsampling).
    """
    f = block.filters
    stride = 2 if block.downsample else 1
    layers: list[LayerSpec] = [LabelPoint(entry)]
    if block.downsample:
        layers += [
            Conv2D(f, KernelGeometry(1, 1, 2, 2, 0, 0)),
            BatchNorm(),
            LabelPoint(shortcut),
        ]
    layers += [
        Conv2D(
            f,
            KernelGeometry(3, 3, stride, stride, 1, 1),
            RELU,
            source=entry if block.downsample else None,
        ),
        BatchNorm(),
        Conv2D(f, KernelGeometry(3, 3, 1, 1, 1, 1)),
        BatchNorm(),
        AddFrom(shortcut if block.downsample else entry),
        ActivationLayer(RELU),
    ]
    return layers


def normalize_graph(g: ModelGraph) -> ModelGraph:
    """Replace every :class:`ResBlock` with its basic-block expansion.

    Graphs without macros are returned as-is, which makes the operation
    idempotent.
    """
    validate_graph(g)
    if not g.has_macros:
        return g
    taken = set(g.labels)
    out: list[LayerSpec] = []
    n = 0
    for layer in g.layers:
        if isinstance(layer, ResBlock):
            entry = _fresh_label(f"rb{n}", taken)
            shortcut = _fresh_label(f"rb{n}_proj", taken) if layer.downsample else entry
            out.extend(expand_resblock(layer, entry, shortcut))
            n += 1
        else:
            out.append(layer)
    return validate_graph(ModelGraph(g.name, tuple(out)))
