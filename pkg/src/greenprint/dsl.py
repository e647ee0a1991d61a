"""Reader and writer for ``.nnm`` model description files.

Example::

    model "tiny"
    input 16 924 2            # rows cols channels
    conv2d filters=32 kernel=1x7 stride=1x3 activation=relu
    batchnorm
    maxpool kernel=1x4
    resblock filters=64 downsample=true
    globalavgpool
    flatten
    dense units=3

``serialize_model`` emits the canonical form: lowercase keywords, single
spaces, fields in a fixed order, default-valued optional fields omitted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .arch import (
    NO_ACTIVATION,
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
    KernelGeometry,
    LabelPoint,
    LayerSpec,
    ModelGraph,
    Pool,
    PoolKind,
    ResBlock,
    TensorShape,
    is_identifier,
    validate_graph,
)

DEFAULT_LEAKY_ALPHA = 1e-3

_INT = re.compile(r"^[0-9]+$")
_REAL = re.compile(r"^[0-9]+(\.[0-9]*)?([eE][+-]?[0-9]+)?$|^\.[0-9]+([eE][+-]?[0-9]+)?$")
_PAIR = re.compile(r"^([0-9]+)[xX]([0-9]+)$")
_HEADER = re.compile(r'^model\s+"([^"]*)"\s*$')


class ErrorKind(str, Enum):
    UNKNOWN_KEYWORD = "UnknownKeyword"
    BAD_DIMENSION_PAIR = "BadDimensionPair"
    MISSING_FIELD = "MissingField"
    DUPLICATE_FIELD = "DuplicateField"
    BAD_INTEGER = "BadInteger"
    BAD_REAL = "BadReal"


class ParseError(ValueError):
    def __init__(self, line: int, column: int, kind: ErrorKind, message: str):
        self.line = line
        self.column = column
        self.kind = ErrorKind(kind)
        self.message = message
        super().__init__(f"line {line}, column {column}: {message} [{self.kind.value}]")


@dataclass
class _Token:
    text: str
    column: int


def _tokenize(line: str) -> list[_Token]:
    return [_Token(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


class _Fields:
    """``key=value`` pairs of one layer line, consumed by the layer builders."""

    def __init__(self, lineno: int, keyword: _Token, tokens: list[_Token]):
        self.lineno = lineno
        self.keyword = keyword
        self.values: dict[str, _Token] = {}
        self.key_cols: dict[str, int] = {}
        for tok in tokens:
            key, sep, value = tok.text.partition("=")
            if not sep or not key:
                self.error(tok.column, ErrorKind.UNKNOWN_KEYWORD, f"expected key=value, got {tok.text!r}")
            if key in self.values:
                self.error(tok.column, ErrorKind.DUPLICATE_FIELD, f"field {key!r} given twice")
            self.values[key] = _Token(value, tok.column + len(key) + 1)
            self.key_cols[key] = tok.column

    def error(self, column: int, kind: ErrorKind, message: str) -> None:
        raise ParseError(self.lineno, column, kind, message)

    def check_keys(self, allowed: set[str]) -> None:
        for key, col in self.key_cols.items():
            if key not in allowed:
                self.error(col, ErrorKind.UNKNOWN_KEYWORD, f"unknown field {key!r} for {self.keyword.text}")

    def _get(self, key: str, required: bool) -> Optional[_Token]:
        tok = self.values.get(key)
        if tok is None and required:
            self.error(self.keyword.column, ErrorKind.MISSING_FIELD, f"{self.keyword.text} needs {key}=")
        return tok

    def integer(self, key: str, default: Optional[int] = None, minimum: int = 1) -> int:
        tok = self._get(key, default is None)
        if tok is None:
            return default  # type: ignore[return-value]
        return _parse_int(tok, self.lineno, minimum, key)

    def pair(self, key: str, default: Optional[tuple[int, int]] = None, minimum: int = 1) -> tuple[int, int]:
        tok = self._get(key, default is None)
        if tok is None:
            return default  # type: ignore[return-value]
        m = _PAIR.match(tok.text)
        if not m:
            self.error(tok.column, ErrorKind.BAD_DIMENSION_PAIR, f"{key} must look like RxC, got {tok.text!r}")
        a, b = int(m.group(1)), int(m.group(2))
        if a < minimum or b < minimum:
            self.error(tok.column, ErrorKind.BAD_DIMENSION_PAIR, f"{key} entries must be >= {minimum}")
        return a, b

    def real(self, key: str, default: float) -> float:
        tok = self._get(key, False)
        if tok is None:
            return default
        if not _REAL.match(tok.text):
            self.error(tok.column, ErrorKind.BAD_REAL, f"{key} must be a non-negative real, got {tok.text!r}")
        return float(tok.text)

    def boolean(self, key: str, default: bool) -> bool:
        tok = self._get(key, False)
        if tok is None:
            return default
        if tok.text not in ("true", "false"):
            self.error(tok.column, ErrorKind.UNKNOWN_KEYWORD, f"{key} must be true or false, got {tok.text!r}")
        return tok.text == "true"

    def ident(self, key: str) -> Optional[str]:
        tok = self._get(key, False)
        if tok is None:
            return None
        if not is_identifier(tok.text):
            self.error(tok.column, ErrorKind.UNKNOWN_KEYWORD, f"bad identifier {tok.text!r}")
        return tok.text

    def activation(self, key: str = "activation") -> Activation:
        tok = self._get(key, False)
        kind_text = "none" if tok is None else tok.text
        try:
            kind = ActivationKind(kind_text)
        except ValueError:
            self.error(tok.column, ErrorKind.UNKNOWN_KEYWORD, f"unknown activation {kind_text!r}")
        if kind is ActivationKind.LEAKY_RELU:
            return Activation(kind, self.real("alpha", DEFAULT_LEAKY_ALPHA))
        if "alpha" in self.values:
            self.error(self.key_cols["alpha"], ErrorKind.UNKNOWN_KEYWORD, "alpha is only valid with leaky_relu")
        return Activation(kind)


def _parse_int(tok: _Token, lineno: int, minimum: int, what: str) -> int:
    if not _INT.match(tok.text):
        raise ParseError(lineno, tok.column, ErrorKind.BAD_INTEGER, f"{what} must be an integer, got {tok.text!r}")
    value = int(tok.text)
    if value < minimum:
        raise ParseError(lineno, tok.column, ErrorKind.BAD_INTEGER, f"{what} must be >= {minimum}, got {value}")
    return value


def _conv(f: _Fields) -> Conv2D:
    f.check_keys({"filters", "kernel", "stride", "pad", "activation", "alpha", "bias", "from"})
    filters = f.integer("filters")
    k = f.pair("kernel")
    s = f.pair("stride", (1, 1))
    p = f.pair("pad", (0, 0), minimum=0)
    return Conv2D(
        filters,
        KernelGeometry(k[0], k[1], s[0], s[1], p[0], p[1]),
        f.activation(),
        f.boolean("bias", True),
        f.ident("from"),
    )


def _pool(kind: PoolKind) -> Callable[[_Fields], Pool]:
    def build(f: _Fields) -> Pool:
        f.check_keys({"kernel", "stride"})
        k = f.pair("kernel")
        s = f.pair("stride", k)
        return Pool(kind, KernelGeometry(k[0], k[1], s[0], s[1]))

    return build


def _dense(f: _Fields) -> Dense:
    f.check_keys({"units", "activation", "alpha", "bias"})
    return Dense(f.integer("units"), f.activation(), f.boolean("bias", True))


def _bare(cls: type) -> Callable[[_Fields], LayerSpec]:
    def build(f: _Fields) -> LayerSpec:
        f.check_keys(set())
        return cls()

    return build


def _activation_layer(f: _Fields) -> ActivationLayer:
    f.check_keys({"kind", "alpha"})
    if "kind" not in f.values:
        f.error(f.keyword.column, ErrorKind.MISSING_FIELD, "activation needs kind=")
    act = f.activation("kind")
    if not act.active:
        f.error(f.values["kind"].column, ErrorKind.UNKNOWN_KEYWORD, "activation layer needs a nonlinearity")
    return ActivationLayer(act)


def _resblock(f: _Fields) -> ResBlock:
    f.check_keys({"filters", "downsample"})
    return ResBlock(f.integer("filters"), f.boolean("downsample", False))


_KEYED_BUILDERS: dict[str, Callable[[_Fields], LayerSpec]] = {
    "conv2d": _conv,
    "maxpool": _pool(PoolKind.MAX),
    "avgpool": _pool(PoolKind.AVG),
    "dense": _dense,
    "batchnorm": _bare(BatchNorm),
    "flatten": _bare(Flatten),
    "globalavgpool": _bare(GlobalAvgPool),
    "activation": _activation_layer,
    "resblock": _resblock,
}


def _parse_layer(lineno: int, tokens: list[_Token]) -> LayerSpec:
    keyword, rest = tokens[0], tokens[1:]
    word = keyword.text
    if word == "input":
        if len(rest) != 3:
            col = rest[3].column if len(rest) > 3 else keyword.column
            kind = ErrorKind.UNKNOWN_KEYWORD if len(rest) > 3 else ErrorKind.MISSING_FIELD
            raise ParseError(lineno, col, kind, "input takes exactly three integers: rows cols channels")
        dims = [_parse_int(t, lineno, 1, "input dimension") for t in rest]
        return Input(TensorShape(*dims))
    if word in ("label", "addfrom"):
        if len(rest) != 1:
            col = rest[1].column if len(rest) > 1 else keyword.column
            kind = ErrorKind.UNKNOWN_KEYWORD if rest else ErrorKind.MISSING_FIELD
            raise ParseError(lineno, col, kind, f"{word} takes exactly one identifier")
        if not is_identifier(rest[0].text):
            raise ParseError(lineno, rest[0].column, ErrorKind.UNKNOWN_KEYWORD, f"bad identifier {rest[0].text!r}")
        return LabelPoint(rest[0].text) if word == "label" else AddFrom(rest[0].text)
    builder = _KEYED_BUILDERS.get(word)
    if builder is None:
        raise ParseError(lineno, keyword.column, ErrorKind.UNKNOWN_KEYWORD, f"unknown keyword {word!r}")
    return builder(_Fields(lineno, keyword, rest))


def parse_model(text: str) -> ModelGraph:
    """Parse ``.nnm`` source into a validated :class:`ModelGraph`.

    Raises :class:`ParseError` for syntax problems and :class:`GraphError`
    (with ``line`` set) for structural ones.
    """
    name: Optional[str] = None
    layers: list[LayerSpec] = []
    line_of: list[int] = []
    last_line = 1
    for lineno, raw in enumerate(text.split("\n"), start=1):
        last_line = lineno
        line = _strip_comment(raw.rstrip("\r"))
        if not line.strip():
            continue
        if name is None:
            m = _HEADER.match(line.strip())
            if m is None:
                tokens = _tokenize(line)
                if tokens[0].text == "model":
                    raise ParseError(lineno, tokens[0].column, ErrorKind.MISSING_FIELD,
                                     'model header needs a quoted name: model "<name>"')
                # Headerless input is accepted; the model is then unnamed.
                name = ""
            else:
                name = m.group(1)
                continue
        tokens = _tokenize(line)
        if tokens[0].text == "model":
            raise ParseError(lineno, tokens[0].column, ErrorKind.DUPLICATE_FIELD, "second model header")
        layers.append(_parse_layer(lineno, tokens))
        line_of.append(lineno)
    graph = ModelGraph(name or "", tuple(layers))
    try:
        validate_graph(graph)
    except GraphError as exc:
        line = line_of[exc.index] if exc.index < len(line_of) else last_line
        raise exc.at_line(line) from None
    return graph


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_activation(act: Activation, key: str = "activation") -> list[str]:
    if not act.active:
        return []
    parts = [f"{key}={act.kind.value}"]
    if act.kind is ActivationKind.LEAKY_RELU:
        parts.append(f"alpha={_fmt_real(act.alpha)}")
    return parts


def serialize_layer(layer: LayerSpec) -> str:
    if isinstance(layer, Input):
        s = layer.shape
        return f"input {s.rows} {s.cols} {s.channels}"
    if isinstance(layer, Conv2D):
        g = layer.geom
        parts = ["conv2d", f"filters={layer.filters}", f"kernel={g.k_rows}x{g.k_cols}"]
        if (g.s_rows, g.s_cols) != (1, 1):
            parts.append(f"stride={g.s_rows}x{g.s_cols}")
        if g.padded:
            parts.append(f"pad={g.p_rows}x{g.p_cols}")
        parts += _fmt_activation(layer.activation)
        if not layer.bias:
            parts.append("bias=false")
        if layer.source is not None:
            parts.append(f"from={layer.source}")
        return " ".join(parts)
    if isinstance(layer, Pool):
        g = layer.geom
        parts = [f"{layer.kind.value}pool", f"kernel={g.k_rows}x{g.k_cols}"]
        if (g.s_rows, g.s_cols) != (g.k_rows, g.k_cols):
            parts.append(f"stride={g.s_rows}x{g.s_cols}")
        return " ".join(parts)
    if isinstance(layer, Dense):
        parts = ["dense", f"units={layer.units}"] + _fmt_activation(layer.activation)
        if not layer.bias:
            parts.append("bias=false")
        return " ".join(parts)
    if isinstance(layer, BatchNorm):
        return "batchnorm"
    if isinstance(layer, Flatten):
        return "flatten"
    if isinstance(layer, GlobalAvgPool):
        return "globalavgpool"
    if isinstance(layer, ActivationLayer):
        return " ".join(["activation"] + _fmt_activation(layer.activation, "kind"))
    if isinstance(layer, LabelPoint):
        return f"label {layer.label}"
    if isinstance(layer, AddFrom):
        return f"addfrom {layer.label}"
    if isinstance(layer, ResBlock):
        return f"resblock filters={layer.filters}" + (" downsample=true" if layer.downsample else "")
    raise TypeError(f"not a layer: {layer!r}")


def serialize_model(g: ModelGraph) -> str:
    """Canonical text for ``g``; macros are kept, no trailing newline."""
    if '"' in g.name or "\n" in g.name or "#" in g.name:
        raise ValueError(f"model name cannot be written: {g.name!r}")
    lines = [f'model "{g.name}"'] + [serialize_layer(layer) for layer in g.layers]
    return "\n".join(lines)
