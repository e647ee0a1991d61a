"""Static FLOP, parameter, energy and carbon accounting for CNN architectures."""

__version__ = "0.1.0"

from .arch import (  # noqa: E402
    ModelGraph,
    TensorShape,
    KernelGeometry,
    GraphError,
    normalize_graph,
    validate_graph,
)
from .complexity import CountingMode, ModelCost, model_cost  # noqa: E402
from .dsl import ParseError, parse_model, serialize_model  # noqa: E402
from .energy import EnergyParams, TrainingConfig, energy_training  # noqa: E402
from .shapes import infer_shapes  # noqa: E402
from .zoo import get_model, list_models  # noqa: E402


def analyze(g: ModelGraph, mode: CountingMode = CountingMode.PAPER_FIDELITY) -> ModelCost:
    """Normalize, shape-check and cost ``g`` in one go."""
    return model_cost(infer_shapes(normalize_graph(g)), mode)


__all__ = [
    "CountingMode",
    "EnergyParams",
    "GraphError",
    "KernelGeometry",
    "ModelCost",
    "ModelGraph",
    "ParseError",
    "TensorShape",
    "TrainingConfig",
    "analyze",
    "energy_training",
    "get_model",
    "infer_shapes",
    "list_models",
    "model_cost",
    "normalize_graph",
    "parse_model",
    "serialize_model",
    "validate_graph",
]
