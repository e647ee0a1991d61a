"""Built-in architectures and published reference figures.

Only PirnatEco has a full graph.  The other entries carry the weight counts,
forward FLOPs, training energy/carbon and per-split epoch counts published
for them, so their energy figures can be recomputed from the FLOPs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Union

from .arch import (
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
    RELU,
    ResBlock,
    TensorShape,
    leaky_relu,
)
from .energy import BATCH_SIZE, TRAINING_SAMPLES, TrainingConfig


class UnknownModel(KeyError):
    def __str__(self) -> str:
        return f"unknown model {self.args[0]!r}; try one of {', '.join(sorted(_ZOO))}"


class Category(str, Enum):
    RANDOM = "random"
    NARROW = "narrow"
    WIDE = "wide"
    WITHIN = "within"
    MEAN = "mean"


SPLITS = (Category.RANDOM, Category.NARROW, Category.WIDE, Category.WITHIN)


@dataclass(frozen=True)
class ZooEntry:
    name: str
    graph: Optional[ModelGraph] = None
    published_weights: Optional[int] = None
    published_flops: Optional[int] = None
    published_energy_kj: Optional[float] = None
    published_carbon_g: Optional[float] = None
    epochs_by_category: dict[Category, int] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self) -> None:
        meta = (self.published_weights, self.published_flops, self.published_energy_kj, self.published_carbon_g)
        if self.graph is None and all(v is None for v in meta):
            raise ValueError(f"zoo entry {self.name!r} has neither a graph nor published figures")
        if self.epochs_by_category and set(self.epochs_by_category) != set(SPLITS):
            raise ValueError(f"zoo entry {self.name!r} needs epochs for all four splits")

    @property
    def has_graph(self) -> bool:
        return self.graph is not None

    @property
    def mean_epochs(self) -> Optional[float]:
        if not self.epochs_by_category:
            return None
        return sum(self.epochs_by_category[c] for c in SPLITS) / len(SPLITS)


def pirnateco_graph() -> ModelGraph:
    """ResNet18-style localisation network over a 16 antenna x 924 subcarrier CSI tensor.

    Kernels and the pool run along the subcarrier axis only; block widths
    double from 32 to 256.
    """
    layers = [
        Input(TensorShape(16, 924, 2)),
        Conv2D(32, KernelGeometry(1, 7, 1, 3, 0, 0), RELU),
        BatchNorm(),
        Pool(PoolKind.MAX, KernelGeometry(1, 4, 1, 4)),
        ResBlock(32),
        ResBlock(32),
        ResBlock(64, downsample=True),
        ResBlock(64),
        ResBlock(128, downsample=True),
        ResBlock(128),
        ResBlock(256, downsample=True),
        ResBlock(256),
        GlobalAvgPool(),
        Flatten(),
        Dense(1000, leaky_relu(1e-3)),
        Dense(3),
    ]
    return ModelGraph("pirnateco", tuple(layers))


def _epochs(random: int, narrow: int, wide: int, within: int) -> dict[Category, int]:
    return dict(zip(SPLITS, (random, narrow, wide, within)))


_ENTRIES = [
    ZooEntry(
        "pirnateco",
        graph=pirnateco_graph(),
        published_weights=3_100_000,
        published_flops=345_000_000,
        published_energy_kj=152.0,
        published_carbon_g=10.6,
        epochs_by_category=_epochs(85, 15, 15, 20),
        description="PirnatEco CNN (adapted ResNet18)",
    ),
    ZooEntry("arnold-fcnn", published_weights=32_300_000, description="Arnold et al., FCNN"),
    ZooEntry("arnold-cnn", published_weights=7_600_000, description="Arnold et al., CNN"),
    ZooEntry("debast-cnn", published_weights=400_000, description="De Bast et al., CNN"),
    ZooEntry("chin-fcnn", published_weights=123_600_000, description="Chin et al., FCNN"),
    ZooEntry(
        "chin-cnn",
        published_weights=13_700_000,
        published_flops=535_000_000,
        published_energy_kj=264.0,
        published_carbon_g=18.3,
        epochs_by_category=_epochs(67, 30, 23, 31),
        description="Chin et al., CNN",
    ),
    ZooEntry("cerar-cnn4", published_weights=5_300_000, description="Cerar et al., CNN4"),
    ZooEntry(
        "cerar-cnn4r",
        published_weights=10_800_000,
        published_flops=2_479_000_000,
        published_energy_kj=2547.0,
        published_carbon_g=176.9,
        epochs_by_category=_epochs(181, 32, 34, 68),
        description="Cerar et al., CNN4R",
    ),
    ZooEntry("cerar-cnn4s", published_weights=16_300_000, description="Cerar et al., CNN4S"),
]

_ZOO = {e.name: e for e in _ENTRIES}


def get_model(name: str) -> ZooEntry:
    try:
        return _ZOO[name.lower()]
    except KeyError:
        raise UnknownModel(name) from None


def list_models() -> list[tuple[str, bool]]:
    """Sorted ``(name, has_graph)`` pairs."""
    return [(name, _ZOO[name].has_graph) for name in sorted(_ZOO)]


def default_training_config(category: Union[Category, str], model: str = "pirnateco") -> TrainingConfig:
    category = Category(category)
    entry = get_model(model)
    if not entry.epochs_by_category:
        raise ValueError(f"no published epoch counts for {entry.name}")
    epochs: Union[int, float]
    if category is Category.MEAN:
        epochs = entry.mean_epochs  # type: ignore[assignment]
    else:
        epochs = entry.epochs_by_category[category]
    return TrainingConfig(training_samples=TRAINING_SAMPLES, epochs=epochs, batch_size=BATCH_SIZE)


def shipped_model_text(name: str) -> str:
    """Contents of the ``.nnm`` file shipped for a zoo graph."""
    get_model(name)
    return resources.files("greenprint").joinpath("examples", f"{name}.nnm").read_text(encoding="utf-8")
