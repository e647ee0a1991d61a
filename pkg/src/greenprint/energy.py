"""Training/prediction energy and CO2-equivalent emissions from forward-pass FLOPs.

Training energy is three forward passes' worth per sample and epoch: the
backward pass is taken as twice the forward cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

JOULES_PER_KWH = 3.6e6
HOURS_PER_YEAR = 8760

# Effective FLOPs per joule that reproduces the published training energies.
DEFAULT_GPU_EFFICIENCY = 3.613e9
# g CO2eq per kWh, US west coast grid.
DEFAULT_CARBON_INTENSITY = 250.0
TRAINING_SAMPLES = 15723
BATCH_SIZE = 32


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyParams:
    gpu_efficiency: float = DEFAULT_GPU_EFFICIENCY
    carbon_intensity: float = DEFAULT_CARBON_INTENSITY

    def __post_init__(self) -> None:
        if not self.gpu_efficiency > 0 or not math.isfinite(self.gpu_efficiency):
            raise ParameterError(f"gpu_efficiency must be positive, got {self.gpu_efficiency}")
        if not self.carbon_intensity > 0 or not math.isfinite(self.carbon_intensity):
            raise ParameterError(f"carbon_intensity must be positive, got {self.carbon_intensity}")


@dataclass(frozen=True)
class TrainingConfig:
    training_samples: int = TRAINING_SAMPLES
    epochs: Union[int, float] = 1
    batch_size: int = BATCH_SIZE

    def __post_init__(self) -> None:
        if self.training_samples < 1:
            raise ParameterError(f"training_samples must be >= 1, got {self.training_samples}")
        if not self.epochs > 0 or not math.isfinite(self.epochs):
            raise ParameterError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EnergyReport:
    e_forward: float
    e_backward: float
    e_training: float
    carbon_training: float


def energy_forward(m_flops: int, cfg: TrainingConfig, params: EnergyParams) -> float:
    """Joules for the forward passes of a whole training run."""
    if m_flops < 0:
        raise ParameterError("m_flops must be non-negative")
    return m_flops * cfg.training_samples * cfg.epochs / params.gpu_efficiency


def carbon_from_energy(e: float, intensity: float) -> float:
    """Grams CO2eq for ``e`` joules at ``intensity`` g/kWh."""
    if e < 0:
        raise ParameterError("energy must be non-negative")
    return e / JOULES_PER_KWH * intensity


def energy_training(m_flops: int, cfg: TrainingConfig, params: EnergyParams) -> EnergyReport:
    e_fp = energy_forward(m_flops, cfg, params)
    e_train = 3 * e_fp
    return EnergyReport(
        e_forward=e_fp,
        e_backward=2 * e_fp,
        e_training=e_train,
        carbon_training=carbon_from_energy(e_train, params.carbon_intensity),
    )


def energy_prediction(m_flops: int, n_predictions: int, params: EnergyParams) -> float:
    if m_flops < 0 or n_predictions < 0:
        raise ParameterError("m_flops and n_predictions must be non-negative")
    return m_flops * n_predictions / params.gpu_efficiency


def backsolve_gpu_efficiency(m_flops: int, cfg: TrainingConfig, e_training_target: float) -> float:
    """FLOPs per joule at which ``energy_training`` yields ``e_training_target``."""
    if m_flops <= 0 or not e_training_target > 0:
        raise ParameterError("m_flops and target energy must be positive")
    return 3 * m_flops * cfg.training_samples * cfg.epochs / e_training_target


def annual_predictions(users: float, per_user_per_hour: float = 1.0) -> int:
    if users < 0 or per_user_per_hour < 0:
        raise ParameterError("users and rate must be non-negative")
    return round(users * per_user_per_hour * HOURS_PER_YEAR)


@dataclass(frozen=True)
class ProjectionPoint:
    n_predictions: int
    joules: float
    grams: float


def prediction_grid(total: int) -> list[int]:
    """Powers of ten up to ``total``, always ending at ``total``."""
    if total < 1:
        raise ParameterError("predictions_per_year must be >= 1")
    grid = []
    n = 1
    while n < total:
        grid.append(n)
        n *= 10
    grid.append(total)
    return grid


def project_carbon(m_flops: int, predictions_per_year: int, params: EnergyParams) -> list[ProjectionPoint]:
    """Emissions against number of predictions; the last point is the annual total."""
    points = []
    for n in prediction_grid(predictions_per_year):
        joules = energy_prediction(m_flops, n, params)
        points.append(ProjectionPoint(n, joules, carbon_from_energy(joules, params.carbon_intensity)))
    return points
