"""Report assembly and rendering (JSON with sorted keys, CSV)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict
from typing import Any, Optional, Sequence

from . import __version__
from .complexity import ModelCost
from .energy import EnergyParams, EnergyReport, ProjectionPoint, TrainingConfig
from .executor import DiscrepancyReport


def sig3(x: float) -> str:
    """``x`` rounded to 3 significant figures, without trailing zeros."""
    if x == 0:
        return "0"
    return f"{float(f'{x:.3g}'):g}"


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def cost_table(cost: ModelCost) -> list[dict[str, Any]]:
    return [
        {
            "index": r.layer_index,
            "kind": r.kind,
            "input_shape": str(r.input_shape),
            "output_shape": str(r.output_shape),
            "params": r.params,
            "flops": r.flops,
            "derivation": r.derivation,
        }
        for r in cost.per_layer
    ]


def parameters_echo(params: EnergyParams, cfg: Optional[TrainingConfig] = None) -> dict[str, Any]:
    echo: dict[str, Any] = {
        "gpu_efficiency_flops_per_joule": params.gpu_efficiency,
        "carbon_intensity_g_per_kwh": params.carbon_intensity,
    }
    if cfg is not None:
        echo.update(training_samples=cfg.training_samples, epochs=cfg.epochs, batch_size=cfg.batch_size)
    return echo


def energy_section(report: EnergyReport, params: EnergyParams, cfg: TrainingConfig, flops: int) -> dict[str, Any]:
    raw = asdict(report)
    return {
        "forward_flops": flops,
        "parameters": parameters_echo(params, cfg),
        "joules": {k: v for k, v in raw.items() if k.startswith("e_")},
        "carbon_training_g": report.carbon_training,
        "display": {
            "e_forward_kj": sig3(report.e_forward / 1e3),
            "e_backward_kj": sig3(report.e_backward / 1e3),
            "e_training_kj": sig3(report.e_training / 1e3),
            "carbon_training_g": sig3(report.carbon_training),
        },
    }


def projection_section(points: Sequence[ProjectionPoint], params: EnergyParams, flops: int) -> dict[str, Any]:
    final = points[-1]
    return {
        "forward_flops": flops,
        "parameters": parameters_echo(params),
        "curve": [asdict(p) for p in points],
        "annual_predictions": final.n_predictions,
        "annual_joules": final.joules,
        "annual_grams": final.grams,
    }


def analysis_report(
    name: str,
    cost: ModelCost,
    source_digest: str,
    energy: Optional[dict[str, Any]] = None,
    projection: Optional[dict[str, Any]] = None,
) -> dict[str, Any]:
    report: dict[str, Any] = {
        "tool": "greenprint",
        "version": __version__,
        "model": name,
        "input_digest": source_digest,
        "mode": cost.mode.value,
        "relu_cost": cost.relu_cost.value,
        "layers": cost_table(cost),
        "totals": {"flops": cost.total_flops, "params": cost.total_params},
    }
    if energy is not None:
        report["energy"] = energy
    if projection is not None:
        report["projection"] = projection
    return report


def discrepancy_rows(report: DiscrepancyReport) -> list[dict[str, Any]]:
    return [
        {
            "index": r.layer_index,
            "kind": r.kind,
            "analytic_flops": r.analytic,
            "muls": r.counted.muls,
            "adds": r.counted.adds,
            "comparisons": r.counted.comparisons,
            "difference": r.difference,
            "classification": r.classification.value,
            "note": r.note,
        }
        for r in report.rows
    ]


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
