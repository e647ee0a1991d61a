"""Command-line entry point.

Exit codes: 0 ok, 1 unreadable/unparsable model or input file, 2 shape
error, 3 bad parameter, 4 model too large for the reference executor,
5 ``validate`` found a layer whose counts do not fit the expected pattern.
"""

from __future__ import annotations

import argparse
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .arch import GraphError, ModelGraph, normalize_graph
from .complexity import CountingMode, ModelCost, ReluCost, model_cost
from .dsl import ParseError, parse_model, serialize_model
from .energy import (
    DEFAULT_CARBON_INTENSITY,
    DEFAULT_GPU_EFFICIENCY,
    TRAINING_SAMPLES,
    EnergyParams,
    ParameterError,
    TrainingConfig,
    annual_predictions,
    backsolve_gpu_efficiency,
    energy_training,
    project_carbon,
)
from .executor import DeskScaleExceeded, check_desk_scale, compare_counts, execute_counting, init_weights
from .metrics import MalformedRow, evaluate_predictions
from .report import (
    analysis_report,
    digest,
    discrepancy_rows,
    energy_section,
    projection_section,
    sig3,
    to_csv,
    to_json,
)
from .shapes import ShapedGraph, infer_shapes
from .zoo import Category, UnknownModel, default_training_config, get_model, list_models

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_SHAPE = 2
EXIT_PARAM = 3
EXIT_DESK_SCALE = 4
EXIT_MISMATCH = 5

CONFIG_NAME = "greenprint.conf"
CONFIG_KEYS = {"gpu_efficiency": float, "carbon_intensity": float}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise CliError(EXIT_PARAM, message)


def load_config(path: Optional[Path]) -> dict[str, float]:
    """``key=value`` defaults file; a missing implicit file is not an error."""
    if path is None:
        path = Path(CONFIG_NAME)
        if not path.is_file():
            return {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_PARAM, f"cannot read config {path}: {exc}") from None
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or key not in CONFIG_KEYS:
            raise CliError(EXIT_PARAM, f"{path}:{lineno}: expected one of {sorted(CONFIG_KEYS)} as key=value")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise CliError(EXIT_PARAM, f"{path}:{lineno}: bad number {value!r}") from None
    return values


def _energy_params(args: argparse.Namespace) -> EnergyParams:
    conf = load_config(args.config)
    gpu = args.gpu_eff if args.gpu_eff is not None else conf.get("gpu_efficiency", DEFAULT_GPU_EFFICIENCY)
    ci = args.carbon_intensity if args.carbon_intensity is not None else conf.get("carbon_intensity", DEFAULT_CARBON_INTENSITY)
    return EnergyParams(gpu_efficiency=gpu, carbon_intensity=ci)


def _int_arg(text: str) -> int:
    """Non-negative integer that may be written in scientific notation (``345e6``)."""
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_finite() or value != value.to_integral_value() or value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return int(value)


def load_model(ref: str) -> tuple[ModelGraph, str]:
    """Graph and input digest for ``zoo:<name>`` or a ``.nnm`` path."""
    if ref.startswith("zoo:"):
        entry = get_model(ref[4:])
        if entry.graph is None:
            raise CliError(EXIT_PARSE, f"zoo model {entry.name!r} has published figures only, no graph")
        return entry.graph, digest(serialize_model(entry.graph).encode("utf-8"))
    try:
        data = Path(ref).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {ref}: {exc.strerror}") from None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise CliError(EXIT_PARSE, f"{ref} is not UTF-8") from None
    return parse_model(text), digest(data)


def shaped(g: ModelGraph) -> ShapedGraph:
    try:
        return infer_shapes(normalize_graph(g))
    except GraphError as exc:
        raise CliError(EXIT_SHAPE, str(exc)) from None


def _cost(args: argparse.Namespace, g: ModelGraph) -> ModelCost:
    relu = ReluCost.PER_ELEMENT if getattr(args, "relu_per_element", False) else ReluCost.PRINTED
    return model_cost(shaped(g), CountingMode(getattr(args, "mode", CountingMode.PAPER_FIDELITY.value)), relu)


def _training_config(args: argparse.Namespace, model_name: Optional[str]) -> TrainingConfig:
    if args.epochs is not None:
        return TrainingConfig(training_samples=args.samples, epochs=args.epochs)
    zoo_name = model_name if model_name and _zoo_has_epochs(model_name) else "pirnateco"
    cfg = default_training_config(args.category or Category.MEAN.value, zoo_name)
    return TrainingConfig(training_samples=args.samples, epochs=cfg.epochs, batch_size=cfg.batch_size)


def _zoo_has_epochs(name: str) -> bool:
    try:
        return bool(get_model(name).epochs_by_category)
    except UnknownModel:
        return False


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _resolve_flops(args: argparse.Namespace) -> tuple[int, Optional[str]]:
    if args.flops is not None:
        return args.flops, None
    if args.model is None:
        raise CliError(EXIT_PARAM, "give a model or --flops")
    if args.model.startswith("zoo:"):
        entry = get_model(args.model[4:])
        if entry.graph is None:
            if entry.published_flops is None:
                raise CliError(EXIT_PARAM, f"no FLOPs published for {entry.name}")
            return entry.published_flops, entry.name
    g, _ = load_model(args.model)
    return _cost(args, g).total_flops, g.name or None


def cmd_analyze(args: argparse.Namespace) -> int:
    g, source_digest = load_model(args.model)
    cost = _cost(args, g)
    energy = None
    if args.energy:
        params = _energy_params(args)
        cfg = _training_config(args, g.name)
        energy = energy_section(energy_training(cost.total_flops, cfg, params), params, cfg, cost.total_flops)
    report = analysis_report(g.name, cost, source_digest, energy)
    if args.format == "csv":
        text = to_csv(report["layers"], ["index", "kind", "input_shape", "output_shape", "params", "flops", "derivation"])
    else:
        text = to_json(report)
    _emit(text, args.out)
    return EXIT_OK


def cmd_energy(args: argparse.Namespace) -> int:
    flops, name = _resolve_flops(args)
    params = _energy_params(args)
    cfg = _training_config(args, name)
    section = energy_section(energy_training(flops, cfg, params), params, cfg, flops)
    section["model"] = name
    _emit(to_json(section), args.out)
    return EXIT_OK


def cmd_project(args: argparse.Namespace) -> int:
    flops, _ = _resolve_flops(args)
    params = _energy_params(args)
    if args.predictions is not None:
        total = args.predictions
    elif args.users is not None:
        total = annual_predictions(args.users, args.per_user_per_hour)
    else:
        raise CliError(EXIT_PARAM, "give --predictions or --users")
    if total < 1:
        raise CliError(EXIT_PARAM, "number of predictions must be at least 1")
    points = project_carbon(flops, total, params)
    if args.format == "json":
        text = to_json(projection_section(points, params, flops))
    else:
        rows = [{"n": p.n_predictions, "joules": repr(p.joules), "grams": repr(p.grams)} for p in points]
        text = to_csv(rows, ["n", "joules", "grams"])
    _emit(text, args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    g, _ = load_model(args.model)
    sg = shaped(g)
    check_desk_scale(sg)
    rng = np.random.default_rng(args.seed)
    s = sg.graph.input_shape
    x = rng.standard_normal((s.rows, s.cols, s.channels))
    _, counts = execute_counting(sg, x, init_weights(sg, args.seed))
    report = compare_counts(model_cost(sg), counts, sg)
    _emit(to_json({"model": g.name, "seed": args.seed, "ok": report.ok, "layers": discrepancy_rows(report)}), args.out)
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_solve_gpu_eff(args: argparse.Namespace) -> int:
    cfg = TrainingConfig(training_samples=args.samples, epochs=args.epochs)
    if not args.energy_kj > 0:
        raise CliError(EXIT_PARAM, "--energy-kj must be positive")
    g = backsolve_gpu_efficiency(args.flops, cfg, args.energy_kj * 1e3)
    _emit(to_json({
        "gpu_efficiency_flops_per_joule": g,
        "display": sig3(g),
        "inputs": {"flops": args.flops, "training_samples": cfg.training_samples,
                   "epochs": cfg.epochs, "e_training_kj": args.energy_kj},
    }), args.out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.file).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {args.file}: {exc.strerror}") from None
    mde, rmse = evaluate_predictions(text)
    _emit(to_json({"mde": mde, "rmse": rmse}), args.out)
    return EXIT_OK


def cmd_zoo(args: argparse.Namespace) -> int:
    rows = []
    for name, has_graph in list_models():
        e = get_model(name)
        rows.append({
            "name": name, "graph": has_graph, "published_weights": e.published_weights,
            "published_flops": e.published_flops, "published_energy_kj": e.published_energy_kj,
            "published_carbon_g": e.published_carbon_g,
        })
    _emit(to_json(rows), args.out)
    return EXIT_OK


def cmd_show(args: argparse.Namespace) -> int:
    g, _ = load_model(args.model)
    if args.expand:
        g = normalize_graph(g)
    _emit(serialize_model(g) + "\n", args.out)
    return EXIT_OK


def _add_energy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gpu-eff", type=float, help=f"FLOPs per joule (default {DEFAULT_GPU_EFFICIENCY:g})")
    p.add_argument("--carbon-intensity", type=float, help=f"g CO2eq per kWh (default {DEFAULT_CARBON_INTENSITY:g})")
    p.add_argument("--config", type=Path, help=f"defaults file (default ./{CONFIG_NAME} if present)")


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=TRAINING_SAMPLES)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--epochs", type=float)
    group.add_argument("--category", choices=[c.value for c in Category])


def _add_mode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in CountingMode], default=CountingMode.PAPER_FIDELITY.value)
    p.add_argument("--relu-per-element", action="store_true",
                   help="charge conv activations one FLOP per output element")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greenprint", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"greenprint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="per-layer FLOPs and parameters")
    p.add_argument("model", help="path to a .nnm file or zoo:<name>")
    _add_mode_flags(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--energy", action="store_true", help="include a training energy section")
    _add_training_flags(p)
    _add_energy_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("energy", help="training energy and carbon")
    p.add_argument("model", nargs="?")
    p.add_argument("--flops", type=_int_arg)
    _add_mode_flags(p)
    _add_training_flags(p)
    _add_energy_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("project", help="prediction carbon against number of predictions")
    p.add_argument("model", nargs="?")
    p.add_argument("--flops", type=_int_arg)
    _add_mode_flags(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--predictions", type=_int_arg)
    group.add_argument("--users", type=float)
    p.add_argument("--per-user-per-hour", type=float, default=1.0)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    _add_energy_flags(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("validate", help="check analytic FLOPs against the counting executor")
    p.add_argument("model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve-gpu-eff", help="FLOPs per joule implied by a published training energy")
    p.add_argument("--flops", type=_int_arg, required=True)
    p.add_argument("--samples", type=int, default=TRAINING_SAMPLES)
    p.add_argument("--epochs", type=float, required=True)
    p.add_argument("--energy-kj", type=float, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_solve_gpu_eff)

    p = sub.add_parser("evaluate", help="MDE and RMSE of a prediction file")
    p.add_argument("file")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("zoo", help="list built-in models")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_zoo)

    p = sub.add_parser("show", help="print a model in canonical form")
    p.add_argument("model")
    p.add_argument("--expand", action="store_true", help="expand resblock macros")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_show)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except (ParseError, MalformedRow, UnknownModel) as exc:
        code, msg = EXIT_PARSE, str(exc)
    except DeskScaleExceeded as exc:
        code, msg = EXIT_DESK_SCALE, str(exc)
    except GraphError as exc:
        # errors raised while reading a file carry a line number
        code, msg = (EXIT_PARSE if exc.line is not None else EXIT_SHAPE), str(exc)
    except ParameterError as exc:
        code, msg = EXIT_PARAM, str(exc)
    print(f"greenprint: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
