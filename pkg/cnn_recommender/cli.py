"""
Command-line interface for the CNN recommender.

Usage:

    cnn-recommender complexity --format idx train-images-idx3-ubyte train-labels-idx1-ubyte --out c.json
    cnn-recommender complexity --format synth --classes 10 --per-class 100 --noise 0.1 --seed 0
    cnn-recommender gen-model --base-maps 16 --q 1,1,1 --layers-csv layers.csv --out spec.json
    cnn-recommender ability [--candidates table.json] [--params params.json] [--ceiling]
    cnn-recommender calibrate [--candidates table.json] --out params.json
    cnn-recommender fit-match --calibration pairs.jsonl --kind isotonic --out matching.json
    cnn-recommender recommend --report c.json --matching matching.json [--candidates table.json]
    cnn-recommender curve --anchor 0.002:0.91 --anchor 0.02:0.95 --out curve.csv
    cnn-recommender validate-2class --n 2,3 --separation 4 --sigma 1 --trials 100000 --seed 0
    cnn-recommender synth --classes 10 --per-class 100 --noise 0.1 --seed 0 --out blobs
    cnn-recommender reliability --observations rates.jsonl

Every command prints a short summary on stdout; JSON reports (``--out``)
embed the resolved run configuration and the tool version.  Exit status is
0 on success, 1 when a computation has no answer and 2 for unusable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import __version__
from .ability import (
    AbilityParams,
    ability_ceiling,
    calibrate_table,
    depth_factor,
    load_default_params,
    load_params,
    save_params,
    structure_score,
)
from .archgen import (
    NamedSpec,
    count_macs,
    count_params,
    enumerate_candidates,
    expand_layers,
    export_spec,
    load_bundled_table,
    make_spec,
    parse_spec_table,
    write_layers_csv,
)
from .complexity import dataset_complexity, simulate_multiclass_error
from .config import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_CURVE_POINTS,
    DEFAULT_GAMMA,
    DEFAULT_INPUT_CHANNELS,
    DEFAULT_MARGIN,
    DEFAULT_N0,
    MIN_TRIALS,
    CandidateConstraints,
    RunConfig,
    setup_logging,
)
from .descriptor import DESCRIPTOR_VARIANT, extract_features, write_descriptor_csv
from .errors import InputError, RecommenderError
from .ingest import LabeledDataset, load_cifar_binary, load_idx, load_image_dir, synth_blob_task, write_idx
from .matcher import (
    MatchingFunction,
    balance_models,
    fit_matching,
    fit_performance_curve,
    load_calibration_pairs,
    load_matching,
    recommend,
    sample_curve,
    save_matching,
    score_candidates,
)
from .reliability import load_observations, score_reliability
from .reports import read_json, write_csv, write_json

logger = logging.getLogger(__name__)

KIND_ALIASES = {"linear": "linear", "isotonic": "isotonic-decreasing"}


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _anchor(text: str) -> Tuple[float, float]:
    sep = ":" if ":" in text else ","
    try:
        t, rate = (float(part) for part in text.split(sep))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TIME:RATE, got {text!r}")
    return t, rate


# ----------------------------------------------------------------------------
# Shared option groups


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("inputs", nargs="*", help="Dataset files: IDX images+labels, CIFAR batches or one image directory")
    parser.add_argument("--format", dest="dataset_format", choices=["idx", "cifar", "dir", "synth"], default="idx")
    parser.add_argument("--max-per-class", type=int, help="Ingestion cap: keep at most this many samples per class")
    parser.add_argument("--class-count", type=int, help="Class count for CIFAR batches and generated heads")
    parser.add_argument("--workers", type=int, help="Threads for decoding and descriptor extraction")
    _add_synth_args(parser)


def _add_synth_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--classes", type=int, default=10, help="Synthetic task: number of classes")
    parser.add_argument("--per-class", type=int, default=100, help="Synthetic task: samples per class")
    parser.add_argument("--noise", type=float, default=0.1, help="Synthetic task: pixel noise sigma")
    parser.add_argument("--separation", type=float, default=1.0, help="Synthetic task: blob displacement")
    parser.add_argument("--side", type=int, default=32, help="Synthetic task: image side in pixels")


def _add_candidate_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--candidates", help="JSON table of candidate specs (default: bundled published models)")
    parser.add_argument("--enumerate", action="store_true", help="Generate candidates from the ranges below instead")
    _add_range_args(parser)


def _add_range_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--s-values", type=_int_list, default=(16, 32, 64, 128))
    parser.add_argument("--m-values", type=_int_list, default=(1, 2, 3, 4, 5))
    parser.add_argument("--max-per-section", type=int, default=4)
    parser.add_argument("--q-pattern", choices=["uniform-1", "uniform", "nondecreasing", "all"], default="nondecreasing")
    parser.add_argument("--input-channels", type=int, default=DEFAULT_INPUT_CHANNELS)
    parser.add_argument("--downsample", choices=["pooling", "strided-conv"], default="pooling")
    parser.add_argument("--max-macs", type=int)


def _add_params_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", help="Ability params JSON (default: bundled fit)")
    parser.add_argument("--n0", type=float, help="Override the depth threshold of g(N)")
    parser.add_argument("--gamma", type=float, help="Override the depth decay of g(N)")


# ----------------------------------------------------------------------------
# Resolution helpers


def _load_dataset(args: argparse.Namespace) -> LabeledDataset:
    fmt = args.dataset_format
    if fmt == "synth":
        if args.inputs:
            raise InputError("--format synth takes no input paths")
        dataset = synth_blob_task(args.classes, args.per_class, args.side, args.separation, args.noise, args.seed)
        return dataset.subsample(args.max_per_class, args.seed) if args.max_per_class else dataset
    if not args.inputs:
        raise InputError(f"--format {fmt} needs input paths")
    if fmt == "idx":
        if len(args.inputs) != 2:
            raise InputError("--format idx needs an images file and a labels file")
        return load_idx(args.inputs[0], args.inputs[1], args.max_per_class, args.seed)
    if fmt == "cifar":
        class_count = args.class_count or DEFAULT_CLASS_COUNT
        return load_cifar_binary(args.inputs, class_count, args.max_per_class, args.seed, args.workers)
    if len(args.inputs) != 1:
        raise InputError("--format dir needs exactly one root directory")
    return load_image_dir(args.inputs[0], args.max_per_class, args.seed)


def _synth_options(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "classes": args.classes,
        "per_class": args.per_class,
        "noise": args.noise,
        "separation": args.separation,
        "side": args.side,
    }


def _constraints(args: argparse.Namespace) -> CandidateConstraints:
    return CandidateConstraints(
        base_maps=args.s_values,
        n_down=args.m_values,
        max_per_section=args.max_per_section,
        q_pattern=args.q_pattern,
        input_channels=args.input_channels,
        downsample_kind=args.downsample,
        class_count=getattr(args, "class_count", None) or DEFAULT_CLASS_COUNT,
        max_macs=args.max_macs,
    )


def _candidates(args: argparse.Namespace) -> List[NamedSpec]:
    if args.candidates:
        return parse_spec_table(read_json(args.candidates))
    if args.enumerate:
        return [NamedSpec(spec.label(), spec) for spec in enumerate_candidates(_constraints(args))]
    return load_bundled_table()


def _params(args: argparse.Namespace) -> AbilityParams:
    params = load_params(args.params) if args.params else load_default_params()
    overrides = {k: v for k, v in (("n0", args.n0), ("gamma", args.gamma)) if v is not None}
    if overrides:
        params = AbilityParams.model_validate({**params.model_dump(), **overrides})
    return params


def _matching(args: argparse.Namespace) -> MatchingFunction:
    if args.matching:
        return load_matching(args.matching)
    if args.calibration:
        return fit_matching(load_calibration_pairs(args.calibration), KIND_ALIASES[args.kind])
    raise InputError("recommend needs --matching FILE or --calibration FILE")


def _config(args: argparse.Namespace, **fields: Any) -> RunConfig:
    return RunConfig(command=args.command, out=getattr(args, "out", None), tool_version=__version__, **fields)


def _document(config: RunConfig, payload: Dict[str, Any]) -> Dict[str, Any]:
    return {"tool_version": __version__, "config": config.model_dump(mode="json"), **payload}


def _emit(args: argparse.Namespace, config: RunConfig, payload: Dict[str, Any]) -> None:
    if getattr(args, "out", None):
        write_json(args.out, _document(config, payload))
        logger.info("report written to %s", args.out)


def _emit_sidecar(args: argparse.Namespace, config: RunConfig) -> None:
    """Write the run record to ``<out>.run.json`` next to a fixed-schema output file."""
    if getattr(args, "out", None):
        write_json(f"{args.out}.run.json", _document(config, {}))


# ----------------------------------------------------------------------------
# Commands


def cmd_complexity(args: argparse.Namespace, console: Console) -> int:
    config = _config(
        args,
        inputs=list(args.inputs),
        dataset_format=args.dataset_format,
        class_count=args.class_count,
        max_per_class=args.max_per_class,
        descriptor_variant=DESCRIPTOR_VARIANT,
        workers=args.workers,
        seed=args.seed,
        options=_synth_options(args) if args.dataset_format == "synth" else {},
    )
    dataset = _load_dataset(args)
    features = extract_features(dataset, args.workers) if args.descriptors_csv else None
    report = dataset_complexity(dataset, workers=args.workers, features=features)
    if features is not None:
        write_descriptor_csv(args.descriptors_csv, features, dataset.labels)
    _emit(args, config, report.to_dict())
    console.print(f"C_all = {report.c_all:.6f}", highlight=False)
    console.print(
        f"{dataset.name}: {report.sample_count} samples, {dataset.class_count} classes, "
        f"centroid accuracy {report.centroid_accuracy:.4f}",
        highlight=False,
    )
    return 0


def cmd_gen_model(args: argparse.Namespace, console: Console) -> int:
    class_count = args.class_count or DEFAULT_CLASS_COUNT
    config = _config(
        args,
        class_count=class_count,
        constraints=_constraints(args) if args.enumerate else None,
        options={"base_maps": args.base_maps, "n_down": args.n_down, "q": list(args.q or ())},
    )
    if args.enumerate:
        table = [NamedSpec(spec.label(), spec) for spec in enumerate_candidates(_constraints(args))]
        console.print(f"{len(table)} candidate specs", highlight=False)
        if args.out:
            write_json(args.out, [entry.to_dict() for entry in table])
            _emit_sidecar(args, config)
        return 0
    if not args.q:
        raise InputError("gen-model needs --q (or --enumerate)")
    spec = make_spec(
        args.base_maps,
        args.n_down,
        args.q,
        input_channels=args.input_channels,
        downsample_kind=args.downsample,
        class_count=class_count,
    )
    layers = expand_layers(spec)
    if args.layers_csv:
        write_layers_csv(args.layers_csv, layers)
    if args.out:
        write_json(args.out, export_spec(spec))
        _emit_sidecar(args, config)
    console.print(spec.label(), highlight=False)
    console.print(
        f"MACs {count_macs(layers):,} (convolutions {count_macs(layers, include_head=False):,}), "
        f"params {count_params(layers):,}",
        highlight=False,
    )
    return 0


def _ability_table(rows: Sequence[Dict[str, Any]]) -> Table:
    table = Table(title="Ability scores")
    for column in ("name", "N", "S", "M", "MACs", "f", "g", "chi", "published"):
        table.add_column(column, justify="left" if column == "name" else "right")
    for r in rows:
        published = "" if r["published_chi"] is None else f"{r['published_chi']:.2f}"
        table.add_row(
            r["name"], str(r["n_conv"]), str(r["base_maps"]), str(r["n_down"]), f"{r['macs']:,}",
            f"{r['f']:.4f}", f"{r['g']:.4f}", f"{r['chi']:.4f}", published,
        )
    return table


def cmd_ability(args: argparse.Namespace, console: Console) -> int:
    params = _params(args)
    entries = _candidates(args)
    config = _config(args, params_path=args.params, candidates_path=args.candidates)
    scored = score_candidates(entries, params)
    rows = []
    for entry, cand in zip(entries, scored):
        rows.append(
            {
                "name": entry.name,
                "n_conv": entry.spec.n_conv,
                "base_maps": entry.spec.base_maps,
                "n_down": entry.spec.n_down,
                "macs": cand.macs,
                "f": structure_score(entry.spec, params),
                "g": depth_factor(entry.spec.n_conv, params),
                "chi": cand.chi,
                "published_chi": entry.chi,
            }
        )
    payload: Dict[str, Any] = {"params": params.model_dump(mode="json"), "scores": rows}
    console.print(_ability_table(rows))
    if args.ceiling:
        ceilings = []
        for base_maps, n_down in sorted({(e.spec.base_maps, e.spec.n_down) for e in entries}):
            result = ability_ceiling(params, base_maps, n_down, args.q_shape)
            ceilings.append({"base_maps": base_maps, "n_down": n_down, "depth": result.depth, "chi": result.chi})
            console.print(
                f"ceiling S={base_maps} M={n_down}: chi {result.chi:.4f} at N={result.depth}", highlight=False
            )
        payload["ceilings"] = ceilings
    _emit(args, config, payload)
    return 0


def cmd_calibrate(args: argparse.Namespace, console: Console) -> int:
    table = parse_spec_table(read_json(args.candidates)) if args.candidates else load_bundled_table()
    params = calibrate_table(table, n0=args.n0, gamma=args.gamma)
    anchored = [entry for entry in table if entry.chi is not None]
    fitted = score_candidates(anchored, params)

    view = Table(title=f"a0 = {params.a0:.6f}, a1 = {params.a1:.6f}")
    for column in ("name", "published", "fitted", "residual"):
        view.add_column(column, justify="left" if column == "name" else "right")
    for entry, cand, residual in zip(anchored, fitted, params.residuals):
        view.add_row(entry.name, f"{entry.chi:.2f}", f"{cand.chi:.4f}", f"{residual:+.4f}")
    console.print(view)
    if args.out:
        save_params(args.out, params)
        options = {"n0": params.n0, "gamma": params.gamma}
        _emit_sidecar(args, _config(args, candidates_path=args.candidates, options=options))
    return 0


def cmd_fit_match(args: argparse.Namespace, console: Console) -> int:
    m = fit_matching(load_calibration_pairs(args.calibration), KIND_ALIASES[args.kind])
    if m.kind == "linear":
        console.print(f"chi = {m.intercept:.6f} {m.slope:+.6f} * C_all on [{m.c_min:.4f}, {m.c_max:.4f}]", highlight=False)
    else:
        console.print(f"isotonic fit with {len(m.breakpoints)} breakpoints on [{m.c_min:.4f}, {m.c_max:.4f}]", highlight=False)
    if args.out:
        save_matching(args.out, m)
        _emit_sidecar(args, _config(args, calibration_path=args.calibration, matching_kind=m.kind))
    return 0


def _resolve_c_all(args: argparse.Namespace) -> float:
    if args.c_all is not None:
        return args.c_all
    if args.report:
        doc = read_json(args.report)
        if not isinstance(doc, dict) or "c_all" not in doc:
            raise InputError(f"{args.report}: not a complexity report (no c_all field)")
        return float(doc["c_all"])
    return dataset_complexity(_load_dataset(args), workers=args.workers).c_all


def cmd_recommend(args: argparse.Namespace, console: Console) -> int:
    if args.c_all is None and not args.report and not args.inputs and args.dataset_format != "synth":
        raise InputError("recommend needs --c-all, --report or a dataset")
    config = _config(
        args,
        inputs=list(args.inputs),
        dataset_format=args.dataset_format if args.inputs or args.dataset_format == "synth" else None,
        max_per_class=args.max_per_class,
        params_path=args.params,
        calibration_path=args.calibration,
        candidates_path=args.candidates,
        constraints=_constraints(args) if args.enumerate else None,
        matching_kind=KIND_ALIASES[args.kind],
        margin=args.margin,
        seed=args.seed,
        options={"published_chi": args.published_chi},
    )
    params = _params(args)
    m = _matching(args)
    c_all = _resolve_c_all(args)
    scored = score_candidates(_candidates(args), params, use_published=args.published_chi)
    rec = recommend(c_all, scored, params, m, margin=args.margin)

    view = Table(title=f"C_all {c_all:.6f} -> target chi {rec.target_chi:.4f}")
    for column in ("name", "MACs", "chi", ""):
        view.add_column(column, justify="left" if column == "name" else "right")
    for cand in rec.table:
        view.add_row(cand.name, f"{cand.macs:,}", f"{cand.chi:.4f}", "<-" if cand is rec.chosen else "")
    console.print(view)
    flag = " (undershoot: no candidate reaches the target)" if rec.undershoot else ""
    console.print(f"recommended {rec.chosen.name}, chi {rec.chosen.chi:.4f}{flag}", highlight=False)
    if rec.small_anchor is not None:
        console.print(f"small anchor for the performance curve: {rec.small_anchor.name}", highlight=False)
    _emit(args, config, {"params": params.model_dump(mode="json"), "matching": m.model_dump(mode="json"), **rec.to_dict()})
    return 0


def cmd_curve(args: argparse.Namespace, console: Console) -> int:
    if len(args.anchor) != 2:
        raise InputError(f"curve needs exactly two --anchor entries, got {len(args.anchor)}")
    curve = fit_performance_curve(args.anchor[0], args.anchor[1])
    rows = sample_curve(curve, args.points, args.t_min, args.t_max)
    if args.out:
        write_csv(args.out, ["t", "predicted_rate", "anchor"], rows)
    console.print(f"r(t) = {curve.a:.6f} {curve.b:+.6f} ln t", highlight=False)
    if args.throughput is not None:
        scored = score_candidates(_candidates(args), _params(args))
        balance = balance_models(curve, scored, args.throughput, args.min_rate, args.max_time)
        view = Table(title="Accuracy against speed")
        for column in ("name", "MACs", "time (s)", "rate"):
            view.add_column(column, justify="left" if column == "name" else "right")
        for row in balance.rows:
            view.add_row(row.name, f"{row.macs:,}", f"{row.forward_time:.6g}", f"{row.predicted_rate:.4f}")
        console.print(view)
        if args.min_rate is not None:
            pick = balance.fastest_meeting_rate
            console.print(f"fastest with rate >= {args.min_rate}: {pick.name if pick else 'none'}", highlight=False)
        if args.max_time is not None:
            pick = balance.best_within_time
            console.print(f"most accurate within {args.max_time} s: {pick.name if pick else 'none'}", highlight=False)
    return 0


def cmd_validate_2class(args: argparse.Namespace, console: Console) -> int:
    config = _config(
        args,
        seed=args.seed,
        options={"n": list(args.n), "separation": args.separation, "sigma": args.sigma, "trials": args.trials},
    )
    result = simulate_multiclass_error(args.n, args.separation, args.sigma, trials=args.trials, seed=args.seed)
    view = Table(title=f"nearest-centre error, analytic 2-class {result.analytic_two_class:.5f}")
    for column in ("n", "error", "std. error", "e_n / e_2", "n - 1"):
        view.add_column(column, justify="right")
    for row in result.to_dict()["classes"]:
        ratio = "" if row["ratio_to_two_class"] is None else f"{row['ratio_to_two_class']:.3f}"
        view.add_row(str(row["n"]), f"{row['error_rate']:.5f}", f"{row['standard_error']:.5f}", ratio, str(row["n"] - 1))
    console.print(view)
    _emit(args, config, result.to_dict())
    return 0


def cmd_synth(args: argparse.Namespace, console: Console) -> int:
    dataset = synth_blob_task(args.classes, args.per_class, args.side, args.separation, args.noise, args.seed)
    images, labels = f"{args.out}-images-idx3-ubyte", f"{args.out}-labels-idx1-ubyte"
    write_idx(dataset, images, labels)
    console.print(f"{dataset.name}: wrote {images} and {labels}", highlight=False)
    return 0


def cmd_reliability(args: argparse.Namespace, console: Console) -> int:
    config = _config(args, inputs=[args.observations])
    report = score_reliability(load_observations(args.observations))
    verdict = "positive" if report.positive else "not positive"
    console.print(
        f"{len(report.observations)} observations: spearman {report.spearman:.4f}, "
        f"pearson {report.pearson:.4f} ({verdict})",
        highlight=False,
    )
    _emit(args, config, report.to_dict())
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Console], int]] = {
    "complexity": cmd_complexity,
    "gen-model": cmd_gen_model,
    "ability": cmd_ability,
    "calibrate": cmd_calibrate,
    "fit-match": cmd_fit_match,
    "recommend": cmd_recommend,
    "curve": cmd_curve,
    "validate-2class": cmd_validate_2class,
    "synth": cmd_synth,
    "reliability": cmd_reliability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnn-recommender",
        description="Score classification tasks and generated CNNs, and recommend a model for a task.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log debug messages to stderr")
    common.add_argument("--seed", type=int, default=0, help="Seed for sampling, synthesis and simulation")
    common.add_argument("--out", help="Output path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", parents=[common], help="Complexity score of a dataset")
    _add_dataset_args(p)
    p.add_argument("--descriptors-csv", help="Also dump the descriptor matrix as CSV")

    p = sub.add_parser("gen-model", parents=[common], help="Expand a generated CNN spec")
    p.add_argument("--base-maps", type=int, default=16, help="S: feature maps of the first layer")
    p.add_argument("--n-down", type=int, help="M: down-sampling layers (default: length of --q)")
    p.add_argument("--q", type=_int_list, help="Layers per section, e.g. 1,1,2,2")
    p.add_argument("--class-count", type=int)
    p.add_argument("--layers-csv", help="Write the per-layer MAC/parameter table as CSV")
    p.add_argument("--enumerate", action="store_true", help="Write every spec within the ranges as a candidate table")
    _add_range_args(p)

    p = sub.add_parser("ability", parents=[common], help="Ability scores of candidate specs")
    _add_candidate_args(p)
    _add_params_args(p)
    p.add_argument("--ceiling", action="store_true", help="Also report the depth ceiling of each width family")
    p.add_argument("--q-shape", choices=["balanced", "front"], default="balanced")

    p = sub.add_parser("calibrate", parents=[common], help="Fit ability params to published anchors")
    p.add_argument("--candidates", help="Table with published chi (default: bundled published models)")
    p.add_argument("--n0", type=float, default=DEFAULT_N0)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)

    p = sub.add_parser("fit-match", parents=[common], help="Fit the matching function chi = m(C_all)")
    p.add_argument("--calibration", required=True, help="JSON lines of {task, c_all, chi_optimal}")
    p.add_argument("--kind", choices=sorted(KIND_ALIASES), default="linear")

    p = sub.add_parser("recommend", parents=[common], help="Recommend a CNN for a task")
    _add_dataset_args(p)
    _add_candidate_args(p)
    _add_params_args(p)
    p.add_argument("--c-all", type=float, help="Complexity score of the task")
    p.add_argument("--report", help="Complexity report written by the complexity command")
    p.add_argument("--matching", help="Matching function JSON written by fit-match")
    p.add_argument("--calibration", help="Calibration pairs to fit the matching function from")
    p.add_argument("--kind", choices=sorted(KIND_ALIASES), default="linear")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--published-chi", action="store_true", help="Rank table entries by their published chi")

    p = sub.add_parser("curve", parents=[common], help="Two-anchor performance curve")
    p.add_argument("--anchor", type=_anchor, action="append", default=[], help="TIME:RATE of a trained model")
    p.add_argument("--points", type=int, default=DEFAULT_CURVE_POINTS)
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--throughput", type=float, help="MACs per second, to place candidates on the curve")
    p.add_argument("--min-rate", type=float)
    p.add_argument("--max-time", type=float)
    _add_candidate_args(p)
    _add_params_args(p)

    p = sub.add_parser("validate-2class", parents=[common], help="Monte-Carlo check of the n-class error growth")
    p.add_argument("--n", type=_int_list, default=(2, 3), help="Class counts, e.g. 2,3,4")
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=MIN_TRIALS)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic blob task as an IDX pair")
    _add_synth_args(p)

    p = sub.add_parser("reliability", parents=[common], help="Correlate a score with measured training rates")
    p.add_argument("--observations", required=True, help="JSON lines of {name, score, rate}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    if args.command == "synth" and not args.out:
        parser.error("synth needs --out PREFIX")
    console = Console(highlight=False)
    try:
        return COMMANDS[args.command](args, console)
    except RecommenderError as err:
        logger.debug("command failed", exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return err.exit_status
    except FileNotFoundError as err:
        print(f"error: no such file: {err.filename}", file=sys.stderr)
        return 2
    except (ValidationError, json.JSONDecodeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
