"""Command-line driver.

Commands::

    ordinal-atd train          train a model, write model.json and history.csv
    ordinal-atd eval           K-NN accuracy / error of a saved model on its test split
    ordinal-atd matrix         category distance matrix CSV plus monotonicity score
    ordinal-atd verify-metric  sampled check of the four metric axioms
    ordinal-atd templates      list the 2C-1 triplet templates and their targets

Settings resolve as: command-line flag, then ``--config`` JSON value, then the
built-in default. Output goes to ``--out``, else ``$ATD_OUTPUT_DIR``, else the
current directory. Failures print ``error[<category>]: <message>`` on stderr
and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dataio import (
    BUILTIN_SCHEMAS,
    OrdinalDataset,
    ParseError,
    SchemaError,
    SchemaViolationError,
    builtin_schema,
    load_csv_ordinal,
    load_schema,
    make_synthetic_ordinal,
    split,
)
from .evaluation import (
    InsufficientSamplesError,
    UndefinedCorrelationError,
    category_distance_matrix,
    knn_accuracy,
    knn_classify_error,
    ordinal_monotonicity_score,
)
from .geometry import DEFAULT_AXIOM_TOL, check_metric_axioms, random_triples
from .network import DegenerateOutputError
from .persistence import CorruptModelError, ModelArtifact, UnsupportedVersionError, load_model, save_model
from .targets import MissingCategoryError, UnsupportedCategoryCountError, triplet_templates
from .trainer import TrainConfig, TrainingError, embed, train

OUTPUT_ENV = "ATD_OUTPUT_DIR"
MODEL_FILE = "model.json"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass
class RunConfig:
    """Everything a train/eval/matrix command needs, after precedence resolution."""

    data: str | None = None
    schema: str | None = None
    synthetic: dict[str, Any] | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    k_list: tuple[int, ...] = (3,)
    test_fraction: float = 0.2
    val_fraction: float = 0.2
    out_dir: str = "."

    def data_dict(self) -> dict[str, Any]:
        return {
            "data": self.data,
            "schema": self.schema,
            "synthetic": self.synthetic,
            "test_fraction": self.test_fraction,
            "val_fraction": self.val_fraction,
        }


SYNTHETIC_DEFAULTS = {
    "categories": 4,
    "samples_per_class": 100,
    "dim": 2,
    "separation": 1.0,
    "noise": 0.1,
    "seed": 0,
}

# flag dest -> TrainConfig field
TRAIN_FLAGS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "batches_per_epoch": "batches_per_epoch",
    "lr": "learning_rate",
    "arccos_eps": "arccos_eps",
    "seed": "seed",
    "k": "k",
    "hidden": "hidden",
    "embedding_dim": "embedding_dim",
    "final_activation": "final_activation",
}


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from err


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", help="delimiter-separated data file")
    g.add_argument("--schema", help=f"schema file or built-in name ({', '.join(BUILTIN_SCHEMAS)})")
    g.add_argument("--synthetic", action="store_true", default=None,
                   help="use a generated ordinal dataset instead of --data")
    g.add_argument("--categories", type=int, help="synthetic: number of categories")
    g.add_argument("--samples-per-class", type=int, help="synthetic: samples per category")
    g.add_argument("--dim", type=int, help="synthetic: feature dimension")
    g.add_argument("--separation", type=float, help="synthetic: distance between class centres")
    g.add_argument("--noise", type=float, help="synthetic: isotropic noise sigma")
    g.add_argument("--data-seed", type=int, help="synthetic: generator seed")
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--val-fraction", type=float, help="validation share of the non-test rows")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--batches-per-epoch", type=int)
    g.add_argument("--lr", type=float, help="Adam learning rate")
    g.add_argument("--arccos-eps", type=float)
    g.add_argument("--seed", type=int, help="seeds initialization, batches and the split")
    g.add_argument("--k", type=int, help="K for validation model selection")
    g.add_argument("--hidden", type=_int_list, help="hidden widths, e.g. 64,64")
    g.add_argument("--embedding-dim", type=int)
    g.add_argument("--final-activation", choices=("identity", "relu"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"error[usage]: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ordinal-atd", description="Angular triangle distance ordinal metric learning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--quiet", action="store_true", help="no per-epoch progress lines")
    _add_data_args(p)
    _add_train_args(p)

    for name, text in (("eval", "evaluate a saved model"), ("matrix", "category distance matrix")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True, help="model.json written by train")
        p.add_argument("--config", help="JSON file with default settings")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
        p.add_argument("--subset", choices=("test", "train", "val", "all"),
                       help="rows to evaluate (default test)")
        _add_data_args(p)
        if name == "eval":
            p.add_argument("--k-list", type=_int_list, help="K values, e.g. 1,3,5")
        else:
            p.add_argument("--raw", action="store_true", default=None,
                           help="use 1 - cos instead of (1 - cos) / 2")

    p = sub.add_parser("verify-metric", help="sampled metric-axiom check")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_AXIOM_TOL)
    p.add_argument("--identity-tol", type=float, default=None)
    p.add_argument("--out", help="also write axioms.txt here")

    p = sub.add_parser("templates", help="list triplet templates")
    p.add_argument("--categories", type=int, required=True)
    return parser


# ---------------------------------------------------------------- configuration


def _read_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError("config", f"file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return cfg


def _pick(args: argparse.Namespace, cfg: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _output_dir(args: argparse.Namespace, cfg: dict) -> str:
    return _pick(args, cfg, "out") or cfg.get("out_dir") or os.environ.get(OUTPUT_ENV) or "."


def resolve_run_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    """Merge flags over ``--config`` values over ``base`` (e.g. a saved model's settings)."""
    cfg = dict(base or {})
    cfg.update(_read_config(getattr(args, "config", None)))

    train_fields = dict(cfg.get("train", {}))
    for flag, name in TRAIN_FLAGS.items():
        for key in (flag, name):
            if key in cfg:
                train_fields[name] = cfg[key]
        value = getattr(args, flag, None)
        if value is not None:
            train_fields[name] = value
    unknown = set(train_fields) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown training setting")
    try:
        tc = TrainConfig.from_dict(train_fields)
    except (TypeError, ValueError) as err:
        raise ConfigError("train", str(err)) from err

    synthetic = None
    if getattr(args, "synthetic", None):
        use_synth = True
    elif getattr(args, "data", None) is not None:
        use_synth = None  # an explicit data file replaces stored synthetic settings
    else:
        use_synth = cfg.get("synthetic")
    if use_synth:
        synthetic = dict(SYNTHETIC_DEFAULTS)
        if isinstance(use_synth, dict):
            synthetic.update(use_synth)
        for key, flag in (("categories", "categories"), ("samples_per_class", "samples_per_class"),
                          ("dim", "dim"), ("separation", "separation"), ("noise", "noise"),
                          ("seed", "data_seed")):
            value = getattr(args, flag, None)
            if value is not None:
                synthetic[key] = value

    data = _pick(args, cfg, "data")
    schema = _pick(args, cfg, "schema")
    if synthetic is None:
        if data is None:
            raise ConfigError("data", "give --data with --schema, or --synthetic")
        if not Path(data).is_file():
            raise ConfigError("data", f"file not found: {data}")
        if schema is None:
            raise ConfigError("schema", "a data file needs a schema")
        if schema not in BUILTIN_SCHEMAS and not Path(schema).is_file():
            raise ConfigError("schema", f"not a built-in schema name or a file: {schema}")

    k_list = tuple(_pick(args, cfg, "k_list", (tc.k,)))
    if not k_list or any(int(k) < 1 for k in k_list):
        raise ConfigError("k_list", "K values must be at least 1")

    test_fraction = float(_pick(args, cfg, "test_fraction", 0.2))
    val_fraction = float(_pick(args, cfg, "val_fraction", 0.2))
    for name, f in (("test_fraction", test_fraction), ("val_fraction", val_fraction)):
        if not 0.0 < f < 1.0:
            raise ConfigError(name, f"must lie in (0, 1), got {f}")

    return RunConfig(
        data=data,
        schema=schema,
        synthetic=synthetic,
        train=tc,
        k_list=tuple(int(k) for k in k_list),
        test_fraction=test_fraction,
        val_fraction=val_fraction,
        out_dir=_output_dir(args, cfg),
    )


def load_dataset(rc: RunConfig) -> OrdinalDataset:
    if rc.synthetic is not None:
        s = rc.synthetic
        try:
            return make_synthetic_ordinal(
                int(s["categories"]), int(s["samples_per_class"]), int(s["dim"]),
                float(s["separation"]), float(s["noise"]), int(s["seed"]),
            )
        except ValueError as err:
            raise ConfigError("synthetic", str(err)) from err
    schema = builtin_schema(rc.schema) if rc.schema in BUILTIN_SCHEMAS else load_schema(rc.schema)
    return load_csv_ordinal(rc.data, schema)


def _splits(rc: RunConfig, ds: OrdinalDataset):
    return split(ds, rc.test_fraction, rc.val_fraction, seed=rc.train.seed)


# ---------------------------------------------------------------- output helpers


def _write(out_dir: str, name: str, text: str) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / name
    path.write_text(text)
    return path


def _kv_text(pairs: dict[str, Any]) -> str:
    lines = []
    for key, value in pairs.items():
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- commands


def cmd_train(args: argparse.Namespace) -> int:
    rc = resolve_run_config(args)
    ds = load_dataset(rc)
    tr, va, _ = _splits(rc, ds)

    def progress(rec):
        if not args.quiet:
            print(f"epoch {rec.epoch} loss {rec.loss:.6f} val_accuracy {rec.val_accuracy:.4f}",
                  file=sys.stderr, flush=True)

    params, history = train(tr, va, rc.train, sink=progress)
    artifact = ModelArtifact(
        params=params,
        n_categories=ds.n_categories,
        seed=rc.train.seed,
        config={"train": rc.train.to_dict(), **rc.data_dict(), "k_list": list(rc.k_list)},
        provenance=ds.provenance,
        class_names=list(ds.class_names),
        feature_names=list(ds.feature_names),
    )
    model_path = Path(rc.out_dir) / MODEL_FILE
    Path(rc.out_dir).mkdir(parents=True, exist_ok=True)
    save_model(artifact, model_path)
    _write(rc.out_dir, "history.csv", history.to_csv())
    print(f"model {model_path}")
    print(f"best_epoch {history.best_epoch}")
    return 0


def _load_for_eval(args: argparse.Namespace):
    artifact = load_model(args.model)
    base = dict(artifact.config)
    rc = resolve_run_config(args, base)
    ds = load_dataset(rc)
    if ds.dim != artifact.feature_dim:
        raise ConfigError("data", f"feature width {ds.dim} does not match the model's {artifact.feature_dim}")
    if ds.n_categories != artifact.n_categories:
        raise ConfigError("data", "category count does not match the model")
    tr, va, te = _splits(rc, ds)
    subset = args.subset or "test"
    chosen = {"test": te, "train": tr, "val": va, "all": ds}[subset]
    return artifact, rc, tr, chosen, subset


def cmd_eval(args: argparse.Namespace) -> int:
    artifact, rc, tr, chosen, subset = _load_for_eval(args)
    z_train = embed(artifact.params, tr.features)
    z = embed(artifact.params, chosen.features)
    rows = []
    report: dict[str, Any] = {"subset": subset, "n": len(chosen)}
    for k in rc.k_list:
        acc = knn_accuracy(z, chosen.labels, k)
        err = knn_classify_error(z_train, tr.labels, z, chosen.labels, k)
        rows.append([k, acc, err])
        report[f"knn_accuracy.k{k}"] = acc
        report[f"classification_error.k{k}"] = err
    _write(rc.out_dir, "metrics.csv", _csv_text(["k", "knn_accuracy", "classification_error"], rows))
    _write(rc.out_dir, "metrics.txt", _kv_text(report))
    sys.stdout.write(_kv_text(report))
    return 0


def cmd_matrix(args: argparse.Namespace) -> int:
    artifact, rc, _, chosen, subset = _load_for_eval(args)
    z = embed(artifact.params, chosen.features)
    rescaled = not bool(args.raw)
    m = category_distance_matrix(z, chosen.labels, chosen.n_categories, rescaled=rescaled)
    score = ordinal_monotonicity_score(m)
    _write(rc.out_dir, "matrix.csv", m.to_csv())
    report = {"subset": subset, "rescaled": rescaled, "monotonicity": score}
    _write(rc.out_dir, "matrix.txt", _kv_text(report))
    sys.stdout.write(m.to_csv())
    print(f"monotonicity={score!r}")
    return 0


def cmd_verify_metric(args: argparse.Namespace) -> int:
    if args.samples < 1:
        raise ConfigError("samples", "must be at least 1")
    if args.dim < 2:
        raise ConfigError("dim", "must be at least 2")
    triples = random_triples(args.samples, args.dim, np.random.default_rng(args.seed))
    tols = {} if args.identity_tol is None else {"identity": args.identity_tol}
    report = check_metric_axioms(triples, tol=args.tol, **tols)
    text = _kv_text({"dim": args.dim, "seed": args.seed, **report.as_dict()})
    sys.stdout.write(text)
    if args.out:
        _write(args.out, "axioms.txt", text)
    if not report.passed:
        failed = [n for n, r in report.results.items() if not r.passed]
        raise CliError("axiom", f"violated: {', '.join(failed)}")
    return 0


def cmd_templates(args: argparse.Namespace) -> int:
    templates = triplet_templates(args.categories)
    rows = []
    for t in templates:
        kind = "inner" if t.is_inner else "boundary"
        y_ij, y_jk = t.targets
        f_ij, f_jk = t.exact_targets
        rows.append([*t.ranks, y_ij, y_jk, str(f_ij), str(f_jk), kind])
    header = ["r_i", "r_j", "r_k", "y_ij", "y_jk", "y_ij_exact", "y_jk_exact", "kind"]
    sys.stdout.write(_csv_text(header, rows))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "matrix": cmd_matrix,
    "verify-metric": cmd_verify_metric,
    "templates": cmd_templates,
}

# exception type -> machine-readable category, most specific first
ERROR_CATEGORIES = (
    (ConfigError, "config"),
    (UnsupportedVersionError, "model-version"),
    (CorruptModelError, "model-corrupt"),
    (SchemaViolationError, "data"),
    (ParseError, "data"),
    (SchemaError, "schema"),
    (InsufficientSamplesError, "data"),
    (MissingCategoryError, "data"),
    (UnsupportedCategoryCountError, "data"),
    (TrainingError, "training"),
    (DegenerateOutputError, "training"),
    (UndefinedCorrelationError, "evaluation"),
    (OSError, "io"),
)


def _describe(err: Exception) -> str:
    extra = []
    for attr in ("row", "column", "rank"):
        value = getattr(err, attr, None)
        if value is not None:
            extra.append(f"{attr} {value}")
    return f"{err}" + (f" ({', '.join(extra)})" if extra else "")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        print("error[usage]: no command given", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error[usage]: no command given", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except CliError as err:
        print(f"error[{err.category}]: {err}", file=sys.stderr)
        return 1
    except Exception as err:
        for etype, category in ERROR_CATEGORIES:
            if isinstance(err, etype):
                print(f"error[{category}]: {_describe(err)}", file=sys.stderr)
                return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
