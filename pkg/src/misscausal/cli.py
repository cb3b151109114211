"""Command-line interface: ``generate``, ``pretrain``, ``train``, ``evaluate``.

Every subcommand accepts ``--config PATH`` (a flat JSON object whose keys
are the subcommand's options) and one flag per option; flags win over the
file, the file wins over built-in defaults. Unknown config keys are
rejected and all validation problems are reported together.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Failures print a single JSON object on stderr (see schemas/error.schema.json).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
import typing
from pathlib import Path

from . import __version__
from . import io as mio
from .datagen import (
    SCHEMES,
    DatasetError,
    apply_missingness,
    generate_dag,
    graph_from_edges,
    load_csv,
    simulate_sem,
    standardize,
    write_csv,
)
from .imputer import pretrain_adversarial
from .metrics import compute_metrics
from .numcore import RngStream
from .trainer import TrainConfig, Trainer, TrainingError

log = logging.getLogger("misscausal")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# output file names
TRUTH_GRAPH = "truth_graph.csv"
TRUTH_WEIGHTS = "truth_weights.csv"
DATA_FULL = "data_full.csv"
DATA_MASKED = "data_masked.csv"
METADATA = "metadata.json"
IMNET_CHECKPOINT = "imnet.json"
PRETRAIN_HISTORY = "pretrain_history.csv"
TRACE = "trace.csv"
BEST_GRAPH = "best_graph.csv"
PRUNED_GRAPH = "pruned_graph.csv"
EDGE_PROBS = "edge_probs.csv"
CHECKPOINT = "checkpoint.json"
METRICS = "metrics.json"


class CliError(Exception):
    """Carries an exit code and the fields of the error JSON."""

    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.message = message
        self.extra = extra

    def to_json(self) -> dict:
        return {"status": "error", "kind": self.kind, "message": self.message, **self.extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON channel
        raise CliError(EXIT_USAGE, "usage", f"{self.prog}: {message}")


# -- option tables ----------------------------------------------------------
# name -> (kind, default, help). kinds: int, float, str, bool, path, optpath,
# optfloat, edges

COMMON = {
    "seed": ("int", 0, "random seed"),
    "out": ("path", ".", "output directory"),
    "missing_token": ("str", "", "cell text that marks a missing value"),
}

GENERATE = {
    "d": ("int", 12, "number of variables"),
    "n": ("int", 5000, "number of samples"),
    "scheme": ("str", "bernoulli", f"graph scheme, one of {', '.join(SCHEMES)}"),
    "p": ("float", 0.2, "edge probability for the bernoulli scheme"),
    "edges": ("edges", None, "explicit edge list as JSON [[i, j], ...]; overrides scheme"),
    "func": ("str", "linear", "structural function: linear or quadratic"),
    "noise": ("str", "gaussian", "noise family: gaussian or non_gaussian_power"),
    "sigma": ("float", 1.0, "noise scale"),
    "exponent": ("float", 3.0, "power for non_gaussian_power noise"),
    "weight_low": ("float", 0.5, "smallest edge weight magnitude"),
    "weight_high": ("float", 2.0, "largest edge weight magnitude"),
    "missing_rate": ("float", 0.2, "MCAR probability of masking each cell"),
    "write_weights": ("bool", False, f"also write {TRUTH_WEIGHTS}"),
}

_TRAIN_DEFAULTS = TrainConfig()

PRETRAIN = {
    "data": ("optpath", None, "masked CSV dataset (required)"),
    "standardize": ("bool", False, "standardize columns before use"),
    "pretrain_epochs": ("int", _TRAIN_DEFAULTS.pretrain_epochs, "adversarial pretraining steps"),
    "pretrain_batch_size": ("int", _TRAIN_DEFAULTS.pretrain_batch_size, "pretraining minibatch size"),
    "pretrain_lr": ("float", _TRAIN_DEFAULTS.pretrain_lr, "pretraining learning rate"),
    "hint_rate": ("float", _TRAIN_DEFAULTS.hint_rate, "fraction of mask entries revealed to the discriminator"),
    "alpha": ("float", _TRAIN_DEFAULTS.alpha, "reconstruction loss weight"),
}

_KIND_OF_TYPE = {int: "int", float: "float", str: "str", bool: "bool", float | None: "optfloat"}


def _train_options() -> dict:
    hints = typing.get_type_hints(TrainConfig)
    opts = {
        "data": ("optpath", None, "masked CSV dataset (required)"),
        "truth": ("optpath", None, "ground-truth adjacency CSV; writes metrics.json"),
        "imnet": ("optpath", None, "pretrained imputer checkpoint (skips internal pretraining)"),
        "standardize": ("bool", False, "standardize columns before use"),
    }
    for f in dataclasses.fields(TrainConfig):
        if f.name == "seed":
            continue
        opts[f.name] = (_KIND_OF_TYPE[hints[f.name]], f.default, f"training option {f.name}")
    return opts


TRAIN = _train_options()


def _parse_flag(kind: str):
    def parse(text: str):
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "optfloat":
            return None if text.lower() in ("none", "null", "auto") else float(text)
        if kind == "optpath":
            return None if text.lower() in ("none", "null") else text
        if kind == "edges":
            return json.loads(text)
        return text

    parse.__name__ = kind  # argparse uses this in error messages
    return parse


def _add_options(parser: argparse.ArgumentParser, options: dict) -> None:
    for name, (kind, default, help_) in options.items():
        flag = "--" + name.replace("_", "-")
        shown = "auto" if default is None and kind == "optfloat" else default
        text = f"{help_} (default: {shown!r})"
        if kind == "bool":
            parser.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction,
                                default=argparse.SUPPRESS, help=text)
        else:
            parser.add_argument(flag, dest=name, type=_parse_flag(kind), default=argparse.SUPPRESS,
                                metavar=kind.upper(), help=text)


def _check_value(name: str, kind: str, value) -> str | None:
    def bad(what):
        return f"{name}: expected {what}, got {value!r}"

    if kind == "int":
        return None if isinstance(value, int) and not isinstance(value, bool) else bad("an integer")
    if kind in ("float", "optfloat"):
        if value is None and kind == "optfloat":
            return None
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        return None if ok else bad("a number")
    if kind == "bool":
        return None if isinstance(value, bool) else bad("true or false")
    if kind in ("str", "path"):
        return None if isinstance(value, str) else bad("a string")
    if kind == "optpath":
        return None if value is None or isinstance(value, str) else bad("a string or null")
    if kind == "edges":
        if value is None:
            return None
        ok = isinstance(value, list) and all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)
            for e in value)
        return None if ok else bad("a list of [i, j] integer pairs")
    return None


def resolve_config(options: dict, args: argparse.Namespace) -> dict:
    """Merge defaults, the --config file and flags; raise CliError listing
    every problem."""
    merged = {name: spec[1] for name, spec in options.items()}
    errors = []
    if args.config is not None:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CliError(EXIT_USAGE, "input", f"config file not found: {path}", path=str(path)) from None
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_USAGE, "validation", f"cannot read config {path}: {exc}",
                           path=str(path)) from None
        if not isinstance(doc, dict):
            raise CliError(EXIT_USAGE, "validation", f"config {path} must hold a JSON object", path=str(path))
        for key, value in doc.items():
            if key not in options:
                errors.append(f"unknown config key {key!r}")
                continue
            merged[key] = value
    for name in options:
        if hasattr(args, name):
            merged[name] = getattr(args, name)
    for name, (kind, _, _) in options.items():
        problem = _check_value(name, kind, merged[name])
        if problem:
            errors.append(problem)
    if errors:
        raise CliError(EXIT_USAGE, "validation", "invalid configuration", details=errors)
    for name, (kind, _, _) in options.items():
        if kind == "float" and merged[name] is not None:
            merged[name] = float(merged[name])
    return merged


# -- helpers ------------------------------------------------------------------
def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_RUNTIME, "io", f"cannot create output directory {out}: {exc}", path=str(out)) from None
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _load_dataset(cfg: dict):
    if cfg["data"] is None:
        raise CliError(EXIT_USAGE, "validation", "no dataset given (set 'data' or --data)",
                       details=["data: required"])
    path = Path(cfg["data"])
    if not path.is_file():
        raise CliError(EXIT_USAGE, "input", f"dataset not found: {path}", path=str(path))
    try:
        ds = load_csv(path, cfg["missing_token"])
        ds.check_coverage(2)
    except DatasetError as exc:
        raise CliError(EXIT_USAGE, "input", str(exc), path=str(path)) from None
    return standardize(ds) if cfg["standardize"] else ds


def _read_graph(path_text: str):
    path = Path(path_text)
    if not path.is_file():
        raise CliError(EXIT_USAGE, "input", f"adjacency file not found: {path}", path=str(path))
    try:
        return mio.read_adjacency(path)
    except mio.FormatError as exc:
        raise CliError(EXIT_USAGE, "input", str(exc), path=str(path)) from None


def _data_summary(cfg: dict, ds) -> dict:
    return {"path": cfg["data"], "n": ds.n, "d": ds.d, "missing_fraction": ds.missing_fraction,
            "column_names": list(ds.column_names)}


# -- subcommands -------------------------------------------------------------
def cmd_generate(cfg: dict) -> int:
    errors = []
    if cfg["d"] < 2:
        errors.append("d must be at least 2")
    if cfg["n"] < 2:
        errors.append("n must be at least 2")
    if cfg["scheme"] not in SCHEMES:
        errors.append(f"scheme must be one of {', '.join(SCHEMES)}")
    if not 0.0 <= cfg["p"] <= 1.0:
        errors.append("p must lie in [0, 1]")
    if cfg["func"] not in ("linear", "quadratic"):
        errors.append("func must be 'linear' or 'quadratic'")
    if cfg["noise"] not in ("gaussian", "non_gaussian_power"):
        errors.append("noise must be 'gaussian' or 'non_gaussian_power'")
    if cfg["sigma"] < 0:
        errors.append("sigma must be nonnegative")
    if not 0 < cfg["weight_low"] <= cfg["weight_high"]:
        errors.append("need 0 < weight_low <= weight_high")
    if not 0.0 <= cfg["missing_rate"] < 1.0:
        errors.append("missing_rate must lie in [0, 1)")
    if cfg["edges"] is not None:
        for i, j in cfg["edges"]:
            if not (0 <= i < cfg["d"] and 0 <= j < cfg["d"]) or i == j:
                errors.append(f"edge [{i}, {j}] is out of range or a self-loop")
    if errors:
        raise CliError(EXIT_USAGE, "validation", "invalid generate parameters", details=errors)

    rng = RngStream(cfg["seed"], "generate")
    weights = (cfg["weight_low"], cfg["weight_high"])
    try:
        if cfg["edges"] is not None:
            graph = graph_from_edges(cfg["d"], [tuple(e) for e in cfg["edges"]], rng.child("graph"), weights)
        else:
            graph = generate_dag(cfg["d"], rng.child("graph"), scheme=cfg["scheme"], p=cfg["p"],
                                 weight_range=weights)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "validation", str(exc)) from None
    X = simulate_sem(graph, cfg["n"], rng.child("sem"), func=cfg["func"], noise=cfg["noise"],
                     sigma=cfg["sigma"], exponent=cfg["exponent"])
    try:
        ds = apply_missingness(X, cfg["missing_rate"], rng.child("mask"))
    except DatasetError as exc:
        raise CliError(EXIT_RUNTIME, "runtime", f"masking left a column nearly empty: {exc}") from None

    out = _out_dir(cfg["out"])
    outputs = [TRUTH_GRAPH, DATA_FULL, DATA_MASKED, METADATA]
    mio.write_adjacency(out / TRUTH_GRAPH, graph.adjacency)
    write_csv(out / DATA_FULL, X, ds.column_names)
    write_csv(out / DATA_MASKED, X, ds.column_names, ds.M, cfg["missing_token"])
    if cfg["write_weights"]:
        mio.write_matrix(out / TRUTH_WEIGHTS, graph.edge_weights)
        outputs.append(TRUTH_WEIGHTS)
    _write_json(out / METADATA, {
        "command": "generate",
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "scheme": "edges" if cfg["edges"] is not None else cfg["scheme"],
        "missing_rate": cfg["missing_rate"],
        "observed_fraction": float(ds.M.mean()),
        "n_edges": graph.n_edges,
        "outputs": outputs,
    })
    return EXIT_OK


def cmd_pretrain(cfg: dict) -> int:
    errors = []
    for name in ("pretrain_epochs", "pretrain_batch_size"):
        if cfg[name] < (0 if name == "pretrain_epochs" else 1):
            errors.append(f"{name} is out of range")
    if not 0.0 <= cfg["hint_rate"] <= 1.0:
        errors.append("hint_rate must lie in [0, 1]")
    if cfg["pretrain_lr"] <= 0:
        errors.append("pretrain_lr must be positive")
    if cfg["alpha"] < 0:
        errors.append("alpha must be nonnegative")
    if errors:
        raise CliError(EXIT_USAGE, "validation", "invalid pretrain parameters", details=errors)
    ds = _load_dataset(cfg)
    out = _out_dir(cfg["out"])
    history: list[dict] = []
    t0 = time.perf_counter()
    # same stream the trainer uses internally, so pretrain + train --imnet
    # matches train with built-in pretraining
    rng = RngStream(cfg["seed"], "train").child("pretrain")
    params = pretrain_adversarial(ds, rng, epochs=cfg["pretrain_epochs"], batch_size=cfg["pretrain_batch_size"],
                                  hint_rate=cfg["hint_rate"], alpha=cfg["alpha"], lr=cfg["pretrain_lr"],
                                  history=history)
    wall = time.perf_counter() - t0
    mio.save_imnet(out / IMNET_CHECKPOINT, params, meta={"d": ds.d, "seed": cfg["seed"]})
    _write_history(out / PRETRAIN_HISTORY, history)
    _write_json(out / METADATA, {
        "command": "pretrain",
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "data": _data_summary(cfg, ds),
        "wall_time": wall,
        "final": history[-1] if history else None,
        "outputs": [IMNET_CHECKPOINT, PRETRAIN_HISTORY, METADATA],
    })
    return EXIT_OK


def _write_history(path: Path, history: list[dict]) -> None:
    cols = ("step", "d_loss", "g_loss", "rec_loss", "disc_accuracy")
    lines = [",".join(cols)]
    for row in history:
        lines.append(",".join(str(row[c]) if c == "step" else repr(float(row[c])) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(cfg: dict) -> int:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    tcfg = TrainConfig(**{k: v for k, v in cfg.items() if k in fields})
    problems = tcfg.validate()
    if problems:
        raise CliError(EXIT_USAGE, "validation", "invalid training config", details=problems)
    ds = _load_dataset(cfg)
    truth = None
    if cfg["truth"] is not None:
        truth = _read_graph(cfg["truth"])
        if truth.shape[0] != ds.d:
            raise CliError(EXIT_USAGE, "validation",
                           f"dimension mismatch: truth graph is {truth.shape[0]}x{truth.shape[0]}, "
                           f"dataset has {ds.d} columns")
    imnet = None
    if cfg["imnet"] is not None:
        path = Path(cfg["imnet"])
        if not path.is_file():
            raise CliError(EXIT_USAGE, "input", f"imputer checkpoint not found: {path}", path=str(path))
        try:
            imnet = mio.load_imnet(path)
        except (mio.FormatError, KeyError, ValueError) as exc:
            raise CliError(EXIT_USAGE, "input", f"cannot load imputer checkpoint: {exc}", path=str(path)) from None
        if imnet.d != ds.d:
            raise CliError(EXIT_USAGE, "validation",
                           f"dimension mismatch: imputer checkpoint is for d={imnet.d}, dataset has d={ds.d}")

    out = _out_dir(cfg["out"])
    t0 = time.perf_counter()
    try:
        trainer = Trainer(ds, tcfg, imnet)
        every = max(1, tcfg.epochs // 10)
        for _ in range(tcfg.epochs):
            row = trainer.step()
            if (row["epoch"] + 1) % every == 0:
                log.info("epoch %d reward %.4f best %.4f", row["epoch"] + 1, row["reward"], row["best_reward"])
        result = trainer.result(time.perf_counter() - t0)
    except TrainingError as exc:
        raise CliError(EXIT_RUNTIME, "runtime", str(exc)) from None

    outputs = [TRACE, EDGE_PROBS, CHECKPOINT, METADATA]
    mio.write_trace(out / TRACE, result.trace)
    if result.edge_probs is not None:
        mio.write_matrix(out / EDGE_PROBS, result.edge_probs)
    else:
        outputs.remove(EDGE_PROBS)
    groups = {"featnet": trainer.featnet.named(), "decoder": trainer.decoder.named(),
              "vnet": trainer.vnet.named()}
    if trainer.imnet is not None:
        groups.update(mio.imnet_groups(trainer.imnet))
    mio.save_checkpoint(out / CHECKPOINT, groups, meta={"epoch": trainer.epoch, "d": ds.d,
                                                          "lambdas": list(result.lambdas)})
    metrics = None
    if result.best_graph is not None:
        mio.write_adjacency(out / BEST_GRAPH, result.best_graph)
        mio.write_adjacency(out / PRUNED_GRAPH, result.pruned_graph)
        outputs[1:1] = [BEST_GRAPH, PRUNED_GRAPH]
        if truth is not None:
            metrics = {"pruned": compute_metrics(result.pruned_graph, truth).to_dict(),
                       "best": compute_metrics(result.best_graph, truth).to_dict()}
            _write_json(out / METRICS, metrics)
            outputs.append(METRICS)
    _write_json(out / METADATA, {
        "command": "train",
        "version": __version__,
        "seed": tcfg.seed,
        "config": cfg,
        "data": _data_summary(cfg, ds),
        "wall_time": result.wall_time,
        "epochs_run": trainer.epoch,
        "best_epoch": result.best_epoch,
        "best_reward": result.best_reward,
        "best_score": result.best_score,
        "lambdas": list(result.lambdas),
        "pruned_edges": None if result.pruned_graph is None else int(result.pruned_graph.sum()),
        "error": result.error,
        "outputs": outputs,
    })
    if result.error:
        raise CliError(EXIT_RUNTIME, "runtime", result.error, outputs=outputs)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    est = _read_graph(args.estimated)
    truth = _read_graph(args.truth)
    try:
        m = compute_metrics(est, truth)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "validation", str(exc)) from None
    doc = m.to_dict()
    print(json.dumps(doc))
    if args.out is not None:
        _write_json(_out_dir(args.out) / METRICS, doc)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="misscausal", description="Causal DAG discovery from data with missing values.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress (repeat for debug)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, options, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", metavar="PATH", default=None, help="JSON config file")
        _add_options(p, {**COMMON, **options})
        p.set_defaults(options={**COMMON, **options})
        return p

    add("generate", GENERATE, "simulate a DAG, SEM data and a masked copy")
    add("pretrain", PRETRAIN, "adversarially pretrain the imputer on a masked dataset")
    add("train", TRAIN, "search for a causal graph")
    ev = sub.add_parser("evaluate", help="compare an adjacency CSV to the truth",
                        description="Print FDR, TPR and SHD of an estimated graph as JSON.")
    ev.add_argument("estimated", help="estimated adjacency CSV")
    ev.add_argument("truth", help="ground-truth adjacency CSV")
    ev.add_argument("--out", default=None, help=f"also write {METRICS} here")
    return parser


COMMANDS = {"generate": cmd_generate, "pretrain": cmd_pretrain, "train": cmd_train}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        level = logging.WARNING - 10 * min(args.verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        cfg = resolve_config(args.options, args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return exc.code
    except OSError as exc:
        err = CliError(EXIT_RUNTIME, "io", str(exc), path=getattr(exc, "filename", None))
        print(json.dumps(err.to_json()), file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort JSON error
        print(json.dumps({"status": "error", "kind": "runtime",
                          "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
