"""Command-line experiments: ``generate``, ``baseline``, ``train``, ``gradcheck``.

Each command takes one JSON config file; ``--out`` and ``--seeds`` override
the file's values. Exit codes: 0 success, 1 validation error, 2 numerical
failure (divergence or failed gradient check).
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from graphrep import data as datamod
from graphrep.checks import fd_error_sweep, gradcheck_instance, random_instance
from graphrep.data import Dataset, Role, UNKNOWN
from graphrep.embed import EmbeddingParams, embed, init_params, save_params
from graphrep.errors import GraphRepError, InvalidConfigError, SchemaError
from graphrep.graph import GraphConfig, build_graph, dump_edges, sym_normalize
from graphrep.propagation import PropagationConfig, predict, propagate_iterative
from graphrep.training import TrainConfig, accuracy, train

log = logging.getLogger("graphrep")

GENERATORS = {
    "two_moons": (datamod.gen_two_moons, {"n", "noise_sd", "nuisance_dims", "nuisance_sd"}),
    "blobs": (
        datamod.gen_blobs,
        {"n_per_class", "c", "d", "informative_dims", "separation", "noise_sd"},
    ),
}

TRAIN_KEYS = {"epochs", "lr", "kind", "d_prime", "hidden", "init", "init_scale", "loss",
              "precondition"}
GRADCHECK_DEFAULTS = {
    "instances": 20, "mlp_instances": 10, "n": 12, "d": 4, "d_prime": 2, "k": 3, "T": 5,
    "alpha": 0.8, "hidden": 3, "h": 1e-5, "rtol": 1e-4, "atol": 1e-6, "losses": ["sq"],
    "sweep": [1e-4, 1e-5, 1e-6],
}


def _check_keys(block, allowed, where):
    unknown = set(block) - set(allowed)
    if unknown:
        raise SchemaError(sorted(unknown)[0], f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass
class ExperimentConfig:
    dataset: dict
    labeled_per_class: int = 10
    val_fraction: float = 0.5
    graph: GraphConfig = field(default_factory=GraphConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    train: dict = field(default_factory=dict)
    gradcheck: dict = field(default_factory=lambda: dict(GRADCHECK_DEFAULTS))
    seeds: list[int] = field(default_factory=lambda: [0])
    out: Path = Path("out")
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=Path(".")) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise SchemaError("<document>", "config must be a JSON object")
        _check_keys(doc, {"dataset", "split", "graph", "propagation", "train", "gradcheck",
                          "seeds", "out"}, "config")
        dataset = doc.get("dataset", {"generator": "two_moons", "n": 400})
        if "csv" in dataset:
            _check_keys(dataset, {"csv"}, "dataset")
        else:
            gen = dataset.get("generator")
            if gen not in GENERATORS:
                raise SchemaError("dataset.generator", f"unknown generator {gen!r}")
            _check_keys(dataset, GENERATORS[gen][1] | {"generator", "seed"}, "dataset")
        split = doc.get("split", {})
        _check_keys(split, {"labeled_per_class", "val_fraction"}, "split")
        g = doc.get("graph", {})
        _check_keys(g, {"k", "sigma"}, "graph")
        p = doc.get("propagation", {})
        _check_keys(p, {"alpha", "T"}, "propagation")
        t = doc.get("train", {})
        _check_keys(t, TRAIN_KEYS, "train")
        gc = doc.get("gradcheck", {})
        _check_keys(gc, GRADCHECK_DEFAULTS, "gradcheck")
        seeds = doc.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise SchemaError("seeds", "seeds must be a nonempty list of integers")
        cfg = cls(
            dataset=dataset,
            labeled_per_class=split.get("labeled_per_class", 10),
            val_fraction=split.get("val_fraction", 0.5),
            graph=GraphConfig(g.get("k", 10), g.get("sigma")),
            propagation=PropagationConfig(p.get("alpha", 0.9), p.get("T", 30)),
            train=t,
            gradcheck={**GRADCHECK_DEFAULTS, **gc},
            seeds=sorted(set(seeds)),
            out=Path(doc.get("out", "out")),
            base_dir=Path(base_dir),
        )
        cfg.train_config(0)  # validate eagerly
        return cfg

    def train_config(self, seed) -> TrainConfig:
        return TrainConfig(
            alpha=self.propagation.alpha, T=self.propagation.T, k=self.graph.k,
            sigma=self.graph.sigma, seed=seed, **self.train,
        )

    def generator_params(self, seed) -> dict:
        params = {k: v for k, v in self.dataset.items() if k != "generator"}
        params.setdefault("seed", seed)
        return params

    def load_dataset(self, seed) -> Dataset:
        if "csv" in self.dataset:
            return datamod.load_csv(self.base_dir / self.dataset["csv"])
        fn = GENERATORS[self.dataset["generator"]][0]
        return fn(**self.generator_params(seed))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"config is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(doc, path.parent)


# ---------------------------------------------------------------- reports


@dataclass
class SeedResult:
    seed: int
    baseline_accuracy: float
    learned_accuracy: float | None
    abstain_count: int
    epochs_run: int
    best_epoch: int | None


@dataclass
class Report:
    command: str
    rows: list[SeedResult]
    aggregate: dict

    @classmethod
    def build(cls, command, rows):
        rows = sorted(rows, key=lambda r: r.seed)
        return cls(command, rows, aggregate(rows))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text) -> Report:
        doc = json.loads(text)
        _check_keys(doc, {"command", "rows", "aggregate"}, "report")
        for key in ("command", "rows", "aggregate"):
            if key not in doc:
                raise SchemaError(key)
        row_keys = {f.name for f in fields(SeedResult)}
        rows = []
        for row in doc["rows"]:
            _check_keys(row, row_keys, "report row")
            missing = row_keys - set(row)
            if missing:
                raise SchemaError(sorted(missing)[0])
            rows.append(SeedResult(**row))
        agg = doc["aggregate"]
        _check_keys(agg, {"baseline", "learned", "improvement"}, "report aggregate")
        return cls(doc["command"], rows, agg)


def _summary(values):
    return {"median": statistics.median(values), "mean": statistics.fmean(values)}


def aggregate(rows: list[SeedResult]) -> dict:
    out = {"baseline": _summary([r.baseline_accuracy for r in rows]), "learned": None,
           "improvement": None}
    if rows and all(r.learned_accuracy is not None for r in rows):
        diffs = [r.learned_accuracy - r.baseline_accuracy for r in rows]
        out["learned"] = _summary([r.learned_accuracy for r in rows])
        out["improvement"] = {**_summary(diffs), "min": min(diffs), "max": max(diffs),
                              "wins": sum(d > 0 for d in diffs)}
    return out


# ---------------------------------------------------------------- scoring


def evaluate(params: EmbeddingParams, ds: Dataset, gcfg: GraphConfig, pcfg: PropagationConfig):
    """Test accuracy (abstentions count as errors), abstain count and the graph."""
    if gcfg.k > ds.n - 1:
        raise InvalidConfigError(f"k={gcfg.k} must be at most n-1={ds.n - 1}")
    graph, _ = build_graph(embed(params, ds.X), gcfg)
    op = sym_normalize(graph)
    F, _ = propagate_iterative(op.matrix, ds.seed_matrix(), pcfg.alpha, pcfg.T)
    labels, abstain = predict(F)
    scored = ds.indices(Role.TEST)
    scored = scored[ds.y[scored] != UNKNOWN]
    acc = accuracy(labels[scored], abstain[scored], ds.y[scored])
    return acc, int(abstain[scored].sum()), graph


def euclidean_params(ds: Dataset) -> EmbeddingParams:
    return init_params("linear", ds.X.shape[1], ds.X.shape[1], scheme="identity")


def prepared_dataset(cfg: ExperimentConfig, seed) -> Dataset:
    return datamod.split_labels(cfg.load_dataset(seed), cfg.labeled_per_class,
                                cfg.val_fraction, seed)


# ---------------------------------------------------------------- commands


def cmd_generate(cfg: ExperimentConfig) -> list[Path]:
    if "csv" in cfg.dataset:
        raise InvalidConfigError("generate needs a generator dataset, not a CSV path")
    cfg.out.mkdir(parents=True, exist_ok=True)
    written = []
    for seed in cfg.seeds:
        params = cfg.generator_params(seed)
        ds = cfg.load_dataset(seed)
        path = cfg.out / f"data_seed{seed}.csv"
        datamod.save_csv(ds, path)
        sidecar = {"generator": cfg.dataset["generator"], "params": params, "seed": params["seed"]}
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
        written.append(path)
        log.info("wrote %s (%d points)", path, ds.n)
    return written


def cmd_baseline(cfg: ExperimentConfig, dump_graph=False) -> Report:
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in cfg.seeds:
        ds = prepared_dataset(cfg, seed)
        acc, abstains, graph = evaluate(euclidean_params(ds), ds, cfg.graph, cfg.propagation)
        if dump_graph:
            dump_edges(graph, cfg.out / f"edges_baseline_seed{seed}.txt")
        rows.append(SeedResult(seed, acc, None, abstains, 0, None))
        log.info("seed %d: baseline accuracy %.4f", seed, acc)
    report = Report.build("baseline", rows)
    (cfg.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report


def cmd_train(cfg: ExperimentConfig, dump_graph=False) -> Report:
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in cfg.seeds:
        ds = prepared_dataset(cfg, seed)
        base_acc, _, _ = evaluate(euclidean_params(ds), ds, cfg.graph, cfg.propagation)
        params, history = train(ds, cfg.train_config(seed))
        acc, abstains, graph = evaluate(params, ds, cfg.graph, cfg.propagation)
        save_params(params, cfg.out / f"model_seed{seed}.json")
        (cfg.out / f"history_seed{seed}.jsonl").write_text(history.to_jsonl(), encoding="utf-8")
        if dump_graph:
            dump_edges(graph, cfg.out / f"edges_learned_seed{seed}.txt")
        rows.append(SeedResult(seed, base_acc, acc, abstains, len(history.records),
                               history.best_epoch))
        log.info("seed %d: baseline %.4f learned %.4f (best epoch %d)", seed, base_acc, acc,
                 history.best_epoch)
    report = Report.build("train", rows)
    (cfg.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    return report


@dataclass
class GradcheckRow:
    loss: str
    kind: str
    block: str
    instances: int
    max_rel_err: float
    max_abs_err: float
    passed: bool


def cmd_gradcheck(cfg: ExperimentConfig):
    """Returns ``(rows, sweep, all_passed)``; ``sweep`` maps step size to max abs error."""
    gc = cfg.gradcheck
    shape = {key: gc[key] for key in ("n", "d", "d_prime", "k", "T", "alpha", "hidden")}
    rows = []
    for loss in gc["losses"]:
        for kind, count in (("linear", gc["instances"]), ("mlp1", gc["mlp_instances"])):
            merged = {}
            for i in range(count):
                inst = random_instance(cfg.seeds[0] + i, kind=kind, loss=loss, **shape)
                for chk in gradcheck_instance(inst, gc["h"], gc["rtol"], gc["atol"]):
                    rel, ab, ok = merged.get(chk.block, (0.0, 0.0, True))
                    merged[chk.block] = (max(rel, chk.max_rel_err), max(ab, chk.max_abs_err),
                                         ok and chk.passed)
            rows.extend(GradcheckRow(loss, kind, block, count, *vals)
                        for block, vals in merged.items() if count)
    sweep = fd_error_sweep(random_instance(cfg.seeds[0], kind="linear", loss=gc["losses"][0],
                                           **shape), tuple(gc["sweep"]))
    return rows, sweep, all(r.passed for r in rows)


def _print_gradcheck(rows, sweep, out):
    print(f"{'loss':<6}{'kind':<8}{'block':<10}{'n':>4}  {'max_rel':>10}  {'max_abs':>10}  result",
          file=out)
    for r in rows:
        print(f"{r.loss:<6}{r.kind:<8}{r.block:<10}{r.instances:>4}  {r.max_rel_err:>10.3e}  "
              f"{r.max_abs_err:>10.3e}  {'PASS' if r.passed else 'FAIL'}", file=out)
    print("step-size sweep (max abs error vs analytic):", file=out)
    for h, err in sweep.items():
        print(f"  h={h:.0e}  {err:.3e}", file=out)


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphrep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "write synthetic datasets as CSV plus a JSON sidecar"),
        ("baseline", "score the euclidean (identity) embedding"),
        ("train", "learn embeddings and score them against the baseline"),
        ("gradcheck", "compare analytic gradients with finite differences"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, help="experiment config JSON")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seeds", help="comma-separated seeds (overrides config)")
        if name in ("baseline", "train"):
            p.add_argument("--dump-graph", action="store_true",
                           help="also write the final graph as an edge list")
    return parser


def _parse_seeds(text):
    try:
        seeds = sorted({int(s) for s in text.split(",") if s.strip()})
    except ValueError as exc:
        raise InvalidConfigError(f"bad --seeds value {text!r}") from exc
    if not seeds:
        raise InvalidConfigError("--seeds is empty")
    return seeds


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out = args.out
        if args.seeds is not None:
            cfg.seeds = _parse_seeds(args.seeds)
        if args.command == "generate":
            for path in cmd_generate(cfg):
                print(path)
        elif args.command == "baseline":
            report = cmd_baseline(cfg, args.dump_graph)
            print(json.dumps(report.aggregate, indent=2, sort_keys=True))
        elif args.command == "train":
            report = cmd_train(cfg, args.dump_graph)
            print(json.dumps(report.aggregate, indent=2, sort_keys=True))
        else:
            rows, sweep, ok = cmd_gradcheck(cfg)
            _print_gradcheck(rows, sweep, sys.stdout)
            if not ok:
                print("gradient check FAILED", file=sys.stderr)
                return 2
    except GraphRepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
