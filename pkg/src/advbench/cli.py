"""``advbench`` command line: train, attack, defend, evaluate, graph-attack, graph-defend.

Exit codes: 0 success, 2 configuration problem (bad flag, unknown key,
missing checkpoint), 3 runtime failure (e.g. a non-finite training loss).
"""

from __future__ import annotations

import argparse
import inspect
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import config as C
from .attacks.base import logits_of
from .data.graphs import GraphDataset, load_graph_dir, make_sbm
from .data.idx import load_mnist
from .data.images import ImageDataset, make_blobs
from .defenses import AdversarialMLPClassifier, PreprocessedClassifier, ThermometerEncoder
from .graph.defenses import graph_adversarial_train
from .graph.gcn import GCN
from .graph.perturbed import GraphBudget, TargetSpec
from .models import CNNClassifier, MLPClassifier, TrainingError, load_network, save_network
from .models.checkpoint import CheckpointError
from .report import attack_rows, node_rows, write_report
from .taxonomy import ATTACK_INFO, DEFENSE_INFO

COMMANDS = ("train", "attack", "defend", "evaluate", "graph-attack", "graph-defend")


class UsageError(Exception):
    """Configuration-level failure; exit code 2."""


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--attack_method", help="attack name; evaluate accepts a comma list")
    common.add_argument("--defense", help="defense name; graph-defend accepts a comma list")
    common.add_argument("--dataset", help="dataset name (blobs, mnist, sbm) or a path")
    common.add_argument("--model", help="model name, or checkpoint path(s) for attack/evaluate")
    common.add_argument("--eps", type=float)
    common.add_argument("--budget", type=int, help="edge flips for graph attacks and graph adversarial training")
    common.add_argument("--output", help="output directory")
    parser = argparse.ArgumentParser(prog="advbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _is_path(value: str) -> bool:
    return "/" in value or "\\" in value or Path(value).exists()


def resolve_args(args) -> tuple[dict, dict]:
    """Resolved config plus the raw list-valued flags (models, attacks, defenses)."""
    raw = C.load_config(args.config) if args.config else {}
    lists = {
        "attacks": _split(args.attack_method),
        "defenses": _split(args.defense),
        "models": _split(args.model),
    }
    over = {"seed": args.seed, "output_dir": args.output, "budget.eps": args.eps, "budget.flips": args.budget}
    if args.dataset is not None:
        if _is_path(args.dataset):
            raw["dataset"] = {"name": "path", "path": args.dataset}
        else:
            raw["dataset"] = {"name": args.dataset}
    if lists["attacks"] and len(lists["attacks"]) == 1:
        raw["attack"] = {**_section(raw.get("attack")), "method": lists["attacks"][0]}
    if lists["defenses"] and len(lists["defenses"]) == 1:
        raw["defense"] = {**_section(raw.get("defense")), "name": lists["defenses"][0]}
    if args.command == "train" and lists["models"]:
        raw["model"] = {**_section(raw.get("model")), "name": lists["models"][0]}
    explicit_dataset = "dataset" in raw
    cfg = C.resolve(raw, over)
    cfg["_explicit_dataset"] = explicit_dataset
    return cfg, lists


def _section(value):
    if value is None:
        return {}
    if isinstance(value, str):
        return {"name": value}
    return dict(value)


def _split(value):
    return [v.strip() for v in value.split(",") if v.strip()] if value else []


def _canon(name: str) -> str:
    return name.lower().replace("-", "_")


# ---------------------------------------------------------------------------
# datasets and models


def image_data(ds_cfg: dict, seed: int) -> tuple[ImageDataset, ImageDataset]:
    name = ds_cfg["name"]
    if name == "blobs":
        ds = make_blobs(
            ds_cfg["n_per_class"], ds_cfg["classes"], tuple(ds_cfg["image_shape"]), ds_cfg["separation"],
            ds_cfg["noise"], ds_cfg["width"], ds_cfg["background"], seed=seed,
        )
        return ds.train_test_split(ds_cfg["test_fraction"], seed=seed)
    if name in ("mnist", "path"):
        root = ds_cfg.get("path")
        return load_mnist("train", root, ds_cfg["train_limit"]), load_mnist("test", root, ds_cfg["test_limit"])
    raise UsageError(f"dataset {name!r} is a graph dataset; use the graph-* commands")


def graph_data(cfg: dict) -> GraphDataset:
    """The configured graph; graph commands default to the SBM when no dataset was given."""
    seed = cfg["seed"]
    ds_cfg = cfg["dataset"] if cfg["_explicit_dataset"] else C.registered_defaults("dataset", "sbm") | {"name": "sbm"}
    name = ds_cfg["name"]
    if name == "sbm":
        return make_sbm(
            tuple(ds_cfg["block_sizes"]), ds_cfg["p_in"], ds_cfg["p_out"], ds_cfg["feature_dim"], seed,
            ds_cfg["feature_p"], ds_cfg["feature_signal"], tuple(ds_cfg["split"]),
        )
    if name == "path":
        path = Path(ds_cfg["path"])
        if not (path / "edges.txt").exists():
            raise UsageError(f"no graph found at {path} (expected edges.txt, features.csv, labels.txt)")
        return load_graph_dir(path)
    raise UsageError(f"dataset {name!r} is not a graph dataset; use sbm or a graph directory")


def _params(section: dict, drop=("name", "method", "checkpoint")) -> dict:
    return {k: (tuple(v) if isinstance(v, list) else v) for k, v in section.items() if k not in drop}


def checkpoint_path(name: str, output_dir) -> Path:
    """A bare model name refers to ``<output>/model-<name>.advb`` written by train/defend."""
    if _is_path(name) or name.endswith(".advb"):
        path = Path(name)
    else:
        path = Path(output_dir) / f"model-{_canon(name)}.advb"
    if not path.exists():
        raise UsageError(f"checkpoint not found: {path}")
    return path


def load_model(path: Path):
    try:
        net, header = load_network(path)
    except CheckpointError as exc:
        raise UsageError(str(exc)) from None
    pre = header.get("meta", {}).get("preprocessor")
    if pre:
        return PreprocessedClassifier.from_fitted(ThermometerEncoder(pre["levels"]).fit(), net), header
    return net, header


# ---------------------------------------------------------------------------
# commands


def _out(cfg, *parts) -> Path:
    d = Path(cfg["output_dir"]).joinpath(*parts)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _public(cfg) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def cmd_train(cfg, lists):
    model_cfg = cfg["model"]
    if model_cfg["name"] == "gcn":
        raise UsageError("GCNs are trained inside graph-attack/graph-defend; train handles mlp and cnn")
    train, test = image_data(cfg["dataset"], cfg["seed"])
    cls = MLPClassifier if model_cfg["name"] == "mlp" else CNNClassifier
    clf = cls(**_params(model_cfg), n_classes=train.num_classes, seed=cfg["seed"]).fit(train.images, train.labels)
    out = _out(cfg)
    meta = {"dataset": cfg["dataset"], "data_seed": cfg["seed"], "model": model_cfg, "defense": None}
    path = save_network(clf.network_, out / f"model-{model_cfg['name']}.advb", meta=meta)
    summary = {"checkpoint": path.name, "train_accuracy": clf.score(train.images, train.labels), "test_accuracy": clf.score(test.images, test.labels), "losses": clf.report_.losses}
    (out / f"train-{model_cfg['name']}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out, summary


def _run_attack(method, model, x, y, cfg, params):
    fn = C.IMAGE_ATTACKS[method]
    accepted = inspect.signature(fn).parameters
    kwargs = dict(params)
    if "eps" in accepted:
        kwargs["eps"] = cfg["budget"]["eps"]
    if "seed" in accepted:
        kwargs["seed"] = cfg["seed"]
    if method == "lbfgs":
        # L-BFGS is targeted only: aim every sample at the next class
        kwargs["target"] = (y + 1) % _num_classes(model)
    return fn(model, x, y, **kwargs)


def _num_classes(model):
    return int(model.num_classes)


def _attack_params(cfg, method):
    if cfg["attack"]["method"] == method:
        return _params(cfg["attack"])
    return _params(C.registered_defaults("attack", method))


def _image_eval(cfg, model, test, method, tags):
    x, y = test.images, test.labels
    clean = logits_of(model, x).argmax(1)
    result = _run_attack(method, model, x, y, cfg, _attack_params(cfg, method))
    adv = logits_of(model, result.x_adv).argmax(1)
    return result, attack_rows(result, x, y, clean, adv, **tags)


def _test_split(cfg, header) -> ImageDataset:
    """The checkpoint's own test split unless a dataset was given explicitly."""
    meta = header.get("meta", {})
    if cfg["_explicit_dataset"] or not meta.get("dataset"):
        return image_data(cfg["dataset"], cfg["seed"])[1]
    return image_data(meta["dataset"], meta.get("data_seed", cfg["seed"]))[1]


def cmd_attack(cfg, lists):
    method = cfg["attack"]["method"]
    if method is None:
        raise UsageError("attack needs --attack_method")
    if method not in C.IMAGE_ATTACKS:
        raise UsageError(f"{method!r} is not an image attack; choose from {sorted(C.IMAGE_ATTACKS)}")
    names = lists["models"] or [cfg["model"]["checkpoint"] or cfg["model"]["name"]]
    path = checkpoint_path(names[0], cfg["output_dir"])
    model, header = load_model(path)
    test = _test_split(cfg, header)
    result, rows = _image_eval(cfg, model, test, method, {"attack": method})
    out = _out(cfg, f"attack-{method}")
    np.save(out / "adversarial.npy", result.x_adv)
    meta = {"command": "attack", "attack": method, "model": path.name, "eps": cfg["budget"]["eps"], "seed": cfg["seed"], "taxonomy": _info(ATTACK_INFO[method])}
    return out, write_report(out, rows, meta)


def cmd_defend(cfg, lists):
    name = cfg["defense"]["name"]
    if name is None:
        raise UsageError("defend needs --defense")
    if name not in C.IMAGE_DEFENSES:
        raise UsageError(f"{name!r} is not an image defense; choose from {sorted(C.IMAGE_DEFENSES)}")
    train, test = image_data(cfg["dataset"], cfg["seed"])
    params = _params(cfg["defense"])
    eps = cfg["budget"]["eps"]
    meta_extra = {}
    if name == "thermometer":
        levels = params.pop("levels")
        clf = PreprocessedClassifier(ThermometerEncoder(levels), MLPClassifier(**params, n_classes=train.num_classes, seed=cfg["seed"]))
        clf.fit(train.images, train.labels)
        network = clf.classifier_.network_
        model = clf
        meta_extra["preprocessor"] = {"name": "thermometer", "levels": levels}
    elif name == "none":
        clf = MLPClassifier(**params, n_classes=train.num_classes, seed=cfg["seed"]).fit(train.images, train.labels)
        network = model = clf.network_
    else:
        clf = AdversarialMLPClassifier(**params, eps=eps, n_classes=train.num_classes, seed=cfg["seed"]).fit(train.images, train.labels)
        network = model = clf.network_
    out = _out(cfg)
    meta = {"dataset": cfg["dataset"], "data_seed": cfg["seed"], "model": cfg["model"], "defense": cfg["defense"], **meta_extra}
    path = save_network(network, out / f"model-{name}.advb", meta=meta)
    _, rows = _image_eval(cfg, model, test, "pgd", {"attack": "pgd", "model": name})
    rdir = _out(cfg, f"defend-{name}")
    info = {"command": "defend", "defense": name, "checkpoint": path.name, "eps": eps, "seed": cfg["seed"], "taxonomy": _info(DEFENSE_INFO[name]) if name in DEFENSE_INFO else None}
    return rdir, write_report(rdir, rows, info)


def cmd_evaluate(cfg, lists):
    methods = [_canon(m) for m in lists["attacks"]] or ([cfg["attack"]["method"]] if cfg["attack"]["method"] else [])
    if not methods:
        raise UsageError("evaluate needs --attack_method (comma list allowed)")
    bad = [m for m in methods if m not in C.IMAGE_ATTACKS]
    if bad:
        raise UsageError(f"unknown image attack(s) {bad}; choose from {sorted(C.IMAGE_ATTACKS)}")
    names = lists["models"] or [cfg["model"]["checkpoint"] or cfg["model"]["name"]]
    loaded = [(n, *load_model(checkpoint_path(n, cfg["output_dir"]))) for n in names]
    rows = []
    for name, model, header in loaded:
        test = _test_split(cfg, header)
        for method in methods:
            rows += _image_eval(cfg, model, test, method, {"attack": method, "model": Path(name).stem})[1]
    out = _out(cfg, "evaluate")
    meta = {"command": "evaluate", "attacks": methods, "models": [Path(n).stem for n in names], "eps": cfg["budget"]["eps"], "seed": cfg["seed"]}
    return out, write_report(out, rows, meta, group_by=("attack", "model"))


def _graph_budget(cfg, graph) -> int:
    flips = cfg["budget"]["flips"]
    return int(flips) if flips is not None else int(cfg["budget"]["fraction"] * graph.adj.n_edges)


def _info(info):
    return {k: (v.value if hasattr(v, "value") else [g.value for g in v]) for k, v in info.__dict__.items()}


def cmd_graph_attack(cfg, lists):
    method = cfg["attack"]["method"]
    if method not in C.GRAPH_ATTACKS:
        raise UsageError(f"graph-attack needs --attack_method from {sorted(C.GRAPH_ATTACKS)}")
    graph = graph_data(cfg)
    seed = cfg["seed"]
    n_flips = _graph_budget(cfg, graph)
    budget = GraphBudget(n_flips)
    params = _params(cfg["attack"])
    fn = C.GRAPH_ATTACKS[method]
    gcn_cfg = _params(C.registered_defaults("model", "gcn"))
    victim = GCN(**gcn_cfg, seed=seed).fit(graph)
    meta = {"command": "graph-attack", "attack": method, "budget": n_flips, "seed": seed, "taxonomy": _info(ATTACK_INFO[method])}
    if method in ("fga", "nettack", "ig_attack", "rnd"):
        surrogate = GCN(**{**gcn_cfg, "with_relu": False}, seed=seed).fit(graph)
        node = params.pop("target_node")
        if node is None:
            pred = surrogate.predict(graph)
            node = next((int(u) for u in graph.idx_test if pred[u] == graph.labels[u]), int(graph.idx_test[0]))
        target = TargetSpec.for_node(graph, int(node))
        if method == "rnd":
            result = fn(graph, target, budget, seed=seed)
        else:
            result = fn(graph, surrogate, target, budget, **params)
        meta["target_node"] = int(node)
        meta["target_misclassified"] = bool(surrogate.predict(result.graph)[node] != target.label)
    elif method == "metattack":
        result = fn(graph, budget, **params, seed=seed)
    elif method in ("pgd_topology", "minmax_topology"):
        result = fn(graph, victim, budget, **params, seed=seed)
    else:
        result = fn(graph, budget, seed=seed)
    result.validate(graph, n_flips)
    retrained = GCN(**gcn_cfg, seed=seed).fit(result.graph)
    preds = {
        "clean": victim.predict(graph),
        "evasion": victim.predict(result.graph),
        "poisoned": retrained.predict(result.graph),
    }
    out = _out(cfg, f"graph-{method}")
    result.save(out / "graph")
    meta["flips"] = [list(map(int, f)) for f in result.flips]
    meta["shortfall"] = int(result.shortfall)
    return out, write_report(out, node_rows(graph, preds, graph.idx_test), meta, group_by=("model",))


def cmd_graph_defend(cfg, lists):
    names = [_canon(d) for d in lists["defenses"]] or [cfg["defense"]["name"] or "gcn_jaccard"]
    bad = [d for d in names if d not in C.GRAPH_DEFENSES]
    if bad:
        raise UsageError(f"unknown graph defense(s) {bad}; choose from {sorted(C.GRAPH_DEFENSES)}")
    graph = graph_data(cfg)
    seed = cfg["seed"]
    preds = {}
    for name in ["gcn"] + [d for d in names if d != "gcn"]:
        params = _params(cfg["defense"]) if cfg["defense"]["name"] == name else _params(C.registered_defaults("defense", name))
        if name == "adversarial":
            model = graph_adversarial_train(graph, budget=_graph_budget(cfg, graph), seed=seed, **params)
            preds[name] = model.predict(graph)
        else:
            est = C.GRAPH_DEFENSES[name](**params, seed=seed).fit(graph)
            preds[name] = est.predict(graph)
    out = _out(cfg, "graph-defend")
    meta = {"command": "graph-defend", "defenses": names, "baseline": "gcn", "seed": seed, "dataset": cfg["dataset"]}
    return out, write_report(out, node_rows(graph, preds, graph.idx_test), meta, group_by=("model",))


HANDLERS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "defend": cmd_defend,
    "evaluate": cmd_evaluate,
    "graph-attack": cmd_graph_attack,
    "graph-defend": cmd_graph_defend,
}


def run(argv=None) -> tuple[Path, dict]:
    args = build_parser().parse_args(argv)
    cfg, lists = resolve_args(args)
    start = time.perf_counter()
    out, summary = HANDLERS[args.command](cfg, lists)
    C.write_resolved(_public(cfg), out)
    (Path(out) / "timing.json").write_text(json.dumps({"command": args.command, "wall_seconds": time.perf_counter() - start}, indent=2) + "\n")
    return Path(out), summary


def main(argv=None) -> int:
    try:
        out, summary = run(argv)
    except SystemExit as exc:
        # argparse reports usage errors with exit status 2
        return int(exc.code or 0)
    except (C.ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"advbench: configuration error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"advbench: runtime failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"advbench: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    aggregates = summary.get("aggregates", {k: v for k, v in summary.items() if not isinstance(v, list)})
    print(json.dumps({"output": str(out), "aggregates": aggregates}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
