"""Run configuration: the central defaults registry and config resolution.

A config is a JSON object with the sections ``dataset``, ``model``,
``attack``, ``defense``, ``budget``, ``seed`` and ``output_dir``. Each
algorithm section names the algorithm (``name``, or ``method`` for attacks)
and may override any registered parameter; anything else is rejected.
Perturbation sizes live in ``budget`` (``eps`` for image attacks and
adversarial training, ``flips`` or ``fraction`` of edges for graphs).
"""

from __future__ import annotations

import copy
import inspect
import json
from pathlib import Path

from . import attacks, defenses
from .data.graphs import make_sbm
from .data.images import make_blobs
from .graph import defenses as graph_defenses
from .graph import targeted, untargeted
from .graph.gcn import GCN
from .models import CNNClassifier, MLPClassifier


class ConfigError(ValueError):
    pass


# parameters supplied by the harness rather than the config
_RUNTIME = {
    "model", "x", "y", "X", "graph", "surrogate", "target", "budget", "box", "values", "candidates",
    "s_init", "X_eval", "y_eval", "eval_eps", "seed", "n_classes", "perturbation_source", "eps",
}

IMAGE_ATTACKS = {
    "fgsm": attacks.fgsm,
    "pgd": attacks.pgd,
    "bpda": attacks.bpda,
    "lbfgs": attacks.lbfgs_attack,
    "cw": attacks.cw_l2,
    "deepfool": attacks.deepfool,
    "universal": attacks.universal_perturbation,
    "one_pixel": attacks.one_pixel,
    "nattack": attacks.nattack,
}

GRAPH_ATTACKS = {
    "fga": targeted.fga,
    "nettack": targeted.nettack,
    "ig_attack": targeted.ig_attack,
    "rnd": targeted.rnd,
    "metattack": untargeted.metattack,
    "pgd_topology": untargeted.pgd_topology_attack,
    "minmax_topology": untargeted.minmax_topology_attack,
    "dice": untargeted.dice,
}

IMAGE_DEFENSES = {
    "none": MLPClassifier,
    "fgsm": defenses.AdversarialMLPClassifier,
    "fast": defenses.AdversarialMLPClassifier,
    "pgd": defenses.AdversarialMLPClassifier,
    "trades": defenses.AdversarialMLPClassifier,
    "thermometer": defenses.ThermometerEncoder,
}

GRAPH_DEFENSES = {
    "gcn": GCN,
    "gcn_jaccard": graph_defenses.GCNJaccard,
    "gcn_svd": graph_defenses.GCNSVD,
    "adversarial": graph_defenses.graph_adversarial_train,
}

MODELS = {"mlp": MLPClassifier, "cnn": CNNClassifier, "gcn": GCN}

DATASETS = {"blobs": make_blobs, "mnist": None, "sbm": make_sbm, "path": None}

# harness-level extras and defaults that differ from the library signatures
_EXTRA = {
    ("dataset", "blobs"): {"n_per_class": 50, "classes": 3, "separation": 0.6, "noise": 0.1, "test_fraction": 0.3, "image_shape": [1, 8, 8]},
    ("dataset", "mnist"): {"train_limit": 1000, "test_limit": 500},
    ("dataset", "path"): {"path": None, "train_limit": 1000, "test_limit": 500},
    ("dataset", "sbm"): {"block_sizes": [20, 20], "p_in": 0.15, "p_out": 0.02, "feature_dim": 48, "feature_p": 0.02, "feature_signal": 0.25},
    ("model", "mlp"): {"hidden_layer_sizes": [32]},
    ("defense", "none"): {"hidden_layer_sizes": [32]},
    ("defense", "thermometer"): {"hidden_layer_sizes": [32], "epochs": 20},
    ("defense", "adversarial"): {"perturbation_source": "pgd_topology", "rounds": 10},
    ("attack", "fga"): {"target_node": None},
    ("attack", "nettack"): {"target_node": None},
    ("attack", "ig_attack"): {"target_node": None},
    ("attack", "rnd"): {"target_node": None},
}

def _signature_defaults(fn) -> dict:
    target = fn.__init__ if inspect.isclass(fn) else fn
    out = {}
    for name, p in inspect.signature(target).parameters.items():
        if name in ("self",) or name in _RUNTIME or p.default is inspect.Parameter.empty:
            continue
        out[name] = list(p.default) if isinstance(p.default, tuple) else p.default
    return out


def _table(section: str) -> dict:
    return {
        "dataset": DATASETS,
        "model": MODELS,
        "attack": {**IMAGE_ATTACKS, **GRAPH_ATTACKS},
        "defense": {**IMAGE_DEFENSES, **GRAPH_DEFENSES},
    }[section]


def registered_defaults(section: str, name: str) -> dict:
    """Every tunable parameter of ``name`` with its default value."""
    table = _table(section)
    if name not in table:
        raise ConfigError(f"unknown {section} {name!r}; choose from {sorted(table)}")
    fn = table[name]
    params = _signature_defaults(fn) if fn is not None else {}
    if section == "defense" and name in ("fgsm", "fast", "pgd", "trades"):
        params["flavor"] = name
        params["hidden_layer_sizes"] = [32]
    params.update(_EXTRA.get((section, name), {}))
    return params


SECTIONS = ("dataset", "model", "attack", "defense", "budget", "seed", "output_dir")
BUDGET_KEYS = {"eps": 0.1, "flips": None, "fraction": 0.05}
_NAME_KEY = {"dataset": "name", "model": "name", "attack": "method", "defense": "name"}
_DEFAULT_NAMES = {"dataset": "blobs", "model": "mlp", "attack": None, "defense": None}


def _resolve_section(section: str, raw) -> dict:
    key = _NAME_KEY[section]
    raw = {key: raw} if isinstance(raw, str) else dict(raw or {})
    name = raw.pop(key, _DEFAULT_NAMES[section])
    checkpoint = raw.pop("checkpoint", None) if section == "model" else None
    if name is None:
        if raw:
            raise ConfigError(f"{section} parameters given without a {key}: {sorted(raw)}")
        return {key: None}
    name = str(name).lower().replace("-", "_")
    params = registered_defaults(section, name)
    unknown = sorted(set(raw) - set(params))
    if unknown:
        raise ConfigError(f"unknown {section} parameter(s) for {name!r}: {unknown}; allowed: {sorted(params)}")
    params.update(raw)
    out = {key: name, **{k: params[k] for k in sorted(params)}}
    if section == "model":
        out["checkpoint"] = checkpoint
    return out


def resolve(raw: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge ``overrides`` (flag values; None means unset) into ``raw`` and fill defaults."""
    cfg = copy.deepcopy(raw or {})
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(cfg) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s) {unknown}; allowed: {list(SECTIONS)}")
    for section in ("dataset", "model", "attack", "defense", "budget"):
        if isinstance(cfg.get(section), str):
            cfg[section] = {_NAME_KEY.get(section, "name"): cfg[section]}
        cfg.setdefault(section, {})
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in dotted:
            section, key = dotted.split(".", 1)
            cfg[section][key] = value
        else:
            cfg[dotted] = value
    budget = dict(cfg["budget"] or {})
    bad = sorted(set(budget) - set(BUDGET_KEYS))
    if bad:
        raise ConfigError(f"unknown budget key(s) {bad}; allowed: {sorted(BUDGET_KEYS)}")
    out = {s: _resolve_section(s, cfg[s]) for s in ("dataset", "model", "attack", "defense")}
    out["budget"] = {**BUDGET_KEYS, **budget}
    try:
        out["seed"] = int(cfg.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {cfg.get('seed')!r}") from None
    out["output_dir"] = str(cfg.get("output_dir", "advbench-out"))
    return out


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def write_resolved(cfg: dict, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    path = d / "config.resolved.json"
    path.write_text(dumps(cfg))
    return path
