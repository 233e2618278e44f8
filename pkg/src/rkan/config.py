"""Experiment config files: flat ``key = value`` lines grouped under ``[section]`` headers.

Keys written before any header are filed under their home section, so a
three-line file such as::

    target = F2
    layer = jacobi-rkan
    K = 2

is a complete regression config.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .experiments import TARGETS, NetworkConfig, OptimizerConfig
from .layers import LAYER_KINDS, SQUASHES
from .mappings import KINDS as MAPPING_KINDS

EXPERIMENTS = ("regression", "lane-emden", "elliptic-pde", "gradcheck")

SECTIONS = {
    "experiment": ("experiment", "target", "w", "seeds", "output"),
    "network": ("layer", "K", "p", "mapping", "squash", "architecture", "mode"),
    "optimizer": ("optimizer", "epochs", "lr", "history"),
}
HOME = {key: section for section, keys in SECTIONS.items() for key in keys}

# per-experiment defaults applied when a key is absent
DEFAULTS = {
    "regression": {"K": 2, "architecture": [1, 10, 1], "epochs": 50, "history": 10},
    "lane-emden": {"K": 6, "architecture": [1, 10, 10, 1], "epochs": 1000, "history": 50},
    "elliptic-pde": {"K": 4, "architecture": [2, 10, 10, 1], "epochs": 500, "history": 10},
    "gradcheck": {"K": 3, "architecture": [2, 3], "epochs": 0, "history": 10},
}


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ExperimentConfig:
    experiment: str = "regression"
    target: str | None = None
    w: int | None = None
    network: NetworkConfig = field(default_factory=NetworkConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: list = field(default_factory=lambda: [0])
    output: str | None = None

    def canonical(self) -> dict:
        """Everything that determines the numbers, in a stable form."""
        d = asdict(self)
        d.pop("seeds")
        d.pop("output")
        d["network"]["architecture"] = list(d["network"]["architecture"])
        return d

    def hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _int(text, key, line):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}", line) from None


def _float(text, key, line):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}", line) from None


def _int_list(text, key, line):
    body = text.strip().removeprefix("[").removesuffix("]")
    items = [t for t in body.replace(",", " ").split() if t]
    return [_int(t, key, line) for t in items]


def _choice(text, key, options, line):
    if text not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}; got {text!r}", line)
    return text


def read_pairs(text):
    """``{key: (value, line)}`` after syntax checks; duplicate and misplaced keys are errors."""
    pairs = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in HOME:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if section is not None and HOME[key] != section:
            raise ConfigError(f"key {key!r} belongs in [{HOME[key]}], not [{section}]", lineno)
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r} (first on line {pairs[key][1]})", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        pairs[key] = (value, lineno)
    return pairs


def parse_config(text: str) -> ExperimentConfig:
    pairs = read_pairs(text)

    def get(key, convert, default=None):
        if key not in pairs:
            return default
        value, line = pairs[key]
        return convert(value, key, line)

    experiment = get("experiment", lambda v, k, l: _choice(v, k, EXPERIMENTS, l), "regression")
    defaults = DEFAULTS[experiment]

    target = get("target", lambda v, k, l: _choice(v, k, tuple(TARGETS), l))
    if experiment == "regression" and target is None:
        raise ConfigError("regression needs a 'target' key")
    w = get("w", _int)
    if experiment == "lane-emden":
        if w is None:
            raise ConfigError("lane-emden needs a 'w' key")
        if not 0 <= w <= 4:
            raise ConfigError(f"w must be in 0..4, got {w}", pairs["w"][1])
    for key, wanted in (("target", "regression"), ("w", "lane-emden")):
        if key in pairs and experiment != wanted:
            raise ConfigError(f"{key!r} only applies to {wanted} experiments", pairs[key][1])

    layer = get("layer", lambda v, k, l: _choice(v, k, LAYER_KINDS, l), "jacobi-rkan")
    K = get("K", _int, defaults["K"])
    p = get("p", _int, 2)
    for key, value in (("K", K), ("p", p)):
        if value < 0:
            raise ConfigError(f"{key} must be non-negative, got {value}", pairs[key][1])
    mapping = get("mapping", lambda v, k, l: _choice(v, k, MAPPING_KINDS, l))
    squash = get("squash", lambda v, k, l: _choice(v, k, SQUASHES, l))
    architecture = get("architecture", _int_list, defaults["architecture"])
    if len(architecture) < 2 or any(a <= 0 for a in architecture):
        raise ConfigError(f"architecture needs at least 2 positive widths, got {architecture}",
                          pairs.get("architecture", (None, None))[1])
    mode = get("mode", lambda v, k, l: _choice(v, k, ("activation", "kan"), l), "activation")

    name = get("optimizer", lambda v, k, l: _choice(v, k, ("lbfgs", "adam"), l), "lbfgs")
    epochs = get("epochs", _int, defaults["epochs"])
    if epochs < 0:
        raise ConfigError(f"epochs must be non-negative, got {epochs}", pairs["epochs"][1])
    lr = get("lr", _float, 1e-3)
    if not lr > 0:
        raise ConfigError(f"lr must be positive, got {lr}", pairs["lr"][1])
    history = get("history", _int, defaults["history"])
    if history < 1:
        raise ConfigError(f"history must be at least 1, got {history}", pairs["history"][1])

    seeds = get("seeds", _int_list, [0])
    if not seeds:
        raise ConfigError("seeds must not be empty", pairs["seeds"][1])
    output = get("output", lambda v, k, l: v)

    return ExperimentConfig(
        experiment=experiment, target=target, w=w,
        network=NetworkConfig(layer, K, p, mapping, squash, tuple(architecture), mode),
        optimizer=OptimizerConfig(name, epochs, lr, history),
        seeds=seeds, output=output,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
