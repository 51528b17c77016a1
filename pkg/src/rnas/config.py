"""Run configuration: profiles, YAML loading with strict schema checks, and dumping.

A run config is a nested mapping with sections ``data``, ``supernet``,
``search``, ``discrete``, ``train``, ``evaluate`` plus top-level ``seed``
and ``out``. Loading merges a file over a named profile; any key the
schema does not know is rejected with its dotted path.
"""

import copy
import re
from dataclasses import asdict, dataclass, field

import yaml

from .evaltrain import TrainProtocol
from .perturb import PerturbSpec, adversarial_training_pgd, search_pgd
from .search import SearchConfig
from .supernet import PRIMITIVES, SupernetConfig

PROFILES = ("desk", "paper")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-3``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)?(?:\.[0-9_]*)?[eE][-+]?[0-9]+$|^[-+]?[0-9][0-9_]*\.[0-9_]*$"
               r"|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` holds the offending dotted key when known."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass
class DataConfig:
    source: str = "synthetic"
    kind: str = "robust-tradeoff"
    n: int = 512
    test_n: int = 500
    classes: int = 2
    image_shape: tuple = (3, 8, 8)
    path: str = None
    subset: int = None
    test_subset: int = None

    def __post_init__(self):
        self.image_shape = tuple(int(v) for v in self.image_shape)
        if self.source not in ("synthetic", "cifar10"):
            raise ConfigError(f"data.source must be 'synthetic' or 'cifar10', got {self.source!r}", "data.source")
        if self.source == "cifar10" and not self.path:
            raise ConfigError("data.path is required for cifar10", "data.path")


@dataclass
class DiscreteConfig:
    cells: int = 4
    channels: int = 8
    auxiliary: bool = False


@dataclass
class EvaluateConfig:
    epsilon: float = 0.031
    pgd_steps: int = 20
    batch_size: int = 100
    modes: tuple = ("standard", "adversarial")

    def __post_init__(self):
        self.modes = tuple(self.modes)
        bad = [m for m in self.modes if m not in ("standard", "adversarial")]
        if bad or not self.modes:
            raise ConfigError(f"evaluate.modes must be a non-empty subset of standard/adversarial, got {self.modes}",
                              "evaluate.modes")


@dataclass
class RunConfig:
    profile: str = "desk"
    seed: int = 0
    out: str = "runs"
    data: DataConfig = field(default_factory=DataConfig)
    supernet: SupernetConfig = field(default_factory=SupernetConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    discrete: DiscreteConfig = field(default_factory=DiscreteConfig)
    train: TrainProtocol = field(default_factory=TrainProtocol)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)


def desk_profile():
    """Desk-scale defaults: minutes on one CPU core."""
    return {
        "profile": "desk",
        "seed": 0,
        "out": "runs",
        "data": asdict(DataConfig()),
        "supernet": {"channels": 8, "cells": 4, "nodes": 3, "stem_multiplier": 3, "op_names": list(PRIMITIVES)},
        "search": {**_search_defaults(), "epochs": 10, "warmup": 3},
        "discrete": {"cells": 4, "channels": 8, "auxiliary": False},
        "train": {**_train_defaults(), "epochs": 30},
        "evaluate": asdict(EvaluateConfig()),
    }


def full_scale_profile():
    """Full-scale settings on CIFAR-10 (multi-day on a GPU; documented, not exercised in tests)."""
    prof = desk_profile()
    prof["profile"] = "paper"
    prof["data"] = {**prof["data"], "source": "cifar10", "kind": None, "n": None, "test_n": None, "classes": 10,
                    "image_shape": [3, 32, 32], "path": "data/cifar-10-batches-bin"}
    prof["supernet"] = {**prof["supernet"], "channels": 16, "cells": 8, "nodes": 4}
    prof["search"] = _search_defaults()
    prof["discrete"] = {"cells": 20, "channels": 36, "auxiliary": True}
    prof["train"] = {k: v for k, v in _plain(asdict(TrainProtocol.full_scale())).items() if k != "seed"}
    return prof


def _search_defaults():
    out = _plain(asdict(SearchConfig(perturb=search_pgd())))
    del out["seed"]
    return out


def _train_defaults():
    out = _plain(asdict(TrainProtocol(attack=adversarial_training_pgd())))
    del out["seed"]
    return out


def _plain(obj):
    """Tuples to lists so YAML output stays free of python-specific tags."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def profile_dict(name):
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {PROFILES}", "profile")
    return desk_profile() if name == "desk" else full_scale_profile()


def _merge(base, override, prefix=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{path}'", path)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{path}' must be a mapping", path)
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def build(raw):
    """Turn a fully merged dict into a validated :class:`RunConfig`."""
    try:
        seed = int(raw["seed"])
        search = dict(raw["search"], seed=seed)
        search["perturb"] = PerturbSpec(**search["perturb"])
        train = dict(raw["train"], seed=seed)
        train["attack"] = PerturbSpec(**train["attack"])
        supernet = dict(raw["supernet"])
        supernet["op_names"] = tuple(supernet["op_names"])
        data = DataConfig(**raw["data"])
        supernet["in_channels"] = data.image_shape[0]
        supernet["num_classes"] = data.classes
        return RunConfig(
            profile=raw["profile"],
            seed=seed,
            out=str(raw["out"]),
            data=data,
            supernet=SupernetConfig(**supernet),
            search=SearchConfig(**search),
            discrete=DiscreteConfig(**raw["discrete"]),
            train=TrainProtocol(**train),
            evaluate=EvaluateConfig(**raw["evaluate"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def resolve(profile="desk", file_values=None, overrides=None):
    """Profile defaults, then file values, then command-line overrides (all strict)."""
    raw = profile_dict(profile)
    if file_values:
        if not isinstance(file_values, dict):
            raise ConfigError("config file must contain a mapping at top level")
        if "profile" in file_values and file_values["profile"] != profile:
            raw = profile_dict(file_values["profile"])
        raw = _merge(raw, file_values)
    if overrides:
        raw = _merge(raw, overrides)
    return build(raw)


def read_yaml(path):
    with open(path) as fh:
        try:
            data = yaml.load(fh, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return data or {}


def load(path, profile=None, overrides=None):
    values = read_yaml(path)
    return resolve(profile or values.get("profile", "desk"), values, overrides)


def to_dict(cfg):
    out = _plain(asdict(cfg))
    # derived from the data section on load
    del out["supernet"]["in_channels"], out["supernet"]["num_classes"]
    # the top-level seed drives every stage
    del out["search"]["seed"], out["train"]["seed"]
    return out


def dump(cfg):
    """Resolved config as YAML text; loading it back reproduces ``cfg`` exactly."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
