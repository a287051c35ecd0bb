"""Experiment configuration files (TOML).

See docs/config.md for the full schema.  Relative paths are resolved against
the directory holding the config file, except the dataset path, which is
resolved against ``$BASISGUARD_DATA`` when that variable is set.
"""

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..attacks import AttackSpec
from ..defenses import DefenseSpec
from ..errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SETTINGS = ("gray", "black", "white-fga", "white-bpda")
DEFAULT_EPSILONS = (0.005, 0.01, 0.02, 0.04, 0.06, 0.09)
DEFAULT_DEFENSES = ("none", "lowpass", "pca_rows", "pca_patches", "jpeg", "wavelet_approx", "soft_threshold")


@dataclass
class DatasetConfig:
    path: Path
    format: str = "idx"
    split: str = "t10k"
    n_eval: int = 200
    offset: int = 0


@dataclass
class TrainSection:
    split: str = "train"
    epochs: int = 10
    batch: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    seed_a: int = 0
    seed_b: int = 1


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    model_a: Path
    model_b: Path = None
    attacks: list = field(default_factory=list)
    defenses: list = field(default_factory=list)
    settings: tuple = ("gray",)
    out: Path = Path("results")
    seed: int = 0
    threads: int = 1
    benign_tolerance: float = 0.25
    train: TrainSection = field(default_factory=TrainSection)
    source: Path = None


def _expand_attack(entry):
    entry = dict(entry)
    method = entry.get("method", "fgsm")
    sweep_key = "magnitude_scale" if method == "cw" else "epsilon"
    if method == "ifgsm" and "budget" in entry:
        budget = entry.pop("budget")
        iters = int(entry.get("iterations", 10))
        budgets = budget if isinstance(budget, list) else [budget]
        entry["epsilon"] = [b / iters for b in budgets]
    values = entry.pop(sweep_key, None)
    if values is None:
        values = list(DEFAULT_EPSILONS) if sweep_key == "epsilon" else [1.0]
    if not isinstance(values, list):
        values = [values]
    if entry.get("inner") is not None:
        entry["inner"] = AttackSpec.from_dict(entry["inner"]).to_dict()
    specs = []
    for v in values:
        try:
            specs.append(AttackSpec.from_dict({**entry, sweep_key: float(v)}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad attack entry {entry!r}: {exc}") from exc
    return specs


def _defense(entry):
    if isinstance(entry, str):
        return DefenseSpec(entry)
    return DefenseSpec.from_dict(entry)


def parse_config(data, base_dir=Path("."), env=None):
    env = os.environ if env is None else env
    base_dir = Path(base_dir)
    try:
        ds = dict(data["dataset"])
        models = dict(data["models"])
    except KeyError as exc:
        raise ConfigError(f"config is missing the [{exc.args[0]}] section") from exc

    data_root = Path(env["BASISGUARD_DATA"]) if env.get("BASISGUARD_DATA") else base_dir
    ds_path = Path(ds.pop("path", "."))
    dataset = DatasetConfig(path=ds_path if ds_path.is_absolute() else data_root / ds_path, **ds)
    if dataset.format not in ("idx", "npz"):
        raise ConfigError(f"unknown dataset format {dataset.format!r}")
    if dataset.n_eval < 1:
        raise ConfigError("dataset.n_eval must be positive")

    def model_path(key):
        value = models.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    if "a" not in models:
        raise ConfigError("[models] needs at least the `a` checkpoint")

    attacks = []
    for entry in data.get("attacks", [{"method": "fgsm"}]):
        attacks.extend(_expand_attack(entry))
    defenses = [_defense(e) for e in data.get("defenses", DEFAULT_DEFENSES)]
    names = [d.name for d in defenses]
    if len(set(names)) != len(names):
        raise ConfigError("defense labels must be unique; set `label` to disambiguate")

    exp = dict(data.get("experiment", {}))
    settings = exp.get("settings", ["gray"])
    settings = [settings] if isinstance(settings, str) else list(settings)
    for s in settings:
        if s not in SETTINGS:
            raise ConfigError(f"unknown setting {s!r}; choose from {SETTINGS}")

    train = dict(data.get("train", {}))
    seeds = train.pop("seeds", {})
    try:
        train_section = TrainSection(seed_a=seeds.get("a", 0), seed_b=seeds.get("b", 1), **train)
    except TypeError as exc:
        raise ConfigError(f"bad [train] section: {exc}") from exc

    out = Path(data.get("out", "results"))
    return ExperimentConfig(
        dataset=dataset,
        model_a=model_path("a"),
        model_b=model_path("b"),
        attacks=attacks,
        defenses=defenses,
        settings=tuple(settings),
        out=out if out.is_absolute() else base_dir / out,
        seed=int(data.get("seed", 0)),
        threads=int(data.get("threads", 1)),
        benign_tolerance=float(exp.get("benign_tolerance", 0.25)),
        train=train_section,
    )


def load_config(path, env=None):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(data, base_dir=path.parent, env=env)
    cfg.source = path
    return cfg


def check_files(cfg, need_b=False):
    """Raise :class:`ConfigError` when a referenced input file is missing."""
    if not cfg.dataset.path.exists():
        raise ConfigError(f"dataset path {cfg.dataset.path} does not exist")
    if cfg.model_a is None or not cfg.model_a.exists():
        raise ConfigError(f"model A checkpoint {cfg.model_a} does not exist")
    if need_b and (cfg.model_b is None or not cfg.model_b.exists()):
        raise ConfigError(f"black-box runs need model B; {cfg.model_b} does not exist")
