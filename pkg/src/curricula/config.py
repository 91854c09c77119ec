"""Pipeline configuration: JSON file, --set overrides, environment seed.

The packaged default file encodes the six-task schedule endpoints and the
desk-scale dataset/model/train settings. Every module invariant is checked
at load time so CLI commands can fail early with exit code 2.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError
from .ingest import MALFORMED_POLICIES, DatasetSpec
from .schedule import MixSchedule, TaskKind, TaskSchedule
from .synth import SynthConfig

SEED_ENV_VAR = "CURRICULA_SEED"


def default_config_path() -> str:
    return str(resources.files("curricula").joinpath("configs/default.json"))


def _parse_set(expr: str) -> tuple[list[str], object]:
    key, sep, value = expr.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {expr!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.split("."), parsed


def _apply_set(raw: dict, path: list[str], value) -> None:
    node = raw
    for part in path[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
        if not isinstance(node, (dict, list)):
            raise ConfigError(f"cannot descend into {'.'.join(path)}")
    leaf = path[-1]
    if isinstance(node, list):
        node[int(leaf)] = value
    else:
        node[leaf] = value


@dataclass(frozen=True)
class PipelineConfig:
    raw: dict
    seed: int
    out_dir: str
    mix: MixSchedule
    datasets: tuple[DatasetSpec, ...]
    malformed_policy: str
    shuffle: bool
    n_samples: int
    workers: int
    seq_len: int
    flush_policy: str
    model: dict
    train: dict
    synth: SynthConfig
    synth_docs: dict
    ablate: dict

    def dataset_path(self, spec: DatasetSpec) -> str:
        """Dataset paths are resolved relative to the output directory."""
        if os.path.isabs(spec.path):
            return spec.path
        return os.path.join(self.out_dir, spec.path)

    def resolved_datasets(self) -> tuple[DatasetSpec, ...]:
        return tuple(
            DatasetSpec(d.name, self.dataset_path(d), d.task, d.size_weight)
            for d in self.datasets)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=False) + "\n"


def _build(raw: dict) -> PipelineConfig:
    try:
        sched_raw = raw["schedule"]
        tasks = tuple(
            TaskSchedule(TaskKind(t["task"]), float(t["alpha"]), float(t["beta"]))
            for t in sched_raw["tasks"])
        mix = MixSchedule(tasks=tasks, t_grow=int(sched_raw["t_grow"]))
        datasets = tuple(
            DatasetSpec(d["name"], d["path"], TaskKind(d["task"]),
                        d.get("size_weight"))
            for d in raw.get("datasets", []))
        sampler = raw.get("sampler", {})
        malformed = sampler.get("malformed_policy", "abort")
        if malformed not in MALFORMED_POLICIES:
            raise ConfigError(f"unknown malformed policy {malformed!r}")
        packer = raw.get("packer", {})
        synth_raw = dict(raw.get("synth", {}))
        docs = synth_raw.pop("docs", {})
        seed = int(raw.get("seed", 0))
        cfg = PipelineConfig(
            raw=raw,
            seed=seed,
            out_dir=str(raw.get("out_dir", "runs/desk")),
            mix=mix,
            datasets=datasets,
            malformed_policy=malformed,
            shuffle=bool(sampler.get("shuffle", False)),
            n_samples=int(sampler.get("n_samples", 0)),
            workers=int(sampler.get("workers", 1)),
            seq_len=int(packer.get("seq_len", 2048)),
            flush_policy=str(packer.get("flush_policy", "drop_tail")),
            model=dict(raw.get("model", {})),
            train=dict(raw.get("train", {})),
            synth=SynthConfig(seed=seed, **synth_raw),
            synth_docs=dict(docs),
            ablate=dict(raw.get("ablate", {})),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if cfg.n_samples < 0:
        raise ConfigError("sampler.n_samples must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("sampler.workers must be >= 1")
    if cfg.seq_len < 2:
        raise ConfigError("packer.seq_len must be >= 2")
    names = [d.name for d in cfg.datasets]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate dataset names")
    return cfg


def load_config(path: str | None = None, sets: list[str] = (),
                out_dir: str | None = None) -> PipelineConfig:
    """Load + validate a pipeline config.

    Precedence: file < --set overrides < CURRICULA_SEED < --out.
    """
    path = path or default_config_path()
    try:
        with open(path, encoding="utf-8") as fp:
            raw = json.load(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    raw = copy.deepcopy(raw)
    for expr in sets:
        key_path, value = _parse_set(expr)
        _apply_set(raw, key_path, value)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            raw["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
    if out_dir is not None:
        raw["out_dir"] = out_dir
    return _build(raw)
