"""Run configuration: one JSON document per run, validated field by field.

A config names an ``experiment`` and overrides any subset of that
experiment's defaults. Unknown keys, wrong types and out-of-range values are
reported as :class:`~pct.errors.ConfigError` carrying a dotted field path
(``transfer.optimizer.lr``) before any computation starts. Nested ``seed``
fields are not configurable: every random stream derives from the top-level
``seed``.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from pct.datasets import PointSet, gen_gaussian_clusters, gen_two_moons
from pct.errors import ConfigError, InvalidArgument
from pct.loss import LossConfig
from pct.nn import OptimizerSpec
from pct.transfer import StylizedConfig, SupervisedConfig, TransferConfig

EXPERIMENTS = (
    "toy2d", "toy3d", "stylized", "ablate_batch", "ablate_width", "rate_check", "probe_theorems", "retrieve",
)


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "two_moons"
    n: int = 700
    noise: float = 0.1  # two_moons only
    k: int = 5  # gaussian_clusters only
    dims: int = 2
    spread: float = 0.15
    centers_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("two_moons", "gaussian_clusters"):
            raise InvalidArgument(f"unknown dataset kind {self.kind!r}")
        if self.n < 2:
            raise InvalidArgument("n must be >= 2")
        if self.noise < 0 or self.spread < 0:
            raise InvalidArgument("noise and spread must be nonnegative")
        if self.kind == "gaussian_clusters" and (self.k < 1 or self.k > self.n or self.dims not in (2, 3)):
            raise InvalidArgument("gaussian_clusters needs 1 <= k <= n and dims in {2, 3}")
        if self.kind == "two_moons" and self.dims != 2:
            raise InvalidArgument("two_moons is two-dimensional")

    def build(self, seed: int) -> PointSet:
        if self.kind == "two_moons":
            return gen_two_moons(self.n, self.noise, seed)
        return gen_gaussian_clusters(self.k, self.n, self.dims, self.spread, self.centers_scale, seed)


@dataclass(frozen=True)
class ToyOptions:
    student_dim: int = 2
    snapshots: bool = True  # SVG at epoch 0 and at every checkpoint

    def __post_init__(self):
        if self.student_dim < 1:
            raise InvalidArgument("student_dim must be >= 1")


@dataclass(frozen=True)
class StylizedOptions:
    train_fraction: float = 0.5
    hidden: int = 20
    features: int = 20
    student_hidden: int | None = None
    teacher: SupervisedConfig = SupervisedConfig(epochs=200, batch_size=32)
    probe: SupervisedConfig = SupervisedConfig(epochs=20, batch_size=32)

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise InvalidArgument("train_fraction must lie in (0, 1)")
        if self.hidden < 1 or self.features < 1 or (self.student_hidden is not None and self.student_hidden < 1):
            raise InvalidArgument("layer widths must be >= 1")


@dataclass(frozen=True)
class AblateBatchOptions:
    batch_sizes: tuple[int, ...] = (3, 16, 64)
    threshold: float = 0.9
    student_dim: int = 2

    def __post_init__(self):
        if not self.batch_sizes or min(self.batch_sizes) < 2:
            raise InvalidArgument("batch_sizes must be a nonempty list of sizes >= 2")


@dataclass(frozen=True)
class AblateWidthOptions:
    widths: tuple[int, ...] = (2, 5, 10, 20)
    stylized: StylizedOptions = StylizedOptions()

    def __post_init__(self):
        if not self.widths or min(self.widths) < 1:
            raise InvalidArgument("widths must be a nonempty list of widths >= 1")


@dataclass(frozen=True)
class RateCheckOptions:
    distortion: str = "swirl"
    batch_sizes: tuple[int, ...] = (4, 8, 16, 32, 64, 128, 256)
    reps: int = 500

    def __post_init__(self):
        from pct.experiments import DISTORTIONS

        if self.distortion not in DISTORTIONS:
            raise InvalidArgument(f"distortion must be one of {sorted(DISTORTIONS)}")
        if len(set(self.batch_sizes)) < 4 or list(self.batch_sizes) != sorted(self.batch_sizes):
            raise InvalidArgument("need at least 4 distinct batch sizes in ascending order")
        if min(self.batch_sizes) < 2:
            raise InvalidArgument("batch sizes must be >= 2")
        if self.reps < 2:
            raise InvalidArgument("reps must be >= 2")


@dataclass(frozen=True)
class ProbeTheoremOptions:
    n_sets: int = 50
    points: int = 20
    dims: int = 2
    eps_rank: tuple[float, ...] = (0.05, 0.15)
    eps_order: float = 0.05
    noise_levels: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.8)

    def __post_init__(self):
        if self.n_sets < 1 or self.points < 3 or self.dims < 1:
            raise InvalidArgument("need n_sets >= 1, points >= 3, dims >= 1")
        if len(self.eps_rank) != 2 or not 0 < self.eps_rank[0] < self.eps_rank[1]:
            raise InvalidArgument("eps_rank must be [eps1, eps2] with 0 < eps1 < eps2")
        if self.eps_order <= 0:
            raise InvalidArgument("eps_order must be positive")


@dataclass(frozen=True)
class RetrieveOptions:
    k: int = 10
    stylized: StylizedOptions = StylizedOptions()

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("k must be >= 1")


_STYLIZED_TRANSFER = {
    "batch_size": 64, "epochs": 40, "optimizer": {"kind": "adam", "lr": 1e-3},
    "loss": {"tau_teacher": 0.1, "tau_student": 0.3}, "checkpoint_every": 4,
}
_TOY_TRANSFER = {"batch_size": 64, "epochs": 800, "optimizer": {"kind": "adam", "lr": 0.1},
                 "loss": {"tau_teacher": 0.1, "tau_student": 0.1}, "checkpoint_every": 100, "init_scale": 10.0}
_MOONS_800 = {"kind": "two_moons", "n": 800, "noise": 0.1}

# experiment -> (options class, default dataset, default transfer); None = section not used
_SECTIONS = {
    "toy2d": (ToyOptions, {"kind": "two_moons", "n": 700, "noise": 0.1}, _TOY_TRANSFER),
    "toy3d": (ToyOptions, {"kind": "gaussian_clusters", "n": 1000, "k": 5, "dims": 3, "spread": 0.15,
                           "centers_scale": 1.0}, _TOY_TRANSFER),
    "stylized": (StylizedOptions, _MOONS_800, _STYLIZED_TRANSFER),
    "ablate_batch": (AblateBatchOptions, {"kind": "two_moons", "n": 700, "noise": 0.1},
                     dict(_TOY_TRANSFER, checkpoint_every=0)),
    "ablate_width": (AblateWidthOptions, _MOONS_800, _STYLIZED_TRANSFER),
    "rate_check": (RateCheckOptions, {"kind": "gaussian_clusters", "n": 2000, "k": 5, "dims": 2,
                                      "spread": 0.3, "centers_scale": 2.0}, None),
    "probe_theorems": (ProbeTheoremOptions, None, None),
    "retrieve": (RetrieveOptions, _MOONS_800, _STYLIZED_TRANSFER),
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int = 0
    output_dir: str = ""
    dataset: DatasetConfig | None = None
    transfer: TransferConfig | None = None
    options: object = field(default=None)

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed, "output_dir": self.output_dir}
        for name in ("dataset", "transfer", "options"):
            value = getattr(self, name)
            if value is not None:
                out[name] = _strip_seeds(dataclasses.asdict(value))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def stylized_config(self, opts: StylizedOptions | None = None) -> StylizedConfig:
        """Assemble the study config from dataset, transfer and stylized options."""
        opts = opts or self.options
        return StylizedConfig(
            n=self.dataset.n, noise=self.dataset.noise, train_fraction=opts.train_fraction,
            hidden=opts.hidden, features=opts.features, student_hidden=opts.student_hidden,
            teacher=opts.teacher, probe=opts.probe, transfer=self.transfer,
        )


def _strip_seeds(d):
    if isinstance(d, dict):
        return {k: _strip_seeds(v) for k, v in d.items() if k != "seed"}
    if isinstance(d, (list, tuple)):
        return [_strip_seeds(v) for v in d]
    return d


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(inner, value, path)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is tuple:
        (inner, _) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return tuple(_coerce(inner, v, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    raise ConfigError(path, f"unsupported field type {tp!r}")


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected an object")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls) if f.init and f.name != "seed"]
    for key in data:
        if key == "seed":
            raise ConfigError(_join(path, key), "not configurable here; set the top-level seed")
        if key not in names:
            raise ConfigError(_join(path, key), f"unknown key (expected one of: {', '.join(names)})")
    kwargs = {k: _coerce(hints[k], v, _join(path, k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except InvalidArgument as exc:
        raise ConfigError(path or "<root>", str(exc)) from None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON document and materialize all defaults."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    opt_cls, ds_default, tr_default = _SECTIONS[exp]
    allowed = {"experiment", "seed", "output_dir", "options"}
    allowed |= {"dataset"} if ds_default is not None else set()
    allowed |= {"transfer"} if tr_default is not None else set()
    for key in data:
        if key not in allowed:
            raise ConfigError(key, f"unknown key for experiment {exp!r} (expected one of: {', '.join(sorted(allowed))})")
    seed = _coerce(int, data.get("seed", 0), "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    output_dir = _coerce(str, data.get("output_dir", f"runs/{exp}"), "output_dir")
    dataset = transfer = None
    if ds_default is not None:
        dataset = _build(DatasetConfig, _merge(ds_default, _section(data, "dataset")), "dataset")
    if tr_default is not None:
        transfer = _build(TransferConfig, _merge(tr_default, _section(data, "transfer")), "transfer")
    options = _build(opt_cls, _section(data, "options"), "options")
    cfg = RunConfig(exp, seed, output_dir, dataset, transfer, options)
    _cross_check(cfg)
    return cfg


def _section(data: dict, key: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(key, "expected an object")
    return value


def _cross_check(cfg: RunConfig) -> None:
    ds, tr, opts = cfg.dataset, cfg.transfer, cfg.options
    if cfg.experiment in ("stylized", "ablate_width", "retrieve"):
        if ds.kind != "two_moons":
            raise ConfigError("dataset.kind", "the stylized pipeline uses two_moons")
        if tr.checkpoint_every == 0:
            raise ConfigError("transfer.checkpoint_every", "the stylized pipeline needs checkpoints")
        n_train = round(ds.n * (opts.stylized if hasattr(opts, "stylized") else opts).train_fraction)
        if tr.batch_size > n_train:
            raise ConfigError("transfer.batch_size", f"exceeds the {n_train} training points")
    elif tr is not None:
        sizes = opts.batch_sizes if cfg.experiment == "ablate_batch" else (tr.batch_size,)
        if max(sizes) > ds.n:
            raise ConfigError("options.batch_sizes" if cfg.experiment == "ablate_batch" else "transfer.batch_size",
                              f"batch size exceeds the {ds.n} points")
    if cfg.experiment == "rate_check" and max(opts.batch_sizes) > ds.n:
        raise ConfigError("options.batch_sizes", f"batch size exceeds the {ds.n} points")
    if cfg.experiment == "toy2d" and ds.dims != 2:
        raise ConfigError("dataset.dims", "toy2d transfers from a 2D teacher")
    if cfg.experiment == "toy3d" and ds.dims != 3:
        raise ConfigError("dataset.dims", "toy3d transfers from a 3D teacher")


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read, merge top-level ``overrides`` (e.g. from the command line) and validate."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if overrides and isinstance(data, dict):
        data = dict(data, **overrides)
    return parse_config(data)


def default_config(experiment: str) -> RunConfig:
    return parse_config({"experiment": experiment})


__all__ = [
    "EXPERIMENTS", "DatasetConfig", "RunConfig", "ToyOptions", "StylizedOptions", "AblateBatchOptions",
    "AblateWidthOptions", "RateCheckOptions", "ProbeTheoremOptions", "RetrieveOptions",
    "parse_config", "load_config", "default_config", "LossConfig", "OptimizerSpec",
]
