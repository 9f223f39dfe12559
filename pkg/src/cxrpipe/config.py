"""Experiment configuration: a flat `key = value` text format.

Dotted prefixes group the component sections, e.g.::

    manifest = corpus/manifest.csv
    output_dir = out
    k = 10
    global_seed = 7
    image_side = 512
    backend = builtin
    clahe.clip_factor = 2.0
    augment.max_rotation_deg = 20
    train.epochs = 100

Relative paths resolve against the config file's directory.  `backend`
is either `builtin` or the command line of an external bridge process.
"""

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .augmentation import AugmentParams
from .classifier import TrainConfig
from .errors import ConfigError
from .imaging import ClaheParams


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: Path
    output_dir: Path
    k: int
    global_seed: int
    image_side: int
    backend: str
    clahe: ClaheParams
    augment: AugmentParams
    train: TrainConfig
    config_digest: str


_INT_KEYS = {
    "k",
    "global_seed",
    "image_side",
    "clahe.tile_rows",
    "clahe.tile_cols",
    "clahe.n_bins",
    "train.epochs",
    "train.batch_size",
    "train.seed",
}
_FLOAT_KEYS = {
    "clahe.clip_factor",
    "augment.max_rotation_deg",
    "augment.shear_range",
    "augment.hflip_probability",
    "train.lr",
}
_STR_KEYS = {"manifest", "output_dir", "backend"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def parse_config(text: str, base_dir: Path, digest: str = "") -> ExperimentConfig:
    values: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        value = raw_value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"line {lineno}: invalid value {value!r} for {key!r}") from None

    for required in ("manifest", "output_dir"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")

    k = int(values.get("k", 10))
    global_seed = int(values.get("global_seed", 0))
    image_side = int(values.get("image_side", 512))
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if global_seed < 0:
        raise ConfigError("global_seed must be non-negative")
    if image_side < 1:
        raise ConfigError("image_side must be >= 1")

    def section(prefix, cls, defaults):
        kwargs = dict(defaults)
        for key, val in values.items():
            if key.startswith(prefix + "."):
                kwargs[key.split(".", 1)[1]] = val
        try:
            return cls(**kwargs)
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"invalid {prefix} settings: {exc}") from None

    train_defaults = {"seed": values.get("train.seed", global_seed)}
    return ExperimentConfig(
        manifest_path=(base_dir / str(values["manifest"])).resolve(),
        output_dir=(base_dir / str(values["output_dir"])).resolve(),
        k=k,
        global_seed=global_seed,
        image_side=image_side,
        backend=str(values.get("backend", "builtin")),
        clahe=section("clahe", ClaheParams, {}),
        augment=section("augment", AugmentParams, {}),
        train=section("train", TrainConfig, train_defaults),
        config_digest=digest,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config {path} is not UTF-8: {exc}") from exc
    return parse_config(text, base_dir=path.parent, digest=digest)
