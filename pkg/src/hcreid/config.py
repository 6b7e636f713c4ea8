"""INI run configuration.

One ``[section]`` per component; command-line flags override file values and
the merged result is written next to every output as ``config.ini``.

    [data]   synthetic dataset spec
    [split]  train_fraction, seed
    [model]  p, branch_hidden, embed_dim, leaky_slope
    [train]  schedule, sampler, loss kind
    [hc]     lambda, metric, margin_alpha, constraint
    [eval]   shot, trials, probe_modality, exclusion_pairs, gallery_cameras, seed
"""

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from hcreid.data import SynthSpec
from hcreid.evaluation import EvalProtocol
from hcreid.losses import HcConfig
from hcreid.network import ModelConfig
from hcreid.trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSection:
    p: int = 6
    branch_hidden: int = 32
    embed_dim: int = 64
    leaky_slope: float = 0.01

    def build(self, input_shape, n_classes):
        return ModelConfig(self.p, tuple(input_shape), self.branch_hidden, self.embed_dim, n_classes, self.leaky_slope)


@dataclass(frozen=True)
class SplitSection:
    train_fraction: float = 0.75
    seed: int = 42


@dataclass(frozen=True)
class RunConfig:
    data: SynthSpec = SynthSpec()
    split: SplitSection = SplitSection()
    model: ModelSection = ModelSection()
    train: TrainConfig = TrainConfig(seed=42)
    eval: EvalProtocol = EvalProtocol(seed=42)
    extra: dict = field(default_factory=dict)

    @property
    def hc(self):
        return self.train.hc

    def with_seed(self, seed):
        """Apply one seed to every stochastic stage."""
        return replace(
            self,
            data=replace(self.data, seed=seed),
            split=replace(self.split, seed=seed),
            train=replace(self.train, seed=seed),
            eval=replace(self.eval, seed=seed),
        )

    def set(self, section, key, value):
        """Return a copy with one ``section.key`` replaced (value given as text)."""
        return self.update(section, {key: value})

    def update(self, section, values):
        """Replace several keys of one section at once, validating the result."""
        if section == "hc":
            hc = _set_fields(self.train.hc, "hc", values)
            return replace(self, train=replace(self.train, hc=hc))
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        obj = getattr(self, section)
        return replace(self, **{section: _set_fields(obj, section, values)})

    def to_ini(self):
        cp = _parser()
        for section in SECTIONS_ORDER:
            obj = self.train.hc if section == "hc" else getattr(self, section)
            cp[section] = {_ini_key(section, f.name): _fmt(getattr(obj, f.name)) for f in _fields(section, obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_ini())


SECTIONS = ("data", "split", "model", "train", "eval")
SECTIONS_ORDER = ("data", "split", "model", "train", "hc", "eval")
# the dataclass field is ``lam`` since ``lambda`` is reserved
_ALIASES = {("hc", "lambda"): "lam"}


def _ini_key(section, name):
    for (sec, alias), target in _ALIASES.items():
        if sec == section and target == name:
            return alias
    return name


def _fields(section, obj):
    return [f for f in fields(obj) if not (section == "train" and f.name == "hc")]


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(":".join(str(v) for v in pair) for pair in value)
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text, current, name):
    text = text.strip()
    if isinstance(current, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    try:
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, str):
            return text
        if name.endswith("exclusion_pairs"):
            if not text:
                return ()
            return tuple(tuple(int(v) for v in pair.split(":")) for pair in text.split(","))
        if current is None or isinstance(current, tuple):
            if not text:
                return None
            return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    raise ConfigError(f"{name}: unsupported value type")


def _set_fields(obj, section, values):
    names = {f.name for f in _fields(section, obj)}
    changes = {}
    for key, value in values.items():
        key = _ALIASES.get((section, key), key)
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        changes[key] = _parse(value, getattr(obj, key), f"{section}.{key}") if isinstance(value, str) else value
    try:
        return replace(obj, **changes)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {', '.join(changes)}: {exc}") from None


def _parser():
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as L and T are case-sensitive
    return cp


def parse_ini(text, base=None):
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = base or RunConfig()
    for section in cp.sections():
        if section not in SECTIONS_ORDER:
            raise ConfigError(f"unknown section [{section}]")
        cfg = cfg.update(section, dict(cp[section]))
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_ini(fh.read())
