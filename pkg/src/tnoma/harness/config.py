"""Experiment configuration: fields, bounds checks, flat key=value files."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass

SCENARIOS = ("svd-ber", "ae-train", "ae-eval", "user-selection-ber", "rates", "ber-theory",
             "complexity")
LOSSES = ("ce", "mse-identity", "mse-tanh", "ce+q")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    scenario: str = "svd-ber"
    K: int = 2
    N: int = 512
    rolloff: float = 1.0
    span: int = 7
    tau_design: float = 0.5
    power_per_user: float = 1.0
    variant: str = "AE5"
    skips: tuple = ()
    loss: str = "ce"
    alpha: float = 0.0
    kappa: float = 1.0
    use_pa: bool = False
    use_t: bool = False
    pa_hidden: tuple = (32, 32, 32)
    t_hidden: tuple = (8, 8)
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    train_snr_db: float = 30.0
    train_frames: int = 131072
    valid_frames: int = 512
    test_frames: int = 131072
    batch: int = 32
    epochs: int = 20
    lr: float = 3e-3
    timing_width: float = 0.0
    csi_variance: float = 0.0
    shared_csi: bool = False
    waterfill: str = "strict"
    rate_draws: int = 10000
    theory_draws: int = 1000000
    sweep_key: str = ""
    sweep_values: tuple = ()
    seeds: tuple = (0,)
    workers: int = 1
    output_dir: str = "results"
    checkpoint: str = ""

    def __post_init__(self):
        self.validate()

    # -- checks ----------------------------------------------------------------
    def scenarios(self):
        return tuple(s.strip() for s in self.scenario.split(",") if s.strip())

    def validate(self):
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

        scen = self.scenarios()
        need(len(scen) > 0 and all(s in SCENARIOS for s in scen), "scenario",
             f"each entry must be one of {', '.join(SCENARIOS)}")
        need(1 <= self.K <= 8, "K", "must lie in [1, 8]")
        need(self.N > self.span and self.N <= 65536, "N", "must exceed span and be <= 65536")
        need(0.0 <= self.rolloff <= 1.0, "rolloff", "must lie in [0, 1]")
        need(self.span >= 1 and self.span % 2 == 1, "span", "must be a positive odd integer")
        need(0.0 <= self.tau_design < 1.0, "tau_design", "must lie in [0, 1)")
        need(self.power_per_user > 0, "power_per_user", "must be positive")
        need(self.variant.upper() in {f"AE{i}" for i in range(1, 10)}, "variant",
             "must be AE1..AE9")
        need(all(s in ("a", "b", "c") for s in self.skips), "skips", "entries must be a, b or c")
        need(self.loss in LOSSES, "loss", f"must be one of {', '.join(LOSSES)}")
        need(self.alpha >= 0, "alpha", "must be nonnegative")
        need(self.kappa > 0, "kappa", "must be positive")
        need(len(self.pa_hidden) == 3 and min(self.pa_hidden) >= 1, "pa_hidden",
             "needs three positive sizes")
        need(len(self.t_hidden) == 2 and min(self.t_hidden) >= 1, "t_hidden",
             "needs two positive sizes")
        need(len(self.snr_db) >= 1 and all(-20 <= s <= 80 for s in self.snr_db), "snr_db",
             "needs at least one value in [-20, 80] dB")
        need(-20 <= self.train_snr_db <= 80, "train_snr_db", "must lie in [-20, 80] dB")
        need(self.batch >= 2, "batch", "must be >= 2")
        need(self.train_frames >= self.batch, "train_frames", "must be >= batch")
        need(self.valid_frames >= 1, "valid_frames", "must be >= 1")
        need(self.test_frames >= 1, "test_frames", "must be >= 1")
        need(1 <= self.epochs <= 1000, "epochs", "must lie in [1, 1000]")
        need(0 < self.lr < 1, "lr", "must lie in (0, 1)")
        need(0.0 <= self.timing_width and self.timing_width * self.tau_design < 2.0,
             "timing_width", "must be >= 0 with |eps| < 1 symbol")
        need(0.0 <= self.csi_variance <= 10.0, "csi_variance", "must lie in [0, 10]")
        need(self.waterfill in ("strict", "printed"), "waterfill", "must be strict or printed")
        need(self.rate_draws >= 1, "rate_draws", "must be >= 1")
        need(self.theory_draws >= 1, "theory_draws", "must be >= 1")
        need(len(self.seeds) >= 1 and min(self.seeds) >= 0, "seeds",
             "needs at least one nonnegative seed")
        need(1 <= self.workers <= 256, "workers", "must lie in [1, 256]")
        if self.sweep_key:
            keys = self.sweep_keys()
            need(all(k in FIELD_TYPES and k not in _NOT_SWEEPABLE for k in keys), "sweep_key",
                 "must name config fields")
            need(len(self.sweep_values) >= 1, "sweep_values", "needs at least one value")
            for v in self.sweep_values:
                try:
                    self._swept(v)
                except ConfigError as e:
                    raise ConfigError(f"sweep_values: {e}") from None
        if "ae-eval" in scen:
            need(bool(self.checkpoint), "checkpoint", "ae-eval needs a checkpoint path")

    # -- derived quantities ----------------------------------------------------
    @property
    def timing_width_symbols(self):
        """Timing-error width in symbol units (``timing_width`` is a fraction of tau_design)."""
        return self.timing_width * self.tau_design

    def sweep_keys(self):
        return tuple(k.strip() for k in self.sweep_key.split(",") if k.strip())

    def _swept(self, value):
        """(label, config) for one sweep value; several keys take ``a/b`` values."""
        keys = self.sweep_keys()
        parts = value.split("/") if isinstance(value, str) else [value]
        if len(parts) != len(keys):
            raise ConfigError(f"{value!r} needs {len(keys)} '/'-separated parts")
        changes = {k: parse_value(k, p) for k, p in zip(keys, parts)}
        cfg = dataclasses.replace(self, sweep_key="", sweep_values=(), **changes)
        label = ",".join(f"{k}={format_value(v)}" for k, v in changes.items())
        return label, cfg

    def sweep(self):
        """Concrete configs for each sweep value, tagged with a label."""
        if not self.sweep_key:
            return [("", self)]
        return [self._swept(v) for v in self.sweep_values]

    def to_dict(self):
        return {f.name: _jsonable(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def config_hash(self):
        """Short content hash of every field except the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


_NOT_SWEEPABLE = ("sweep_key", "sweep_values", "scenario", "seeds", "output_dir", "workers")
FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()
_TUPLE_ITEM = {"skips": str, "pa_hidden": int, "t_hidden": int, "snr_db": float,
               "sweep_values": str, "seeds": int}


def parse_value(key, text):
    """Parse one field value from text (lists are comma separated)."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"{key}: unknown configuration key")
    default = getattr(_DEFAULTS, key)
    if not isinstance(text, str):
        return tuple(text) if isinstance(default, tuple) else text
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError
            return low in ("1", "true", "yes", "on")
        if isinstance(default, tuple):
            item = _TUPLE_ITEM[key]
            sep = ";" if key == "sweep_values" else ","
            parts = [p.strip() for p in text.split(sep) if p.strip()]
            if key == "snr_db" and len(parts) == 1 and ":" in parts[0]:
                lo, hi, step = (float(x) for x in parts[0].split(":"))
                n = int(round((hi - lo) / step)) + 1
                return tuple(lo + i * step for i in range(n))
            return tuple(item(p) for p in parts)
        if isinstance(default, int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_kv_text(text):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_config(base=None, overrides=None):
    """Apply textual overrides to a base config (default: the standard settings)."""
    values = (base or ExperimentConfig()).to_dict()
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, text)
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return ExperimentConfig(**values)


def config_to_kv_text(cfg):
    def text(k):
        v = getattr(cfg, k)
        return ";".join(v) if k == "sweep_values" else format_value(v)
    return "".join(f"{k} = {text(k)}\n" for k in FIELD_TYPES)
