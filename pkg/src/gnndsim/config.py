"""Experiment configuration: a flat key = value text format with strict
validation, echoed into every output for reproducibility."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

KINDS = ("gmi-sweep", "scatter", "viterbi-ber", "ldpc-ber", "train-net")
RECEIVERS = ("no-sic", "sic")
KNOWN_METHODS = ("gnnd", "cl", "mi", "ml")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    users: int = 1
    antennas: int = 1
    constellation: str = "qpsk"
    power: float = 1.0
    snr_db: tuple[float, ...] = (10.0,)
    receiver: str = "no-sic"
    methods: tuple[str, ...] = ("gnnd", "cl", "mi")
    pilot_power: str = "perfect"
    draws: int = 1
    samples: int = 200_000
    blocks: int = 400
    min_errors: int = 100
    info_bits: int = 128
    sic_order: str = "natural"
    net: bool = False
    net_samples: int = 100_000
    net_epochs: int = 20
    net_batch: int = 500
    net_lr: float = 1e-3
    llr_max: float = 30.0
    bp_iters: int = 50
    out: str = ""
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"unknown receiver {self.receiver!r}")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if not self.methods and self.kind in ("gmi-sweep", "viterbi-ber", "ldpc-ber"):
            raise ConfigError("method list must not be empty")
        if not self.snr_db:
            raise ConfigError("snr grid must not be empty")
        positive = ("users", "antennas", "power", "draws", "samples", "blocks",
                    "min_errors", "info_bits", "net_samples", "net_epochs",
                    "net_batch", "llr_max", "bp_iters", "threads")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.constellation != "qpsk":
            raise ConfigError("only the qpsk constellation is wired into experiments")
        pilot_power_value(self)  # validate the spec early

    def user_order(self) -> list[int]:
        if self.sic_order == "natural":
            return list(range(self.users))
        try:
            order = [int(v) for v in self.sic_order.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad sic_order {self.sic_order!r}") from exc
        if sorted(order) != list(range(self.users)):
            raise ConfigError("sic_order must be a permutation of all users")
        return order


def pilot_power_value(cfg: ExperimentConfig) -> float | str:
    """Resolve the pilot spec: 'perfect', a multiple like '16P', or a number."""
    spec = cfg.pilot_power.strip()
    if spec == "perfect":
        return "perfect"
    if spec.lower().endswith("p"):
        try:
            mult = float(spec[:-1]) if spec[:-1] else 1.0
        except ValueError as exc:
            raise ConfigError(f"bad pilot_power {spec!r}") from exc
        if mult <= 0:
            raise ConfigError("pilot power multiple must be positive")
        return mult * cfg.power
    try:
        value = float(spec)
    except ValueError as exc:
        raise ConfigError(f"bad pilot_power {spec!r}") from exc
    if value <= 0:
        raise ConfigError("pilot power must be positive")
    return value


_BOOL = {"on": True, "off": False, "true": True, "false": False,
         "yes": True, "no": False}


def _parse_value(name: str, kind, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw.lower() not in _BOOL:
            raise ValueError(f"bad boolean {raw!r}")
        return _BOOL[raw.lower()]
    if kind == "tuple[float, ...]":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if kind == "tuple[str, ...]":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse key = value lines; '#' starts a comment; unknown keys are errors."""
    spec = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip().replace("-", "_"), val.strip()
        if key not in spec:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, spec[key], val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    if "kind" not in values:
        raise ConfigError("missing required key 'kind'")
    if "seed" not in values:
        raise ConfigError("missing required key 'seed' (runs must be reproducible)")
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


PAPER_SCALE_OVERRIDES = dict(
    draws=50,
    samples=200_000,
    blocks=5000,
    net_samples=400_000,
    net_epochs=100,
    net_batch=2000,
)


def apply_paper_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Switch desk-scale sampling defaults to the full-scale settings."""
    return replace(cfg, **PAPER_SCALE_OVERRIDES)


def config_echo(cfg: ExperimentConfig) -> list[str]:
    """Stable one-line-per-field echo of the configuration."""
    out = []
    for f in sorted(fields(ExperimentConfig), key=lambda f: f.name):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        out.append(f"{f.name} = {v}")
    return out
