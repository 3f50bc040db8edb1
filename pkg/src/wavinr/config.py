"""Run configuration: defaults, key=value config files, and flag overrides.

Data-dependent defaults (rank budgets, spectral rank) stay None until
`resolve_for_data` fills them from the tensor dims and the task kind.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Optional


class ConfigError(ValueError):
    """Unknown key or out-of-range value in a run configuration."""


@dataclass
class RunConfig:
    task: str = "fit"
    input: Optional[str] = None
    output: Optional[str] = None
    reference: Optional[str] = None
    mask_file: Optional[str] = None

    # rank / frequency budgets (None = derive from data)
    lambda_x: Optional[int] = None
    lambda_y: Optional[int] = None
    mu: float = 20.0
    omega_z: float = 2.0
    r_z: Optional[int] = None
    k: float = 3.0
    cadence: int = 500
    core_frac: float = 0.4

    # training
    iters: int = 5000
    lr: float = 1e-3
    lr_floor: Optional[float] = 1e-4
    weight_decay: float = 1e-5
    width: int = 256
    depth: int = 2
    seed: int = 0
    record_every: int = 50
    use_bias: bool = True

    # inpainting
    sr: Optional[float] = None

    # mixed-noise splitting scheme
    gamma1: float = 0.05
    gamma2: float = 0.01
    rho0: float = 0.1
    kappa: float = 1.05
    outer_iters: int = 100
    inner_iters: int = 20
    tv_eps: float = 1e-3
    noise_case: Optional[int] = None
    noise_seed: int = 1

    # comparison modes
    baseline: bool = False
    conventional: bool = False

    def validate(self):
        checks = [
            ("mu", self.mu > 0),
            ("omega_z", self.omega_z > 0),
            ("k", self.k > 0),
            ("cadence", self.cadence >= 1),
            ("core_frac", 0 < self.core_frac <= 1),
            ("iters", self.iters >= 1),
            ("lr", self.lr > 0),
            ("width", self.width >= 1),
            ("depth", self.depth >= 2),
            ("gamma1", self.gamma1 >= 0),
            ("gamma2", self.gamma2 >= 0),
            ("rho0", self.rho0 > 0),
            ("kappa", self.kappa > 1),
            ("outer_iters", self.outer_iters >= 1),
            ("inner_iters", self.inner_iters >= 1),
            ("record_every", self.record_every >= 1),
            ("weight_decay", self.weight_decay >= 0),
        ]
        if self.lambda_x is not None:
            checks.append(("lambda_x", self.lambda_x >= 4))
        if self.lambda_y is not None:
            checks.append(("lambda_y", self.lambda_y >= 4))
        if self.r_z is not None:
            checks.append(("r_z", self.r_z >= 1))
        if self.sr is not None:
            checks.append(("sr", 0 < self.sr <= 1))
        if self.noise_case is not None:
            checks.append(("noise_case", self.noise_case in (1, 2, 3, 4, 5)))
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"config value out of range: {key}={getattr(self, key)}")
        return self

    def resolve_for_data(self, dims):
        """Fill in data-dependent defaults: budgets 2n, spectral rank per task."""
        n1, n2, n3 = dims
        cfg = replace(self)
        if cfg.lambda_x is None:
            cfg.lambda_x = 2 * n1
        if cfg.lambda_y is None:
            cfg.lambda_y = 2 * n2
        if cfg.r_z is None:
            if cfg.task == "denoise":
                cfg.r_z = max(1, n3 // 2)
            elif cfg.task in ("inpaint", "cloudrm") and n3 == 3:
                cfg.r_z = min(10, n3)
            else:
                cfg.r_z = n3
        return cfg.validate()


_BOOL_KEYS = {"baseline", "conventional", "use_bias"}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key: {key}")
    if raw == "" or raw.lower() == "none":
        return None
    if key in _BOOL_KEYS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config value for {key} must be boolean, got {raw!r}")
    if key in ("task", "input", "output", "reference", "mask_file"):
        return raw
    if key in (
        "lambda_x", "lambda_y", "r_z", "cadence", "iters", "width", "depth",
        "seed", "record_every", "outer_iters", "inner_iters", "noise_case",
        "noise_seed",
    ):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"config value for {key} must be an integer, got {raw!r}") from exc
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config value for {key} must be numeric, got {raw!r}") from exc


def parse_config(path=None, overrides=None) -> RunConfig:
    """Read a flat key=value file, apply flag overrides on top, validate."""
    values = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, raw = line.split("=", 1)
                values[key.strip()] = _coerce(key.strip(), raw.strip())
    for key, val in (overrides or {}).items():
        if val is not None:
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key: {key}")
            values[key] = val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def dump_config(cfg: RunConfig, path):
    """Echo the fully resolved configuration, one key=value per line."""
    with open(path, "w") as fh:
        for f in fields(RunConfig):
            val = getattr(cfg, f.name)
            fh.write(f"{f.name}={'' if val is None else val}\n")
