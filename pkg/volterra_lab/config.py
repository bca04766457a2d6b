from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Optional, Union

from .debug import debug_log
from .errors import ConfigError

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios")
SEED_ENV = "VOLTERRA_SEED"

FORCING_KINDS = ("zero", "builtin", "example", "custom-expr")
NOISE_KINDS = ("none", "brownian", "stable")
FAMILIES = ("power", "logtype", "custom")
ANALYSIS_MODES = ("auto", "deterministic", "envelope", "brownian", "stable")
ENVELOPE_ROLES = ("gamma", "gamma_plus", "gamma_minus")


@dataclass(frozen=True)
class KernelSpec:
    atoms: tuple[tuple[float, float], ...] = ()
    density: str = "none"
    cutoff: float = math.inf


@dataclass(frozen=True)
class NonlinearitySpec:
    family: str = "power"
    beta: float = 0.5
    # custom family only
    f: str = ""
    phi: str = ""
    phi_prime: str = ""
    K: Optional[float] = None
    eta: Optional[float] = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ForcingSpec:
    kind: str = "zero"
    name: str = ""
    params: tuple[float, ...] = ()
    target: str = ""
    expr: str = ""


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    sigma: str = "1"
    alpha: float = 1.5
    scale: float = 1.0
    skew: float = 0.0
    seed: int = 0
    paths: int = 1


@dataclass(frozen=True)
class GridSpec:
    T: float = 100.0
    dt: float = 0.01


@dataclass(frozen=True)
class RunSpec:
    # a number, or "auto": target(0) for example forcings, else 1
    psi: Union[float, str] = 1.0
    snapshots: int = 512
    # 0 = os.cpu_count()
    workers: int = 0


@dataclass(frozen=True)
class AnalysisSpec:
    mode: str = "auto"
    envelope: str = ""
    envelope_role: str = "gamma"
    envelope_clock: Optional[float] = None
    tolerance: float = 0.05
    # L-estimation horizon for analytic functions; None = max(T, 1e6)
    horizon: Optional[float] = None
    infinity_threshold: float = 1e3
    zero_threshold: float = 1e-3


@dataclass(frozen=True)
class EnsembleSpec:
    required_fraction: float = 0.95
    merged_checks: tuple[str, ...] = ("x_over_sigma_limsup", "x_over_sigma_liminf")


@dataclass(frozen=True)
class ConvergenceSpec:
    levels: int = 4


@dataclass(frozen=True)
class RunConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    run: RunSpec = field(default_factory=RunSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    convergence: ConvergenceSpec = field(default_factory=ConvergenceSpec)

    @property
    def stochastic(self) -> bool:
        return self.noise.kind != "none"

    @property
    def l_horizon(self) -> float:
        h = self.analysis.horizon
        return float(h) if h is not None else max(self.grid.T, 1e6)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, noise=replace(self.noise, seed=int(seed)))


# ---- value coercion -------------------------------------------------------
# Coercers receive the raw right-hand side (comments stripped).


def _json(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def _text(raw: str) -> str:
    if raw.startswith('"'):
        try:
            v = json.loads(raw)
        except ValueError as e:
            raise ConfigError(f"bad quoted string: {raw}") from e
        return str(v)
    return raw


def _real(raw: str) -> float:
    v = _json(raw)
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {raw}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {raw}") from None


def _opt_real(raw: str) -> Optional[float]:
    return None if raw in {"", "none", "null"} else _real(raw)


def _int(raw: str) -> int:
    v = _json(raw)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {raw}")
    return v


def _psi(raw: str) -> Union[float, str]:
    return "auto" if _text(raw) == "auto" else _real(raw)


def _reals(raw: str) -> tuple[float, ...]:
    v = _json(raw)
    if not isinstance(v, list):
        raise ConfigError(f"expected a list of numbers, got {raw}")
    return tuple(_real(json.dumps(x)) for x in v)


def _names(raw: str) -> tuple[str, ...]:
    v = _json(raw)
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ConfigError(f"expected a list of names, got {raw}")
    return tuple(v)


def _atoms(raw: str) -> tuple[tuple[float, float], ...]:
    v = _json(raw)
    if not isinstance(v, list) or not all(isinstance(a, list) and len(a) == 2 for a in v):
        raise ConfigError(f"kernel.atoms must be [[location, mass], ...], got {raw}")
    return tuple((_real(json.dumps(a)), _real(json.dumps(m))) for a, m in v)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def coerce(raw: str) -> str:
        v = _text(raw)
        if v not in options:
            raise ConfigError(f"expected one of {', '.join(options)}; got {v!r}")
        return v

    return coerce


_COERCE: dict[str, dict[str, Callable[[str], Any]]] = {
    "kernel": {"atoms": _atoms, "density": _text, "cutoff": _real},
    "nonlinearity": {
        "family": _choice(FAMILIES),
        "beta": _real,
        "f": _text,
        "phi": _text,
        "phi_prime": _text,
        "K": _opt_real,
        "eta": _opt_real,
        "flags": _names,
    },
    "forcing": {
        "kind": _choice(FORCING_KINDS),
        "name": _text,
        "params": _reals,
        "target": _text,
        "expr": _text,
    },
    "noise": {
        "kind": _choice(NOISE_KINDS),
        "sigma": _text,
        "alpha": _real,
        "scale": _real,
        "skew": _real,
        "seed": _int,
        "paths": _int,
    },
    "grid": {"T": _real, "dt": _real},
    "run": {"psi": _psi, "snapshots": _int, "workers": _int},
    "analysis": {
        "mode": _choice(ANALYSIS_MODES),
        "envelope": _text,
        "envelope_role": _choice(ENVELOPE_ROLES),
        "envelope_clock": _opt_real,
        "tolerance": _real,
        "horizon": _opt_real,
        "infinity_threshold": _real,
        "zero_threshold": _real,
    },
    "ensemble": {"required_fraction": _real, "merged_checks": _names},
    "convergence": {"levels": _int},
}


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def _check(cfg: RunConfig) -> None:
    if not (cfg.grid.T > 0 and math.isfinite(cfg.grid.T)):
        raise ConfigError(f"grid.T must be a positive time, got {cfg.grid.T!r}")
    if not (cfg.grid.dt > 0 and cfg.grid.dt < cfg.grid.T):
        raise ConfigError(f"grid.dt must lie in (0, T), got {cfg.grid.dt!r}")
    if cfg.noise.paths < 1:
        raise ConfigError(f"noise.paths must be >= 1, got {cfg.noise.paths}")
    if not 0 <= cfg.noise.seed < 2**64:
        raise ConfigError(f"noise.seed must be an unsigned 64-bit integer, got {cfg.noise.seed}")
    if cfg.run.snapshots < 2:
        raise ConfigError(f"run.snapshots must be >= 2, got {cfg.run.snapshots}")
    if cfg.run.workers < 0:
        raise ConfigError(f"run.workers must be >= 0, got {cfg.run.workers}")
    if cfg.convergence.levels < 3:
        raise ConfigError(f"convergence.levels must be >= 3, got {cfg.convergence.levels}")
    if not cfg.analysis.tolerance > 0:
        raise ConfigError(f"analysis.tolerance must be positive, got {cfg.analysis.tolerance!r}")
    if not 0 < cfg.ensemble.required_fraction <= 1:
        raise ConfigError(f"ensemble.required_fraction must lie in (0, 1], got {cfg.ensemble.required_fraction!r}")
    if cfg.forcing.kind == "builtin" and not cfg.forcing.name:
        raise ConfigError("forcing.kind = builtin needs forcing.name")
    if cfg.forcing.kind == "example" and not (cfg.forcing.name or cfg.forcing.target):
        raise ConfigError("forcing.kind = example needs forcing.name or forcing.target")
    if cfg.forcing.kind == "custom-expr" and not cfg.forcing.expr:
        raise ConfigError("forcing.kind = custom-expr needs forcing.expr")
    if cfg.nonlinearity.family == "custom" and not (cfg.nonlinearity.f and cfg.nonlinearity.phi):
        raise ConfigError("nonlinearity.family = custom needs nonlinearity.f and nonlinearity.phi")


def parse(text: str, source: str = "<config>") -> RunConfig:
    sections: dict[str, dict[str, Any]] = {name: {} for name in _COERCE}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        section, _, name = key.partition(".")
        coerce = _COERCE.get(section, {}).get(name)
        if coerce is None:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if name in sections[section]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            sections[section][name] = coerce(value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{lineno}: {key}: {e}") from None

    defaults = RunConfig()
    built = {name: replace(getattr(defaults, name), **values) for name, values in sections.items()}
    cfg = RunConfig(**built)
    _check(cfg)
    return cfg


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "inf" if value == math.inf else repr(value)
    if isinstance(value, str):
        plain = value and value == value.strip() and '"' not in value and "#" not in value
        return value if plain and value not in {"none", "null"} else json.dumps(value)
    if isinstance(value, tuple):
        return json.dumps(_listify(value))
    raise TypeError(f"cannot render {value!r}")


def _listify(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


def serialize(cfg: RunConfig) -> str:
    lines = []
    for section in _COERCE:
        spec = getattr(cfg, section)
        for f in fields(spec):
            lines.append(f"{section}.{f.name} = {_render(getattr(spec, f.name))}")
    return "\n".join(lines) + "\n"


def load(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    cfg = parse(text, source=path)
    debug_log(f"config: loaded {path} (noise={cfg.noise.kind}, T={cfg.grid.T:g}, dt={cfg.grid.dt:g})")
    return cfg


def scenario_ids() -> list[str]:
    return sorted(n[:-4] for n in os.listdir(SCENARIO_DIR) if n.endswith(".cfg"))


def load_scenario(example_id: str) -> RunConfig:
    path = os.path.join(SCENARIO_DIR, f"{example_id}.cfg")
    if not os.path.isfile(path):
        raise ConfigError(f"unknown example {example_id!r}; known: {', '.join(scenario_ids())}")
    return load(path)


def resolve_seed(cfg: RunConfig, flag: Optional[int] = None, environ: Optional[dict] = None) -> RunConfig:
    """--seed beats VOLTERRA_SEED beats noise.seed from the file."""
    if flag is not None:
        return cfg.with_seed(flag)
    env = os.environ if environ is None else environ
    raw = (env.get(SEED_ENV) or "").strip()
    if raw:
        try:
            seed = int(raw, 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
        if not 0 <= seed < 2**64:
            raise ConfigError(f"{SEED_ENV} must be an unsigned 64-bit integer, got {raw!r}")
        return cfg.with_seed(seed)
    return cfg
