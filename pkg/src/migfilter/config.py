"""Experiment configuration: defaults, file round-trip, session assembly.

Config files are flat TOML-style ``key = value`` text (comments with
``#``, strings quoted, lists in brackets).  The stdlib gained a TOML
reader only in 3.11, so a small subset parser lives here; it covers
exactly what the writer emits, which keeps round-trips lossless.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import PlantModel, cart_pendulum, slip
from .mig import FilterConfig
from .mpc import ScheduleController
from .objective import QuadraticObjective
from .sim_users import UserModel, preset_users

SYSTEMS = ("cart_pendulum", "slip")
MODES = ("off", "training", "assistance")

# the evaluation window must span the maneuver scale each system's users
# plan over (half a swing; one full hop cycle)
DEFAULT_HORIZON = {"cart_pendulum": 0.5, "slip": 1.4}

DEFAULT_CONTROLLER_HORIZON = {"cart_pendulum": 0.5, "slip": 1.4}

# filter (and assistance controller) objective weights per system
FILTER_WEIGHTS = {
    "cart_pendulum": {
        "q": [100.0, 10.0, 2.0, 4.0],
        "r": [0.3],
        "x_d": [0.0, 0.0, 0.0, 0.0],
    },
    "slip": {
        "q": [0.0, 0.0, 60.0, 2.0, 0.0],
        "r": [0.05, 0.05],
        "x_d": [0.0, 0.0, 1.25, 0.0, 0.0],
    },
}

SLIP_FALL_HEIGHT = 0.2  # z_m below this marks the trial fallen


@dataclass
class ExperimentConfig:
    """Everything one campaign needs; file + CLI flags build this."""

    system: str = "cart_pendulum"
    user: str = "noise"
    mode: str = "off"
    trials: int = 1
    duration: float = 30.0
    seed: int = 0
    out_dir: str = "out"
    jobs: int = 1
    horizon: float = 0.0  # 0 -> per-system default
    t_s: float = 0.01
    dt: float = 0.001
    threshold: float = 0.0
    gamma: float = 5.0
    controller_horizon: float = 0.0  # 0 -> per-system default
    init_jitter: float = 0.02
    filter_q: list[float] = field(default_factory=list)  # empty -> preset
    filter_r: list[float] = field(default_factory=list)
    filter_xd: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if self.trials < 1 or self.duration <= 0:
            raise ValueError("trials must be >= 1 and duration positive")

    def resolved_horizon(self) -> float:
        return self.horizon if self.horizon > 0 else DEFAULT_HORIZON[self.system]

    def resolved_controller_horizon(self) -> float:
        if self.controller_horizon > 0:
            return self.controller_horizon
        return DEFAULT_CONTROLLER_HORIZON[self.system]


def build_plant(system: str) -> PlantModel:
    if system == "cart_pendulum":
        return cart_pendulum()
    if system == "slip":
        return slip()
    raise KeyError(f"unknown system {system!r}")


def filter_objective(cfg: ExperimentConfig) -> QuadraticObjective:
    w = FILTER_WEIGHTS[cfg.system]
    q = cfg.filter_q or w["q"]
    r = cfg.filter_r or w["r"]
    xd = cfg.filter_xd or w["x_d"]
    angle = (0,) if cfg.system == "cart_pendulum" else ()
    P = None
    if cfg.system == "cart_pendulum":
        P = cart_upright_terminal(np.diag(q), np.diag(r))
    return QuadraticObjective(Q=np.diag(q), R=np.diag(r), x_d=np.array(xd, dtype=float),
                              terminal_P=P, angle_indices=angle)


def cart_upright_terminal(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Riccati terminal weight at the inverted equilibrium."""
    from .objective import lqr_terminal_weight
    plant = cart_pendulum()
    x_up = np.zeros(4)
    u0 = np.zeros(1)
    A = plant.jacobian(x_up, u0, 0)
    B = plant.input_jacobian(x_up, u0, 0)
    return lqr_terminal_weight(A, B, Q, R)


def build_filter_config(cfg: ExperimentConfig) -> FilterConfig | None:
    if cfg.mode == "off":
        return None
    return FilterConfig(t_s=cfg.t_s, horizon=cfg.resolved_horizon(), mode=cfg.mode,
                        threshold=cfg.threshold, dt=cfg.dt)


def build_controller(cfg: ExperimentConfig, obj: QuadraticObjective) -> ScheduleController | None:
    if cfg.mode != "assistance":
        return None
    return ScheduleController(objective=obj, horizon=cfg.resolved_controller_horizon(),
                              t_s=cfg.t_s, dt=cfg.dt, gamma=cfg.gamma)


def build_user(cfg: ExperimentConfig) -> UserModel:
    catalog = preset_users(cfg.system)
    if cfg.user not in catalog:
        raise KeyError(f"unknown user preset {cfg.user!r} for {cfg.system}; "
                       f"have {sorted(catalog)}")
    return catalog[cfg.user]


# ---------------------------------------------------------------------------
# flat TOML-style round trip
# ---------------------------------------------------------------------------

def dumps(cfg: ExperimentConfig) -> str:
    lines = ["# migfilter experiment configuration"]
    for f in dataclasses.fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ExperimentConfig:
    values = parse_flat_toml(text)
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def save(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text(encoding="utf-8"))


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def parse_flat_toml(text: str) -> dict:
    """Parse flat ``key = value`` lines: numbers, booleans, strings, lists."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, rhs = line.partition("=")
        out[key.strip()] = _parse_value(rhs.strip(), lineno)
    return out


def _parse_value(tok: str, lineno: int):
    if not tok:
        raise ValueError(f"line {lineno}: empty value")
    if tok.startswith('"'):
        if not tok.endswith('"') or len(tok) < 2:
            raise ValueError(f"line {lineno}: unterminated string")
        return tok[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if tok.startswith("["):
        if not tok.endswith("]"):
            raise ValueError(f"line {lineno}: unterminated list")
        inner = tok[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(p.strip(), lineno) for p in inner.split(",")]
    if tok == "true":
        return True
    if tok == "false":
        return False
    # strip trailing inline comment
    tok = tok.split("#", 1)[0].strip()
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ValueError(f"line {lineno}: cannot parse value {tok!r}") from None


def bundled_config_path(name: str) -> Path:
    """Resolve a packaged preset config like ``fig6.cfg``."""
    return Path(__file__).parent / "configs" / name
