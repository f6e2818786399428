"""Trial execution, performance measures, Monte Carlo campaigns, CSV logs.

A trial runs the 100 Hz loop of the shared-control scheme: sample the
user, filter the input (when a filter is configured), hold the applied
control for one sampling interval, and integrate the plant on the fine
grid underneath.  The same :class:`TrialSession` drives offline trials,
replays, and the live service, so records are identical across all
three given the same input stream.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import config as cfgmod
from .config import SLIP_FALL_HEIGHT, ExperimentConfig
from .dynamics import PlantModel, SimulationFailure, Transition, wrap_angle
from .engine import rollout
from .mig import ACCEPTED, REJECTED, REPLACED, FilterConfig, FilterDecision, filter_decide
from .mpc import ScheduleController
from .objective import QuadraticObjective
from .sim_users import UserModel

PASSTHROUGH = "pass"  # no filter configured

VERDICT_CODES = {ACCEPTED: 0, REJECTED: 1, REPLACED: 2, PASSTHROUGH: 3}
VERDICT_NAMES = {v: k for k, v in VERDICT_CODES.items()}

ACTION_EPS = 1e-9  # |u| above this counts as a user action

BALANCE_ANGLE = 0.4       # rad
BALANCE_RATE = 0.75       # rad/s
BALANCE_HOLD = 2.0        # s of continuous residence for success

STATE_COLUMNS = {
    "cart_pendulum": ["theta", "theta_dot", "x_c", "x_c_dot"],
    "slip": ["x_m", "x_m_dot", "z_m", "z_m_dot", "x_t"],
}


@dataclass
class Metrics:
    success: bool
    time_to_success: float
    balance_time: float
    rms_error: float
    pra: float
    fallen: bool = False
    fall_time: float = math.nan
    mean_forward_speed: float = math.nan

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrialRecord:
    system: str
    seed: int
    filter_mode: str
    user: str
    t_s: float
    duration: float
    times: np.ndarray
    states: np.ndarray          # tick-boundary states, one more row than times
    modes: np.ndarray
    u_user: np.ndarray
    u_applied: np.ndarray
    mig_values: np.ndarray
    verdicts: np.ndarray        # int8 codes, see VERDICT_CODES
    wall_times: np.ndarray
    transitions: list[Transition]
    metrics: Metrics
    config: dict = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return len(self.times)


# ---------------------------------------------------------------------------
# performance measures
# ---------------------------------------------------------------------------

def balance_mask(states: np.ndarray) -> np.ndarray:
    theta = np.array([wrap_angle(t) for t in states[:, 0]])
    return (np.abs(theta) <= BALANCE_ANGLE) & (np.abs(states[:, 1]) <= BALANCE_RATE)


def classify_success(states: np.ndarray, t_s: float,
                     duration: float) -> tuple[bool, float, float]:
    """Success, time to success, and cumulative balance time.

    Success needs one continuous residence of at least BALANCE_HOLD in
    the balance region; the time to success is the instant that window
    completes.  Balance time accumulates over the whole trial (only
    reported for successful trials).
    """
    if states.shape[1] != 4:
        raise ValueError("success classification is defined for the cart-pendulum")
    mask = balance_mask(states)
    need = int(round(BALANCE_HOLD / t_s))  # intervals
    run = 0
    success = False
    tts = duration
    for i, ok in enumerate(mask):
        run = run + 1 if ok else 0
        if not success and run >= need + 1:
            success = True
            tts = (i - need) * t_s + BALANCE_HOLD
    balance = float(np.sum(mask[1:] & mask[:-1])) * t_s if success else 0.0
    return success, min(tts, duration), balance


def rms_error(states: np.ndarray, x0: np.ndarray) -> float:
    """State RMS to the inverted equilibrium over the RMS of standing still.

    Both use the wrapped angle; the denominator holds the initial
    condition for the whole trial, i.e. the error of never moving.
    """
    wrapped = states.copy()
    wrapped[:, 0] = [wrap_angle(t) for t in states[:, 0]]
    num = math.sqrt(float(np.mean(np.sum(wrapped**2, axis=1))))
    ref = np.array(x0, dtype=float)
    ref[0] = wrap_angle(ref[0])
    den = math.sqrt(float(np.sum(ref**2)))
    if den == 0.0:
        raise ValueError("initial condition coincides with the target")
    return num / den


def pra(u_user: np.ndarray, verdicts: np.ndarray, times: np.ndarray,
        time_to_success: float) -> float:
    """Fraction of nonzero user inputs rejected or replaced before success."""
    window = times < time_to_success
    action = np.linalg.norm(np.atleast_2d(u_user), axis=1) > ACTION_EPS
    considered = window & action
    if not np.any(considered):
        return 0.0
    intervened = (verdicts == VERDICT_CODES[REJECTED]) | (verdicts == VERDICT_CODES[REPLACED])
    return float(np.sum(intervened & considered) / np.sum(considered))


# ---------------------------------------------------------------------------
# trial session
# ---------------------------------------------------------------------------

class TrialSession:
    """One 100 Hz shared-control episode, stepped one decision at a time."""

    def __init__(self, plant: PlantModel, objective: QuadraticObjective,
                 filter_cfg: FilterConfig | None,
                 controller: ScheduleController | None = None,
                 duration: float = 30.0, t_s: float = 0.01, dt: float = 1e-3,
                 x0: np.ndarray | None = None, mode0: int | None = None,
                 seed: int = 0, system: str = "", user_name: str = "",
                 config_snapshot: dict | None = None):
        self.plant = plant
        self.objective = objective
        self.filter_cfg = filter_cfg
        self.controller = controller
        self.duration = float(duration)
        self.t_s = filter_cfg.t_s if filter_cfg else t_s
        self.dt = filter_cfg.dt if filter_cfg else dt
        self.n_sub = int(round(self.t_s / self.dt))
        self.n_ticks = int(round(self.duration / self.t_s))
        self.seed = seed
        self.system = system or plant.name
        self.user_name = user_name
        self.config_snapshot = dict(config_snapshot or {})

        self.x = np.array(plant.initial_state if x0 is None else x0, dtype=float)
        self.mode = plant.initial_mode if mode0 is None else int(mode0)

        n, m = plant.state_dim, plant.input_dim
        self.states = np.zeros((self.n_ticks + 1, n))
        self.states[0] = self.x
        self.modes = np.zeros(self.n_ticks + 1, dtype=np.int64)
        self.modes[0] = self.mode
        self.u_user = np.zeros((self.n_ticks, m))
        self.u_applied = np.zeros((self.n_ticks, m))
        self.mig_values = np.zeros(self.n_ticks)
        self.verdicts = np.full(self.n_ticks, VERDICT_CODES[PASSTHROUGH], dtype=np.int8)
        self.wall_times = np.zeros(self.n_ticks)
        self.transitions: list[Transition] = []

        self.k = 0
        self.fallen = False
        self.fall_time = math.nan

    @property
    def t(self) -> float:
        return self.k * self.t_s

    @property
    def active(self) -> bool:
        return self.k < self.n_ticks and not self.fallen

    def step(self, u_user: np.ndarray) -> FilterDecision:
        """Decide on one user input and advance one sampling interval."""
        if not self.active:
            raise RuntimeError("session is finished")
        u_user = self.plant.saturate(np.atleast_1d(np.asarray(u_user, dtype=float)))
        if self.filter_cfg is None:
            decision = FilterDecision(verdict=PASSTHROUGH, mig_integral=math.nan,
                                      applied_control=u_user)
        else:
            decision = filter_decide(self.x, u_user, self.filter_cfg, self.plant,
                                     self.objective, controller=self.controller,
                                     mode=self.mode)
        k = self.k
        self.u_user[k] = u_user
        self.u_applied[k] = decision.applied_control
        self.mig_values[k] = decision.mig_integral
        self.verdicts[k] = VERDICT_CODES[decision.verdict]
        self.wall_times[k] = decision.wall_time

        hold = np.tile(decision.applied_control, (self.n_sub, 1))
        try:
            chunk = rollout(self.plant, self.x, hold, self.dt, mode0=self.mode,
                            t0=self.t)
            self.x = chunk.states[-1].copy()
            self.mode = int(chunk.modes[-1])
            self.transitions.extend(chunk.transitions)
            if self.system == "slip":
                low = np.argmax(chunk.states[:, 2] < SLIP_FALL_HEIGHT)
                if chunk.states[low, 2] < SLIP_FALL_HEIGHT:
                    self._mark_fallen(self.t + low * self.dt)
        except SimulationFailure:
            self._mark_fallen(self.t)
        self.k += 1
        self.states[self.k] = self.x
        self.modes[self.k] = self.mode
        return decision

    def _mark_fallen(self, t: float):
        self.fallen = True
        self.fall_time = t

    def finalize(self) -> TrialRecord:
        k = self.k
        times = np.arange(k) * self.t_s
        states = self.states[:k + 1]
        record = TrialRecord(
            system=self.system, seed=self.seed,
            filter_mode=self.filter_cfg.mode if self.filter_cfg else "off",
            user=self.user_name, t_s=self.t_s, duration=self.duration,
            times=times, states=states, modes=self.modes[:k + 1],
            u_user=self.u_user[:k], u_applied=self.u_applied[:k],
            mig_values=self.mig_values[:k], verdicts=self.verdicts[:k],
            wall_times=self.wall_times[:k],
            transitions=list(self.transitions),
            metrics=self._metrics(times, states),
            config=self.config_snapshot)
        return record

    def _metrics(self, times: np.ndarray, states: np.ndarray) -> Metrics:
        if self.system == "cart_pendulum":
            success, tts, balance = classify_success(states, self.t_s, self.duration)
            err = rms_error(states, self.states[0])
            p = pra(self.u_user[:len(times)], self.verdicts[:len(times)], times, tts)
            return Metrics(success=success, time_to_success=tts, balance_time=balance,
                           rms_error=err, pra=p)
        # slip: survival is the success notion; PRA counts the whole trial
        survived = not self.fallen
        elapsed = len(times) * self.t_s
        speed = math.nan
        if len(states) > 1 and elapsed > 0:
            speed = float((states[-1, 0] - states[0, 0]) / elapsed)
        p = pra(self.u_user[:len(times)], self.verdicts[:len(times)], times,
                self.duration + 1.0)
        return Metrics(success=survived, time_to_success=self.duration,
                       balance_time=elapsed if survived else 0.0,
                       rms_error=math.nan, pra=p, fallen=self.fallen,
                       fall_time=self.fall_time, mean_forward_speed=speed)


# ---------------------------------------------------------------------------
# trial drivers
# ---------------------------------------------------------------------------

def _session_from_config(cfg: ExperimentConfig, seed: int) -> TrialSession:
    plant = cfgmod.build_plant(cfg.system)
    obj = cfgmod.filter_objective(cfg)
    fcfg = cfgmod.build_filter_config(cfg)
    ctrl = cfgmod.build_controller(cfg, obj)
    x0 = np.array(plant.initial_state, dtype=float)
    if cfg.init_jitter > 0:
        jit_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                               spawn_key=(1,)))
        x0 = x0 + jit_rng.normal(0.0, cfg.init_jitter, plant.state_dim)
        if cfg.system == "slip":
            x0[4] = x0[0]  # keep the toe under the body at release
            x0[2] = max(x0[2], 1.02)
    return TrialSession(plant=plant, objective=obj, filter_cfg=fcfg, controller=ctrl,
                        duration=cfg.duration, t_s=cfg.t_s, dt=cfg.dt, x0=x0,
                        seed=seed, system=cfg.system, user_name=cfg.user,
                        config_snapshot=dataclasses.asdict(cfg))


def run_trial(cfg: ExperimentConfig, seed: int | None = None,
              user: UserModel | None = None) -> TrialRecord:
    """One seeded trial under the configured user and filter."""
    seed = cfg.seed if seed is None else seed
    session = _session_from_config(cfg, seed)
    user = user if user is not None else cfgmod.build_user(cfg)
    user = dataclasses.replace(user)  # fresh runtime state per trial
    user.reset(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    while session.active:
        u = user.next_input(session.plant, session.x, session.t, session.mode)
        session.step(u)
    return session.finalize()


def replay_trial(cfg: ExperimentConfig, seed: int, inputs: np.ndarray) -> TrialRecord:
    """Re-run a trial from a recorded per-tick input stream."""
    session = _session_from_config(cfg, seed)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    i = 0
    while session.active and i < len(inputs):
        session.step(inputs[i])
        i += 1
    return session.finalize()


# ---------------------------------------------------------------------------
# Monte Carlo campaigns
# ---------------------------------------------------------------------------

@dataclass
class CampaignResult:
    config: ExperimentConfig
    records: list[TrialRecord]

    @property
    def metrics(self) -> list[Metrics]:
        return [r.metrics for r in self.records]

    def summary(self) -> dict:
        ms = self.metrics
        n = len(ms)
        succ = [m.success for m in ms]
        rms = [m.rms_error for m in ms if not math.isnan(m.rms_error)]
        out = {
            "trials": n,
            "success_rate": float(np.mean(succ)) if n else math.nan,
            "mean_time_to_success": float(np.mean([m.time_to_success for m in ms])),
            "mean_balance_time": float(np.mean([m.balance_time for m in ms])),
            "mean_rms_error": float(np.mean(rms)) if rms else math.nan,
            "mean_pra": float(np.mean([m.pra for m in ms])),
            "fall_rate": float(np.mean([m.fallen for m in ms])),
        }
        speeds = [m.mean_forward_speed for m in ms if not math.isnan(m.mean_forward_speed)]
        out["mean_forward_speed"] = float(np.mean(speeds)) if speeds else math.nan
        return out


def trial_seed(base_seed: int, index: int) -> int:
    return base_seed + index


def monte_carlo(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                jobs: int | None = None) -> CampaignResult:
    """Independent seeded trials; optionally writes the CSV artifacts."""
    jobs = cfg.jobs if jobs is None else jobs
    seeds = [trial_seed(cfg.seed, i) for i in range(cfg.trials)]
    if jobs > 1:
        records = Parallel(n_jobs=jobs)(delayed(run_trial)(cfg, s) for s in seeds)
    else:
        records = [run_trial(cfg, s) for s in seeds]
    result = CampaignResult(config=cfg, records=list(records))
    if out_dir is not None:
        write_campaign(result, out_dir)
    return result


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def write_trial_csv(record: TrialRecord, path: str | Path) -> None:
    m = record.u_user.shape[1] if record.u_user.ndim == 2 else 1
    cols = (["t"] + STATE_COLUMNS.get(record.system,
                                      [f"x{i}" for i in range(record.states.shape[1])])
            + [f"u_user_{i}" for i in range(m)]
            + [f"u_applied_{i}" for i in range(m)]
            + ["mig_integral", "verdict"])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k in range(record.n_ticks):
            row = ([repr(float(record.times[k]))]
                   + [repr(float(v)) for v in record.states[k]]
                   + [repr(float(v)) for v in record.u_user[k]]
                   + [repr(float(v)) for v in record.u_applied[k]]
                   + [repr(float(record.mig_values[k])),
                      VERDICT_NAMES[int(record.verdicts[k])]])
            w.writerow(row)


METRIC_FIELDS = ["success", "time_to_success", "balance_time", "rms_error", "pra",
                 "fallen", "fall_time", "mean_forward_speed"]


def write_campaign(result: CampaignResult, out_dir: str | Path) -> Path:
    """config.cfg + per-trial CSVs + trials.csv + summary.txt in one directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.save(result.config, out / "config.cfg")
    with open(out / "trials.csv", "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed"] + METRIC_FIELDS)
        for i, rec in enumerate(result.records):
            md = rec.metrics.as_dict()
            w.writerow([i, rec.seed] + [_csv_value(md[f]) for f in METRIC_FIELDS])
    for i, rec in enumerate(result.records):
        write_trial_csv(rec, out / f"trial_{i:04d}.csv")
    summary = result.summary()
    lines = [f"{k}: {v}" for k, v in sorted(summary.items())]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def _csv_value(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_trials_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def read_trial_inputs(path: str | Path, input_dim: int) -> np.ndarray:
    """Recover the per-tick user input stream from a trial CSV."""
    rows = read_trials_csv(path)
    return np.array([[float(r[f"u_user_{i}"]) for i in range(input_dim)]
                     for r in rows])
