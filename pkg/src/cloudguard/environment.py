"""Simulated defense environment for training the response policy.

Each step presents one traffic window (attack kind, intensity, service load,
and a detector-like probability read) encoded through the shared indicator
schema; the agent answers with a catalog action. The reward follows
r = -(damage) - lambda * action cost + bonus for blocked attacks, where
damage counts both residual attack damage and collateral service disruption
from the defense tiers themselves under load. The block bonus defaults high
enough that blocking an attack nets a positive reward; with zero-initialized
tables that keeps never-tried actions from outranking known-good ones.

Episodes draw from dedicated counter-based substreams (seed, episode index),
so an episode's windows do not depend on how earlier episodes were played.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .enforcement import (
    DefenseState,
    EffectivenessMatrix,
    default_matrix,
    resolve_attack,
)
from .errors import ConfigError, EnvironmentFault, InputError
from .perception import DEFAULT_SEVERITY
from .policy import (
    Action,
    FIREWALL_TIERS,
    ISOLATION_TIERS,
    RATE_LIMIT_TIERS,
    IndicatorSchema,
    PolicyTrainConfig,
    build_action_catalog,
    compose_indicators,
    default_indicator_schema,
    encode_state,
    get_action,
)
from .telemetry import ATTACK_KINDS, LABELS

# typical service-load band per window kind, mirroring what the harness
# derives from event counts
_LOAD_RANGES = {
    "benign": (0.30, 0.70),
    "ddos": (0.80, 1.00),
    "sql_injection": (0.55, 1.00),
    "port_scan": (0.45, 1.00),
    "brute_force": (0.55, 1.00),
    "data_exfiltration": (0.30, 0.80),
}


@dataclass(frozen=True)
class CollateralModel:
    """Service disruption caused by the defense itself, scaled by load.

    Friction values are the fraction of legitimate traffic degraded at each
    tier; collateral damage is load x total friction x the damage value of
    one fully-disrupted window.
    """

    firewall_friction: tuple = (0.0, 0.02, 0.05, 0.10, 0.18)
    rate_limit_friction: tuple = (0.0, 0.03, 0.08, 0.16, 0.28)
    isolation_friction: tuple = (0.0, 0.12, 0.30)
    benign_damage_unit: float = 4.0

    def __post_init__(self):
        tables = (
            (self.firewall_friction, FIREWALL_TIERS, "firewall"),
            (self.rate_limit_friction, RATE_LIMIT_TIERS, "rate-limit"),
            (self.isolation_friction, ISOLATION_TIERS, "isolation"),
        )
        for values, count, name in tables:
            if len(values) != count:
                raise ConfigError(f"{name} friction needs {count} entries")
            if list(values) != sorted(values) or values[0] != 0.0:
                raise ConfigError(f"{name} friction must start at 0 and not decrease")
        if self.benign_damage_unit < 0:
            raise ConfigError("benign_damage_unit cannot be negative")

    def collateral(self, fw: int, rl: int, iso: int, load: float) -> float:
        if not 0.0 <= load <= 1.0:
            raise InputError(f"load must be in [0, 1], got {load}")
        friction = (self.firewall_friction[fw] + self.rate_limit_friction[rl]
                    + self.isolation_friction[iso])
        return load * friction * self.benign_damage_unit


@dataclass(frozen=True)
class WindowOutcome:
    """Damage accounting for one enforced window."""

    attack_damage: float
    collateral_damage: float
    blocked: bool
    verdict: str  # "none" for windows with no attack

    @property
    def total_damage(self) -> float:
        return self.attack_damage + self.collateral_damage


@dataclass(frozen=True)
class _Burst:
    # duck-typed attack carrier for resolve_attack; scenario AttackSpec
    # forbids zero intensity, which benign windows need
    kind: str
    intensity: float


def enforce_window(action: Action, kind: str, intensity: float, load: float,
                   matrix: EffectivenessMatrix,
                   collateral: CollateralModel) -> WindowOutcome:
    """Resolve one window under the action's tiers, counting both damages."""
    coll = collateral.collateral(action.firewall_tier, action.rate_limit_tier,
                                 action.isolation_tier, load)
    if kind == "benign" or intensity <= 0.0:
        return WindowOutcome(attack_damage=0.0, collateral_damage=coll,
                             blocked=False, verdict="none")
    state = DefenseState(firewall_tier=action.firewall_tier,
                         rate_limit_tier=action.rate_limit_tier,
                         isolation_tier=action.isolation_tier)
    out = resolve_attack(state, _Burst(kind, intensity), matrix)
    return WindowOutcome(attack_damage=out.damage, collateral_damage=coll,
                         blocked=out.verdict == "blocked", verdict=out.verdict)


def reward_for(outcome: WindowOutcome, action: Action,
               cost_weight: float = 0.1, block_bonus: float = 2.5) -> float:
    """r = -(attack + collateral damage) - lambda * cost + bonus if blocked."""
    reward = -(outcome.attack_damage + outcome.collateral_damage)
    reward -= cost_weight * action.cost
    if outcome.blocked:
        reward += block_bonus
    return reward


@dataclass(frozen=True)
class EnvConfig:
    episode_len: int = 80
    seed: int = 0
    benign_share: float = 0.4
    intensity_range: tuple = (0.3, 1.0)
    cost_weight: float = 0.1
    block_bonus: float = 2.5
    misperception: float = 0.06  # chance the synthesized read mislabels the kind

    def __post_init__(self):
        if self.episode_len < 1:
            raise ConfigError("episode_len must be >= 1")
        if not 0.0 <= self.benign_share <= 1.0:
            raise ConfigError("benign_share must be in [0, 1]")
        lo, hi = self.intensity_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ConfigError("intensity_range must satisfy 0 < low <= high <= 1")
        if self.cost_weight < 0 or self.block_bonus < 0:
            raise ConfigError("cost_weight and block_bonus cannot be negative")
        if not 0.0 <= self.misperception <= 1.0:
            raise ConfigError("misperception must be in [0, 1]")


@dataclass(frozen=True)
class _StepContext:
    kind: str
    intensity: float
    load: float
    probs: np.ndarray
    threat: float
    state_key: int


class DefenseEnv:
    """reset/step environment over synthesized windows and real enforcement."""

    def __init__(self, cfg: EnvConfig | None = None,
                 catalog: tuple[Action, ...] | None = None,
                 matrix: EffectivenessMatrix | None = None,
                 collateral: CollateralModel | None = None,
                 schema: IndicatorSchema | None = None,
                 severity: dict | None = None):
        self.cfg = cfg or EnvConfig()
        self.catalog = catalog or build_action_catalog()
        self.matrix = matrix if matrix is not None else default_matrix()
        self.collateral = collateral or CollateralModel()
        self.schema = schema or default_indicator_schema()
        self.severity = severity or DEFAULT_SEVERITY
        self._episode = -1
        self._steps = 0
        self._context: _StepContext | None = None
        self._rng: Generator | None = None

    @property
    def n_actions(self) -> int:
        return len(self.catalog)

    def reset(self) -> int:
        self._episode += 1
        self._rng = Generator(Philox(key=np.array(
            [self.cfg.seed, self._episode], dtype=np.uint64)))
        self._steps = 0
        self._context = self._sample_context(last_action_norm=0.0)
        return self._context.state_key

    def step(self, action_id: int) -> tuple[int, float, bool]:
        if self._context is None or self._rng is None:
            raise EnvironmentFault("step called before reset")
        if self._steps >= self.cfg.episode_len:
            raise EnvironmentFault("episode is terminal; call reset")
        action = get_action(self.catalog, action_id)
        ctx = self._context
        outcome = enforce_window(action, ctx.kind, ctx.intensity, ctx.load,
                                 self.matrix, self.collateral)
        reward = reward_for(outcome, action, self.cfg.cost_weight,
                            self.cfg.block_bonus)
        self._steps += 1
        terminal = self._steps >= self.cfg.episode_len
        if not terminal:
            self._context = self._sample_context(action.tier_norm())
        return self._context.state_key, reward, terminal

    def _sample_context(self, last_action_norm: float) -> _StepContext:
        rng = self._rng
        if rng.random() < self.cfg.benign_share:
            kind = "benign"
            intensity = 0.0
        else:
            kind = ATTACK_KINDS[int(rng.integers(len(ATTACK_KINDS)))]
            intensity = float(rng.uniform(*self.cfg.intensity_range))
        load = float(rng.uniform(*_LOAD_RANGES[kind]))
        perceived = LABELS.index(kind)
        if rng.random() < self.cfg.misperception:
            others = [i for i in range(len(LABELS)) if i != perceived]
            perceived = others[int(rng.integers(len(others)))]
        max_p = float(rng.uniform(0.75, 0.995))
        probs = np.full(len(LABELS), (1.0 - max_p) / (len(LABELS) - 1))
        probs[perceived] = max_p
        context_factor = float(rng.uniform(0.5, 0.95))
        threat = max_p * self.severity[LABELS[perceived]] * context_factor
        indicators = compose_indicators(self.schema, {
            "threat": threat,
            "load": load,
            "attack_kind": probs,
            "recent_action": last_action_norm,
        })
        return _StepContext(kind=kind, intensity=intensity, load=load,
                            probs=probs, threat=threat,
                            state_key=encode_state(indicators, self.schema))


def defense_train_config(seed: int = 0) -> PolicyTrainConfig:
    """Training preset sized for the desk-scale defense environment.

    Low gamma reflects the weak step-to-step coupling (the next window does
    not depend on the action beyond the recent-action indicator), which cuts
    bootstrap noise across the 187-action catalog.
    """
    return PolicyTrainConfig(
        episodes=1500,
        steps_per_episode=80,
        alpha=0.1,
        gamma=0.35,
        epsilon_start=1.0,
        epsilon_end=0.05,
        anneal_fraction=0.8,
        seed=seed,
        moving_avg_window=20,
    )
