"""Adaptive response selection with tabular double Q-learning.

The pipeline summarizes each window into a wide indicator vector whose named
regions (threat, load, attack kind, recent action) are bucketed and packed
into a single integer state key by little-endian mixed-radix encoding. A
fixed catalog of defense actions combines firewall, rate-limit, and isolation
tiers; burst and sustained presets reuse the aggressive tier combinations at
scaled cost. Two Q tables are trained with the double estimator update, and
tables are stored sparsely so unvisited states read as zero without being
materialized.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    CatalogError,
    CheckpointError,
    ConfigError,
    DimensionError,
    EnvironmentFault,
    InputError,
)

INDICATOR_DIM = 232

FIREWALL_TIERS = 5
RATE_LIMIT_TIERS = 5
ISOLATION_TIERS = 3

# per-tier cost weights for the core action combinations
FIREWALL_COST = 0.08
RATE_LIMIT_COST = 0.10
ISOLATION_COST = 0.22

BURST_COST_SCALE = 0.8
SUSTAINED_COST_SCALE = 1.3
HEAVY_TIER_SUM = 4  # combos at or above this total get burst/sustained presets


@dataclass(frozen=True)
class AxisSpec:
    """One named region of the indicator vector and how it buckets."""

    name: str
    start: int
    end: int
    mode: str  # "mean": average the region, bucket by edges; "argmax": slot index
    edges: tuple[float, ...] = ()

    def __post_init__(self):
        if self.end <= self.start or self.start < 0:
            raise ConfigError(f"axis {self.name}: bad span [{self.start}, {self.end})")
        if self.mode == "mean":
            if not self.edges or list(self.edges) != sorted(set(self.edges)):
                raise ConfigError(f"axis {self.name}: edges must be strictly increasing")
        elif self.mode == "argmax":
            if self.edges:
                raise ConfigError(f"axis {self.name}: argmax axes take no edges")
        else:
            raise ConfigError(f"axis {self.name}: unknown mode {self.mode!r}")

    @property
    def radix(self) -> int:
        if self.mode == "argmax":
            return self.end - self.start
        return len(self.edges) + 1


@dataclass(frozen=True)
class IndicatorSchema:
    """Ordered, contiguous axes covering the full indicator vector."""

    axes: tuple[AxisSpec, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        cursor = 0
        for axis in self.axes:
            if axis.start != cursor:
                raise ConfigError(f"axis {axis.name} starts at {axis.start}, "
                                  f"expected {cursor}")
            cursor = axis.end
        if cursor != self.dim:
            raise ConfigError(f"axes cover {cursor} of {self.dim} dimensions")

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(a.radix for a in self.axes)

    def n_states(self) -> int:
        out = 1
        for r in self.radices:
            out *= r
        return out

    def axis(self, name: str) -> AxisSpec:
        for a in self.axes:
            if a.name == name:
                return a
        raise ConfigError(f"schema has no axis named {name!r}")


def default_indicator_schema() -> IndicatorSchema:
    """The stock decomposition of the 232-wide indicator vector."""
    return IndicatorSchema(
        axes=(
            AxisSpec("threat", 0, 58, "mean", (0.2, 0.4, 0.6, 0.8)),
            AxisSpec("load", 58, 116, "mean", (0.25, 0.5, 0.75)),
            AxisSpec("attack_kind", 116, 122, "argmax"),
            AxisSpec("recent_action", 122, 232, "mean", (1 / 3, 2 / 3)),
        ),
        dim=INDICATOR_DIM,
    )


def compose_indicators(schema: IndicatorSchema, values: dict) -> np.ndarray:
    """Fill each axis region from a scalar (mean axes) or a vector (argmax)."""
    if set(values) != {a.name for a in schema.axes}:
        raise InputError(
            f"values must name exactly the axes "
            f"{tuple(a.name for a in schema.axes)}, got {tuple(sorted(values))}"
        )
    out = np.zeros(schema.dim)
    for axis in schema.axes:
        v = values[axis.name]
        if axis.mode == "argmax":
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (axis.end - axis.start,):
                raise DimensionError(
                    f"axis {axis.name} takes a vector of {axis.end - axis.start} "
                    f"slots, got shape {v.shape}"
                )
            out[axis.start:axis.end] = v
        else:
            out[axis.start:axis.end] = float(v)
    if not np.isfinite(out).all():
        raise InputError("indicator values must be finite")
    return out


def bucket_of(axis: AxisSpec, region: np.ndarray) -> int:
    """Bucket index for one axis region; out-of-range values clamp."""
    if axis.mode == "argmax":
        return int(np.argmax(region))
    return int(np.searchsorted(axis.edges, float(region.mean()), side="right"))


def encode_state(indicators: np.ndarray, schema: IndicatorSchema) -> int:
    """Pack per-axis buckets into one key, first axis least significant."""
    v = np.asarray(indicators, dtype=np.float64)
    if v.shape != (schema.dim,):
        raise DimensionError(f"indicator shape {v.shape}, schema wants ({schema.dim},)")
    if not np.isfinite(v).all():
        raise InputError("indicator vector contains non-finite values")
    key = 0
    mult = 1
    for axis in schema.axes:
        key += bucket_of(axis, v[axis.start:axis.end]) * mult
        mult *= axis.radix
    return key


def decode_state(key: int, schema: IndicatorSchema) -> tuple[int, ...]:
    """Inverse of encode_state: the per-axis bucket tuple."""
    if not 0 <= key < schema.n_states():
        raise InputError(f"state key {key} outside [0, {schema.n_states()})")
    buckets = []
    for radix in schema.radices:
        buckets.append(key % radix)
        key //= radix
    return tuple(buckets)


@dataclass(frozen=True)
class Action:
    """One defense action: absolute tier targets plus a cost."""

    action_id: int
    firewall_tier: int
    rate_limit_tier: int
    isolation_tier: int
    mode: str  # "standard", "burst", or "sustained"
    cost: float

    def tier_norm(self) -> float:
        """Mean tier utilization in [0, 1], used as the recent-action signal."""
        return (self.firewall_tier / (FIREWALL_TIERS - 1)
                + self.rate_limit_tier / (RATE_LIMIT_TIERS - 1)
                + self.isolation_tier / (ISOLATION_TIERS - 1)) / 3.0


def build_action_catalog() -> tuple[Action, ...]:
    """All 187 actions: 75 tier combinations, then burst and sustained presets.

    Presets reuse combinations whose tier sum reaches HEAVY_TIER_SUM: burst
    applies them briefly at 0.8x cost, sustained holds them at 1.3x cost.
    Action ids are dense and positional.
    """
    combos = [(f, r, i)
              for f in range(FIREWALL_TIERS)
              for r in range(RATE_LIMIT_TIERS)
              for i in range(ISOLATION_TIERS)]
    actions = []
    for f, r, i in combos:
        cost = FIREWALL_COST * f + RATE_LIMIT_COST * r + ISOLATION_COST * i
        actions.append(Action(len(actions), f, r, i, "standard", cost))
    heavy = [(f, r, i) for f, r, i in combos if f + r + i >= HEAVY_TIER_SUM]
    for scale, mode in ((BURST_COST_SCALE, "burst"), (SUSTAINED_COST_SCALE, "sustained")):
        for f, r, i in heavy:
            cost = (FIREWALL_COST * f + RATE_LIMIT_COST * r + ISOLATION_COST * i) * scale
            actions.append(Action(len(actions), f, r, i, mode, cost))
    return tuple(actions)


def get_action(catalog: tuple[Action, ...], action_id: int) -> Action:
    if not 0 <= action_id < len(catalog):
        raise CatalogError(f"action id {action_id} outside catalog of {len(catalog)}")
    return catalog[action_id]


class DoubleQTables:
    """Sparse pair of Q tables plus visit counts.

    Rows materialize only when written; reads of unvisited states return
    zeros. ``row_a``/``row_b``/``combined`` are read-only views in spirit:
    callers must not mutate the arrays they return.
    """

    def __init__(self, n_actions: int):
        if n_actions < 0:
            raise ConfigError(f"n_actions must be >= 0, got {n_actions}")
        self.n_actions = n_actions
        self.q_a: dict[int, np.ndarray] = {}
        self.q_b: dict[int, np.ndarray] = {}
        self.visits: dict[int, np.ndarray] = {}

    def row_a(self, state: int) -> np.ndarray:
        row = self.q_a.get(state)
        return np.zeros(self.n_actions) if row is None else row

    def row_b(self, state: int) -> np.ndarray:
        row = self.q_b.get(state)
        return np.zeros(self.n_actions) if row is None else row

    def combined(self, state: int) -> np.ndarray:
        return self.row_a(state) + self.row_b(state)

    def visit_count(self, state: int, action: int) -> int:
        row = self.visits.get(state)
        return 0 if row is None else int(row[action])

    def states(self) -> list[int]:
        return sorted(set(self.q_a) | set(self.q_b) | set(self.visits))

    def _writable(self, table: dict, state: int, dtype=np.float64) -> np.ndarray:
        row = table.get(state)
        if row is None:
            row = np.zeros(self.n_actions, dtype=dtype)
            table[state] = row
        return row


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    terminal: bool


def select_action(tables: DoubleQTables, state: int, epsilon: float,
                  rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy over Q_A + Q_B; greedy ties go to the lowest action id.

    With epsilon == 0 no randomness is consumed, so a greedy caller needs no
    generator and replays are exactly reproducible.
    """
    if tables.n_actions < 1:
        raise ConfigError("cannot select from an empty action catalog")
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0.0:
        if rng is None:
            raise ConfigError("exploration (epsilon > 0) requires a generator")
        if rng.random() < epsilon:
            return int(rng.integers(tables.n_actions))
    return int(np.argmax(tables.combined(state)))


def double_q_update(tables: DoubleQTables, t: Transition, alpha: float,
                    gamma: float, rng: np.random.Generator) -> float:
    """One double-estimator update; returns the new value of the entry.

    A fair coin picks the table to update. The updated table chooses the
    argmax action at the next state; the *other* table supplies its value.
    Terminal transitions drop the bootstrap term entirely.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must be in [0, 1), got {gamma}")
    if not 0 <= t.action < tables.n_actions:
        raise CatalogError(f"action id {t.action} outside catalog of {tables.n_actions}")
    update_a = bool(rng.random() < 0.5)
    if update_a:
        chosen_next, other_next = tables.row_a(t.next_state), tables.row_b(t.next_state)
        row = tables._writable(tables.q_a, t.state)
    else:
        chosen_next, other_next = tables.row_b(t.next_state), tables.row_a(t.next_state)
        row = tables._writable(tables.q_b, t.state)
    if t.terminal:
        target = t.reward
    else:
        a_star = int(np.argmax(chosen_next))
        target = t.reward + gamma * float(other_next[a_star])
    row[t.action] += alpha * (target - row[t.action])
    tables._writable(tables.visits, t.state, dtype=np.int64)[t.action] += 1
    return float(row[t.action])


@dataclass(frozen=True)
class PolicyTrainConfig:
    episodes: int = 1500
    steps_per_episode: int = 80
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    anneal_fraction: float = 0.8  # share of episodes over which epsilon decays
    seed: int = 0
    moving_avg_window: int = 20

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigError(f"episodes must be >= 0, got {self.episodes}")
        if self.steps_per_episode < 1:
            raise ConfigError("steps_per_episode must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0.0 < self.anneal_fraction <= 1.0:
            raise ConfigError("anneal_fraction must be in (0, 1]")
        if self.moving_avg_window < 1:
            raise ConfigError("moving_avg_window must be >= 1")


def epsilon_at(cfg: PolicyTrainConfig, episode: int) -> float:
    """Linear decay from start to end over the first anneal_fraction episodes."""
    anneal = int(round(cfg.anneal_fraction * cfg.episodes))
    if anneal <= 0:
        return cfg.epsilon_end
    frac = min(episode / anneal, 1.0)
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


@dataclass(frozen=True)
class ConvergenceCurve:
    """Per-episode mean reward with a trailing moving average."""

    episode_rewards: tuple[float, ...]
    moving_avg: tuple[float, ...]
    window: int

    @classmethod
    def from_rewards(cls, rewards, window: int) -> "ConvergenceCurve":
        rewards = tuple(float(r) for r in rewards)
        moving = tuple(
            float(np.mean(rewards[max(0, i - window + 1):i + 1]))
            for i in range(len(rewards))
        )
        return cls(episode_rewards=rewards, moving_avg=moving, window=window)

    def to_rows(self) -> list[tuple[int, float, float]]:
        return [(i, r, m) for i, (r, m)
                in enumerate(zip(self.episode_rewards, self.moving_avg))]


def train_policy(env, cfg: PolicyTrainConfig) -> tuple[DoubleQTables, ConvergenceCurve]:
    """Run episodic double Q-learning against ``env``.

    The environment contract: ``n_actions`` attribute, ``reset() -> state``,
    ``step(action) -> (next_state, reward, terminal)``. Faults raised by the
    environment are re-raised with episode and step context attached.
    """
    rng = np.random.default_rng(cfg.seed)
    tables = DoubleQTables(env.n_actions)
    rewards = []
    for episode in range(cfg.episodes):
        eps = epsilon_at(cfg, episode)
        state = env.reset()
        total = 0.0
        steps = 0
        for step in range(cfg.steps_per_episode):
            action = select_action(tables, state, eps, rng)
            try:
                next_state, reward, terminal = env.step(action)
            except EnvironmentFault as exc:
                raise EnvironmentFault(
                    f"episode {episode} step {step}: {exc}") from exc
            double_q_update(
                tables,
                Transition(state, action, float(reward), next_state, bool(terminal)),
                cfg.alpha, cfg.gamma, rng,
            )
            total += float(reward)
            steps += 1
            state = next_state
            if terminal:
                break
        rewards.append(total / steps)
    return tables, ConvergenceCurve.from_rewards(rewards, cfg.moving_avg_window)


def greedy_policy(tables: DoubleQTables, states=None) -> dict[int, int]:
    """Greedy action per state (defaults to every materialized state)."""
    if states is None:
        states = tables.states()
    return {s: select_action(tables, s, 0.0) for s in states}


_QT_HEADER = "state,action,q_a,q_b,visits"
_QT_MAGIC = "# double-q checkpoint v1"


def save_qtables(path, tables: DoubleQTables) -> None:
    """Canonical text dump: one row per touched entry, sorted by state, action.

    Floats are written with repr so a reload is bit-exact.
    """
    lines = [_QT_MAGIC, f"n_actions={tables.n_actions}", _QT_HEADER]
    for state in tables.states():
        qa, qb = tables.row_a(state), tables.row_b(state)
        vis = tables.visits.get(state)
        for action in range(tables.n_actions):
            v = 0 if vis is None else int(vis[action])
            if qa[action] == 0.0 and qb[action] == 0.0 and v == 0:
                continue
            lines.append(
                f"{state},{action},{float(qa[action])!r},{float(qb[action])!r},{v}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_qtables(path) -> DoubleQTables:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise CheckpointError(f"cannot read q-table checkpoint: {exc}") from exc
    if len(lines) < 3 or lines[0] != _QT_MAGIC or lines[2] != _QT_HEADER:
        raise CheckpointError(f"{path} is not a q-table checkpoint")
    try:
        n_actions = int(lines[1].removeprefix("n_actions="))
    except ValueError as exc:
        raise CheckpointError(f"bad n_actions line: {lines[1]!r}") from exc
    tables = DoubleQTables(n_actions)
    for ln in lines[3:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 5:
            raise CheckpointError(f"malformed q-table row: {ln!r}")
        try:
            state, action = int(parts[0]), int(parts[1])
            qa, qb, visits = float(parts[2]), float(parts[3]), int(parts[4])
        except ValueError as exc:
            raise CheckpointError(f"malformed q-table row: {ln!r}") from exc
        if not 0 <= action < n_actions:
            raise CheckpointError(f"action id {action} outside catalog of {n_actions}")
        if qa != 0.0:
            tables._writable(tables.q_a, state)[action] = qa
        if qb != 0.0:
            tables._writable(tables.q_b, state)[action] = qb
        if visits != 0:
            tables._writable(tables.visits, state, dtype=np.int64)[action] = visits
    return tables


def write_convergence_csv(path, curve: ConvergenceCurve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_reward", "moving_avg"])
        for episode, reward, moving in curve.to_rows():
            writer.writerow([episode, repr(reward), repr(moving)])


def read_convergence_csv(path) -> ConvergenceCurve:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["episode", "mean_reward", "moving_avg"]:
            raise CheckpointError(f"{path} is not a convergence curve file")
        rewards, moving = [], []
        for row in reader:
            rewards.append(float(row[1]))
            moving.append(float(row[2]))
    # the trailing-window width is not stored; infer nothing and keep rows as-is
    return ConvergenceCurve(episode_rewards=tuple(rewards),
                            moving_avg=tuple(moving), window=1)
