"""Deep Q-learning prover: epsilon-greedy acting, replay, l1 TD updates.

There is no target network.  TD targets use the greedy value of the next
state, which the trainer computes anyway when it chooses the next action;
``td_target="recompute"`` re-evaluates it with the current parameters at
update time instead (slow, meant for small runs and tests).
"""

from __future__ import annotations

import csv
import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .env import Action, ProverState, extract_proof, replay
from .features import build_class_table
from .graphs import Graph, random_gnp, rng_for
from .proof import verify
from .qnet import (ActionCache, OptimizerState, QNetworkParams, Sample, StateFeatures,
                   init_params, l1_loss_and_grads, q_all_actions, rmsprop_step, save)

log = logging.getLogger(__name__)

TRAIN_LOG_SCHEMA = "dynproof-train-log/1"


@dataclass
class TrainConfig:
    lr: float = 1e-5
    total_steps: int = 20_000
    replay_capacity: int = 100
    batch: int = 32
    discount: float = 0.99
    epsilon: float = 0.1
    degree_cap: int = 2
    horizon: int = 100
    graph_n: int = 25
    graph_n_max: int | None = None  # sample n uniformly in [graph_n, graph_n_max]
    edge_p_min: float = 0.5
    edge_p_max: float = 1.0
    seed: int = 0
    init_seed: int = 0
    width: int = 500
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    td_target: str = "stored"  # or "recompute"
    log_path: str | None = None
    checkpoint_path: str | None = None
    checkpoint_every: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("lr", "total_steps", "replay_capacity", "batch", "discount",
                    "degree_cap", "horizon", "graph_n", "width")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.edge_p_min <= self.edge_p_max <= 1.0:
            raise ValueError("edge probabilities must satisfy 0 <= min <= max <= 1")
        if self.graph_n_max is not None and self.graph_n_max < self.graph_n:
            raise ValueError("graph_n_max must be >= graph_n")
        if self.batch > self.replay_capacity:
            raise ValueError("batch cannot exceed replay capacity")
        if self.td_target not in ("stored", "recompute"):
            raise ValueError("td_target must be 'stored' or 'recompute'")

    @classmethod
    def from_mapping(cls, data: dict) -> "TrainConfig":
        """Build from string values (config files, CLI flags)."""
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise ValueError(f"unknown training option {key!r}")
            out[key] = _coerce(kinds[key], value)
        return cls(**out)

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(kind: str, value):
    if not isinstance(value, str):
        return value
    if value.lower() in ("none", ""):
        return None
    if kind.startswith("int"):
        return int(float(value))
    if kind.startswith("float"):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Replay

class Episode:
    """One training episode: graph, growing action history and feature rows."""

    def __init__(self, graph: Graph, graph_seed: int, state: ProverState):
        self.graph = graph
        self.graph_seed = graph_seed
        self.state = state
        self.features = StateFeatures(state)

    @property
    def actions(self) -> list:
        return self.state.actions_taken


@dataclass
class Transition:
    episode: Episode
    t: int  # actions already taken in the episode before this one
    action: Action
    action_row: np.ndarray  # dense product polynomial
    reward: float
    next_value: float  # greedy next-state value when acting (0 at terminal)
    terminal: bool

    def state_snapshot(self) -> tuple:
        return (self.episode.graph, tuple(self.episode.actions[:self.t]))

    def next_snapshot(self) -> tuple:
        return (self.episode.graph, tuple(self.episode.actions[:self.t + 1]))

    @property
    def memory_length(self) -> int:
        return 2 * self.episode.graph.n + self.t

    def sample(self) -> Sample:
        f = self.episode.features
        L = self.memory_length
        Zm = f.fz.features_one(f.mem_left(0, L), self.action_row)
        Ze = f.fz.features_one(f.eq_left, self.action_row) if len(f.eq_left) else None
        return Sample(Zm, Ze)


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, tr: Transition) -> None:
        self.items.append(tr)

    def sample(self, k: int, rng: np.random.Generator) -> list:
        idx = rng.choice(len(self.items), size=k, replace=len(self.items) < k)
        return [self.items[i] for i in idx]


# ---------------------------------------------------------------------------
# Policies

def random_policy(state: ProverState, rng: np.random.Generator) -> Action:
    acts = state.legal_actions()
    if not acts:
        raise IndexError("no legal actions")
    return acts[int(rng.integers(len(acts)))]


def epsilon_greedy(state: ProverState, params: QNetworkParams, epsilon: float,
                   rng: np.random.Generator, cache: ActionCache | None = None) -> Action:
    """Uniform legal action with probability ``epsilon``, else the argmax of q."""
    # no draw at all when epsilon is 0, so greedy play needs no generator
    if epsilon > 0 and rng.random() < epsilon:
        return random_policy(state, rng)
    acts, q = q_all_actions(state, params, cache)
    if not acts:
        raise IndexError("no legal actions")
    return acts[int(np.argmax(q))]


class RandomPolicy:
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = rng_for(seed, "agent")

    def reset(self, state: ProverState) -> None:
        pass

    def __call__(self, state: ProverState) -> Action:
        return random_policy(state, self.rng)


class GreedyPolicy:
    """Argmax of a fixed network; keeps an action cache per episode."""

    name = "model"

    def __init__(self, params: QNetworkParams):
        self.params = params
        self.cache: ActionCache | None = None

    def reset(self, state: ProverState) -> None:
        self.cache = ActionCache(state)

    def __call__(self, state: ProverState) -> Action:
        if self.cache is None or self.cache.state is not state:
            self.reset(state)
        return epsilon_greedy(state, self.params, 0.0, None, self.cache)


class ScriptedPolicy:
    name = "scripted"

    def __init__(self, fn: Callable):
        self.fn = fn

    def reset(self, state):
        pass

    def __call__(self, state):
        return self.fn(state)


# ---------------------------------------------------------------------------
# Evaluation

@dataclass
class EvalReport:
    bounds: list
    traces: list
    alphas: list = field(default_factory=list)

    @property
    def mean_bound(self) -> float:
        return float(np.mean([float(b) for b in self.bounds])) if self.bounds else float("nan")


def evaluate(policy, graphs, horizon: int = 100, degree_cap: int = 2,
             check: bool = True) -> EvalReport:
    """Roll ``policy`` on every graph; each bound comes with a verified proof."""
    bounds, traces = [], []
    for g in graphs:
        s = ProverState(g, degree_cap, horizon)
        if hasattr(policy, "reset"):
            policy.reset(s)
        while s.step < horizon and s.legal_actions():
            a = policy(s)
            if a is None:
                break
            s.apply(a)
        trace = extract_proof(s)
        if check:
            report = verify(trace)
            if not report.ok:
                raise RuntimeError(f"self-verification failed: {report}")
        bounds.append(s.bound)
        traces.append(trace)
    return EvalReport(bounds, traces)


def sample_graphs(count: int, n: int, seed: int, stream: str = "eval",
                  p_range=(0.5, 1.0), n_max: int | None = None) -> list:
    """Random graphs with ``p ~ U[p_range]``, reproducible from ``seed``."""
    rng = rng_for(seed, stream)
    out = []
    for _ in range(count):
        k = n if n_max is None else int(rng.integers(n, n_max + 1))
        p = float(rng.uniform(*p_range))
        out.append(random_gnp(k, p, rng))
    return out


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainLog:
    rows: list = field(default_factory=list)  # per episode
    losses: list = field(default_factory=list)  # per update
    seconds: float = 0.0
    buffer: ReplayBuffer | None = None  # final replay contents, for inspection

    HEADER = ("step", "episode", "graph_seed", "n", "p", "final_bound", "loss_avg")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema: {TRAIN_LOG_SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow(r)


def _recompute_next_value(tr: Transition, params: QNetworkParams, cfg: TrainConfig) -> float:
    if tr.terminal:
        return 0.0
    g, acts = tr.next_snapshot()
    s = replay(g, acts, cfg.degree_cap, cfg.horizon)
    _, q = q_all_actions(s, params)
    return float(q.max()) if len(q) else 0.0


def train(config: TrainConfig, params: QNetworkParams | None = None,
          progress: Callable | None = None):
    """Run DQN for ``config.total_steps`` environment steps.

    Returns ``(params, TrainLog)``.  If the run is interrupted and a
    checkpoint path is configured, the current parameters are saved first.
    """
    cfg = config
    table = build_class_table(cfg.degree_cap)
    if params is None:
        params = init_params(len(table), cfg.width, cfg.init_seed, table)
    opt = OptimizerState.zeros_like(params)
    graph_rng = rng_for(cfg.seed, "graph")
    act_rng = rng_for(cfg.seed, "agent")
    replay_rng = rng_for(cfg.seed, "replay")
    buffer = ReplayBuffer(cfg.replay_capacity)
    tlog = TrainLog()
    loss_avg = float("nan")
    step = 0
    episode = 0
    start = time.perf_counter()
    try:
        while step < cfg.total_steps:
            n_max = cfg.graph_n_max or cfg.graph_n
            n = int(graph_rng.integers(cfg.graph_n, n_max + 1))
            p = float(graph_rng.uniform(cfg.edge_p_min, cfg.edge_p_max))
            gseed = int(graph_rng.integers(2**62))
            g = random_gnp(n, p, gseed)
            s = ProverState(g, cfg.degree_cap, cfg.horizon)
            ep = Episode(g, gseed, s)
            cache = ActionCache(s, ep.features)
            acts, q = q_all_actions(s, params, cache)
            while acts and step < cfg.total_steps:
                if act_rng.random() < cfg.epsilon:
                    a = acts[int(act_rng.integers(len(acts)))]
                else:
                    a = acts[int(np.argmax(q))]
                row = ep.features.action_matrix([s.action_poly(a)])[0]
                t = s.step
                reward = float(s.apply(a))
                step += 1
                terminal = s.step >= cfg.horizon
                if not terminal:
                    acts, q = q_all_actions(s, params, cache)
                    terminal = not acts
                next_value = 0.0 if terminal else float(q.max())
                buffer.push(Transition(ep, t, a, row, reward, next_value, terminal))
                if len(buffer) >= cfg.batch:
                    batch = buffer.sample(cfg.batch, replay_rng)
                    if cfg.td_target == "recompute":
                        nv = [_recompute_next_value(tr, params, cfg) for tr in batch]
                    else:
                        nv = [tr.next_value for tr in batch]
                    targets = np.array([tr.reward + (0.0 if tr.terminal else cfg.discount * v)
                                        for tr, v in zip(batch, nv)])
                    loss, grads, _ = l1_loss_and_grads(params, [tr.sample() for tr in batch], targets)
                    rmsprop_step(params, grads, opt, cfg.lr, cfg.rms_decay, cfg.rms_eps)
                    tlog.losses.append(loss)
                    loss_avg = loss if np.isnan(loss_avg) else 0.99 * loss_avg + 0.01 * loss
                if cfg.checkpoint_path and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    save(params, cfg.checkpoint_path, {**cfg.as_dict(), "steps_done": step}, opt)
                if terminal:
                    break
            tlog.rows.append((step, episode, gseed, n, round(p, 6), str(s.bound), f"{loss_avg:.6g}"))
            if progress is not None:
                progress(step, episode, s.bound, loss_avg)
            episode += 1
    except BaseException:
        if cfg.checkpoint_path:
            save(params, cfg.checkpoint_path, {**cfg.as_dict(), "steps_done": step}, opt)
            log.warning("training interrupted at step %d; checkpoint saved to %s", step, cfg.checkpoint_path)
        raise
    tlog.seconds = time.perf_counter() - start
    tlog.buffer = buffer
    if cfg.log_path:
        tlog.write_csv(cfg.log_path)
    if cfg.checkpoint_path:
        save(params, cfg.checkpoint_path, {**cfg.as_dict(), "steps_done": step}, opt)
    return params, tlog
