"""Symmetric Q-network: two invariant towers, max aggregation, scalar head.

For a state (memory M, objective f, equalities E) and a candidate product a:

    F = max_i tower_mem(z(m_i, f, a))      (elementwise over memory rows)
    G = max_j tower_eq(z(e_j, f, a))       (elementwise over equality rows)
    q = head(max(F, G))

Each tower is ``Linear -> ReLU -> Linear`` and the head is
``Linear -> ReLU -> Linear(1)``.  A learnable linear map applied to the
class sums ``z`` before the tower would compose with the first layer, so it
is not kept separately.

Inference paths that must agree exactly (cached vs uncached, permuted
states) use :func:`rowwise_matmul`, whose result for a row never depends on
the other rows in the batch.  Training uses ordinary BLAS products.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .features import SumObjectiveFeaturizer, TripletClassTable, build_class_table, sum_featurizer
from .graphs import rng_for

MODEL_FORMAT = "dynproof-qnet"
MODEL_VERSION = 1
DEFAULT_WIDTH = 500

TOWERS = ("mem", "eq")
PARAM_NAMES = (
    "mem_W1", "mem_b1", "mem_W2", "mem_b2",
    "eq_W1", "eq_b1", "eq_W2", "eq_b2",
    "head_W1", "head_b1", "head_W2", "head_b2",
)


class ModelFileError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


def rowwise_matmul(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    # numpy's own einsum loop: every output row is computed the same way
    # regardless of how many rows are stacked with it (BLAS gemm is not)
    return np.einsum("ij,jk->ik", X, W, optimize=False)


# ---------------------------------------------------------------------------
# Parameters

@dataclass
class QNetworkParams:
    arrays: dict
    width: int
    in_dim: int
    table_digest: str = ""

    def __getitem__(self, name):
        return self.arrays[name]

    def copy(self) -> "QNetworkParams":
        return QNetworkParams({k: v.copy() for k, v in self.arrays.items()},
                              self.width, self.in_dim, self.table_digest)

    def equals(self, other: "QNetworkParams") -> bool:
        return (self.width == other.width and self.in_dim == other.in_dim
                and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in PARAM_NAMES))

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())


def init_params(in_dim: int, width: int = DEFAULT_WIDTH, seed: int = 0,
                table: TripletClassTable | None = None) -> QNetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    rng = rng_for(seed, "init")
    shapes = {
        "W1": (in_dim, width), "b1": (width,), "W2": (width, width), "b2": (width,),
    }
    arrays = {}
    for tower in TOWERS:
        for name, shape in shapes.items():
            fan_in = in_dim if name in ("W1", "b1") else width
            bound = 1.0 / np.sqrt(fan_in)
            arrays[f"{tower}_{name}"] = rng.uniform(-bound, bound, shape)
    bound = 1.0 / np.sqrt(width)
    arrays["head_W1"] = rng.uniform(-bound, bound, (width, width))
    arrays["head_b1"] = rng.uniform(-bound, bound, (width,))
    arrays["head_W2"] = rng.uniform(-bound, bound, (width, 1))
    arrays["head_b2"] = rng.uniform(-bound, bound, (1,))
    digest = table.digest() if table is not None else ""
    return QNetworkParams(arrays, width, in_dim, digest)


def zero_grads(params: QNetworkParams) -> dict:
    return {k: np.zeros_like(v) for k, v in params.arrays.items()}


# ---------------------------------------------------------------------------
# Forward (inference)

def tower(params: QNetworkParams, name: str, Z: np.ndarray, exact: bool = True) -> np.ndarray:
    mm = rowwise_matmul if exact else np.matmul
    h = np.maximum(mm(Z, params[f"{name}_W1"]) + params[f"{name}_b1"], 0.0)
    return mm(h, params[f"{name}_W2"]) + params[f"{name}_b2"]


def head(params: QNetworkParams, U: np.ndarray, exact: bool = True) -> np.ndarray:
    mm = rowwise_matmul if exact else np.matmul
    h = np.maximum(mm(U, params["head_W1"]) + params["head_b1"], 0.0)
    return (mm(h, params["head_W2"]) + params["head_b2"])[:, 0]


def combine(F: np.ndarray, G: np.ndarray | None) -> np.ndarray:
    """Elementwise max of the two branches; no equalities means memory alone."""
    return F if G is None else np.maximum(F, G)


def q_from_features(params: QNetworkParams, Zm: np.ndarray, Ze: np.ndarray | None) -> float:
    """Q for one action given its memory features ``(|M|, E)`` and equality features."""
    if len(Zm) == 0:
        raise ValueError("memory is empty")
    F = tower(params, "mem", Zm).max(axis=0)
    G = tower(params, "eq", Ze).max(axis=0) if Ze is not None and len(Ze) else None
    return float(head(params, combine(F, G)[None, :])[0])


# ---------------------------------------------------------------------------
# State-level evaluation

class StateFeatures:
    """Dense memory/equality data of one episode for the fast featurizer.

    Rows are appended as the memory grows; the prefix never changes, so
    replay transitions can refer to it by length.
    """

    def __init__(self, state, featurizer: SumObjectiveFeaturizer | None = None):
        self.state = state
        self.fz = featurizer or sum_featurizer(state.degree_cap, state.n)
        eq = self.fz.dense(state.equalities) if state.equalities else np.zeros((0, self.fz.n_monomials))
        self.eq_left = self.fz.left(eq) if len(eq) else np.zeros((0, len(self.fz.types), self.fz.n_monomials))
        self._mem_left = np.zeros((64, len(self.fz.types), self.fz.n_monomials))
        self._rows = 0
        self.sync()

    def sync(self) -> None:
        mem = self.state.memory
        k = self._rows
        if k < len(mem):
            rows = self.fz.left(self.fz.dense([e.poly for e in mem[k:]]))
            need = k + len(rows)
            if need > len(self._mem_left):
                grown = np.zeros((max(need, 2 * len(self._mem_left)),) + self._mem_left.shape[1:])
                grown[:k] = self._mem_left[:k]
                self._mem_left = grown
            self._mem_left[k:need] = rows
            self._rows = need

    @property
    def n_memory(self) -> int:
        return self._rows

    def mem_left(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Factors of memory rows ``start..stop`` (a read-only view)."""
        self.sync()
        stop = self._rows if stop is None else min(stop, self._rows)
        view = self._mem_left[start:max(start, stop)]
        view.flags.writeable = False
        return view

    def action_matrix(self, polys) -> np.ndarray:
        return self.fz.dense(polys)


def _branch_max(params, name, left, A, W, exact=True, chunk=4096):
    """Elementwise max over rows of tower(z(row, a)) for every action: ``(|A|, H)``.

    ``left`` holds per-row featurizer factors and ``W`` the type-to-class map.
    """
    if len(left) == 0 or len(A) == 0:
        return None
    out = np.full((len(A), params.width), -np.inf)
    per = max(1, chunk // len(A))
    for s in range(0, len(left), per):
        Z = np.transpose(left[s:s + per] @ A.T, (0, 2, 1)) @ W  # (rows, |A|, classes)
        rows, na, _ = Z.shape
        V = tower(params, name, Z.reshape(rows * na, -1), exact).reshape(rows, na, -1)
        np.maximum(out, V.max(axis=0), out=out)
    return out


def q_all_actions(state, params: QNetworkParams, cache: "ActionCache | None" = None,
                  feats: StateFeatures | None = None):
    """Q-values for every legal action of ``state``, in ``legal_actions`` order.

    Returns ``(actions, q)``.  With a cache, old actions only fold in the
    memory rows added since the cache stamp.
    """
    if not state.memory:
        raise ValueError("memory is empty")
    feats = feats or (cache.features if cache is not None else StateFeatures(state))
    pairs = state.legal_with_polys()
    actions = [a for a, _ in pairs]
    if not actions:
        return actions, np.zeros(0)
    A = feats.action_matrix([p for _, p in pairs])
    L = len(state.memory)
    if cache is None:
        W = feats.fz.W
        F = _branch_max(params, "mem", feats.mem_left(0, L), A, W)
        G = _branch_max(params, "eq", feats.eq_left, A, W)
    else:
        F, G = cache.update(state, params, actions, A, feats)
    U = combine(F, G)
    return actions, head(params, U)


class ActionCache:
    """Running memory-branch maxima per action, valid for the first ``stamp`` rows.

    Equality features never change within an episode, so the equality
    branch is cached alongside.  Values are only meaningful for the
    parameters they were computed with; ``reset`` after a parameter change
    unless staleness is acceptable.
    """

    def __init__(self, state, features: StateFeatures | None = None):
        self.state = state
        self.features = features or StateFeatures(state)
        self.stamp = 0
        self.F: dict = {}
        self.G: dict = {}

    def reset(self) -> None:
        self.stamp = 0
        self.F.clear()
        self.G.clear()

    def update(self, state, params, actions, A, feats):
        if state is not self.state:
            raise StaleCacheError("cache belongs to another episode")
        L = len(state.memory)
        if self.stamp > L:
            raise StaleCacheError(f"cache stamp {self.stamp} exceeds memory length {L}")
        old = [k for k, a in enumerate(actions) if a in self.F]
        new = [k for k, a in enumerate(actions) if a not in self.F]
        H = params.width
        W = feats.fz.W
        F = np.empty((len(actions), H))
        G = None if len(feats.eq_left) == 0 else np.empty((len(actions), H))
        if old:
            idx = np.array(old)
            Fo = np.stack([self.F[actions[k]] for k in old])
            delta = _branch_max(params, "mem", feats.mem_left(self.stamp, L), A[idx], W)
            if delta is not None:
                Fo = np.maximum(Fo, delta)
            F[idx] = Fo
            if G is not None:
                G[idx] = np.stack([self.G[actions[k]] for k in old])
        if new:
            idx = np.array(new)
            F[idx] = _branch_max(params, "mem", feats.mem_left(0, L), A[idx], W)
            if G is not None:
                G[idx] = _branch_max(params, "eq", feats.eq_left, A[idx], W)
        # actions that became illegal drop out here
        self.F = {a: F[k] for k, a in enumerate(actions)}
        if G is not None:
            self.G = {a: G[k] for k, a in enumerate(actions)}
        self.stamp = L
        return F, G


def q_value(state, action, params: QNetworkParams, table: TripletClassTable | None = None) -> float:
    """Q for one action via the general exact featurizer (any objective)."""
    from .features import featurize

    table = table or build_class_table(state.degree_cap)
    a = state.action_poly(action)
    f = state.objective
    Zm = np.stack([featurize(e.poly, f, a, table) for e in state.memory])
    Ze = np.stack([featurize(e, f, a, table) for e in state.equalities]) if state.equalities else None
    return q_from_features(params, Zm, Ze)


# ---------------------------------------------------------------------------
# Training forward/backward

@dataclass
class Sample:
    """Features of one (state, action): memory rows and equality rows."""

    Zm: np.ndarray
    Ze: np.ndarray | None = None


@dataclass
class ForwardTrace:
    q: np.ndarray
    parts: dict = field(default_factory=dict)


def _tower_fwd(params, name, Z):
    a1 = Z @ params[f"{name}_W1"] + params[f"{name}_b1"]
    h1 = np.maximum(a1, 0.0)
    out = h1 @ params[f"{name}_W2"] + params[f"{name}_b2"]
    return a1, h1, out


def _segment_argmax(V: np.ndarray, offsets: list) -> np.ndarray:
    """Per segment, the row of the elementwise max (first occurrence on ties)."""
    idx = np.empty((len(offsets) - 1, V.shape[1]), dtype=np.int64)
    for s in range(len(offsets) - 1):
        lo, hi = offsets[s], offsets[s + 1]
        idx[s] = lo + np.argmax(V[lo:hi], axis=0)
    return idx


def forward_batch(params: QNetworkParams, samples: list) -> ForwardTrace:
    """Batched forward that records what :func:`backward_batch` needs."""
    B = len(samples)
    H = params.width
    cols = np.arange(H)
    parts = {}
    branches = {}
    for name, rows in (("mem", [s.Zm for s in samples]),
                       ("eq", [s.Ze if s.Ze is not None else np.zeros((0, params.in_dim)) for s in samples])):
        sizes = [len(r) for r in rows]
        if name == "mem" and min(sizes) == 0:
            raise ValueError("memory is empty")
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int).tolist()
        has = np.array([k > 0 for k in sizes])
        Z = np.concatenate(rows) if offsets[-1] else np.zeros((0, params.in_dim))
        a1, h1, out = _tower_fwd(params, name, Z)
        agg = np.full((B, H), -np.inf)
        arg = np.zeros((B, H), dtype=np.int64)
        present = [s for s in range(B) if has[s]]
        if present:
            am = _segment_argmax(out, offsets)
            for s in present:
                arg[s] = am[s]
                agg[s] = out[am[s], cols]
        parts[name] = (Z, a1, h1, arg, has)
        branches[name] = agg
    F, G = branches["mem"], branches["eq"]
    from_F = F >= G  # ties go to the memory branch
    U = np.where(from_F, F, G)
    a3 = U @ params["head_W1"] + params["head_b1"]
    h3 = np.maximum(a3, 0.0)
    q = (h3 @ params["head_W2"] + params["head_b2"])[:, 0]
    parts["head"] = (U, a3, h3, from_F)
    return ForwardTrace(q, parts)


def backward_batch(params: QNetworkParams, trace: ForwardTrace, upstream: np.ndarray) -> dict:
    """Gradient of ``sum_b upstream[b] * q[b]`` with respect to every parameter."""
    g = zero_grads(params)
    up = np.asarray(upstream, dtype=float).reshape(-1, 1)
    U, a3, h3, from_F = trace.parts["head"]
    g["head_W2"] = h3.T @ up
    g["head_b2"] = up.sum(axis=0)
    d3 = (up @ params["head_W2"].T) * (a3 > 0)
    g["head_W1"] = U.T @ d3
    g["head_b1"] = d3.sum(axis=0)
    dU = d3 @ params["head_W1"].T
    H = params.width
    for name, mask in (("mem", from_F), ("eq", ~from_F)):
        Z, a1, h1, arg, has = trace.parts[name]
        dagg = np.where(mask, dU, 0.0)
        dout = np.zeros((len(Z), H))
        # argmax rows of different samples never coincide, so plain assignment suffices
        dout[arg[has], np.arange(H)] = dagg[has]
        g[f"{name}_W2"] = h1.T @ dout
        g[f"{name}_b2"] = dout.sum(axis=0)
        d1 = (dout @ params[f"{name}_W2"].T) * (a1 > 0)
        g[f"{name}_W1"] = Z.T @ d1
        g[f"{name}_b1"] = d1.sum(axis=0)
    return g


def backward(params: QNetworkParams, sample: Sample, upstream: float = 1.0) -> dict:
    """Gradient of ``upstream * q(sample)``."""
    return backward_batch(params, forward_batch(params, [sample]), np.array([upstream]))


def l1_loss_and_grads(params: QNetworkParams, samples: list, targets: np.ndarray):
    """Mean absolute TD error and its gradient (subgradient 0 at a tie)."""
    trace = forward_batch(params, samples)
    diff = trace.q - np.asarray(targets, dtype=float)
    loss = float(np.abs(diff).mean())
    grads = backward_batch(params, trace, np.sign(diff) / len(samples))
    return loss, grads, trace.q


# ---------------------------------------------------------------------------
# Optimizer

@dataclass
class OptimizerState:
    sq: dict

    @classmethod
    def zeros_like(cls, params: QNetworkParams) -> "OptimizerState":
        return cls(zero_grads(params))

    def copy(self) -> "OptimizerState":
        return OptimizerState({k: v.copy() for k, v in self.sq.items()})


def rmsprop_step(params: QNetworkParams, grads: dict, opt: OptimizerState,
                 lr: float = 1e-5, decay: float = 0.99, eps: float = 1e-8) -> QNetworkParams:
    """In-place RMSProp update; returns ``params`` for convenience."""
    for name, gr in grads.items():
        if not np.isfinite(gr).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
    for name, gr in grads.items():
        acc = opt.sq[name]
        acc *= decay
        acc += (1.0 - decay) * gr * gr
        params.arrays[name] -= lr * gr / np.sqrt(acc + eps)
    return params


# ---------------------------------------------------------------------------
# Model files

def save(params: QNetworkParams, path, hyper: dict | None = None,
         opt: OptimizerState | None = None) -> None:
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "width": params.width,
        "in_dim": params.in_dim,
        "table_digest": params.table_digest,
        "hyper": hyper or {},
    }
    payload = {f"p_{k}": np.ascontiguousarray(v, dtype=np.float64) for k, v in params.arrays.items()}
    if opt is not None:
        payload.update({f"o_{k}": v for k, v in opt.sq.items()})
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
             **payload)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load(path, table: TripletClassTable | None = None, with_optimizer: bool = False):
    """Load a model; ``table`` (if given) must match the stored class-table digest."""
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            arrays = {k[2:]: data[k].copy() for k in data.files if k.startswith("p_")}
            opt = {k[2:]: data[k].copy() for k in data.files if k.startswith("o_")}
    except (OSError, ValueError, KeyError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if meta.get("format") != MODEL_FORMAT or meta.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model format {meta.get('format')} v{meta.get('version')}")
    if set(arrays) != set(PARAM_NAMES):
        raise ModelFileError("model file is missing parameters")
    if table is not None and meta["table_digest"] != table.digest():
        raise ModelFileError("class-table digest mismatch: model was built for another featurization")
    params = QNetworkParams(arrays, int(meta["width"]), int(meta["in_dim"]), meta["table_digest"])
    if params["mem_W1"].shape != (params.in_dim, params.width):
        raise ModelFileError("parameter shapes disagree with the header")
    if with_optimizer:
        return params, meta, (OptimizerState(opt) if opt else None)
    return params, meta
