"""The proof-search environment.

State: objective ``f = sum x_i``, a memory of polynomials known to be
nonnegative (the 2n axioms ``x_i``, ``1 - x_i`` followed by derived lemmas),
the edge equalities, and the best bound ``gamma`` certified by the memory.
An action multiplies one memory entry by ``x_i`` or ``1 - x_i``; the reduced
product joins the memory and the bound LP is re-solved from its previous
basis.  The reward is the decrease of the bound, so it is never negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .bound import BoundProgram
from .graphs import Graph
from .lp import DEFAULT_PIVOT_BUDGET
from .poly import Polynomial, mul_linear
from .proof import AxiomRef, Factor, ProofStep, ProofTrace, StepRef


class IllegalAction(ValueError):
    pass


@dataclass(frozen=True)
class Axiom:
    factor: Factor


@dataclass(frozen=True)
class Derived:
    parent: int  # memory index
    factor: Factor


@dataclass(frozen=True)
class MemoryEntry:
    poly: Polynomial
    provenance: object  # Axiom | Derived


@dataclass(frozen=True, order=True)
class Action:
    memory_index: int
    factor: Factor

    def index(self, n: int) -> int:
        """Position among the 2n|M| raw candidates (used for tie-breaking)."""
        return self.memory_index * 2 * n + 2 * self.factor.var + int(self.factor.negated)


class ProverState:
    """Mutable environment state; :func:`apply` advances it in place."""

    def __init__(self, graph: Graph, degree_cap: int = 2, max_steps: int = 100,
                 pivot_budget: int = DEFAULT_PIVOT_BUDGET):
        if degree_cap < 1:
            raise ValueError("degree_cap must be >= 1")
        self.graph = graph
        self.ctx = graph.ctx
        self.n = graph.n
        self.degree_cap = degree_cap
        self.max_steps = max_steps
        self.objective = Polynomial.sum_of_vars(graph.n)
        self.equalities = [Polynomial({e: 1}) for e in graph.sorted_edges()]
        self.memory: list = []
        self.actions_taken: list = []
        self.step = 0
        self._index: dict = {}
        self._products: list = []  # per entry: list of (Factor, product) that pass zero/cap filters
        axioms = []
        for i in range(graph.n):
            for negated in (False, True):
                fac = Factor(i, negated)
                axioms.append(MemoryEntry(fac.poly(), Axiom(fac)))
        self.program = BoundProgram(self.objective, pivot_budget=pivot_budget)
        for entry in axioms:
            self._push(entry)
        self.bound: Fraction = self.program.bound()
        self.bounds = [self.bound]
        self.rewards: list = []

    # -- memory ------------------------------------------------------------
    def _push(self, entry: MemoryEntry) -> None:
        self._index[entry.poly] = len(self.memory)
        self.memory.append(entry)
        self.program.add(entry.poly)
        prods = []
        for i in range(self.n):
            for negated in (False, True):
                p = mul_linear(entry.poly, i, negated, self.ctx)
                if p and p.degree() <= self.degree_cap:
                    prods.append((Factor(i, negated), p))
        self._products.append(prods)

    @property
    def memory_polys(self) -> list:
        return [e.poly for e in self.memory]

    @property
    def lp_basis(self) -> BoundProgram:
        return self.program

    def contains(self, p: Polynomial) -> bool:
        return p in self._index

    def candidate_count(self) -> int:
        return 2 * self.n * len(self.memory)

    def action_poly(self, a: Action) -> Polynomial:
        entry = self.memory[a.memory_index]
        return mul_linear(entry.poly, a.factor.var, a.factor.negated, self.ctx)

    def legal_actions(self) -> list:
        out = []
        index = self._index
        for k, prods in enumerate(self._products):
            for fac, p in prods:
                if p not in index:
                    out.append(Action(k, fac))
        return out

    def legal_with_polys(self) -> list:
        """``(action, product)`` pairs for every legal action."""
        out = []
        index = self._index
        for k, prods in enumerate(self._products):
            for fac, p in prods:
                if p not in index:
                    out.append((Action(k, fac), p))
        return out

    def done(self) -> bool:
        return self.step >= self.max_steps or not self.legal_actions()

    # -- dynamics ----------------------------------------------------------
    def apply(self, a: Action) -> Fraction:
        if not 0 <= a.memory_index < len(self.memory):
            raise IllegalAction(f"no memory entry {a.memory_index}")
        if not 0 <= a.factor.var < self.n:
            raise IllegalAction(f"no variable {a.factor.var}")
        p = self.action_poly(a)
        if not p:
            raise IllegalAction("product reduces to zero")
        if p.degree() > self.degree_cap:
            raise IllegalAction(f"product has degree {p.degree()} > cap {self.degree_cap}")
        if p in self._index:
            raise IllegalAction("product duplicates a memory entry")
        self._push(MemoryEntry(p, Derived(a.memory_index, a.factor)))
        new_bound = self.program.bound()
        reward = self.bound - new_bound
        self.bound = new_bound
        self.bounds.append(new_bound)
        self.rewards.append(reward)
        self.actions_taken.append(a)
        self.step += 1
        return reward

    def multipliers(self) -> list:
        return self.program.multipliers()

    def snapshot(self) -> tuple:
        return (self.graph, tuple(self.actions_taken), self.degree_cap, self.max_steps)

    def copy(self) -> "ProverState":
        return replay(*self.snapshot())


def init_state(g: Graph, degree_cap: int = 2, max_steps: int = 100) -> ProverState:
    return ProverState(g, degree_cap, max_steps)


def legal_actions(s: ProverState) -> list:
    return s.legal_actions()


def apply(s: ProverState, a: Action) -> tuple:
    """Advance ``s`` in place by action ``a``; returns ``(s, reward)``."""
    reward = s.apply(a)
    return s, reward


def replay(graph: Graph, actions, degree_cap: int = 2, max_steps: int = 100) -> ProverState:
    s = ProverState(graph, degree_cap, max_steps)
    for a in actions:
        s.apply(a)
    return s


# a policy returns the next action, or None once it has nothing more to play
Policy = Callable[[ProverState], "Action | None"]


def run_episode(g: Graph, policy: Policy, degree_cap: int = 2, max_steps: int = 100):
    s = ProverState(g, degree_cap, max_steps)
    while s.step < max_steps:
        if not s.legal_actions():
            break
        a = policy(s)
        if a is None:
            break
        s.apply(a)
    return s, extract_proof(s)


def extract_proof(s: ProverState) -> ProofTrace:
    """Certificate for the current bound, pruned to what the LP uses."""
    lam = s.multipliers()
    used = [k for k, w in enumerate(lam) if w]
    needed: set = set()
    stack = list(used)
    while stack:
        k = stack.pop()
        prov = s.memory[k].provenance
        if isinstance(prov, Derived) and k not in needed:
            needed.add(k)
            stack.append(prov.parent)
    order = sorted(needed)
    renum = {k: i for i, k in enumerate(order)}

    def ref(k):
        prov = s.memory[k].provenance
        if isinstance(prov, Axiom):
            return AxiomRef(prov.factor)
        return StepRef(renum[k])

    steps = []
    for k in order:
        prov = s.memory[k].provenance
        steps.append(ProofStep(s.memory[k].poly, ref(prov.parent), prov.factor))
    combination = [(ref(k), lam[k]) for k in used]
    return ProofTrace(s.graph, steps, combination, s.bound)


# ---------------------------------------------------------------------------
# Scripted policies

def sequential_policy(s: ProverState) -> Action:
    """Multiply the newest lemma by ``1 - x_{t+1}`` (starts from ``1 - x_1``).

    On a complete graph this derives ``1 - x_1 - ... - x_n`` with every
    lemma of degree one.  Stops once every variable has been used.
    """
    if s.step + 1 >= s.n:
        return None
    if s.step == 0:
        return Action(2 * 0 + 1, Factor(1, True))
    return Action(len(s.memory) - 1, Factor(s.step + 1, True))


def scripted_from_trace(trace: ProofTrace) -> Policy:
    """Policy that replays the derivation steps of ``trace`` in order."""
    plan = list(trace.steps)

    def policy(s: ProverState) -> Action | None:
        if s.step >= len(plan):
            return None
        step = plan[s.step]
        return Action(_memory_index(s, step.parent), step.factor)

    def _memory_index(s, ref):
        if isinstance(ref, AxiomRef):
            return 2 * ref.factor.var + int(ref.factor.negated)
        return 2 * s.n + ref.index

    return policy
