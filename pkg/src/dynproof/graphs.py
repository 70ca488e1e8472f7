"""Problem instances and a brute-force oracle for the stability number."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .poly import MalformedInput, QuotientContext


class BudgetExceeded(RuntimeError):
    """A computation would exceed its configured size budget."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise MalformedInput(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise MalformedInput(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def ctx(self) -> QuotientContext:
        return QuotientContext(self.n, self.edges)

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    def neighbor_masks(self) -> list:
        masks = [0] * self.n
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def is_stable(self, nodes) -> bool:
        s = set(nodes)
        return not any(i in s and j in s for i, j in self.edges)

    def relabel(self, perm) -> "Graph":
        return Graph(self.n, frozenset((perm[i], perm[j]) for i, j in self.edges))

    # -- I/O (1-based node ids in every external form) -------------------
    def to_json(self) -> dict:
        return {"n": self.n, "edges": [[i + 1, j + 1] for i, j in self.sorted_edges()]}

    @classmethod
    def from_json(cls, data: dict) -> "Graph":
        try:
            n = int(data["n"])
            edges = frozenset((int(i) - 1, int(j) - 1) for i, j in data["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"bad graph JSON: {exc}") from exc
        return cls(n, edges)

    def to_dimacs(self) -> str:
        lines = [f"p edge {self.n} {len(self.edges)}"]
        lines += [f"e {i + 1} {j + 1}" for i, j in self.sorted_edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> "Graph":
        n = None
        edges = set()
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0] == "c":
                continue
            if parts[0] == "p":
                n = int(parts[2])
            elif parts[0] == "e":
                edges.add((int(parts[1]) - 1, int(parts[2]) - 1))
            else:
                raise MalformedInput(f"unknown DIMACS line {line!r}")
        if n is None:
            raise MalformedInput("DIMACS input without a 'p edge' line")
        return cls(n, frozenset(edges))


def rng_for(seed: int, *stream: str | int) -> np.random.Generator:
    """PCG64 generator for a named sub-stream of ``seed``.

    Sub-streams are derived with ``SeedSequence`` so that e.g. graph
    sampling and agent exploration never share state.
    """
    key = [int(seed)] + [_stream_id(s) for s in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def _stream_id(s) -> int:
    if isinstance(s, int):
        return s
    return int.from_bytes(s.encode()[:8].ljust(8, b"\0"), "little")


def random_gnp(n: int, p: float, seed: int | np.random.Generator) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise MalformedInput(f"edge probability {p} outside [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "graph")
    draws = rng.random(n * (n - 1) // 2)
    edges = []
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            if draws[k] < p:
                edges.append((i, j))
            k += 1
    return Graph(n, frozenset(edges))


def complete(n: int) -> Graph:
    if n < 1:
        raise MalformedInput("complete graph needs n >= 1")
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def cycle(n: int) -> Graph:
    if n < 3:
        raise MalformedInput("cycle needs n >= 3")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def empty(n: int) -> Graph:
    return Graph(n, frozenset())


def petersen() -> Graph:
    """Outer 5-cycle 0..4, inner pentagram 5..9, spokes i -- i+5."""
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    return Graph(10, frozenset(outer + inner + spokes))


def max_stable_set(g: Graph, limit: int = 30) -> tuple:
    """Exact maximum stable set by branch and bound on bitmasks.

    Returns ``(size, sorted node list)``.
    """
    if g.n > limit:
        raise BudgetExceeded(f"max_stable_set limited to n <= {limit}, got {g.n}")
    nbr = g.neighbor_masks()
    best = [0, 0]

    def popcount(x):
        return bin(x).count("1")

    def search(cand: int, chosen: int, size: int):
        if size + popcount(cand) <= best[0]:
            return
        if not cand:
            best[0], best[1] = size, chosen
            return
        # take vertices of degree <= 1 inside the candidate set greedily
        c = cand
        while c:
            v = (c & -c).bit_length() - 1
            c &= c - 1
            if popcount(nbr[v] & cand) <= 1:
                search(cand & ~nbr[v] & ~(1 << v), chosen | (1 << v), size + 1)
                return
        # branch on a vertex of maximum degree
        v, dmax = -1, -1
        c = cand
        while c:
            u = (c & -c).bit_length() - 1
            c &= c - 1
            d = popcount(nbr[u] & cand)
            if d > dmax:
                v, dmax = u, d
        search(cand & ~nbr[v] & ~(1 << v), chosen | (1 << v), size + 1)
        search(cand & ~(1 << v), chosen, size)

    search((1 << g.n) - 1, 0, 0)
    nodes = [i for i in range(g.n) if best[1] >> i & 1]
    return best[0], nodes


def stable_set_indicators(g: Graph):
    """Yield every 0/1 indicator vector of a stable set (exponential)."""
    nbr = g.neighbor_masks()
    for mask in range(1 << g.n):
        ok = True
        m = mask
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            if nbr[v] & mask:
                ok = False
                break
        if ok:
            yield [mask >> i & 1 for i in range(g.n)]


_NAMED = re.compile(r"^(complete|cycle|empty|K|C)(\d+)$")


def load_graph(spec) -> Graph:
    """Graph from a file path (JSON or DIMACS) or a name like ``cycle7``."""
    spec = str(spec)
    if spec == "petersen":
        return petersen()
    m = _NAMED.match(spec)
    if m:
        kind, n = m.group(1), int(m.group(2))
        return {"complete": complete, "K": complete, "cycle": cycle,
                "C": cycle, "empty": empty}[kind](n)
    path = Path(spec)
    if not path.exists():
        raise MalformedInput(f"no such graph file or known graph name: {spec!r}")
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            return Graph.from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"bad graph JSON in {spec}: {exc}") from exc
    return Graph.from_dimacs(text)
