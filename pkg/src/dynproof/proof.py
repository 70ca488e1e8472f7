"""Proof traces: data model, independent checker, text and JSON forms.

A trace lists derived lemmas, each the reduced product of an axiom or an
earlier lemma with ``x_i`` or ``1 - x_i``, followed by a nonnegative rational
combination of axioms and lemmas that equals ``bound - f`` in the quotient
ring.  :func:`verify` needs nothing but the trace itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import Graph
from .poly import (MalformedInput, Polynomial, fraction_str, mul_linear,
                   parse_polynomial, reduce, render_polynomial)
from .report import VerificationReport

TRACE_FORMAT = "dynproof-trace"
TRACE_VERSION = 1


@dataclass(frozen=True, order=True)
class Factor:
    """``x_var`` or, when ``negated``, ``1 - x_var``."""

    var: int
    negated: bool

    def poly(self) -> Polynomial:
        return Polynomial.one_minus(self.var) if self.negated else Polynomial.var(self.var)

    def code(self) -> str:
        return f"1-x{self.var + 1}" if self.negated else f"x{self.var + 1}"

    @classmethod
    def from_code(cls, s: str) -> "Factor":
        m = re.fullmatch(r"\s*(1\s*-\s*)?x(\d+)\s*", s)
        if not m or int(m.group(2)) < 1:
            raise MalformedInput(f"bad factor {s!r}")
        return cls(int(m.group(2)) - 1, bool(m.group(1)))

    def render(self) -> str:
        return f"({render_polynomial(self.poly())})"


@dataclass(frozen=True)
class AxiomRef:
    factor: Factor

    def code(self) -> str:
        return "axiom:" + self.factor.code()


@dataclass(frozen=True)
class StepRef:
    index: int

    def code(self) -> str:
        return f"step:{self.index}"


def ref_from_code(s: str):
    kind, _, rest = s.partition(":")
    if kind == "axiom":
        return AxiomRef(Factor.from_code(rest))
    if kind == "step":
        try:
            return StepRef(int(rest))
        except ValueError:
            raise MalformedInput(f"bad step reference {s!r}") from None
    raise MalformedInput(f"bad reference {s!r}")


@dataclass(frozen=True)
class ProofStep:
    poly: Polynomial
    parent: object  # AxiomRef | StepRef
    factor: Factor


@dataclass
class ProofTrace:
    graph: Graph
    steps: list = field(default_factory=list)
    combination: list = field(default_factory=list)  # (ref, Fraction)
    claimed_bound: Fraction = Fraction(0)
    objective: Polynomial | None = None

    def objective_poly(self) -> Polynomial:
        if self.objective is None:
            return Polynomial.sum_of_vars(self.graph.n)
        return self.objective

    def __eq__(self, other):
        if not isinstance(other, ProofTrace):
            return NotImplemented
        return (self.graph == other.graph and self.steps == other.steps
                and self.combination == other.combination
                and self.claimed_bound == other.claimed_bound
                and self.objective_poly() == other.objective_poly())

    # -- JSON -------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "format": TRACE_FORMAT,
            "version": TRACE_VERSION,
            "graph": self.graph.to_json(),
            "objective": self.objective_poly().to_canonical(),
            "claimed_bound": fraction_str(self.claimed_bound),
            "steps": [
                {"poly": s.poly.to_canonical(), "parent": s.parent.code(), "factor": s.factor.code()}
                for s in self.steps
            ],
            "combination": [
                {"ref": ref.code(), "lambda": fraction_str(lam)} for ref, lam in self.combination
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProofTrace":
        try:
            if data.get("format") != TRACE_FORMAT:
                raise MalformedInput(f"not a {TRACE_FORMAT} document")
            if int(data.get("version", 0)) != TRACE_VERSION:
                raise MalformedInput(f"unsupported trace version {data.get('version')}")
            g = Graph.from_json(data["graph"])
            steps = [
                ProofStep(Polynomial.from_canonical(s["poly"]), ref_from_code(s["parent"]),
                          Factor.from_code(s["factor"]))
                for s in data["steps"]
            ]
            comb = [(ref_from_code(c["ref"]), Fraction(c["lambda"])) for c in data["combination"]]
            objective = Polynomial.from_canonical(data["objective"]) if "objective" in data else None
            return cls(g, steps, comb, Fraction(data["claimed_bound"]), objective)
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise MalformedInput(f"bad proof trace: {exc}") from exc


def verify(trace: ProofTrace) -> VerificationReport:
    """Check a trace in exact arithmetic; report the first violated check."""
    try:
        ctx = trace.graph.ctx
        polys: list = []
        for k, step in enumerate(trace.steps):
            ctx.check_var(step.factor.var)
            parent = _resolve(step.parent, polys, ctx, k)
            expected = mul_linear(parent, step.factor.var, step.factor.negated, ctx)
            if step.poly != expected:
                return VerificationReport.failure(
                    "derivation",
                    f"step {k}: {render_polynomial(step.poly)} is not "
                    f"{step.parent.code()} * {step.factor.render()} = {render_polynomial(expected)}")
            if not expected:
                return VerificationReport.failure("derivation", f"step {k} is the zero polynomial")
            polys.append(expected)
        total = Polynomial()
        for ref, lam in trace.combination:
            if lam < 0:
                return VerificationReport.failure(
                    "nonnegativity", f"{ref.code()} has negative multiplier {lam}")
            total = total + _resolve(ref, polys, ctx, len(polys)).scale(lam)
        target = reduce(Polynomial.constant(trace.claimed_bound) - trace.objective_poly(), ctx)
        if total != target:
            return VerificationReport.failure(
                "identity",
                f"combination minus (bound - f) is {render_polynomial(total - target)}, not 0")
    except MalformedInput as exc:
        return VerificationReport.failure("malformed", str(exc))
    return VerificationReport.success(
        trace.claimed_bound, f"{len(trace.steps)} steps, {len(trace.combination)} terms")


def _resolve(ref, polys: list, ctx, limit: int) -> Polynomial:
    if isinstance(ref, AxiomRef):
        ctx.check_var(ref.factor.var)
        return ref.factor.poly()
    if isinstance(ref, StepRef):
        if not 0 <= ref.index < limit:
            raise MalformedInput(f"reference to step {ref.index} not yet derived")
        return polys[ref.index]
    raise MalformedInput(f"unknown reference {ref!r}")


# ---------------------------------------------------------------------------
# Text rendering in the "[Step k] 0 <= lemma = parent * (factor)" layout

def _ref_text(ref) -> str:
    if isinstance(ref, StepRef):
        return f"[Step {ref.index}]"
    return ref.factor.render()


def _objective_text(trace: ProofTrace) -> str:
    f = trace.objective_poly()
    if f == Polynomial.sum_of_vars(trace.graph.n):
        return "sum(x_i)"
    return f"({render_polynomial(f)})"


def _bound_text(b: Fraction) -> str:
    return str(b)


def render_proof(trace: ProofTrace) -> str:
    g = trace.graph
    lines = [f"Graph: n={g.n} edges: " + " ".join(f"{i + 1}-{j + 1}" for i, j in g.sorted_edges())]
    f_text = _objective_text(trace)
    lines.append(f"Proof that {_bound_text(trace.claimed_bound)} - {f_text} >= 0:")
    for k, s in enumerate(trace.steps):
        lines.append(f"[Step {k}] 0 <= {render_polynomial(s.poly)} = "
                     f"{_ref_text(s.parent)} * {s.factor.render()}")
    comb = " + ".join(f"{lam} * {_ref_text(ref)}" for ref, lam in trace.combination) or "0"
    lines.append(f"0 <= {comb} = {_bound_text(trace.claimed_bound)} - {f_text}")
    return "\n".join(lines) + "\n"


_STEP_RE = re.compile(r"^\[Step (\d+)\]\s*0\s*<=\s*(.+?)\s*=\s*(\[Step \d+\]|\([^()]*\))\s*\*\s*(\([^()]*\))\s*$")
_REF_RE = re.compile(r"\[Step (\d+)\]|\(([^()]*)\)")
_COMB_TERM_RE = re.compile(r"^\s*(\d+(?:/\d+)?)\s*\*\s*(\[Step \d+\]|\([^()]*\))\s*$")


def _parse_ref(text: str, ctx):
    text = text.strip()
    m = re.fullmatch(r"\[Step (\d+)\]", text)
    if m:
        return StepRef(int(m.group(1)))
    if text.startswith("(") and text.endswith(")"):
        return AxiomRef(_factor_from_poly(parse_polynomial(text[1:-1], ctx)))
    raise MalformedInput(f"bad reference {text!r}")


def _factor_from_poly(p: Polynomial) -> Factor:
    for i in p.variables():
        if p == Polynomial.var(i):
            return Factor(i, False)
        if p == Polynomial.one_minus(i):
            return Factor(i, True)
    raise MalformedInput(f"{render_polynomial(p)} is not x_i or 1 - x_i")


def parse_proof(text: str, graph: Graph | None = None) -> ProofTrace:
    """Inverse of :func:`render_proof`.

    Also accepts the combination wrapped over several lines with leading
    ``+`` continuations.  ``graph`` is required when the text has no
    ``Graph:`` header.
    """
    lines = [ln.rstrip() for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if lines and lines[0].startswith("Graph:"):
        graph = _parse_graph_header(lines.pop(0))
    if graph is None:
        raise MalformedInput("proof text has no Graph: header and no graph was given")
    ctx = graph.ctx
    if not lines or not lines[0].startswith("Proof that"):
        raise MalformedInput("missing 'Proof that ... >= 0:' header")
    header = lines.pop(0)
    hm = re.fullmatch(r"Proof that\s+(\S+)\s*-\s*(.+?)\s*>=\s*0:?", header)
    if not hm:
        raise MalformedInput(f"bad header {header!r}")
    bound = Fraction(hm.group(1))
    objective = _parse_objective(hm.group(2), graph)
    steps = []
    k = 0
    while lines and lines[0].startswith("[Step"):
        ln = lines.pop(0)
        m = _STEP_RE.match(ln.strip())
        if not m:
            raise MalformedInput(f"bad step line {ln!r}")
        if int(m.group(1)) != k:
            raise MalformedInput(f"expected [Step {k}], found [Step {m.group(1)}]")
        poly = parse_polynomial(m.group(2), ctx)
        parent = _parse_ref(m.group(3), ctx)
        factor = _factor_from_poly(parse_polynomial(m.group(4)[1:-1], ctx))
        steps.append(ProofStep(poly, parent, factor))
        k += 1
    rest = " ".join(ln.strip() for ln in lines)
    cm = re.fullmatch(r"0\s*<=\s*(.+?)\s*=\s*(\S+)\s*-\s*(.+?)\.?", rest)
    if not cm:
        raise MalformedInput(f"bad combination line {rest!r}")
    if Fraction(cm.group(2)) != bound:
        raise MalformedInput("combination bound differs from header bound")
    combination = []
    body = cm.group(1).strip()
    if body != "0":
        for part in _split_top_level(body):
            tm = _COMB_TERM_RE.match(part)
            if not tm:
                raise MalformedInput(f"bad combination term {part!r}")
            combination.append((_parse_ref(tm.group(2), ctx), Fraction(tm.group(1))))
    default_obj = Polynomial.sum_of_vars(graph.n)
    return ProofTrace(graph, steps, combination, bound,
                      None if objective == default_obj else objective)


def _split_top_level(body: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "+" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def _parse_objective(text: str, graph: Graph) -> Polynomial:
    text = text.strip()
    if text in ("sum(x_i)", "Σ x_i", "sum x_i"):
        return Polynomial.sum_of_vars(graph.n)
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    return parse_polynomial(text, graph.ctx)


def _parse_graph_header(line: str) -> Graph:
    m = re.fullmatch(r"Graph:\s*n=(\d+)\s+edges:\s*(.*)", line.strip())
    if not m:
        raise MalformedInput(f"bad graph header {line!r}")
    edges = set()
    for tok in m.group(2).split():
        a, _, b = tok.partition("-")
        edges.add((int(a) - 1, int(b) - 1))
    return Graph(int(m.group(1)), frozenset(edges))
