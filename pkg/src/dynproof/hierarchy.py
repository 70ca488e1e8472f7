"""Static Sherali-Adams level-l bound for the stable-set polynomial system.

Level ``l`` allows every generator ``x^alpha (1-x)^beta`` with
``|alpha| + |beta| <= l``.  Because x_i^2 = x_i, multilinear disjoint
``alpha``/``beta`` already cover everything, and since many pairs reduce to the
same polynomial modulo the edge ideal, only distinct nonzero reductions
become LP columns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .bound import BoundProgram
from .graphs import BudgetExceeded, Graph
from .poly import (MalformedInput, Polynomial, QuotientContext, fraction_str,
                   product_of_factors, reduce)
from .report import VerificationReport

DEFAULT_GENERATOR_LIMIT = 200_000


@dataclass
class GeneratorSet:
    level: int
    generators: list = field(default_factory=list)  # (alpha, beta, reduced poly)
    raw_pairs: int = 0  # (alpha, beta) pairs considered before deduplication


def enumerate_generators(ctx: QuotientContext, level: int,
                         limit: int = DEFAULT_GENERATOR_LIMIT) -> GeneratorSet:
    if level < 0:
        raise MalformedInput("level must be >= 0")
    out = GeneratorSet(level)
    seen: set = set()
    n = ctx.n
    for size in range(level + 1):
        for alpha_size in range(size + 1):
            for alpha in itertools.combinations(range(n), alpha_size):
                if ctx.kills(alpha):
                    continue
                rest = [v for v in range(n) if v not in alpha]
                for beta in itertools.combinations(rest, size - alpha_size):
                    out.raw_pairs += 1
                    p = product_of_factors(alpha, beta, ctx)
                    if not p or p in seen:
                        continue
                    seen.add(p)
                    out.generators.append((alpha, beta, p))
                    if len(out.generators) > limit:
                        raise BudgetExceeded(
                            f"level {level} needs more than {limit} generators")
    return out


@dataclass
class StaticCertificate:
    graph: Graph
    level: int
    bound: Fraction
    terms: list  # (alpha, beta, lambda) with lambda > 0
    objective: Polynomial | None = None
    n_columns: int = 0
    n_rows: int = 0
    raw_pairs: int = 0

    def objective_poly(self) -> Polynomial:
        return self.objective if self.objective is not None else Polynomial.sum_of_vars(self.graph.n)

    def to_json(self) -> dict:
        return {
            "format": "dynproof-static-certificate",
            "version": 1,
            "graph": self.graph.to_json(),
            "level": self.level,
            "bound": fraction_str(self.bound),
            "terms": [
                {"alpha": [i + 1 for i in a], "beta": [j + 1 for j in b],
                 "lambda": fraction_str(lam)}
                for a, b, lam in self.terms
            ],
            "lp_columns": self.n_columns,
            "lp_rows": self.n_rows,
            "raw_pairs": self.raw_pairs,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StaticCertificate":
        try:
            g = Graph.from_json(data["graph"])
            terms = [
                (tuple(i - 1 for i in t["alpha"]), tuple(j - 1 for j in t["beta"]),
                 Fraction(t["lambda"]))
                for t in data["terms"]
            ]
            return cls(g, int(data["level"]), Fraction(data["bound"]), terms,
                       n_columns=data.get("lp_columns", 0), n_rows=data.get("lp_rows", 0),
                       raw_pairs=data.get("raw_pairs", 0))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise MalformedInput(f"bad static certificate: {exc}") from exc


def solve_level(g: Graph, level: int, limit: int = DEFAULT_GENERATOR_LIMIT):
    """Exact level-``level`` bound and its certificate."""
    ctx = g.ctx
    gens = enumerate_generators(ctx, level, limit)
    f = Polynomial.sum_of_vars(g.n)
    prog = BoundProgram(f, [p for _, _, p in gens.generators])
    bound = prog.bound()
    lam = prog.multipliers()
    terms = [(a, b, w) for (a, b, _), w in zip(gens.generators, lam) if w]
    cert = StaticCertificate(g, level, bound, terms, n_columns=prog.n_columns,
                             n_rows=prog.n_rows, raw_pairs=gens.raw_pairs)
    return bound, cert


def check_lower_bound_theorem(g: Graph, level: int, bound: Fraction) -> bool:
    """Whether ``bound >= n / level``, which every level-l optimum satisfies."""
    if level <= 0:
        return True
    return Fraction(bound) >= Fraction(g.n, level)


def verify_static_certificate(cert: StaticCertificate) -> VerificationReport:
    g = cert.graph
    try:
        ctx = g.ctx
        total = Polynomial()
        for k, (alpha, beta, lam) in enumerate(cert.terms):
            if lam < 0:
                return VerificationReport.failure("nonnegativity", f"term {k} has lambda {lam} < 0")
            if len(alpha) + len(beta) > cert.level:
                return VerificationReport.failure(
                    "level", f"term {k} has degree {len(alpha) + len(beta)} > level {cert.level}")
            if set(alpha) & set(beta):
                return VerificationReport.failure("generator", f"term {k} has overlapping alpha/beta")
            for v in (*alpha, *beta):
                ctx.check_var(v)
            total = total + product_of_factors(alpha, beta, ctx).scale(lam)
        lhs = reduce(Polynomial.constant(cert.bound) - cert.objective_poly(), ctx)
        if lhs != total:
            return VerificationReport.failure(
                "identity", f"bound - f differs from the combination by {lhs - total}")
    except MalformedInput as exc:
        return VerificationReport.failure("malformed", str(exc))
    return VerificationReport.success(cert.bound, detail=f"{len(cert.terms)} generators")


def lp_size(cert: StaticCertificate) -> int:
    """Columns plus constraints, the size reported in benchmark tables."""
    return cert.n_columns + cert.n_rows
