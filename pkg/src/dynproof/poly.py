"""Exact multilinear polynomials modulo the stable-set ideal.

Every polynomial lives in the quotient ring R[x] / (x_i^2 - x_i, x_i x_j for
edges ij).  Monomials are therefore sorted tuples of distinct variable
indices, and a monomial that contains both endpoints of an edge is zero.

Variables are 0-based internally; every text form uses 1-based names
(``x1``, ``x2``, ...) to match the usual way proofs are written down.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Monomial = tuple  # sorted tuple of distinct 0-based variable indices

ONE: Monomial = ()


class MalformedInput(ValueError):
    """Input that does not describe a valid object for the given context."""


def monomial_key(m: Monomial):
    """Canonical total order on monomials: degree first, then lexicographic."""
    return (len(m), m)


def as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, float):
        raise TypeError("float coefficients are not exact; pass a Fraction or str")
    return Fraction(c)


@dataclass(frozen=True)
class QuotientContext:
    """Variable count plus the edge set whose monomials vanish."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise MalformedInput(f"self-loop on variable {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise MalformedInput(f"edge {e} out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))
        adj = [set() for _ in range(self.n)]
        for i, j in norm:
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_adj", tuple(frozenset(a) for a in adj))

    @property
    def adjacency(self) -> tuple:
        return self._adj

    def kills(self, m: Iterable[int]) -> bool:
        """True if the variable set contains an edge, i.e. reduces to zero."""
        m = tuple(m)
        adj = self._adj
        for k, i in enumerate(m):
            a = adj[i]
            for j in m[k + 1:]:
                if j in a:
                    return True
        return False

    def check_var(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise MalformedInput(f"variable index {i} out of range for n={self.n}")


class Polynomial:
    """Immutable sparse polynomial with Fraction coefficients.

    Terms are kept in canonical order, so equal polynomials compare, hash
    and serialize identically.  Arithmetic does not reduce on its own;
    reduction needs a :class:`QuotientContext` (see :func:`reduce`).
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, object] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for m, c in items:
            m = tuple(m)
            c = as_fraction(c)
            if c:
                acc[m] = acc.get(m, 0) + c
        self._terms = tuple(
            sorted(((m, c) for m, c in acc.items() if c), key=lambda t: monomial_key(t[0]))
        )
        self._hash = None

    @classmethod
    def _from_sorted(cls, terms: tuple) -> "Polynomial":
        p = cls.__new__(cls)
        p._terms = terms
        p._hash = None
        return p

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, c) -> "Polynomial":
        return cls({ONE: c})

    @classmethod
    def var(cls, i: int) -> "Polynomial":
        return cls({(i,): 1})

    @classmethod
    def one_minus(cls, i: int) -> "Polynomial":
        return cls({ONE: 1, (i,): -1})

    @classmethod
    def sum_of_vars(cls, n: int) -> "Polynomial":
        return cls({(i,): 1 for i in range(n)})

    # -- accessors ------------------------------------------------------
    @property
    def terms(self) -> tuple:
        return self._terms

    def as_dict(self) -> dict:
        return dict(self._terms)

    def coeff(self, m: Monomial) -> Fraction:
        for mm, c in self._terms:
            if mm == m:
                return c
        return Fraction(0)

    def monomials(self) -> tuple:
        return tuple(m for m, _ in self._terms)

    def degree(self) -> int:
        return len(self._terms[-1][0]) if self._terms else -1

    def is_zero(self) -> bool:
        return not self._terms

    def variables(self) -> set:
        return {i for m, _ in self._terms for i in m}

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == Polynomial.constant(other)._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._terms)
        return self._hash

    def __len__(self):
        return len(self._terms)

    # -- arithmetic (linear operations preserve reducedness) ------------
    def __add__(self, other: "Polynomial") -> "Polynomial":
        acc = dict(self._terms)
        for m, c in other._terms:
            acc[m] = acc.get(m, 0) + c
        return Polynomial(acc)

    def __neg__(self):
        return Polynomial._from_sorted(tuple((m, -c) for m, c in self._terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, c) -> "Polynomial":
        c = as_fraction(c)
        if not c:
            return Polynomial()
        return Polynomial._from_sorted(tuple((m, c * v) for m, v in self._terms))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(raw_product(self, other).items())
        return self.scale(other)

    __rmul__ = scale

    def evaluate(self, point: Sequence) -> Fraction:
        total = Fraction(0)
        for m, c in self._terms:
            v = c
            for i in m:
                v *= point[i]
                if not v:
                    break
            total += v
        return total

    def permute(self, perm: Sequence[int]) -> "Polynomial":
        """Relabel variable ``i`` as ``perm[i]``."""
        return Polynomial(
            (tuple(sorted(perm[i] for i in m)), c) for m, c in self._terms
        )

    # -- text -----------------------------------------------------------
    def to_canonical(self) -> list:
        """Machine form: ``[[sorted 1-based indices], "num/den"], ...``."""
        return [[[i + 1 for i in m], fraction_str(c)] for m, c in self._terms]

    @classmethod
    def from_canonical(cls, data) -> "Polynomial":
        return cls((tuple(i - 1 for i in m), Fraction(c)) for m, c in data)

    def __str__(self):
        return render_polynomial(self)

    def __repr__(self):
        return f"Polynomial({render_polynomial(self)!r})"


def fraction_str(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def raw_product(p: Polynomial, q: Polynomial) -> dict:
    """Product with Boolean idempotence applied but no edge reduction."""
    acc: dict = {}
    for m1, c1 in p.terms:
        s1 = set(m1)
        for m2, c2 in q.terms:
            m = tuple(sorted(s1.union(m2)))
            acc[m] = acc.get(m, 0) + c1 * c2
    return acc


def reduce(raw, ctx: QuotientContext) -> Polynomial:
    """Normal form of a raw polynomial in the quotient ring.

    ``raw`` maps exponent descriptions to coefficients.  A key may be a
    tuple of variable indices with repetition (``(0, 0, 1)`` is x1^2 x2) or
    a mapping ``{var: exponent}``.  A :class:`Polynomial` is accepted too.
    """
    items = raw.terms if isinstance(raw, Polynomial) else (
        raw.items() if isinstance(raw, Mapping) else raw
    )
    acc: dict = {}
    for key, c in items:
        if isinstance(key, Mapping):
            vs = {v for v, e in key.items() if e < 0 or e > 0}
            if any(e < 0 for e in key.values()):
                raise MalformedInput("negative exponent")
        else:
            vs = set(key)
        for v in vs:
            ctx.check_var(v)
        m = tuple(sorted(vs))
        if ctx.kills(m):
            continue
        acc[m] = acc.get(m, 0) + as_fraction(c)
    return Polynomial(acc)


def mul_linear(p: Polynomial, var: int, negated: bool, ctx: QuotientContext) -> Polynomial:
    """Reduced product of ``p`` with ``x_var`` (or ``1 - x_var`` if ``negated``)."""
    ctx.check_var(var)
    adj = ctx.adjacency[var]
    acc: dict = {}
    for m, c in p.terms:
        if var in m:
            # x m = m when var in m, so (1 - x) m vanishes
            if not negated:
                acc[m] = acc.get(m, 0) + c
            continue
        if negated:
            acc[m] = acc.get(m, 0) + c
            c = -c
        if adj.isdisjoint(m):
            mm = tuple(sorted(m + (var,)))
            acc[mm] = acc.get(mm, 0) + c
    return Polynomial(acc)


def multiply(p: Polynomial, q: Polynomial, ctx: QuotientContext) -> Polynomial:
    return reduce(raw_product(p, q).items(), ctx)


def product_of_factors(alpha: Iterable[int], beta: Iterable[int], ctx: QuotientContext) -> Polynomial:
    """Reduced x^alpha (1-x)^beta for multilinear alpha, beta."""
    alpha = tuple(sorted(alpha))
    if ctx.kills(alpha):
        return Polynomial()
    p = Polynomial({alpha: 1})
    for j in sorted(beta):
        p = mul_linear(p, j, True, ctx)
        if not p:
            break
    return p


# ---------------------------------------------------------------------------
# SymPy-like rendering and parsing

def _render_order(m: Monomial):
    # SymPy prints terms in descending lex order with variables sorted by
    # their *string* names, so x10 comes before x2.
    names = sorted(f"x{i + 1}" for i in m)
    return names


def render_polynomial(p: Polynomial) -> str:
    if not p.terms:
        return "0"
    allnames = sorted({f"x{i + 1}" for m, _ in p.terms for i in m})
    pos = {nm: k for k, nm in enumerate(allnames)}

    def expvec(m):
        v = [0] * len(allnames)
        for i in m:
            v[pos[f"x{i + 1}"]] = 1
        return v

    ordered = sorted(p.terms, key=lambda t: expvec(t[0]), reverse=True)
    out = []
    for k, (m, c) in enumerate(ordered):
        names = _render_order(m)
        mag = abs(c)
        if names:
            body = "*".join(names)
            if mag != 1:
                body = f"{mag}*{body}"
        else:
            body = str(mag)
        if k == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append(("- " if c < 0 else "+ ") + body)
    return " ".join(out)


_TERM_RE = re.compile(r"\s*([+-])?\s*([^+-]+)")
_FACTOR_RE = re.compile(r"^(?:x(\d+)(?:\*\*(\d+))?|(\d+)(?:/(\d+))?)$")


def parse_raw(text: str) -> list:
    """Parse a SymPy-style polynomial string into raw ``(vars, coeff)`` terms.

    Variable names are 1-based (``x1``); returned indices are 0-based with
    repetition for powers.
    """
    s = text.strip()
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    if not s:
        raise MalformedInput("empty polynomial")
    terms = []
    pos = 0
    while pos < len(s):
        mt = _TERM_RE.match(s, pos)
        if not mt or mt.end() == pos:
            raise MalformedInput(f"cannot parse polynomial {text!r}")
        sign = -1 if mt.group(1) == "-" else 1
        body = mt.group(2).strip()
        coeff = Fraction(sign)
        vars_: list = []
        # "x1/5" style division by an integer applies to the whole term
        if "/" in body and not re.fullmatch(r"\d+/\d+(\*.*)?", body):
            body, _, den = body.rpartition("/")
            coeff /= int(den)
        for factor in body.split("*"):
            if not factor:
                continue
            fm = _FACTOR_RE.match(factor.strip())
            if fm is None:
                # allow "**" split artefacts such as x1**2 -> "x1", "", "2"
                raise MalformedInput(f"bad factor {factor!r} in {text!r}")
            if fm.group(1):
                vars_.extend([int(fm.group(1)) - 1] * int(fm.group(2) or 1))
            else:
                coeff *= Fraction(int(fm.group(3)), int(fm.group(4) or 1))
        terms.append((tuple(vars_), coeff))
        pos = mt.end()
    return terms


def parse_polynomial(text: str, ctx: QuotientContext) -> Polynomial:
    text = re.sub(r"\*\*", "^", text)
    raw = parse_raw(_expand_powers(text))
    return reduce(raw, ctx)


def _expand_powers(text: str) -> str:
    # x3^2 -> x3*x3 so that the factor splitter sees plain names
    return re.sub(r"x(\d+)\^(\d+)", lambda m: "*".join([f"x{m.group(1)}"] * int(m.group(2))), text)
