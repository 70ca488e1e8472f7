"""Relabeling-invariant features of (memory element, objective, action).

Two monomial triplets are equivalent when one simultaneous relabeling of the
variables maps one onto the other.  For multilinear monomials the orbit is
pinned down by how many variables fall in each of the seven nonempty
membership patterns (in the first monomial, in the second, in the third),
so that 7-tuple of counts is used as the canonical key.

``featurize(m, f, a)`` sums ``m_alpha f_beta a_gamma`` per class.  It is
trilinear, and invariant under relabeling because classes are.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .poly import Polynomial

# pattern bit: 1 = in first monomial, 2 = in second, 4 = in third
PATTERNS = tuple(range(1, 8))


class DegreeCapError(ValueError):
    pass


def canonical_key(m1, m2, m3) -> tuple:
    """Counts of variables per membership pattern, patterns 1..7."""
    counts = [0] * 7
    s1, s2, s3 = set(m1), set(m2), set(m3)
    for v in s1 | s2 | s3:
        counts[(v in s1) + 2 * (v in s2) + 4 * (v in s3) - 1] += 1
    return tuple(counts)


def canonical_key_by_relabeling(m1, m2, m3) -> tuple:
    """Lexicographically smallest relabeled triplet (slow reference form).

    All variables involved are mapped onto ``0..k-1`` in every possible
    order; the minimum of the relabeled, re-sorted triplets is the key.
    """
    vs = sorted(set(m1) | set(m2) | set(m3))
    best = None
    for perm in itertools.permutations(range(len(vs))):
        rel = dict(zip(vs, perm))
        cand = tuple(tuple(sorted(rel[v] for v in m)) for m in (m1, m2, m3))
        if best is None or cand < best:
            best = cand
    return best


def key_degrees(key: tuple) -> tuple:
    d = [0, 0, 0]
    for p, c in zip(PATTERNS, key):
        for b in range(3):
            if p >> b & 1:
                d[b] += c
    return tuple(d)


class TripletClassTable:
    """Ordered list of canonical keys; the order fixes the feature layout."""

    def __init__(self, max_degree: int, keys):
        self.max_degree = max_degree
        self.keys = list(keys)
        self.index = {k: i for i, k in enumerate(self.keys)}

    def __len__(self):
        return len(self.keys)

    def __eq__(self, other):
        return isinstance(other, TripletClassTable) and self.keys == other.keys

    def class_of(self, m1, m2, m3) -> int:
        for m in (m1, m2, m3):
            if len(m) > self.max_degree:
                raise DegreeCapError(f"monomial {m} exceeds degree cap {self.max_degree}")
        return self.index[canonical_key(m1, m2, m3)]

    def dump(self) -> str:
        return json.dumps({"max_degree": self.max_degree, "keys": [list(k) for k in self.keys]},
                          separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()


def canonical_class(m1, m2, m3, table: TripletClassTable) -> int:
    return table.class_of(m1, m2, m3)


@lru_cache(maxsize=None)
def build_class_table(max_degree: int = 2, pool: int | None = None) -> TripletClassTable:
    """Enumerate all classes over a scratch pool of ``3 * max_degree`` variables."""
    if max_degree > 3:
        raise DegreeCapError("class tables are limited to max_degree <= 3")
    pool = 3 * max_degree if pool is None else pool
    monos = [m for d in range(max_degree + 1) for m in itertools.combinations(range(pool), d)]
    keys = {canonical_key(a, b, c) for a in monos for b in monos for c in monos}
    ordered = sorted(keys, key=lambda k: (key_degrees(k), k))
    return TripletClassTable(max_degree, ordered)


def featurize(m: Polynomial, f: Polynomial, a: Polynomial, table: TripletClassTable) -> np.ndarray:
    """Class sums ``z`` accumulated exactly, then rounded to float64."""
    sums: dict = {}
    for d, p in (("m", m), ("f", f), ("a", a)):
        if p.degree() > table.max_degree:
            raise DegreeCapError(f"{d} has degree {p.degree()} > {table.max_degree}")
    for ma, ca in m.terms:
        for mb, cb in f.terms:
            cab = ca * cb
            for mc, cc in a.terms:
                k = table.index[canonical_key(ma, mb, mc)]
                sums[k] = sums.get(k, 0) + cab * cc
    z = np.zeros(len(table))
    for k, v in sums.items():
        z[k] = float(Fraction(v))
    return z


# ---------------------------------------------------------------------------
# Batched path for f = x_1 + ... + x_n

class SumObjectiveFeaturizer:
    """Fast ``z(m, sum x_i, a)`` for many (m, a) pairs at once.

    With ``f = sum_b x_b`` the class sum over ``b`` depends on a monomial pair
    ``(alpha, gamma)`` only through ``(|alpha|, |gamma|, |alpha & gamma|)``.
    Writing ``h_t(m, a)`` for the total ``m_alpha a_gamma`` weight of pairs of
    type ``t`` gives ``z = h @ W`` with a small fixed matrix ``W``; each ``h_t``
    is the bilinear form ``m^T K_t a`` over the monomial basis.
    """

    def __init__(self, table: TripletClassTable, n: int):
        self.table = table
        self.n = n
        d = table.max_degree
        self.monomials = [m for k in range(d + 1) for m in itertools.combinations(range(n), k)]
        self.mono_index = {m: i for i, m in enumerate(self.monomials)}
        self.types = [(p, q, s) for p in range(d + 1) for q in range(d + 1)
                      for s in range(min(p, q) + 1) if p + q - s <= n]
        tindex = {t: i for i, t in enumerate(self.types)}
        W = np.zeros((len(self.types), len(table)))
        for t, (p, q, s) in enumerate(self.types):
            alpha = tuple(range(p))
            gamma = tuple(range(p - s, p - s + q))
            # one representative b per region, weighted by region size
            regions = [
                (tuple(range(p - s, p)), s),              # in both
                (tuple(range(0, p - s)), p - s),          # alpha only
                (tuple(range(p, p - s + q)), q - s),      # gamma only
                ((p + q - s,), n - (p + q - s)),          # neither
            ]
            for members, size in regions:
                if size <= 0 or not members:
                    continue
                b = members[0]
                W[t, table.index[canonical_key(alpha, (b,), gamma)]] += size
        self.W = W
        N = len(self.monomials)
        rows = [[] for _ in self.types]
        cols = [[] for _ in self.types]
        sets = [frozenset(m) for m in self.monomials]
        for i, mi in enumerate(sets):
            for j, mj in enumerate(sets):
                t = tindex.get((len(mi), len(mj), len(mi & mj)))
                if t is not None:
                    rows[t].append(i)
                    cols[t].append(j)
        self.K = [sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(N, N))
                  for r, c in zip(rows, cols)]

    @property
    def n_monomials(self) -> int:
        return len(self.monomials)

    def dense(self, polys) -> np.ndarray:
        out = np.zeros((len(polys), len(self.monomials)))
        idx = self.mono_index
        for r, p in enumerate(polys):
            for m, c in p.terms:
                out[r, idx[m]] = float(c)
        return out

    def left(self, M: np.ndarray) -> np.ndarray:
        """Per-row factors ``M[k] K_t``, shape ``(k, types, monomials)``.

        Computed once per memory row and reused for every action.
        """
        M = np.atleast_2d(M)
        return np.stack([(k.T @ M.T).T for k in self.K], axis=1)

    def features(self, left: np.ndarray, A: np.ndarray) -> np.ndarray:
        """Features of every (row, action) pair: shape ``(rows, |A|, classes)``.

        Entries are exact whenever coefficients are small integers, so the
        result does not depend on how rows or actions are batched.
        """
        H = left @ np.atleast_2d(A).T  # (rows, types, |A|)
        return np.transpose(H, (0, 2, 1)) @ self.W

    def features_one(self, left: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Features of every row against a single action: ``(rows, classes)``."""
        return (left @ a) @ self.W


@lru_cache(maxsize=8)
def sum_featurizer(max_degree: int, n: int) -> SumObjectiveFeaturizer:
    return SumObjectiveFeaturizer(build_class_table(max_degree), n)
