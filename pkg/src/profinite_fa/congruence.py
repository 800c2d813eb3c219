"""SL(4, Z[1/p]), its reductions modulo n, and level-l congruence fingerprints.

A fingerprint is the exact order of the subgroup of SL(4, F_l) generated by
the images of a generating set, certified by a deterministic Schreier-Sims
run on the action of matrices on nonzero row vectors of F_l^4.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .exactnum import as_rational
from .quatalg import choose_algebra, determinant, gamma_generators, maximal_order, reduce_gamma, split_mod


class ModulusNotCoprime(ValueError):
    pass


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def int_det(flat, n: int):
    """Leibniz determinant of a flat row-major n x n matrix."""
    total = 0
    for perm in itertools.permutations(range(n)):
        term = _perm_sign(perm)
        for r, c in enumerate(perm):
            term *= flat[r * n + c]
            if not term:
                break
        total += term
    return total


@dataclass(frozen=True)
class SMatrix:
    """An element of SL(4, Z[1/p]), row-major."""

    p: int
    entries: tuple

    def __post_init__(self):
        ents = tuple(as_rational(x) for x in self.entries)
        object.__setattr__(self, "entries", ents)
        if len(ents) != 16:
            raise ValueError("expected 16 entries")
        for x in ents:
            d = x.denominator
            while d % self.p == 0:
                d //= self.p
            if d != 1:
                raise ValueError(f"entry {x} is not in Z[1/{self.p}]")
        rows = [list(ents[4 * r:4 * r + 4]) for r in range(4)]
        if determinant(rows, Fraction(1), Fraction(0)) != 1:
            raise ValueError("determinant is not 1")

    @classmethod
    def identity(cls, p: int) -> "SMatrix":
        return cls(p, tuple(int(r == c) for r in range(4) for c in range(4)))

    @classmethod
    def elementary(cls, p: int, i: int, j: int, x) -> "SMatrix":
        ents = [int(r == c) for r in range(4) for c in range(4)]
        ents[4 * i + j] = as_rational(x)
        return cls(p, tuple(ents))

    def __mul__(self, other: "SMatrix") -> "SMatrix":
        a, b = self.entries, other.entries
        return SMatrix(self.p, tuple(sum(a[4 * r + k] * b[4 * k + c] for k in range(4)) for r in range(4) for c in range(4)))


@dataclass(frozen=True)
class FiniteMatrix:
    modulus: int
    entries: tuple
    dim: int = 4

    def __post_init__(self):
        ents = tuple(int(x) % self.modulus for x in self.entries)
        object.__setattr__(self, "entries", ents)
        if int_det(ents, self.dim) % self.modulus != 1 % self.modulus:
            raise ValueError("determinant is not 1 modulo n")

    def __mul__(self, other: "FiniteMatrix") -> "FiniteMatrix":
        return FiniteMatrix(self.modulus, _mul(self.entries, other.entries, self.dim, self.modulus), self.dim)

    def reduce(self, m: int) -> "FiniteMatrix":
        if self.modulus % m:
            raise ValueError(f"{m} does not divide {self.modulus}")
        return FiniteMatrix(m, self.entries, self.dim)

    @property
    def digest(self) -> str:
        return hashlib.sha256(repr((self.modulus, self.entries)).encode()).hexdigest()[:12]


def reduce_mod(M: SMatrix, n: int) -> FiniteMatrix:
    if math.gcd(n, M.p) != 1:
        raise ModulusNotCoprime(f"level {n} is not prime to p = {M.p}")
    return FiniteMatrix(n, tuple(x.numerator * pow(x.denominator, -1, n) for x in M.entries))


def in_principal_congruence(M: SMatrix, n: int) -> bool:
    return reduce_mod(M, n).entries == tuple(int(r == c) % n for r in range(4) for c in range(4))


def delta_generators(p: int) -> list:
    """e_ij(1) and e_ij(1/p) for all i != j."""
    gens = []
    for i, j in itertools.permutations(range(4), 2):
        gens.append(SMatrix.elementary(p, i, j, 1))
        gens.append(SMatrix.elementary(p, i, j, Fraction(1, p)))
    return gens


def sl4_order(l: int) -> int:
    return l**6 * (l**2 - 1) * (l**3 - 1) * (l**4 - 1)


# -- Schreier-Sims --------------------------------------------------------------

def _mul(a, b, n, mod):
    return tuple(
        sum(a[r * n + k] * b[k * n + c] for k in range(n)) % mod
        for r in range(n)
        for c in range(n)
    )


def _apply(vec, g, n, mod):
    return tuple(sum(vec[k] * g[k * n + c] for k in range(n)) % mod for c in range(n))


def _inverse(g, n, l):
    aug = [list(g[r * n:(r + 1) * n]) + [int(r == c) for c in range(n)] for r in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if aug[r][c] % l)
        aug[c], aug[piv] = aug[piv], aug[c]
        inv = pow(aug[c][c], -1, l)
        aug[c] = [x * inv % l for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c]:
                f = aug[r][c]
                aug[r] = [(x - f * y) % l for x, y in zip(aug[r], aug[c])]
    return tuple(aug[r][n + c] for r in range(n) for c in range(n))


@dataclass
class StabLevel:
    base: tuple
    gens: list = field(default_factory=list)  # (g, g^-1)
    transversal: dict = field(default_factory=dict)  # point -> (u, u^-1) with base.u = point


@dataclass
class StabChain:
    dim: int
    prime: int
    levels: list = field(default_factory=list)

    @property
    def identity(self):
        n = self.dim
        return tuple(int(r == c) for r in range(n) for c in range(n))

    @property
    def base(self) -> list:
        return [L.base for L in self.levels]

    @property
    def strong_generators(self) -> list:
        seen, out = set(), []
        for L in self.levels:
            for g, _ in L.gens:
                if g not in seen:
                    seen.add(g)
                    out.append(g)
        return out

    def order(self) -> int:
        return math.prod(len(L.transversal) for L in self.levels)

    def sift(self, g, start: int = 0):
        n, l = self.dim, self.prime
        for i in range(start, len(self.levels)):
            L = self.levels[i]
            q = _apply(L.base, g, n, l)
            t = L.transversal.get(q)
            if t is None:
                return g, i
            g = _mul(g, t[1], n, l)
        return g, len(self.levels)

    def contains(self, g) -> bool:
        h, _ = self.sift(tuple(g))
        return h == self.identity

    def verify(self) -> bool:
        n, l = self.dim, self.prime
        for i, L in enumerate(self.levels):
            for pt, (u, uinv) in L.transversal.items():
                if _apply(L.base, u, n, l) != pt or _mul(u, uinv, n, l) != self.identity:
                    return False
            for g, _ in L.gens:
                if any(_apply(M.base, g, n, l) != M.base for M in self.levels[:i]):
                    return False
        return all(self.contains(g) for g in self.strong_generators)

    def _new_level(self, g):
        n = self.dim
        for t in range(n):
            e = tuple(int(s == t) for s in range(n))
            if _apply(e, g, n, self.prime) != e:
                L = StabLevel(e)
                L.transversal[e] = (self.identity, self.identity)
                self.levels.append(L)
                return
        raise ValueError("identity cannot start a new level")

    def add_generator(self, g, level: int = 0):
        n, l = self.dim, self.prime
        ident = self.identity
        if level == len(self.levels):
            self._new_level(g)
        L = self.levels[level]
        L.gens.append((g, _inverse(g, n, l)))
        todo = deque((pt, len(L.gens) - 1) for pt in list(L.transversal))
        while todo:
            pt, gi = todo.popleft()
            s, sinv = L.gens[gi]
            q = _apply(pt, s, n, l)
            u, uinv = L.transversal[pt]
            known = L.transversal.get(q)
            if known is None:
                L.transversal[q] = (_mul(u, s, n, l), _mul(sinv, uinv, n, l))
                todo.extend((q, j) for j in range(len(L.gens)))
                continue
            schreier = _mul(_mul(u, s, n, l), known[1], n, l)
            if schreier == ident:
                continue
            h, _ = self.sift(schreier, level + 1)
            if h != ident:
                self.add_generator(h, level + 1)


def stab_chain_order(gens, l: int, dim: int | None = None):
    """Exact order of <gens> in SL(dim, F_l), with the stabilizer chain that certifies it."""
    gens = list(gens)
    if dim is None:
        dim = gens[0].dim if gens else 4
    chain = StabChain(dim, l)
    for g in gens:
        ents = g.entries if isinstance(g, FiniteMatrix) else tuple(g)
        if isinstance(g, FiniteMatrix) and g.modulus != l:
            raise ValueError(f"generator modulus {g.modulus} is not the prime {l}")
        h, _ = chain.sift(ents)
        if h != chain.identity:
            chain.add_generator(h, 0)
    return chain.order(), chain


# -- fingerprints ----------------------------------------------------------------

@dataclass
class Fingerprint:
    level: int
    side: str
    p: int
    generators: list
    order: int

    def __post_init__(self):
        if sl4_order(self.level) % self.order:
            raise AssertionError(f"order {self.order} does not divide |SL(4, F_{self.level})|")

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "level": self.level,
            "side": self.side,
            "order": str(self.order),
            "generators": [g.digest for g in self.generators],
        }


def side_generators(side: str, p: int, l: int, seed: int = 0) -> list:
    if l % p == 0:
        raise ModulusNotCoprime(f"level {l} must differ from p = {p}")
    if side == "Delta":
        return [reduce_mod(M, l) for M in delta_generators(p)]
    if side == "Gamma":
        A = choose_algebra(p)
        O = maximal_order(A)
        S = split_mod(O, l, 1, seed=seed)
        return [FiniteMatrix(l, reduce_gamma(g, S)) for g in gamma_generators(A, O)]
    raise ValueError(f"side must be Delta or Gamma, got {side!r}")


def fingerprint(side: str, p: int, l: int, seed: int = 0) -> Fingerprint:
    gens = side_generators(side, p, l, seed)
    order, _ = stab_chain_order(gens, l)
    return Fingerprint(l, side, p, gens, order)


@dataclass
class ComparisonReport:
    p: int
    level: int
    target: int
    orders: dict
    generator_counts: dict
    passed: bool

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "level": self.level,
            "target": str(self.target),
            "orders": {k: str(v) for k, v in self.orders.items()},
            "generator_counts": self.generator_counts,
            "status": "PASS" if self.passed else "FAIL",
        }


def compare_fingerprints(f1: Fingerprint, f2: Fingerprint) -> ComparisonReport:
    if f1.level != f2.level:
        raise ValueError("fingerprints at different levels")
    target = sl4_order(f1.level)
    return ComparisonReport(
        p=f1.p,
        level=f1.level,
        target=target,
        orders={f1.side: f1.order, f2.side: f2.order},
        generator_counts={f1.side: len(f1.generators), f2.side: len(f2.generators)},
        passed=f1.order == target and f2.order == target,
    )
