"""The local division algebra H_p, its lattice tree, and the Gamma action on it.

Vertices are homothety classes of left lattices in H_p^2 (row vectors), kept
in a lower-triangular Hermite form::

    [[pi^e1, 0    ],
     [d,     pi^e2]]     d reduced modulo pi^e1, min valuation of entries 0

Group elements act on the right, ``L -> L.g``.  The same code runs over
Z_p in place of the maximal order ("split" mode), which reproduces the
(p+1)-regular tree of SL(2, Q_p).
"""

from __future__ import annotations

import hashlib
import itertools
import math
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .exactnum import DEFAULT_PRECISION, PadicNumber, PrecisionExhausted, as_rational
from .quatalg import GammaElement, Mat2Quat, QuaternionAlgebra, QuaternionOrder, witness_matrix

DEFAULT_BUDGET = int(os.environ.get("TOOL_BUDGET", "20000"))


class BudgetExceeded(RuntimeError):
    pass


class SingularBasis(ValueError):
    pass


class WitnessNotHyperbolic(AssertionError):
    pass


def _vp_int(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


class LocalQuaternion:
    """p^v * (u0 + u1 i + u2 j + u3 k), units known modulo p^n, some u_t prime to p."""

    __slots__ = ("ring", "v", "u", "n")

    def __init__(self, ring, v, u, n):
        self.ring, self.v, self.u, self.n = ring, v, u, n

    @classmethod
    def normalized(cls, ring, v, u, n):
        p = ring.p
        mod = ring.powers[n]
        u0, u1, u2, u3 = u[0] % mod, u[1] % mod, u[2] % mod, u[3] % mod
        if not (u0 or u1 or u2 or u3):
            return cls(ring, v + n, (0, 0, 0, 0), 0)
        while not (u0 % p or u1 % p or u2 % p or u3 % p):
            u0, u1, u2, u3 = u0 // p, u1 // p, u2 // p, u3 // p
            v += 1
            n -= 1
        return cls(ring, v, (u0, u1, u2, u3), n)

    # -- views -----------------------------------------------------------
    @property
    def coeffs(self) -> tuple:
        """Coordinates in the basis 1, i, j, k as PadicNumbers."""
        p = self.ring.p
        if self.v == math.inf:
            return tuple(PadicNumber.zero(p, self.ring.precision) for _ in range(4))
        return tuple(PadicNumber(p, self.v, x, self.n) for x in self.u)

    def is_zero(self) -> bool:
        return self.v == math.inf or self.n == 0

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if self.v == math.inf:
            return other
        if other.v == math.inf:
            return self
        p = self.ring.p
        v = min(self.v, other.v)
        A = min(self.v + self.n, other.v + other.n)
        if A <= v:
            return LocalQuaternion(self.ring, A, (0, 0, 0, 0), 0)
        s1, s2 = p ** (self.v - v), p ** (other.v - v)
        u = tuple(x * s1 + y * s2 for x, y in zip(self.u, other.u))
        return LocalQuaternion.normalized(self.ring, v, u, A - v)

    def __neg__(self):
        if self.v == math.inf:
            return self
        return LocalQuaternion(self.ring, self.v, tuple(-x % self.ring.powers[self.n] for x in self.u), self.n)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        ring = self.ring
        if self.v == math.inf or other.v == math.inf:
            return ring.zero
        n = min(self.n, other.n)
        v = self.v + other.v
        if n == 0:
            return LocalQuaternion(ring, v, (0, 0, 0, 0), 0)
        x0, x1, x2, x3 = self.u
        y0, y1, y2, y3 = other.u
        a, b, ab = ring.a_int, ring.b_int, ring.ab_int
        u = (
            x0 * y0 + a * x1 * y1 + b * x2 * y2 - ab * x3 * y3,
            x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
            x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
            x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
        )
        return LocalQuaternion.normalized(ring, v, u, n)

    def conj(self):
        if self.v == math.inf:
            return self
        x0, x1, x2, x3 = self.u
        return LocalQuaternion(self.ring, self.v, (x0, -x1, -x2, -x3), self.n)

    def _unit_norm(self) -> int:
        x0, x1, x2, x3 = self.u
        r = self.ring
        return x0 * x0 - r.a_int * x1 * x1 - r.b_int * x2 * x2 + r.ab_int * x3 * x3

    def alpha(self):
        """v_p(nrd(self)), read off the integer norm of the unit part."""
        if self.v == math.inf:
            return math.inf
        p = self.ring.p
        nu = self._unit_norm() % self.ring.powers[self.n]
        if nu == 0:
            raise PrecisionExhausted("reduced norm indistinguishable from zero")
        return 2 * self.v + _vp_int(nu, p)

    def nrd(self) -> PadicNumber:
        p = self.ring.p
        if self.v == math.inf:
            return PadicNumber.zero(p, self.ring.precision)
        return PadicNumber(p, 2 * self.v, self._unit_norm(), self.n)

    def inverse(self):
        if self.v == math.inf:
            raise ZeroDivisionError("inverse of exact zero in H_p")
        p = self.ring.p
        nu = self._unit_norm() % p**self.n
        if nu == 0:
            raise PrecisionExhausted("reduced norm indistinguishable from zero")
        s = _vp_int(nu, p)
        n = self.n - s
        mod = p**n
        w = pow(nu // p**s, -1, mod)
        x0, x1, x2, x3 = self.u
        return LocalQuaternion.normalized(self.ring, -self.v - s, (x0 * w, -x1 * w, -x2 * w, -x3 * w), n)

    def __repr__(self):
        if self.v == math.inf:
            return "0"
        return f"p^{self.v}*{self.u} + O(p^{self.v + self.n})"


class DivisionLocal:
    """H_p = A tensor Q_p with pi = j (b = -p*m, m prime to p, a a non-residue unit)."""

    mode = "division"

    def __init__(self, algebra: QuaternionAlgebra, precision: int = DEFAULT_PRECISION):
        p = algebra.p
        a, b = algebra.a, algebra.b
        if a.denominator != 1 or b.denominator != 1:
            raise ValueError("integral structure constants expected")
        if int(a) % p == 0 or pow(int(a) % p, (p - 1) // 2, p) != p - 1:
            raise ValueError("a must be a non-residue unit mod p")
        if _vp_int(int(b), p) != 1:
            raise ValueError("b must have p-valuation exactly 1")
        self.algebra = algebra
        self.p = p
        self.precision = precision
        self.a_int, self.b_int = int(a), int(b)
        self.ab_int = self.a_int * self.b_int
        self.zero = LocalQuaternion(self, math.inf, (0, 0, 0, 0), precision)
        self.one = self.from_coords((1, 0, 0, 0))
        self.pi = self.from_coords((0, 0, 1, 0))
        self._pi_cache = {}
        self.powers = [p**t for t in range(2 * precision + 2)]

    @property
    def residue_size(self) -> int:
        return self.p**2

    def from_coords(self, coords) -> LocalQuaternion:
        p, N = self.p, self.precision
        cs = [as_rational(c) for c in coords]
        if not any(cs):
            return self.zero
        v = min(_vp_int(c.numerator, p) - _vp_int(c.denominator, p) for c in cs if c)
        mod = p**N
        u = []
        for c in cs:
            if c == 0:
                u.append(0)
                continue
            num, den = c.numerator, c.denominator
            s = v
            while den % p == 0:
                den //= p
                s += 1
            # c / p^v = num * p^(-s) / den with -s + (v_p(num)) >= 0
            if s >= 0:
                u.append(num // p**s * pow(den, -1, mod) % mod)
            else:
                u.append(num * p ** (-s) * pow(den, -1, mod) % mod)
        return LocalQuaternion(self, v, tuple(u), N)

    def embed(self, x) -> LocalQuaternion:
        return self.from_coords(x.coeffs)

    def pi_power(self, e: int) -> LocalQuaternion:
        if e not in self._pi_cache:
            # j^(2s) = b^s, j^(2s+1) = b^s j
            s, r = divmod(e, 2)
            bs = Fraction(self.b_int) ** s
            self._pi_cache[e] = self.from_coords((bs, 0, 0, 0) if r == 0 else (0, 0, bs, 0))
        return self._pi_cache[e]

    def alpha(self, x: LocalQuaternion):
        """v_p(nrd(x)); the tree's valuation with alpha(pi) = 1."""
        return x.alpha()

    def inverse(self, x):
        return x.inverse()

    def reduce_mod_pi(self, x: LocalQuaternion, e: int):
        """Canonical representative of x modulo pi^e O_p, with a hashable key of its exact value.

        pi^e O_p = {z + w j : v(z) >= ceil(e/2), v(w) >= floor(e/2)}, z = x0 + x1 i, w = x2 + x3 i.
        """
        if e <= 0 or x.v == math.inf:
            return self.zero, ()
        p, v = self.p, x.v
        digits = []
        for pos, u in enumerate(x.u):
            t = (e + 1) // 2 if pos < 2 else e // 2
            if v >= t:
                digits.append(0)
                continue
            if v + x.n < t:
                raise PrecisionExhausted(f"need absolute precision {t}, have {v + x.n}")
            digits.append(u % self.powers[t - v])
        if not any(digits):
            return self.zero, ()
        while not any(d % p for d in digits):
            digits = [d // p for d in digits]
            v += 1
        digits = tuple(digits)
        return LocalQuaternion(self, v, digits, self.precision), (v,) + digits

    def residue_reps(self):
        p = self.p
        return [self.from_coords((x0, x1, 0, 0)) for x0 in range(p) for x1 in range(p)]

    def quotient_reps(self, n: int):
        """Representatives of O_p / pi^n O_p."""
        p = self.p
        rz, rw = range(p ** ((n + 1) // 2)), range(p ** (n // 2))
        for x0, x1, x2, x3 in itertools.product(rz, rz, rw, rw):
            yield self.from_coords((x0, x1, x2, x3))


class SplitLocal:
    """Q_p with Z_p as the order and pi = p; the baseline tree of SL(2, Q_p)."""

    mode = "split"

    def __init__(self, p: int, precision: int = DEFAULT_PRECISION):
        self.p = p
        self.precision = precision
        self.zero = PadicNumber.zero(p, precision)
        self.one = PadicNumber.from_rational(1, p, precision)
        self.pi = PadicNumber.from_rational(p, p, precision)
        self.algebra = None

    @property
    def residue_size(self) -> int:
        return self.p

    def from_coords(self, coords):
        return PadicNumber.from_rational(coords[0], self.p, self.precision)

    def embed(self, x):
        return PadicNumber.from_rational(as_rational(x), self.p, self.precision)

    def pi_power(self, e: int):
        return PadicNumber.from_rational(Fraction(self.p) ** e, self.p, self.precision)

    def alpha(self, x: PadicNumber):
        if x.is_exact_zero:
            return math.inf
        return x.exact_valuation()

    def inverse(self, x):
        return x.inverse()

    def reduce_mod_pi(self, x: PadicNumber, e: int):
        if e <= 0 or x.is_exact_zero:
            return self.zero, (Fraction(0),)
        t = x.truncate(e)
        return PadicNumber.from_rational(t, self.p, self.precision), (t,)

    def residue_reps(self):
        return [self.embed(c) for c in range(self.p)]

    def quotient_reps(self, n: int):
        for c in range(self.p**n):
            yield self.embed(c)


@dataclass(frozen=True, eq=False)
class LatticeClass:
    basis: tuple = field(repr=False)  # ((pi^e1, 0), (d, pi^e2))
    key: tuple  # (e1, e2, coordinates of d)

    def __eq__(self, other):
        return isinstance(other, LatticeClass) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other):
        return self.key < other.key

    @property
    def digest(self) -> str:
        return hashlib.sha1(repr(self.key).encode()).hexdigest()[:10]


@dataclass
class TreeBall:
    center: LatticeClass
    radius: int
    vertices: list  # LatticeClass, sphere by sphere, each sphere sorted by key
    spheres: list  # sizes
    edges: list  # sorted index pairs
    degree: int
    mode: str
    p: int

    def check(self):
        """Raise AssertionError unless the edges form a tree."""
        n = len(self.vertices)
        if len(self.edges) != n - 1:
            raise AssertionError(f"{len(self.edges)} edges on {n} vertices")
        adj = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        todo = deque([0])
        while todo:
            u = todo.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        if len(seen) != n:
            raise AssertionError("ball is not connected")
        return True

    def bfs_distances(self, source: int = 0) -> list:
        n = len(self.vertices)
        adj = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        dist = [-1] * n
        dist[source] = 0
        todo = deque([source])
        while todo:
            u = todo.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    todo.append(w)
        return dist

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "p": self.p,
            "center": self.center.digest,
            "radius": self.radius,
            "degree": self.degree,
            "spheres": list(self.spheres),
            "edges": [list(e) for e in self.edges],
        }

    def to_dot(self) -> str:
        lines = ["graph tree {"]
        for idx, v in enumerate(self.vertices):
            lines.append(f'  {idx} [label="{v.digest}"];')
        for u, v in self.edges:
            lines.append(f"  {u} -- {v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


class LatticeTree:
    """Lattice-class tree over a local ring (``DivisionLocal`` or ``SplitLocal``)."""

    def __init__(self, ring, budget: int = DEFAULT_BUDGET):
        self.ring = ring
        self.budget = budget
        self.p = ring.p

    @classmethod
    def division(cls, algebra: QuaternionAlgebra, precision: int = DEFAULT_PRECISION, budget: int = DEFAULT_BUDGET):
        return cls(DivisionLocal(algebra, precision), budget)

    @classmethod
    def split(cls, p: int, precision: int = DEFAULT_PRECISION, budget: int = DEFAULT_BUDGET):
        return cls(SplitLocal(p, precision), budget)

    @property
    def mode(self) -> str:
        return self.ring.mode

    # -- canonical forms --------------------------------------------------
    def canonicalize(self, rows) -> LatticeClass:
        R = self.ring
        rows = [list(r) for r in rows]
        cand = [(R.alpha(r[1]), i) for i, r in enumerate(rows) if not r[1].is_zero()]
        if not cand:
            raise SingularBasis("second column vanishes")
        e2, ip = min(cand)
        prow = rows.pop(ip)
        pivot_left = R.pi_power(e2) * R.inverse(prow[1])
        first = pivot_left * prow[0]
        inv_pe2 = R.pi_power(-e2)
        col0 = []
        for r in rows:
            if r[1].is_zero():
                col0.append(r[0])
            else:
                col0.append(r[0] - (r[1] * inv_pe2) * first)
        cand = [(R.alpha(x), i) for i, x in enumerate(col0) if not x.is_zero()]
        if not cand:
            raise SingularBasis("rows are linearly dependent at working precision")
        e1 = min(cand)[0]
        while True:
            d, dkey = R.reduce_mod_pi(first, e1)
            k = min(e1, e2, R.alpha(d))
            if k == 0:
                break
            first = R.pi_power(-k) * d
            e1 -= k
            e2 -= k
        basis = ((R.pi_power(e1), R.zero), (d, R.pi_power(e2)))
        return LatticeClass(basis, (e1, e2, dkey))

    def base_vertex(self) -> LatticeClass:
        R = self.ring
        return self.canonicalize([(R.one, R.zero), (R.zero, R.one)])

    def vertex_from_rows(self, rows) -> LatticeClass:
        return self.canonicalize(rows)

    # -- combinatorics ----------------------------------------------------
    def neighbors(self, v: LatticeClass) -> list:
        """Lattices L' with pi L < L' < L of simple colength, one per line of L/piL."""
        R = self.ring
        r1, r2 = v.basis
        pi = R.pi
        pr1 = (pi * r1[0], pi * r1[1])
        pr2 = (pi * r2[0], pi * r2[1])
        out = {}
        for c in R.residue_reps():
            line = (r1[0] + c * r2[0], r1[1] + c * r2[1])
            w = self.canonicalize([line, pr2])
            out[w.key] = w
        w = self.canonicalize([pr1, r2])
        out[w.key] = w
        return [out[k] for k in sorted(out)]

    def build_ball(self, center: LatticeClass, r: int) -> TreeBall:
        if r < 0:
            raise ValueError("radius must be >= 0")
        if r == 0:
            return TreeBall(center, 0, [center], [1], [], 0, self.mode, self.p)
        first = self.neighbors(center)
        d = len(first)
        expected = 1 + sum(d * (d - 1) ** (k - 1) for k in range(1, r + 1))
        if expected > self.budget:
            raise BudgetExceeded(f"ball of radius {r} needs ~{expected} vertices, budget {self.budget}")
        spheres = [[center]]
        dist = {center.key: 0}
        nbrs = {center.key: first}
        for k in range(1, r + 1):
            nxt = {}
            for u in spheres[-1]:
                if u.key not in nbrs:
                    nbrs[u.key] = self.neighbors(u)
                for w in nbrs[u.key]:
                    if w.key not in dist:
                        nxt[w.key] = w
            for key in nxt:
                dist[key] = k
            spheres.append([nxt[key] for key in sorted(nxt)])
            if len(dist) > self.budget:
                raise BudgetExceeded(f"more than {self.budget} vertices")
        for u in spheres[-1]:
            nbrs[u.key] = self.neighbors(u)
        vertices = [v for sph in spheres for v in sph]
        index = {v.key: i for i, v in enumerate(vertices)}
        edges = set()
        degrees = []
        for v in vertices:
            i = index[v.key]
            ns = nbrs[v.key]
            if dist[v.key] < r:
                degrees.append(len(ns))
            for w in ns:
                j = index.get(w.key)
                if j is not None:
                    edges.add((min(i, j), max(i, j)))
        if len(set(degrees)) != 1:
            raise AssertionError(f"interior degrees are not constant: {sorted(set(degrees))}")
        ball = TreeBall(center, r, vertices, [len(s) for s in spheres], sorted(edges), degrees[0], self.mode, self.p)
        ball.check()
        return ball

    def sphere(self, n: int) -> list:
        """Vertices at distance n from the base vertex, by direct parametrization."""
        R = self.ring
        if n == 0:
            return [self.base_vertex()]
        pn = R.pi_power(n)
        out = {}
        for c in R.quotient_reps(n):
            w = self.canonicalize([(R.one, c), (R.zero, pn)])
            out[w.key] = w
        for c in R.quotient_reps(n - 1):
            w = self.canonicalize([(R.pi * c, R.one), (pn, R.zero)])
            out[w.key] = w
        return [out[k] for k in sorted(out)]

    def ball_vertices(self, r: int) -> list:
        return [v for n in range(r + 1) for v in self.sphere(n)]

    # -- metric -------------------------------------------------------------
    def _inverse_basis(self, v: LatticeClass):
        R = self.ring
        (P, _), (D, Q) = v.basis
        Pi, Qi = R.inverse(P), R.inverse(Q)
        return ((Pi, R.zero), (R.zero - Qi * D * Pi, Qi))

    def invariant_factors(self, M) -> tuple:
        """Exponents (a, c) with M = U diag(pi^a, pi^c) V, U, V invertible over the order, a <= c."""
        R = self.ring
        (m00, m01), (m10, m11) = M
        entries = [(R.alpha(x), pos) for pos, x in enumerate((m00, m01, m10, m11)) if not x.is_zero()]
        if not entries:
            raise SingularBasis("zero change-of-basis matrix")
        a, pos = min(entries)
        if pos in (2, 3):
            (m00, m01), (m10, m11) = (m10, m11), (m00, m01)
        if pos in (1, 3):
            (m00, m01), (m10, m11) = (m01, m00), (m11, m10)
        rest = m11 - m10 * R.inverse(m00) * m01
        if rest.is_zero():
            raise PrecisionExhausted("change-of-basis matrix is singular at working precision")
        return a, R.alpha(rest)

    def distance(self, u: LatticeClass, v: LatticeClass) -> int:
        if u.key == v.key:
            return 0
        (b00, b01), (b10, b11) = v.basis
        (c00, c01), (c10, c11) = self._inverse_basis(u)
        M = (
            (b00 * c00 + b01 * c10, b00 * c01 + b01 * c11),
            (b10 * c00 + b11 * c10, b10 * c01 + b11 * c11),
        )
        a, c = self.invariant_factors(M)
        return abs(c - a)

    # -- group action ---------------------------------------------------------
    def embed_matrix(self, g) -> tuple:
        if isinstance(g, GammaElement):
            g = g.matrix
        if isinstance(g, Mat2Quat):
            if self.ring.algebra is None or g.algebra != self.ring.algebra:
                raise ValueError("matrix is over a different quaternion algebra")
            entries = g.entries
        else:
            entries = tuple(g)
        e = [self.ring.embed(x) for x in entries]
        return ((e[0], e[1]), (e[2], e[3]))

    def act(self, g, v: LatticeClass, embedded=None) -> LatticeClass:
        """The vertex L.g (row vectors times g)."""
        (g00, g01), (g10, g11) = embedded or self.embed_matrix(g)
        rows = []
        for x, y in v.basis:
            rows.append((x * g00 + y * g10, x * g01 + y * g11))
        return self.canonicalize(rows)

    def displacement(self, g, v: LatticeClass, embedded=None) -> int:
        return self.distance(v, self.act(g, v, embedded))


@dataclass
class WitnessReport:
    p: int
    element: GammaElement
    translation_length: int
    ball_radius: int
    ball_size: int
    min_displacement: int
    orbit_distances: list  # d(v0, g^n v0), n = 1..len

    @property
    def passed(self) -> bool:
        return self.translation_length > 0 and self.min_displacement > 0

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "element": [repr(x) for x in self.element.matrix.entries],
            "denominator_exponent": self.element.denominator_exponent,
            "translation_length": self.translation_length,
            "ball_radius": self.ball_radius,
            "ball_size": self.ball_size,
            "min_displacement": self.min_displacement,
            "orbit_distances": self.orbit_distances,
            "passed": self.passed,
        }


def witness_hyperbolic(
    A: QuaternionAlgebra,
    O: QuaternionOrder,
    radius: int = 3,
    powers: int = 4,
    precision: int = DEFAULT_PRECISION,
) -> WitnessReport:
    """diag(x, x^-1) with nrd(x) = p moves every vertex of the ball: no fixed point on the tree."""
    g = GammaElement.certify(witness_matrix(O), O)
    tree = LatticeTree.division(A, precision)
    emb = tree.embed_matrix(g)
    v0 = tree.base_vertex()
    orbit = []
    w = v0
    for _ in range(powers):
        w = tree.act(g, w, emb)
        orbit.append(tree.distance(v0, w))
    ball = tree.ball_vertices(radius)
    ell = min(tree.displacement(g, v, emb) for v in ball)
    if ell <= 0:
        raise WitnessNotHyperbolic(f"some vertex within distance {radius} is fixed")
    # hyperbolic: d(v0, g^n v0) = n*ell + 2*dist(v0, axis), so increments are exactly ell
    if any(orbit[n] - orbit[0] != n * ell for n in range(len(orbit))):
        raise WitnessNotHyperbolic(f"orbit distances {orbit} do not grow linearly")
    return WitnessReport(A.p, g, ell, radius, len(ball), ell, orbit)
