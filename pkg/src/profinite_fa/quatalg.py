"""The definite quaternion algebra A = (a, b | Q) ramified at {inf, p}.

Elements, reduced norms on A and on 2x2 matrices over A, a maximal order,
splittings of the order modulo powers of primes l != p, and certified
elements of the S-arithmetic group SL(2, O[1/p]).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from sympy import isprime

from .exactnum import INF, as_rational, prime_divisors, verify_product_formula


class SearchExhausted(RuntimeError):
    pass


class SaturationFailed(RuntimeError):
    pass


class NoZeroDivisor(RuntimeError):
    pass


class NonRationalNorm(AssertionError):
    pass


class DeterminantNotOne(AssertionError):
    pass


class NotInGamma(ValueError):
    pass


def qmul(x, y, a, b):
    """Product of coefficient 4-tuples in the basis 1, i, j, k with i^2=a, j^2=b, ij=-ji=k."""
    x0, x1, x2, x3 = x
    y0, y1, y2, y3 = y
    return (
        x0 * y0 + a * (x1 * y1) + b * (x2 * y2) - (a * b) * (x3 * y3),
        x0 * y1 + x1 * y0 - b * (x2 * y3) + b * (x3 * y2),
        x0 * y2 + x2 * y0 + a * (x1 * y3) - a * (x3 * y1),
        x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
    )


@dataclass(frozen=True)
class QuaternionAlgebra:
    a: Fraction
    b: Fraction
    p: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", as_rational(self.a))
        object.__setattr__(self, "b", as_rational(self.b))

    def __call__(self, *coeffs) -> "Quaternion":
        coeffs = tuple(as_rational(c) for c in coeffs) + (Fraction(0),) * (4 - len(coeffs))
        return Quaternion(self, coeffs)

    @property
    def one(self):
        return self(1)

    @property
    def i(self):
        return self(0, 1)

    @property
    def j(self):
        return self(0, 0, 1)

    @property
    def k(self):
        return self(0, 0, 0, 1)

    @property
    def m(self) -> int:
        """The cofactor in b = -p*m."""
        return int(-self.b / self.p)

    def ramification(self) -> tuple:
        return verify_product_formula(self.a, self.b).ramified


@dataclass(frozen=True)
class Quaternion:
    algebra: QuaternionAlgebra
    coeffs: tuple

    def __add__(self, other):
        other = self._lift(other)
        return Quaternion(self.algebra, tuple(u + v for u, v in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return Quaternion(self.algebra, tuple(-u for u in self.coeffs))

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = as_rational(other)
            return Quaternion(self.algebra, tuple(u * c for u in self.coeffs))
        if other.algebra != self.algebra:
            raise ValueError("quaternions from different algebras")
        return Quaternion(self.algebra, qmul(self.coeffs, other.coeffs, self.algebra.a, self.algebra.b))

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, c):
        c = as_rational(c)
        return Quaternion(self.algebra, tuple(u / c for u in self.coeffs))

    def _lift(self, other):
        if isinstance(other, Quaternion):
            return other
        return self.algebra(other)

    def conj(self):
        x0, x1, x2, x3 = self.coeffs
        return Quaternion(self.algebra, (x0, -x1, -x2, -x3))

    def nrd(self) -> Fraction:
        return nrd_quat(self)

    def trd(self) -> Fraction:
        return 2 * self.coeffs[0]

    def inverse(self):
        n = self.nrd()
        if n == 0:
            raise ZeroDivisionError("quaternion of norm 0")
        return self.conj() / n

    def is_zero(self):
        return not any(self.coeffs)

    def __repr__(self):
        names = ("", "i", "j", "k")
        parts = [f"{c}{n}" if n else f"{c}" for c, n in zip(self.coeffs, names) if c]
        return " + ".join(parts) if parts else "0"


def nrd_quat(x: Quaternion) -> Fraction:
    a, b = x.algebra.a, x.algebra.b
    x0, x1, x2, x3 = x.coeffs
    return x0 * x0 - a * x1 * x1 - b * x2 * x2 + a * b * x3 * x3


def choose_algebra(p: int, bound: int = 200) -> QuaternionAlgebra:
    """Smallest |a| then |b| with a<0 a non-residue unit mod p, b=-p*m, Ram = {inf, p}."""
    if p == 2 or not isprime(p):
        raise ValueError(f"p must be an odd prime, got {p}")
    for abs_a in range(1, bound + 1):
        a = -abs_a
        if a % p == 0 or pow(a % p, (p - 1) // 2, p) != p - 1:
            continue
        for m in range(1, bound + 1):
            if m % p == 0:
                continue
            ram = verify_product_formula(a, -p * m).ramified
            if set(ram) == {INF, p}:
                return QuaternionAlgebra(Fraction(a), Fraction(-p * m), p)
    raise SearchExhausted(f"no (a, b) with |a|, m <= {bound} for p = {p}")


# -- matrices over A --------------------------------------------------------

@dataclass(frozen=True)
class Mat2Quat:
    entries: tuple  # (x11, x12, x21, x22)

    @classmethod
    def of(cls, x11, x12, x21, x22):
        return cls((x11, x12, x21, x22))

    @classmethod
    def identity(cls, A: QuaternionAlgebra):
        return cls.of(A.one, A(0), A(0), A.one)

    @property
    def algebra(self):
        return self.entries[0].algebra

    def __mul__(self, other: "Mat2Quat") -> "Mat2Quat":
        a11, a12, a21, a22 = self.entries
        b11, b12, b21, b22 = other.entries
        return Mat2Quat.of(
            a11 * b11 + a12 * b21, a11 * b12 + a12 * b22,
            a21 * b11 + a22 * b21, a21 * b12 + a22 * b22,
        )

    def __pow__(self, n: int):
        out = Mat2Quat.identity(self.algebra)
        for _ in range(n):
            out = out * self
        return out


class _QuadraticElement:
    """u + v*s with s^2 = d, d a non-square rational."""

    __slots__ = ("u", "v", "d")

    def __init__(self, u, v, d):
        self.u, self.v, self.d = u, v, d

    def __add__(self, o):
        return _QuadraticElement(self.u + o.u, self.v + o.v, self.d)

    def __sub__(self, o):
        return _QuadraticElement(self.u - o.u, self.v - o.v, self.d)

    def __mul__(self, o):
        return _QuadraticElement(self.u * o.u + self.d * self.v * o.v, self.u * o.v + self.v * o.u, self.d)

    def __neg__(self):
        return _QuadraticElement(-self.u, -self.v, self.d)

    def inverse(self):
        n = self.u * self.u - self.d * self.v * self.v
        return _QuadraticElement(self.u / n, -self.v / n, self.d)

    def __bool__(self):
        return bool(self.u) or bool(self.v)


def _rational_sqrt(q: Fraction):
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def determinant(rows, one, zero):
    """Gaussian-elimination determinant over a field whose elements support + - * inverse()."""
    m = [list(r) for r in rows]
    n = len(m)
    det = one
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return zero
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        inv = m[c][c].inverse() if hasattr(m[c][c], "inverse") else 1 / m[c][c]
        det = det * m[c][c]
        for r in range(c + 1, n):
            if m[r][c]:
                f = m[r][c] * inv
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return det


def _splitting_blocks(x: Quaternion, embed):
    """x = z + w*j with z, w in Q(sqrt a) mapped to [[z, w], [b*conj(w), conj(z)]]."""
    b = x.algebra.b
    x0, x1, x2, x3 = x.coeffs
    return [[embed(x0, x1), embed(x2, x3)], [embed(b * x2, -b * x3), embed(x0, -x1)]]


def nrd_mat(g: Mat2Quat) -> Fraction:
    """Reduced norm on M(2, A): determinant of the 4x4 image over F = Q(sqrt a)."""
    A = g.algebra
    s = _rational_sqrt(A.a)
    if s is None:
        embed = lambda u, v: _QuadraticElement(u, v, A.a)
        one, zero = embed(Fraction(1), Fraction(0)), embed(Fraction(0), Fraction(0))
    else:
        # split case: F = Q itself
        embed = lambda u, v: u + v * s
        one, zero = Fraction(1), Fraction(0)
    blocks = [_splitting_blocks(x, embed) for x in g.entries]
    rows = []
    for br in (0, 1):
        for r in (0, 1):
            rows.append(blocks[2 * br][r] + blocks[2 * br + 1][r])
    det = determinant(rows, one, zero)
    if isinstance(det, _QuadraticElement):
        if det.v != 0:
            raise NonRationalNorm(f"determinant has a sqrt(a) component: {det.v}")
        return det.u
    return det


# -- lattices and orders -----------------------------------------------------

def _hnf_int(rows, n):
    rows = [list(r) for r in rows if any(r)]
    basis, pivots = [], []
    for col in range(n):
        while True:
            nz = [r for r in rows if r[col] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            for r in nz[1:]:
                q = r[col] // piv[col]
                for t in range(n):
                    r[t] -= q * piv[t]
            rows = [r for r in rows if any(r)]
        if nz:
            piv = nz[0]
            if piv[col] < 0:
                piv[:] = [-x for x in piv]
            rows = [r for r in rows if r is not piv]
            basis.append(piv)
            pivots.append(col)
    for i, col in enumerate(pivots):
        for k in range(i):
            q = basis[k][col] // basis[i][col]
            if q:
                basis[k] = [x - q * y for x, y in zip(basis[k], basis[i])]
    return basis


def lattice_basis(vectors, order=(1, 2, 3, 0)):
    """Hermite basis (columns processed in ``order``) of the Z-span of rational 4-vectors."""
    den = 1
    for v in vectors:
        for c in v:
            den = math.lcm(den, as_rational(c).denominator)
    rows = [[int(as_rational(v[t]) * den) for t in order] for v in vectors]
    hnf = _hnf_int(rows, 4)
    out = []
    for r in hnf:
        vec = [Fraction(0)] * 4
        for pos, t in enumerate(order):
            vec[t] = Fraction(r[pos], den)
        out.append(tuple(vec))
    return tuple(out)


def _solve(matrix_rows, target):
    """Solve sum_s x_s * rows[s] = target over Q (rows square and invertible)."""
    n = len(matrix_rows)
    # columns of the system are the basis vectors
    aug = [[as_rational(matrix_rows[s][t]) for s in range(n)] + [as_rational(target[t])] for t in range(n)]
    for c in range(n):
        piv = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[piv] = aug[piv], aug[c]
        inv = 1 / aug[c][c]
        aug[c] = [x * inv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return tuple(aug[r][n] for r in range(n))


def _is_integral(x: Quaternion) -> bool:
    return x.trd().denominator == 1 and x.nrd().denominator == 1


def reduced_discriminant(A: QuaternionAlgebra, basis) -> int:
    qs = [A(*v) if not isinstance(v, Quaternion) else v for v in basis]
    gram = [[(x * y).trd() for y in qs] for x in qs]
    d2 = abs(determinant(gram, Fraction(1), Fraction(0)))
    d = math.isqrt(int(d2))
    if d2.denominator != 1 or d * d != d2:
        raise SaturationFailed(f"discriminant {d2} is not a square integer")
    return d


@dataclass(frozen=True)
class QuaternionOrder:
    algebra: QuaternionAlgebra
    basis: tuple  # of Quaternion; basis[0] == 1
    discriminant: int

    def coordinates(self, x: Quaternion) -> tuple:
        return _solve([e.coeffs for e in self.basis], x.coeffs)

    def element(self, coords) -> Quaternion:
        out = self.algebra(0)
        for c, e in zip(coords, self.basis):
            out = out + e * as_rational(c)
        return out

    def contains(self, x: Quaternion) -> bool:
        return all(c.denominator == 1 for c in self.coordinates(x))

    def structure_constants(self):
        """C[s][t] = integer coordinates of basis[s] * basis[t]."""
        return tuple(
            tuple(tuple(int(c) for c in self.coordinates(es * et)) for et in self.basis)
            for es in self.basis
        )

    def norm_form(self):
        """(diag, cross): nrd(sum c_s e_s) = sum diag[s] c_s^2 + sum_{s<t} cross[s][t] c_s c_t."""
        diag = tuple(int(e.nrd()) for e in self.basis)
        cross = tuple(
            tuple(int((es * et.conj()).trd()) if s < t else 0 for t, et in enumerate(self.basis))
            for s, es in enumerate(self.basis)
        )
        return diag, cross

    def is_closed(self) -> bool:
        return all(self.contains(x * y) for x in self.basis for y in self.basis)

    def to_json(self) -> dict:
        return {
            "a": str(self.algebra.a),
            "b": str(self.algebra.b),
            "p": self.algebra.p,
            "basis": [[str(c) for c in e.coeffs] for e in self.basis],
            "discriminant": self.discriminant,
        }


def _order_closure(A, vectors, max_rounds=12):
    basis = lattice_basis(vectors)
    for _ in range(max_rounds):
        qs = [A(*v) for v in basis]
        prods = [x * y for x in qs for y in qs]
        if not all(_is_integral(z) for z in prods):
            return None
        new = lattice_basis(list(basis) + [z.coeffs for z in prods])
        if new == basis:
            return basis
        basis = new
    return None


def _make_order(A, basis_vectors) -> QuaternionOrder:
    basis = list(basis_vectors)
    # Hermite basis with column order (1, 2, 3, 0) ends with the generator of O ∩ Q = Z
    one = tuple(Fraction(int(t == 0)) for t in range(4))
    if basis[-1] != one:
        raise SaturationFailed("lattice does not meet Q in Z")
    basis = [basis[-1]] + basis[:-1]
    qs = tuple(A(*v) for v in basis)
    return QuaternionOrder(A, qs, reduced_discriminant(A, qs))


def maximal_order(A: QuaternionAlgebra) -> QuaternionOrder:
    """Saturate Z<1, i, j, k> prime by prime until the reduced discriminant is p."""
    if A.a.denominator != 1 or A.b.denominator != 1:
        raise ValueError("structure constants must be integers")
    O = _make_order(A, lattice_basis([tuple(Fraction(int(s == t)) for t in range(4)) for s in range(4)]))
    while O.discriminant != A.p:
        d = O.discriminant
        grown = None
        for l in prime_divisors(d):
            if l == A.p and d % (l * l):
                continue
            grown = _saturate_once(O, l)
            if grown is not None:
                break
        if grown is None:
            raise SaturationFailed(f"stuck at reduced discriminant {d}")
        O = grown
    return O


def _saturate_once(O: QuaternionOrder, l: int):
    A = O.algebra
    vecs = [e.coeffs for e in O.basis]
    for c in itertools.product(range(l), repeat=4):
        if not any(c):
            continue
        x = O.element(c) / l
        if not _is_integral(x):
            continue
        closed = _order_closure(A, vecs + [x.coeffs])
        if closed is None:
            continue
        bigger = _make_order(A, closed)
        if bigger.discriminant < O.discriminant:
            return bigger
    return None


# -- splittings modulo l^k ----------------------------------------------------

def _mat2_mul(x, y, mod):
    return (
        (x[0] * y[0] + x[1] * y[2]) % mod, (x[0] * y[1] + x[1] * y[3]) % mod,
        (x[2] * y[0] + x[3] * y[2]) % mod, (x[2] * y[1] + x[3] * y[3]) % mod,
    )


@dataclass(frozen=True)
class SplittingData:
    """Images of 1, i, j, k (and of the order basis) in M(2, Z/l^k), each a flat (m11, m12, m21, m22)."""

    prime: int
    exponent: int
    images: tuple
    order_images: tuple
    order: QuaternionOrder = field(repr=False, compare=False)
    seed: int | None = None

    @property
    def modulus(self) -> int:
        return self.prime**self.exponent

    def image_of_coords(self, coords) -> tuple:
        mod = self.modulus
        out = [0, 0, 0, 0]
        for c, img in zip(coords, self.order_images):
            c = as_rational(c)
            c = c.numerator * pow(c.denominator, -1, mod)
            for t in range(4):
                out[t] += c * img[t]
        return tuple(v % mod for v in out)

    def image(self, x: Quaternion) -> tuple:
        return self.image_of_coords(self.order.coordinates(x))

    def check(self):
        mod = self.modulus
        A = self.order.algebra
        one, I, J, K = self.images
        a, b = int(A.a), int(A.b)
        assert one == (1, 0, 0, 1)
        assert _mat2_mul(I, I, mod) == tuple(a * u % mod for u in one)
        assert _mat2_mul(J, J, mod) == tuple(b * u % mod for u in one)
        assert _mat2_mul(I, J, mod) == K
        assert _mat2_mul(J, I, mod) == tuple(-u % mod for u in K)
        span = determinant([[Fraction(v) for v in img] for img in self.order_images], Fraction(1), Fraction(0))
        if span.denominator != 1 or int(span) % self.prime == 0:
            raise AssertionError("order images do not span M(2, Z/l^k)")
        return True

    def to_json(self) -> dict:
        return {
            "prime": self.prime,
            "modulus": self.modulus,
            "images": [[[m[0], m[1]], [m[2], m[3]]] for m in self.images],
            "order_images": [[[m[0], m[1]], [m[2], m[3]]] for m in self.order_images],
            "basis": [[str(c) for c in e.coeffs] for e in self.order.basis],
            "discriminant": self.order.discriminant,
            "seed": self.seed,
        }


def _omul(x, y, C, mod):
    out = [0, 0, 0, 0]
    for s in range(4):
        if x[s]:
            for t in range(4):
                if y[t]:
                    f = x[s] * y[t]
                    cst = C[s][t]
                    for u in range(4):
                        out[u] += f * cst[u]
    return tuple(v % mod for v in out)


def _find_idempotent(O: QuaternionOrder, l: int, seed: int):
    diag, cross = O.norm_form()
    traces = [int(e.trd()) for e in O.basis]

    def nrd(c):
        s = sum(d * x * x for d, x in zip(diag, c))
        s += sum(cross[u][v] * c[u] * c[v] for u in range(4) for v in range(u + 1, 4))
        return s

    if l <= 13:
        candidates = itertools.product(range(l), repeat=4)
    else:
        rng = random.Random(seed)
        candidates = (tuple(rng.randrange(l) for _ in range(4)) for _ in range(200 * l * l))
    for c in candidates:
        t = sum(tr * x for tr, x in zip(traces, c)) % l
        if t and nrd(c) % l == 0:
            tinv = pow(t, -1, l)
            return tuple(x * tinv % l for x in c)
    raise NoZeroDivisor(f"no rank-one idempotent found in O/{l}O")


def split_mod(O: QuaternionOrder, l: int, k: int = 1, seed: int = 0) -> SplittingData:
    A = O.algebra
    if A.p is not None and l % A.p == 0:
        raise ValueError(f"l = {l} must be prime to p = {A.p}")
    C = O.structure_constants()
    mod = l**k
    e = _find_idempotent(O, l, seed)
    while _omul(e, e, C, mod) != e:
        e2 = _omul(e, e, C, mod)
        e3 = _omul(e2, e, C, mod)
        e = tuple((3 * u - 2 * v) % mod for u, v in zip(e2, e3))

    basis_vecs = [tuple(int(s == t) for t in range(4)) for s in range(4)]
    left = [_omul(bv, e, C, l) for bv in basis_vecs]
    chosen = None
    for s1, s2 in itertools.combinations(range(4), 2):
        for r1, r2 in itertools.combinations(range(4), 2):
            if (left[s1][r1] * left[s2][r2] - left[s2][r1] * left[s1][r2]) % l:
                chosen = (s1, s2, r1, r2)
                break
        if chosen:
            break
    if chosen is None:
        raise NoZeroDivisor("left ideal O e is not two-dimensional")
    s1, s2, r1, r2 = chosen
    v1 = _omul(basis_vecs[s1], e, C, mod)
    v2 = _omul(basis_vecs[s2], e, C, mod)
    det = (v1[r1] * v2[r2] - v2[r1] * v1[r2]) % mod
    dinv = pow(det, -1, mod)

    def coords_in_ideal(y):
        c1 = (y[r1] * v2[r2] - v2[r1] * y[r2]) * dinv % mod
        c2 = (v1[r1] * y[r2] - y[r1] * v1[r2]) * dinv % mod
        if any((c1 * p + c2 * q - w) % mod for p, q, w in zip(v1, v2, y)):
            raise NoZeroDivisor("image does not lie in the left ideal")
        return c1, c2

    def rep(h):
        a1, a2 = coords_in_ideal(_omul(h, v1, C, mod))
        b1, b2 = coords_in_ideal(_omul(h, v2, C, mod))
        return (a1, b1, a2, b2)

    order_images = tuple(rep(bv) for bv in basis_vecs)
    std = []
    for x in (A.one, A.i, A.j, A.k):
        coords = O.coordinates(x)
        std.append(tuple(int(c) % mod for c in coords))
    images = tuple(rep(c) for c in std)
    data = SplittingData(l, k, images, order_images, O, seed if l > 13 else None)
    data.check()
    return data


# -- the group Gamma -----------------------------------------------------------

@dataclass(frozen=True)
class GammaElement:
    matrix: Mat2Quat
    denominator_exponent: int

    @classmethod
    def certify(cls, matrix: Mat2Quat, order: QuaternionOrder) -> "GammaElement":
        p = order.algebra.p
        n = nrd_mat(matrix)
        if n != 1:
            raise NotInGamma(f"reduced norm is {n}, not 1")
        e = 0
        for x in matrix.entries:
            for c in order.coordinates(x):
                d = c.denominator
                v = 0
                while d % p == 0:
                    d //= p
                    v += 1
                if d != 1:
                    raise NotInGamma(f"entry {x} has a denominator prime to p")
                e = max(e, v)
        return cls(matrix, e)


def reduce_gamma(g: GammaElement, S: SplittingData):
    """4x4 image (flat row-major tuple) of g in SL(4, Z/l^k)."""
    mod = S.modulus
    blocks = [S.image(x) for x in g.matrix.entries]
    rows = []
    for br in (0, 1):
        for r in (0, 1):
            left, right = blocks[2 * br], blocks[2 * br + 1]
            rows.append((left[2 * r], left[2 * r + 1], right[2 * r], right[2 * r + 1]))
    flat = tuple(v % mod for row in rows for v in row)
    det = determinant([[Fraction(v) for v in row] for row in rows], Fraction(1), Fraction(0))
    if int(det) % mod != 1 % mod:
        raise DeterminantNotOne(f"det of image is {int(det) % mod} mod {mod}")
    return flat


def uniformizer_element(O: QuaternionOrder, bound: int = 3) -> Quaternion:
    """An element of O of reduced norm p (j itself when b = -p)."""
    A = O.algebra
    p = A.p
    if O.contains(A.j) and A.j.nrd() == p:
        return A.j
    for c in itertools.product(range(-bound, bound + 1), repeat=4):
        x = O.element(c)
        if x.nrd() == p:
            return x
    raise SearchExhausted(f"no element of norm {p} with coordinates bounded by {bound}")


def witness_matrix(O: QuaternionOrder) -> Mat2Quat:
    x = uniformizer_element(O)
    A = O.algebra
    return Mat2Quat.of(x, A(0), A(0), x.inverse())


def gamma_generators(A: QuaternionAlgebra, O: QuaternionOrder) -> list:
    zero, one = A(0), A.one
    gens = [GammaElement.certify(Mat2Quat.of(one, x, zero, one), O) for x in O.basis]
    gens += [GammaElement.certify(Mat2Quat.of(one, zero, x, one), O) for x in O.basis]
    gens.append(GammaElement.certify(witness_matrix(O), O))
    return gens
