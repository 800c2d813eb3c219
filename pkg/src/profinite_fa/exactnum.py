"""Exact rationals, truncated l-adic numbers, Hensel square roots and Hilbert symbols.

Rationals are plain :class:`fractions.Fraction` values (always reduced).
:class:`PadicNumber` stores ``l**valuation * unit`` with ``unit`` known modulo
``l**precision``.  Exact zero has valuation ``math.inf``.  A difference that
cancels every known digit becomes an *indistinguishable zero* ``O(l**A)``
(``precision == 0``); asking such a value for its valuation, unit or inverse
raises :class:`PrecisionExhausted`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

from sympy import factorint
from sympy.ntheory import sqrt_mod

Rational = Fraction

INF = "inf"

DEFAULT_PRECISION = int(os.environ.get("TOOL_PRECISION", "32"))


class PrecisionExhausted(ArithmeticError):
    pass


class NotASquare(ValueError):
    pass


class ReciprocityViolation(AssertionError):
    pass


def as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to a rational")


def vp(n: int, p: int) -> int:
    """Valuation of a nonzero integer at p."""
    if n == 0:
        raise ValueError("valuation of 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def rational_valuation(q, p: int) -> float | int:
    q = as_rational(q)
    if q == 0:
        return math.inf
    return vp(q.numerator, p) - vp(q.denominator, p)


def prime_divisors(n: int) -> list[int]:
    return sorted(factorint(abs(n)).keys()) if abs(n) > 1 else []


class PadicNumber:
    __slots__ = ("prime", "valuation", "unit", "precision")

    def __init__(self, prime: int, valuation, unit: int, precision: int = DEFAULT_PRECISION):
        if prime < 2:
            raise ValueError("prime must be >= 2")
        if valuation == math.inf:
            self.prime, self.valuation, self.unit, self.precision = prime, math.inf, 0, precision
            return
        if precision < 0:
            raise ValueError("precision must be >= 0")
        mod = prime**precision
        unit %= mod
        if unit == 0:
            # nothing significant survives: O(prime**(valuation + precision))
            self.prime, self.valuation, self.unit, self.precision = prime, valuation + precision, 0, 0
            return
        while unit % prime == 0:
            unit //= prime
            valuation += 1
            precision -= 1
        self.prime = prime
        self.valuation = valuation
        self.unit = unit % prime**precision
        self.precision = precision

    @classmethod
    def _raw(cls, prime, valuation, unit, precision):
        obj = object.__new__(cls)
        obj.prime = prime
        obj.valuation = valuation
        obj.unit = unit
        obj.precision = precision
        return obj

    @classmethod
    def zero(cls, prime: int, precision: int = DEFAULT_PRECISION) -> "PadicNumber":
        return cls(prime, math.inf, 0, precision)

    @classmethod
    def from_rational(cls, q, prime: int, precision: int = DEFAULT_PRECISION) -> "PadicNumber":
        q = as_rational(q)
        if q == 0:
            return cls.zero(prime, precision)
        num, den = q.numerator, q.denominator
        v = 0
        while num % prime == 0:
            num //= prime
            v += 1
        while den % prime == 0:
            den //= prime
            v -= 1
        mod = prime**precision
        return cls._raw(prime, v, num * pow(den, -1, mod) % mod, precision)

    # -- state -----------------------------------------------------------
    @property
    def is_exact_zero(self) -> bool:
        return self.valuation == math.inf

    @property
    def is_indistinguishable_from_zero(self) -> bool:
        return self.valuation != math.inf and self.precision == 0

    @property
    def absolute_precision(self):
        return self.valuation + self.precision

    def exact_valuation(self):
        if self.is_indistinguishable_from_zero:
            raise PrecisionExhausted(f"no significant digits left (O({self.prime}^{self.valuation}))")
        return self.valuation

    def is_zero(self) -> bool:
        """True for exact zero and for values with no significant digit."""
        return self.valuation == math.inf or self.precision == 0

    def truncate(self, t: int) -> Fraction:
        """The canonical representative of ``self mod prime**t`` as an element of Z[1/prime]."""
        if self.valuation == math.inf or self.valuation >= t:
            return Fraction(0)
        if self.absolute_precision < t:
            raise PrecisionExhausted(
                f"need absolute precision {t}, have {self.absolute_precision}"
            )
        digits = self.unit % self.prime ** (t - self.valuation)
        return Fraction(digits) * Fraction(self.prime) ** self.valuation

    def to_rational(self) -> Fraction:
        """The value with all unknown digits set to zero."""
        if self.is_zero():
            return Fraction(0)
        return Fraction(self.unit) * Fraction(self.prime) ** self.valuation

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other) -> "PadicNumber":
        if isinstance(other, PadicNumber):
            if other.prime != self.prime:
                raise ValueError(f"primes differ: {self.prime} vs {other.prime}")
            return other
        if isinstance(other, (int, Fraction)):
            prec = self.precision if self.precision > 0 else DEFAULT_PRECISION
            return PadicNumber.from_rational(other, self.prime, max(prec, 1))
        return NotImplemented

    def __add__(self, other):
        y = self._coerce(other)
        if y is NotImplemented:
            return y
        if self.valuation == math.inf:
            return y
        if y.valuation == math.inf:
            return self
        p = self.prime
        v = min(self.valuation, y.valuation)
        A = min(self.valuation + self.precision, y.valuation + y.precision)
        if A <= v:
            return PadicNumber._raw(p, A, 0, 0)
        n = A - v
        s = self.unit * p ** (self.valuation - v) + y.unit * p ** (y.valuation - v)
        return PadicNumber(p, v, s, n)

    __radd__ = __add__

    def __neg__(self):
        if self.valuation == math.inf or self.precision == 0:
            return self
        return PadicNumber._raw(self.prime, self.valuation, (-self.unit) % self.prime**self.precision, self.precision)

    def __sub__(self, other):
        y = self._coerce(other)
        if y is NotImplemented:
            return y
        return self + (-y)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        y = self._coerce(other)
        if y is NotImplemented:
            return y
        p = self.prime
        if self.valuation == math.inf or y.valuation == math.inf:
            return PadicNumber._raw(p, math.inf, 0, max(self.precision, y.precision))
        n = min(self.precision, y.precision)
        v = self.valuation + y.valuation
        if n == 0:
            return PadicNumber._raw(p, v, 0, 0)
        return PadicNumber._raw(p, v, self.unit * y.unit % p**n, n)

    __rmul__ = __mul__

    def inverse(self) -> "PadicNumber":
        if self.valuation == math.inf:
            raise ZeroDivisionError("p-adic division by exact zero")
        if self.precision == 0:
            raise PrecisionExhausted("division by a value indistinguishable from zero")
        mod = self.prime**self.precision
        return PadicNumber._raw(self.prime, -self.valuation, pow(self.unit, -1, mod), self.precision)

    def __truediv__(self, other):
        y = self._coerce(other)
        if y is NotImplemented:
            return y
        return self * y.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        out = PadicNumber.from_rational(1, self.prime, self.precision or DEFAULT_PRECISION)
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            y = self._coerce(other)
        except ValueError:
            return False
        if y is NotImplemented:
            return NotImplemented
        return (self - y).is_zero()

    __hash__ = None

    def __repr__(self):
        if self.valuation == math.inf:
            return f"PadicNumber({self.prime}, 0)"
        if self.precision == 0:
            return f"O({self.prime}^{self.valuation})"
        return f"{self.prime}^{self.valuation}*{self.unit} + O({self.prime}^{self.absolute_precision})"


def padic_arith(x: PadicNumber, y: PadicNumber, op: str) -> PadicNumber:
    if x.prime != y.prime:
        raise ValueError("operands live over different primes")
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown op {op!r}")


def hensel_sqrt(a: PadicNumber) -> PadicNumber:
    """Square root of ``a`` in Q_l, or :class:`NotASquare` with the failing criterion."""
    if a.is_exact_zero:
        raise ValueError("hensel_sqrt needs a nonzero argument")
    v = a.exact_valuation()
    l, n, u = a.prime, a.precision, a.unit
    if v % 2:
        raise NotASquare(f"odd valuation {v}")
    if l == 2:
        if n < 3:
            raise PrecisionExhausted("need at least 3 digits to decide squareness at 2")
        if u % 8 != 1:
            raise NotASquare(f"unit part {u % 8} mod 8 is not 1")
        r = 1
        for k in range(3, n):
            if (r * r - u) % 2 ** (k + 1):
                r += 2 ** (k - 1)
        return PadicNumber(2, v // 2, r, n - 1)
    if pow(u % l, (l - 1) // 2, l) != 1:
        raise NotASquare(f"unit part {u % l} is a non-residue mod {l}")
    r = sqrt_mod(u % l, l)
    m = 1
    while m < n:
        m = min(2 * m, n)
        mod = l**m
        r = (r - (r * r - u) * pow(2 * r, -1, mod)) % mod
    return PadicNumber(l, v // 2, r, n)


# -- Hilbert symbols -------------------------------------------------------

def _square_class_int(q) -> int:
    q = as_rational(q)
    if q == 0:
        raise ValueError("Hilbert symbol of 0")
    # q and num*den differ by the square den**2
    return q.numerator * q.denominator


def _legendre(u: int, l: int) -> int:
    r = pow(u % l, (l - 1) // 2, l)
    return -1 if r == l - 1 else 1


def hilbert_symbol(a, b, place) -> int:
    """Local Hilbert symbol (a, b) at a prime l or at ``INF``."""
    a, b = _square_class_int(a), _square_class_int(b)
    if place == INF:
        return -1 if a < 0 and b < 0 else 1
    l = int(place)
    alpha, beta = vp(a, l), vp(b, l)
    u, w = a // l**alpha, b // l**beta
    if l == 2:
        eps = lambda t: ((t - 1) // 2) % 2
        omega = lambda t: ((t * t - 1) // 8) % 2
        e = eps(u) * eps(w) + alpha * omega(w) + beta * omega(u)
        return -1 if e % 2 else 1
    sign = -1 if (alpha * beta * ((l - 1) // 2)) % 2 else 1
    return sign * _legendre(u, l) ** beta * _legendre(w, l) ** alpha


@dataclass(frozen=True)
class ProductFormulaReport:
    a: Fraction
    b: Fraction
    symbols: dict = field(hash=False)
    ramified: tuple
    product: int

    def to_json(self) -> dict:
        return {
            "a": str(self.a),
            "b": str(self.b),
            "symbols": {str(k): v for k, v in self.symbols.items()},
            "ramified": [str(x) for x in self.ramified],
            "product": self.product,
        }


def relevant_places(a, b) -> list:
    a, b = _square_class_int(a), _square_class_int(b)
    primes = sorted(set(prime_divisors(2 * a * b)))
    return [INF] + primes


def verify_product_formula(a, b) -> ProductFormulaReport:
    a, b = as_rational(a), as_rational(b)
    symbols = {pl: hilbert_symbol(a, b, pl) for pl in relevant_places(a, b)}
    ramified = tuple(pl for pl, s in symbols.items() if s == -1)
    product = math.prod(symbols.values())
    if len(ramified) % 2 or product != 1:
        raise ReciprocityViolation(f"({a}, {b}) ramified at an odd set {ramified}")
    return ProductFormulaReport(a, b, symbols, ramified, product)
