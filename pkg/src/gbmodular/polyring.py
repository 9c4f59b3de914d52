"""Sparse multivariate polynomials in graded reverse lexicographic order.

Monomials are packed into a single Python int (the *key*) whose natural
integer order is grevlex, and for which monomial multiplication is integer
addition.  With ``F = W + 1`` bits per variable (``W`` exponent bits plus one
guard bit) and ``S = n * F``::

    R   = sum(e[i] << (F * i))          # last variable most significant
    key = (deg << S) - R

A larger degree dominates because ``0 <= R < 2**S``; for equal degrees a
smaller exponent in the last differing variable gives a smaller ``R`` and
hence a larger key.  The guard bits detect exponent overflow after a product
and make divisibility a single subtraction.
"""

from __future__ import annotations

import heapq
import itertools
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence

from .modarith import PrimeField


class ExponentOverflow(OverflowError):
    pass


class MonomialLayout:
    """Packing parameters for monomials in ``nvars`` variables."""

    def __init__(self, nvars: int, width: int | None = None):
        if nvars < 1:
            raise ValueError("need at least one variable")
        if width is None:
            width = min(16, max(8, 64 // nvars - 1))
        self.nvars = nvars
        self.width = width
        self.field = width + 1
        self.shift = nvars * self.field
        self.rmask = (1 << self.shift) - 1
        self.emax = (1 << width) - 1
        self.guards = sum(1 << (self.field * i + width) for i in range(nvars))

    def __eq__(self, other):
        return (isinstance(other, MonomialLayout) and other.nvars == self.nvars
                and other.width == self.width)

    def __hash__(self):
        return hash((self.nvars, self.width))

    def pack(self, exps: Sequence[int]) -> int:
        if len(exps) != self.nvars:
            raise ValueError(f"expected {self.nvars} exponents, got {len(exps)}")
        r = 0
        deg = 0
        for i, e in enumerate(exps):
            if e < 0:
                raise ValueError("negative exponent")
            if e > self.emax:
                raise ExponentOverflow(f"exponent {e} exceeds {self.emax}")
            r |= e << (self.field * i)
            deg += e
        return (deg << self.shift) - r

    def unpack(self, key: int) -> tuple[int, ...]:
        r = -key & self.rmask
        f, m = self.field, self.emax
        return tuple((r >> (f * i)) & m for i in range(self.nvars))

    def degree(self, key: int) -> int:
        return (key + (-key & self.rmask)) >> self.shift

    def mul(self, a: int, b: int) -> int:
        k = a + b
        if -k & self.rmask & self.guards:
            raise ExponentOverflow("exponent overflow in monomial product")
        return k

    def divides(self, b: int, a: int) -> bool:
        """True when monomial ``b`` divides monomial ``a``."""
        m = self.rmask
        g = self.guards
        return ((((-a & m) | g) - (-b & m)) & g) == g

    def div(self, a: int, b: int) -> int:
        if not self.divides(b, a):
            raise ValueError("monomial division by a non-divisor")
        return a - b

    def lcm(self, a: int, b: int) -> int:
        ea, eb = self.unpack(a), self.unpack(b)
        return self.pack([x if x > y else y for x, y in zip(ea, eb)])

    def coprime(self, a: int, b: int) -> bool:
        m = self.rmask
        ra, rb = -a & m, -b & m
        # no variable shared: fieldwise, at least one side zero
        return all(not ((ra >> s) & self.emax and (rb >> s) & self.emax)
                   for s in range(0, self.shift, self.field))


@total_ordering
class Monomial:
    """Exponent vector with cached total degree."""

    __slots__ = ("exponents", "degree")

    def __init__(self, exponents: Iterable[int]):
        exps = tuple(int(e) for e in exponents)
        if any(e < 0 for e in exps):
            raise ValueError("negative exponent")
        self.exponents = exps
        self.degree = sum(exps)

    def __repr__(self):
        return f"Monomial({self.exponents})"

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.exponents == other.exponents

    def __hash__(self):
        return hash(self.exponents)

    def __lt__(self, other):
        return grevlex_cmp(self, other) < 0

    def __mul__(self, other):
        _check_len(self, other)
        return Monomial(a + b for a, b in zip(self.exponents, other.exponents))


def _check_len(a: Monomial, b: Monomial) -> None:
    if len(a.exponents) != len(b.exponents):
        raise ValueError("monomials over different numbers of variables")


def grevlex_cmp(a: Monomial, b: Monomial) -> int:
    """-1, 0 or 1 as ``a`` is less than, equal to or greater than ``b``."""
    _check_len(a, b)
    if a.degree != b.degree:
        return 1 if a.degree > b.degree else -1
    for x, y in zip(reversed(a.exponents), reversed(b.exponents)):
        if x != y:
            return 1 if x < y else -1
    return 0


def monomial_lcm(a: Monomial, b: Monomial) -> Monomial:
    _check_len(a, b)
    return Monomial(max(x, y) for x, y in zip(a.exponents, b.exponents))


def monomial_divides(a: Monomial, b: Monomial) -> bool:
    """True when ``a`` divides ``b``."""
    _check_len(a, b)
    return all(x <= y for x, y in zip(a.exponents, b.exponents))


def monomial_div(a: Monomial, b: Monomial) -> Monomial:
    """``a / b``; ``b`` must divide ``a``."""
    if not monomial_divides(b, a):
        raise ValueError(f"{b} does not divide {a}")
    return Monomial(x - y for x, y in zip(a.exponents, b.exponents))


class RationalField:
    """Coefficient domain Q, elements are :class:`fractions.Fraction`."""

    is_field = True
    zero = Fraction(0)
    one = Fraction(1)

    def __repr__(self):
        return "QQ"

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash("QQ")

    def convert(self, x):
        return Fraction(x)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return 1 / a

    def is_zero(self, a):
        return a == 0

    def to_str(self, a):
        return str(a)


QQ = RationalField()


class ResidueRing:
    """Z/MZ for a (big, composite) modulus M; used for CRT views of a basis."""

    is_field = False
    zero = 0
    one = 1

    def __init__(self, modulus: int):
        self.modulus = modulus

    def __repr__(self):
        return f"ResidueRing({self.modulus})"

    def __eq__(self, other):
        return isinstance(other, ResidueRing) and other.modulus == self.modulus

    def __hash__(self):
        return hash(("ZM", self.modulus))

    def convert(self, x):
        if isinstance(x, Fraction):
            return x.numerator * pow(x.denominator, -1, self.modulus) % self.modulus
        return int(x) % self.modulus

    def add(self, a, b):
        return (a + b) % self.modulus

    def sub(self, a, b):
        return (a - b) % self.modulus

    def neg(self, a):
        return -a % self.modulus

    def mul(self, a, b):
        return a * b % self.modulus

    def inv(self, a):
        return pow(a, -1, self.modulus)

    def is_zero(self, a):
        return a % self.modulus == 0

    def to_str(self, a):
        return str(a)


class PolyRing:
    """Variables (in decreasing order), coefficient domain and packing layout."""

    def __init__(self, variables: Sequence[str], domain=QQ, width: int | None = None):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        self.domain = domain
        self.layout = MonomialLayout(len(self.variables), width)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def __repr__(self):
        return f"PolyRing({list(self.variables)}, {self.domain!r})"

    def __eq__(self, other):
        return (isinstance(other, PolyRing) and other.variables == self.variables
                and other.domain == self.domain and other.layout == self.layout)

    def __hash__(self):
        return hash((self.variables, self.domain))

    def with_domain(self, domain) -> "PolyRing":
        return PolyRing(self.variables, domain, self.layout.width)

    def zero(self) -> "Polynomial":
        return Polynomial(self, (), ())

    def one(self) -> "Polynomial":
        return self.constant(1)

    def constant(self, c) -> "Polynomial":
        c = self.domain.convert(c)
        if self.domain.is_zero(c):
            return self.zero()
        return Polynomial(self, (self.layout.pack([0] * self.nvars),), (c,))

    def gen(self, name_or_index) -> "Polynomial":
        i = (self.variables.index(name_or_index) if isinstance(name_or_index, str)
             else name_or_index)
        exps = [0] * self.nvars
        exps[i] = 1
        return Polynomial(self, (self.layout.pack(exps),), (self.domain.one,))

    def gens(self) -> list["Polynomial"]:
        return [self.gen(i) for i in range(self.nvars)]

    def from_dict(self, terms: dict) -> "Polynomial":
        """Build from ``{exponent tuple: coefficient}``."""
        lay, dom = self.layout, self.domain
        acc: dict[int, object] = {}
        for exps, c in terms.items():
            k = lay.pack(exps)
            acc[k] = dom.add(acc[k], dom.convert(c)) if k in acc else dom.convert(c)
        return Polynomial._from_dict(self, acc)

    def monomial(self, key: int) -> Monomial:
        return Monomial(self.layout.unpack(key))

    def key(self, m: Monomial) -> int:
        return self.layout.pack(m.exponents)


class Polynomial:
    """Immutable polynomial; terms strictly decreasing in grevlex, no zeros.

    ``keys`` and ``coeffs`` are parallel tuples; ``keys`` are packed monomials
    (see :class:`MonomialLayout`).
    """

    __slots__ = ("ring", "keys", "coeffs")

    def __init__(self, ring: PolyRing, keys: tuple, coeffs: tuple):
        self.ring = ring
        self.keys = keys
        self.coeffs = coeffs

    @classmethod
    def _from_dict(cls, ring: PolyRing, acc: dict) -> "Polynomial":
        isz = ring.domain.is_zero
        keys = sorted((k for k, c in acc.items() if not isz(c)), reverse=True)
        return cls(ring, tuple(keys), tuple(acc[k] for k in keys))

    # -- inspection ---------------------------------------------------------
    def __len__(self):
        return len(self.keys)

    def __bool__(self):
        return bool(self.keys)

    def is_zero(self) -> bool:
        return not self.keys

    def terms(self) -> list[tuple[Monomial, object]]:
        unpack = self.ring.layout.unpack
        return [(Monomial(unpack(k)), c) for k, c in zip(self.keys, self.coeffs)]

    def to_dict(self) -> dict:
        unpack = self.ring.layout.unpack
        return {unpack(k): c for k, c in zip(self.keys, self.coeffs)}

    @property
    def lm(self) -> Monomial:
        return Monomial(self.ring.layout.unpack(self.keys[0]))

    @property
    def lc(self):
        return self.coeffs[0]

    def total_degree(self) -> int:
        return self.ring.layout.degree(self.keys[0]) if self.keys else -1

    def __eq__(self, other):
        return (isinstance(other, Polynomial) and self.keys == other.keys
                and self.coeffs == other.coeffs
                and self.ring.variables == other.ring.variables)

    def __hash__(self):
        return hash((self.keys, self.coeffs))

    def __repr__(self):
        return f"Polynomial({self})"

    def __str__(self):
        return format_poly(self)

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "Polynomial") -> None:
        if other.ring != self.ring:
            raise ValueError("polynomials from different rings")

    def _lift(self, other) -> "Polynomial":
        return other if isinstance(other, Polynomial) else self.ring.constant(other)

    def __add__(self, other):
        return poly_add(self, self._lift(other))

    __radd__ = __add__

    def __neg__(self):
        neg = self.ring.domain.neg
        return Polynomial(self.ring, self.keys, tuple(neg(c) for c in self.coeffs))

    def __sub__(self, other):
        return poly_add(self, -self._lift(other))

    def __rsub__(self, other):
        return poly_add(self._lift(other), -self)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = self.ring.domain.convert(other)
            return self.mul_term(self.ring.layout.pack([0] * self.ring.nvars), c)
        self._check(other)
        dom, lay = self.ring.domain, self.ring.layout
        acc: dict[int, object] = {}
        for k1, c1 in zip(self.keys, self.coeffs):
            for k2, c2 in zip(other.keys, other.coeffs):
                k = lay.mul(k1, k2)
                c = dom.mul(c1, c2)
                acc[k] = dom.add(acc[k], c) if k in acc else c
        return Polynomial._from_dict(self.ring, acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = self.ring.one()
        for _ in range(n):
            result = result * self
        return result

    def mul_term(self, key: int, c) -> "Polynomial":
        dom, lay = self.ring.domain, self.ring.layout
        if dom.is_zero(c):
            return self.ring.zero()
        mul = dom.mul
        keys, coeffs = [], []
        for k, a in zip(self.keys, self.coeffs):
            v = mul(a, c)
            if not dom.is_zero(v):  # zero divisors in ResidueRing
                keys.append(lay.mul(k, key))
                coeffs.append(v)
        return Polynomial(self.ring, tuple(keys), tuple(coeffs))

    def monic(self) -> "Polynomial":
        if not self.keys:
            return self
        dom = self.ring.domain
        inv = dom.inv(self.coeffs[0])
        return Polynomial(self.ring, self.keys, tuple(dom.mul(c, inv) for c in self.coeffs))

    def map_coeffs(self, ring: PolyRing, fn) -> "Polynomial":
        """Apply ``fn`` to every coefficient, landing in ``ring``."""
        isz = ring.domain.is_zero
        pairs = [(k, fn(c)) for k, c in zip(self.keys, self.coeffs)]
        pairs = [(k, c) for k, c in pairs if not isz(c)]
        return Polynomial(ring, tuple(k for k, _ in pairs), tuple(c for _, c in pairs))

    def reduce_mod(self, field: PrimeField, ring: PolyRing | None = None) -> "Polynomial":
        ring = ring or self.ring.with_domain(field)
        return self.map_coeffs(ring, field.convert)


def poly_add(f: Polynomial, g: Polynomial) -> Polynomial:
    f._check(g)
    if not g.keys:
        return f
    if not f.keys:
        return g
    dom = f.ring.domain
    add, isz = dom.add, dom.is_zero
    fk, fc, gk, gc = f.keys, f.coeffs, g.keys, g.coeffs
    i = j = 0
    keys, coeffs = [], []
    nf, ng = len(fk), len(gk)
    while i < nf and j < ng:
        a, b = fk[i], gk[j]
        if a > b:
            keys.append(a)
            coeffs.append(fc[i])
            i += 1
        elif a < b:
            keys.append(b)
            coeffs.append(gc[j])
            j += 1
        else:
            c = add(fc[i], gc[j])
            if not isz(c):
                keys.append(a)
                coeffs.append(c)
            i += 1
            j += 1
    keys.extend(fk[i:])
    coeffs.extend(fc[i:])
    keys.extend(gk[j:])
    coeffs.extend(gc[j:])
    return Polynomial(f.ring, tuple(keys), tuple(coeffs))


def poly_mul_term(f: Polynomial, m: Monomial, c) -> Polynomial:
    return f.mul_term(f.ring.key(m), f.ring.domain.convert(c))


def normal_form(f: Polynomial, basis: Sequence[Polynomial],
                trace: list | None = None) -> Polynomial:
    """Fully reduce ``f`` by ``basis`` (a field is required).

    If ``trace`` is a list, each step ``(index, key multiplier, coefficient)``
    is appended so that ``f - result = sum(c * m * basis[index])``.
    """
    ring = f.ring
    dom, lay = ring.domain, ring.layout
    basis = [g for g in basis if g.keys]
    for g in basis:
        f._check(g)
    if not basis:
        return f
    lead = [(g.keys[0], dom.inv(g.coeffs[0])) for g in basis]
    acc = dict(zip(f.keys, f.coeffs))
    heap = [-k for k in f.keys]     # already a valid min-heap: keys decrease
    remainder: dict[int, object] = {}
    isz = dom.is_zero
    while heap:
        k = -heapq.heappop(heap)
        c = acc.pop(k)
        if isz(c):
            continue
        for idx, (lk, linv) in enumerate(lead):
            if lay.divides(lk, k):
                g = basis[idx]
                q = dom.mul(c, linv)
                mk = k - lk
                if trace is not None:
                    trace.append((idx, mk, q))
                for gk, gc in zip(g.keys[1:], g.coeffs[1:]):
                    t = gk + mk
                    v = dom.neg(dom.mul(q, gc))
                    if t in acc:
                        v = dom.add(acc[t], v)
                    else:
                        heapq.heappush(heap, -t)
                    acc[t] = v
                break
        else:
            remainder[k] = c
    return Polynomial._from_dict(ring, remainder)


def _format_coeff(c) -> str:
    return str(c)


def format_poly(f: Polynomial) -> str:
    """Render in script syntax, e.g. ``x1*x2 + 3/2*x2^2 - 1``."""
    if not f.keys:
        return "0"
    ring = f.ring
    names = ring.variables
    unpack = ring.layout.unpack
    out = []
    for n, (k, c) in enumerate(zip(f.keys, f.coeffs)):
        if isinstance(c, Fraction):
            neg = c < 0
            c = -c if neg else c
        else:
            neg = False
        factors = [names[i] if e == 1 else f"{names[i]}^{e}"
                   for i, e in enumerate(unpack(k)) if e]
        cs = _format_coeff(c)
        if not factors:
            body = cs
        elif c == 1:
            body = "*".join(factors)
        else:
            body = cs + "*" + "*".join(factors)
        if n == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def all_monomials(nvars: int, max_degree: int):
    """Exponent tuples of total degree <= max_degree."""
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            exps = [0] * nvars
            for i in combo:
                exps[i] += 1
            yield tuple(exps)
