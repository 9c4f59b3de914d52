"""Word-size prime fields, the descending prime stream, Chinese remaindering
and rational reconstruction.

All big-integer work uses Python ints.  Prime field elements are plain ints
in ``[0, p)``; the :class:`PrimeField` object only carries the modulus and
implements the coefficient-domain interface used by :mod:`gbmodular.polyring`.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction

PRIME_BITS = 29
PRIME_UPPER = 1 << PRIME_BITS
PRIME_LOWER = 1 << (PRIME_BITS - 1)

# Deterministic Miller-Rabin witnesses, valid for n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin test (exact for ``n < 3.3e24``)."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """The field Z/pZ.  Elements are ints in ``[0, p)``."""

    is_field = True

    def __init__(self, p: int, check: bool = True):
        if check and not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p

    def __repr__(self):
        return f"PrimeField({self.p})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("GF", self.p))

    zero = 0
    one = 1

    def convert(self, x) -> int:
        if isinstance(x, Fraction):
            den = x.denominator % self.p
            if den == 0:
                raise ZeroDivisionError(f"denominator of {x} vanishes mod {self.p}")
            return x.numerator * pow(den, -1, self.p) % self.p
        return int(x) % self.p

    def add(self, a, b):
        s = a + b
        return s - self.p if s >= self.p else s

    def sub(self, a, b):
        d = a - b
        return d + self.p if d < 0 else d

    def neg(self, a):
        return self.p - a if a else 0

    def mul(self, a, b):
        return field_mul(a, b, self)

    def inv(self, a):
        return field_inv(a, self)

    def is_zero(self, a) -> bool:
        return a == 0

    def to_str(self, a) -> str:
        return str(a)


def field_mul(a: int, b: int, field: PrimeField) -> int:
    return a * b % field.p


def field_inv(a: int, field: PrimeField) -> int:
    if a % field.p == 0:
        raise ZeroDivisionError("inverse of zero in a prime field")
    return pow(a, -1, field.p)


class PrimeStream:
    """Deterministic stream of 29-bit primes, descending from 2^29.

    ``stream[i]`` is the i-th prime below 2^29 (0-based), so every worker and
    every checkpoint agrees on prime identity by index.  ``draw()`` hands out
    consecutive indices and is safe to call from several threads.
    """

    _cache: list[int] = []
    _cache_lock = threading.Lock()

    def __init__(self, start: int = 0):
        self._next = start
        self._lock = threading.Lock()

    @classmethod
    def prime_at(cls, index: int) -> int:
        with cls._cache_lock:
            cache = cls._cache
            while len(cache) <= index:
                n = (cache[-1] if cache else PRIME_UPPER) - 1
                while not is_prime(n):
                    n -= 1
                    if n <= PRIME_LOWER:
                        raise RuntimeError("29-bit prime stream exhausted")
                cache.append(n)
            return cache[index]

    def __getitem__(self, index: int) -> int:
        return self.prime_at(index)

    @property
    def position(self) -> int:
        return self._next

    def draw(self) -> tuple[int, int]:
        """Return ``(index, prime)`` and advance the stream."""
        with self._lock:
            i = self._next
            self._next += 1
        return i, self.prime_at(i)


def next_prime(stream: PrimeStream) -> int:
    return stream.draw()[1]


def crt_pair(r1: int, m1: int, r2: int, p2: int) -> tuple[int, int]:
    """Combine ``x = r1 (mod m1)`` and ``x = r2 (mod p2)``.

    Returns ``(r, m1 * p2)`` with ``0 <= r < m1 * p2``.
    """
    if math.gcd(m1, p2) != 1:
        raise ValueError(f"moduli {m1} and {p2} are not coprime")
    return crt_merge(r1, m1, r2, p2, pow(m1, -1, p2)), m1 * p2


def crt_merge(r1: int, m1: int, r2: int, p2: int, m1_inv: int) -> int:
    """CRT step with ``m1_inv = m1^-1 mod p2`` precomputed by the caller."""
    return r1 + m1 * ((r2 - r1) * m1_inv % p2)


class ResidueAccumulator:
    """A single big-integer residue modulo a growing product of primes."""

    __slots__ = ("value", "modulus", "primes")

    def __init__(self):
        self.value = 0
        self.modulus = 1
        self.primes: list[int] = []

    def merge(self, residue: int, p: int) -> None:
        if p in self.primes:
            raise ValueError(f"prime {p} already merged")
        self.value, self.modulus = crt_pair(self.value, self.modulus, residue % p, p)
        self.primes.append(p)

    def reconstruct(self) -> Fraction | None:
        return rational_reconstruct(self.value, self.modulus)


def reconstruction_bound(m: int) -> int:
    """floor(sqrt(m / 2)), the balanced numerator/denominator bound."""
    return math.isqrt(m // 2)


def rational_reconstruct(r: int, m: int, bound: int | None = None) -> Fraction | None:
    """Find ``a/b`` with ``a = b*r (mod m)`` and ``|a|, b <= bound``.

    ``bound`` defaults to ``floor(sqrt(m/2))``.  Returns ``None`` when no such
    fraction exists (or when the denominator found shares a factor with m).
    """
    if bound is None:
        bound = reconstruction_bound(m)
    r %= m
    if r <= bound:
        return Fraction(r)
    # half extended Euclid: track (remainder, cofactor of r)
    r0, r1 = m, r
    t0, t1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0 or abs(t1) > bound:
        return None
    if t1 < 0:
        r1, t1 = -r1, -t1
    if math.gcd(t1, m) != 1:
        return None
    # gcd(r1, t1) may exceed 1 only when no reduced solution in range exists
    if math.gcd(r1, t1) != 1:
        return None
    return Fraction(r1, t1)
