"""Exact coefficient rings: the integers (default), the rationals, and prime fields.

Everything downstream works over Z.  The other rings exist only for
cross-checks (e.g. rank computations over Q, reductions mod p); they share a
tiny common interface so polynomial code never special-cases.
"""

from __future__ import annotations

from fractions import Fraction


class Ring:
    """Base interface: coerce, add, mul, neg, and exact division by units."""

    name = "Z"

    def coerce(self, x):
        return int(x)

    def is_zero(self, x):
        return x == 0

    def add(self, x, y):
        return x + y

    def mul(self, x, y):
        return x * y

    def neg(self, x):
        return -x

    def one(self):
        return self.coerce(1)

    def __repr__(self):
        return self.name

    def __eq__(self, other):
        return isinstance(other, Ring) and self.name == other.name

    def __hash__(self):
        return hash(self.name)


class IntegerRing(Ring):
    name = "Z"


class RationalRing(Ring):
    name = "Q"

    def coerce(self, x):
        return Fraction(x)


class PrimeField(Ring):
    def __init__(self, p):
        if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
            raise ValueError(f"{p} is not prime")
        self.p = p
        self.name = f"F{p}"

    def coerce(self, x):
        return int(x) % self.p

    def add(self, x, y):
        return (x + y) % self.p

    def mul(self, x, y):
        return (x * y) % self.p

    def neg(self, x):
        return (-x) % self.p


ZZ = IntegerRing()
QQ = RationalRing()


def ring_from_tag(tag: str) -> Ring:
    """Parse a ring tag: ``Z``, ``Q``, or ``Fp(p)``."""
    tag = tag.strip()
    if tag == "Z":
        return ZZ
    if tag == "Q":
        return QQ
    if tag.startswith("Fp(") and tag.endswith(")"):
        return PrimeField(int(tag[3:-1]))
    raise ValueError(f"unknown ring tag {tag!r}; expected Z, Q, or Fp(p)")
