"""Exact multivariate polynomial arithmetic for the diagram algebras.

The variable universe has two kinds of generators:

* black-dot variables ``X_1 .. X_n`` (degree 2 each), and
* for every red strand ``j`` of thickness ``s_j``, the elementary generators
  ``E[j,1] .. E[j,s_j]`` of its symmetric-function alphabet (degree ``2d``
  for ``E[j,d]``).

A polynomial is a dict from exponent tuples to nonzero scalars.  Monomials
are ordered graded-lexicographically over ``(X_1..X_n, E[1,1]..E[m,s_m])``;
this order is only used for canonical printing/hashing and for the exact
division inside divided differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .scalars import Ring, ZZ


@dataclass(frozen=True)
class VarUniverse:
    """Black variable count plus the red shape declaring each E-alphabet."""

    n: int
    shape: tuple = ()
    ring: Ring = ZZ

    @property
    def m(self):
        return len(self.shape)

    @property
    def nvars(self):
        return self.n + sum(self.shape)

    def x_index(self, i):
        """0-based slot of X_i (1-based i)."""
        if not 1 <= i <= self.n:
            raise IndexError(f"X_{i} not in universe with n={self.n}")
        return i - 1

    def e_index(self, j, d):
        """0-based slot of E[j,d]; requires 1 <= d <= shape[j-1]."""
        if not 1 <= j <= self.m:
            raise IndexError(f"red alphabet {j} not in universe with m={self.m}")
        if not 1 <= d <= self.shape[j - 1]:
            raise IndexError(f"E[{j},{d}] illegal: alphabet has size {self.shape[j-1]}")
        return self.n + sum(self.shape[: j - 1]) + d - 1

    def var_degree(self, slot):
        if slot < self.n:
            return 2
        slot -= self.n
        for sj in self.shape:
            if slot < sj:
                return 2 * (slot + 1)
            slot -= sj
        raise IndexError(slot)

    def var_name(self, slot):
        if slot < self.n:
            return f"X{slot+1}"
        slot -= self.n
        for j, sj in enumerate(self.shape, start=1):
            if slot < sj:
                return f"E[{j},{slot+1}]"
            slot -= sj
        raise IndexError(slot)


class UniverseMismatch(ValueError):
    pass


class InexactDivision(ArithmeticError):
    """Signals an implementation bug: divided-difference numerators always divide."""


def _key(mono):
    return (sum(mono), mono)


@dataclass
class MultiPoly:
    universe: VarUniverse
    terms: dict = field(default_factory=dict)

    # -- construction -------------------------------------------------------

    @staticmethod
    def zero(u):
        return MultiPoly(u, {})

    @staticmethod
    def const(u, c):
        c = u.ring.coerce(c)
        if u.ring.is_zero(c):
            return MultiPoly(u, {})
        return MultiPoly(u, {(0,) * u.nvars: c})

    @staticmethod
    def one(u):
        return MultiPoly.const(u, 1)

    @staticmethod
    def var(u, slot, power=1):
        mono = [0] * u.nvars
        mono[slot] = power
        return MultiPoly(u, {tuple(mono): u.ring.one()})

    @staticmethod
    def x(u, i, power=1):
        return MultiPoly.var(u, u.x_index(i), power)

    @staticmethod
    def e(u, j, d):
        return MultiPoly.var(u, u.e_index(j, d))

    @staticmethod
    def monomial(u, mono, c=1):
        c = u.ring.coerce(c)
        if u.ring.is_zero(c):
            return MultiPoly(u, {})
        return MultiPoly(u, {tuple(mono): c})

    # -- basics --------------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return (
            isinstance(other, MultiPoly)
            and self.universe == other.universe
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.universe, tuple(sorted(self.terms.items()))))

    def _check(self, other):
        if self.universe != other.universe:
            raise UniverseMismatch(f"{self.universe} vs {other.universe}")

    def __add__(self, other):
        self._check(other)
        r = self.universe.ring
        out = dict(self.terms)
        for mono, c in other.terms.items():
            s = r.add(out.get(mono, r.coerce(0)), c)
            if r.is_zero(s):
                out.pop(mono, None)
            else:
                out[mono] = s
        return MultiPoly(self.universe, out)

    def __neg__(self):
        r = self.universe.ring
        return MultiPoly(self.universe, {m: r.neg(c) for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            return self.scale(other)
        self._check(other)
        r = self.universe.ring
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                s = r.add(out.get(mono, r.coerce(0)), r.mul(c1, c2))
                if r.is_zero(s):
                    out.pop(mono, None)
                else:
                    out[mono] = s
        return MultiPoly(self.universe, out)

    __rmul__ = __mul__

    def scale(self, c):
        r = self.universe.ring
        c = r.coerce(c)
        if r.is_zero(c):
            return MultiPoly(self.universe, {})
        return MultiPoly(self.universe, {m: r.mul(cc, c) for m, cc in self.terms.items()})

    def degree(self):
        """Maximal graded degree (-inf convention: None for 0)."""
        u = self.universe
        if not self.terms:
            return None
        return max(sum(e * u.var_degree(s) for s, e in enumerate(m)) for m in self.terms)

    def is_homogeneous(self):
        u = self.universe
        degs = {
            sum(e * u.var_degree(s) for s, e in enumerate(m)) for m in self.terms
        }
        return len(degs) <= 1

    def homogeneous_parts(self):
        u = self.universe
        parts = {}
        for m, c in self.terms.items():
            d = sum(e * u.var_degree(s) for s, e in enumerate(m))
            parts.setdefault(d, {})[m] = c
        return {d: MultiPoly(u, t) for d, t in parts.items()}

    def __str__(self):
        if not self.terms:
            return "0"
        u = self.universe
        bits = []
        for mono in sorted(self.terms, key=_key, reverse=True):
            c = self.terms[mono]
            factors = [
                u.var_name(s) + (f"^{e}" if e > 1 else "")
                for s, e in enumerate(mono)
                if e
            ]
            body = "*".join(factors) if factors else "1"
            bits.append(f"{c}*{body}" if factors else f"{c}")
        return " + ".join(bits)

    __repr__ = __str__


# -- operators on the black variables ---------------------------------------


def sym_act(u, perm, f):
    """Relabel the X variables by a permutation of {1..n}; reds untouched.

    ``perm`` maps old index to new index, 1-based: X_i -> X_{perm[i-1]}.
    """
    out = {}
    r = u.ring
    for mono, c in f.terms.items():
        new = list(mono)
        for i in range(u.n):
            new[perm[i] - 1] = mono[i]
        new = tuple(new)
        s = r.add(out.get(new, r.coerce(0)), c)
        if r.is_zero(s):
            out.pop(new, None)
        else:
            out[new] = s
    return MultiPoly(u, out)


def _transposition(n, r):
    p = list(range(1, n + 1))
    p[r - 1], p[r] = p[r], p[r - 1]
    return tuple(p)


def divided_difference(r, f):
    """The r-th divided difference (f - s_r f) / (X_r - X_{r+1}), exactly."""
    u = f.universe
    if not 1 <= r <= u.n - 1:
        raise IndexError(f"divided difference index {r} out of range for n={u.n}")
    num = f - sym_act(u, _transposition(u.n, r), f)
    return _exact_divide(num, u.x_index(r), u.x_index(r + 1))


def _exact_divide(num, slot_a, slot_b):
    """Divide by (v_a - v_b), raising InexactDivision on failure."""
    u = num.universe
    ring = u.ring
    quot = {}
    terms = dict(num.terms)
    while terms:
        mono = max(terms, key=_key)
        c = terms[mono]
        if mono[slot_a] == 0:
            raise InexactDivision("numerator not divisible: antisymmetry violated")
        qm = list(mono)
        qm[slot_a] -= 1
        qm = tuple(qm)
        quot[qm] = ring.add(quot.get(qm, ring.coerce(0)), c)
        if ring.is_zero(quot[qm]):
            del quot[qm]
        # subtract c * qm * (v_a - v_b)
        for slot, sign in ((slot_a, 1), (slot_b, -1)):
            mm = list(qm)
            mm[slot] += 1
            mm = tuple(mm)
            s = ring.add(terms.get(mm, ring.coerce(0)), ring.neg(c) if sign > 0 else c)
            if ring.is_zero(s):
                terms.pop(mm, None)
            else:
                terms[mm] = s
    return MultiPoly(u, quot)


def dd_word(word, f):
    """Apply a sequence of divided differences, leftmost entry acting last."""
    for r in reversed(word):
        f = divided_difference(r, f)
    return f


def longest_word(n):
    """Lexicographically least reduced word of w_0 in S_n."""
    word = []
    for k in range(1, n):
        word.extend(range(k, 0, -1))
    return tuple(word)


def dd_longest(f):
    """The operator for the longest element w_0 of S_n."""
    return dd_word(longest_word(f.universe.n), f)


# -- symmetric functions -----------------------------------------------------


def elementary_sym(u, slots, d):
    """e_d in the listed variable slots; e_0 = 1, e_d = 0 past the count."""
    if d < 0 or d > len(slots):
        return MultiPoly.zero(u)
    out = {}
    one = u.ring.one()
    for combo in itertools.combinations(slots, d):
        mono = [0] * u.nvars
        for s in combo:
            mono[s] += 1
        out[tuple(mono)] = one
    return MultiPoly(u, out)


def complete_sym(u, slots, d):
    """h_d in the listed slots via the Newton recursion from the e_i."""
    if d < 0:
        return MultiPoly.zero(u)
    if d == 0:
        return MultiPoly.one(u)
    es = [elementary_sym(u, slots, i) for i in range(len(slots) + 1)]
    hs = [MultiPoly.one(u)]
    for ell in range(1, d + 1):
        acc = MultiPoly.zero(u)
        for i in range(1, min(ell, len(slots)) + 1):
            term = es[i] * hs[ell - i]
            acc = acc + (term if i % 2 == 1 else -term)
        hs.append(acc)
    return hs[d]


def elementary_in_x(u, k, d):
    """e_d(X_1..X_k)."""
    return elementary_sym(u, [u.x_index(i) for i in range(1, k + 1)], d)


def complete_in_x(u, k, d):
    """h_d(X_1..X_k)."""
    return complete_sym(u, [u.x_index(i) for i in range(1, k + 1)], d)


def red_e(u, j, d):
    """E_d of the j-th red alphabet as a polynomial; respects truncation."""
    if d < 0:
        return MultiPoly.zero(u)
    if d == 0:
        return MultiPoly.one(u)
    if d > u.shape[j - 1]:
        return MultiPoly.zero(u)
    return MultiPoly.e(u, j, d)


def complete_in_red(u, j, ell):
    """H_ell of the j-th red alphabet, as a polynomial in its E generators.

    Newton recursion with e_d := E[j,d] and e_d = 0 for d > s_j; H_0 = 1 and
    H_ell = 0 for ell < 0.
    """
    if ell < 0:
        return MultiPoly.zero(u)
    sj = u.shape[j - 1]
    hs = [MultiPoly.one(u)]
    for k in range(1, ell + 1):
        acc = MultiPoly.zero(u)
        for i in range(1, min(k, sj) + 1):
            term = MultiPoly.e(u, j, i) * hs[k - i]
            acc = acc + (term if i % 2 == 1 else -term)
        hs.append(acc)
    return hs[ell]


def schur_poly(u, mu, k):
    """Schur polynomial s_mu(X_1..X_k) as dd_{w_0} of x^{mu+delta}."""
    mu = tuple(mu)
    if len(mu) > k:
        raise ValueError(f"partition {mu} has more than {k} parts")
    mu = mu + (0,) * (k - len(mu))
    if any(mu[i] < mu[i + 1] for i in range(k - 1)) or any(p < 0 for p in mu):
        raise ValueError(f"{mu} is not a partition")
    if k > u.n:
        raise ValueError("not enough black variables")
    mono = [0] * u.nvars
    for i in range(k):
        mono[u.x_index(i + 1)] = mu[i] + (k - 1 - i)
    f = MultiPoly.monomial(u, mono)
    word = []
    for t in range(1, k):
        word.extend(range(t, 0, -1))
    return dd_word(tuple(word), f)


# -- Sq(n) combinatorics ------------------------------------------------------


def sq_enumerate(n):
    """All sequences (l_1..l_{n-1}) with 0 <= l_v <= v; n! of them."""
    ranges = [range(v + 1) for v in range(1, n)]
    return [tuple(ell) for ell in itertools.product(*ranges)]


def hat(ell):
    """The composition (0, 1-l_1, ..., n-1-l_{n-1})."""
    return (0,) + tuple(j - lj for j, lj in enumerate(ell, start=1))


def eps_monomial(u, ell):
    """The standard elementary monomial: product of e_{l_v}(X_1..X_v)."""
    f = MultiPoly.one(u)
    for v, lv in enumerate(ell, start=1):
        f = f * elementary_in_x(u, v, lv)
    return f


def xhat_monomial(u, ell):
    """The monomial x^{hat(ell)}."""
    if u.n == 0:
        return MultiPoly.one(u)
    mono = [0] * u.nvars
    for i, e in enumerate(hat(ell), start=1):
        mono[u.x_index(i)] = e
    return MultiPoly.monomial(u, mono)


def dual_pairing(f, g):
    """dd_{w_0}(f*g); inputs must not involve red generators."""
    u = f.universe
    for mono in list(f.terms) + list(g.terms):
        if any(mono[s] for s in range(u.n, u.nvars)):
            raise ValueError("dual pairing is defined on black variables only")
    return dd_longest(f * g)
