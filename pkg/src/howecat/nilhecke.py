"""The nilHecke algebra NH_n on the basis {psi_w x^a}.

Elements are stored as dicts keyed by (w, a) where w is a permutation of
{1..n} (psi_w is well defined: the braid relations hold exactly, so any
reduced word gives the same element) and a is an exponent tuple for the dots.
Crossings sit to the left of dots in this normal form; in diagrams, dots live
at the bottom.

Multiplication pushes generators in from the right using

    f * psi_j  =  psi_j * s_j(f)  +  dd_j(f)          (twisted Leibniz)
    psi_w * psi_j = psi_{w s_j}  if the length goes up, else 0,

where dd_j is the divided difference on polynomials.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import permutations as perm
from .polycore import (
    MultiPoly,
    VarUniverse,
    divided_difference,
    dd_word,
    elementary_in_x,
    eps_monomial,
    hat,
    sq_enumerate,
    sym_act,
    xhat_monomial,
)
from .scalars import ZZ


@dataclass
class NHElement:
    n: int
    terms: dict = field(default_factory=dict)  # (w, a) -> coeff
    ring: object = ZZ

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(n, ring=ZZ):
        return NHElement(n, {}, ring)

    @staticmethod
    def one(n, ring=ZZ):
        return NHElement(n, {(perm.identity(n), (0,) * n): ring.one()}, ring)

    @staticmethod
    def dot(n, i, ring=ZZ):
        a = [0] * n
        a[i - 1] = 1
        return NHElement(n, {(perm.identity(n), tuple(a)): ring.one()}, ring)

    @staticmethod
    def cross(n, i, ring=ZZ):
        if not 1 <= i <= n - 1:
            raise IndexError(f"crossing index {i} out of range")
        w = perm.apply_transposition_right(perm.identity(n), i)
        return NHElement(n, {(w, (0,) * n): ring.one()}, ring)

    @staticmethod
    def from_poly(n, f, ring=ZZ):
        """Embed a polynomial in the X variables as an element."""
        e = perm.identity(n)
        terms = {}
        for mono, c in f.terms.items():
            terms[(e, tuple(mono[:n]))] = c
        return NHElement(n, terms, ring)

    def universe(self):
        return VarUniverse(self.n, (), self.ring)

    # -- linear structure ----------------------------------------------------

    def _add_term(self, out, key, c):
        s = self.ring.add(out.get(key, self.ring.coerce(0)), c)
        if self.ring.is_zero(s):
            out.pop(key, None)
        else:
            out[key] = s

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            self._add_term(out, k, c)
        return NHElement(self.n, out, self.ring)

    def __neg__(self):
        return NHElement(self.n, {k: self.ring.neg(c) for k, c in self.terms.items()}, self.ring)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = self.ring.coerce(c)
        if self.ring.is_zero(c):
            return NHElement.zero(self.n, self.ring)
        return NHElement(self.n, {k: self.ring.mul(cc, c) for k, cc in self.terms.items()}, self.ring)

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return (
            isinstance(other, NHElement)
            and self.n == other.n
            and self.terms == other.terms
        )

    # -- multiplication ------------------------------------------------------

    def _rmul_dot(self, i):
        out = {}
        for (w, a), c in self.terms.items():
            aa = list(a)
            aa[i - 1] += 1
            self._add_term(out, (w, tuple(aa)), c)
        return NHElement(self.n, out, self.ring)

    def _rmul_cross(self, j):
        u = self.universe()
        out = {}
        for (w, a), c in self.terms.items():
            # x^a * psi_j = psi_j * s_j(x^a) + dd_j(x^a)
            f = MultiPoly.monomial(u, a + (0,) * 0, 1)
            swapped = list(a)
            swapped[j - 1], swapped[j] = swapped[j], swapped[j - 1]
            if perm.length(perm.apply_transposition_right(w, j)) > perm.length(w):
                self._add_term(out, (perm.apply_transposition_right(w, j), tuple(swapped)), c)
            corr = divided_difference(j, f)
            for mono, cc in corr.terms.items():
                self._add_term(out, (w, tuple(mono[: self.n])), self.ring.mul(c, cc))
        return NHElement(self.n, out, self.ring)

    def rmul_gen(self, token):
        kind, i = token
        if kind == "x":
            return self._rmul_dot(i)
        if kind == "d":
            return self._rmul_cross(i)
        raise ValueError(token)

    def __mul__(self, other):
        if not isinstance(other, NHElement):
            return self.scale(other)
        if self.n != other.n:
            raise ValueError(f"rank mismatch: {self.n} vs {other.n}")
        acc = NHElement.zero(self.n, self.ring)
        for (w, a), c in other.terms.items():
            cur = self
            for j in perm.reduced_word(w):
                cur = cur._rmul_cross(j)
            out = {}
            for (ww, aa), cc in cur.terms.items():
                key = (ww, tuple(x + y for x, y in zip(aa, a)))
                cur._add_term(out, key, self.ring.mul(cc, c))
            acc = acc + NHElement(self.n, out, self.ring)
        return acc

    __rmul__ = __mul__

    # -- evaluation and equality ----------------------------------------------

    def act(self, f):
        """The polynomial action: dots multiply, crossings apply dd."""
        u = f.universe
        out = MultiPoly.zero(u)
        for (w, a), c in self.terms.items():
            g = f
            mono = [0] * u.nvars
            for i in range(self.n):
                mono[u.x_index(i + 1)] = a[i]
            g = MultiPoly.monomial(u, mono) * g
            g = dd_word(perm.reduced_word(w), g)
            out = out + g.scale(c)
        return out

    def degrees(self):
        return {2 * sum(a) - 2 * perm.length(w) for (w, a) in self.terms}

    def is_homogeneous(self):
        return len(self.degrees()) <= 1

    def __str__(self):
        if not self.terms:
            return "0"
        bits = []
        for (w, a) in sorted(self.terms):
            c = self.terms[(w, a)]
            word = perm.reduced_word(w)
            ws = "".join(f"d{j}" for j in word) or ""
            xs = "".join(f"x{i+1}^{e}" if e > 1 else f"x{i+1}" for i, e in enumerate(a) if e)
            body = (ws + xs) or "1"
            bits.append(f"{c}*{body}")
        return " + ".join(bits)

    __repr__ = __str__


def nh_word(n, tokens, ring=ZZ):
    """Normalize a word in the generators: tokens like ('x', i) or ('d', i)."""
    out = NHElement.one(n, ring)
    for t in tokens:
        out = out.rmul_gen(t)
    return out


def nh_equal(a, b, oracle=True):
    """Equality: normal forms agree; optionally cross-check on the Sq family."""
    same = (a - b).is_zero()
    if oracle:
        u = VarUniverse(a.n, (), a.ring)
        diff = a - b
        for ell in sq_enumerate(a.n):
            if not diff.act(xhat_monomial(u, ell)).is_zero():
                if same:
                    raise AssertionError("normal form and oracle disagree")
                return False
    return same


# -- thick calculus -----------------------------------------------------------


def psi_w(n, w, ring=ZZ):
    return NHElement(n, {(tuple(w), (0,) * n): ring.one()}, ring)


def thick_C(n, k, offset=0, ring=ZZ):
    """C_k on strands offset+1 .. offset+k: the rightmost strand crosses to
    the far left (word d_{o+1} d_{o+2} .. d_{o+k-1} read top to bottom)."""
    w = list(range(1, n + 1))
    # bottom position offset+k goes to top offset+1; others shift right
    for i in range(1, k):
        w[offset + i - 1] = offset + i + 1
    w[offset + k - 1] = offset + 1
    return psi_w(n, w, ring)


def thick_Cbar(n, k, offset=0, ring=ZZ):
    """Mirror rotation: leftmost strand crosses to the far right."""
    w = list(range(1, n + 1))
    for i in range(2, k + 1):
        w[offset + i - 1] = offset + i - 1
    w[offset] = offset + k
    return psi_w(n, w, ring)


def thick_D(n, k, offset=0, ring=ZZ):
    """D_k = psi of the longest element of the S_k block."""
    w = list(range(1, n + 1))
    for i in range(1, k + 1):
        w[offset + i - 1] = offset + (k + 1 - i)
    return psi_w(n, w, ring)


def thick_e(n, k, offset=0, ring=ZZ):
    """The idempotent e_k = x^{(k-1,..,1,0)} psi_{w_0}: dots on top, the
    leftmost strand of the block carrying k-1 of them."""
    d = thick_D(n, k, offset, ring)
    return NHElement.from_poly(n, _delta_monomial(n, k, offset, ring), ring) * d


def _delta_monomial(n, k, offset, ring):
    u = VarUniverse(n, (), ring)
    mono = [0] * u.nvars
    for i in range(1, k + 1):
        mono[u.x_index(offset + i)] = k - i
    return MultiPoly.monomial(u, mono)


def idempotent_product(n, thicknesses, ring=ZZ):
    """Horizontal product e_{k_1} (x) e_{k_2} (x) ... starting at strand 1."""
    out = NHElement.one(n, ring)
    ofs = 0
    for k in thicknesses:
        out = out * thick_e(n, k, ofs, ring)
        ofs += k
    return out


def _block_shuffle(n, a, b, offset=0):
    """Bottom blocks (b-block left, a-block right) -> top (a left, b right):
    the permutation sending offset+i -> offset+a+i for i<=b and
    offset+b+j -> offset+j for j<=a."""
    w = list(range(1, n + 1))
    for i in range(1, b + 1):
        w[offset + i - 1] = offset + a + i
    for j in range(1, a + 1):
        w[offset + b + j - 1] = offset + j
    return tuple(w)


def split(n, a, b, offset=0, ring=ZZ):
    """Thickness a+b -> (a, b): (e_a (x) e_b) psi_shuffle e_{a+b}."""
    sh = psi_w(n, _block_shuffle(n, a, b, offset), ring)
    top = NHElement.one(n, ring) * thick_e(n, a, offset, ring) * thick_e(n, b, offset + a, ring)
    return top * sh * thick_e(n, a + b, offset, ring)


def merge(n, b, a, offset=0, ring=ZZ):
    """(b, a) -> thickness a+b: e_{a+b} framed by the lower idempotents."""
    bot = thick_e(n, b, offset, ring) * thick_e(n, a, offset + b, ring)
    return thick_e(n, a + b, offset, ring) * bot


def primitive_decomposition(n, ring=ZZ):
    """The n! idempotents (-1)^{|hat(l)|} eps_l psi_{w_0} x^{hat(l)}."""
    u = VarUniverse(n, (), ring)
    w0 = perm.longest(n)
    out = []
    for ell in sq_enumerate(n):
        sgn = -1 if sum(hat(ell)) % 2 else 1
        p = (
            NHElement.from_poly(n, eps_monomial(u, ell), ring)
            * psi_w(n, w0, ring)
            * NHElement.from_poly(n, xhat_monomial(u, ell), ring)
        ).scale(sgn)
        out.append((ell, p))
    return out


def tau_nh(a):
    """The mirror symmetry x_i -> x_{n+1-i}, d_i -> -d_{n-i}."""
    n = a.n
    out = NHElement.zero(n, a.ring)
    for (w, ex), c in a.terms.items():
        word = perm.reduced_word(w)
        cur = NHElement.one(n, a.ring).scale(c)
        for j in word:
            cur = cur._rmul_cross(n - j).scale(-1)
        for i, e in enumerate(ex):
            for _ in range(e):
                cur = cur._rmul_dot(n - i)
        out = out + cur
    return out
