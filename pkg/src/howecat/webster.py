"""The redotted Webster algebra W(s, n).

Sequences interleave m red strands (labelled by the shape s, never permuting
among themselves) with n black strands.  We encode a sequence as a tuple of
ints: 0 for a black entry, j in 1..m for the j-th red strand; the strand's
thickness is shape[j-1].

Elements come in two layers:

* raw words: formal Z-linear combinations of generator words with a definite
  bottom sequence, multiplied by concatenation;
* basis form: coordinates on the spanning set of the basis theorem, keyed by
  (bottom seq, matching w, black dots, red dot monomials), where the matching
  is realized by its lexicographically least reduced word.

The faithful action on V = (+)_i R[X_1..X_n] is the primary computational
engine: equality of raw elements is tested by acting on the n! monomials
x^{hat(l)}, and basis coordinates are recovered by exact linear solves
against the basis elements' actions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from . import permutations as perm
from .polycore import (
    MultiPoly,
    VarUniverse,
    divided_difference,
    red_e,
    sq_enumerate,
    xhat_monomial,
)
from .scalars import ZZ

BLACK = 0


# -- shapes and sequences -----------------------------------------------------


def seq_enumerate(shape, n):
    """All interleavings of the reds 1..m (in order) with n blacks,
    ordered lexicographically with black < red."""
    m = len(shape)
    out = []
    for black_pos in itertools.combinations(range(m + n), n):
        seq = []
        j = 1
        for p in range(m + n):
            if p in black_pos:
                seq.append(BLACK)
            else:
                seq.append(j)
                j += 1
        out.append(tuple(seq))
    return sorted(out)


def seq_labels(shape, seq):
    """Label view of a sequence: 'b' for black, thickness for red."""
    return tuple("b" if e == BLACK else shape[e - 1] for e in seq)


def universe_for(shape, n, ring=ZZ):
    return VarUniverse(n, tuple(shape), ring)


def black_count_before(seq, p):
    """#_B(p): blacks among the first p-1 entries (1-based p)."""
    return sum(1 for e in seq[: p - 1] if e == BLACK)


def swap(seq, p):
    lst = list(seq)
    lst[p - 1], lst[p] = lst[p], lst[p - 1]
    return tuple(lst)


# -- raw words ----------------------------------------------------------------
#
# Tokens, read bottom to top:
#   ('x', p)      black dot on strand at position p
#   ('E', p, d)   red dot E(d) on the strand at position p
#   ('psi', p)    crossing of positions p, p+1
# A pure word is (bottom sequence, token tuple).


class CompositionError(ValueError):
    pass


def token_applies(shape, seq, tok):
    """Top sequence after tok, or None when the result is zero."""
    kind = tok[0]
    if kind == "x":
        return seq if seq[tok[1] - 1] == BLACK else None
    if kind == "E":
        p, d = tok[1], tok[2]
        if seq[p - 1] == BLACK:
            return None
        if d < 0 or d > shape[seq[p - 1] - 1]:
            return None
        return seq
    if kind == "psi":
        p = tok[1]
        if seq[p - 1] != BLACK and seq[p] != BLACK:
            return None
        return swap(seq, p)
    raise ValueError(tok)


def word_top(shape, bot, tokens):
    seq = bot
    for t in tokens:
        seq = token_applies(shape, seq, t)
        if seq is None:
            return None
    return seq


def token_degree(shape, seq, tok):
    kind = tok[0]
    if kind == "x":
        return 2
    if kind == "E":
        return 2 * tok[2]
    p = tok[1]
    a, b = seq[p - 1], seq[p]
    if a == BLACK and b == BLACK:
        return -2
    return shape[a - 1] if a != BLACK else shape[b - 1]


def word_degree(shape, bot, tokens):
    seq, deg = bot, 0
    for t in tokens:
        deg += token_degree(shape, seq, t)
        seq = token_applies(shape, seq, t)
        if seq is None:
            return None
    return deg


@dataclass
class WElement:
    """Z-linear combination of pure words over a fixed (shape, n)."""

    shape: tuple
    n: int
    terms: dict = field(default_factory=dict)  # (bot, tokens) -> coeff
    ring: object = ZZ

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(shape, n, ring=ZZ):
        return WElement(tuple(shape), n, {}, ring)

    @staticmethod
    def idem(shape, n, seq, ring=ZZ):
        return WElement(tuple(shape), n, {(tuple(seq), ()): ring.one()}, ring)

    @staticmethod
    def unit(shape, n, ring=ZZ):
        shape = tuple(shape)
        terms = {(seq, ()): ring.one() for seq in seq_enumerate(shape, n)}
        return WElement(shape, n, terms, ring)

    @staticmethod
    def word(shape, n, bot, tokens, coeff=1, ring=ZZ):
        shape = tuple(shape)
        if word_top(shape, tuple(bot), tuple(tokens)) is None:
            return WElement.zero(shape, n, ring)
        return WElement(shape, n, {(tuple(bot), tuple(tokens)): ring.coerce(coeff)}, ring)

    def _check(self, other):
        if (self.shape, self.n) != (other.shape, other.n):
            raise CompositionError(
                f"algebra mismatch: {(self.shape, self.n)} vs {(other.shape, other.n)}"
            )

    # -- linear structure -----------------------------------------------------

    def _add_term(self, out, key, c):
        s = self.ring.add(out.get(key, self.ring.coerce(0)), c)
        if self.ring.is_zero(s):
            out.pop(key, None)
        else:
            out[key] = s

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            self._add_term(out, k, c)
        return WElement(self.shape, self.n, out, self.ring)

    def __neg__(self):
        return WElement(
            self.shape, self.n, {k: self.ring.neg(c) for k, c in self.terms.items()}, self.ring
        )

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = self.ring.coerce(c)
        if self.ring.is_zero(c):
            return WElement.zero(self.shape, self.n, self.ring)
        return WElement(
            self.shape, self.n, {k: self.ring.mul(cc, c) for k, cc in self.terms.items()}, self.ring
        )

    def is_raw_zero(self):
        return not self.terms

    # -- multiplication: vertical concatenation -------------------------------

    def __mul__(self, other):
        """self stacked on top of other (other acts first)."""
        if not isinstance(other, WElement):
            return self.scale(other)
        self._check(other)
        out = {}
        for (bot2, toks2), c2 in other.terms.items():
            top2 = word_top(self.shape, bot2, toks2)
            if top2 is None:
                continue
            for (bot1, toks1), c1 in self.terms.items():
                if bot1 != top2:
                    continue
                self._add_term(out, (bot2, toks2 + toks1), self.ring.mul(c1, c2))
        return WElement(self.shape, self.n, out, self.ring)

    __rmul__ = __mul__

    # -- the faithful action ---------------------------------------------------

    def universe(self):
        return universe_for(self.shape, self.n, self.ring)

    def act(self, seq, f):
        """Apply to f placed in V_seq; returns dict target-seq -> MultiPoly."""
        u = self.universe()
        out = {}
        for (bot, toks), c in self.terms.items():
            if bot != tuple(seq):
                continue
            cur_seq, cur = bot, f
            dead = False
            for t in toks:
                cur_seq, cur = _act_token(self.shape, u, cur_seq, cur, t)
                if cur_seq is None or cur.is_zero():
                    dead = cur_seq is None
                    break
            if dead or cur.is_zero():
                continue
            prev = out.get(cur_seq)
            out[cur_seq] = cur.scale(c) if prev is None else prev + cur.scale(c)
        return {k: v for k, v in out.items() if not v.is_zero()}

    def act_vec(self, vec):
        """Apply to a module vector: dict seq -> MultiPoly."""
        out = {}
        for seq, f in vec.items():
            for tseq, g in self.act(seq, f).items():
                out[tseq] = out.get(tseq, MultiPoly.zero(g.universe)) + g
        return {k: v for k, v in out.items() if not v.is_zero()}

    # -- presentation ----------------------------------------------------------

    def degrees(self):
        out = set()
        for (bot, toks) in self.terms:
            d = word_degree(self.shape, bot, toks)
            if d is not None:
                out.add(d)
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        bits = []
        for (bot, toks) in sorted(self.terms):
            c = self.terms[(bot, toks)]
            word = "*".join(
                f"{t[0]}{t[1]}" if t[0] != "E" else f"E({t[2]})_{t[1]}" for t in toks
            )
            lbl = ",".join(str(x) for x in seq_labels(self.shape, bot))
            body = (word + "*" if word else "") + f"e({lbl})"
            bits.append(f"{c}*{body}")
        return " + ".join(bits)

    __repr__ = __str__


def _act_token(shape, u, seq, f, tok):
    kind = tok[0]
    if kind == "x":
        p = tok[1]
        if seq[p - 1] != BLACK:
            return None, f
        return seq, MultiPoly.x(u, black_count_before(seq, p) + 1) * f
    if kind == "E":
        p, d = tok[1], tok[2]
        j = seq[p - 1]
        if j == BLACK:
            return None, f
        return seq, red_e(u, j, d) * f
    p = tok[1]
    a, b = seq[p - 1], seq[p]
    if a == BLACK and b == BLACK:
        return seq, divided_difference(black_count_before(seq, p) + 1, f)
    if a != BLACK and b != BLACK:
        return None, f
    if a != BLACK:  # red over black: transport
        return swap(seq, p), f
    # black over red: multiply by sum (-1)^beta X^alpha E_beta, transport
    j = b
    label = shape[j - 1]
    xs = black_count_before(seq, p) + 1
    acc = MultiPoly.zero(u)
    for beta in range(label + 1):
        alpha = label - beta
        term = MultiPoly.x(u, xs, alpha) if alpha else MultiPoly.one(u)
        term = term * red_e(u, j, beta)
        acc = acc + (term if beta % 2 == 0 else -term)
    return swap(seq, p), acc * f


# -- equality oracle -----------------------------------------------------------


def oracle_family(shape, n, ring=ZZ):
    u = universe_for(shape, n, ring)
    return [xhat_monomial(u, ell) for ell in sq_enumerate(n)]


def w_is_zero(a):
    """True iff a acts as zero on every component (faithfulness)."""
    fam = oracle_family(a.shape, a.n, a.ring)
    bots = {bot for (bot, _t) in a.terms}
    for bot in bots:
        for f in fam:
            if a.act(bot, f):
                return False
    return True


def w_equal(a, b):
    a._check(b)
    return w_is_zero(a - b)


# -- the basis -----------------------------------------------------------------


def color_matchings(bot, top):
    """All color-preserving bijections bottom->top as permutations w
    (w(p) = top position of the strand starting at bottom p); reds stay in
    order, blacks permute arbitrarily."""
    if sorted(bot) != sorted(top):
        return []
    M = len(bot)
    red_bot = [p for p in range(1, M + 1) if bot[p - 1] != BLACK]
    red_top = [p for p in range(1, M + 1) if top[p - 1] != BLACK]
    black_bot = [p for p in range(1, M + 1) if bot[p - 1] == BLACK]
    black_top = [p for p in range(1, M + 1) if top[p - 1] == BLACK]
    for pb, pt in zip(red_bot, red_top):
        if bot[pb - 1] != top[pt - 1]:
            return []
    out = []
    for assign in itertools.permutations(black_top):
        w = [0] * M
        for pb, pt in zip(red_bot, red_top):
            w[pb - 1] = pt
        for pb, pt in zip(black_bot, assign):
            w[pb - 1] = pt
        out.append(tuple(w))
    return out


def matching_word(w):
    """Canonical (lex-least) reduced word realizing the matching."""
    return perm.reduced_word(w)


def matching_tokens(w):
    return tuple(("psi", j) for j in reversed(matching_word(w)))


def matching_degree(shape, bot, w):
    d = word_degree(shape, bot, matching_tokens(w))
    if d is None:
        raise AssertionError("matching word must compose")
    return d


@lru_cache(maxsize=None)
def _red_monomials(label, maxdeg):
    """Exponent tuples (e_1..e_label) with sum 2*d*e_d <= maxdeg."""
    out = [()]
    for d in range(1, label + 1):
        new = []
        for t in out:
            used = sum(2 * (i + 1) * e for i, e in enumerate(t))
            k = 0
            while used + 2 * d * k <= maxdeg:
                new.append(t + (k,))
                k += 1
        out = new
    return tuple(out)


def basis_keys(shape, n, bot, top, max_degree):
    """Basis keys (bot, w, xexp, eexp) of degree <= max_degree.

    xexp: exponents per bottom position (zero on reds);
    eexp: per red strand j (in order), exponents of E(1..s_j).
    """
    shape = tuple(shape)
    keys = []
    for w in color_matchings(bot, top):
        base = matching_degree(shape, bot, w)
        if base > max_degree:
            continue
        budget = max_degree - base
        black_pos = [p for p in range(len(bot)) if bot[p] == BLACK]
        reds = [bot[p] for p in range(len(bot)) if bot[p] != BLACK]
        for xcombo in _bounded_tuples(len(black_pos), budget // 2):
            xdeg = 2 * sum(xcombo)
            if xdeg > budget:
                continue
            xexp = [0] * len(bot)
            for p, e in zip(black_pos, xcombo):
                xexp[p] = e
            for ecombo in _red_monomial_product(shape, reds, budget - xdeg):
                keys.append((tuple(bot), w, tuple(xexp), ecombo))
    return keys


def _bounded_tuples(k, total):
    if k == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _bounded_tuples(k - 1, total - first):
            yield (first,) + rest


def _red_monomial_product(shape, reds, budget):
    if not reds:
        yield ()
        return
    j = reds[0]
    for mono in _red_monomials(shape[j - 1], budget):
        used = sum(2 * (d + 1) * e for d, e in enumerate(mono))
        for rest in _red_monomial_product(shape, reds[1:], budget - used):
            yield (mono,) + rest


def key_degree(shape, key):
    bot, w, xexp, eexp = key
    d = matching_degree(shape, bot, w) + 2 * sum(xexp)
    for mono in eexp:
        d += sum(2 * (i + 1) * e for i, e in enumerate(mono))
    return d


def key_element(shape, n, key, ring=ZZ):
    """The basis key as a raw word: dots at the bottom, canonical matching."""
    bot, w, xexp, eexp = key
    toks = []
    ri = 0
    for p in range(1, len(bot) + 1):
        if bot[p - 1] == BLACK:
            toks.extend([("x", p)] * xexp[p - 1])
        else:
            mono = eexp[ri]
            ri += 1
            for d, e in enumerate(mono, start=1):
                toks.extend([("E", p, d)] * e)
    toks.extend(matching_tokens(w))
    return WElement.word(shape, n, bot, toks, 1, ring)


# -- basis coordinates by exact linear solve ------------------------------------


class _Echelon:
    """Reduced row echelon over Q with reusable solves."""

    def __init__(self, columns, nrows):
        self.nrows = nrows
        self.rows = []  # list of (pivot_index, row_vector, combo)
        self.ncols = len(columns)
        for ci, col in enumerate(columns):
            self._insert(col, ci)

    def _insert(self, col, ci):
        vec = [Fraction(x) for x in col]
        combo = [Fraction(0)] * self.ncols
        combo[ci] = Fraction(1)
        for piv, row, rcombo in self.rows:
            if vec[piv]:
                f = vec[piv] / row[piv]
                for i in range(self.nrows):
                    vec[i] -= f * row[i]
                for i in range(self.ncols):
                    combo[i] -= f * rcombo[i]
        for i, x in enumerate(vec):
            if x:
                self.rows.append((i, vec, combo))
                return True
        return False

    @property
    def rank(self):
        return len(self.rows)

    def solve(self, target):
        """Coefficients c with sum c_i col_i = target, or None."""
        vec = [Fraction(x) for x in target]
        coeffs = [Fraction(0)] * self.ncols
        for piv, row, rcombo in self.rows:
            if vec[piv]:
                f = vec[piv] / row[piv]
                for i in range(self.nrows):
                    vec[i] -= f * row[i]
                for i in range(self.ncols):
                    coeffs[i] += f * rcombo[i]
        if any(vec):
            return None
        return coeffs


_solver_cache = {}


def _action_vector(shape, n, elem, bots, rows, ring):
    """Evaluate elem on the oracle family; rows maps (li, seq, mono) -> slot."""
    fam = oracle_family(shape, n, ring)
    vec = [0] * len(rows)
    for bot in bots:
        for li, f in enumerate(fam):
            for tseq, g in elem.act(bot, f).items():
                for mono, c in g.terms.items():
                    slot = rows.get((bot, li, tseq, mono))
                    if slot is None:
                        return None  # row set too small; caller enlarges
                    vec[slot] += c
    return vec


def basis_solver(shape, n, bot, top, degree, ring=ZZ):
    """Cached echelonized action matrix for one (bot, top, degree) block."""
    key = (tuple(shape), n, tuple(bot), tuple(top), degree, ring.name)
    if key in _solver_cache:
        return _solver_cache[key]
    keys = [
        k
        for k in basis_keys(shape, n, bot, top, degree)
        if key_degree(shape, k) == degree
    ]
    fam = oracle_family(shape, n, ring)
    # collect the full row index set from the basis actions
    rows = {}
    cols_raw = []
    for k in keys:
        elem = key_element(shape, n, k, ring)
        images = []
        for li, f in enumerate(fam):
            for tseq, g in elem.act(bot, f).items():
                for mono, c in g.terms.items():
                    rid = (tuple(bot), li, tseq, mono)
                    if rid not in rows:
                        rows[rid] = len(rows)
                    images.append((rid, c))
        cols_raw.append(images)
    cols = []
    for images in cols_raw:
        v = [0] * len(rows)
        for rid, c in images:
            v[rows[rid]] += c
        cols.append(v)
    ech = _Echelon(cols, len(rows))
    result = (keys, rows, ech)
    _solver_cache[key] = result
    return result


class BasisError(ValueError):
    pass


def w_normalize(a):
    """Basis coordinates of a raw element: dict basis-key -> coeff.

    Splits the element into (bot, top, degree) blocks and solves each block
    against the basis action matrix; raises BasisError if the element falls
    outside the basis span (which would contradict the basis theorem).
    """
    shape, n, ring = a.shape, a.n, a.ring
    fam = oracle_family(shape, n, ring)
    blocks = {}
    for (bot, toks), c in a.terms.items():
        top = word_top(shape, bot, toks)
        if top is None:
            continue
        deg = word_degree(shape, bot, toks)
        piece = WElement(shape, n, {(bot, toks): c}, ring)
        blk = blocks.get((bot, top, deg))
        blocks[(bot, top, deg)] = piece if blk is None else blk + piece
    out = {}
    for (bot, top, deg), piece in blocks.items():
        keys, rows, ech = basis_solver(shape, n, bot, top, deg, ring)
        # target vector
        vec = [0] * len(rows)
        ok = True
        for li, f in enumerate(fam):
            for tseq, g in piece.act(bot, f).items():
                for mono, c in g.terms.items():
                    rid = (bot, li, tseq, mono)
                    if rid not in rows:
                        ok = False
                        break
                    vec[rows[rid]] += c
            if not ok:
                break
        if not ok:
            raise BasisError("element acts outside the basis span")
        sol = ech.solve(vec)
        if sol is None:
            raise BasisError("element is not in the span of the basis")
        for k, c in zip(keys, sol):
            if c:
                if ring.name == "Z":
                    if c.denominator != 1:
                        raise BasisError("non-integral basis coordinate over Z")
                    c = int(c)
                prev = out.get(k, ring.coerce(0))
                s = ring.add(prev, ring.coerce(c))
                if ring.is_zero(s):
                    out.pop(k, None)
                else:
                    out[k] = s
    return out


# -- symmetries and projections -------------------------------------------------


def tau(a):
    """Mirror left-right onto W(reverse(s), n); black-black crossings flip sign."""
    shape2 = tuple(reversed(a.shape))
    M = len(a.shape) + a.n
    out = WElement.zero(shape2, a.n, a.ring)
    m = len(a.shape)
    for (bot, toks), c in a.terms.items():
        new_bot = tuple(
            BLACK if e == BLACK else (m + 1 - e) for e in reversed(bot)
        )
        seq = bot
        new_toks = []
        sign = 1
        for t in toks:
            if t[0] == "x":
                new_toks.append(("x", M + 1 - t[1]))
            elif t[0] == "E":
                new_toks.append(("E", M + 1 - t[1], t[2]))
            else:
                p = t[1]
                if seq[p - 1] == BLACK and seq[p] == BLACK:
                    sign = -sign
                new_toks.append(("psi", M - p))
            seq = token_applies(a.shape, seq, t)
        out = out + WElement.word(shape2, a.n, new_bot, new_toks, a.ring.mul(c, sign), a.ring)
    return out


def phi_shape(shape, j, asplit):
    if not 0 <= asplit <= shape[j - 1]:
        raise ValueError(f"phi split {asplit} out of range for column {j}")
    return shape[: j - 1] + (shape[j - 1] - asplit, asplit) + shape[j:]


def phi_seq(seq, j):
    """Refine a sequence: red j becomes the pair (j, j+1); later reds shift."""
    out = []
    for e in seq:
        if e == BLACK:
            out.append(BLACK)
        elif e < j:
            out.append(e)
        elif e == j:
            out.extend([j, j + 1])
        else:
            out.append(e + 1)
    return tuple(out)


def phi_include(a, j, asplit):
    """The inclusion into W(phi_{j,a}(s), n), per the generator case table."""
    shape2 = phi_shape(a.shape, j, asplit)
    out = WElement.zero(shape2, a.n, a.ring)
    for (bot, toks), c in a.terms.items():
        pieces = [(c, phi_seq(bot, j), ())]
        seq = bot
        for t in toks:
            lp = seq.index(j) + 1  # position of red j in the current sequence
            new_pieces = []
            if t[0] == "x":
                p = t[1]
                np = p if p < lp else p + 1
                for cc, nb, nt in pieces:
                    new_pieces.append((cc, nb, nt + (("x", np),)))
            elif t[0] == "E":
                p, d = t[1], t[2]
                if p < lp:
                    for cc, nb, nt in pieces:
                        new_pieces.append((cc, nb, nt + (("E", p, d),)))
                elif p > lp:
                    for cc, nb, nt in pieces:
                        new_pieces.append((cc, nb, nt + (("E", p + 1, d),)))
                else:
                    for cc, nb, nt in pieces:
                        for d1 in range(d + 1):
                            d2 = d - d1
                            toks2 = nt
                            if d1:
                                toks2 = toks2 + (("E", lp, d1),)
                            if d2:
                                toks2 = toks2 + (("E", lp + 1, d2),)
                            new_pieces.append((cc, nb, toks2))
            else:
                p = t[1]
                if p < lp - 1:
                    add = (("psi", p),)
                elif p == lp - 1:
                    add = (("psi", p), ("psi", p + 1))
                elif p == lp:
                    add = (("psi", p + 1), ("psi", p))
                else:
                    add = (("psi", p + 1),)
                for cc, nb, nt in pieces:
                    new_pieces.append((cc, nb, nt + add))
            pieces = new_pieces
            seq = token_applies(a.shape, seq, t)
        for cc, nb, nt in pieces:
            out = out + WElement.word(shape2, a.n, nb, nt, cc, a.ring)
    return out


def cyclo_project(a):
    """Kill basis keys whose bottom or top sequence starts with a black."""
    coords = w_normalize(a)
    out = WElement.zero(a.shape, a.n, a.ring)
    for key, c in coords.items():
        bot, w, _x, _e = key
        top = _key_top(bot, w)
        if bot[0] == BLACK or top[0] == BLACK:
            continue
        out = out + key_element(a.shape, a.n, key, a.ring).scale(c)
    return out


def webster_project(a):
    """Quotient by the ideal generated by all E(d), d >= 1: drop red dots."""
    coords = w_normalize(a)
    out = WElement.zero(a.shape, a.n, a.ring)
    for key, c in coords.items():
        _bot, _w, _x, eexp = key
        if any(any(mono) for mono in eexp):
            continue
        out = out + key_element(a.shape, a.n, key, a.ring).scale(c)
    return out


def _key_top(bot, w):
    top = [None] * len(bot)
    for p, e in enumerate(bot, start=1):
        top[w[p - 1] - 1] = e
    return tuple(top)


def w_basis(shape, n, top, bot, max_degree, ring=ZZ):
    """All basis elements between the given boundaries up to max_degree."""
    return [
        (k, key_element(shape, n, k, ring))
        for k in basis_keys(shape, n, tuple(bot), tuple(top), max_degree)
    ]
