"""Ladder bimodules over the Webster algebras and their morphisms.

A ladder word is a sequence of steps read bottom to top:

* ``E_i^(a)`` moves thickness ``a`` from coarse column i+1 to column i,
* ``F_i^(a)`` moves thickness ``a`` from coarse column i to column i+1,
* ``V_j^(d)`` splits coarse column j as (label-d, d) and re-merges it
  (the splitter-bigon used by the derivation/creation maps).

Each word gets a concrete model: the Webster algebra W(T, n) of a refined
shape T with one column per step strand; a step reuses a thin column when it
picks up exactly the strand a previous step parked (this is how the ladder
pictures share step strands).  Composite tensor products over intermediate
algebras are realized by multiplication inside W(T).  This concatenation
model is a recorded working assumption: every identity verified through this
module is an identity between images in the model.

Elements are kept framed: sums of  l * generator * r  with l, r in the
coarse top/bottom algebras and the generator one of the canonical ladder
diagrams (a chain of black distributions per stage, plus E(1)-dot exponents
on the step columns).  Morphisms are tables on generators; applying one to a
generator outside its table triggers an exact linear re-framing solve
against the table-friendly spanning family.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from . import permutations as perm
from .polycore import MultiPoly, complete_in_red
from .scalars import ZZ
from .webster import (
    BLACK,
    WElement,
    _Echelon,
    basis_keys,
    key_degree,
    key_element,
    oracle_family,
    phi_include,
    token_applies,
    w_equal,
    w_is_zero,
    word_degree,
    word_top,
)


class LadderError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    kind: str  # 'E', 'F', 'V'
    i: int
    a: int = 1


def _mk_steps(steps):
    return tuple(s if isinstance(s, Step) else Step(*s) for s in steps)


def alpha_shape(shape, step):
    s = list(shape)
    if step.kind == "E":
        s[step.i - 1] += step.a
        s[step.i] -= step.a
    elif step.kind == "F":
        s[step.i - 1] -= step.a
        s[step.i] += step.a
    elif step.kind not in ("V", "U"):
        raise LadderError(step.kind)
    if any(x < 0 for x in s):
        raise LadderError(f"step {step} leaves a negative column on {shape}")
    return tuple(s)


def step_shift(shape, step):
    if step.kind == "E":
        return -shape[step.i - 1] * step.a
    if step.kind == "F":
        return -shape[step.i] * step.a
    return -(shape[step.i - 1] - step.a) * step.a


class LadderSpace:
    """Refined model of a ladder word; columns carry persistent ids."""

    def __init__(self, shape, steps, n, ring=ZZ):
        self.bottom_shape = tuple(shape)
        self.steps = _mk_steps(steps)
        self.n = n
        self.ring = ring
        m = len(self.bottom_shape)
        self.labels = {c: self.bottom_shape[c] for c in range(m)}
        self.order = list(range(m))  # left-to-right column ids
        self.donor = {}
        self.created_at = {c: 0 for c in range(m)}
        self.step_col = []
        self.shift = 0
        groups = [[c] for c in range(m)]
        self.stage_groups = [[list(g) for g in groups]]
        self.stage_shapes = [self.bottom_shape]
        cur = self.bottom_shape
        for st in self.steps:
            nxt = alpha_shape(cur, st)
            self.shift += step_shift(cur, st)
            if st.kind == "E":
                src, dst, take_left = st.i, st.i - 1, True
            elif st.kind == "F":
                src, dst, take_left = st.i - 1, st.i, False
            elif st.kind == "U":
                src, dst, take_left = st.i - 1, st.i - 1, True
            else:
                src, dst, take_left = st.i - 1, st.i - 1, False
            grp = groups[src]
            c = grp[0] if take_left else grp[-1]
            label = self.labels[c]
            if label == st.a and c >= m:
                col = c  # pick up the parked strand
            elif label >= st.a:
                col = len(self.labels)
                self.labels[c] = label - st.a
                self.labels[col] = st.a
                self.donor[col] = c
                self.created_at[col] = len(self.step_col)
                at = self.order.index(c)
                self.order.insert(at if take_left else at + 1, col)
                self._retro_insert(groups, c, col, take_left)
            else:
                raise LadderError(
                    f"unsupported refinement: {st} needs {st.a} from label {label}"
                )
            self.step_col.append(col)
            if st.kind not in ("V", "U"):
                groups[src].remove(col)
                if take_left:
                    groups[dst].append(col)
                else:
                    groups[dst].insert(0, col)
            cur = nxt
            self.stage_shapes.append(cur)
            self.stage_groups.append([list(g) for g in groups])

    def _retro_insert(self, groups, src_col, new_col, take_left):
        for snapshot in self.stage_groups:
            for g in snapshot:
                if src_col in g:
                    at = g.index(src_col)
                    g.insert(at if take_left else at + 1, new_col)
        for g in groups:
            if src_col in g:
                at = g.index(src_col)
                g.insert(at if take_left else at + 1, new_col)

    # -- derived data ---------------------------------------------------------

    @property
    def nstages(self):
        return len(self.steps) + 1

    @property
    def top_shape(self):
        return self.stage_shapes[-1]

    @property
    def model_shape(self):
        return tuple(self.labels[c] for c in self.order)

    def col_red_index(self, col):
        """The 1-based red index of a column inside the model shape."""
        return self.order.index(col) + 1

    def created_cols(self):
        return [c for c in sorted(self.labels) if c >= len(self.bottom_shape)]

    def col_uses(self, col):
        return [q for q, c in enumerate(self.step_col) if c == col]

    @property
    def nfactors(self):
        return max(len(self.steps), 1)

    def col_intervals(self, col):
        """One dot slot per tensor factor the column lives in."""
        return self.nfactors - min(self.created_at[col], self.nfactors - 1)

    def col_factor_slot(self, col, q):
        """Slot index of factor q for this column (q = letter index)."""
        base = min(self.created_at[col], self.nfactors - 1)
        if q < base:
            return None
        return q - base

    def slot_strict(self, col, q):
        """Whether dots on this column in factor q are simple tensor data:
        the column is the factor's own strand or donor remainder, or it is a
        full coarse column on both cuts of the factor."""
        if not self.steps:
            return True
        if q >= len(self.steps):
            return False
        if self.step_col[q] == col:
            return True
        if self.donor.get(self.step_col[q]) == col and self.created_at[
            self.step_col[q]
        ] == q:
            return True
        return all(
            len(g) == 1
            for st in (q, q + 1)
            for g in self.stage_groups[st]
            if col in g
        )

    def key(self):
        return (self.bottom_shape, self.steps, self.n, self.ring.name)

    def stage_seq(self, q, dist):
        """Model sequence at stage q with dist blacks per gap (len groups+1)."""
        groups = self.stage_groups[q]
        if len(dist) != len(groups) + 1:
            raise LadderError("distribution length mismatch")
        seq = []
        for g, cnt in zip(groups, dist[:-1]):
            seq.extend([BLACK] * cnt)
            seq.extend(self.col_red_index(c) for c in g)
        seq.extend([BLACK] * dist[-1])
        return tuple(seq)

    def coarse_seq(self, q, dist):
        """Coarse sequence at stage q (reds numbered 1..m in coarse order)."""
        groups = self.stage_groups[q]
        seq = []
        for gi, cnt in enumerate(dist[:-1]):
            seq.extend([BLACK] * cnt)
            seq.append(gi + 1)
        seq.extend([BLACK] * dist[-1])
        return tuple(seq)

    def distributions(self):
        """All black distributions for one stage."""
        g = len(self.stage_groups[0])
        return list(_compositions(self.n, g + 1))

    def dist_of_model_seq(self, q, seq):
        """Recover the gap distribution of a model sequence at stage q, or
        None if some black sits strictly inside a group."""
        groups = self.stage_groups[q]
        flat = []  # (group index, red index) left to right
        for gi, g in enumerate(groups):
            for c in g:
                flat.append((gi, self.col_red_index(c)))
        dist = [0] * (len(groups) + 1)
        ptr = 0
        pending = 0
        for e in seq:
            if e == BLACK:
                pending += 1
                continue
            if ptr >= len(flat) or flat[ptr][1] != e:
                return None
            gi = flat[ptr][0]
            first_of_group = ptr == 0 or flat[ptr - 1][0] != gi
            if pending:
                if not first_of_group:
                    return None
                dist[gi] += pending
                pending = 0
            ptr += 1
        dist[len(groups)] += pending
        if ptr != len(flat):
            return None
        return tuple(dist)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# -- generators and their model realizations -----------------------------------


def genkey_valid(sp, genkey):
    dists, dots = genkey
    if len(dists) != sp.nstages:
        return False
    if len(dots) != len(sp.labels):
        return False
    for q, d in enumerate(dists):
        if len(d) != len(sp.stage_groups[q]) + 1 or sum(d) != sp.n:
            return False
    for c, slots in zip(sorted(sp.labels), dots):
        if len(slots) != sp.col_intervals(c):
            return False
        for mono in slots:
            if len(mono) != sp.labels[c]:
                return False
    return True


def genkey_strict(sp, genkey):
    dists, dots = genkey
    for c, slots in zip(sorted(sp.labels), dots):
        base = min(sp.created_at[c], sp.nfactors - 1)
        for t, mono in enumerate(slots):
            if any(mono) and not sp.slot_strict(c, base + t):
                return False
    return True


def genkey_dot_degree(sp, dots):
    return sum(
        2 * (i + 1) * e
        for slots in dots
        for mono in slots
        for i, e in enumerate(mono)
    )


def zero_dots(sp):
    return tuple(
        ((0,) * sp.labels[c],) * sp.col_intervals(c) for c in sorted(sp.labels)
    )


def _resequence_tokens(seq_from, seq_to):
    """Minimal crossing word moving seq_from to seq_to (reds in the same
    relative order, blacks order preserving)."""
    if seq_from == seq_to:
        return ()
    M = len(seq_from)
    to_black_pos = [p for p in range(1, M + 1) if seq_to[p - 1] == BLACK]
    w = [0] * M
    bi = 0
    for p in range(1, M + 1):
        e = seq_from[p - 1]
        if e == BLACK:
            w[p - 1] = to_black_pos[bi]
            bi += 1
        else:
            w[p - 1] = seq_to.index(e) + 1
    word = perm.reduced_word(tuple(w))
    return tuple(("psi", j) for j in reversed(word))


def genkey_model(sp, genkey):
    """The generator as a WElement of the model algebra W(T, n)."""
    dists, dots = genkey
    cols = sorted(sp.labels)
    bot = sp.stage_seq(0, dists[0])
    tokens = []

    def emit_factor(q, seq):
        out = []
        for c in cols:
            slot = sp.col_factor_slot(c, q)
            if slot is None:
                continue
            mono = dots[cols.index(c)][slot]
            if any(mono):
                p = seq.index(sp.col_red_index(c)) + 1
                for d, e in enumerate(mono, start=1):
                    out.extend([("E", p, d)] * e)
        return out

    cur = bot
    if not sp.steps:
        tokens.extend(emit_factor(0, cur))
    for q, st in enumerate(sp.steps, start=1):
        tokens.extend(emit_factor(q - 1, cur))
        col = sp.step_col[q - 1]
        if st.kind not in ("V", "U"):
            red = sp.col_red_index(col)
            p_from = cur.index(red) + 1
            target_flat = [
                sp.col_red_index(c) for g in sp.stage_groups[q] for c in g
            ]
            at = target_flat.index(red)
            lst = [e for e in cur if e != red]
            if at == 0:
                p_to = 1
            else:
                anchor = target_flat[at - 1]
                p_to = lst.index(anchor) + 2
            if p_to <= p_from:
                path = range(p_from - 1, p_to - 1, -1)
            else:
                path = range(p_from, p_to)
            for p in path:
                tokens.append(("psi", p))
            lst.insert(p_to - 1, red)
            cur = tuple(lst)
        tgt = sp.stage_seq(q, dists[q])
        tokens.extend(_resequence_tokens(cur, tgt))
        cur = tgt
    return WElement.word(sp.model_shape, sp.n, bot, tokens, 1, sp.ring)


def genkey_bottom_seq(sp, genkey):
    return sp.stage_seq(0, genkey[0][0])


def genkey_top_seq(sp, genkey):
    return sp.stage_seq(sp.nstages - 1, genkey[0][-1])


def genkey_degree(sp, genkey):
    el = genkey_model(sp, genkey)
    if el.is_raw_zero():
        return None
    ((bot, toks),) = list(el.terms)
    return word_degree(sp.model_shape, bot, toks)


def enumerate_genkeys(sp, dot_degree_bound, static_only=False):
    """Generator keys with total dot degree <= the bound; dots restricted
    to the tensor-simple slots."""
    out = []
    cols = sorted(sp.labels)
    dist_choices = []
    for q in range(sp.nstages):
        g = len(sp.stage_groups[q])
        dist_choices.append(list(_compositions(sp.n, g + 1)))
    if static_only:
        chains = [tuple([d] * sp.nstages) for d in dist_choices[0]]
    else:
        chains = list(itertools.product(*dist_choices))
    dot_choices = _dot_monomials(sp, cols, dot_degree_bound)
    for chain in chains:
        for dots in dot_choices:
            out.append((tuple(chain), dots))
    return out


def _dot_monomials(sp, cols, bound):
    outs = [()]
    for c in cols:
        label = sp.labels[c]
        nslots = sp.col_intervals(c)
        base = min(sp.created_at[c], sp.nfactors - 1)
        strict = [sp.slot_strict(c, base + t) for t in range(nslots)]
        new = []
        for prefix in outs:
            used = genkey_dot_degree(sp, prefix)
            for slots in _slot_monos(label, nslots, bound - used, strict):
                new.append(prefix + (slots,))
        outs = new
    return outs


def _slot_monos(label, nslots, budget, strict):
    if nslots == 0:
        yield ()
        return
    if not strict[0]:
        for rest in _slot_monos(label, nslots - 1, budget, strict[1:]):
            yield ((0,) * label,) + rest
        return
    for mono in _monos_for_label(label, budget):
        used = sum(2 * (i + 1) * e for i, e in enumerate(mono))
        for rest in _slot_monos(label, nslots - 1, budget - used, strict[1:]):
            yield (mono,) + rest


@lru_cache(maxsize=None)
def _monos_for_label(label, budget):
    if budget < 0:
        return ()
    out = [()]
    for d in range(1, label + 1):
        new = []
        for t in out:
            used = sum(2 * (i + 1) * e for i, e in enumerate(t))
            k = 0
            while used + 2 * d * k <= budget:
                new.append(t + (k,))
                k += 1
        out = new
    return tuple(out)


# -- embeddings of the coarse boundary algebras ---------------------------------


def _phi_through_groups(a, groups_labels):
    """Iterated column splits sending a coarse element into the refined
    algebra whose columns realize each coarse column as the given labels."""
    cur = a
    pos = 1
    for labels in groups_labels:
        for t in range(len(labels) - 1):
            rest = sum(labels[t + 1 :])
            cur = phi_include(cur, pos, rest)
            pos += 1
        pos += 1
    return cur


def phi_bottom(sp, a):
    groups_labels = [
        tuple(sp.labels[c] for c in g) for g in sp.stage_groups[0]
    ]
    return _phi_through_groups(a, groups_labels)


def phi_top(sp, a):
    groups_labels = [
        tuple(sp.labels[c] for c in g) for g in sp.stage_groups[-1]
    ]
    return _phi_through_groups(a, groups_labels)


# -- framed elements -------------------------------------------------------------


class Framed:
    """Sum of  l * generator * r  over a ladder space."""

    def __init__(self, space, terms=None):
        self.space = space
        self.terms = list(terms or [])

    @staticmethod
    def zero(space):
        return Framed(space, [])

    @staticmethod
    def generator(space, genkey, coeff=1):
        l = WElement.idem(space.top_shape, space.n, space.coarse_seq(space.nstages - 1, genkey[0][-1]), space.ring)
        r = WElement.idem(space.bottom_shape, space.n, space.coarse_seq(0, genkey[0][0]), space.ring)
        return Framed(space, [(coeff, l, genkey, r)])

    def __add__(self, other):
        return Framed(self.space, self.terms + other.terms)

    def scale(self, c):
        return Framed(self.space, [(cc * c, l, g, r) for (cc, l, g, r) in self.terms])

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def act_left(self, a):
        return Framed(self.space, [(c, a * l, g, r) for (c, l, g, r) in self.terms])

    def act_right(self, b):
        return Framed(self.space, [(c, l, g, r * b) for (c, l, g, r) in self.terms])

    def model(self):
        sp = self.space
        out = WElement.zero(sp.model_shape, sp.n, sp.ring)
        for (c, l, g, r) in self.terms:
            piece = phi_top(sp, l) * genkey_model(sp, g) * phi_bottom(sp, r)
            out = out + piece.scale(c)
        return out

    def is_zero(self):
        return w_is_zero(self.model())


def framed_equal(x, y):
    if x.space.key() != y.space.key():
        return False
    return w_is_zero((x - y).model())


# -- exact re-framing solve -------------------------------------------------------


_reframe_cache = {}


def reframe(sp, elem, dot_bound, static_only=False, allow=None):
    """Express a model element as a framed combination; exact solve.

    Returns a Framed whose model equals elem; raises LadderError when the
    spanning family does not cover the element (generator theorem failure).
    """
    ring = sp.ring
    blocks = {}
    for (bot, toks), c in elem.terms.items():
        top = word_top(sp.model_shape, bot, toks)
        if top is None:
            continue
        deg = word_degree(sp.model_shape, bot, toks)
        blocks.setdefault((bot, top, deg), []).append(((bot, toks), c))
    result = Framed.zero(sp)
    for (bot, top, deg), items in blocks.items():
        piece = WElement(sp.model_shape, sp.n, dict(items), ring)
        if w_is_zero(piece):
            continue
        db = sp.dist_of_model_seq(0, bot)
        dt = sp.dist_of_model_seq(sp.nstages - 1, top)
        if db is None or dt is None:
            raise LadderError("element has blacks inside a boundary group")
        fam, ech, rows = _reframe_family(sp, db, dt, deg, dot_bound, static_only, allow)
        vec = _action_vec(sp, piece, rows)
        if vec is None:
            raise LadderError("element acts outside the family's row space")
        sol = ech.solve(vec)
        if sol is None:
            raise LadderError("element is not in the span of the generators")
        for (coeff, trip) in zip(sol, fam):
            if coeff:
                lkey, g, rkey = trip
                l = key_element(sp.top_shape, sp.n, lkey, ring) if lkey else WElement.idem(
                    sp.top_shape, sp.n, sp.coarse_seq(sp.nstages - 1, g[0][-1]), ring
                )
                r = key_element(sp.bottom_shape, sp.n, rkey, ring) if rkey else WElement.idem(
                    sp.bottom_shape, sp.n, sp.coarse_seq(0, g[0][0]), ring
                )
                result = result + Framed(sp, [(coeff, l, g, r)])
    return result


def _action_vec(sp, piece, rows):
    fam_polys = oracle_family(sp.model_shape, sp.n, sp.ring)
    vec = [0] * len(rows)
    bots = {bot for (bot, _t) in piece.terms}
    for bot in bots:
        for li, f in enumerate(fam_polys):
            for tseq, g in WElement(sp.model_shape, sp.n, {k: v for k, v in piece.terms.items() if k[0] == bot}, sp.ring).act(bot, f).items():
                for mono, c in g.terms.items():
                    rid = (bot, li, tseq, mono)
                    if rid not in rows:
                        return None
                    vec[rows[rid]] += c
    return vec


def _reframe_family(sp, db, dt, deg, dot_bound, static_only, allow=None):
    ck = (sp.key(), db, dt, deg, dot_bound, static_only, getattr(allow, "__name__", None) if allow else None)
    if ck in _reframe_cache:
        return _reframe_cache[ck]
    ring = sp.ring
    gens = enumerate_genkeys(sp, min(dot_bound, deg), static_only=static_only)
    if allow is not None:
        gens = [g for g in gens if allow(g)]
    fam = []
    models = []
    bot_seq = None
    for g in gens:
        gm = genkey_model(sp, g)
        if gm.is_raw_zero():
            continue
        gdeg = genkey_degree(sp, g)
        rem = deg - gdeg
        if rem < 0:
            continue
        gb = g[0][0]
        gt = g[0][-1]
        for dl in range(0, rem + 1):
            dr = rem - dl
            lkeys = basis_keys(
                sp.top_shape,
                sp.n,
                sp.coarse_seq(sp.nstages - 1, gt),
                sp.coarse_seq(sp.nstages - 1, dt),
                dl,
            )
            lkeys = [k for k in lkeys if key_degree(sp.top_shape, k) == dl]
            rkeys = basis_keys(
                sp.bottom_shape,
                sp.n,
                sp.coarse_seq(0, db),
                sp.coarse_seq(0, gb),
                dr,
            )
            rkeys = [k for k in rkeys if key_degree(sp.bottom_shape, k) == dr]
            for lk in lkeys:
                lel = key_element(sp.top_shape, sp.n, lk, ring)
                lphi = phi_top(sp, lel)
                for rk in rkeys:
                    rel = key_element(sp.bottom_shape, sp.n, rk, ring)
                    m = lphi * gm * phi_bottom(sp, rel)
                    if m.is_raw_zero():
                        continue
                    fam.append((lk, g, rk))
                    models.append(m)
    # build row space
    rows = {}
    fam_polys = oracle_family(sp.model_shape, sp.n, ring)
    cols_raw = []
    for m in models:
        images = []
        bots = {bot for (bot, _t) in m.terms}
        for bot in bots:
            for li, f in enumerate(fam_polys):
                for tseq, gpoly in m.act(bot, f).items():
                    for mono, c in gpoly.terms.items():
                        rid = (bot, li, tseq, mono)
                        if rid not in rows:
                            rows[rid] = len(rows)
                        images.append((rid, c))
        cols_raw.append(images)
    cols = []
    keep_fam = []
    for images, trip in zip(cols_raw, fam):
        v = [0] * len(rows)
        nonzero = False
        for rid, c in images:
            v[rows[rid]] += c
            nonzero = True
        if nonzero:
            cols.append(v)
            keep_fam.append(trip)
    ech = _Echelon(cols, len(rows))
    out = (keep_fam, ech, rows)
    _reframe_cache[ck] = out
    return out
