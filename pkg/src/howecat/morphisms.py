"""Elementary bimodule morphisms between ladder-word bimodules.

Each morphism is a table on the canonical generators of its source word.
A morphism declares a friendliness predicate; applying it to a generator
outside that domain first re-expresses the element through the friendly
family by an exact linear solve (the generator theorems guarantee the
friendly families span, and the solve fails loudly if they do not).

Generator dot data is attributed per strand interval; the image formulas
consume exactly the dots the source displays carry (the step dots between
the two active letters), and their own red-dot decorations are expanded
over the active stage's column groups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .polycore import (
    MultiPoly,
    VarUniverse,
    complete_in_red,
    complete_sym,
    elementary_sym,
    red_e,
)
from .scalars import ZZ
from .webster import BLACK, WElement
from .bimodules import (
    Framed,
    LadderError,
    LadderSpace,
    enumerate_genkeys,
    genkey_model,
    genkey_strict,
    genkey_valid,
    reframe,
    zero_dots,
)


def coarse_universe(shape, n, ring=ZZ):
    return VarUniverse(n, tuple(shape), ring)


def poly_elem(shape, n, seq, poly, ring=ZZ):
    """poly * e(seq) as a raw word element; poly in the coarse universe."""
    shape = tuple(shape)
    u = poly.universe
    terms = {}
    bpos = [p for p in range(1, len(seq) + 1) if seq[p - 1] == BLACK]
    rpos = {}
    for p, e in enumerate(seq, start=1):
        if e != BLACK:
            rpos[e] = p
    for mono, c in poly.terms.items():
        toks = []
        for b in range(n):
            e = mono[u.x_index(b + 1)]
            toks.extend([("x", bpos[b])] * e)
        for j in range(1, len(shape) + 1):
            for d in range(1, shape[j - 1] + 1):
                e = mono[u.e_index(j, d)]
                toks.extend([("E", rpos[j], d)] * e)
        key = (tuple(seq), tuple(toks))
        terms[key] = ring.add(terms.get(key, ring.coerce(0)), c)
    terms = {k: v for k, v in terms.items() if not ring.is_zero(v)}
    return WElement(shape, n, terms, ring)


def black_range_e(u, lo, k, d):
    return elementary_sym(u, [u.x_index(lo + i) for i in range(1, k + 1)], d)


def black_range_h(u, lo, k, d):
    return complete_sym(u, [u.x_index(lo + i) for i in range(1, k + 1)], d)


# -- dot bookkeeping ---------------------------------------------------------------


def _slot(sp, col):
    return sorted(sp.labels).index(col)


def col_dots(sp, dots, col, interval):
    return dots[_slot(sp, col)][interval]


def with_col_dots(sp, dots, col, interval, mono):
    slot = _slot(sp, col)
    slots = list(dots[slot])
    slots[interval] = tuple(mono)
    return dots[:slot] + (tuple(slots),) + dots[slot + 1 :]


def add_col_dots(sp, dots, col, interval, add_mono):
    slot = _slot(sp, col)
    slots = list(dots[slot])
    cur = list(slots[interval])
    for i, e in enumerate(add_mono):
        if e:
            if i >= len(cur):
                return None
            cur[i] += e
    slots[interval] = tuple(cur)
    return dots[:slot] + (tuple(slots),) + dots[slot + 1 :]


def _group_E_poly(sp, mu, stage, coarse_col, deg):
    cols = sp.stage_groups[stage][coarse_col - 1]
    poly = MultiPoly.zero(mu)
    for split in _comps(deg, len(cols)):
        term = MultiPoly.one(mu)
        for col, d in zip(cols, split):
            term = term * red_e(mu, sp.col_red_index(col), d)
            if term.is_zero():
                break
        poly = poly + term
    return poly


def _group_H_poly(sp, mu, stage, coarse_col, deg):
    if deg < 0:
        return MultiPoly.zero(mu)
    if deg == 0:
        return MultiPoly.one(mu)
    cols = sp.stage_groups[stage][coarse_col - 1]
    poly = MultiPoly.zero(mu)
    for split in _comps(deg, len(cols)):
        term = MultiPoly.one(mu)
        for col, d in zip(cols, split):
            term = term * complete_in_red(mu, sp.col_red_index(col), d)
            if term.is_zero():
                break
        poly = poly + term
    return poly


def group_poly_dots(sp, stage, coarse_col, kind, deg):
    """Expand H_deg / E_deg of a coarse column over its stage group;
    returns [(dict col -> monomial, coeff)].  Dots land in the columns'
    final interval (kind-independent; they commute everywhere)."""
    if deg < 0:
        return []
    if deg == 0:
        return [({}, 1)]
    cols = sp.stage_groups[stage][coarse_col - 1]
    mu = VarUniverse(0, sp.model_shape, sp.ring)
    if kind == "E":
        poly = MultiPoly.zero(mu)
        for split in _comps(deg, len(cols)):
            term = MultiPoly.one(mu)
            for col, d in zip(cols, split):
                term = term * red_e(mu, sp.col_red_index(col), d)
                if term.is_zero():
                    break
            poly = poly + term
    else:
        poly = MultiPoly.zero(mu)
        for split in _comps(deg, len(cols)):
            term = MultiPoly.one(mu)
            for col, d in zip(cols, split):
                term = term * complete_in_red(mu, sp.col_red_index(col), d)
                if term.is_zero():
                    break
            poly = poly + term
    out = []
    for mono, c in poly.terms.items():
        dd = {}
        for col in cols:
            j = sp.col_red_index(col)
            lab = sp.labels[col]
            mvec = tuple(mono[mu.e_index(j, d)] for d in range(1, lab + 1)) if lab else ()
            if any(mvec):
                dd[col] = mvec
        out.append((dd, c))
    return out


def _comps(total, parts):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _comps(total - first, parts - 1):
            yield (first,) + rest


def expand_merged_monomial(mono, lab_left, lab_right):
    """E(c)_merged -> sum_{c1+c2=c} E(c1)_L E(c2)_R with truncation."""
    states = [([0] * lab_left, [0] * lab_right, 1)]
    for c, e in enumerate(mono, start=1):
        for _ in range(e):
            new = []
            for mL, mR, coeff in states:
                for c1 in range(c + 1):
                    c2 = c - c1
                    if c1 > lab_left or c2 > lab_right:
                        continue
                    nL, nR = list(mL), list(mR)
                    if c1:
                        nL[c1 - 1] += 1
                    if c2:
                        nR[c2 - 1] += 1
                    new.append((nL, nR, coeff))
            states = new
    return [(tuple(mL), tuple(mR), c) for mL, mR, c in states]


def pair_to_merged_thin(thick_mono):
    """Rewrite thick-side dots of a (thin, thick) split as merged dots and
    thin powers: E(c)_thick = E(c)_merged - E(1)_thin E(c-1)_thick."""
    from collections import defaultdict

    results = defaultdict(int)
    work = {((), 0, tuple(thick_mono)): 1}
    while work:
        nxt = defaultdict(int)
        for (merged, t, rem), coeff in work.items():
            c = 0
            for idx in range(len(rem) - 1, -1, -1):
                if rem[idx]:
                    c = idx + 1
                    break
            if c == 0:
                results[(merged, t)] += coeff
                continue
            rem2 = list(rem)
            rem2[c - 1] -= 1
            rem2 = tuple(rem2)
            nxt[(tuple(sorted(merged + (c,))), t, rem2)] += coeff
            if c >= 2:
                rem3 = list(rem2)
                rem3[c - 2] += 1
                nxt[(merged, t + 1, tuple(rem3))] -= coeff
            else:
                nxt[(merged, t + 1, rem2)] -= coeff
        work = {k: v for k, v in nxt.items() if v}
    out = []
    for (merged, t), coeff in results.items():
        if coeff:
            md = {}
            for c in merged:
                md[c] = md.get(c, 0) + 1
            out.append((md, t, coeff))
    return out


# -- morphism wrapper ----------------------------------------------------------------


@dataclass
class LadderMap:
    name: str
    source: LadderSpace
    target: LadderSpace
    table: object
    friendly: object = None  # predicate; None = table total

    def __call__(self, x, dot_bound=None):
        return apply_map(self, x, dot_bound)


def apply_map(mp, x, dot_bound=None):
    if getattr(mp, "run", None) is not None:
        return mp.run(x, dot_bound)
    if dot_bound is None:
        dot_bound = _default_dot_bound(mp.source)
    out = Framed.zero(mp.target)
    for (c, l, g, r) in x.terms:
        if mp.friendly is None or mp.friendly(g):
            img = mp.table(g)
            out = out + _sandwich(img, l, r).scale(c)
            continue
        piece = Framed(mp.source, [(1, l, g, r)]).model()
        rf = reframe(mp.source, piece, dot_bound, allow=_named(mp, mp.friendly))
        sub = Framed.zero(mp.target)
        for (c2, l2, g2, r2) in rf.terms:
            img2 = mp.table(g2)
            sub = sub + _sandwich(img2, l2, r2).scale(c2)
        out = out + sub.scale(c)
    return out


def _named(mp, fn):
    fn.__name__ = f"friendly:{mp.name}:{mp.source.key()}"
    return fn


def _sandwich(img, l, r):
    return Framed(img.space, [(c, l * l2, g2, r2 * r) for (c, l2, g2, r2) in img.terms])


def _default_dot_bound(sp):
    return 2 * (sum(sp.bottom_shape) + sp.n + 2)


def compose_maps(maps, x, dot_bound=None):
    for mp in maps:
        x = apply_map(mp, x, dot_bound)
    return x


# -- word helpers ----------------------------------------------------------------------


def word_space(shape, letters, n, ring=ZZ):
    return LadderSpace(shape, letters, n, ring)


def _letters(sp):
    return [(st.kind, st.i, st.a) for st in sp.steps]


def _static(chain):
    return all(d == chain[0] for d in chain)


def _gap_blacks_before(dist, gap):
    return sum(dist[:gap])


def _pair_cols(src, tgt, src_skip=(), tgt_skip=()):
    s_cols = [c for c in src.order if c not in src_skip]
    t_cols = [c for c in tgt.order if c not in tgt_skip]
    if len(s_cols) != len(t_cols):
        raise LadderError("column sets do not align between words")
    return dict(zip(s_cols, t_cols))


def _consumed_col(sp, ell):
    co = sp.step_col[ell]
    if sp.step_col[ell + 1] != co:
        raise LadderError("cap: the two letters do not share a strand")
    uses = sp.col_uses(co)
    if co >= len(sp.bottom_shape) and uses == [ell, ell + 1]:
        return co
    return None


def _translate_factors(src, tgt, dots, pairing, fmap):
    """Carry dot data through a column pairing with a factor relabelling.

    fmap(src_col, factor) returns the target factor, or None when the slot
    must be clean (dots there raise; friendliness predicates prevent it).
    """
    new = list(zero_dots(tgt))
    t_slots = sorted(tgt.labels)
    for c, slots in zip(sorted(src.labels), dots):
        for t, mono in enumerate(slots):
            if not any(mono):
                continue
            ct = pairing.get(c)
            if ct is None:
                raise LadderError("dots on an unpaired column")
            q = min(src.created_at[c], src.nfactors - 1) + t
            q2 = fmap(c, q)
            if q2 is None:
                raise LadderError("dots on a dropped factor")
            ti = tgt.col_factor_slot(ct, q2)
            if ti is None or ti >= len(new[t_slots.index(ct)]):
                raise LadderError("factor out of range in target")
            slot = t_slots.index(ct)
            cur = list(new[slot][ti])
            for i, e in enumerate(mono):
                if e:
                    if i >= len(cur):
                        raise LadderError("dot does not fit the paired column")
                    cur[i] += e
            row = list(new[slot])
            row[ti] = tuple(cur)
            new[slot] = tuple(row)
    return tuple(new)


def _factor_dots(sp, dots, col, q):
    slot = sp.col_factor_slot(col, q)
    if slot is None:
        return (0,) * sp.labels[col]
    return dots[_slot(sp, col)][slot]


def _clear_factor(sp, dots, col, q):
    slot = sp.col_factor_slot(col, q)
    return with_col_dots(sp, dots, col, slot, (0,) * sp.labels[col])


# -- dots ---------------------------------------------------------------------------


def map_dot(sp, ell):
    """Step dot on letter ell: lands in the strand's factor ell."""
    col = sp.step_col[ell]

    def table(genkey):
        dists, dots = genkey
        slot = sp.col_factor_slot(col, ell)
        new = add_col_dots(sp, dots, col, slot, (1,) + (0,) * (sp.labels[col] - 1))
        if new is None:
            return Framed.zero(sp)
        return Framed.generator(sp, (dists, new))

    return LadderMap(f"dot[{ell}]", sp, sp, table)


# -- crossings ------------------------------------------------------------------------


def _swap_letters(sp, ell):
    letters = _letters(sp)
    letters[ell], letters[ell + 1] = letters[ell + 1], letters[ell]
    return word_space(sp.bottom_shape, letters, sp.n, sp.ring)


def _swap_fmap(sp, ell):
    """Active strands' step factors follow the height change."""
    lo = sp.step_col[ell]
    hi = sp.step_col[ell + 1]

    def fmap(col, q):
        if col == lo and q == ell:
            return ell + 1
        if col == hi and q == ell + 1:
            return ell
        return q

    return fmap


def map_cross_swap(sp, ell):
    """Pure change of heights: far-apart colours, and (E_{i+1}, E_i) ->
    (E_i, E_{i+1})."""
    tgt = _swap_letters(sp, ell)
    pairing = _pair_cols(sp, tgt)
    fmap = _swap_fmap(sp, ell)

    def table(genkey):
        dists, dots = genkey
        return Framed.generator(tgt, (dists, _translate_factors(sp, tgt, dots, pairing, fmap)))

    return LadderMap(f"crossswap[{ell}]", sp, tgt, table)


def map_cross_hard(sp, ell):
    """Letters (E_i, E_{i+1}) -> (E_{i+1}, E_i): the corrected crossing."""
    k1, i1, _ = _letters(sp)[ell]
    k2_, i2, _ = _letters(sp)[ell + 1]
    assert (k1, k2_) == ("E", "E") and i2 == i1 + 1
    i = i1
    tgt = _swap_letters(sp, ell)
    pairing = _pair_cols(sp, tgt)
    fmap = _swap_fmap(sp, ell)
    col_lo = sp.step_col[ell]
    col_hi = sp.step_col[ell + 1]

    def friendly(genkey):
        dists, dots = genkey
        if any(any(m) for m in dots[_slot(sp, col_lo)]) or any(
            any(m) for m in dots[_slot(sp, col_hi)]
        ):
            return False
        below, mid, above = dists[ell], dists[ell + 1], dists[ell + 2]
        move = [m - b for m, b in zip(mid, below)]
        if all(x == 0 for x in move):
            return mid == above
        k2 = move[i]
        expected = [0] * len(move)
        expected[i] = k2
        expected[i + 1] = -k2
        return k2 > 0 and list(move) == expected and mid == above

    def table(genkey):
        dists, dots = genkey
        below, mid, above = dists[ell], dists[ell + 1], dists[ell + 2]
        new_dots = _translate_factors(sp, tgt, dots, pairing, fmap)
        move = [m - b for m, b in zip(mid, below)]
        if all(x == 0 for x in move):
            # image: dot on the E_{i+1} strand minus dot on the E_i strand
            out = Framed.zero(tgt)
            t_hi = pairing[col_hi]
            s = tgt.col_factor_slot(t_hi, ell)
            d_hi = add_col_dots(tgt, new_dots, t_hi, s, (1,) + (0,) * (tgt.labels[t_hi] - 1))
            if d_hi is not None:
                out = out + Framed.generator(tgt, (dists, d_hi))
            t_lo = pairing[col_lo]
            s = tgt.col_factor_slot(t_lo, ell + 1)
            d_lo = add_col_dots(tgt, new_dots, t_lo, s, (1,) + (0,) * (tgt.labels[t_lo] - 1))
            if d_lo is not None:
                out = out - Framed.generator(tgt, (dists, d_lo))
            return out
        k2 = move[i]
        chainA = dists[: ell + 1] + (mid,) + dists[ell + 2 :]
        chainB = dists[: ell + 1] + (below,) + dists[ell + 2 :]
        if k2 == 1:
            return Framed.generator(tgt, (chainA, new_dots)) - Framed.generator(
                tgt, (chainB, new_dots)
            )
        partial = list(below)
        partial[i] += 1
        partial[i + 1] -= 1
        chainC = dists[: ell + 1] + (tuple(partial),) + dists[ell + 2 :]
        return -Framed.generator(tgt, (chainC, new_dots))

    return LadderMap(f"crosshard[{ell}]", sp, tgt, table, friendly)


def map_cross_ii(sp, ell):
    """Same-colour adjacent crossing: divided-difference box on the dots."""
    col_lo = sp.step_col[ell]
    col_hi = sp.step_col[ell + 1]
    if col_lo == col_hi:
        raise LadderError("ii-crossing needs two distinct step strands")

    def friendly(genkey):
        dists, dots = genkey
        if not _static(dists[ell : ell + 3]):
            return False
        slo = sp.col_factor_slot(col_lo, ell)
        shi = sp.col_factor_slot(col_hi, ell + 1)
        for t, mono in enumerate(dots[_slot(sp, col_lo)]):
            if t != slo and any(mono):
                return False
        for t, mono in enumerate(dots[_slot(sp, col_hi)]):
            if t != shi and any(mono):
                return False
        return not any(_factor_dots(sp, dots, col_lo, ell)[1:]) and not any(
            _factor_dots(sp, dots, col_hi, ell + 1)[1:]
        )

    def table(genkey):
        dists, dots = genkey
        x = _factor_dots(sp, dots, col_lo, ell)[0]
        y = _factor_dots(sp, dots, col_hi, ell + 1)[0]
        out = Framed.zero(sp)
        slo = sp.col_factor_slot(col_lo, ell)
        shi = sp.col_factor_slot(col_hi, ell + 1)
        for alpha, beta, coeff in _dd_box(x, y):
            nd = with_col_dots(sp, dots, col_lo, slo, (alpha,) + (0,) * (sp.labels[col_lo] - 1))
            nd = with_col_dots(sp, nd, col_hi, shi, (beta,) + (0,) * (sp.labels[col_hi] - 1))
            out = out + Framed.generator(sp, (dists, nd), coeff)
        return out

    return LadderMap(f"crossii[{ell}]", sp, sp, table, friendly)


def _dd_box(x, y):
    """Coefficients of (x1^x x2^y - x2^x x1^y)/(x2 - x1)."""
    if x == y:
        return []
    if x < y:
        return [(x + t, y - 1 - t, 1) for t in range(y - x)]
    return [(y + t, x - 1 - t, -1) for t in range(x - y)]


# -- caps -----------------------------------------------------------------------------


def map_unzip(sp, ell, orient):
    """Collapse the pair at (ell, ell+1) onto the splitter-bigon word.

    Dots and chain data outside the pair's two factors translate verbatim;
    the pair's interior (its double crossings, step dots, interior moves)
    is resolved by an exact solve that only varies data inside the bigon
    factor, where the model is faithful.
    """
    letters = _letters(sp)
    k1, i1, a1 = letters[ell]
    k2, i2, a2 = letters[ell + 1]
    want = ("F", "E") if orient == "r" else ("E", "F")
    assert (k1, k2) == want and i1 == i2 and a1 == a2 == 1
    i = i1
    mid = ("V", i, 1) if orient == "r" else ("U", i + 1, 1)
    keep = letters[:ell] + [mid] + letters[ell + 2 :]
    tgt = word_space(sp.bottom_shape, keep, sp.n, sp.ring)
    if tgt.model_shape != sp.model_shape:
        raise LadderError("unzip: model shapes do not align")
    mp = LadderMap(f"unzip{orient}[{ell}]", sp, tgt, None, None)
    mp.run = lambda x, dot_bound=None: _apply_unzip(sp, tgt, ell, x, dot_bound)
    return mp


def _unzip_translate(sp, tgt, ell, genkey):
    """Chain/dot skeleton of the image (pair factors collapse onto the
    bigon factor)."""
    dists, dots = genkey
    new_dists = dists[: ell + 1] + dists[ell + 2 :]
    pairing = _pair_cols(sp, tgt)

    def fmap(c, q):
        if q <= ell:
            return q
        if q == ell + 1:
            return ell
        return q - 1

    new_dots = _translate_factors(sp, tgt, dots, pairing, fmap)
    return (new_dists, new_dots)


_unzip_cache = {}


def _apply_unzip(sp, tgt, ell, x, dot_bound=None):
    if dot_bound is None:
        dot_bound = _default_dot_bound(sp)
    out = Framed.zero(tgt)
    for (c, l, g, r) in x.terms:
        key = (sp.key(), ell, g)
        combo = _unzip_cache.get(key)
        if combo is None:
            combo = _unzip_solve(sp, tgt, ell, g, dot_bound)
            _unzip_cache[key] = combo
        out = out + Framed(
            tgt, [(c * c2, l * l2, g2, r2 * r) for (c2, l2, g2, r2) in combo.terms]
        )
    return out


def _unzip_solve(sp, tgt, ell, g, dot_bound):
    skeleton = _unzip_translate(sp, tgt, ell, g)
    model = genkey_model(sp, g)
    if model.is_raw_zero():
        return Framed.zero(tgt)
    deg = None
    for (bot, toks) in model.terms:
        from .webster import word_degree as wdeg

        deg = wdeg(sp.model_shape, bot, toks)
    sk_dists, sk_dots = skeleton
    vslot_cols = sorted(tgt.labels)
    # candidate generators: same chain outside the bigon stages, static at
    # the bigon itself, and the same dots outside the bigon factor
    cands = []
    for h in enumerate_genkeys(tgt, dot_bound):
        hd, hdots = h
        if hd[ell] != hd[ell + 1]:
            continue
        if hd[:ell] != sk_dists[:ell] or hd[ell + 2 :] != sk_dists[ell + 2 :]:
            continue
        ok = True
        for cidx, ccol in enumerate(vslot_cols):
            base = min(tgt.created_at[ccol], tgt.nfactors - 1)
            for t, mono in enumerate(hdots[cidx]):
                q = base + t
                if q == ell:
                    continue
                if mono != sk_dots[cidx][t]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            cands.append(h)
    # outer factors: black dots at the bottom only
    from .webster import basis_keys as bkeys, key_degree as kdeg, key_element as kel

    fam = []
    models = []
    bot_coarse = tgt.coarse_seq(0, sk_dists[0])
    for h in cands:
        hm = genkey_model(tgt, h)
        if hm.is_raw_zero():
            continue
        hdeg = None
        for (bot, toks) in hm.terms:
            from .webster import word_degree as wdeg2

            hdeg = wdeg2(tgt.model_shape, bot, toks)
        rem = deg - hdeg
        if rem < 0:
            continue
        rks = [
            k
            for k in bkeys(sp.bottom_shape, sp.n, bot_coarse, bot_coarse, rem)
            if kdeg(sp.bottom_shape, k) == rem
        ]
        for rk in rks:
            rel = kel(sp.bottom_shape, sp.n, rk, sp.ring)
            m = hm * phi_bottom_local(tgt, rel)
            if m.is_raw_zero():
                continue
            fam.append((h, rk))
            models.append(m)
    # prefer bigon-dotted generators over E-dotted outer factors as pivots
    order = sorted(
        range(len(fam)), key=lambda idx: 1 if any(any(m) for m in fam[idx][1][3]) else 0
    )
    fam = [fam[idx] for idx in order]
    models = [models[idx] for idx in order]
    combo = _solve_combo(tgt, model, fam, models)
    return combo


def phi_bottom_local(tgt, rel):
    from .bimodules import phi_bottom

    return phi_bottom(tgt, rel)


def _solve_combo(tgt, model, fam, models):
    from fractions import Fraction
    from .webster import oracle_family, WElement, key_element
    from .bimodules import _Echelon

    rows = {}
    cols = []
    fam_polys = oracle_family(tgt.model_shape, tgt.n, tgt.ring)
    raw_cols = []
    for m in models:
        images = []
        bots = {bot for (bot, _t) in m.terms}
        for bot in bots:
            for li, f in enumerate(fam_polys):
                for tseq, gpoly in m.act(bot, f).items():
                    for mono, cc in gpoly.terms.items():
                        rid = (bot, li, tseq, mono)
                        if rid not in rows:
                            rows[rid] = len(rows)
                        images.append((rid, cc))
        raw_cols.append(images)
    for images in raw_cols:
        v = [0] * len(rows)
        for rid, cc in images:
            v[rows[rid]] += cc
        cols.append(v)
    ech = _Echelon(cols, len(rows))
    vec = [0] * len(rows)
    bots = {bot for (bot, _t) in model.terms}
    for bot in bots:
        for li, f in enumerate(fam_polys):
            for tseq, gpoly in model.act(bot, f).items():
                for mono, cc in gpoly.terms.items():
                    rid = (bot, li, tseq, mono)
                    if rid not in rows:
                        raise LadderError("unzip: element outside the local family")
                    vec[rows[rid]] += cc
    sol = ech.solve(vec)
    if sol is None:
        raise LadderError("unzip: local resolution failed")
    out = Framed.zero(tgt)
    for coeff, (h, rk) in zip(sol, fam):
        if coeff:
            rel = key_element(tgt.bottom_shape, tgt.n, rk, tgt.ring)
            le = WElement.idem(
                tgt.top_shape, tgt.n, tgt.coarse_seq(tgt.nstages - 1, h[0][-1]), tgt.ring
            )
            out = out + Framed(tgt, [(coeff, le, h, rel)])
    return out


def map_partial_at(sp, ell, ring=None):
    """Derivation on a bigon letter at position ell of a word.

    Right-split bigons (V) use the thin right lobe with no sign; left-split
    bigons (U) use the thin left lobe and the sign (-1)^{label-1}, where the
    label is the coarse thickness of the split column at that stage.
    """
    letters = _letters(sp)
    kind, j, d = letters[ell]
    assert kind in ("V", "U") and d == 1
    keep = letters[:ell] + letters[ell + 1 :]
    tgt = word_space(sp.bottom_shape, keep, sp.n, sp.ring)
    co = sp.step_col[ell]
    uses = sp.col_uses(co)
    consumed = co >= len(sp.bottom_shape) and uses == [ell]
    pairing = _pair_cols(sp, tgt, src_skip=(co,) if consumed else ())
    u = coarse_universe(sp.bottom_shape, sp.n, sp.ring)
    sj_stage = sp.stage_shapes[ell][j - 1]
    sign = 1 if kind == "V" else (-1) ** (sj_stage - 1)
    group = sp.stage_groups[ell][j - 1]
    others = [c for c in group if c != co]

    def fmap(c, q):
        if q < ell:
            return q
        if q == ell:
            return None
        return q - 1

    def _alone(c, st):
        return [c] in [list(g) for g in sp.stage_groups[st] if c in g]

    def friendly(genkey):
        dists, dots = genkey
        if dists[ell] != dists[ell + 1]:
            return False
        # spectator dots inside the bigon factor must slide out
        for c in sorted(sp.labels):
            if c == co or c in others:
                continue
            if any(_factor_dots(sp, dots, c, ell)) and not (
                _alone(c, ell) or _alone(c, ell + 1)
            ):
                return False
        # thick side with several columns: only the column next to the lobe
        if len(others) > 1:
            inner = others[-1] if kind == "V" else others[0]
            for c in others:
                if c != inner and any(_factor_dots(sp, dots, c, ell)):
                    return False
        return True

    def table(genkey):
        dists, dots = genkey
        thin_mono = _factor_dots(sp, dots, co, ell)
        inner = (others[-1] if kind == "V" else others[0]) if others else None
        thick_mono = _factor_dots(sp, dots, inner, ell) if inner is not None else ()
        dots = _clear_factor(sp, dots, co, ell)
        if inner is not None:
            dots = _clear_factor(sp, dots, inner, ell)
        if dists[ell] != dists[ell + 1]:
            raise LadderError("derivation: non-static bigon generator")
        # slide spectator bigon-factor dots into the factor below (or out
        # through the bottom boundary when the bigon is the lowest letter)
        r_extract = MultiPoly.one(u)
        for c in sorted(sp.labels):
            if c == co or c in others:
                continue
            mono = _factor_dots(sp, dots, c, ell)
            if not any(mono):
                continue
            dots = _clear_factor(sp, dots, c, ell)
            if ell >= 1:
                slot = sp.col_factor_slot(c, ell - 1)
                dots2 = add_col_dots(sp, dots, c, slot, mono)
                if dots2 is None:
                    raise LadderError("derivation: cannot reattribute dots")
                dots = dots2
            else:
                gi = next(
                    gix
                    for gix, grp in enumerate(sp.stage_groups[0])
                    if grp == [c]
                )
                for dd, e in enumerate(mono, start=1):
                    for _ in range(e):
                        r_extract = r_extract * red_e(u, gi + 1, dd)
        new_dists = dists[: ell + 1] + dists[ell + 2 :]
        base_dots = _translate_factors(sp, tgt, dots, pairing, fmap)
        bot_seq = tgt.coarse_seq(0, new_dists[0])
        junction = ell - 1
        out = Framed.zero(tgt)
        for md, t, coeff in pair_to_merged_thin(thick_mono):
            m = thin_mono[0] + t
            hexp = m - sj_stage + 1
            combos = []
            if ell == 0:
                h = complete_in_red(u, j, hexp)
                if h.is_zero():
                    continue
                mdp = MultiPoly.one(u)
                for c_e, e in md.items():
                    for _ in range(e):
                        mdp = mdp * red_e(u, j, c_e)
                if mdp.is_zero():
                    continue
                rfac = poly_elem(
                    sp.bottom_shape, sp.n, bot_seq, h * mdp * r_extract, sp.ring
                )
                gen = (new_dists, base_dots)
                out = out + Framed.generator(tgt, gen, sign * coeff).act_right(rfac)
                continue
            # internal junction: expand H and the merged dots over the
            # stage group of the target, as one polynomial
            mu = VarUniverse(0, tgt.model_shape, tgt.ring)
            poly = _group_H_poly(tgt, mu, ell, j, hexp)
            if poly.is_zero():
                continue
            for c_e, e in md.items():
                for _ in range(e):
                    poly = poly * _group_E_poly(tgt, mu, ell, j, c_e)
            for mono2, cc in poly.terms.items():
                g_dots = base_dots
                good = True
                for c3 in tgt.order:
                    jj = tgt.col_red_index(c3)
                    lab = tgt.labels[c3]
                    mv = (
                        tuple(mono2[mu.e_index(jj, dd3)] for dd3 in range(1, lab + 1))
                        if lab
                        else ()
                    )
                    if any(mv):
                        s3 = tgt.col_factor_slot(c3, junction)
                        g_dots = add_col_dots(tgt, g_dots, c3, s3, mv)
                        if g_dots is None:
                            good = False
                            break
                if not good:
                    continue
                gen = (new_dists, g_dots)
                out = out + Framed.generator(tgt, gen, sign * coeff * cc)
        return out

    return LadderMap(f"partialat[{ell}]", sp, tgt, table, friendly)


def map_cap(sp, ell, orient):
    """Cap on letters (ell, ell+1): the unzip followed by the derivation.

    orient 'r': letters (F_i, E_i)  [caps E_i F_i 1 -> 1];
    orient 'l': letters (E_i, F_i)  [caps F_i E_i 1 -> 1].
    """
    uz = map_unzip(sp, ell, orient)
    pa = map_partial_at(uz.target, ell)

    def run(x, dot_bound=None):
        return apply_map(pa, apply_map(uz, x, dot_bound), dot_bound)

    mp = LadderMap(f"cap{orient}[{ell}]", sp, pa.target, None, None)
    mp.run = run
    return mp


# -- cups -----------------------------------------------------------------------------


def map_cup(sp, ell, i, orient):
    """Cup inserting a pair at letter slot ell.

    orient 'r': inserts (E_i, F_i)  [1 -> F_i E_i], loop goes left;
    orient 'l': inserts (F_i, E_i)  [1 -> E_i F_i], loop goes right.
    """
    letters = _letters(sp)
    ins = [("E", i, 1), ("F", i, 1)] if orient == "r" else [("F", i, 1), ("E", i, 1)]
    tgt_letters = letters[:ell] + ins + letters[ell:]
    tgt = word_space(sp.bottom_shape, tgt_letters, sp.n, sp.ring)
    co = tgt.step_col[ell]
    fresh = len(tgt.labels) == len(sp.labels) + 1
    pairing = _pair_cols(sp, tgt, tgt_skip=(co,) if fresh else ())
    donor = tgt.donor.get(co) if fresh else None
    src_donor = None
    if donor is not None:
        src_donor = next((cs for cs, ct in pairing.items() if ct == donor), None)

    def fmap(c, q):
        return q if q < ell else q + 2

    def friendly(genkey):
        return genkey_strict(sp, genkey)

    def table(genkey):
        dists, dots = genkey
        stage_shape = sp.stage_shapes[ell]
        a, b = stage_shape[i - 1], stage_shape[i]
        dist = dists[ell]
        k = dist[i]
        lo = _gap_blacks_before(dist, i)
        u = coarse_universe(sp.bottom_shape, sp.n, sp.ring)
        bot_seq = tgt.coarse_seq(0, dists[0])
        # source dots on the to-be-split column expand over the pair
        pieces = [(dots, {}, 1)]
        if src_donor is not None:
            base = min(sp.created_at[src_donor], sp.nfactors - 1)
            slots = dots[_slot(sp, src_donor)]
            lab_thick = tgt.labels[donor]
            for t, mono in enumerate(slots):
                if not any(mono):
                    continue
                q = base + t
                newpieces = []
                for dpiece, extra, coeff in pieces:
                    cleared = with_col_dots(
                        sp, dpiece, src_donor, t, (0,) * len(mono)
                    )
                    for mth, tthin, coeff2 in _merged_to_pair_thin(mono, lab_thick):
                        e2 = dict(extra)
                        key = (donor, fmap(src_donor, q))
                        e2[key] = tuple(
                            x + y
                            for x, y in zip(
                                e2.get(key, (0,) * lab_thick), mth
                            )
                        )
                        if tthin:
                            key2 = (co, fmap(src_donor, q))
                            cur = e2.get(key2, (0,))
                            e2[key2] = (cur[0] + tthin,)
                        newpieces.append((cleared, e2, coeff * coeff2))
                pieces = newpieces
        out = Framed.zero(tgt)
        for dpiece, extra, coeff0 in pieces:
            base_dots = _translate_factors(sp, tgt, dpiece, pairing, fmap)
            good0 = True
            for (c2, q2), mono in extra.items():
                s2 = tgt.col_factor_slot(c2, q2)
                base_dots = add_col_dots(tgt, base_dots, c2, s2, mono)
                if base_dots is None:
                    good0 = False
                    break
            if not good0:
                continue
            # looping term
            if k >= 1:
                moved = list(dist)
                if orient == "r":
                    moved[i] -= 1
                    moved[i - 1] += 1
                    sign = (-1) ** (k - 1)
                else:
                    moved[i] -= 1
                    moved[i + 1] += 1
                    sign = (-1) ** b
                chain = dists[: ell + 1] + (tuple(moved), dist) + dists[ell + 1 :]
                g = (chain, base_dots)
                if genkey_valid(tgt, g):
                    out = out + Framed.generator(tgt, g, sign * coeff0)
            # dotted terms
            total = (a if orient == "r" else b) - k
            chain = dists[: ell + 1] + (dist, dist) + dists[ell + 1 :]
            co_slot_up = tgt.col_factor_slot(co, ell + 1)
            for d1 in range(max(total, 0) + 1):
                for d2 in range(max(total, 0) + 1 - d1):
                    d3 = total - d1 - d2
                    if d3 < 0:
                        continue
                    if orient == "r":
                        sign = (-1) ** (a + d1 + d2)
                        ecol = i
                    else:
                        sign = (-1) ** (b + d3 + k)
                        ecol = i + 1
                    hpoly = black_range_h(u, lo, k, d1)
                    if hpoly.is_zero():
                        continue
                    g_dots0 = add_col_dots(tgt, base_dots, co, co_slot_up, (d2,))
                    if g_dots0 is None:
                        continue
                    if ell == 0:
                        # the decoration is a coarse dot at the bottom cut
                        epoly = red_e(u, ecol, d3)
                        if epoly.is_zero():
                            continue
                        rfac = poly_elem(
                            sp.bottom_shape, sp.n, bot_seq, hpoly * epoly, sp.ring
                        )
                        out = out + Framed.generator(
                            tgt, (chain, g_dots0), sign * coeff0
                        ).act_right(rfac)
                        continue
                    edots = group_poly_dots(tgt, ell, ecol, "E", d3)
                    if not edots:
                        continue
                    rfac = poly_elem(sp.bottom_shape, sp.n, bot_seq, hpoly, sp.ring)
                    for dd, ec in edots:
                        g_dots = g_dots0
                        good = True
                        for c2, mvec in dd.items():
                            s2 = tgt.col_factor_slot(c2, ell - 1)
                            g_dots = add_col_dots(tgt, g_dots, c2, s2, mvec)
                            if g_dots is None:
                                good = False
                                break
                        if not good:
                            continue
                        out = out + Framed.generator(
                            tgt, (chain, g_dots), sign * coeff0 * ec
                        ).act_right(rfac)
        return out

    return LadderMap(f"cup{orient}[{ell},{i}]", sp, tgt, table, friendly)


# -- splitter bigon maps ---------------------------------------------------------------


def _coarse_reseq_tokens(seq_from, seq_to):
    from .bimodules import _resequence_tokens

    return _resequence_tokens(seq_from, seq_to)


def bigon_space(shape, j, d, n, ring=ZZ):
    return LadderSpace(shape, [("V", j, d)], n, ring)


def map_iota(shape, j, d, n, ring=ZZ):
    """Creation: identity word -> bigon word."""
    src = LadderSpace(shape, [], n, ring)
    tgt = bigon_space(shape, j, d, n, ring)
    sj = shape[j - 1]
    rem_col = j - 1
    new_col = tgt.step_col[0]
    t_slots = sorted(tgt.labels)

    def table(genkey):
        dists, dots = genkey
        dist = dists[0]
        jm = dots[j - 1][0]
        base = list(zero_dots(tgt))
        for c, slots in zip(sorted(src.labels), dots):
            if c == j - 1:
                continue
            base[t_slots.index(c)] = slots
        out = Framed.zero(tgt)
        for mL, mR, coeff in expand_merged_monomial(jm, sj - d, d):
            nd = list(base)
            nd[t_slots.index(rem_col)] = (mL,)
            nd[t_slots.index(new_col)] = (mR,)
            out = out + Framed.generator(tgt, ((dist, dist), tuple(nd)), coeff)
        return out

    return LadderMap(f"iota[{j},{d}]", src, tgt, table)


def map_partial(shape, j, d, n, ring=ZZ):
    """Derivation: bigon word -> identity word.

    (s_j-1, 1) bigon (d=1): thin right lobe, no sign;
    (1, s_j-1) bigon (d=s_j-1>=1): thin left lobe, sign (-1)^{s_j-1}.
    """
    src = bigon_space(shape, j, d, n, ring)
    tgt = LadderSpace(shape, [], n, ring)
    sj = shape[j - 1]
    if d != 1 and d != sj - 1:
        raise LadderError("derivation maps need a thin lobe")
    thin_right = d == 1
    thin_col = src.step_col[0] if thin_right else j - 1
    thick_col = j - 1 if thin_right else src.step_col[0]
    sign = 1 if thin_right else (-1) ** (sj - 1)
    u = coarse_universe(shape, n, ring)
    s_slots = sorted(src.labels)
    t_slots = sorted(tgt.labels)

    def friendly(genkey):
        dists, dots = genkey
        return dists[0] == dists[1]

    def table(genkey):
        dists, dots = genkey
        dist = dists[0]
        thin_mono = dots[s_slots.index(thin_col)][0]
        thick_mono = dots[s_slots.index(thick_col)][0]
        base = list(zero_dots(tgt))
        for c, slots in zip(s_slots, dots):
            if c in (thin_col, thick_col):
                continue
            base[t_slots.index(c)] = slots
        bot = tgt.coarse_seq(0, dist)
        out = Framed.zero(tgt)
        for md, t, coeff in pair_to_merged_thin(thick_mono):
            m = thin_mono[0] + t
            h = complete_in_red(u, j, m - sj + 1)
            if h.is_zero():
                continue
            nd = list(base)
            ok = True
            cur = list(nd[t_slots.index(j - 1)][0])
            for c_e, e in md.items():
                if c_e > sj:
                    ok = False
                    break
                cur[c_e - 1] += e
            if not ok:
                continue
            nd[t_slots.index(j - 1)] = (tuple(cur),)
            out = out + Framed.generator(tgt, ((dist,), tuple(nd)), sign * coeff).act_right(
                poly_elem(shape, n, bot, h, ring)
            )
        return out

    return LadderMap(f"partial[{j},{d}]", src, tgt, table, friendly)
