"""Small helpers for permutations of {1..n}, stored as tuples of images."""

from __future__ import annotations

from functools import lru_cache


def identity(n):
    return tuple(range(1, n + 1))


def compose(u, v):
    """(u o v)(i) = u(v(i))."""
    return tuple(u[v[i] - 1] for i in range(len(v)))


def inverse(w):
    inv = [0] * len(w)
    for i, wi in enumerate(w, start=1):
        inv[wi - 1] = i
    return tuple(inv)


def apply_transposition_right(w, j):
    """w o s_j: swap the values at positions j, j+1 (1-based j)."""
    lst = list(w)
    lst[j - 1], lst[j] = lst[j], lst[j - 1]
    return tuple(lst)


def length(w):
    n = len(w)
    return sum(1 for i in range(n) for j in range(i + 1, n) if w[i] > w[j])


@lru_cache(maxsize=None)
def reduced_word(w):
    """Lexicographically least reduced word (s_{i_1}..s_{i_k}, functions
    composing right to left, so i_k labels the bottom-most crossing)."""
    n = len(w)
    if length(w) == 0:
        return ()
    # lex-least: pick the smallest j with a descent at the *top*, i.e. the
    # smallest j such that s_j * w is shorter, and recurse on the rest.
    for j in range(1, n):
        if inverse(w)[j - 1] > inverse(w)[j]:
            sw = tuple(j + 1 if x == j else (j if x == j + 1 else x) for x in w)
            return (j,) + reduced_word(sw)
    raise AssertionError("unreachable")


def _s(n, j):
    p = list(range(1, n + 1))
    p[j - 1], p[j] = p[j], p[j - 1]
    return tuple(p)


def word_to_perm(n, word):
    """Permutation for the word s_{i_1} ... s_{i_k} (composed right to left)."""
    w = identity(n)
    for j in word:
        w = compose(w, _s(n, j))
    return w


def all_permutations(n):
    import itertools

    return [tuple(p) for p in itertools.permutations(range(1, n + 1))]


def longest(n):
    return tuple(range(n, 0, -1))
