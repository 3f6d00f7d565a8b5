"""Maximal epsilon-characteristic hypergraphs, hypergraph pairs, and overlap
structure.

Hyperedges are bitmasks over the source alphabet. Validity of an edge is the
per-side-information-value enclosing-ball condition evaluated on probable
tuples only; symbols improbable at some y may still join an edge (their tuples
simply do not constrain it).
"""

from __future__ import annotations

from dataclasses import dataclass
import hashlib

import numpy as np

from . import geometry
from .errors import ValidationError
from .model import Alphabet, ProblemInstance

ENUM_CAP = 24  # alphabet cap for maximal-edge search
FAMILY_CAP = 16  # alphabet cap when the full valid family must be enumerated


def _bit(i: int) -> int:
    return 1 << i


def _members(mask: int, n: int) -> tuple:
    return tuple(i for i in range(n) if mask >> i & 1)


def function_arrays(instance: ProblemInstance, func_index: int = 0):
    """Return (fv, sup) with fv (n, ny, d) and sup (n, ny) for edge validity.

    The first axis is the quantized source; the second collects whatever the
    edge condition must hold for every value of (a dummy singleton when there
    is no conditioning).
    """
    f = instance.functions[func_index]
    vals = f.values
    sup = instance.pmf.support
    if instance.setting == "side_info":
        return vals, sup
    if instance.setting == "cascade":
        axis = f.axes[0]
        marg = sup.any(axis=1 - axis)
        return vals[:, None, :], marg[:, None]
    if len(f.axes) == 1:
        s = sup if sup.ndim == 1 else sup.any(axis=tuple(range(1, sup.ndim)))
        return vals[:, None, :], s[:, None]
    raise ValidationError(
        f"no single-terminal hypergraph for setting {instance.setting!r}"
    )


def _pair_arrays(instance: ProblemInstance, terminal: int):
    """Arrays for terminal-side edge validity against opposing singletons."""
    f = instance.functions[0]
    vals = f.values
    sup = instance.pmf.support
    if terminal == 0:
        return vals, sup
    return np.swapaxes(vals, 0, 1), sup.T


def _validity_checker(fv: np.ndarray, sup: np.ndarray, eps: float):
    """Memoized edge-validity predicate over bitmasks."""
    n, ny, d = fv.shape
    cache: dict[int, bool] = {}
    tol = eps + geometry.TOL

    if d == 1:
        v = fv[:, :, 0]
        lo = np.where(sup, v, np.inf)
        hi = np.where(sup, v, -np.inf)

        def check(mask: int) -> bool:
            idx = list(_members(mask, n))
            mn = lo[idx].min(axis=0)
            mx = hi[idx].max(axis=0)
            spread = np.where(mx >= mn, mx - mn, 0.0)  # vacuous y -> 0
            return bool((spread / 2.0 <= tol).all())

    else:

        def check(mask: int) -> bool:
            idx = list(_members(mask, n))
            for y in range(ny):
                rows = [i for i in idx if sup[i, y]]
                if len(rows) < 2:
                    continue
                if geometry.sec(fv[rows, y, :]).radius > tol:
                    return False
            return True

    def valid(mask: int) -> bool:
        got = cache.get(mask)
        if got is None:
            got = cache[mask] = check(mask)
        return got

    return valid


def _maximal_family(n: int, valid) -> list:
    """All maximal valid edges, by depth-first growth with downward closure."""
    found: set[int] = set()

    def dfs(S: int, cands: list):
        if not cands:
            if S:
                found.add(S)
            return
        full = S
        for c in cands:
            full |= _bit(c)
        if valid(full):
            # every valid superset of S inside this branch is a subset of full
            found.add(full)
            return
        for i, c in enumerate(cands):
            Sc = S | _bit(c)
            nxt = [c2 for c2 in cands[i + 1 :] if valid(Sc | _bit(c2))]
            dfs(Sc, nxt)

    dfs(0, list(range(n)))
    # antichain reduction
    out = [m for m in found if not any(m != o and m & o == m for o in found)]
    # maximality certificate: no single-symbol extension of a kept edge is valid
    for m in out:
        for s in range(n):
            if not m >> s & 1 and valid(m | _bit(s)):
                raise AssertionError("non-maximal edge survived reduction")
    return sorted(out, key=lambda m: _members(m, n))


def _valid_family(n: int, valid) -> list:
    """Every valid edge (downward-closed family), in canonical order."""
    if n > FAMILY_CAP:
        raise ValidationError(f"alphabet size {n} over family cap {FAMILY_CAP}")
    ok = {0: True}
    order = sorted(range(1, 1 << n), key=lambda m: bin(m).count("1"))
    for mask in order:
        # downward closure: skip the geometry when some sub-edge already failed
        sub_ok = all(ok[mask & ~_bit(i)] for i in range(n) if mask >> i & 1)
        ok[mask] = sub_ok and valid(mask)
    return sorted((m for m in range(1, 1 << n) if ok[m]), key=lambda m: _members(m, n))


@dataclass
class MaximalHypergraph:
    """Antichain of maximal hyperedges with per-(edge, y) reconstruction balls."""

    alphabet: Alphabet
    eps: float
    edges: tuple  # bitmasks in canonical order
    centers: np.ndarray  # (E, ny, d); NaN where no probable member exists
    radii: np.ndarray  # (E, ny); NaN likewise
    ny: int

    @property
    def membership(self) -> np.ndarray:
        n = self.alphabet.size
        return np.array(
            [[bool(e >> i & 1) for e in self.edges] for i in range(n)], dtype=bool
        )

    def members(self, idx: int) -> tuple:
        return tuple(
            self.alphabet.symbols[i]
            for i in _members(self.edges[idx], self.alphabet.size)
        )

    def edge_sets(self) -> list:
        return [frozenset(self.members(i)) for i in range(len(self.edges))]

    @property
    def fingerprint(self) -> str:
        canon = repr(tuple(_members(e, self.alphabet.size) for e in self.edges))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _reconstruction(fv, sup, edges):
    n, ny, d = fv.shape
    centers = np.full((len(edges), ny, d), np.nan)
    radii = np.full((len(edges), ny), np.nan)
    for e, mask in enumerate(edges):
        idx = _members(mask, n)
        for y in range(ny):
            rows = [i for i in idx if sup[i, y]]
            if not rows:
                continue
            ball = geometry.sec(fv[rows, y, :])
            centers[e, y] = ball.center
            radii[e, y] = ball.radius
    return centers, radii


def _resolve_eps(instance, eps, func_index):
    return instance.tolerances[func_index] if eps is None else float(eps)


def edge_valid(edge, instance: ProblemInstance, eps=None, func_index: int = 0) -> bool:
    """SEC condition for one candidate hyperedge (labels or index iterable)."""
    eps = _resolve_eps(instance, eps, func_index)
    alpha = instance.functions[func_index].alphabets[0]
    mask = 0
    for sym in edge:
        mask |= _bit(alpha.index(sym))
    if mask == 0:
        raise ValidationError("hyperedges are nonempty")
    fv, sup = function_arrays(instance, func_index)
    return _validity_checker(fv, sup, eps)(mask)


def maximal_edges(
    instance: ProblemInstance, eps=None, func_index: int = 0
) -> MaximalHypergraph:
    """Maximal hyperedge set for a point-to-point or side-information instance."""
    eps = _resolve_eps(instance, eps, func_index)
    fv, sup = function_arrays(instance, func_index)
    alpha = instance.functions[func_index].alphabets[0]
    if alpha.size > ENUM_CAP:
        raise ValidationError(f"alphabet size {alpha.size} over cap {ENUM_CAP}")
    valid = _validity_checker(fv, sup, eps)
    edges = _maximal_family(alpha.size, valid)
    # edge cover: guaranteed because singletons are always valid
    covered = 0
    for e in edges:
        covered |= e
    assert covered == (1 << alpha.size) - 1, "maximal edges do not cover the alphabet"
    centers, radii = _reconstruction(fv, sup, edges)
    return MaximalHypergraph(alpha, eps, tuple(edges), centers, radii, fv.shape[1])


def maximal_edges_from_arrays(alpha: Alphabet, fv, sup, eps) -> MaximalHypergraph:
    """Construction entry point for callers that build (fv, sup) directly."""
    valid = _validity_checker(fv, sup, eps)
    edges = _maximal_family(alpha.size, valid)
    centers, radii = _reconstruction(fv, sup, edges)
    return MaximalHypergraph(alpha, float(eps), tuple(edges), centers, radii, fv.shape[1])


def edges_overlap(h: MaximalHypergraph) -> bool:
    """True iff some symbol belongs to two or more edges."""
    seen = 0
    for e in h.edges:
        if seen & e:
            return True
        seen |= e
    return False


def condition1_holds(instance: ProblemInstance) -> bool:
    """Probability-pattern condition for non-overlapping maximal edges at eps = 0.

    For every y and every x1, x2 with f(x1, y) != f(x2, y), it must not happen
    that exactly one of p(x1, y), p(x2, y) is zero.
    """
    if instance.setting != "side_info":
        raise ValidationError("condition 1 applies to side_info instances")
    f = instance.functions[0]
    sup = instance.pmf.support
    n, ny = sup.shape
    for y in range(ny):
        for i in range(n):
            for j in range(i + 1, n):
                if (f.values_exact[i, y] == f.values_exact[j, y]).all():
                    continue
                if sup[i, y] != sup[j, y]:
                    return False
    return True


@dataclass
class HypergraphPair:
    """Per-terminal valid-edge families plus the joint admissibility matrix.

    The families keep every edge that is valid against the all-singletons
    opposing cover (the finest legal pair), subsets included: cross-edge
    feasibility is not monotone, so antichain reduction would discard support
    patterns the solvers need.
    """

    alphabets: tuple
    eps: float
    edges1: tuple
    edges2: tuple
    admissible: np.ndarray  # (E1, E2) bool
    centers: np.ndarray  # (E1, E2, d); NaN where the probable preimage is empty
    radii: np.ndarray  # (E1, E2)

    def membership(self, terminal: int) -> np.ndarray:
        edges = self.edges1 if terminal == 0 else self.edges2
        n = self.alphabets[terminal].size
        return np.array(
            [[bool(e >> i & 1) for e in edges] for i in range(n)], dtype=bool
        )

    def edge_sets(self, terminal: int) -> list:
        edges = self.edges1 if terminal == 0 else self.edges2
        alpha = self.alphabets[terminal]
        return [
            frozenset(alpha.symbols[i] for i in _members(e, alpha.size)) for e in edges
        ]


def maximal_pair(instance: ProblemInstance, eps=None) -> HypergraphPair:
    """Edge families and admissibility matrix for a distributed instance."""
    if instance.setting != "distributed":
        raise ValidationError("maximal_pair applies to distributed instances")
    eps = _resolve_eps(instance, eps, 0)
    f = instance.functions[0]
    a1, a2 = instance.pmf.axes
    families = []
    for t in range(2):
        fv, sup = _pair_arrays(instance, t)
        valid = _validity_checker(fv, sup, eps)
        families.append(_valid_family((a1, a2)[t].size, valid))
    e1, e2 = families
    sup = instance.pmf.support
    vals = f.values
    tol = eps + geometry.TOL
    adm = np.zeros((len(e1), len(e2)), dtype=bool)
    centers = np.full((len(e1), len(e2), f.dim), np.nan)
    radii = np.full((len(e1), len(e2)), np.nan)
    for i, m1 in enumerate(e1):
        idx1 = _members(m1, a1.size)
        for j, m2 in enumerate(e2):
            idx2 = _members(m2, a2.size)
            pts = [
                vals[x1, x2]
                for x1 in idx1
                for x2 in idx2
                if sup[x1, x2]
            ]
            if not pts:
                adm[i, j] = True
                continue
            ball = geometry.sec(np.asarray(pts))
            adm[i, j] = ball.radius <= tol
            centers[i, j] = ball.center
            radii[i, j] = ball.radius
    pair = HypergraphPair((a1, a2), eps, tuple(e1), tuple(e2), adm, centers, radii)
    _assert_pair_cover(pair, sup)
    return pair


def _assert_pair_cover(pair: HypergraphPair, sup: np.ndarray):
    # every probable (x1, x2) lies in at least one admissible edge pair
    m1 = pair.membership(0)
    m2 = pair.membership(1)
    for x1, x2 in np.argwhere(sup):
        ok = pair.admissible[np.ix_(m1[x1], m2[x2])]
        if not ok.any():
            raise AssertionError(
                f"no admissible pair covers probable tuple ({x1}, {x2})"
            )
