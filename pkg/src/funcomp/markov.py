"""k-letter upper bounds for stationary first-order Markov sources.

Two-stage scheme: code every (k+1)-th symbol losslessly (anchors), then
quantize the k symbols in between to hyperedges with a per-anchor-type test
channel. The per-source-symbol k-block rate is the block mutual information
divided by k, which makes the bound collapse to the single-letter rate for
i.i.d. chains.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import hypergraph as hg_mod
from . import solver
from .errors import BudgetError, ValidationError
from .model import Alphabet

SUPERSYMBOL_CAP = 10**4
SUPEREDGE_CAP = 10**4
ASSIGNMENT_CAP = 10**4


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of an irreducible aperiodic chain."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise ValidationError("transition matrix must be square")
    if np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValidationError("transition rows must sum to 1")
    _check_ergodic(P > 0)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    if pi.min() <= 0:
        raise ValidationError("stationary distribution is not strictly positive")
    if np.abs(pi @ P - pi).max() > 1e-10:
        raise ValidationError("stationary equation residual exceeds 1e-10")
    return pi / pi.sum()


def stationary(P: np.ndarray) -> np.ndarray:
    return stationary_distribution(P)


def _check_ergodic(adj: np.ndarray):
    n = adj.shape[0]

    def reach(a):
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.nonzero(a[u])[0]:
                if v not in seen:
                    seen.add(v)
                    stack.append(int(v))
        return seen

    if len(reach(adj)) != n or len(reach(adj.T)) != n:
        raise ValidationError("chain is reducible")
    # period = gcd over edges of level differences on a BFS tree
    level = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(adj[u])[0]:
                if int(v) not in level:
                    level[int(v)] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    g = 0
    for u in range(n):
        for v in np.nonzero(adj[u])[0]:
            g = np.gcd(g, level[u] + 1 - level[int(v)])
    if g != 1:
        raise ValidationError(f"chain is periodic with period {g}")


@dataclass
class MarkovModel:
    transition: np.ndarray
    pi: np.ndarray
    f_values: np.ndarray  # (n, d)
    eps: float | None = None
    k: int = 1
    symbols: tuple = ()

    @property
    def n(self) -> int:
        return self.transition.shape[0]

    def alphabet(self) -> Alphabet:
        return Alphabet(self.symbols if self.symbols else tuple(range(1, self.n + 1)))


def make_model(transition, f_values=None, eps=None, k=1, symbols=()) -> MarkovModel:
    P = np.asarray(transition, dtype=float)
    pi = stationary_distribution(P)
    n = P.shape[0]
    if f_values is None:
        f_values = np.arange(1, n + 1, dtype=float)[:, None]
    f_values = np.asarray(f_values, dtype=float)
    if f_values.ndim == 1:
        f_values = f_values[:, None]
    if f_values.shape[0] != n:
        raise ValidationError("function table size does not match the state space")
    if k < 1:
        raise ValidationError("block parameter k must be >= 1")
    return MarkovModel(P, pi, f_values, eps, int(k), tuple(symbols))


def model_from_instance(instance) -> MarkovModel:
    if instance.setting != "markov":
        raise ValidationError("expected a markov instance")
    f = instance.functions[0]
    return make_model(
        instance.markov.dense(),
        f.values,
        instance.tolerances[0],
        instance.markov.k,
        instance.pmf.axes[0].symbols,
    )


def birth_death(n: int, lam: float, mu: float, eps=None, k: int = 1) -> MarkovModel:
    """Birth-death chain on {1..n}; boundary self-loops absorb the missing move."""
    if n < 2:
        raise ValidationError("birth-death chain needs n >= 2")
    if lam <= 0 or mu <= 0 or lam + mu > 1:
        raise ValidationError("need lambda, mu > 0 with lambda + mu <= 1")
    P = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            P[i, i + 1] = lam
        if i - 1 >= 0:
            P[i, i - 1] = mu
        P[i, i] = 1.0 - P[i].sum()
    return make_model(P, None, eps, k)


def _model_hypergraph(model: MarkovModel, eps: float):
    fv = model.f_values[:, None, :]
    sup = (model.pi > 0)[:, None]
    return hg_mod.maximal_edges_from_arrays(model.alphabet(), fv, sup, eps)


def cond_entropy_skip(model: MarkovModel, k: int) -> float:
    """Anchor rate numerator H(X_{k+2} | X_1) in bits."""
    Pk1 = np.linalg.matrix_power(model.transition, k + 1)
    h = 0.0
    for i in range(model.n):
        h += model.pi[i] * solver._entropy_bits(Pk1[i])
    return float(h)


@dataclass
class KtileResult:
    value: float  # bits per source symbol
    per_type: dict  # (i, j) -> (weight, block rate in bits)
    hypergraph: object


def ktile_rate(model: MarkovModel, k: int, eps=None, *, seed=0) -> KtileResult:
    """Per-symbol k-block rate between anchors, weighted over anchor types."""
    eps = model.eps if eps is None else float(eps)
    if eps is None:
        raise ValidationError("tolerance eps is not set")
    n = model.n
    if n**k > SUPERSYMBOL_CAP:
        raise BudgetError(f"{n}^{k} supersymbols exceed cap {SUPERSYMBOL_CAP}")
    hg = _model_hypergraph(model, eps)
    E = len(hg.edges)
    if E**k > SUPEREDGE_CAP:
        raise BudgetError(f"{E}^{k} superedges exceed cap {SUPEREDGE_CAP}")
    memb = hg.membership  # (n, E)
    P = model.transition
    Pk1 = np.linalg.matrix_power(P, k + 1)
    supersyms = list(itertools.product(range(n), repeat=k))
    superedges = list(itertools.product(range(E), repeat=k))
    edge_pos = {w: i for i, w in enumerate(superedges)}
    mask = np.zeros((len(supersyms), len(superedges)), dtype=bool)
    for ui, u in enumerate(supersyms):
        allowed = [np.nonzero(memb[x])[0] for x in u]
        for combo in itertools.product(*allowed):
            mask[ui, edge_pos[tuple(int(e) for e in combo)]] = True
    per_type = {}
    total = 0.0
    for i in range(n):
        for j in range(n):
            weight = model.pi[i] * Pk1[i, j]
            if weight <= 0:
                continue
            probs = np.empty(len(supersyms))
            for ui, u in enumerate(supersyms):
                path = P[i, u[0]]
                for a, b in zip(u, u[1:]):
                    path *= P[a, b]
                path *= P[u[-1], j]
                probs[ui] = path
            z = probs.sum()
            if z <= 0:
                continue
            probs /= z
            act = probs > 0
            obj, _, _, _, _ = solver._solve_p2p_mask(
                probs[act], mask[act], seed, restarts=1
            )
            per_type[(i, j)] = (float(weight), float(obj))
            total += weight * obj / k
    return KtileResult(float(total), per_type, hg)


@dataclass
class MarkovBound:
    value: float
    tile_term: float
    anchor_term: float
    ktile: float
    cond_entropy: float
    k: int


def ub_markov(model: MarkovModel, k: int, eps=None, *, seed=0) -> MarkovBound:
    """Rate upper bound k/(k+1) * ktile + H(X_{k+2}|X_1)/(k+1), with both terms."""
    kt = ktile_rate(model, k, eps, seed=seed)
    ce = cond_entropy_skip(model, k)
    tile = k / (k + 1) * kt.value
    anchor = ce / (k + 1)
    return MarkovBound(tile + anchor, tile, anchor, kt.value, ce, k)


@dataclass
class SparsityReport:
    assignment: tuple  # symbol index -> edge index
    s: int
    dim_reduced: int
    dim_naive: int
    k: int
    edges: tuple
    strategy: str


def _assignment_sparsity(assign, model: MarkovModel, edges, memb) -> int:
    E = len(edges)
    blocks = [[] for _ in range(E)]
    for x, e in enumerate(assign):
        blocks[e].append(x)
    succ = np.zeros((E, E), dtype=bool)
    sup = (model.pi[:, None] * model.transition) > 0
    for e, blk in enumerate(blocks):
        if not blk:
            continue
        nxt = sup[blk].any(axis=0)  # states reachable from the block
        for x2 in np.nonzero(nxt)[0]:
            succ[e, assign[x2]] = True
    counts = succ.sum(axis=1)
    return int(counts.max())


def sparsity(
    model: MarkovModel, strategy: str = "greedy-partition", assignment=None, eps=None
) -> SparsityReport:
    """Sparsity s of the hyperedge process under a symbol-to-edge assignment.

    The default searches assignments (exhaustively up to a cap, greedily
    beyond) for the one minimizing s; a user-supplied assignment is validated
    and reported as-is.
    """
    eps = model.eps if eps is None else float(eps)
    if eps is None:
        raise ValidationError("tolerance eps is not set")
    hg = _model_hypergraph(model, eps)
    memb = hg.membership
    n, E = memb.shape
    k = model.k
    if assignment is not None:
        assign = tuple(int(a) for a in assignment)
        if len(assign) != n or not all(memb[x, e] for x, e in enumerate(assign)):
            raise ValidationError(
                "assignment must map every symbol into an edge containing it"
            )
        strategy = "user-supplied"
    elif strategy == "user-supplied":
        raise ValidationError("user-supplied strategy requires an assignment")
    elif strategy == "greedy-partition":
        choices = [np.nonzero(memb[x])[0] for x in range(n)]
        count = 1
        for ch in choices:
            count *= len(ch)
        if count <= ASSIGNMENT_CAP:
            best = None
            for cand in itertools.product(*choices):
                s = _assignment_sparsity(cand, model, hg.edges, memb)
                if best is None or s < best[0]:
                    best = (s, cand)
            assign = best[1]
        else:
            assign = _greedy_assignment(model, memb, hg.edges)
    else:
        raise ValidationError(f"unknown assignment strategy {strategy!r}")
    s = _assignment_sparsity(assign, model, hg.edges, memb)
    return SparsityReport(
        tuple(int(a) for a in assign),
        s,
        int((s * n) ** k),
        int(n ** (2 * k)),
        k,
        hg.edges,
        strategy,
    )


def _greedy_assignment(model, memb, edges):
    n, E = memb.shape
    assign = []
    for x in range(n):
        opts = np.nonzero(memb[x])[0]
        best = None
        for e in opts:
            cand = assign + [e] + [
                int(np.nonzero(memb[x2])[0][0]) for x2 in range(x + 1, n)
            ]
            s = _assignment_sparsity(cand, model, edges, memb)
            if best is None or s < best[0]:
                best = (s, e)
        assign.append(best[1])
    return tuple(int(a) for a in assign)
