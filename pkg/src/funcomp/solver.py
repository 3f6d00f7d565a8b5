"""Rate and rate-region solvers over support-restricted test channels.

All objectives are mutual-information minimizations with hard support masks
(channel mass only on hyperedges containing the source symbol, plus joint
admissibility in the distributed setting). Alternating minimization uses the
variational form of each objective, so every update is an exact coordinate
minimization in log space. Logarithms are base 2; 0 log 0 = 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import hypergraph as hg_mod
from . import geometry
from .errors import BudgetError, ValidationError

CONV_TOL = 1e-10
MAX_ITER = 100_000
RESTARTS_SCALAR = 16
RESTARTS_MULTI = 32
DET_ENUM_CAP = 10**6
NEG_INF = -1e30


# ---------------------------------------------------------------------------
# information-theoretic helpers (entropy-based so zeros never produce NaN)


def _clip0(x: float) -> float:
    return float(x) if x > 0 else 0.0


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _row_entropies(c: np.ndarray) -> np.ndarray:
    t = np.where(c > 0, c * np.log2(np.where(c > 0, c, 1.0)), 0.0)
    return -t.sum(axis=-1)


def _safe_log(q: np.ndarray) -> np.ndarray:
    return np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), NEG_INF)


def _uniform_rows(mask: np.ndarray) -> np.ndarray:
    c = mask.astype(float)
    return c / c.sum(axis=-1, keepdims=True)


def _dirichlet_rows(mask: np.ndarray, rng) -> np.ndarray:
    g = rng.gamma(1.0, size=mask.shape) * mask
    s = g.sum(axis=-1, keepdims=True)
    bad = (s == 0).reshape(-1)
    if bad.any():
        u = _uniform_rows(mask)
        g = np.where(s == 0, u * 1.0, g)
        s = g.sum(axis=-1, keepdims=True)
    return g / s


def _normalize_exp(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-normalize exp(logits) over the mask, in a numerically stable way."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(np.where(mask, z - zmax, -np.inf))
    e = np.where(mask, e, 0.0)
    s = e.sum(axis=-1, keepdims=True)
    out = np.where(s > 0, e / np.where(s > 0, s, 1.0), _uniform_rows(mask))
    return out


# ---------------------------------------------------------------------------
# result containers


@dataclass
class TestChannel:
    """Conditional pmf from source symbols (rows) to hyperedges (columns)."""

    probs: np.ndarray
    mask: np.ndarray
    edges: tuple  # column labels: hyperedge bitmasks

    def __post_init__(self):
        if ((self.probs < 0) | (self.probs > 1)).any():
            raise ValidationError("channel entries outside [0, 1]")
        if np.abs(self.probs.sum(axis=1) - 1.0).max() > 1e-10:
            raise ValidationError("channel rows do not sum to 1")
        if (self.probs[~self.mask] != 0).any():
            raise ValidationError("channel mass outside the support mask")


@dataclass
class RateResult:
    rate: float
    channels: tuple
    weights: tuple = (1.0,)
    diagnostics: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


@dataclass
class RegionPoint:
    r1: float
    r2: float
    source: str = ""
    extras: dict = field(default_factory=dict)


@dataclass
class RateRegion:
    """Pareto frontier vertices after time-sharing convexification."""

    points: tuple
    closure: str = "lower-left closed; convexified by time sharing"
    diagnostics: dict = field(default_factory=dict)

    def frontier_value(self, r1: float) -> float:
        """Least achievable R2 at the given R1 (inf left of the frontier)."""
        pts = self.points
        if not pts:
            return np.inf
        if r1 < pts[0].r1 - 1e-9:
            return np.inf
        r1 = max(r1, pts[0].r1)
        if r1 >= pts[-1].r1:
            return pts[-1].r2
        for a, b in zip(pts, pts[1:]):
            if a.r1 <= r1 <= b.r1:
                if b.r1 - a.r1 < 1e-15:
                    return min(a.r2, b.r2)
                t = (r1 - a.r1) / (b.r1 - a.r1)
                return a.r2 + t * (b.r2 - a.r2)
        return pts[-1].r2

    def support_point(self, mu: float) -> RegionPoint:
        """Frontier vertex minimizing mu*R1 + (1-mu)*R2 (ties -> smaller R1)."""
        best = min(self.points, key=lambda p: (mu * p.r1 + (1 - mu) * p.r2, p.r1))
        return best

    def min_sum(self) -> float:
        return min(p.r1 + p.r2 for p in self.points)


def _pareto_lower_hull(points) -> list:
    """Vertices of the lower-left convex boundary of the upward closure."""
    pts = sorted(points, key=lambda p: (p.r1, p.r2))
    pareto = []
    best = np.inf
    for p in pts:
        if p.r2 < best - 1e-12:
            pareto.append(p)
            best = p.r2
    hull = []
    for p in pareto:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b.r1 - a.r1) * (p.r2 - a.r2) - (b.r2 - a.r2) * (p.r1 - a.r1)
            if cross <= 1e-12:  # b is above or on segment a-p
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


# ---------------------------------------------------------------------------
# point-to-point: min I(X;W) over masked channels (convex; BA alternation)


def _ba_p2p(px, mask, init, tol=CONV_TOL, max_iter=MAX_ITER):
    c = np.where(mask, init, 0.0)
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        q = px @ c
        w = np.where(mask, q[None, :], 0.0)
        s = w.sum(axis=1, keepdims=True)
        c = np.where(s > 0, w / np.where(s > 0, s, 1.0), _uniform_rows(mask))
        obj = _entropy_bits(px @ c) - float(px @ _row_entropies(c))
        if abs(prev - obj) < tol:
            return obj, c, it, abs(prev - obj)
        prev = obj
    return prev, c, it, 0.0


def _solve_p2p_mask(px, mask, seed, restarts, tol=CONV_TOL):
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        init = _uniform_rows(mask) if r == 0 else _dirichlet_rows(mask, rng)
        obj, c, iters, delta = _ba_p2p(px, mask, init, tol)
        if best is None or obj < best[0] - 1e-14:
            best = (obj, c, iters, delta, r)
    return best


def rate_p2p(instance, eps=None, *, seed=0, restarts=RESTARTS_SCALAR, hg=None) -> RateResult:
    """Optimal point-to-point rate over the maximal hypergraph's channels."""
    if instance.setting not in ("p2p", "mdc", "successive_refinement", "markov"):
        raise ValidationError(f"rate_p2p does not apply to {instance.setting!r}")
    hg = hg_mod.maximal_edges(instance, eps) if hg is None else hg
    px = instance.pmf.dense().reshape(-1)
    mask = hg.membership
    act = px > 0
    obj, c_act, iters, delta, r = _solve_p2p_mask(px[act], mask[act], seed, restarts)
    c = _uniform_rows(mask)
    c[act] = c_act
    chan = TestChannel(c, mask, hg.edges)
    return RateResult(
        _clip0(obj),
        (chan,),
        diagnostics={"iterations": iters, "final_delta": delta, "restart": r},
        extras={"hypergraph": hg, "decoder": hg.centers},
    )


# ---------------------------------------------------------------------------
# side information: min I(X;W|Y) over masked channels (convex; BA alternation)


def _ba_side(P, pygx, mask, init, tol=CONV_TOL, max_iter=MAX_ITER):
    # P: joint p(x, y) over active rows/cols; pygx: p(y|x)
    py = P.sum(axis=0)
    pxgy = P / py[None, :]
    px = P.sum(axis=1)
    c = np.where(mask, init, 0.0)
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        qwy = pxgy.T @ c  # (ny, E): p(w|y)
        logits = pygx @ _safe_log(qwy)
        c = _normalize_exp(logits, mask)
        qwy = pxgy.T @ c
        hw_y = float(py @ _row_entropies(qwy))
        hw_x = float(px @ _row_entropies(c))
        obj = hw_y - hw_x
        if abs(prev - obj) < tol:
            return obj, c, it, abs(prev - obj)
        prev = obj
    return prev, c, it, 0.0


def rate_side_info(
    instance, eps=None, *, seed=0, restarts=RESTARTS_SCALAR, hg=None
) -> RateResult:
    """Optimal side-information rate min I(X;W|Y) with the W-X-Y chain."""
    if instance.setting != "side_info":
        raise ValidationError("rate_side_info applies to side_info instances")
    hg = hg_mod.maximal_edges(instance, eps) if hg is None else hg
    pxy = instance.pmf.dense()
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    act = px > 0
    ycols = py > 0
    P = pxy[np.ix_(act, ycols)]
    pygx = P / P.sum(axis=1, keepdims=True)
    mask = hg.membership
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        init = _uniform_rows(mask[act]) if r == 0 else _dirichlet_rows(mask[act], rng)
        obj, c_act, iters, delta = _ba_side(P, pygx, mask[act], init)
        if best is None or obj < best[0] - 1e-14:
            best = (obj, c_act, iters, delta, r)
    obj, c_act, iters, delta, r = best
    c = _uniform_rows(mask)
    c[act] = c_act
    chan = TestChannel(c, mask, hg.edges)
    return RateResult(
        _clip0(obj),
        (chan,),
        diagnostics={"iterations": iters, "final_delta": delta, "restart": r},
        extras={"hypergraph": hg, "decoder": hg.centers},
    )


def rate_separation(instance, eps: float = 0.0) -> RateResult:
    """Quantize-then-compress rate H(W|Y) under Condition 1 at eps = 0."""
    if eps != 0.0:
        raise ValidationError("separation applies at eps = 0 only")
    if not hg_mod.condition1_holds(instance):
        raise ValidationError("Condition 1 fails: separation is not optimal here")
    hg = hg_mod.maximal_edges(instance, 0.0)
    if hg_mod.edges_overlap(hg):
        raise ValidationError("maximal edges overlap; deterministic quantization invalid")
    pxy = instance.pmf.dense()
    n, ny = pxy.shape
    memb = hg.membership
    c = memb.astype(float)  # each symbol in exactly one edge
    pwy = c.T @ pxy  # (E, ny)
    py = pxy.sum(axis=0)
    hw_y = 0.0
    for y in range(ny):
        if py[y] > 0:
            hw_y += py[y] * _entropy_bits(pwy[:, y] / py[y])
    chan = TestChannel(c, memb, hg.edges)
    return RateResult(
        float(hw_y),
        (chan,),
        diagnostics={"method": "deterministic quantization"},
        extras={"hypergraph": hg, "decoder": hg.centers},
    )


def rate_surrogate(instance, g, delta: float, eps: float, *, seed=0) -> RateResult:
    """Upper bound via a delta-approximation g: solve at eps - delta on g's graph."""
    if delta > eps:
        raise ValidationError("surrogate slack delta must satisfy delta <= eps")
    f = instance.functions[0]
    if not geometry.is_delta_approximation(g, f, delta):
        raise ValidationError("g is not a delta-approximation to the target")
    shadow = _with_function(instance, g)
    hg = hg_mod.maximal_edges(shadow, eps - delta)
    if instance.setting == "side_info":
        res = rate_side_info(shadow, eps - delta, seed=seed, hg=hg)
    else:
        res = rate_p2p(shadow, eps - delta, seed=seed, hg=hg)
    _check_surrogate_distortion(instance, hg, eps)
    res.diagnostics["surrogate"] = g.name
    res.diagnostics["solved_at_eps"] = eps - delta
    return res


def _with_function(instance, func):
    from .model import ProblemInstance

    return ProblemInstance(
        instance.setting,
        instance.pmf,
        (func,) + instance.functions[1:],
        instance.tolerances,
        instance.allow_zero_marginals,
        instance.markov,
    )


def _check_surrogate_distortion(instance, hg, eps):
    # the surrogate graph's centers must approximate the *target* within eps
    fv, sup = hg_mod.function_arrays(instance, 0)
    n, ny, _ = fv.shape
    for e, mask in enumerate(hg.edges):
        for y in range(ny):
            for i in range(n):
                if mask >> i & 1 and sup[i, y]:
                    dev = np.sqrt(((fv[i, y] - hg.centers[e, y]) ** 2).sum())
                    if dev > eps + geometry.TOL:
                        raise ValidationError(
                            "surrogate reconstruction misses the target tolerance"
                        )


def rate_lipschitz(instance, L: float, eps: float, *, seed=0) -> RateResult:
    """Upper bound for L-Lipschitz targets: solve the identity at eps / L."""
    if L <= 0:
        raise ValidationError("Lipschitz constant must be positive")
    if not geometry.lipschitz_check(instance, L):
        raise ValidationError(f"function is not {L}-Lipschitz on probable pairs")
    from .model import FunctionTable

    alpha = instance.pmf.axes[0]
    emb = alpha.embedding()
    if emb is None:
        raise ValidationError("source alphabet has no numeric embedding")
    f = instance.functions[0]
    if instance.setting == "side_info":
        vals = np.tile(np.asarray(emb)[:, None], (1, instance.pmf.axes[1].size))
        ident = FunctionTable("identity", f.axes, f.alphabets, vals.tolist())
    else:
        ident = FunctionTable("identity", f.axes, f.alphabets, list(emb))
    shadow = _with_function(instance, ident)
    hg = hg_mod.maximal_edges(shadow, eps / L)
    if instance.setting == "side_info":
        res = rate_side_info(shadow, eps / L, seed=seed, hg=hg)
    else:
        res = rate_p2p(shadow, eps / L, seed=seed, hg=hg)
    res.diagnostics["lipschitz_L"] = L
    res.diagnostics["solved_at_eps"] = eps / L
    return res


# ---------------------------------------------------------------------------
# distributed coding: product channels with joint admissibility


def _consistency_mask(memb_self, adm_rows, supp_other, sup_pairs):
    """Edges of this terminal compatible with the other terminal's supports.

    adm_rows[e_self, e_other] is the admissibility matrix oriented so the
    first axis is this terminal. sup_pairs[x_self, x_other] marks probable
    tuples.
    """
    bad_edge_vs_x = (~adm_rows[:, None, :] & supp_other[None, :, :]).any(axis=2)
    # bad_edge_vs_x[e_self, x_other]: some supported opposing edge clashes
    viol = sup_pairs.astype(float) @ bad_edge_vs_x.T.astype(float) > 0
    return memb_self & ~viol


def _bt_stats(pxx, c1, c2):
    q12 = c1.T @ pxx @ c2
    q1 = q12.sum(axis=1)
    q2 = q12.sum(axis=0)
    px1 = pxx.sum(axis=1)
    px2 = pxx.sum(axis=0)
    h12 = _entropy_bits(q12.reshape(-1))
    h1 = _entropy_bits(q1)
    h2 = _entropy_bits(q2)
    hw1_x = float(px1 @ _row_entropies(c1))
    hw2_x = float(px2 @ _row_entropies(c2))
    a1 = (h12 - h2) - hw1_x  # I(X1;W1|W2)
    a2 = (h12 - h1) - hw2_x  # I(X2;W2|W1)
    s = h12 - hw1_x - hw2_x  # I(X1,X2;W1,W2)
    return a1, a2, s, q12


def _bt_alternate(pxx, memb1, memb2, adm, gammas, c1, c2, tol=CONV_TOL, max_iter=2000):
    ga, gb, gs = gammas
    px1 = pxx.sum(axis=1)
    px2 = pxx.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p2g1 = np.where(px1[:, None] > 0, pxx / np.where(px1[:, None] > 0, px1[:, None], 1.0), 0.0)
        p1g2 = np.where(px2[None, :] > 0, pxx / np.where(px2[None, :] > 0, px2[None, :], 1.0), 0.0).T
    sup_pairs = pxx > 0
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # support-consistency masks from the current supports; the own-symbol
        # singleton is admissible against every family edge, so rows stay nonempty
        M1 = _consistency_mask(memb1, adm, c2 > 0, sup_pairs)
        q12 = c1.T @ pxx @ c2
        q1 = q12.sum(axis=1)
        q2 = q12.sum(axis=0)
        lnq12 = _safe_log(q12)
        lnq1g2 = _safe_log(np.where(q2[None, :] > 0, q12 / np.where(q2[None, :] > 0, q2[None, :], 1.0), 0.0))
        lnq2g1 = _safe_log(np.where(q1[:, None] > 0, q12 / np.where(q1[:, None] > 0, q1[:, None], 1.0), 0.0))
        W = ga * lnq1g2 + gb * lnq2g1 + gs * lnq12
        T1 = p2g1 @ (c2 @ W.T)
        if ga + gs > 0:
            c1 = _normalize_exp(T1 / (ga + gs), M1)
        else:
            c1 = _argmax_rows(T1, M1)
        M2 = _consistency_mask(memb2, adm.T, c1 > 0, sup_pairs.T)
        q12 = c1.T @ pxx @ c2
        q1 = q12.sum(axis=1)
        q2 = q12.sum(axis=0)
        lnq12 = _safe_log(q12)
        lnq1g2 = _safe_log(np.where(q2[None, :] > 0, q12 / np.where(q2[None, :] > 0, q2[None, :], 1.0), 0.0))
        lnq2g1 = _safe_log(np.where(q1[:, None] > 0, q12 / np.where(q1[:, None] > 0, q1[:, None], 1.0), 0.0))
        W = ga * lnq1g2 + gb * lnq2g1 + gs * lnq12
        T2 = p1g2 @ (c1 @ W)
        if gb + gs > 0:
            c2 = _normalize_exp(T2 / (gb + gs), M2)
        else:
            c2 = _argmax_rows(T2, M2)
        a1, a2, s, _ = _bt_stats(pxx, c1, c2)
        obj = ga * a1 + gb * a2 + gs * s
        if abs(prev - obj) < tol:
            break
        prev = obj
    return c1, c2, it


def _argmax_rows(T, mask):
    z = np.where(mask, T, -np.inf)
    out = np.zeros_like(T)
    out[np.arange(T.shape[0]), z.argmax(axis=1)] = 1.0
    return out


def _det_pairs(pxx, memb1, memb2, adm, cap=DET_ENUM_CAP):
    """Deterministic feasible assignment pairs, or None when over the cap."""
    n1, E1 = memb1.shape
    n2, E2 = memb2.shape
    sup = pxx > 0
    choices1 = [np.nonzero(memb1[x])[0] for x in range(n1)]
    choices2 = [np.nonzero(memb2[x])[0] for x in range(n2)]
    est = 1.0
    for ch in choices1 + choices2:
        est *= len(ch)
    if est > cap:
        return None
    out = []
    for a1 in itertools.product(*choices1):
        allowed2 = []
        feasible = True
        for x2 in range(n2):
            partners = np.nonzero(sup[:, x2])[0]
            opts = [
                e2
                for e2 in choices2[x2]
                if all(adm[a1[x1], e2] for x1 in partners)
            ]
            if not opts:
                feasible = False
                break
            allowed2.append(opts)
        if not feasible:
            continue
        for a2 in itertools.product(*allowed2):
            out.append((a1, a2))
    return out


def _det_channels(a, n, E):
    c = np.zeros((n, E))
    c[np.arange(n), list(a)] = 1.0
    return c


def _random_feasible_init(rng, pxx, memb1, memb2, adm):
    n1, E1 = memb1.shape
    n2, E2 = memb2.shape
    sup = pxx > 0
    a1 = [rng.choice(np.nonzero(memb1[x])[0]) for x in range(n1)]
    c1 = _det_channels(a1, n1, E1)
    # rows are nonempty: the own-symbol singleton is admissible vs any family edge
    M2 = _consistency_mask(memb2, adm.T, c1 > 0, sup.T)
    c2 = _dirichlet_rows(M2, rng)
    M1 = _consistency_mask(memb1, adm, c2 > 0, sup)
    c1 = _dirichlet_rows(M1, rng)
    return c1, c2


def _pair_setup(instance, eps, pair):
    pair = hg_mod.maximal_pair(instance, eps) if pair is None else pair
    pxx = instance.pmf.dense()
    memb1 = pair.membership(0)
    memb2 = pair.membership(1)
    return pair, pxx, memb1, memb2


def sum_rate_distributed(
    instance, eps=None, *, seed=0, restarts=RESTARTS_MULTI, pair=None
) -> RateResult:
    """Minimal sum-rate I(X1,X2;W1,W2) over admissible product channels."""
    if instance.setting != "distributed":
        raise ValidationError("sum_rate_distributed applies to distributed instances")
    pair, pxx, memb1, memb2 = _pair_setup(instance, eps, pair)
    dets = _det_pairs(pxx, memb1, memb2, pair.admissible)
    rng = np.random.default_rng(seed)
    inits = []
    if dets is not None:
        scored = []
        for a1, a2 in dets:
            c1 = _det_channels(a1, *memb1.shape)
            c2 = _det_channels(a2, *memb2.shape)
            _, _, s, _ = _bt_stats(pxx, c1, c2)
            scored.append((s, a1, a2))
        scored.sort(key=lambda t: t[0])
        for s, a1, a2 in scored[:8]:
            inits.append(
                (_det_channels(a1, *memb1.shape), _det_channels(a2, *memb2.shape))
            )
    while len(inits) < restarts:
        inits.append(_random_feasible_init(rng, pxx, memb1, memb2, pair.admissible))
    best = None
    for r, (c1, c2) in enumerate(inits):
        c1, c2, iters = _bt_alternate(
            pxx, memb1, memb2, pair.admissible, (0.0, 0.0, 1.0), c1.copy(), c2.copy()
        )
        _, _, s, _ = _bt_stats(pxx, c1, c2)
        if best is None or s < best[0] - 1e-14:
            best = (s, c1, c2, r, iters)
    s, c1, c2, r, iters = best
    ch1 = TestChannel(c1, memb1, pair.edges1)
    ch2 = TestChannel(c2, memb2, pair.edges2)
    return RateResult(
        _clip0(s),
        (ch1, ch2),
        diagnostics={
            "restart": r,
            "iterations": iters,
            "deterministic_candidates": None if dets is None else len(dets),
        },
        extras={"pair": pair, "decoder": pair.centers},
    )


def _pentagon_corners(a1, a2, s, source, extras):
    c_a = RegionPoint(_clip0(a1), _clip0(max(s - a1, a2)), source, extras)
    c_b = RegionPoint(_clip0(max(s - a2, a1)), _clip0(a2), source, extras)
    return [c_a, c_b]


def region_distributed(
    instance,
    eps=None,
    weights=None,
    *,
    seed=0,
    restarts=RESTARTS_MULTI,
    pair=None,
) -> RateRegion:
    """Berger-Tung-form achievable frontier over admissible product channels."""
    if instance.setting != "distributed":
        raise ValidationError("region_distributed applies to distributed instances")
    weights = np.linspace(0.0, 1.0, 33) if weights is None else np.asarray(weights, float)
    if weights.size == 0:
        raise ValidationError("empty weight grid")
    pair, pxx, memb1, memb2 = _pair_setup(instance, eps, pair)
    candidates = []
    dets = _det_pairs(pxx, memb1, memb2, pair.admissible)
    if dets is not None:
        for a1, a2 in dets:
            c1 = _det_channels(a1, *memb1.shape)
            c2 = _det_channels(a2, *memb2.shape)
            v1, v2, s, _ = _bt_stats(pxx, c1, c2)
            candidates += _pentagon_corners(
                v1, v2, s, "deterministic", {"channels": (c1, c2)}
            )
    rng = np.random.default_rng(seed)
    for mu in weights:
        m = min(max(float(mu), 1e-3), 1 - 1e-3)
        gammas = (2 * m - 1, 0.0, 1 - m) if m >= 0.5 else (0.0, 1 - 2 * m, m)
        for r in range(restarts):
            if r == 0:
                c1, c2 = _uniform_rows(memb1), _uniform_rows(memb2)
            else:
                c1, c2 = _random_feasible_init(rng, pxx, memb1, memb2, pair.admissible)
            c1, c2, _ = _bt_alternate(
                pxx, memb1, memb2, pair.admissible, gammas, c1, c2
            )
            v1, v2, s, _ = _bt_stats(pxx, c1, c2)
            candidates += _pentagon_corners(
                v1, v2, s, f"scalarized mu={mu:.4f}", {"channels": (c1, c2)}
            )
    hull = _pareto_lower_hull(candidates)
    return RateRegion(
        tuple(hull),
        diagnostics={
            "weights": len(weights),
            "deterministic_candidates": None if dets is None else len(dets),
            "pair": pair,
        },
    )


def region_independent(
    instance, eps=None, weights=None, *, seed=0, restarts=RESTARTS_MULTI, pair=None
) -> RateRegion:
    """Tight region for independent sources: per-terminal rates I(X_i;W_i)."""
    if instance.setting != "distributed":
        raise ValidationError("region_independent applies to distributed instances")
    pxx = instance.pmf.dense()
    px1 = pxx.sum(axis=1)
    px2 = pxx.sum(axis=0)
    if np.abs(pxx - np.outer(px1, px2)).max() > 1e-12:
        raise ValidationError("sources are not independent")
    weights = np.linspace(0.0, 1.0, 33) if weights is None else np.asarray(weights, float)
    pair, pxx, memb1, memb2 = _pair_setup(instance, eps, pair)
    candidates = []
    dets = _det_pairs(pxx, memb1, memb2, pair.admissible)
    if dets is not None:
        for a1, a2 in dets:
            c1 = _det_channels(a1, *memb1.shape)
            c2 = _det_channels(a2, *memb2.shape)
            i1 = _entropy_bits(px1 @ c1) - float(px1 @ _row_entropies(c1))
            i2 = _entropy_bits(px2 @ c2) - float(px2 @ _row_entropies(c2))
            candidates.append(
                RegionPoint(_clip0(i1), _clip0(i2), "deterministic", {"channels": (c1, c2)})
            )
    rng = np.random.default_rng(seed)
    for mu in weights:
        m = min(max(float(mu), 1e-3), 1 - 1e-3)
        for r in range(restarts):
            if r == 0:
                c1, c2 = _uniform_rows(memb1), _uniform_rows(memb2)
            else:
                c1, c2 = _random_feasible_init(rng, pxx, memb1, memb2, pair.admissible)
            c1, c2, _ = _bt_alternate(
                pxx, memb1, memb2, pair.admissible, (m, 1 - m, 0.0), c1, c2
            )
            i1 = _entropy_bits(px1 @ c1) - float(px1 @ _row_entropies(c1))
            i2 = _entropy_bits(px2 @ c2) - float(px2 @ _row_entropies(c2))
            candidates.append(
                RegionPoint(_clip0(i1), _clip0(i2), f"scalarized mu={mu:.4f}", {"channels": (c1, c2)})
            )
    hull = _pareto_lower_hull(candidates)
    return RateRegion(tuple(hull), diagnostics={"pair": pair})


# ---------------------------------------------------------------------------
# two-stage channels (successive refinement and cascade)


def _two_stage_alternate(px, maskA, maskB, wA, wB, cA, cB, tol=CONV_TOL, max_iter=5000):
    """Minimize wA*I(X;A) + wB*I(X;B|A) over p(a|x) (maskA) and p(b|x,a) (maskB)."""
    n, EA = maskA.shape
    EB = maskB.shape[1]
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        qA = px @ cA
        joint = (px[:, None] * cA)[:, :, None] * cB  # (n, EA, EB)
        qAB = joint.sum(axis=0)  # (EA, EB)
        qBgA = np.where(qA[:, None] > 0, qAB / np.where(qA[:, None] > 0, qA[:, None], 1.0), 0.0)
        # B-step: rows proportional to q(b|a) on the mask
        if wB > 0:
            cB = _normalize_exp(
                np.broadcast_to(_safe_log(qBgA)[None, :, :], (n, EA, EB)),
                np.broadcast_to(maskB[:, None, :], (n, EA, EB)),
            )
        else:
            cB = np.broadcast_to(
                _uniform_rows(maskB)[:, None, :], (n, EA, EB)
            ).copy()
        # A-step
        lnc = np.where(cB > 0, np.log(np.where(cB > 0, cB, 1.0)), 0.0)
        K = (cB * (lnc - _safe_log(qBgA)[None, :, :])).sum(axis=2)  # (n, EA)
        if wA > 0:
            logits = _safe_log(qA)[None, :] - (wB / wA) * K
            cA = _normalize_exp(logits, maskA)
        else:
            cA = _argmax_rows(-K, maskA)
        qA = px @ cA
        joint = (px[:, None] * cA)[:, :, None] * cB
        qAB = joint.sum(axis=0)
        qBgA = np.where(qA[:, None] > 0, qAB / np.where(qA[:, None] > 0, qA[:, None], 1.0), 0.0)
        IA = _entropy_bits(qA) - float(px @ _row_entropies(cA))
        hB_A = 0.0
        for a in range(EA):
            if qA[a] > 0:
                hB_A += qA[a] * _entropy_bits(qBgA[a])
        hB_AX = float((px[:, None] * cA * _row_entropies(cB)).sum())
        Icond = hB_A - hB_AX
        obj = wA * IA + wB * Icond
        if abs(prev - obj) < tol:
            break
        prev = obj
    qA = px @ cA
    joint = (px[:, None] * cA)[:, :, None] * cB
    qAB = joint.sum(axis=0)
    qBgA = np.where(qA[:, None] > 0, qAB / np.where(qA[:, None] > 0, qA[:, None], 1.0), 0.0)
    IA = _entropy_bits(qA) - float(px @ _row_entropies(cA))
    hB_A = 0.0
    for a in range(EA):
        if qA[a] > 0:
            hB_A += qA[a] * _entropy_bits(qBgA[a])
    hB_AX = float((px[:, None] * cA * _row_entropies(cB)).sum())
    Icond = hB_A - hB_AX
    return cA, cB, _clip0(IA), _clip0(Icond), it


def _two_stage_solve(px, maskA, maskB, wA, wB, seed, restarts):
    rng = np.random.default_rng(seed)
    n, EA = maskA.shape
    EB = maskB.shape[1]
    best = None
    for r in range(restarts):
        if r == 0:
            cA = _uniform_rows(maskA)
            cB = np.broadcast_to(_uniform_rows(maskB)[:, None, :], (n, EA, EB)).copy()
        else:
            cA = _dirichlet_rows(maskA, rng)
            cB = _dirichlet_rows(
                np.broadcast_to(maskB[:, None, :], (n, EA, EB)).copy(), rng
            )
        cA, cB, IA, Icond, _ = _two_stage_alternate(px, maskA, maskB, wA, wB, cA, cB)
        obj = wA * IA + wB * Icond
        if best is None or obj < best[0] - 1e-14:
            best = (obj, cA, cB, IA, Icond, r)
    return best


def _det_two_stage(px, maskA, maskB, cap=DET_ENUM_CAP):
    n, EA = maskA.shape
    EB = maskB.shape[1]
    choicesA = [np.nonzero(maskA[x])[0] for x in range(n)]
    choicesB = [np.nonzero(maskB[x])[0] for x in range(n)]
    est = 1.0
    for ch in choicesA + choicesB:
        est *= len(ch)
    if est > cap:
        return None
    out = []
    for aa in itertools.product(*choicesA):
        for bb in itertools.product(*choicesB):
            qa = np.zeros(EA)
            qab = np.zeros((EA, EB))
            for x in range(n):
                qa[aa[x]] += px[x]
                qab[aa[x], bb[x]] += px[x]
            IA = _entropy_bits(qa)
            hAB = _entropy_bits(qab.reshape(-1))
            out.append((IA, hAB - IA, aa, bb))
    return out


def region_successive_refinement(
    instance, eps0=None, eps1=None, weights=None, *, seed=0, restarts=RESTARTS_MULTI
) -> RateRegion:
    """Frontier of {R1 >= I(X;W1), R1+R2 >= I(X;W0,W1)} over masked channels."""
    if instance.setting != "successive_refinement":
        raise ValidationError(
            "region_successive_refinement applies to successive_refinement instances"
        )
    eps0 = instance.tolerances[0] if eps0 is None else float(eps0)
    eps1 = instance.tolerances[1] if eps1 is None else float(eps1)
    hg0 = hg_mod.maximal_edges(instance, eps0, func_index=0)
    hg1 = hg_mod.maximal_edges(instance, eps1, func_index=1)
    px = instance.pmf.dense().reshape(-1)
    maskA = hg1.membership  # stage A carries W1
    maskB = hg0.membership  # stage B refines with W0
    candidates = []
    dets = _det_two_stage(px, maskA, maskB)
    if dets is not None:
        for IA, Icond, aa, bb in dets:
            candidates.append(
                RegionPoint(_clip0(IA), _clip0(Icond), "deterministic", {"assign": (aa, bb)})
            )
    weights = np.linspace(0.0, 1.0, 33) if weights is None else np.asarray(weights, float)
    for lam in weights:
        wA = max(float(lam), 1e-6)
        wB = max(1.0 - float(lam), 1e-6)
        obj, cA, cB, IA, Icond, r = _two_stage_solve(
            px, maskA, maskB, wA, wB, seed, restarts
        )
        candidates.append(
            RegionPoint(
                _clip0(IA),
                _clip0(Icond),
                f"scalarized lambda={lam:.4f}",
                {"channels": (cA, cB)},
            )
        )
    hull = _pareto_lower_hull(candidates)
    return RateRegion(
        tuple(hull),
        diagnostics={"hypergraphs": (hg0, hg1), "weights": len(weights)},
    )


def region_cascade(
    instance, eps1=None, eps2=None, weights=None, *, seed=0, restarts=RESTARTS_MULTI
) -> RateRegion:
    """Frontier of {R1 >= I(X;W1,W2), R2 >= I(X;W2)} for the three-node chain."""
    if instance.setting != "cascade":
        raise ValidationError("region_cascade applies to cascade instances")
    eps1 = instance.tolerances[0] if eps1 is None else float(eps1)
    eps2 = instance.tolerances[1] if eps2 is None else float(eps2)
    hg1 = hg_mod.maximal_edges(instance, eps1, func_index=0)
    hg2 = hg_mod.maximal_edges(instance, eps2, func_index=1)
    pxx = instance.pmf.dense()
    n1, n2 = pxx.shape
    px = pxx.reshape(-1)
    # collapsed source index x = (x1, x2); stage A carries W2, stage B carries W1
    membA = np.repeat(hg2.membership[None, :, :], n1, axis=0).reshape(n1 * n2, -1)
    membB = np.repeat(hg1.membership[:, None, :], n2, axis=1).reshape(n1 * n2, -1)
    candidates = []
    dets = _det_two_stage(px, membA, membB)
    if dets is not None:
        for IA, Icond, aa, bb in dets:
            candidates.append(
                RegionPoint(_clip0(IA + Icond), _clip0(IA), "deterministic", {"assign": (aa, bb)})
            )
    weights = np.linspace(0.0, 1.0, 33) if weights is None else np.asarray(weights, float)
    for mu in weights:
        wA = 1.0
        wB = max(float(mu), 1e-6)
        obj, cA, cB, IA, Icond, r = _two_stage_solve(
            px, membA, membB, wA, wB, seed, restarts
        )
        candidates.append(
            RegionPoint(
                _clip0(IA + Icond),
                _clip0(IA),
                f"scalarized mu={mu:.4f}",
                {"channels": (cA, cB)},
            )
        )
    hull = _pareto_lower_hull(candidates)
    return RateRegion(
        tuple(hull),
        diagnostics={"hypergraphs": (hg1, hg2), "weights": len(weights)},
    )


# ---------------------------------------------------------------------------
# multiple description coding: deterministic enumeration plus time sharing


def region_mdc(
    instance, eps0=None, eps1=None, eps2=None, weights=None, *, cap=DET_ENUM_CAP
) -> RateRegion:
    """El Gamal-Cover-form frontier via deterministic joint channels.

    Enumerates deterministic maps x -> (w0, w1, w2) under the per-coordinate
    masks and convexifies the pentagon corners by time sharing.
    """
    if instance.setting != "mdc":
        raise ValidationError("region_mdc applies to mdc instances")
    tols = [
        instance.tolerances[i] if e is None else float(e)
        for i, e in enumerate((eps0, eps1, eps2))
    ]
    hgs = [hg_mod.maximal_edges(instance, tols[i], func_index=i) for i in range(3)]
    px = instance.pmf.dense().reshape(-1)
    n = px.size
    membs = [h.membership for h in hgs]
    choices = [
        [tuple(np.nonzero(m[x])[0]) for m in membs] for x in range(n)
    ]
    est = 1.0
    for per_x in choices:
        for opts in per_x:
            est *= len(opts)
    if est > cap:
        raise BudgetError(
            f"deterministic channel family has ~{est:.3g} members, over cap {cap}"
        )
    per_x_opts = [list(itertools.product(*choices[x])) for x in range(n)]
    candidates = []
    for assign in itertools.product(*per_x_opts):
        counts = {}
        c1 = np.zeros(len(hgs[1].edges))
        c2 = np.zeros(len(hgs[2].edges))
        c12 = {}
        for x, (w0, w1, w2) in enumerate(assign):
            counts[(w0, w1, w2)] = counts.get((w0, w1, w2), 0.0) + px[x]
            c1[w1] += px[x]
            c2[w2] += px[x]
            c12[(w1, w2)] = c12.get((w1, w2), 0.0) + px[x]
        h012 = _entropy_bits(np.array(list(counts.values())))
        h1 = _entropy_bits(c1)
        h2 = _entropy_bits(c2)
        h12 = _entropy_bits(np.array(list(c12.values())))
        ssum = h012 + (h1 + h2 - h12)  # I(X;W0W1W2) + I(W1;W2)
        candidates += _pentagon_corners(
            h1, h2, ssum, "deterministic", {"assign": assign}
        )
    hull = _pareto_lower_hull(candidates)
    return RateRegion(
        tuple(hull),
        diagnostics={"hypergraphs": tuple(hgs), "deterministic_candidates": int(est)},
    )


# ---------------------------------------------------------------------------
# epsilon sweeps


@dataclass
class SweepPoint:
    eps: float
    rate: float
    fingerprint: str


def sweep_curve(instance, eps_list, *, seed=0) -> tuple:
    """Rates along an epsilon grid, with hypergraph reuse and breakpoints.

    Returns (points sorted by eps, breakpoints), where a breakpoint is a grid
    value whose maximal edge set differs from the previous grid value's.
    """
    eps_values = sorted(float(e) for e in eps_list)
    if not eps_values:
        raise ValidationError("empty epsilon list")
    solve = rate_side_info if instance.setting == "side_info" else rate_p2p
    points = []
    breakpoints = []
    cache = {}
    prev_fp = None
    for e in eps_values:
        hg = hg_mod.maximal_edges(instance, e)
        fp = hg.fingerprint
        if fp not in cache:
            cache[fp] = solve(instance, e, seed=seed, hg=hg).rate
        points.append(SweepPoint(e, cache[fp], fp))
        if prev_fp is not None and fp != prev_fp:
            breakpoints.append(e)
        prev_fp = fp
    return points, breakpoints
