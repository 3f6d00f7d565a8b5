"""Independent brute-force verifiers for hypergraphs, rates, and distortion.

Certification: grid searches return a tolerance bound computed from a dual
linear lower bound of the (convex) restricted-rate problem, so comparisons
against solver outputs are sound inequalities rather than hoped-for
closeness. The q-space dual used here is

    R = min_q  -sum_x p(x) log2 q(A_x),   A_x = {w : x in w},

whose linearization at any q lower-bounds R over the simplex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import geometry
from . import hypergraph as hg_mod
from . import solver
from .errors import BudgetError, ValidationError

LN2 = float(np.log(2.0))


def _clip0(x: float) -> float:
    return float(x) if x > 0 else 0.0


@dataclass
class GridSpec:
    m: int = 12  # probabilities quantized to multiples of 1/m
    aux_cap: int | None = None  # auxiliary alphabet size per terminal
    budget: int = 10**7  # cap on enumerated channel candidates

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError("grid resolution m must be >= 2")


# ---------------------------------------------------------------------------
# hypergraph brute force


def brute_maximal_edges(instance, eps=None, func_index: int = 0):
    """All-subsets construction of the maximal hyperedge set (alphabets <= 16)."""
    eps = instance.tolerances[func_index] if eps is None else float(eps)
    fv, sup = hg_mod.function_arrays(instance, func_index)
    alpha = instance.functions[func_index].alphabets[0]
    n = alpha.size
    if n > 16:
        raise BudgetError(f"alphabet size {n} too large for brute enumeration")
    valid = hg_mod._validity_checker(fv, sup, eps)
    all_valid = [m for m in range(1, 1 << n) if valid(m)]
    maximal = [
        m for m in all_valid if not any(m != o and m & o == m for o in all_valid)
    ]
    maximal.sort(key=lambda m: hg_mod._members(m, n))
    centers, radii = hg_mod._reconstruction(fv, sup, maximal)
    return hg_mod.MaximalHypergraph(
        alpha, eps, tuple(maximal), centers, radii, fv.shape[1]
    )


# ---------------------------------------------------------------------------
# dual lower bounds for masked rate problems


def dual_rate_bounds(px, mask, iters: int = 5000, tol: float = 1e-13):
    """Certified (lower, upper) bounds on min I(X;W) with support mask.

    Runs the fixed-point iteration on the output distribution q and returns
    G(q) as the upper bound and its simplex-linearization as the lower bound.
    Both are valid for any q, and they pinch at the optimum.
    """
    px = np.asarray(px, float)
    mask = np.asarray(mask, bool)
    act = px > 0
    p = px[act] / px[act].sum()
    A = mask[act]
    E = A.shape[1]
    q = np.full(E, 1.0 / E)
    prev = np.inf
    for _ in range(iters):
        qa = A @ q  # q(A_x)
        q_new = (p / qa) @ (A * q[None, :])
        q_new /= q_new.sum()
        g = float(-(p * np.log2(A @ q_new)).sum())
        q = q_new
        if abs(prev - g) < tol:
            break
        prev = g
    qa = A @ q
    ub = float(-(p * np.log2(qa)).sum())
    grad = -(A * (p / qa)[:, None]).sum(axis=0) / LN2  # dG/dq_w
    lb = ub + 1.0 / LN2 + float(grad.min())
    return _clip0(lb), ub


def side_info_rate_lower_bound(pxy, mask) -> float:
    """Lower bound on min I(X;W|Y): per-y decoupled masked-rate duals."""
    pxy = np.asarray(pxy, float)
    py = pxy.sum(axis=0)
    total = 0.0
    for y in range(pxy.shape[1]):
        if py[y] <= 0:
            continue
        pxgy = pxy[:, y] / py[y]
        lb, _ = dual_rate_bounds(pxgy, mask)
        total += py[y] * lb
    return float(total)


# ---------------------------------------------------------------------------
# grid search over support-restricted channels


def _compositions(total: int, parts: int):
    """All vectors of `parts` nonnegative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _row_grid(m: int, k: int) -> np.ndarray:
    return np.array(list(_compositions(m, k)), dtype=float) / m


@dataclass
class GridRateResult:
    value: float
    tolerance: float
    channel: np.ndarray
    evaluated: int


def grid_min_rate(instance, eps=None, grid: GridSpec | None = None) -> GridRateResult:
    """Exhaustive masked-channel grid search for p2p / side_info rates.

    Only rows with more than one allowed edge are enumerated. The certified
    tolerance bounds (grid minimum - true minimum) via the dual lower bound.
    """
    grid = GridSpec() if grid is None else grid
    if instance.setting not in ("p2p", "side_info"):
        raise ValidationError("grid_min_rate handles p2p and side_info instances")
    hg = brute_maximal_edges(instance, eps)
    mask = hg.membership
    if instance.setting == "p2p":
        px = instance.pmf.dense().reshape(-1)
        evaluate = lambda c: solver._entropy_bits(px @ c) - float(
            px @ solver._row_entropies(c)
        )
        lb = dual_rate_bounds(px, mask)[0]
    else:
        pxy = instance.pmf.dense()
        px = pxy.sum(axis=1)
        py = pxy.sum(axis=0)

        def evaluate(c):
            hw_x = float(px @ solver._row_entropies(c))
            hw_y = 0.0
            for y in range(pxy.shape[1]):
                if py[y] > 0:
                    hw_y += py[y] * solver._entropy_bits(pxy[:, y] @ c / py[y])
            return hw_y - hw_x

        lb = side_info_rate_lower_bound(pxy, mask)
    n, E = mask.shape
    free_rows = [x for x in range(n) if mask[x].sum() > 1 and px[x] > 0]
    row_grids = {x: _row_grid(grid.m, int(mask[x].sum())) for x in free_rows}
    count = 1
    for x in free_rows:
        count *= len(row_grids[x])
    if count > grid.budget:
        raise BudgetError(f"grid search needs {count} evaluations, over budget {grid.budget}")
    base = np.zeros((n, E))
    for x in range(n):
        if x not in free_rows:
            allowed = np.nonzero(mask[x])[0]
            base[x, allowed[0]] = 1.0  # forced or zero-probability row
    best_val, best_c = np.inf, None
    for combo in itertools.product(*(range(len(row_grids[x])) for x in free_rows)):
        c = base.copy()
        for x, gi in zip(free_rows, combo):
            c[x, np.nonzero(mask[x])[0]] = row_grids[x][gi]
        val = evaluate(c)
        if val < best_val:
            best_val, best_c = val, c
    return GridRateResult(float(best_val), float(best_val - lb), best_c, count)


# ---------------------------------------------------------------------------
# zero-distortion audits


def _deviation(a, b) -> float:
    return float(np.sqrt(((np.asarray(a) - np.asarray(b)) ** 2).sum()))


def verify_zero_distortion(instance, eps, channels, reconstruction, tol=1e-9) -> bool:
    """True iff every positive-probability tuple reconstructs within eps + tol.

    `channels` and `reconstruction` follow the solver output layout for the
    instance's setting.
    """
    setting = instance.setting
    if setting in ("p2p", "side_info", "markov"):
        c = channels[0] if isinstance(channels, (tuple, list)) else channels
        c = c.probs if hasattr(c, "probs") else c
        fv, sup = hg_mod.function_arrays(instance, 0)
        recon = reconstruction  # (E, ny, d)
        n, ny, _ = fv.shape
        pmf = instance.pmf.dense()
        pmf = pmf.reshape(n, ny) if setting == "side_info" else pmf.reshape(n, 1)
        for x in range(n):
            for y in range(ny):
                if pmf[x, y] <= 0:
                    continue
                for e in np.nonzero(c[x] > 0)[0]:
                    if _deviation(fv[x, y], recon[e, y]) > eps + tol:
                        return False
        return True
    if setting == "distributed":
        c1, c2 = channels
        c1 = c1.probs if hasattr(c1, "probs") else c1
        c2 = c2.probs if hasattr(c2, "probs") else c2
        f = instance.functions[0].values
        pxx = instance.pmf.dense()
        recon = reconstruction  # (E1, E2, d)
        for x1, x2 in np.argwhere(pxx > 0):
            for e1 in np.nonzero(c1[x1] > 0)[0]:
                for e2 in np.nonzero(c2[x2] > 0)[0]:
                    if _deviation(f[x1, x2], recon[e1, e2]) > eps + tol:
                        return False
        return True
    raise ValidationError(f"no zero-distortion audit for setting {setting!r}")


def verify_staged(instance, eps_list, cA, cB, reconA, reconB, tol=1e-9) -> bool:
    """Audit for two-stage channels (successive refinement / cascade)."""
    px = instance.pmf.dense().reshape(-1)
    if instance.setting == "successive_refinement":
        fB = instance.functions[0].values  # W0 reconstructs f0
        fA = instance.functions[1].values  # W1 reconstructs f1
        epsB, epsA = eps_list[0], eps_list[1]
        fA_flat, fB_flat = fA, fB
    elif instance.setting == "cascade":
        n1, n2 = instance.pmf.dense().shape
        f1 = instance.functions[0].values
        f2 = instance.functions[1].values
        # stage A carries W2 (reconstructs f2(x2)); stage B carries W1
        fA_flat = np.repeat(f2[None, :, :], n1, axis=0).reshape(n1 * n2, -1)
        fB_flat = np.repeat(f1[:, None, :], n2, axis=1).reshape(n1 * n2, -1)
        epsA, epsB = eps_list[1], eps_list[0]
    else:
        raise ValidationError("verify_staged handles staged settings only")
    nA = cA.shape[1]
    for x in np.nonzero(px > 0)[0]:
        for a in np.nonzero(cA[x] > 0)[0]:
            if _deviation(fA_flat[x], reconA[a]) > epsA + tol:
                return False
            for b in np.nonzero(cB[x, a] > 0)[0]:
                if _deviation(fB_flat[x], reconB[b]) > epsB + tol:
                    return False
    return True


# ---------------------------------------------------------------------------
# general-auxiliary search (distributed; Berger-Tung reference)


@dataclass
class AuxSearchResult:
    value: float
    channels: tuple
    support_feasible: int
    evaluated: int
    grid: GridSpec


_TERMINAL_CAP = 200_000  # materialized per-terminal candidate arrays


def _terminal_candidates(n, K, m, budget):
    """Grid channels for one terminal, deduplicated up to column relabeling.

    Both the objective and feasibility are invariant under permuting the
    auxiliary labels, so candidates are canonicalized by sorting columns.
    """
    rows = _row_grid(m, K)
    count = len(rows) ** n
    if count > min(budget, _TERMINAL_CAP):
        raise BudgetError(
            f"{count} grid channels per terminal exceed budget "
            f"{min(budget, _TERMINAL_CAP)}"
        )
    idx = itertools.product(range(len(rows)), repeat=n)
    out = np.empty((count, n, K))
    for i, combo in enumerate(idx):
        cols = sorted(map(tuple, rows[list(combo)].T.tolist()), reverse=True)
        out[i] = np.array(cols).T
    uniq = np.unique(out.reshape(count, -1), axis=0)
    return uniq.reshape(-1, n, K)


def general_aux_search(instance, eps=None, grid: GridSpec | None = None) -> AuxSearchResult:
    """Exhaustive grid search over general product channels p(u_i|x_i).

    Reconstruction is the enclosing-ball center of each (u1, u2) preimage,
    which is feasibility-optimal under maximal distortion; candidates failing
    the zero-distortion audit are discarded. Returns the minimal sum mutual
    information I(X1,X2;U1,U2).
    """
    if instance.setting != "distributed":
        raise ValidationError("general_aux_search applies to distributed instances")
    grid = GridSpec() if grid is None else grid
    eps = instance.tolerances[0] if eps is None else float(eps)
    pxx = instance.pmf.dense()
    n1, n2 = pxx.shape
    f = instance.functions[0].values
    K1 = grid.aux_cap or min(n1 + 4, 2**n1 - 1)
    K2 = grid.aux_cap or min(n2 + 4, 2**n2 - 1)
    cand1 = _terminal_candidates(n1, K1, grid.m, grid.budget)
    cand2 = _terminal_candidates(n2, K2, grid.m, grid.budget)
    if len(cand1) * len(cand2) > grid.budget:
        raise BudgetError(
            f"{len(cand1) * len(cand2)} channel pairs exceed budget {grid.budget}"
        )
    # support-pattern feasibility: a pattern pair is feasible iff every
    # positive-probability (u1, u2) preimage fits in an eps-ball
    pat1, pidx1 = np.unique(cand1 > 0, axis=0, return_inverse=True)
    pat2, pidx2 = np.unique(cand2 > 0, axis=0, return_inverse=True)
    feas = np.zeros((len(pat1), len(pat2)), dtype=bool)
    sup = pxx > 0
    for i, s1 in enumerate(pat1):
        for j, s2 in enumerate(pat2):
            ok = True
            for u1 in range(K1):
                for u2 in range(K2):
                    pts = [
                        f[x1, x2]
                        for x1 in np.nonzero(s1[:, u1])[0]
                        for x2 in np.nonzero(s2[:, u2])[0]
                        if sup[x1, x2]
                    ]
                    if len(pts) > 1 and geometry.sec(np.asarray(pts)).radius > eps + geometry.TOL:
                        ok = False
                        break
                if not ok:
                    break
            feas[i, j] = ok
    px1 = pxx.sum(axis=1)
    px2 = pxx.sum(axis=0)
    h1 = solver._row_entropies(cand1) @ px1  # (N1,)
    h2 = solver._row_entropies(cand2) @ px2
    best_val, best_pair = np.inf, None
    evaluated = 0
    chunk = max(1, int(5e5 // (len(cand2) or 1)))
    for lo in range(0, len(cand1), chunk):
        hi = min(lo + chunk, len(cand1))
        block = cand1[lo:hi]  # (B, n1, K1)
        q = np.einsum("xy,bxu,cyv->bcuv", pxx, block, cand2, optimize=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = q * np.log2(np.where(q > 0, q, 1.0))
        hq = -t.sum(axis=(2, 3))  # (B, N2)
        vals = hq - h1[lo:hi][:, None] - h2[None, :]
        ok = feas[pidx1[lo:hi]][:, pidx2]
        vals = np.where(ok, vals, np.inf)
        evaluated += ok.size
        bi, bj = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[bi, bj] < best_val:
            best_val = float(vals[bi, bj])
            best_pair = (cand1[lo + bi].copy(), cand2[bj].copy())
    if best_pair is None or not np.isfinite(best_val):
        raise ValidationError("no feasible grid channel pair found")
    return AuxSearchResult(
        _clip0(best_val), best_pair, int(feas.sum()), evaluated, grid
    )


# ---------------------------------------------------------------------------
# certification helpers for the sum-rate comparison


def round_channel_to_grid(c: np.ndarray, m: int) -> np.ndarray:
    """Largest-remainder rounding of each row onto the 1/m grid.

    Support-preserving: zero entries stay zero, so feasibility of the rounded
    channel follows from feasibility of the original.
    """
    c = np.asarray(c, float)
    out = np.zeros_like(c)
    for i, row in enumerate(c):
        scaled = row * m
        base = np.floor(scaled)
        rem = scaled - base
        short = int(round(m - base.sum()))
        order = np.argsort(-rem, kind="stable")
        base[order[:short]] += 1
        out[i] = base / m
    return out


def collapse_to_pair_channels(instance, c1, c2, pair):
    """Map general auxiliaries onto the hyperedge families via u -> {x: p(x,u)>0}.

    Returns the induced product channels over the pair's edge lists and their
    sum mutual information; a data-processing argument makes this a feasible
    hypergraph channel whose rate never exceeds the general channel's.
    """
    pxx = instance.pmf.dense()
    px1 = pxx.sum(axis=1)
    px2 = pxx.sum(axis=0)

    def collapse(c, px, edges):
        n, K = c.shape
        out = np.zeros((n, len(edges)))
        lookup = {e: i for i, e in enumerate(edges)}
        for u in range(K):
            members = np.nonzero((px > 0) & (c[:, u] > 0))[0]
            if members.size == 0:
                continue
            mask = 0
            for x in members:
                mask |= 1 << int(x)
            if mask not in lookup:
                raise ValidationError(
                    "collapsed auxiliary does not form a valid hyperedge"
                )
            out[:, lookup[mask]] += c[:, u]
        return out

    h1 = collapse(c1, px1, pair.edges1)
    h2 = collapse(c2, px2, pair.edges2)
    _, _, s, _ = solver._bt_stats(pxx, h1, h2)
    return float(s), (h1, h2)


def certified_sum_rate_gap(instance, eps, solver_result, aux_result, pair) -> float:
    """Sound bound on |solver sum-rate - grid search sum-rate|.

    Direction one: rounding the solver's channels onto the grid yields a
    member of the searched family, so the grid minimum exceeds the solver
    value by at most the measured rounding gap. Direction two: collapsing the
    grid minimizer onto hyperedges yields a feasible solver-family channel,
    bounding the solver's excess.
    """
    m = aux_result.grid.m
    c1 = solver_result.channels[0].probs
    c2 = solver_result.channels[1].probs
    r1 = round_channel_to_grid(c1, m)
    r2 = round_channel_to_grid(c2, m)
    _, _, s_round, _ = solver._bt_stats(instance.pmf.dense(), r1, r2)
    g_round = max(s_round - solver_result.rate, 0.0)
    s_collapse, _ = collapse_to_pair_channels(
        instance, aux_result.channels[0], aux_result.channels[1], pair
    )
    g_excess = max(solver_result.rate - s_collapse, 0.0)
    return float(max(g_round, g_excess) + 1e-9)
