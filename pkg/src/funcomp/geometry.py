"""Smallest enclosing balls and approximation checks in the image metric space.

Boundary comparisons are inclusive with tolerance ``TOL = 1e-9``: a point set
whose ball radius equals the tolerance exactly is admissible.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TOL = 1e-9
MAX_DIM = 8


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValidationError("smallest enclosing ball of an empty point set")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValidationError(f"points must be a (k, d) array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValidationError("points contain non-finite coordinates")
    if pts.shape[1] > MAX_DIM:
        raise ValidationError(f"dimension {pts.shape[1]} exceeds cap {MAX_DIM}")
    return pts


def _circumball(R: np.ndarray) -> Ball:
    # Minimal ball with all of R on its boundary: circumcenter within aff(R).
    if len(R) == 1:
        return Ball(R[0].copy(), 0.0)
    U = R[1:] - R[0]
    G = U @ U.T
    b = 0.5 * np.diag(G)
    lam, *_ = np.linalg.lstsq(G, b, rcond=None)
    c = R[0] + lam @ U
    r = float(np.sqrt(((R - c) ** 2).sum(axis=1).max()))
    return Ball(c, r)


def _welzl(pts: np.ndarray, order: list) -> Ball:
    d = pts.shape[1]

    def mb(n: int, R: list) -> Ball:
        if n == 0 or len(R) == d + 1:
            if not R:
                return Ball(np.zeros(d), 0.0)
            return _circumball(pts[R])
        i = order[n - 1]
        ball = mb(n - 1, R)
        if np.sqrt(((pts[i] - ball.center) ** 2).sum()) <= ball.radius + TOL:
            return ball
        return mb(n - 1, R + [i])

    return mb(len(order), [])


def sec(points) -> Ball:
    """Smallest enclosing ball of a finite point set.

    Exact closed form in R^1; Welzl's recursion with circumball base cases
    (at most d + 1 support points) otherwise, re-run with fresh shuffles until
    every input point is enclosed within radius + 1e-9.
    """
    pts = _as_points(points)
    if pts.shape[1] == 1:
        lo, hi = pts.min(), pts.max()
        return Ball(np.array([(lo + hi) / 2.0]), float((hi - lo) / 2.0))
    uniq = np.unique(pts, axis=0)
    # deterministic for a fixed input order: shuffle seeded from the input bytes
    seed = int.from_bytes(hashlib.sha256(pts.tobytes()).digest()[:8], "little")
    for attempt in range(8):
        order = list(range(len(uniq)))
        random.Random(seed + attempt).shuffle(order)
        ball = _welzl(uniq, order)
        worst = np.sqrt(((pts - ball.center) ** 2).sum(axis=1)).max()
        if worst <= ball.radius + TOL:
            return Ball(ball.center, float(max(ball.radius, 0.0)))
    raise ArithmeticError("enclosing-ball certification failed after 8 attempts")


def radius_leq(points, eps: float) -> bool:
    """True iff the smallest enclosing ball has radius <= eps + 1e-9."""
    return sec(points).radius <= eps + TOL


def is_delta_approximation(g, f, delta: float) -> bool:
    """True iff ||f - g|| <= delta + 1e-9 at every domain tuple.

    Improbable tuples count too: the surrogate guarantee is pointwise on the
    whole domain.
    """
    if f.alphabets != g.alphabets or f.dim != g.dim:
        raise ValidationError("surrogate and target have different domains or image dim")
    dev = np.sqrt(((f.values - g.values) ** 2).sum(axis=-1))
    return bool(dev.max() <= delta + TOL)


def lipschitz_check(instance, L: float, func_index: int = 0) -> bool:
    """Check ||f(x,y) - f(x',y)|| <= L * |x - x'| over probable pairs sharing y.

    The domain metric comes from embedding the source alphabet into the real
    line; non-numeric labels have no embedding and raise.
    """
    f = instance.functions[func_index]
    emb = instance.pmf.axes[0].embedding()
    if emb is None:
        raise ValidationError("source alphabet has no numeric embedding")
    sup = instance.pmf.support
    vals = f.values
    if vals.ndim == 2:  # single-axis domain
        vals = vals[:, None, :]
        sup = sup[:, None]
    n, ny = sup.shape
    for y in range(ny):
        probable = np.nonzero(sup[:, y])[0]
        for a in range(len(probable)):
            for b in range(a + 1, len(probable)):
                i, j = probable[a], probable[b]
                img = np.sqrt(((vals[i, y] - vals[j, y]) ** 2).sum())
                if img > L * abs(emb[i] - emb[j]) + TOL:
                    return False
    return True
