"""Hyperbox fuzzy sets and single-pass min-max clustering.

A hyperbox is an axis-aligned box [v, w] in feature space. Points inside
get membership 1; outside, membership decays linearly at a per-dimension
rate set by the sensitivity coefficients. The clusterer grows a list of
hyperboxes in one pass over the data, expanding the best-matching box
when an expansion budget allows it and seeding a new point box otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Hyperbox:
    """Axis-aligned box given by per-dimension minima `v` and maxima `w`."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64)
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        if v.ndim != 1 or w.ndim != 1 or v.shape != w.shape or v.size < 1:
            raise ValueError("v and w must be 1-D vectors of equal nonzero length")
        if not (np.isfinite(v).all() and np.isfinite(w).all()):
            raise ValueError("box corners must be finite")
        if np.any(v > w):
            raise ValueError("every v[i] must be <= w[i]")

    @property
    def n_dims(self) -> int:
        return self.v.size

    @classmethod
    def point(cls, x) -> "Hyperbox":
        """Degenerate box v = w = x, the seed used for a fresh cluster."""
        x = np.asarray(x, dtype=np.float64)
        return cls(x.copy(), x.copy())

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.v <= x) and np.all(x <= self.w))


@dataclass(frozen=True)
class MembershipParams:
    """Per-dimension sensitivity coefficients (decay slope outside a box)."""

    sensitivity: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sensitivity, dtype=np.float64)
        object.__setattr__(self, "sensitivity", s)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("sensitivity must be a 1-D vector")
        if not np.isfinite(s).all() or np.any(s <= 0):
            raise ValueError("every sensitivity coefficient must be finite and > 0")

    @classmethod
    def uniform(cls, value: float, n_dims: int) -> "MembershipParams":
        """Broadcast a scalar sensitivity to all `n_dims` dimensions."""
        return cls(np.full(n_dims, float(value)))

    @property
    def n_dims(self) -> int:
        return self.sensitivity.size


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs of the single-pass clusterer.

    theta : maximum per-dimension extent a box may reach when absorbing a
        sample, in [0, 1].
    top_k : how many of the highest-membership boxes are tested for
        expandability before a new box is created.
    expansion_fraction : fraction of dimensions that must satisfy the
        extent criterion for the expansion to go ahead.
    """

    theta: float
    top_k: int = 3
    expansion_fraction: float = 0.6

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not (0.0 < self.expansion_fraction <= 1.0):
            raise ValueError("expansion_fraction must lie in (0, 1]")


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def ramp(r: float, lambda_i: float) -> float:
    """Clamped linear ramp: r*lambda clipped to [0, 1].

    Returns 1 when r*lambda > 1, 0 when r*lambda < 0, and r*lambda
    in between.
    """
    if not (math.isfinite(r) and math.isfinite(lambda_i)):
        raise ValueError("ramp inputs must be finite")
    if lambda_i <= 0:
        raise ValueError("lambda_i must be > 0")
    return float(min(1.0, max(0.0, r * lambda_i)))


def _raw_memberships(V: np.ndarray, W: np.ndarray, X: np.ndarray,
                     sens: np.ndarray) -> np.ndarray:
    """Membership of each row of X in each box.

    V, W : (L, n) stacked box corners.
    X    : (N, n) query points.
    Returns an (N, L) array in [0, 1].
    """
    over = np.clip((X[:, None, :] - W[None, :, :]) * sens, 0.0, 1.0)
    under = np.clip((V[None, :, :] - X[:, None, :]) * sens, 0.0, 1.0)
    # min(1-a, 1-b) == 1 - max(a, b)
    return 1.0 - np.maximum(over, under).max(axis=2)


def stack_boxes(boxes: list[Hyperbox]) -> tuple[np.ndarray, np.ndarray]:
    """Stack box corners into (L, n) arrays for vectorised evaluation."""
    if not boxes:
        raise ValueError("box list is empty")
    V = np.stack([b.v for b in boxes])
    W = np.stack([b.w for b in boxes])
    return V, W


def membership(box: Hyperbox, x, params: MembershipParams) -> float:
    """Fuzzy membership of point `x` in `box`.

    Equals 1 exactly when v <= x <= w componentwise and decays linearly
    with the per-dimension distance outside the box, floored at 0.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != box.v.shape or params.n_dims != box.n_dims:
        raise ValueError("box, point and params must share one dimension")
    V, W = box.v[None, :], box.w[None, :]
    return float(_raw_memberships(V, W, x[None, :], params.sensitivity)[0, 0])


def membership_matrix(boxes: list[Hyperbox], X, params: MembershipParams) -> np.ndarray:
    """Memberships of every row of X in every box, shape (N, L)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    V, W = stack_boxes(boxes)
    if X.shape[1] != V.shape[1] or params.n_dims != V.shape[1]:
        raise ValueError("boxes, points and params must share one dimension")
    return _raw_memberships(V, W, X, params.sensitivity)


def rank_winners(boxes: list[Hyperbox], x, params: MembershipParams,
                 k: int) -> list[tuple[int, float]]:
    """Top-k boxes by membership of `x`, as (box index, membership) pairs.

    Sorted by descending membership; ties resolve to the lower index
    (creation order). An empty box list yields an empty result.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not boxes:
        return []
    u = membership_matrix(boxes, np.asarray(x, dtype=np.float64)[None, :], params)[0]
    order = np.argsort(-u, kind="stable")[: min(k, len(boxes))]
    return [(int(i), float(u[i])) for i in order]


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

def _required_dims(n_dims: int, fraction: float) -> int:
    # tiny slack guards float error when fraction * n is an exact integer
    return max(1, math.ceil(fraction * n_dims - 1e-9))


def can_expand(box: Hyperbox, x, config: ClusterConfig) -> bool:
    """Whether absorbing `x` keeps the box within the extent budget.

    The per-dimension criterion theta >= max(w, x) - min(v, x) must hold
    in at least ceil(expansion_fraction * n) dimensions.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != box.v.shape:
        raise ValueError("point dimension does not match box")
    extents = np.maximum(box.w, x) - np.minimum(box.v, x)
    passed = int(np.count_nonzero(extents <= config.theta))
    return passed >= _required_dims(box.n_dims, config.expansion_fraction)


def expand(box: Hyperbox, x) -> Hyperbox:
    """Smallest box containing both the old box and `x`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != box.v.shape:
        raise ValueError("point dimension does not match box")
    return Hyperbox(np.minimum(box.v, x), np.maximum(box.w, x))


# ---------------------------------------------------------------------------
# single-pass clustering
# ---------------------------------------------------------------------------

def cluster(samples, config: ClusterConfig,
            params: MembershipParams) -> list[Hyperbox]:
    """Grow hyperboxes over `samples` in one ordered pass.

    For each sample the top-k boxes by membership are tested in order;
    the first one whose expansion stays within the extent budget absorbs
    the sample (corners move to min/max with the sample). If none
    qualifies, a new point box is seeded at the sample. Boxes only ever
    grow, so every sample keeps membership 1 in at least one box.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.size == 0:
        return []
    X = np.atleast_2d(X)
    n = X.shape[1]
    if params.n_dims != n:
        raise ValueError("params dimension does not match samples")
    if not np.isfinite(X).all():
        raise ValueError("samples must be finite")

    sens = params.sensitivity
    need = _required_dims(n, config.expansion_fraction)

    # growing corner buffers; doubled on demand to keep appends cheap
    cap = 16
    V = np.empty((cap, n))
    W = np.empty((cap, n))
    count = 0

    for x in X:
        expanded = False
        if count > 0:
            over = np.clip((x[None, :] - W[:count]) * sens, 0.0, 1.0)
            under = np.clip((V[:count] - x[None, :]) * sens, 0.0, 1.0)
            u = 1.0 - np.maximum(over, under).max(axis=1)
            winners = np.argsort(-u, kind="stable")[: config.top_k]
            for j in winners:
                extents = np.maximum(W[j], x) - np.minimum(V[j], x)
                if int(np.count_nonzero(extents <= config.theta)) >= need:
                    np.minimum(V[j], x, out=V[j])
                    np.maximum(W[j], x, out=W[j])
                    expanded = True
                    break
        if not expanded:
            if count == cap:
                cap *= 2
                V = np.vstack([V, np.empty((count, n))])
                W = np.vstack([W, np.empty((count, n))])
            V[count] = x
            W[count] = x
            count += 1

    return [Hyperbox(V[i].copy(), W[i].copy()) for i in range(count)]
