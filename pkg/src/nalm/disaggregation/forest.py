"""Randomized decision forest for binary ON/OFF classification.

Trees are grown breadth-first on pre-binned features: every level builds one
(node, candidate feature, bin, class) histogram in a single compiled pass and
picks the Gini-optimal cut among the ``ceil(sqrt(d))`` features each node drew. Bootstrap resampling enters as integer row multiplicities, so rows left
out of a tree's sample cost nothing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    max_bins: int = 64

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
        if not 2 <= self.max_bins <= 256:
            raise ValueError("max_bins must lie in [2, 256]")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array encoding; ``feature == LEAF`` marks leaves, ``value`` is the leaf class."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat != LEAF
            if not internal.any():
                break
            go_left = X[rows, np.where(internal, feat, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)
        return self.value[node].astype(bool)


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]

    def votes(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            total += tree.predict(X)
        return total

    def predict(self, X: np.ndarray) -> np.ndarray:
        # strict majority; ties go to OFF
        return 2 * self.votes(X) > len(self.trees)


def bin_cuts(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    """Per-feature cut points; bin ``b`` holds values ``<= cuts[b]`` and above ``cuts[b-1]``."""
    cuts = []
    for column in X.T:
        uniq = np.unique(column)
        if len(uniq) <= max_bins:
            cut = (uniq[:-1] + uniq[1:]) / 2
        else:
            q = np.quantile(column, np.arange(1, max_bins) / max_bins)
            j = np.clip(np.searchsorted(uniq, q, side="right") - 1, 0, len(uniq) - 2)
            cut = np.unique((uniq[j] + uniq[j + 1]) / 2)
        cuts.append(cut)
    return cuts


def apply_bins(X: np.ndarray, cuts: list[np.ndarray]) -> np.ndarray:
    binned = np.empty(X.shape, dtype=np.uint8)
    for f, cut in enumerate(cuts):
        binned[:, f] = np.searchsorted(cut, X[:, f], side="left")
    return binned


@njit(cache=True)
def _candidate_histograms(bins_live, y_live, m_live, spos, cand, n_bins):
    """Bootstrap counts per (node, candidate feature, bin, class) for the live rows."""
    k, c = cand.shape
    hist = np.zeros((k, c, n_bins, 2))
    for i in range(len(spos)):
        s = spos[i]
        for j in range(c):
            hist[s, j, bins_live[i, cand[s, j]], y_live[i]] += m_live[i]
    return hist


def grow_tree(binned: np.ndarray, cuts: list[np.ndarray], y: np.ndarray, multiplicity: np.ndarray,
              class_weight: tuple[float, float], params: ForestParams, rng: np.random.Generator) -> Tree:
    """Grow one tree on the rows with nonzero bootstrap ``multiplicity``.

    ``binned`` holds the bin index of every feature, shape ``(n, d)``.
    A drawn row weighs ``class_weight[label] * multiplicity``; ``min_leaf``
    counts drawn rows.
    """
    n_bins = params.max_bins
    n_features = binned.shape[1]
    n_candidates = min(n_features, math.ceil(math.sqrt(n_features)))
    w_off, w_on_class = class_weight

    feature: list[int] = [LEAF]
    threshold: list[float] = [0.0]
    left: list[int] = [LEAF]
    right: list[int] = [LEAF]
    value: list[int] = [0]

    # live rows only: bins, label, multiplicity, frontier slot
    drawn = multiplicity > 0
    bins_live = binned[drawn]
    y_live = np.asarray(y, dtype=np.int64)[drawn]
    m_live = multiplicity[drawn]
    pos = np.zeros(len(y_live), dtype=np.int64)
    frontier = [0]

    for depth in range(params.max_depth + 1):
        m = len(frontier)
        per_class = np.bincount(pos * 2 + y_live, weights=m_live, minlength=2 * m).reshape(m, 2)
        count = per_class.sum(axis=1)
        w_on = w_on_class * per_class[:, 1]
        w_tot = w_off * per_class[:, 0] + w_on
        for slot, node in enumerate(frontier):
            value[node] = int(2 * w_on[slot] > w_tot[slot])

        splittable = (count >= 2 * params.min_leaf) & (w_on > 0) & (w_on < w_tot)
        if depth == params.max_depth or not splittable.any():
            break

        # relabel splittable slots 0..k-1 and drop rows that settled in leaves
        k = int(splittable.sum())
        slot_map = np.full(m, -1)
        slot_map[splittable] = np.arange(k)
        spos = slot_map[pos]
        keep = spos >= 0
        if not keep.all():
            bins_live, y_live, m_live, spos = bins_live[keep], y_live[keep], m_live[keep], spos[keep]
        parents = [node for node, s in zip(frontier, splittable) if s]

        # candidate features per node, ascending so ties favour the lower index
        cand = np.sort(np.argsort(rng.random((k, n_features)), axis=1)[:, :n_candidates], axis=1)
        hist = _candidate_histograms(bins_live, y_live, m_live, spos, cand, n_bins)

        p_tot, p_on, p_count = w_tot[splittable], w_on[splittable], count[splittable]
        below = np.cumsum(hist[:, :, :-1, :], axis=2)
        lw_off = w_off * below[..., 0]
        lw_on = w_on_class * below[..., 1]
        left_c = below[..., 0] + below[..., 1]
        lw = lw_off + lw_on
        rw_on = p_on[:, None, None] - lw_on
        rw = p_tot[:, None, None] - lw
        valid = (left_c >= params.min_leaf) & (p_count[:, None, None] - left_c >= params.min_leaf)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = 2 * (lw_on * lw_off / lw + rw_on * (rw - rw_on) / rw)
        score = np.where(valid, score, np.inf).reshape(k, -1)
        flat = np.argmin(score, axis=1)
        best = score[np.arange(k), flat]
        split = best < 2 * p_on * (p_tot - p_on) / p_tot - 1e-12 * p_tot
        if not split.any():
            break
        best_feature = np.where(split, cand[np.arange(k), flat // (n_bins - 1)], LEAF)
        best_bin = flat % (n_bins - 1)

        child_of = np.full((k, 2), -1)
        next_frontier: list[int] = []
        for j in np.flatnonzero(split):
            node = parents[j]
            f, b = int(best_feature[j]), int(best_bin[j])
            feature[node] = f
            threshold[node] = float(cuts[f][b])
            for side in (0, 1):
                feature.append(LEAF)
                threshold.append(0.0)
                left.append(LEAF)
                right.append(LEAF)
                value.append(0)
                child_of[j, side] = len(next_frontier)
                next_frontier.append(len(feature) - 1)
            left[node], right[node] = next_frontier[-2], next_frontier[-1]

        in_split = split[spos]
        if not in_split.all():
            bins_live, y_live, m_live, spos = bins_live[in_split], y_live[in_split], m_live[in_split], spos[in_split]
        chosen = bins_live[np.arange(len(spos)), best_feature[spos]]
        pos = child_of[spos, (chosen > best_bin[spos]).astype(np.int64)]
        frontier = next_frontier

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.int8),
    )


def balanced_class_weight(y: np.ndarray) -> tuple[float, float]:
    """Inverse-frequency weights ``n / (2 n_class)``; (1, 1) when a class is absent."""
    y = np.asarray(y, dtype=bool)
    n, n_on = len(y), int(y.sum())
    if n_on == 0 or n_on == n:
        return 1.0, 1.0
    return n / (2 * (n - n_on)), n / (2 * n_on)


def fit_forest(X: np.ndarray | None, y: np.ndarray, params: ForestParams, seed_key: tuple[int, ...],
               class_weight: tuple[float, float] = (1.0, 1.0), n_jobs: int = 1,
               binned: tuple[np.ndarray, list[np.ndarray]] | None = None) -> Forest:
    """Fit ``params.n_trees`` trees; tree ``i`` draws from ``SeedSequence(seed_key + (i,))``.

    ``binned`` may carry precomputed ``(apply_bins(X, cuts), cuts)`` so several
    forests on the same features share one binning. The result does not
    depend on ``n_jobs``.
    """
    y = np.asarray(y, dtype=bool)
    n = len(y)
    if binned is None:
        cuts = bin_cuts(X, params.max_bins)
        binned = (apply_bins(X, cuts), cuts)
    xb, cuts = binned

    def one(i: int) -> Tree:
        rng = np.random.default_rng(np.random.SeedSequence([*seed_key, i]))
        multiplicity = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        return grow_tree(xb, cuts, y, multiplicity, class_weight, params, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = tuple(pool.map(one, range(params.n_trees)))
    else:
        trees = tuple(one(i) for i in range(params.n_trees))
    return Forest(trees)
