"""Binary classifiers with hard 0/1 predictions.

Three families behind one ``train`` / ``classify`` surface:

* ``logistic``: ridge-penalized logistic regression fit by IRLS (Newton)
  on the log-likelihood, intercept unpenalized.  The default penalty is
  ``1e-4 * n``, which keeps weights finite under the perfect separation
  that permuted small samples frequently produce.
* ``forest``: bagged decision trees, each grown on a bootstrap resample,
  best split by Gini impurity over a random feature subset per split.
* ``knn``: k-nearest neighbors by Euclidean distance.

Tie rule, applied everywhere and deliberately fixed: an exact tie
(predicted probability 0.5, an even vote) classifies to 0.  A fixed rule
keeps the permutation distribution of downstream test statistics
well-defined.

Training is a pure function of ``(spec, X, T, rng_seed)``: identical
inputs give bit-identical models regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from . import rng
from .dataset import DESIGN_KINDS, INTERACTIONS, MAIN_EFFECTS

FAMILIES = ("logistic", "forest", "knn")


class FitError(RuntimeError):
    """Training failed (divergent IRLS, inconsistent dimensions)."""


@dataclass(frozen=True)
class ClassifierSpec:
    """Declarative classifier choice.

    Only the fields of the chosen family are consulted; ``parse_classifier``
    rejects options that do not belong to the family.  ``ridge=None`` means
    the default penalty ``1e-4 * n`` resolved at training time.
    """

    family: str = "logistic"
    design: str = MAIN_EFFECTS            # logistic only
    include_squares: bool = False         # logistic only
    ridge: float | None = None            # logistic only
    trees: int = 200                      # forest only
    features_per_split: int | str = "sqrt"  # forest only ("sqrt" or int)
    max_depth: int | None = None          # forest only (None = unlimited)
    min_leaf: int = 1                     # forest only
    seed_stream: int = 0                  # forest only
    k: int = 1                            # knn only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown classifier family {self.family!r}")
        if self.design not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.design!r}")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.trees < 1:
            raise ValueError("trees must be a positive integer")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be a positive integer")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer")
        if not (self.features_per_split == "sqrt"
                or (isinstance(self.features_per_split, int)
                    and self.features_per_split >= 1)):
            raise ValueError('features_per_split must be "sqrt" or a positive integer')
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def is_randomized(self) -> bool:
        """True when predictions depend on the training seed."""
        return self.family == "forest"

    def to_json(self) -> dict:
        out = {"family": self.family}
        if self.family == "logistic":
            out["design"] = self.design
            if self.include_squares:
                out["squares"] = True
            if self.ridge is not None:
                out["ridge"] = self.ridge
        elif self.family == "forest":
            out.update(trees=self.trees, features_per_split=self.features_per_split,
                       max_depth=self.max_depth, min_leaf=self.min_leaf,
                       seed_stream=self.seed_stream)
        else:
            out["k"] = self.k
        return out


_LOGISTIC_KEYS = {"ridge", "squares"}
_FOREST_KEYS = {"trees", "mtry", "depth", "minleaf", "stream"}
_KNN_KEYS = {"k"}


def parse_classifier(text: str) -> ClassifierSpec:
    """Parse the classifier mini-grammar.

    Examples: ``logistic``, ``logistic2``, ``logistic2:ridge=0.01``,
    ``forest:trees=200,mtry=3``, ``knn:k=1``.
    """
    head, _, opts = text.strip().partition(":")
    pairs = {}
    if opts:
        for item in opts.split(","):
            key, eq, val = item.partition("=")
            if not eq or not key:
                raise ValueError(f"malformed classifier option {item!r}")
            pairs[key.strip()] = val.strip()
    if head in ("logistic", "logistic2"):
        unknown = set(pairs) - _LOGISTIC_KEYS
        if unknown:
            raise ValueError(f"unknown logistic option(s): {sorted(unknown)}")
        return ClassifierSpec(
            family="logistic",
            design=INTERACTIONS if head == "logistic2" else MAIN_EFFECTS,
            ridge=float(pairs["ridge"]) if "ridge" in pairs else None,
            include_squares=pairs.get("squares", "0") in ("1", "true", "yes"),
        )
    if head == "forest":
        unknown = set(pairs) - _FOREST_KEYS
        if unknown:
            raise ValueError(f"unknown forest option(s): {sorted(unknown)}")
        mtry = pairs.get("mtry", "sqrt")
        depth = pairs.get("depth", "none")
        return ClassifierSpec(
            family="forest",
            trees=int(pairs.get("trees", 200)),
            features_per_split="sqrt" if mtry == "sqrt" else int(mtry),
            max_depth=None if depth in ("none", "0") else int(depth),
            min_leaf=int(pairs.get("minleaf", 1)),
            seed_stream=int(pairs.get("stream", 0)),
        )
    if head == "knn":
        unknown = set(pairs) - _KNN_KEYS
        if unknown:
            raise ValueError(f"unknown knn option(s): {sorted(unknown)}")
        return ClassifierSpec(family="knn", k=int(pairs.get("k", 1)))
    raise ValueError(f"unknown classifier {head!r} "
                     f"(expected logistic, logistic2, forest, or knn)")


def spec_from_json(obj: dict) -> ClassifierSpec:
    """Build a spec from the JSON object form used in config files."""
    obj = dict(obj)
    family = obj.pop("family", "logistic")
    if family == "logistic":
        return ClassifierSpec(
            family=family,
            design=obj.pop("design", MAIN_EFFECTS),
            include_squares=bool(obj.pop("squares", False)),
            ridge=obj.pop("ridge", None),
        )
    if family == "forest":
        return ClassifierSpec(
            family=family,
            trees=int(obj.pop("trees", 200)),
            features_per_split=obj.pop("features_per_split", "sqrt"),
            max_depth=obj.pop("max_depth", None),
            min_leaf=int(obj.pop("min_leaf", 1)),
            seed_stream=int(obj.pop("seed_stream", 0)),
        )
    if family == "knn":
        return ClassifierSpec(family=family, k=int(obj.pop("k", 1)))
    raise ValueError(f"unknown classifier family {family!r}")


# --------------------------------------------------------------------- #
# Logistic regression (IRLS with ridge penalty)
# --------------------------------------------------------------------- #
#
# Objective maximized:  l(w) - ridge * ||w_slopes||^2   (intercept free),
# where l is the Bernoulli log-likelihood on X augmented with a leading
# intercept column.  Newton steps solve
#   (X'WX + 2*ridge*D) step = X'(t - p) - 2*ridge*D w
# with W = diag(p(1-p)) and D zeroing the intercept.

_IRLS_MAX_ITER = 50
_IRLS_TOL = 1e-8


def _augment(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def resolve_ridge(spec: ClassifierSpec, n: int) -> float:
    return 1e-4 * n if spec.ridge is None else float(spec.ridge)


def logistic_loglik(weights: np.ndarray, X: np.ndarray, t: np.ndarray) -> float:
    """Unpenalized Bernoulli log-likelihood; ``weights[0]`` is the intercept."""
    eta = _augment(np.asarray(X, dtype=float)) @ weights
    t = np.asarray(t, dtype=float)
    return float(np.sum(t * eta - np.logaddexp(0.0, eta)))


def logistic_penalized_loglik(weights: np.ndarray, X: np.ndarray,
                              t: np.ndarray, ridge: float) -> float:
    return logistic_loglik(weights, X, t) - ridge * float(weights[1:] @ weights[1:])


def logistic_penalized_gradient(weights: np.ndarray, X: np.ndarray,
                                t: np.ndarray, ridge: float) -> np.ndarray:
    """Analytic gradient of the penalized log-likelihood in ``weights``."""
    Xa = _augment(np.asarray(X, dtype=float))
    p = expit(Xa @ weights)
    grad = Xa.T @ (np.asarray(t, dtype=float) - p)
    grad[1:] -= 2.0 * ridge * weights[1:]
    return grad


def _fit_logistic(X: np.ndarray, t: np.ndarray, ridge: float):
    Xa = _augment(X)
    n, q1 = Xa.shape
    w = np.zeros(q1)
    t = np.asarray(t, dtype=float)
    iterations = 0
    converged = False
    for it in range(1, _IRLS_MAX_ITER + 1):
        iterations = it
        p = expit(Xa @ w)
        grad = Xa.T @ (t - p)
        grad[1:] -= 2.0 * ridge * w[1:]
        W = p * (1.0 - p)
        H = Xa.T @ (Xa * W[:, None])
        idx = np.arange(1, q1)
        H[idx, idx] += 2.0 * ridge
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        w = w + step
        if not np.all(np.isfinite(w)):
            raise FitError(f"IRLS diverged to non-finite weights at iteration {it}")
        if np.max(np.abs(step)) < _IRLS_TOL:
            converged = True
            break
    return w, iterations, converged


@dataclass(frozen=True)
class _LogisticState:
    weights: np.ndarray  # intercept first
    ridge: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class _ForestState:
    trees: tuple  # each tree: tuple of (feature, threshold, left, right, value)


@dataclass(frozen=True)
class _KnnState:
    X: np.ndarray
    t: np.ndarray
    k: int


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier; ``predict`` is a pure function of the state."""

    spec: ClassifierSpec
    state: object
    n_features: int
    training_size: int


# --------------------------------------------------------------------- #
# Random forest
# --------------------------------------------------------------------- #

def _best_split(Xn: np.ndarray, yn: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by weighted Gini over candidate features.

    Features are scanned in the order drawn, and only a strictly smaller
    impurity replaces the incumbent, so ties resolve deterministically.
    Returns None when no feature admits a valid split.
    """
    n = yn.shape[0]
    total_ones = int(yn.sum())
    best_cost = np.inf
    best = None
    for f in feats:
        x = Xn[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = yn[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        nl = cut + 1
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        cut = cut[ok]
        nl = nl[ok]
        nr = nr[ok]
        left_ones = np.cumsum(ys)[cut]
        right_ones = total_ones - left_ones
        gini_l = 1.0 - ((left_ones / nl) ** 2 + ((nl - left_ones) / nl) ** 2)
        gini_r = 1.0 - ((right_ones / nr) ** 2 + ((nr - right_ones) / nr) ** 2)
        cost = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(cost))
        if cost[j] < best_cost:
            best_cost = float(cost[j])
            best = (int(f), float(0.5 * (xs[cut[j]] + xs[cut[j] + 1])))
    return best


def _leaf(value: int):
    return (-1, 0.0, -1, -1, int(value))


def _majority(ones: int, count: int) -> int:
    return 1 if 2 * ones > count else 0


def _grow_tree(X: np.ndarray, y: np.ndarray, r: np.random.Generator,
               mtry: int, max_depth: int | None, min_leaf: int) -> tuple:
    """Grow one tree on (X, y); nodes stored flat, children by index."""
    q = X.shape[1]
    nodes: list = []
    # stack entries: (row indices, depth, parent node index, is_left_child)
    stack = [(np.arange(X.shape[0]), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        ys = y[idx]
        count = idx.shape[0]
        ones = int(ys.sum())
        split = None
        can_split = (0 < ones < count
                     and count >= 2 * min_leaf
                     and (max_depth is None or depth < max_depth))
        if can_split:
            feats = r.permutation(q)[:mtry]
            split = _best_split(X[idx], ys, feats, min_leaf)
        my_index = len(nodes)
        if split is None:
            nodes.append(_leaf(_majority(ones, count)))
        else:
            f, thr = split
            nodes.append([f, thr, -1, -1, -1])
            mask = X[idx, f] < thr
            # push right first so the left child is grown (and draws rng) first
            stack.append((idx[~mask], depth + 1, my_index, False))
            stack.append((idx[mask], depth + 1, my_index, True))
        if parent >= 0:
            nodes[parent][2 if is_left else 3] = my_index
    return tuple(tuple(nd) for nd in nodes)


def _tree_predict(nodes: tuple, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=int)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        ni, idx = stack.pop()
        if idx.size == 0:
            continue
        f, thr, left, right, value = nodes[ni]
        if f < 0:
            out[idx] = value
        else:
            mask = X[idx, f] < thr
            stack.append((left, idx[mask]))
            stack.append((right, idx[~mask]))
    return out


def _fit_forest(spec: ClassifierSpec, X: np.ndarray, t: np.ndarray, rng_seed: int):
    n, q = X.shape
    if spec.features_per_split == "sqrt":
        mtry = max(1, math.ceil(math.sqrt(q)))
    else:
        mtry = min(int(spec.features_per_split), q)
    trees = []
    for tree_index in range(spec.trees):
        r = rng.stream(rng_seed, spec.seed_stream, tree_index)
        boot = r.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], t[boot], r, mtry,
                                spec.max_depth, spec.min_leaf))
    return _ForestState(tuple(trees))


# --------------------------------------------------------------------- #
# Public surface
# --------------------------------------------------------------------- #

def train(spec: ClassifierSpec, X: np.ndarray, T: np.ndarray,
          rng_seed: int = 0) -> TrainedModel:
    """Fit a classifier; deterministic given ``(spec, X, T, rng_seed)``.

    ``X`` may have zero columns (intercept-only logistic).  A single-class
    ``T`` is allowed: the model then predicts that class constantly.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise FitError("X must be a 2-D matrix")
    T = np.asarray(T).astype(int)
    n = X.shape[0]
    if T.shape != (n,):
        raise FitError(f"inconsistent dimensions: {n} rows vs {T.shape[0]} labels")
    if n < 2:
        raise FitError("need at least 2 training rows")
    if spec.family == "logistic":
        w, iters, converged = _fit_logistic(X, T, resolve_ridge(spec, n))
        state = _LogisticState(w, resolve_ridge(spec, n), iters, converged)
    elif spec.family == "forest":
        state = _fit_forest(spec, X, T, rng_seed)
    else:
        state = _KnnState(X.copy(), T.copy(), spec.k)
    return TrainedModel(spec, state, X.shape[1], n)


def classify_rows(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Hard 0/1 predictions for each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.n_features:
        raise FitError(f"arity mismatch: model expects {m.n_features} features, "
                       f"got {X.shape[1]}")
    if m.spec.family == "logistic":
        eta = m.state.weights[0] + X @ m.state.weights[1:]
        return (eta > 0.0).astype(int)  # eta == 0 means p == 0.5, ties to 0
    if m.spec.family == "forest":
        votes = np.zeros(X.shape[0], dtype=int)
        for nodes in m.state.trees:
            votes += _tree_predict(nodes, X)
        return (2 * votes > len(m.state.trees)).astype(int)
    # knn: stable argsort makes equidistant neighbors resolve by row index
    dist = cdist(X, m.state.X)
    k = min(m.state.k, m.state.X.shape[0])
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    ones = m.state.t[order].sum(axis=1)
    return (2 * ones > k).astype(int)


def classify(m: TrainedModel, x: np.ndarray) -> int:
    """Classify a single feature row."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != m.n_features:
        raise FitError(f"arity mismatch: model expects {m.n_features} features")
    return int(classify_rows(m, x[None, :])[0])


def loglik(m: TrainedModel, X: np.ndarray, T: np.ndarray) -> float:
    """Unpenalized log-likelihood of a fitted logistic model on (X, T)."""
    if m.spec.family != "logistic":
        raise FitError("loglik is defined for logistic models only")
    X = np.asarray(X, dtype=float)
    if X.shape[1] != m.n_features:
        raise FitError("arity mismatch in loglik")
    return logistic_loglik(m.state.weights, X, np.asarray(T).astype(int))
