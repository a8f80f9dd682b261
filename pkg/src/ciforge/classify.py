"""Binary classifiers for the joint-vs-mimic discrimination step.

The workhorse is a from-scratch gradient-boosted tree ensemble on logistic
loss with second-order (Newton) leaf weights and exact greedy split search:

* candidate thresholds sit between consecutive distinct sorted values, so
  tied feature values can never be separated and training is invariant to
  row permutations;
* ties in gain break toward the lowest feature index, then the lowest
  threshold, making every fit bit-deterministic;
* the round played on the validation set with the lowest logistic loss
  becomes ``best_round``; prediction uses only that prefix of trees;
* if a round would increase the training loss, its leaf values are halved
  until it does not (deterministic backoff), so the per-round training-loss
  sequence is non-increasing by construction.

Logistic regression (Newton/IRLS) and an MLP wrapper cover the baseline
classifier kinds.  All models score through the same Dataset-level
interface; a model trained without x columns simply never looks them up,
so its predictions cannot depend on x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Column, Dataset, LabeledDataset
from .errors import EmptyTest, SchemaMismatch, SingleClass
from .nn import Mlp, MlpConfig, mlp_train

ONE_HOT_CAP = 32
_GAIN_EPS = 1e-12


# ---------------------------------------------------------------------------
# Feature encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureEncoder:
    """Maps raw column blocks to a numeric feature matrix.

    Categorical columns with cardinality <= 32 are one-hot encoded;
    larger ones keep their ordinal codes.  Continuous columns pass through.
    """

    cols: tuple[Column, ...]

    @property
    def width(self) -> int:
        total = 0
        for c in self.cols:
            if c.kind == "categorical" and c.cardinality <= ONE_HOT_CAP:
                total += c.cardinality
            else:
                total += 1
        return total

    def transform(self, block: np.ndarray) -> np.ndarray:
        block = np.atleast_2d(np.asarray(block, dtype=np.float64))
        if block.shape[1] != len(self.cols):
            raise SchemaMismatch(
                f"expected {len(self.cols)} columns, got {block.shape[1]}"
            )
        parts = []
        for j, c in enumerate(self.cols):
            v = block[:, j]
            if c.kind == "categorical" and c.cardinality <= ONE_HOT_CAP:
                hot = np.zeros((v.size, c.cardinality))
                hot[np.arange(v.size), v.astype(np.intp)] = 1.0
                parts.append(hot)
            else:
                parts.append(v[:, None])
        if not parts:
            return np.empty((block.shape[0], 0))
        return np.hstack(parts)


def _resolve_columns(ds: Dataset, wanted: tuple[tuple[str, Column], ...]) -> np.ndarray:
    """Gather the named columns from a dataset, segment by segment.

    Extra columns in the dataset are ignored, which is what lets a model
    trained on x-stripped data score full rows without ever touching x.
    """
    blocks = {"x": (ds.x_cols, ds.x_block()), "y": (ds.y_cols, ds.y_block()), "z": (ds.z_cols, ds.z_block())}
    out = np.empty((ds.n_rows, len(wanted)))
    for k, (segment, col) in enumerate(wanted):
        cols, block = blocks[segment]
        names = [c.name for c in cols]
        try:
            j = names.index(col.name)
        except ValueError:
            raise SchemaMismatch(f"dataset lacks {segment} column {col.name!r}") from None
        found = cols[j]
        if (found.kind, found.cardinality) != (col.kind, col.cardinality):
            raise SchemaMismatch(f"column {col.name!r} kind changed since training")
        out[:, k] = block[:, j]
    return out


def dataset_schema(ds: Dataset, include_x: bool) -> tuple[tuple[str, Column], ...]:
    wanted: list[tuple[str, Column]] = []
    if include_x:
        wanted += [("x", c) for c in ds.x_cols]
    wanted += [("y", c) for c in ds.y_cols]
    wanted += [("z", c) for c in ds.z_cols]
    return tuple(wanted)


# ---------------------------------------------------------------------------
# Gradient-boosted trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    l2: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 0  # no stochastic steps; kept for interface uniformity


@dataclass
class Tree:
    """Flat arrays, one entry per node; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def predict(self, f: np.ndarray) -> np.ndarray:
        out = np.empty(f.shape[0])
        stack = [(0, np.arange(f.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] < 0:
                out[idx] = self.value[node]
                continue
            go_left = f[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def scale_values(self, factor: float) -> None:
        self.value = self.value * factor


class _TreeBuilder:
    def __init__(self, f: np.ndarray, cfg: GbtConfig):
        self.f = f
        self.cfg = cfg
        # Pre-sorted row order per feature, shared across all nodes and rounds.
        self.order = [np.argsort(f[:, j], kind="stable") for j in range(f.shape[1])]

    def build(self, g: np.ndarray, h: np.ndarray) -> Tree:
        feature, threshold, left, right, value = [], [], [], [], []

        def leaf(g_sum: float, h_sum: float) -> int:
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(-g_sum / (h_sum + self.cfg.l2) * self.cfg.learning_rate)
            return node

        def grow(mask: np.ndarray, depth: int) -> int:
            g_sum = float(g[mask].sum())
            h_sum = float(h[mask].sum())
            if depth >= self.cfg.max_depth:
                return leaf(g_sum, h_sum)
            split = self._best_split(mask, g, h, g_sum, h_sum)
            if split is None:
                return leaf(g_sum, h_sum)
            j, thr = split
            node = len(feature)
            feature.append(j)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            go_left = mask & (self.f[:, j] <= thr)
            left[node] = grow(go_left, depth + 1)
            right[node] = grow(mask & ~go_left, depth + 1)
            return node

        grow(np.ones(self.f.shape[0], dtype=bool), 0)
        return Tree(
            np.asarray(feature, dtype=np.int32),
            np.asarray(threshold),
            np.asarray(left, dtype=np.int32),
            np.asarray(right, dtype=np.int32),
            np.asarray(value),
        )

    def _best_split(self, mask, g, h, g_sum, h_sum):
        cfg = self.cfg
        parent = g_sum * g_sum / (h_sum + cfg.l2)
        best_gain = _GAIN_EPS
        best = None
        for j in range(self.f.shape[1]):
            idx = self.order[j][mask[self.order[j]]]
            if idx.size < 2:
                continue
            v = self.f[idx, j]
            cg = np.cumsum(g[idx])
            ch = np.cumsum(h[idx])
            cut = np.nonzero(v[:-1] != v[1:])[0]  # boundaries between distinct values
            if cut.size == 0:
                continue
            gl, hl = cg[cut], ch[cut]
            gr, hr = g_sum - gl, h_sum - hl
            ok = (hl >= cfg.min_child_weight) & (hr >= cfg.min_child_weight)
            if not ok.any():
                continue
            gain = np.where(
                ok, gl * gl / (hl + cfg.l2) + gr * gr / (hr + cfg.l2) - parent, -np.inf
            )
            k = int(np.argmax(gain))  # first max: lowest threshold wins ties
            if gain[k] > best_gain:  # strict: lowest feature index wins ties
                lo, hi = v[cut[k]], v[cut[k] + 1]
                thr = 0.5 * (lo + hi)
                if thr >= hi:  # midpoint rounded up to the right value
                    thr = lo
                best_gain = float(gain[k])
                best = (j, float(thr))
        return best


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logloss(margin: np.ndarray, y: np.ndarray) -> float:
    per = np.logaddexp(0.0, -np.abs(margin)) + np.maximum(margin, 0.0) - margin * y
    return float(per.mean())


@dataclass
class BoostedTrees:
    """Matrix-level boosted ensemble (binary, logistic loss)."""

    trees: list[Tree]
    best_round: int
    train_loss: list[float]
    val_loss: list[float]
    config: GbtConfig

    def predict_margin(self, f: np.ndarray, rounds: int | None = None) -> np.ndarray:
        n_use = self.best_round if rounds is None else rounds
        margin = np.zeros(f.shape[0])
        for tree in self.trees[:n_use]:
            margin += tree.predict(f)
        return margin

    def predict_score(self, f: np.ndarray) -> np.ndarray:
        return _sigmoid(self.predict_margin(f))


def fit_boosted_trees(
    f_train: np.ndarray,
    y_train: np.ndarray,
    f_val: np.ndarray,
    y_val: np.ndarray,
    config: GbtConfig,
) -> BoostedTrees:
    """Boost logistic loss; select best_round on the validation set.

    ``val_loss[r]`` is the validation loss using the first r trees (entry 0
    is the empty ensemble), so best_round may be 0 when no tree helps.
    """
    y = np.asarray(y_train, dtype=np.float64)
    yv = np.asarray(y_val, dtype=np.float64)
    if np.unique(y).size < 2:
        raise SingleClass("training labels contain a single class")
    # Canonical row order (features, then label) makes every accumulation
    # order-independent, so training is bit-identical under row permutation.
    canon = np.lexsort((y,) + tuple(f_train[:, j] for j in range(f_train.shape[1] - 1, -1, -1)))
    f_train = f_train[canon]
    y = y[canon]
    builder = _TreeBuilder(f_train, config)
    margin = np.zeros(f_train.shape[0])
    margin_val = np.zeros(f_val.shape[0])
    train_loss = [_logloss(margin, y)]
    val_loss = [_logloss(margin_val, yv)]
    trees: list[Tree] = []
    for _ in range(config.rounds):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = builder.build(g, h)
        delta = tree.predict(f_train)
        # Deterministic backoff: halve the step until the training loss
        # does not increase (runs at most a handful of times near
        # saturation, usually zero).
        for _ in range(40):
            if _logloss(margin + delta, y) <= train_loss[-1]:
                break
            delta *= 0.5
            tree.scale_values(0.5)
        margin = margin + delta
        margin_val = margin_val + tree.predict(f_val)
        trees.append(tree)
        train_loss.append(_logloss(margin, y))
        val_loss.append(_logloss(margin_val, yv))
    best_round = int(np.argmin(val_loss))
    return BoostedTrees(trees, best_round, train_loss, val_loss, config)


def fit_boosted_regressor(
    f: np.ndarray, y: np.ndarray, rounds: int, learning_rate: float, max_depth: int = 1, l2: float = 1.0
) -> BoostedTrees:
    """Squared-loss boosting (unit hessian); depth 1 gives boosted stumps."""
    cfg = GbtConfig(rounds=rounds, max_depth=max_depth, learning_rate=learning_rate, l2=l2, min_child_weight=1.0)
    y = np.asarray(y, dtype=np.float64)
    builder = _TreeBuilder(f, cfg)
    pred = np.zeros(f.shape[0])
    trees: list[Tree] = []
    ones = np.ones(f.shape[0])
    losses = [float(np.mean((pred - y) ** 2))]
    for _ in range(rounds):
        tree = builder.build(pred - y, ones)
        pred = pred + tree.predict(f)
        trees.append(tree)
        losses.append(float(np.mean((pred - y) ** 2)))
    model = BoostedTrees(trees, len(trees), losses, losses, cfg)
    return model


# ---------------------------------------------------------------------------
# Logistic regression baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogRegConfig:
    max_iter: int = 50
    tol: float = 1e-10
    ridge: float = 1e-6
    seed: int = 0


@dataclass
class LogRegCore:
    coef: np.ndarray
    intercept: float
    x_mean: np.ndarray
    x_std: np.ndarray

    def predict_score(self, f: np.ndarray) -> np.ndarray:
        fs = (f - self.x_mean) / self.x_std
        return _sigmoid(fs @ self.coef + self.intercept)


def fit_logreg(f: np.ndarray, y: np.ndarray, config: LogRegConfig) -> LogRegCore:
    """Newton/IRLS with a small ridge; deterministic and seed-free."""
    y = np.asarray(y, dtype=np.float64)
    if np.unique(y).size < 2:
        raise SingleClass("training labels contain a single class")
    mean = f.mean(axis=0)
    std = f.std(axis=0)
    std[std < 1e-12] = 1.0
    fs = (f - mean) / std
    a = np.hstack([np.ones((fs.shape[0], 1)), fs])
    w = np.zeros(a.shape[1])
    for _ in range(config.max_iter):
        m = a @ w
        p = _sigmoid(m)
        grad = a.T @ (p - y) + config.ridge * w
        r = np.clip(p * (1.0 - p), 1e-9, None)
        hess = (a * r[:, None]).T @ a + config.ridge * np.eye(a.shape[1])
        step = np.linalg.solve(hess, grad)
        w = w - step
        if float(np.abs(step).max()) < config.tol:
            break
    return LogRegCore(coef=w[1:], intercept=float(w[0]), x_mean=mean, x_std=std)


# ---------------------------------------------------------------------------
# Dataset-level classifier wrappers
# ---------------------------------------------------------------------------


@dataclass
class GbtModel:
    """Boosted trees plus the column schema and encoder they were fit on."""

    booster: BoostedTrees
    schema: tuple[tuple[str, Column], ...]
    encoder: FeatureEncoder

    @property
    def best_round(self) -> int:
        return self.booster.best_round

    @property
    def trees(self) -> list[Tree]:
        return self.booster.trees

    def features(self, ds: Dataset) -> np.ndarray:
        return self.encoder.transform(_resolve_columns(ds, self.schema))

    def predict_score(self, ds: Dataset) -> np.ndarray:
        return self.booster.predict_score(self.features(ds))


@dataclass
class LinearModel:
    core: LogRegCore
    schema: tuple[tuple[str, Column], ...]
    encoder: FeatureEncoder

    def predict_score(self, ds: Dataset) -> np.ndarray:
        return self.core.predict_score(self.encoder.transform(_resolve_columns(ds, self.schema)))


@dataclass
class MlpClassifier:
    net: Mlp
    schema: tuple[tuple[str, Column], ...]
    encoder: FeatureEncoder

    def predict_score(self, ds: Dataset) -> np.ndarray:
        f = self.encoder.transform(_resolve_columns(ds, self.schema))
        return self.net.predict(f)[:, 0]


def _check_both_classes(labels: np.ndarray) -> None:
    if np.unique(labels).size < 2:
        raise SingleClass("training labels contain a single class")


def gbt_train(train: LabeledDataset, val: LabeledDataset, config: GbtConfig = GbtConfig()) -> GbtModel:
    """Fit the boosted-tree classifier on a labeled dataset."""
    _check_both_classes(train.labels)
    schema = dataset_schema(train.base, include_x=True)
    encoder = FeatureEncoder(tuple(c for _, c in schema))
    f_tr = encoder.transform(_resolve_columns(train.base, schema))
    f_va = encoder.transform(_resolve_columns(val.base, schema))
    booster = fit_boosted_trees(f_tr, train.labels, f_va, val.labels, config)
    return GbtModel(booster, schema, encoder)


def logreg_train(train: LabeledDataset, val: LabeledDataset, config: LogRegConfig = LogRegConfig()) -> LinearModel:
    """Fit the logistic-regression baseline (validation set unused: convex fit)."""
    _check_both_classes(train.labels)
    schema = dataset_schema(train.base, include_x=True)
    encoder = FeatureEncoder(tuple(c for _, c in schema))
    f_tr = encoder.transform(_resolve_columns(train.base, schema))
    core = fit_logreg(f_tr, train.labels, config)
    return LinearModel(core, schema, encoder)


def mlp_classifier_train(
    train: LabeledDataset, val: LabeledDataset, config: MlpConfig = MlpConfig(widths=(32,), epochs=80, loss="logistic")
) -> MlpClassifier:
    """Fit the MLP baseline with logistic loss (validation set unused)."""
    _check_both_classes(train.labels)
    if config.loss != "logistic":
        raise ValueError("classifier MLP must use logistic loss")
    schema = dataset_schema(train.base, include_x=True)
    encoder = FeatureEncoder(tuple(c for _, c in schema))
    f_tr = encoder.transform(_resolve_columns(train.base, schema))
    net = mlp_train(f_tr, train.labels.astype(np.float64), config)
    return MlpClassifier(net, schema, encoder)


@dataclass(frozen=True)
class ClassifierError:
    """Zero-one test error with the per-row losses that define it."""

    error_rate: float
    n_test: int
    losses: np.ndarray

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=np.int8)
        losses.setflags(write=False)
        object.__setattr__(self, "losses", losses)


def classifier_error(model, test: LabeledDataset) -> ClassifierError:
    """Zero-one error at score threshold 0.5 on a labeled test set."""
    if test.n_rows == 0:
        raise EmptyTest("empty test set")
    scores = model.predict_score(test.base)
    preds = (scores >= 0.5).astype(np.int8)
    losses = (preds != test.labels).astype(np.int8)
    return ClassifierError(error_rate=float(losses.mean()), n_test=test.n_rows, losses=losses)
