"""Fit q(y|z) on one fold and rewrite another fold's y column with it.

The regression mimic fits r(z) ~ E[y|z] (boosted depth-3 trees by default,
an MLP for very wide z), measures the residuals, and replaces each
held-out y with r(z) + s, where s is full-covariance Gaussian noise with
probability 0.3 and per-coordinate Laplace noise otherwise.  Both noise
families have full support, so the mimicked conditional is positive
wherever the true one is, which is the support condition the downstream
test relies on.

The uniform mimic ignores z entirely and draws y uniformly inside the
observed (padded) range, the simplest conditional with a provable gap
bound for bounded scalar y.

Mimicked y columns are emitted as continuous even when the source y was
categorical (codes plus continuous noise).  A frequency-table mimic that
preserves categorical y exactly is available behind
``MimicConfig.categorical_table``; it bins z coarsely and samples codes
from the empirical conditional per bin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import BoostedTrees, FeatureEncoder, fit_boosted_regressor
from .core import Column, Dataset, derive_rng
from .errors import DegenerateRange, MimicSupportWarning, SchemaMismatch, TooFewRows
from .nn import Mlp, MlpConfig, mlp_train

#: Switch from boosted trees to an MLP regressor above this z width.
TREES_MAX_Z = 50

_TABLE_MAX_COLS = 6  # z columns used for the coarse bins of the table mimic


@dataclass(frozen=True)
class MimicConfig:
    regressor: str = "auto"  # "auto" | "trees" | "mlp"
    gaussian_prob: float = 0.3
    tree_rounds: int = 200
    tree_lr: float = 0.1
    tree_depth: int = 3  # depth 1 = boosted stumps
    crossfit_residuals: bool = False
    mlp: MlpConfig = field(default_factory=lambda: MlpConfig(widths=(32,), epochs=100, loss="squared"))
    categorical_table: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.regressor not in ("auto", "trees", "mlp"):
            raise ValueError(f"unknown regressor {self.regressor!r}")
        if not 0.0 <= self.gaussian_prob <= 1.0:
            raise ValueError("gaussian_prob must lie in [0, 1]")


@dataclass
class MimicModel:
    """Fitted generator of y-hat given z."""

    kind: str  # "regression" | "uniform" | "table"
    y_cols: tuple[Column, ...]
    z_cols: tuple[Column, ...]
    encoder: FeatureEncoder | None = None
    trees: list[BoostedTrees] | None = None
    net: Mlp | None = None
    chol: np.ndarray | None = None
    laplace_scales: np.ndarray | None = None
    gaussian_prob: float = 0.3
    bounds: np.ndarray | None = None  # (n_y, 2) for the uniform kind
    bin_cols: tuple[int, ...] = ()
    bin_edges: list[np.ndarray] = field(default_factory=list)
    tables: list[dict] = field(default_factory=list)

    def predict_mean(self, z_block: np.ndarray) -> np.ndarray:
        if self.kind != "regression":
            raise ValueError("predict_mean is only defined for the regression kind")
        zf = self.encoder.transform(z_block)
        if self.net is not None:
            return self.net.forward(zf)
        return np.column_stack([m.predict_margin(zf, rounds=len(m.trees)) for m in self.trees])


def _check_z_schema(model: MimicModel, ds: Dataset) -> None:
    if ds.z_cols != model.z_cols:
        raise SchemaMismatch("z columns of the dataset do not match the fitted mimic")
    if ds.n_y != len(model.y_cols):
        raise SchemaMismatch("y width of the dataset does not match the fitted mimic")


def _fit_regressors(zf: np.ndarray, y: np.ndarray, use_mlp: bool, config: MimicConfig, seed: int):
    """Fit the mean regressor on (zf, y); returns (net, trees, predict_fn)."""
    if use_mlp:
        net = mlp_train(zf, y, replace(config.mlp, loss="squared", seed=seed))
        return net, None, net.forward
    trees = [
        fit_boosted_regressor(
            zf,
            y[:, k],
            rounds=config.tree_rounds,
            learning_rate=config.tree_lr,
            max_depth=config.tree_depth,
        )
        for k in range(y.shape[1])
    ]

    def predict(f):
        return np.column_stack([m.predict_margin(f, rounds=len(m.trees)) for m in trees])

    return None, trees, predict


def fit_reg_mimic(d2: Dataset, config: MimicConfig = MimicConfig()) -> MimicModel:
    """Fit the regression mimic on the (y, z) blocks of ``d2``.

    Residual moments are measured in-sample on the fit fold by default.
    A flexible regressor absorbs some noise there, so the moments run a
    little tight; ``crossfit_residuals`` switches to two-fold cross
    predictions for honest predictive spread (the final regressor is still
    refit on all of d2).  The tighter default gives the downstream
    classifiers a crisper real-vs-mimic contrast, which is what the test's
    power comes from.  Gaussian noise uses the shrunk full covariance;
    Laplace noise uses per-coordinate scales with 2 b^2 = variance.
    """
    if d2.n_rows < 20:
        raise TooFewRows(f"regression mimic needs >= 20 rows, got {d2.n_rows}")
    if d2.n_y < 1:
        raise SchemaMismatch("regression mimic needs at least one y column")
    if config.categorical_table and all(c.kind == "categorical" for c in d2.y_cols):
        return _fit_table_mimic(d2, config)
    y = d2.y_block()
    encoder = FeatureEncoder(d2.z_cols)
    zf = encoder.transform(d2.z_block())

    use_mlp = config.regressor == "mlp" or (config.regressor == "auto" and d2.n_z > TREES_MAX_Z)
    net, trees, predict = _fit_regressors(zf, y, use_mlp, config, config.seed)

    if config.crossfit_residuals:
        order = derive_rng(config.seed, "mimic-crossfit").permutation(d2.n_rows)
        fold_a, fold_b = order[: d2.n_rows // 2], order[d2.n_rows // 2 :]
        resid = np.empty_like(y)
        for fit_idx, score_idx in ((fold_a, fold_b), (fold_b, fold_a)):
            *_, fold_predict = _fit_regressors(zf[fit_idx], y[fit_idx], use_mlp, config, config.seed)
            resid[score_idx] = y[score_idx] - fold_predict(zf[score_idx])
    else:
        resid = y - predict(zf)
    cov = np.atleast_2d(np.cov(resid.T))
    shrink = 1e-6 * float(np.trace(cov)) / d2.n_y
    if shrink <= 0:
        shrink = 1e-12  # exactly-realizable regression: keep the factor valid
    chol = np.linalg.cholesky(cov + shrink * np.eye(d2.n_y))
    scales = np.sqrt(np.maximum(resid.var(axis=0, ddof=1) / 2.0, 1e-24))
    return MimicModel(
        kind="regression",
        y_cols=d2.y_cols,
        z_cols=d2.z_cols,
        encoder=encoder,
        trees=trees,
        net=net,
        chol=chol,
        laplace_scales=scales,
        gaussian_prob=config.gaussian_prob,
    )


def fit_uniform_mimic(d2: Dataset, padding: float = 0.0) -> MimicModel:
    """Per-coordinate uniform bounds over the observed (padded) y range."""
    if any(c.kind == "categorical" for c in d2.y_cols):
        warnings.warn(
            "uniform mimic on categorical y treats codes as a continuous range",
            MimicSupportWarning,
        )
    y = d2.y_block()
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    span = hi - lo
    if np.any(span <= 0):
        k = int(np.argmax(span <= 0))
        raise DegenerateRange(f"y column {d2.y_cols[k].name!r} is constant")
    return MimicModel(
        kind="uniform",
        y_cols=d2.y_cols,
        z_cols=d2.z_cols,
        bounds=np.column_stack([lo - padding * span, hi + padding * span]),
    )


def _fit_table_mimic(d2: Dataset, config: MimicConfig) -> MimicModel:
    """Empirical conditional frequency table over coarse z bins."""
    zb = d2.z_block()
    bin_cols = tuple(range(min(d2.n_z, _TABLE_MAX_COLS)))
    edges = []
    for j in bin_cols:
        if d2.z_cols[j].kind == "categorical":
            edges.append(None)  # codes are their own bins
        else:
            edges.append(np.asarray([np.median(zb[:, j])]))
    bins = _bin_ids(zb, bin_cols, edges)
    y = d2.y_block().astype(np.intp)
    tables = []
    for k, col in enumerate(d2.y_cols):
        per_bin: dict = {}
        counts = np.bincount(y[:, k], minlength=col.cardinality).astype(np.float64)
        per_bin["__global__"] = counts / counts.sum()
        for b in np.unique(bins):
            sel = y[bins == b, k]
            c = np.bincount(sel, minlength=col.cardinality).astype(np.float64)
            per_bin[int(b)] = c / c.sum()
        tables.append(per_bin)
    return MimicModel(
        kind="table",
        y_cols=d2.y_cols,
        z_cols=d2.z_cols,
        bin_cols=bin_cols,
        bin_edges=edges,
        tables=tables,
    )


def _bin_ids(zb: np.ndarray, bin_cols, edges) -> np.ndarray:
    if not bin_cols:
        return np.zeros(zb.shape[0], dtype=np.intp)
    ids = np.zeros(zb.shape[0], dtype=np.intp)
    for j, e in zip(bin_cols, edges):
        if e is None:
            part = zb[:, j].astype(np.intp)
            width = int(part.max()) + 1 if part.size else 1
        else:
            part = np.searchsorted(e, zb[:, j], side="right")
            width = e.size + 1
        ids = ids * width + part
    return ids


def mimic_apply(model: MimicModel, d3: Dataset, seed: int = 0) -> Dataset:
    """Rewrite the y block of ``d3`` with draws from the fitted mimic.

    x and z pass through bit-exactly; y-hat depends only on z and fresh
    noise, never on x.  Deterministic given (model, d3, seed).
    """
    _check_z_schema(model, d3)
    rng = derive_rng(seed, "mimic-apply")
    n, n_y = d3.n_rows, d3.n_y
    if model.kind == "regression":
        base = model.predict_mean(d3.z_block())
        use_gauss = rng.random(n) < model.gaussian_prob
        gauss = rng.standard_normal((n, n_y)) @ model.chol.T
        lap = rng.laplace(0.0, model.laplace_scales, size=(n, n_y))
        y_hat = base + np.where(use_gauss[:, None], gauss, lap)
        new_cols = tuple(Column(c.name) for c in model.y_cols)
    elif model.kind == "uniform":
        y_hat = rng.uniform(model.bounds[:, 0], model.bounds[:, 1], size=(n, n_y))
        new_cols = tuple(Column(c.name) for c in model.y_cols)
    elif model.kind == "table":
        bins = _bin_ids(d3.z_block(), model.bin_cols, model.bin_edges)
        y_hat = np.empty((n, n_y))
        for k, (col, table) in enumerate(zip(model.y_cols, model.tables)):
            probs = np.stack([table.get(int(b), table["__global__"]) for b in bins])
            u = rng.random(n)
            y_hat[:, k] = (u[:, None] >= probs.cumsum(axis=1)).sum(axis=1)
        new_cols = model.y_cols
    else:
        raise ValueError(f"unknown mimic kind {model.kind!r}")
    return d3.with_y(y_hat, new_cols)


def noise_density(model: MimicModel, points: np.ndarray) -> np.ndarray:
    """Density of the mimic noise mixture at the given points.

    Positive everywhere: the Gaussian/Laplace mixture has full support on
    R^n_y, which is what guarantees the support-overlap hypothesis of the
    test regardless of the fitted regressor.
    """
    if model.kind != "regression":
        raise ValueError("noise_density is only defined for the regression kind")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n_y = len(model.y_cols)
    cov_solve = np.linalg.solve(model.chol, pts.T)  # chol @ chol.T = cov
    quad = np.sum(cov_solve**2, axis=0)
    logdet = 2.0 * float(np.log(np.diag(model.chol)).sum())
    g = np.exp(-0.5 * quad - 0.5 * logdet - 0.5 * n_y * np.log(2 * np.pi))
    b = model.laplace_scales
    l = np.exp(-np.abs(pts) / b).prod(axis=1) / float(np.prod(2.0 * b))
    return model.gaussian_prob * g + (1.0 - model.gaussian_prob) * l
