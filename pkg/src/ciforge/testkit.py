"""End-to-end conditional-independence test.

One call runs the whole pipeline: split the sample into thirds, fit the
mimic on the second third's (y, z), rewrite the third third's y column,
label mimicked rows 0 and untouched first-third rows 1, train one
classifier without x and one with x on a shared stratified
train/validation/test split, and decide from the difference of their test
errors.

Both classifiers are scored on the same test rows, so the gap is the mean
of per-row loss differences and is identical (bit-exactly) to |e1 - e2|.
The p-value is the subgaussian tail 2 exp(-n gap^2 / 2) of that paired
statistic under a zero-mean null; it is conservative for trained (rather
than error-optimal) classifiers, whose null mean need not be exactly zero.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classify import (
    GbtConfig,
    LogRegConfig,
    classifier_error,
    gbt_train,
    logreg_train,
    mlp_classifier_train,
)
from .core import (
    Column,
    DEFAULT_SEED,
    Dataset,
    LabeledDataset,
    concat,
    derive_rng,
    split_three_way,
    strip_x,
)
from .errors import SchemaMismatch, TooFewRows
from .mimic import MimicConfig, fit_reg_mimic, fit_uniform_mimic, mimic_apply
from .nn import MlpConfig


def child_seed(seed: int, label: str) -> int:
    """A stable 63-bit child seed for a named subsystem."""
    return int(derive_rng(seed, label).integers(2**63))


def gap_pvalue(gap: float, n_s: int) -> float:
    """Subgaussian tail bound for the paired error-difference statistic.

    Floored at the smallest positive normal float so the p-value stays in
    (0, 1] even when the exponent underflows.
    """
    if not 0.0 <= gap <= 1.0:
        raise ValueError(f"gap must lie in [0, 1], got {gap}")
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    return max(min(1.0, 2.0 * math.exp(-n_s * gap * gap / 2.0)), sys.float_info.min)


def erm_excess_bound(d_vc: int, n_t: int, delta: float, c: float = 1.0) -> float:
    """High-probability excess-error bound for an ERM classifier.

    c * sqrt(d_vc / n_t) + sqrt(2 ln(1/delta) / n_t); holds with
    probability at least 1 - delta.  The leading constant is not pinned by
    theory, so it is exposed as ``c`` (reporting only).
    """
    if d_vc < 1 or n_t < 1:
        raise ValueError("d_vc and n_t must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return c * math.sqrt(d_vc / n_t) + math.sqrt(2.0 * math.log(1.0 / delta) / n_t)


@dataclass(frozen=True)
class TestConfig:
    """Configuration for one conditional-independence test."""

    __test__ = False  # keep pytest from collecting the Test* name

    mimic: str = "reg"  # "reg" | "uniform"
    classifier: str = "gbt"  # "gbt" | "mlp" | "logreg"
    alpha: float | None = 0.05
    tau: float | None = None
    seed: int = DEFAULT_SEED
    tvs: tuple[float, float, float] = (0.5, 0.25, 0.25)
    uniform_padding: float = 0.0
    mimic_config: MimicConfig = field(default_factory=MimicConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    mlp: MlpConfig = field(default_factory=lambda: MlpConfig(widths=(32,), epochs=80, loss="logistic"))
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    vc_dim: int | None = None
    erm_delta: float = 0.05
    erm_c: float = 1.0

    def __post_init__(self):
        if self.mimic not in ("reg", "uniform"):
            raise ValueError(f"unknown mimic kind {self.mimic!r}")
        if self.classifier not in ("gbt", "mlp", "logreg"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.alpha is None and self.tau is None:
            raise ValueError("one of alpha or tau must be given")
        if abs(sum(self.tvs) - 1.0) > 1e-9 or any(f <= 0 for f in self.tvs):
            raise ValueError("tvs fractions must be positive and sum to 1")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test run, JSON-serializable with stable keys."""

    __test__ = False  # keep pytest from collecting the Test* name

    e1: float
    e2: float
    gap: float
    n_s: int
    p_value: float
    tau: float
    decision: str
    seed: int
    erm_bound: float | None
    split_sizes: dict
    config: dict

    def __post_init__(self):
        if not 0.0 <= self.gap <= 1.0:
            raise AssertionError(f"gap outside [0, 1]: {self.gap}")
        if not 0.0 < self.p_value <= 1.0:
            raise AssertionError(f"p-value outside (0, 1]: {self.p_value}")
        if (self.decision == "H1") != (self.gap > self.tau):
            raise AssertionError("decision is inconsistent with gap > tau")

    def to_dict(self) -> dict:
        return {
            "e1": self.e1,
            "e2": self.e2,
            "gap": self.gap,
            "n_s": self.n_s,
            "p_value": self.p_value,
            "tau": self.tau,
            "decision": self.decision,
            "seed": self.seed,
            "erm_bound": self.erm_bound,
            "split_sizes": self.split_sizes,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def stratified_three_split(labels: np.ndarray, fractions, rng: np.random.Generator):
    """Per-class shuffled index split; every part holds both classes."""
    f_t, f_v, _ = fractions
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (0, 1):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < 3:
            raise TooFewRows(f"class {cls} has {idx.size} rows; need >= 3 to stratify")
        idx = idx[rng.permutation(idx.size)]
        n_t = max(1, int(np.floor(f_t * idx.size)))
        n_v = max(1, int(np.floor(f_v * idx.size)))
        if n_t + n_v >= idx.size:
            n_t, n_v = idx.size - 2, 1
        parts[0].append(idx[:n_t])
        parts[1].append(idx[n_t : n_t + n_v])
        parts[2].append(idx[n_t + n_v :])
    return tuple(np.concatenate(p) for p in parts)


def _continuous_y(ds: Dataset) -> Dataset:
    """Recast categorical y columns as continuous (codes are valid reals)."""
    new_cols = tuple(Column(c.name) for c in ds.y_cols)
    return Dataset(ds.x_cols, new_cols, ds.z_cols, ds.data)


def _train_classifier(kind: str, train, val, config: TestConfig, seed: int):
    if kind == "gbt":
        return gbt_train(train, val, replace(config.gbt, seed=seed))
    if kind == "mlp":
        return mlp_classifier_train(train, val, replace(config.mlp, seed=seed))
    return logreg_train(train, val, replace(config.logreg, seed=seed))


def ci_test(ds: Dataset, config: TestConfig = TestConfig()) -> TestReport:
    """Run the full mimic-and-classify test on one dataset."""
    if ds.n_rows < 60:
        raise TooFewRows(f"test needs >= 60 rows, got {ds.n_rows}")
    if ds.n_x < 1 or ds.n_y < 1:
        raise SchemaMismatch("test needs at least one x and one y column")
    seed = config.seed

    plan = split_three_way(ds, seed)
    d1 = ds.take(plan.thirds[0])
    d2 = ds.take(plan.thirds[1])
    d3 = ds.take(plan.thirds[2])

    if config.mimic == "reg":
        model = fit_reg_mimic(d2, replace(config.mimic_config, seed=child_seed(seed, "mimic-fit")))
    else:
        model = fit_uniform_mimic(d2, config.uniform_padding)
    d_prime = mimic_apply(model, d3, seed=child_seed(seed, "mimic-noise"))

    d1_eff = d1 if d1.y_cols == d_prime.y_cols else _continuous_y(d1)
    labeled = concat(
        LabeledDataset(d1_eff, np.ones(d1_eff.n_rows, dtype=np.int8)),
        LabeledDataset(d_prime, np.zeros(d_prime.n_rows, dtype=np.int8)),
    )

    rng = derive_rng(seed, "tvt-split")
    idx_t, idx_v, idx_s = stratified_three_split(labeled.labels, config.tvs, rng)
    part_t, part_v, part_s = labeled.take(idx_t), labeled.take(idx_v), labeled.take(idx_s)

    f1 = _train_classifier(
        config.classifier, strip_x(part_t), strip_x(part_v), config, child_seed(seed, "clf-f1")
    )
    f2 = _train_classifier(config.classifier, part_t, part_v, config, child_seed(seed, "clf-f2"))

    err1 = classifier_error(f1, strip_x(part_s))
    err2 = classifier_error(f2, part_s)
    # Paired statistic on the shared test rows: mean of per-row loss
    # differences.  Integer loss sums make this bit-identical to |e1 - e2|.
    diff = err1.losses.astype(np.int64) - err2.losses.astype(np.int64)
    gap = abs(float(diff.sum()) / err1.n_test)

    n_s = err1.n_test
    tau = config.tau if config.tau is not None else math.sqrt(2.0 * math.log(2.0 / config.alpha) / n_s)
    p_value = gap_pvalue(gap, n_s)
    erm = None
    if config.vc_dim is not None:
        erm = erm_excess_bound(config.vc_dim, part_t.n_rows, config.erm_delta, config.erm_c)

    cfg_echo = asdict(config)
    return TestReport(
        e1=err1.error_rate,
        e2=err2.error_rate,
        gap=gap,
        n_s=n_s,
        p_value=p_value,
        tau=float(tau),
        decision="H1" if gap > tau else "H0",
        seed=seed,
        erm_bound=erm,
        split_sizes={
            "d1": d1.n_rows,
            "d2": d2.n_rows,
            "d3": d3.n_rows,
            "train": part_t.n_rows,
            "val": part_v.n_rows,
            "test": part_s.n_rows,
        },
        config=cfg_echo,
    )
