"""One-vs-one multiclass SVM with a Gaussian kernel.

The binary machines are trained by a two-variable coordinate-ascent dual
solver (SMO).  Everything here is deterministic: the solver uses no
randomness and fold construction depends only on (labels, k, seed).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataError
from .signals import CLASS_ORDER

MODEL_FORMAT = "gearcheck-model-v1"

#: KKT tolerance the solver must reach before a model is accepted
KKT_TOLERANCE = 1e-3
#: hard cap on solver sweeps over the training set
MAX_PASSES = 10_000
#: dual variables at or below this are not stored as support vectors
SV_THRESHOLD = 1e-8
#: kernel-scale grid, as multiples of the median pairwise distance
SCALE_GRID = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

_CONST_STD_REL = 1e-12


def canonical_class_order(labels) -> tuple[str, ...]:
    """Health labels keep severity order; other label sets sort lexicographically."""
    unique = {str(label) for label in labels}
    health = [h.value for h in CLASS_ORDER]
    if unique <= set(health):
        return tuple(h for h in health if h in unique)
    return tuple(sorted(unique))


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel K(u,v) = exp(-||u-v||^2 / (2*scale^2)) with box constraint."""

    scale: float
    c_penalty: float = 1.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel kind: {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("kernel scale must be positive")
        if not self.c_penalty > 0:
            raise ValueError("c_penalty must be positive")


def gaussian_kernel(a: np.ndarray, b: np.ndarray, scale: float) -> np.ndarray:
    """Pairwise kernel matrix between the rows of `a` and the rows of `b`."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * scale * scale))


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    """Per-feature centering/scaling fitted on training rows only.

    Columns that are constant on the training rows are dropped; `kept` maps
    the retained columns back to the original layout.
    """

    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray
    input_dim: int

    @property
    def dropped(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.input_dim) if i not in set(self.kept.tolist()))

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.input_dim:
            raise ValueError(f"feature arity mismatch: got {rows.shape[1]} features, "
                             f"expected {self.input_dim}")
        return (rows[:, self.kept] - self.mean) / self.std


def fit_standardizer(rows: np.ndarray) -> Standardizer:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] < 2:
        raise DataError("standardizer needs at least 2 rows")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population form (N denominator)
    floor = _CONST_STD_REL * np.maximum(1.0, np.abs(mean))
    kept = np.flatnonzero(std > floor)
    return Standardizer(mean=mean[kept], std=std[kept], kept=kept,
                        input_dim=rows.shape[1])


# ---------------------------------------------------------------------------
# binary SVM (SMO dual solver)


@dataclass(frozen=True)
class BinarySvmModel:
    """Soft-margin kernel machine for one class pair.

    `class_pair[0]` is the positive class; the decision function is
    f(x) = sum_i dual_weights[i] * K(sv[i], x) + bias.
    """

    class_pair: tuple[str, str]
    support_vectors: np.ndarray
    dual_weights: np.ndarray
    bias: float
    kernel: KernelConfig
    kkt_residual: float
    dual_balance: float

    def decision(self, rows: np.ndarray) -> np.ndarray:
        k = gaussian_kernel(rows, self.support_vectors, self.kernel.scale)
        return k @ self.dual_weights + self.bias


def _kkt_residual(alpha: np.ndarray, y: np.ndarray, f: np.ndarray, c: float) -> float:
    """Largest violation of the dual optimality conditions.

    alpha=0 rows need margin >= 1, alpha=C rows need margin <= 1, interior
    rows need margin == 1.
    """
    margins = y * f
    at_zero = alpha <= SV_THRESHOLD
    at_cap = alpha >= c - SV_THRESHOLD
    interior = ~(at_zero | at_cap)
    residual = 0.0
    if np.any(at_zero):
        residual = max(residual, float(np.max(1.0 - margins[at_zero])))
    if np.any(at_cap):
        residual = max(residual, float(np.max(margins[at_cap] - 1.0)))
    if np.any(interior):
        residual = max(residual, float(np.max(np.abs(margins[interior] - 1.0))))
    return max(residual, 0.0)


def _bias_from_box(alpha: np.ndarray, y: np.ndarray, g: np.ndarray,
                   c: float) -> float:
    """Bias consistent with the dual solution `alpha` (g excludes the bias).

    Interior alphas pin the bias exactly (averaged for robustness).  When
    every alpha sits on a bound the bias is only constrained to an interval:
    rows at zero need margin >= 1 and rows at C need margin <= 1, which
    translate to per-row bounds on b; the midpoint is returned.
    """
    candidates = y - g
    interior = (alpha > SV_THRESHOLD) & (alpha < c - SV_THRESHOLD)
    if np.any(interior):
        return float(np.mean(candidates[interior]))
    at_zero = alpha <= SV_THRESHOLD
    at_cap = ~at_zero
    needs_below = (at_zero & (y < 0)) | (at_cap & (y > 0))  # b <= y - g
    needs_above = (at_zero & (y > 0)) | (at_cap & (y < 0))  # b >= y - g
    hi = float(np.min(candidates[needs_below])) if np.any(needs_below) else np.inf
    lo = float(np.max(candidates[needs_above])) if np.any(needs_above) else -np.inf
    if not np.isfinite(lo):
        return hi
    if not np.isfinite(hi):
        return lo
    return 0.5 * (lo + hi)


def _smo(kmat: np.ndarray, y: np.ndarray, c: float) -> tuple[np.ndarray, float, int]:
    """Solve the soft-margin dual by two-variable coordinate ascent.

    Each pass updates the maximal violating pair: the dual objective rises
    monotonically and the solver stops once the violation gap falls below
    KKT_TOLERANCE, which bounds the margin residual by half the gap.  Pair
    selection breaks ties by lowest index, so identical inputs always
    produce identical models.  Returns (alpha, bias, passes).
    """
    n = y.size
    alpha = np.zeros(n)
    g = np.zeros(n)  # g_i = sum_j alpha_j y_j K_ij (decision values minus bias)
    positive = y > 0

    for passes in range(1, MAX_PASSES + 1):
        # b must satisfy b >= y_i - g_i on rows free to grow their margin
        # term and b <= y_j - g_j on rows free to shrink it; an empty
        # interval is exactly a KKT violation, and its widest violating
        # pair is the best two-variable working set.
        candidates = y - g
        can_up = np.where(positive, alpha < c - SV_THRESHOLD, alpha > SV_THRESHOLD)
        can_down = np.where(positive, alpha > SV_THRESHOLD, alpha < c - SV_THRESHOLD)
        if not (np.any(can_up) and np.any(can_down)):
            break
        i = int(np.flatnonzero(can_up)[np.argmax(candidates[can_up])])
        j = int(np.flatnonzero(can_down)[np.argmin(candidates[can_down])])
        gap = candidates[i] - candidates[j]
        # the final margin residual is bounded by the gap, so stopping at
        # half the tolerance leaves headroom for the bias placement
        if gap <= 0.5 * KKT_TOLERANCE:
            break

        # move alpha_i by +y_i*t and alpha_j by -y_j*t, which preserves
        # sum(alpha*y); the dual objective gains gap*t - 0.5*quad*t^2
        room_i = (c - alpha[i]) if y[i] > 0 else alpha[i]
        room_j = (c - alpha[j]) if y[j] < 0 else alpha[j]
        quad = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
        if quad > 0.0:
            t = min(gap / quad, room_i, room_j)
        else:
            # flat or concave direction (duplicate rows): slide to the box edge
            t = min(room_i, room_j)
        if t <= 0.0:
            break

        alpha[i] = min(max(alpha[i] + y[i] * t, 0.0), c)
        alpha[j] = min(max(alpha[j] - y[j] * t, 0.0), c)
        g += t * (kmat[i] - kmat[j])
    else:
        raise ConvergenceError(f"SMO did not converge within {MAX_PASSES} passes")

    bias = _bias_from_box(alpha, y, g, c)
    return alpha, bias, passes


def train_binary_svm(rows: np.ndarray, labels, kernel: KernelConfig,
                     class_pair: tuple[str, str] = ("+1", "-1")) -> BinarySvmModel:
    """Train one soft-margin machine; `labels` must be +/-1 per row."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    y = np.asarray(labels, dtype=float)
    if rows.shape[0] != y.size:
        raise ValueError("rows and labels disagree in length")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("degenerate binary problem: only one class present")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("binary labels must be +1 or -1")

    kmat = gaussian_kernel(rows, rows, kernel.scale)
    alpha, bias, passes = _smo(kmat, y, kernel.c_penalty)

    f = (alpha * y) @ kmat + bias
    residual = _kkt_residual(alpha, y, f, kernel.c_penalty)
    if residual > KKT_TOLERANCE:
        raise ConvergenceError(f"solver stalled after {passes} passes with KKT "
                               f"residual {residual:.3e} > {KKT_TOLERANCE}")
    balance = float(abs(np.sum(alpha * y)))
    keep = alpha > SV_THRESHOLD
    return BinarySvmModel(class_pair=tuple(class_pair),
                          support_vectors=rows[keep].copy(),
                          dual_weights=(alpha * y)[keep],
                          bias=float(bias),
                          kernel=kernel,
                          kkt_residual=float(residual),
                          dual_balance=balance)


# ---------------------------------------------------------------------------
# one-vs-one multiclass wrapper


@dataclass(frozen=True)
class McsvmModel:
    classes: tuple[str, ...]
    models: tuple[BinarySvmModel, ...]
    standardizer: Standardizer
    dropped_features: tuple[int, ...]
    feature_names: tuple[str, ...] | None = None
    preprocess: str | None = None


def train_mcsvm(rows: np.ndarray, labels, kernel: KernelConfig,
                classes: tuple[str, ...] | None = None,
                feature_names=None, preprocess: str | None = None) -> McsvmModel:
    """Fit one standardizer on all rows, then one binary machine per class pair."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    labels = np.array([str(label) for label in labels])
    if rows.shape[0] == 0 or labels.size == 0:
        raise DataError("empty training table")
    if rows.shape[0] != labels.size:
        raise ValueError("rows and labels disagree in length")
    if classes is None:
        classes = canonical_class_order(labels)
    if len(classes) < 2:
        raise DataError("need at least 2 classes to train a multiclass model")
    for cls in classes:
        if not np.any(labels == cls):
            raise DataError(f"class {cls!r} has no training rows")

    standardizer = fit_standardizer(rows)
    z = standardizer.transform(rows)
    models = []
    for ci, cj in itertools.combinations(classes, 2):
        mask = (labels == ci) | (labels == cj)
        y = np.where(labels[mask] == ci, 1.0, -1.0)
        models.append(train_binary_svm(z[mask], y, kernel, class_pair=(ci, cj)))
    return McsvmModel(classes=tuple(classes), models=tuple(models),
                      standardizer=standardizer,
                      dropped_features=standardizer.dropped,
                      feature_names=tuple(feature_names) if feature_names else None,
                      preprocess=preprocess)


def tally_votes(classes: tuple[str, ...],
                pair_decisions: list[tuple[tuple[str, str], float]]):
    """Majority vote over pairwise decisions.

    Ties are broken by the largest sum of |decision| over the models each
    tied class won; remaining ties fall back to class order.
    """
    votes = {c: 0 for c in classes}
    won_margin = {c: 0.0 for c in classes}
    for (pos, neg), value in pair_decisions:
        winner = pos if value >= 0.0 else neg  # exact zero goes to the positive class
        votes[winner] += 1
        won_margin[winner] += abs(value)
    best = max(votes.values())
    tied = [c for c in classes if votes[c] == best]
    if len(tied) > 1:
        tied.sort(key=lambda c: -won_margin[c])
    return tied[0], votes, won_margin


def predict_votes(model: McsvmModel, x) -> tuple[str, dict, dict]:
    """Predicted class plus per-class vote counts and winning-margin sums."""
    z = model.standardizer.transform(np.atleast_2d(x))
    decisions = [(m.class_pair, float(m.decision(z)[0])) for m in model.models]
    return tally_votes(model.classes, decisions)


def predict(model: McsvmModel, x) -> str:
    return predict_votes(model, x)[0]


# ---------------------------------------------------------------------------
# confusion matrix


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # counts[true][predicted]

    @classmethod
    def empty(cls, classes) -> "ConfusionMatrix":
        classes = tuple(classes)
        return cls(classes, np.zeros((len(classes), len(classes)), dtype=int))

    def add(self, true_label: str, predicted_label: str) -> None:
        self.counts[self.classes.index(true_label),
                    self.classes.index(predicted_label)] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise DataError("confusion matrix is empty")
        return self.correct / self.total

    def to_dict(self) -> dict:
        return {"classes": list(self.classes),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "ConfusionMatrix":
        return cls(tuple(payload["classes"]),
                   np.asarray(payload["counts"], dtype=int))

    def render(self) -> str:
        width = max(9, max(len(c) for c in self.classes) + 2)
        header = " " * width + "".join(f"{c:>{width}}" for c in self.classes)
        lines = [header]
        for i, cls in enumerate(self.classes):
            lines.append(f"{cls:<{width}}"
                         + "".join(f"{int(v):>{width}}" for v in self.counts[i]))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels, k: int, seed: int,
                     classes: tuple[str, ...] | None = None) -> np.ndarray:
    """Assign each row to one of k folds, stratified by class.

    Rows of each class are shuffled with the seeded generator and dealt
    round-robin; the deal start is staggered by class index so overall fold
    sizes stay as even as possible.
    """
    labels = np.array([str(label) for label in labels])
    if k < 2:
        raise ValueError("fold count must be >= 2")
    if classes is None:
        classes = canonical_class_order(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.full(labels.size, -1, dtype=int)
    for c_idx, cls in enumerate(classes):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for j, row in enumerate(idx):
            fold_of[row] = (c_idx + j) % k
    if np.any(fold_of < 0):
        raise DataError("labels contain classes outside the given class set")
    for fold in range(k):
        if not np.any(fold_of == fold):
            raise DataError(f"cannot stratify: fold {fold} would be empty "
                            f"({labels.size} rows over {k} folds)")
        for cls in classes:
            if not np.any((labels == cls) & (fold_of != fold)):
                raise DataError(f"cannot stratify: class {cls!r} has no training "
                                f"rows when fold {fold} is held out")
    return fold_of


@dataclass(frozen=True)
class CvResult:
    confusion: ConfusionMatrix
    accuracy: float
    fold_of: np.ndarray


def cross_validate(rows: np.ndarray, labels, k: int, kernel: KernelConfig,
                   seed: int = 0, classes: tuple[str, ...] | None = None,
                   folds: np.ndarray | None = None) -> CvResult:
    """Stratified k-fold evaluation with one aggregate confusion matrix.

    The standardizer and every binary machine are refitted on the k-1
    training folds each round, so held-out rows never influence training.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    labels = np.array([str(label) for label in labels])
    if classes is None:
        classes = canonical_class_order(labels)
    fold_of = np.asarray(folds, dtype=int) if folds is not None \
        else stratified_folds(labels, k, seed, classes)
    if fold_of.size != labels.size:
        raise ValueError("fold assignment and labels disagree in length")

    matrix = ConfusionMatrix.empty(classes)
    for fold in sorted(set(fold_of.tolist())):
        train_mask = fold_of != fold
        model = train_mcsvm(rows[train_mask], labels[train_mask], kernel,
                            classes=classes)
        for i in np.flatnonzero(~train_mask):
            matrix.add(labels[i], predict(model, rows[i]))
    return CvResult(confusion=matrix, accuracy=matrix.accuracy, fold_of=fold_of)


def median_pairwise_distance(rows: np.ndarray) -> float:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    diff = rows[:, None, :] - rows[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(rows.shape[0], k=1)
    return float(np.median(dist[iu]))


def optimize_kernel_scale(rows: np.ndarray, labels, k: int = 5, seed: int = 0,
                          c_penalty: float = 1.0,
                          classes: tuple[str, ...] | None = None,
                          folds: np.ndarray | None = None
                          ) -> tuple[KernelConfig, list[dict]]:
    """Pick the Gaussian scale by cross-validated grid search.

    The grid is the median pairwise distance of the standardized rows times
    SCALE_GRID; ties go to the smallest scale.  Returns the winning config
    plus the full (scale, accuracy) trace.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    labels = np.array([str(label) for label in labels])
    if classes is None:
        classes = canonical_class_order(labels)
    if folds is None:
        folds = stratified_folds(labels, k, seed, classes)

    z = fit_standardizer(rows).transform(rows)
    med = median_pairwise_distance(z)
    if med <= 0.0:
        raise DataError("degenerate feature table: zero median pairwise distance")

    trace = []
    best: KernelConfig | None = None
    best_accuracy = -1.0
    for factor in SCALE_GRID:
        config = KernelConfig(scale=factor * med, c_penalty=c_penalty)
        accuracy = cross_validate(rows, labels, k, config,
                                  classes=classes, folds=folds).accuracy
        trace.append({"scale": config.scale, "accuracy": accuracy})
        if accuracy > best_accuracy:
            best, best_accuracy = config, accuracy
    assert best is not None
    return best, trace


# ---------------------------------------------------------------------------
# model serialization


def model_to_dict(model: McsvmModel) -> dict:
    kernel = model.models[0].kernel if model.models else None
    return {
        "version": MODEL_FORMAT,
        "classes": list(model.classes),
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "preprocess": model.preprocess,
        "kernel": {"kind": kernel.kind, "scale": kernel.scale,
                   "c_penalty": kernel.c_penalty} if kernel else None,
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "std": model.standardizer.std.tolist(),
            "kept": model.standardizer.kept.tolist(),
            "input_dim": model.standardizer.input_dim,
        },
        "dropped_features": list(model.dropped_features),
        "models": [{
            "class_pair": list(m.class_pair),
            "support_vectors": m.support_vectors.tolist(),
            "dual_weights": m.dual_weights.tolist(),
            "bias": m.bias,
            "kkt_residual": m.kkt_residual,
            "dual_balance": m.dual_balance,
        } for m in model.models],
    }


def model_from_dict(payload: dict) -> McsvmModel:
    if payload.get("version") != MODEL_FORMAT:
        raise DataError(f"unknown model version: {payload.get('version')!r} "
                        f"(expected {MODEL_FORMAT!r})")
    kernel = KernelConfig(scale=payload["kernel"]["scale"],
                          c_penalty=payload["kernel"]["c_penalty"],
                          kind=payload["kernel"]["kind"])
    std = payload["standardizer"]
    standardizer = Standardizer(mean=np.asarray(std["mean"], dtype=float),
                                std=np.asarray(std["std"], dtype=float),
                                kept=np.asarray(std["kept"], dtype=int),
                                input_dim=int(std["input_dim"]))
    models = tuple(
        BinarySvmModel(class_pair=tuple(m["class_pair"]),
                       support_vectors=np.asarray(m["support_vectors"], dtype=float),
                       dual_weights=np.asarray(m["dual_weights"], dtype=float),
                       bias=float(m["bias"]),
                       kernel=kernel,
                       kkt_residual=float(m["kkt_residual"]),
                       dual_balance=float(m["dual_balance"]))
        for m in payload["models"])
    names = payload.get("feature_names")
    return McsvmModel(classes=tuple(payload["classes"]), models=models,
                      standardizer=standardizer,
                      dropped_features=tuple(payload["dropped_features"]),
                      feature_names=tuple(names) if names else None,
                      preprocess=payload.get("preprocess"))


def save_model(model: McsvmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n",
                          encoding="utf-8")


def load_model(path) -> McsvmModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid model JSON: {exc}") from exc
    return model_from_dict(payload)
