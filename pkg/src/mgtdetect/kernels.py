"""Spectrum string kernels and a support vector machine trained by SMO.

The kernel between two strings counts distinct shared n-grams for every n
in a configured range and sums the counts.  That is an inner product in
the binary n-gram indicator space, so Gram matrices are positive
semidefinite; with cosine normalization the diagonal is exactly 1.

The SVM solves the soft-margin dual with sequential minimal optimization
over index pairs.  Pair partners are chosen with a seeded generator, so
training is deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

KKT_TOLERANCE = 1e-3
MAX_PASSES = 10_000
_MIN_ALPHA_STEP = 1e-12
_SUPPORT_EPS = 1e-8


class NgramUnit(Enum):
    CHAR = "char"
    WORD = "word"


@dataclass(frozen=True)
class KernelConfig:
    ngram_min: int = 3
    ngram_max: int = 5
    unit: NgramUnit = NgramUnit.CHAR
    normalize: bool = True

    def __post_init__(self) -> None:
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise ConfigError(
                f"bad n-gram range ({self.ngram_min}, {self.ngram_max})"
            )


def ngram_sets(text: str, cfg: KernelConfig) -> tuple[frozenset, ...]:
    """Distinct n-grams of the text for each n in the configured range.

    CHAR slides over the raw string (spaces included); WORD slides over the
    whitespace-token sequence, yielding token tuples.
    """
    if cfg.unit is NgramUnit.WORD:
        units: Sequence = text.split()
    else:
        units = text
    sets = []
    for n in range(cfg.ngram_min, cfg.ngram_max + 1):
        if cfg.unit is NgramUnit.WORD:
            grams = frozenset(
                tuple(units[i : i + n]) for i in range(len(units) - n + 1)
            )
        else:
            grams = frozenset(units[i : i + n] for i in range(len(units) - n + 1))
        sets.append(grams)
    return tuple(sets)


def _raw_kernel(sets_x: tuple[frozenset, ...], sets_y: tuple[frozenset, ...]) -> int:
    return sum(len(sx & sy) for sx, sy in zip(sets_x, sets_y))


def spectrum_kernel(x: str, y: str, cfg: KernelConfig = KernelConfig()) -> float:
    """Shared distinct n-gram count, optionally cosine-normalized.

    When either string has no n-grams at all, the normalized kernel is
    defined as 0.
    """
    sets_x = ngram_sets(x, cfg)
    sets_y = ngram_sets(y, cfg)
    raw = _raw_kernel(sets_x, sets_y)
    if not cfg.normalize:
        return float(raw)
    self_x = _raw_kernel(sets_x, sets_x)
    self_y = _raw_kernel(sets_y, sets_y)
    if self_x == 0 or self_y == 0:
        return 0.0
    return raw / math.sqrt(self_x * self_y)


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric Gram matrix with document ids in row order."""

    matrix: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", matrix)
        n = len(self.ids)
        if matrix.shape != (n, n):
            raise DataError(
                f"kernel matrix shape {matrix.shape} does not match {n} ids"
            )

    def save_tsv(self, path: str | Path) -> None:
        lines = ["\t".join(["id", *self.ids])]
        for doc_id, row in zip(self.ids, self.matrix):
            lines.append(
                "\t".join([doc_id, *(format(v, ".9g") for v in row)])
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def kernel_matrix(
    texts: Sequence[str],
    cfg: KernelConfig = KernelConfig(),
    ids: Sequence[str] | None = None,
) -> KernelMatrix:
    """Gram matrix over the texts; normalized diagonals are exactly 1."""
    n = len(texts)
    if n == 0:
        raise DataError("cannot build a kernel matrix over zero texts")
    if ids is None:
        ids = [str(i) for i in range(n)]
    if len(ids) != n:
        raise DataError(f"{len(ids)} ids for {n} texts")
    all_sets = [ngram_sets(t, cfg) for t in texts]
    selfs = np.array([_raw_kernel(s, s) for s in all_sets], dtype=np.float64)
    gram = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            raw = float(_raw_kernel(all_sets[i], all_sets[j]))
            if cfg.normalize:
                if selfs[i] == 0 or selfs[j] == 0:
                    value = 0.0
                elif i == j:
                    value = 1.0
                else:
                    value = raw / math.sqrt(selfs[i] * selfs[j])
            else:
                value = raw
            gram[i, j] = value
            gram[j, i] = value
    return KernelMatrix(matrix=gram, ids=tuple(ids))


@dataclass(frozen=True)
class SvmModel:
    """Dual solution plus the training texts needed to evaluate new kernels."""

    support_indices: tuple[int, ...]
    dual_coef: np.ndarray  # alpha_i * y_i for each support index
    bias: float
    C: float
    texts: tuple[str, ...]
    alphas: np.ndarray  # full alpha vector, for inspection
    labels: np.ndarray  # full +-1 label vector

    def decision(self, text: str, cfg: KernelConfig) -> float:
        total = self.bias
        for idx, coef in zip(self.support_indices, self.dual_coef):
            total += coef * spectrum_kernel(self.texts[idx], text, cfg)
        return float(total)


def _as_pm1_labels(labels: Sequence[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(labels, dtype=np.float64)
    values = set(np.unique(arr).tolist())
    if not values <= {-1.0, 1.0}:
        raise DataError(f"svm labels must be in {{-1, +1}}, got {sorted(values)}")
    if values != {-1.0, 1.0}:
        raise DataError("svm training needs both classes present")
    return arr


def svm_train(
    kernel: KernelMatrix,
    labels: Sequence[int] | np.ndarray,
    C: float = 1.0,
    *,
    texts: Sequence[str] | None = None,
    seed: int = 0,
    tol: float = KKT_TOLERANCE,
    max_passes: int = MAX_PASSES,
) -> SvmModel:
    """Soft-margin dual SVM via sequential minimal optimization.

    Sweeps all examples, optimizing each KKT violator against a seeded
    random partner, until one full sweep changes nothing or ``max_passes``
    sweeps elapse.  ``texts`` must align with the kernel rows; they are
    stored on the model for kernel evaluation at prediction time.
    """
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")
    K = kernel.matrix
    y = _as_pm1_labels(labels)
    n = K.shape[0]
    if y.shape[0] != n:
        raise DataError(f"{y.shape[0]} labels for {n} kernel rows")
    if texts is None:
        raise DataError("svm_train needs the training texts for later prediction")
    if len(texts) != n:
        raise DataError(f"{len(texts)} texts for {n} kernel rows")

    rng = np.random.default_rng(seed)
    alpha = np.zeros(n, dtype=np.float64)
    b = 0.0
    # f_i = sum_j alpha_j y_j K_ij + b, kept incrementally.
    f = np.full(n, b, dtype=np.float64)

    for _ in range(max_passes):
        num_changed = 0
        for i in range(n):
            e_i = f[i] - y[i]
            r_i = e_i * y[i]
            if not ((r_i < -tol and alpha[i] < C) or (r_i > tol and alpha[i] > 0)):
                continue
            j = int((i + 1 + rng.integers(n - 1)) % n)
            e_j = f[j] - y[j]
            if y[i] != y[j]:
                low = max(0.0, alpha[j] - alpha[i])
                high = min(C, C + alpha[j] - alpha[i])
            else:
                low = max(0.0, alpha[i] + alpha[j] - C)
                high = min(C, alpha[i] + alpha[j])
            if low >= high:
                continue
            eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if eta <= 0:
                continue
            alpha_j_new = alpha[j] + y[j] * (e_i - e_j) / eta
            alpha_j_new = min(high, max(low, alpha_j_new))
            d_j = alpha_j_new - alpha[j]
            if abs(d_j) < _MIN_ALPHA_STEP:
                continue
            d_i = -y[i] * y[j] * d_j
            alpha_i_new = alpha[i] + d_i
            b1 = b - e_i - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
            b2 = b - e_j - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
            if 0.0 < alpha_i_new < C:
                b_new = b1
            elif 0.0 < alpha_j_new < C:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)
            f += y[i] * d_i * K[i, :] + y[j] * d_j * K[j, :] + (b_new - b)
            alpha[i] = alpha_i_new
            alpha[j] = alpha_j_new
            b = b_new
            num_changed += 1
        if num_changed == 0:
            break

    support = tuple(int(i) for i in np.flatnonzero(alpha > _SUPPORT_EPS))
    dual_coef = np.array([alpha[i] * y[i] for i in support], dtype=np.float64)
    return SvmModel(
        support_indices=support,
        dual_coef=dual_coef,
        bias=float(b),
        C=float(C),
        texts=tuple(texts),
        alphas=alpha,
        labels=y,
    )


def svm_decision(model: SvmModel, text: str, cfg: KernelConfig = KernelConfig()) -> float:
    return model.decision(text, cfg)


def svm_predict_proba(model: SvmModel, text: str, cfg: KernelConfig = KernelConfig()) -> float:
    """Margin squashed through the logistic function.

    A zero margin maps to probability 0.5; larger margins map monotonically
    toward 1.
    """
    return float(1.0 / (1.0 + math.exp(-model.decision(text, cfg))))


def kernel_config_to_jsonable(cfg: KernelConfig) -> dict:
    return {
        "ngram_min": cfg.ngram_min,
        "ngram_max": cfg.ngram_max,
        "unit": cfg.unit.value,
        "normalize": cfg.normalize,
    }


def kernel_config_from_jsonable(data: dict) -> KernelConfig:
    try:
        return KernelConfig(
            ngram_min=int(data["ngram_min"]),
            ngram_max=int(data["ngram_max"]),
            unit=NgramUnit(data["unit"]),
            normalize=bool(data["normalize"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed kernel settings: {exc}") from exc


def svm_to_jsonable(model: SvmModel) -> dict:
    return {
        "support_indices": list(model.support_indices),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias,
        "C": model.C,
        "texts": list(model.texts),
        "alphas": model.alphas.tolist(),
        "labels": model.labels.tolist(),
    }


def svm_from_jsonable(data: dict) -> SvmModel:
    try:
        return SvmModel(
            support_indices=tuple(int(i) for i in data["support_indices"]),
            dual_coef=np.asarray(data["dual_coef"], dtype=np.float64),
            bias=float(data["bias"]),
            C=float(data["C"]),
            texts=tuple(str(t) for t in data["texts"]),
            alphas=np.asarray(data["alphas"], dtype=np.float64),
            labels=np.asarray(data["labels"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed svm model: {exc}") from exc
