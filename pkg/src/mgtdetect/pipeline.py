"""End-to-end wiring from corpora to trained detectors and back.

Vector-space models (the network, the neighbor model, the boosted trees)
share one feature pipeline: ten readability statistics concatenated with a
document embedding, standardized by a single scaler fitted on the full
concatenated training matrix.  Scaling the concatenation is equivalent to
scaling the blocks separately because standardization is per-column.  The
string-kernel SVM takes a different route: documents are preprocessed per
language and compared directly as character n-gram sets.

Document embeddings come from a seeded hashing embedder by default; a
table of precomputed vectors keyed by document id can be supplied instead,
in which case every document scored later must appear in the table.

Training always carves a validation split off the provided corpus: the
network uses it for early stopping, the boosted trees for grid selection,
and every model reports a validation score in the training log.  Ensemble
training first reserves a stratified holdout for stacking calibration, so
the meta-learner never sees base training documents.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import AppConfig
from .corpus import Corpus, Language, SplitSpec, split
from .checkpoint import load_checkpoint, save_checkpoint
from .embeddings import (
    EmbeddingTable,
    FallbackEmbedderConfig,
    embed_corpus,
    load_embeddings,
)
from .ensemble import (
    EnsembleModel,
    ensemble_predict_proba,
    train_ensemble,
)
from .errors import ConfigError, DataError
from .evaluation import macro_f1
from .kernels import (
    KernelConfig,
    SvmModel,
    kernel_config_from_jsonable,
    kernel_config_to_jsonable,
    kernel_matrix,
    svm_from_jsonable,
    svm_predict_proba,
    svm_to_jsonable,
    svm_train,
)
from .neural import (
    LabeledSet,
    MlpParams,
    params_from_jsonable,
    params_to_jsonable,
    predict_proba as neural_predict_proba,
    train as neural_train,
)
from .readability import (
    FEATURE_NAMES,
    ScalerParams,
    fit_scaler,
    readability_features,
    transform,
)
from .shallow import (
    GbtHyperparams,
    GbtModel,
    KnnModel,
    gbt_from_jsonable,
    gbt_predict_proba_many,
    gbt_to_jsonable,
    grid_search,
    knn_fit,
    knn_from_jsonable,
    knn_predict_proba_many,
    knn_to_jsonable,
)
from .textprep import PrepConfig, preprocess

DEFAULT_DECISION_THRESHOLD = 0.5

_LANGUAGE_CODE = {Language.EN: 0.0, Language.ES: 1.0}


def feature_names(embedding_dim: int) -> tuple[str, ...]:
    return FEATURE_NAMES + tuple(f"emb_{i}" for i in range(embedding_dim))


def build_raw_features(
    corpus: Corpus,
    embedder: FallbackEmbedderConfig = FallbackEmbedderConfig(),
    table: EmbeddingTable | None = None,
) -> tuple[tuple[str, ...], tuple[str, ...], np.ndarray]:
    """Unscaled feature rows: (ids, column names, matrix)."""
    if len(corpus) == 0:
        raise DataError("cannot featurize an empty corpus")
    vectors = table if table is not None else embed_corpus(corpus, embedder)
    rows = []
    ids = []
    for doc in corpus:
        stats = readability_features(doc)
        rows.append(np.concatenate([stats.as_vector().values, vectors.get(doc.id)]))
        ids.append(doc.id)
    return tuple(ids), feature_names(vectors.dim), np.array(rows, dtype=np.float64)


@dataclass(frozen=True)
class Featurizer:
    """Embedding settings plus the scaler fitted on the training corpus."""

    embedder: FallbackEmbedderConfig
    embeddings_path: str
    scaler: ScalerParams

    def _table(self) -> EmbeddingTable | None:
        if not self.embeddings_path:
            return None
        return load_embeddings(self.embeddings_path)

    def features(self, corpus: Corpus) -> np.ndarray:
        _, _, raw = build_raw_features(corpus, self.embedder, self._table())
        return transform(raw, self.scaler)


def fit_featurizer(corpus: Corpus, cfg: AppConfig) -> Featurizer:
    table = load_embeddings(cfg.embeddings_path) if cfg.embeddings_path else None
    _, _, raw = build_raw_features(corpus, cfg.embedder, table)
    return Featurizer(
        embedder=cfg.embedder,
        embeddings_path=cfg.embeddings_path,
        scaler=fit_scaler(raw),
    )


def _scaler_to_jsonable(scaler: ScalerParams) -> dict:
    return {"means": scaler.means.tolist(), "stddevs": scaler.stddevs.tolist()}


def _scaler_from_jsonable(data: dict) -> ScalerParams:
    try:
        return ScalerParams(
            means=np.asarray(data["means"], dtype=np.float64),
            stddevs=np.asarray(data["stddevs"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed scaler parameters: {exc}") from exc


def _featurizer_to_jsonable(featurizer: Featurizer) -> dict:
    return {
        "embedder": {
            "dim": featurizer.embedder.dim,
            "ngram_min": featurizer.embedder.ngram_min,
            "ngram_max": featurizer.embedder.ngram_max,
            "seed": featurizer.embedder.seed,
        },
        "embeddings_path": featurizer.embeddings_path,
        "scaler": _scaler_to_jsonable(featurizer.scaler),
    }


def _featurizer_from_jsonable(data: dict) -> Featurizer:
    try:
        emb = data["embedder"]
        embedder = FallbackEmbedderConfig(
            dim=int(emb["dim"]),
            ngram_min=int(emb["ngram_min"]),
            ngram_max=int(emb["ngram_max"]),
            seed=int(emb["seed"]),
        )
        return Featurizer(
            embedder=embedder,
            embeddings_path=str(data.get("embeddings_path", "")),
            scaler=_scaler_from_jsonable(data["scaler"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed featurizer settings: {exc}") from exc


def _require_labels(corpus: Corpus) -> np.ndarray:
    if not corpus.fully_labeled:
        raise DataError(f"corpus {corpus.name!r} has unlabeled documents; cannot train")
    return np.asarray(corpus.labels_as_ints(), dtype=np.int64)


def _language_codes(corpus: Corpus) -> np.ndarray:
    return np.array([_LANGUAGE_CODE[doc.language] for doc in corpus], dtype=np.float64)


def _preprocessed_texts(corpus: Corpus) -> list[str]:
    return [preprocess(doc.text, PrepConfig(language=doc.language)) for doc in corpus]


@dataclass(frozen=True)
class NeuralBase:
    params: MlpParams
    featurizer: Featurizer

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        return neural_predict_proba(self.params, self.featurizer.features(corpus))


@dataclass(frozen=True)
class KnnBase:
    model: KnnModel
    featurizer: Featurizer

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        return knn_predict_proba_many(self.model, self.featurizer.features(corpus))


@dataclass(frozen=True)
class GbtBase:
    model: GbtModel
    featurizer: Featurizer

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        return gbt_predict_proba_many(self.model, self.featurizer.features(corpus))


@dataclass(frozen=True)
class SvmBase:
    model: SvmModel
    kernel: KernelConfig

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        texts = _preprocessed_texts(corpus)
        return np.array(
            [svm_predict_proba(self.model, text, self.kernel) for text in texts],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class EnsembleBase:
    model: EnsembleModel
    bases: dict[str, object]

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        probs = {name: base.predict_proba(corpus) for name, base in self.bases.items()}
        return ensemble_predict_proba(self.model, probs)


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    adapter: object
    threshold: float = DEFAULT_DECISION_THRESHOLD

    def predict_proba(self, corpus: Corpus) -> np.ndarray:
        return self.adapter.predict_proba(corpus)

    def predict_labels(self, corpus: Corpus) -> np.ndarray:
        return (self.predict_proba(corpus) >= self.threshold).astype(np.int64)


def _train_base(
    kind: str,
    train_corpus: Corpus,
    val_corpus: Corpus,
    cfg: AppConfig,
    featurizer: Featurizer | None,
    log: list[dict],
):
    """Fit one base on the training part, reporting validation macro-F1."""
    y_train = _require_labels(train_corpus)
    y_val = _require_labels(val_corpus)
    if kind == "svm":
        texts = _preprocessed_texts(train_corpus)
        if len(texts) > cfg.svm.scale_warning_threshold:
            warnings.warn(
                f"svm training on {len(texts)} documents builds a dense "
                f"{len(texts)}x{len(texts)} kernel matrix; consider a smaller corpus",
                stacklevel=2,
            )
        kernel_cfg = KernelConfig()
        gram = kernel_matrix(texts, kernel_cfg)
        pm1 = np.where(y_train == 1, 1.0, -1.0)
        model = svm_train(gram, pm1, C=cfg.svm.C, texts=texts, seed=cfg.svm.seed)
        adapter = SvmBase(model=model, kernel=kernel_cfg)
        log.append(
            {
                "event": "trained",
                "model": "svm",
                "support_vectors": len(model.support_indices),
            }
        )
    else:
        assert featurizer is not None
        x_train = featurizer.features(train_corpus)
        x_val = featurizer.features(val_corpus)
        if kind == "neural":
            y_lang = _language_codes(train_corpus) if cfg.mtl.enabled else None
            params, epochs = neural_train(
                LabeledSet(x_train, y_train.astype(np.float64), y_lang),
                LabeledSet(x_val, y_val.astype(np.float64)),
                mtl=cfg.mtl,
                vat=cfg.vat,
                cfg=cfg.train,
                hidden=cfg.hidden,
            )
            for record in epochs:
                entry = {"event": "epoch", "model": "neural"}
                entry.update(record.to_json_dict())
                log.append(entry)
            adapter = NeuralBase(params=params, featurizer=featurizer)
        elif kind == "gbt":
            model, hyperparams = grid_search(
                x_train, y_train, x_val, y_val, cfg.gbt_grid
            )
            log.append(
                {
                    "event": "grid_selected",
                    "model": "gbt",
                    "n_estimators": hyperparams.n_estimators,
                    "max_depth": hyperparams.max_depth,
                    "learning_rate": hyperparams.learning_rate,
                }
            )
            adapter = GbtBase(model=model, featurizer=featurizer)
        elif kind == "knn":
            adapter = KnnBase(
                model=knn_fit(x_train, y_train, k=cfg.knn_k), featurizer=featurizer
            )
        else:
            raise ConfigError(f"unknown model kind {kind!r}")
    val_probs = adapter.predict_proba(val_corpus)
    val_preds = (val_probs >= DEFAULT_DECISION_THRESHOLD).astype(np.int64)
    log.append(
        {
            "event": "validation",
            "model": kind,
            "macro_f1": macro_f1(y_val, val_preds),
        }
    )
    return adapter


def train_model(kind: str, corpus: Corpus, cfg: AppConfig) -> tuple[TrainedModel, list[dict]]:
    """Train one detector kind (a base name or "ensemble") on a labeled corpus."""
    _require_labels(corpus)
    log: list[dict] = []
    if kind == "ensemble":
        return _train_ensemble_model(corpus, cfg, log)
    if kind not in ("neural", "gbt", "knn", "svm"):
        raise ConfigError(f"unknown model kind {kind!r}")
    train_part, val_part = split(corpus, cfg.split)
    featurizer = None
    if kind != "svm":
        featurizer = fit_featurizer(train_part, cfg)
    adapter = _train_base(kind, train_part, val_part, cfg, featurizer, log)
    return TrainedModel(kind=kind, adapter=adapter), log


def _train_ensemble_model(
    corpus: Corpus, cfg: AppConfig, log: list[dict]
) -> tuple[TrainedModel, list[dict]]:
    # The stacking layer calibrates on documents no base trained on, and
    # stratification keeps both classes present for threshold calibration.
    holdout_spec = SplitSpec(
        train_fraction=1.0 - cfg.ensemble.holdout_fraction,
        seed=cfg.ensemble.seed,
        stratify_by_label=True,
    )
    fit_part, holdout = split(corpus, holdout_spec)
    train_part, val_part = split(fit_part, cfg.split)
    featurizer = None
    if any(base != "svm" for base in cfg.ensemble.bases):
        featurizer = fit_featurizer(train_part, cfg)
    bases: dict[str, object] = {}
    for base_kind in cfg.ensemble.bases:
        bases[base_kind] = _train_base(
            base_kind, train_part, val_part, cfg, featurizer, log
        )
    holdout_probs = {
        name: base.predict_proba(holdout) for name, base in bases.items()
    }
    model = train_ensemble(
        holdout_probs,
        _require_labels(holdout),
        grid=cfg.gbt_grid,
        seed=cfg.ensemble.seed,
        holdout_ids=[doc.id for doc in holdout],
        train_ids=[doc.id for doc in fit_part],
        rule=cfg.ensemble.threshold_rule,
    )
    log.append(
        {
            "event": "calibrated",
            "model": "ensemble",
            "base_thresholds": {
                name: threshold
                for name, threshold in zip(model.base_names, model.base_thresholds)
            },
            "threshold": model.threshold,
            "meta_hyperparams": {
                "n_estimators": model.meta_hyperparams.n_estimators,
                "max_depth": model.meta_hyperparams.max_depth,
                "learning_rate": model.meta_hyperparams.learning_rate,
            },
        }
    )
    adapter = EnsembleBase(model=model, bases=bases)
    return TrainedModel(kind="ensemble", adapter=adapter, threshold=model.threshold), log


def _adapter_payload(kind: str, adapter) -> dict:
    if kind == "neural":
        return {
            "params": params_to_jsonable(adapter.params),
            "featurizer": _featurizer_to_jsonable(adapter.featurizer),
        }
    if kind == "knn":
        return {
            "model": knn_to_jsonable(adapter.model),
            "featurizer": _featurizer_to_jsonable(adapter.featurizer),
        }
    if kind == "gbt":
        return {
            "model": gbt_to_jsonable(adapter.model),
            "featurizer": _featurizer_to_jsonable(adapter.featurizer),
        }
    if kind == "svm":
        return {
            "model": svm_to_jsonable(adapter.model),
            "kernel": kernel_config_to_jsonable(adapter.kernel),
        }
    raise ConfigError(f"unknown model kind {kind!r}")


def _adapter_from_payload(kind: str, payload: dict):
    try:
        if kind == "neural":
            return NeuralBase(
                params=params_from_jsonable(payload["params"]),
                featurizer=_featurizer_from_jsonable(payload["featurizer"]),
            )
        if kind == "knn":
            return KnnBase(
                model=knn_from_jsonable(payload["model"]),
                featurizer=_featurizer_from_jsonable(payload["featurizer"]),
            )
        if kind == "gbt":
            return GbtBase(
                model=gbt_from_jsonable(payload["model"]),
                featurizer=_featurizer_from_jsonable(payload["featurizer"]),
            )
        if kind == "svm":
            return SvmBase(
                model=svm_from_jsonable(payload["model"]),
                kernel=kernel_config_from_jsonable(payload["kernel"]),
            )
    except KeyError as exc:
        raise DataError(f"checkpoint payload is missing {exc}") from exc
    raise DataError(f"unknown model kind {kind!r}")


MANIFEST_FILENAME = "manifest.json"
META_FILENAME = "meta.json"


def _save_ensemble_bundle(model: TrainedModel, path) -> None:
    """Write an ensemble as a directory of checkpoints plus a manifest.

    Each base model gets its own checkpoint file, loadable on its own with
    its calibrated threshold; the meta-model gets another; the manifest
    records base order, the meta-feature column layout, and thresholds.
    """
    adapter: EnsembleBase = model.adapter
    inner = adapter.model
    bundle = Path(path)
    if bundle.exists() and not bundle.is_dir():
        raise DataError(f"{bundle} exists and is not a directory")
    bundle.mkdir(parents=True, exist_ok=True)
    base_files: dict[str, str] = {}
    for name, base_threshold in zip(inner.base_names, inner.base_thresholds):
        payload = _adapter_payload(name, adapter.bases[name])
        payload["threshold"] = base_threshold
        filename = f"{name}.json"
        save_checkpoint(bundle / filename, name, payload)
        base_files[name] = filename
    save_checkpoint(
        bundle / META_FILENAME, "gbt", {"model": gbt_to_jsonable(inner.meta_model)}
    )
    feature_names = []
    for name in inner.base_names:
        feature_names.append(f"{name}_probability")
        feature_names.append(f"{name}_vote")
    manifest = {
        "base_names": list(inner.base_names),
        "base_files": base_files,
        "base_thresholds": list(inner.base_thresholds),
        "meta_file": META_FILENAME,
        "meta_feature_names": feature_names,
        "meta_hyperparams": {
            "n_estimators": inner.meta_hyperparams.n_estimators,
            "max_depth": inner.meta_hyperparams.max_depth,
            "learning_rate": inner.meta_hyperparams.learning_rate,
        },
        "threshold": model.threshold,
    }
    save_checkpoint(bundle / MANIFEST_FILENAME, "ensemble", manifest)


def _load_ensemble_bundle(bundle: Path) -> TrainedModel:
    manifest_path = bundle / MANIFEST_FILENAME
    if not manifest_path.is_file():
        raise DataError(f"{bundle} has no {MANIFEST_FILENAME}; not an ensemble bundle")
    _, manifest = load_checkpoint(manifest_path, expected_kind="ensemble")
    try:
        base_names = tuple(str(n) for n in manifest["base_names"])
        base_files = dict(manifest["base_files"])
        base_thresholds = tuple(float(t) for t in manifest["base_thresholds"])
        meta_file = str(manifest["meta_file"])
        hp = manifest["meta_hyperparams"]
        meta_hyperparams = GbtHyperparams(
            n_estimators=int(hp["n_estimators"]),
            max_depth=int(hp["max_depth"]),
            learning_rate=float(hp["learning_rate"]),
        )
        threshold = float(manifest["threshold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed ensemble manifest: {exc}") from exc
    if len(base_thresholds) != len(base_names):
        raise DataError(
            f"manifest lists {len(base_names)} bases "
            f"but {len(base_thresholds)} thresholds"
        )
    bases = {}
    for name in base_names:
        filename = base_files.get(name)
        if filename is None:
            raise DataError(f"manifest lists no checkpoint file for base {name!r}")
        base_path = bundle / filename
        if not base_path.is_file():
            raise DataError(f"ensemble bundle is missing base checkpoint {filename}")
        base_kind, payload = load_checkpoint(base_path, expected_kind=name)
        bases[name] = _adapter_from_payload(base_kind, payload)
    meta_path = bundle / meta_file
    if not meta_path.is_file():
        raise DataError(f"ensemble bundle is missing meta checkpoint {meta_file}")
    _, meta_payload = load_checkpoint(meta_path, expected_kind="gbt")
    try:
        meta_model = gbt_from_jsonable(meta_payload["model"])
    except KeyError as exc:
        raise DataError(f"meta checkpoint is missing {exc}") from exc
    inner = EnsembleModel(
        base_names=base_names,
        base_thresholds=base_thresholds,
        meta_model=meta_model,
        meta_hyperparams=meta_hyperparams,
        threshold=threshold,
    )
    return TrainedModel(
        kind="ensemble",
        adapter=EnsembleBase(model=inner, bases=bases),
        threshold=threshold,
    )


def save_model(model: TrainedModel, path) -> None:
    if model.kind == "ensemble":
        _save_ensemble_bundle(model, path)
        return
    payload = _adapter_payload(model.kind, model.adapter)
    payload["threshold"] = model.threshold
    save_checkpoint(path, model.kind, payload)


def load_model(path) -> TrainedModel:
    if Path(path).is_dir():
        return _load_ensemble_bundle(Path(path))
    kind, payload = load_checkpoint(path)
    if kind == "ensemble":
        raise DataError(
            "ensemble checkpoints are directory bundles; "
            "pass the bundle directory, not a file inside it"
        )
    threshold = float(payload.get("threshold", DEFAULT_DECISION_THRESHOLD))
    return TrainedModel(
        kind=kind,
        adapter=_adapter_from_payload(kind, payload),
        threshold=threshold,
    )
