"""Release gate: one test per shipping requirement, strictest tolerances.

Each test here restates a contract the library must keep, checked against
an independent oracle (finite differences, brute-force enumeration, hand
arithmetic, or byte comparison).  Run with ``pytest -v tests/test_acceptance.py``
to get one pass/fail line per requirement.
"""

import dataclasses
import math
import random
import time

import numpy as np
import pytest

from mgtdetect.cli import main as cli_main
from mgtdetect.config import AppConfig
from mgtdetect.corpus import Corpus, Language, SplitSpec, save_tsv, split
from mgtdetect.ensemble import (
    ensemble_predict_labels,
    meta_features,
    select_threshold,
    train_ensemble,
)
from mgtdetect.errors import ConfigError
from mgtdetect.evaluation import macro_f1
from mgtdetect.kernels import KernelConfig, NgramUnit, kernel_matrix, spectrum_kernel
from mgtdetect.neural import (
    Batch,
    MtlConfig,
    TrainConfig,
    VatConfig,
    backward,
    init_params,
    mtl_loss,
    vat_perturbation,
)
from mgtdetect.pipeline import train_model
from mgtdetect.readability import FEATURE_NAMES, fit_scaler, readability_features, transform
from mgtdetect.shallow import (
    GbtGrid,
    GbtModel,
    gbt_predict_proba_many,
    gbt_train,
    knn_fit,
    knn_predict_proba_many,
)

from synthdata import synthetic_corpus
from test_ensemble import complementary_bases, oracle_base_setup, oracle_select
from test_kernels import brute_force_kernel, random_text
from test_neural import (
    GRADCHECK_CASES,
    bernoulli_kl,
    run_gradient_check,
    toy_linear_region_params,
    toy_probability,
)
from test_readability import en_doc, es_doc
from test_shallow import knn_oracle, logistic_loss

SMALL_GRID = GbtGrid(estimators=(5, 20), depths=(3,), learning_rates=(0.1, 0.5))


def test_01_analytic_gradients_match_finite_differences():
    combos = {(dim, mode) for _, dim, mode in GRADCHECK_CASES}
    for mode in ("plain", "mtl", "vat"):
        assert (7, mode) in combos
        assert (310, mode) in combos
    assert len(GRADCHECK_CASES) >= 20

    start = time.perf_counter()
    for case in GRADCHECK_CASES:
        worst = run_gradient_check(case)
        assert worst < 1e-4, f"case {case}: max relative error {worst}"
    assert time.perf_counter() - start < 10.0


def test_02_multitask_loss_is_exact_convex_combination():
    rng = np.random.default_rng(202)
    for _ in range(1000):
        alpha = float(rng.random())
        loss_bot = float(rng.random() * 10.0)
        loss_lang = float(rng.random() * 10.0)
        assert mtl_loss(alpha, loss_bot, loss_lang) == (
            alpha * loss_bot + (1.0 - alpha) * loss_lang
        )

    params = init_params(6, hidden=4, with_language_head=True, seed=rng)
    batch = Batch(
        x=rng.normal(size=(8, 6)),
        y_bot=rng.integers(0, 2, size=8).astype(float),
        y_lang=rng.integers(0, 2, size=8).astype(float),
    )
    _, grads = backward(params, batch, MtlConfig(enabled=True, alpha=1.0))
    assert np.all(grads.w_lang == 0.0)
    assert grads.b_lang == 0.0


def test_03_adversarial_perturbation_norm_and_direction():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        params = init_params(6, hidden=5, seed=rng)
        x = rng.normal(size=(8, 6))
        for eps in (0.1, 1.0, 2.5):
            vat = VatConfig(enabled=True, epsilon=eps)
            r_adv = vat_perturbation(params, x, vat, rng)
            norms = np.linalg.norm(r_adv, axis=1)
            assert np.max(np.abs(norms - eps)) < 1e-9

    params = toy_linear_region_params()
    x = np.array([[0.3, -0.2]])
    eps = 1.0
    p_clean = float(toy_probability(params, x)[0])
    best_kl, best_dir = -1.0, None
    for degree in range(360):
        angle = math.radians(degree)
        direction = np.array([math.cos(angle), math.sin(angle)])
        q = float(toy_probability(params, x + eps * direction)[0])
        kl = bernoulli_kl(p_clean, q)
        if kl > best_kl:
            best_kl, best_dir = kl, direction
    vat = VatConfig(enabled=True, epsilon=eps)
    r_adv = vat_perturbation(params, x, vat, np.random.default_rng(0))[0]
    cosine = float(r_adv @ best_dir) / (np.linalg.norm(r_adv) * np.linalg.norm(best_dir))
    assert cosine > 0.99


def test_04_kernel_equals_brute_force_and_matrices_are_psd():
    rnd = random.Random(440)
    configs = [
        KernelConfig(),
        KernelConfig(normalize=False),
        KernelConfig(ngram_min=1, ngram_max=2),
        KernelConfig(ngram_min=2, ngram_max=6, normalize=False),
        KernelConfig(ngram_min=1, ngram_max=2, unit=NgramUnit.WORD),
        KernelConfig(ngram_min=1, ngram_max=3, unit=NgramUnit.WORD, normalize=False),
    ]
    for i in range(1000):
        cfg = configs[i % len(configs)]
        x, y = random_text(rnd), random_text(rnd)
        assert spectrum_kernel(x, y, cfg) == brute_force_kernel(x, y, cfg)

    for seed in range(5):
        gen = random.Random(seed)
        texts = [
            "".join(gen.choice("abcdefg ") for _ in range(gen.randint(10, 40)))
            for _ in range(20)
        ]
        gram = kernel_matrix(texts, KernelConfig()).matrix
        assert gram.shape == (20, 20)
        assert np.min(np.linalg.eigvalsh(gram)) >= -1e-8
        np.testing.assert_array_equal(np.diag(gram), np.ones(20))


def test_05_readability_fixtures_and_scaler_contract():
    tol = 1e-9
    fixtures = [
        (en_doc("The cat sat on the mat."), 116.14500000000001, 2.4000000000000004, 3.1291),
        (
            en_doc("A beautiful table. It is beautiful!"),
            48.690000000000026,
            14.533333333333331,
            8.841846274778883,
        ),
        (es_doc("Los gatos corren en la casa."), 73.84500000000001, 2.4000000000000004, 3.1291),
        (
            en_doc(
                "The university celebrated a wonderful anniversary. "
                "Communication requires understanding. "
                "Information travels immediately."
            ),
            -93.32499999999996,
            31.6,
            13.023866798666859,
        ),
        (
            en_doc(" ".join(["Dogs run beautifully."] * 30)),
            34.59000000000003,
            14.533333333333331,
            8.841846274778883,
        ),
        (es_doc("El día es bueno."), 75.87500000000001, 1.6, 3.1291),
    ]
    assert len(fixtures) >= 5
    for doc, flesch, fog, smog in fixtures:
        f = readability_features(doc)
        assert abs(f.flesch - flesch) < tol
        assert abs(f.gunning_fog - fog) < tol
        assert abs(f.smog - smog) < tol

    rng = np.random.default_rng(55)
    matrix = rng.normal(loc=3.0, scale=4.0, size=(200, len(FEATURE_NAMES)))
    scaled = transform(matrix, fit_scaler(matrix))
    assert np.max(np.abs(scaled.mean(axis=0))) < 1e-10
    assert np.max(np.abs(scaled.var(axis=0) - 1.0)) < 1e-10


def test_06_nearest_neighbor_boosting_and_stump_oracles():
    rng = np.random.default_rng(606)
    train_x = rng.normal(size=(200, 6))
    train_y = rng.integers(0, 2, size=200)
    queries = rng.normal(size=(500, 6))
    for k in (1, 10, 200):
        model = knn_fit(train_x, train_y, k=k)
        np.testing.assert_array_equal(
            knn_predict_proba_many(model, queries),
            knn_oracle(train_x, train_y, k, queries),
        )

    for lr in (0.05, 0.1, 0.3):
        x = rng.normal(size=(80, 4))
        y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(np.int64)
        flip = rng.choice(80, size=8, replace=False)
        y[flip] = 1 - y[flip]
        model = gbt_train(x, y, n_estimators=30, max_depth=3, learning_rate=lr)
        losses = []
        for t in range(len(model.trees) + 1):
            prefix = GbtModel(
                trees=model.trees[:t],
                learning_rate=model.learning_rate,
                base_score=model.base_score,
            )
            losses.append(logistic_loss(y, gbt_predict_proba_many(prefix, x)))
        for before, after in zip(losses, losses[1:]):
            assert after <= before + 1e-12

    for _ in range(20):
        n = 50
        x = np.sort(rng.normal(size=n) * 10.0)
        boundary = int(rng.integers(5, n - 5))
        y = (np.arange(n) >= boundary).astype(np.int64)
        model = gbt_train(x[:, None], y, n_estimators=1, max_depth=1, learning_rate=0.1)
        threshold = model.trees[0].threshold
        assert x[boundary - 2] <= threshold <= x[boundary + 1]


def test_07_threshold_selection_equals_exhaustive_enumeration():
    rng = np.random.default_rng(707)
    for rule in ("sum_to_one", "youden"):
        for _ in range(200):
            n = int(rng.integers(2, 40))
            scores = np.round(rng.random(n), 2)
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            assert select_threshold(scores, labels, rule) == oracle_select(
                scores, labels, rule
            )

    # equally good candidates resolve to the larger threshold
    assert select_threshold([0.5, 0.5], [0, 1], "sum_to_one") == 1.0
    assert select_threshold([0.5, 0.5], [0, 1], "youden") == 1.0
    assert select_threshold([0.2, 0.8], [1, 0], "youden") == 1.0


def test_08_stacking_reaches_oracle_and_beats_complementary_bases():
    probs, labels = oracle_base_setup()
    model = train_ensemble(probs, labels, grid=SMALL_GRID)
    assert macro_f1(labels, ensemble_predict_labels(model, probs)) == 1.0

    probs, labels = complementary_bases()
    model = train_ensemble(probs, labels, grid=SMALL_GRID)
    ensemble_score = macro_f1(labels, ensemble_predict_labels(model, probs))
    for name, threshold in zip(model.base_names, model.base_thresholds):
        base_score = macro_f1(labels, (probs[name] >= threshold).astype(np.int64))
        assert base_score < 1.0, name
        assert ensemble_score > base_score, name


def _end_to_end_run():
    corpus = synthetic_corpus(2000, 2000, seed=42, name="e2e")
    fit_part, test_part = split(
        corpus, SplitSpec(train_fraction=0.8, seed=42, stratify_by_label=True)
    )
    # the default boosting grid is exhaustive; a narrow slice keeps the run
    # inside the time budget without touching any other default
    cfg = dataclasses.replace(
        AppConfig(),
        gbt_grid=GbtGrid(estimators=(10, 30), depths=(3,), learning_rates=(0.1,)),
    )
    model, _ = train_model("ensemble", fit_part, cfg)
    probs = model.predict_proba(test_part)
    preds = (probs >= model.threshold).astype(np.int64)
    return macro_f1(test_part.labels_as_ints(), preds), probs


def test_09_end_to_end_bilingual_corpus_reproduces():
    start = time.perf_counter()
    f1_first, probs_first = _end_to_end_run()
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"single run took {elapsed:.0f}s"
    assert f1_first >= 0.90, f"held-out macro F1 {f1_first:.4f}"

    f1_second, probs_second = _end_to_end_run()
    assert f1_second == f1_first
    np.testing.assert_array_equal(probs_first, probs_second)


def test_10_shipped_defaults_and_meta_feature_width():
    cfg = AppConfig()
    assert cfg.hidden == 64
    assert cfg.train.dropout == 0.2
    assert cfg.train.learning_rate == 1e-5
    assert cfg.mtl.alpha == 0.5
    assert (cfg.vat.alpha_vat, cfg.vat.epsilon, cfg.vat.xi) == (1.0, 1.0, 10.0)
    assert cfg.knn_k == 10
    assert cfg.ensemble.bases == ("neural", "gbt", "knn")

    for bad in (23, 49):
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=bad)
    for ok in (24, 32, 48):
        TrainConfig(batch_size=ok)

    grid = GbtGrid()
    assert 3 in grid.depths
    assert 5 in grid.depths
    assert 1e-3 in grid.learning_rates

    three = meta_features(
        [np.array([0.1]), np.array([0.2]), np.array([0.3])], [0.5, 0.5, 0.5]
    )
    assert three.shape == (1, 6)
    two = meta_features([np.array([0.1]), np.array([0.2])], [0.5, 0.5])
    assert two.shape == (1, 4)


FAST_CLI_CONFIG = """\
[features]
embedding_dim = 16
ngram_min = 3
ngram_max = 4

[neural]
hidden = 8
epochs = 2
batch_size = 24

[knn]
k = 5

[gbt]
estimators = 5
depths = 2
learning_rates = 0.3

[ensemble]
bases = gbt, knn
"""


def test_11_train_and_predict_artifacts_are_byte_identical(tmp_path):
    full = synthetic_corpus(40, 40, seed=111, name="det")
    en_docs = tuple(d for d in full if d.language is Language.EN)
    es_docs = tuple(d for d in full if d.language is Language.ES)
    en_path, es_path = tmp_path / "en.tsv", tmp_path / "es.tsv"
    save_tsv(Corpus(documents=en_docs, name="en"), en_path)
    save_tsv(Corpus(documents=es_docs, name="es"), es_path)
    config_path = tmp_path / "fast.ini"
    config_path.write_text(FAST_CLI_CONFIG, encoding="utf-8")
    corpus_args = ["--corpus", f"en={en_path}", "--corpus", f"es={es_path}"]

    def artifact_bytes(path):
        # ensemble checkpoints are directories of files, the rest single files
        if path.is_dir():
            return {p.name: p.read_bytes() for p in path.iterdir()}
        return path.read_bytes()

    for kind in ("neural", "gbt", "knn", "svm", "ensemble"):
        blobs = []
        for tag in ("a", "b"):
            ckpt = tmp_path / f"{kind}-{tag}.json"
            log = tmp_path / f"{kind}-{tag}.jsonl"
            code = cli_main(
                ["train", *corpus_args, "--config", str(config_path),
                 "--model", kind, "--output", str(ckpt), "--log", str(log)]
            )
            assert code == 0
            blobs.append((artifact_bytes(ckpt), log.read_bytes()))
        assert blobs[0] == blobs[1], f"{kind} training artifacts differ across reruns"

        preds = []
        for tag in ("a", "b"):
            out = tmp_path / f"{kind}-preds-{tag}.tsv"
            code = cli_main(
                ["predict", *corpus_args, "--config", str(config_path),
                 "--model-path", str(tmp_path / f"{kind}-a.json"),
                 "--output", str(out)]
            )
            assert code == 0
            preds.append(out.read_bytes())
        assert preds[0] == preds[1], f"{kind} predictions differ across reruns"
