import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hatescan import evaluation
from hatescan.corpus import HateLabel, SentimentLabel
from hatescan.errors import ConvergenceError, DataError, ParameterError, UnsupportedOperation
from hatescan.features import FeatureConfig, SparseVector, fit_vocabulary
from hatescan.linmodels import (
    LbfgsConfig,
    LinearModel,
    LrConfig,
    OvrModel,
    SvmConfig,
    TrainSpec,
    decision_score,
    featurize,
    fit_linear_svm,
    fit_logreg,
    fit_pipeline,
    lbfgs_minimize,
    load_model,
    logistic_objective,
    model_from_dict,
    model_to_dict,
    predict,
    predict_proba,
    save_model,
    sigmoid,
    svm_dual_objective,
    svm_primal_objective,
    train_logreg,
    train_ovr,
    tune_svm_c,
)
from hatescan.textprep import TokenDoc

from conftest import SENTIMENTS, make_item


# ---------------------------------------------------------------- L-BFGS

def test_lbfgs_1d_quadratic():
    res = lbfgs_minimize(lambda x: (float((x[0] - 3) ** 2), np.array([2 * (x[0] - 3)])), np.zeros(1))
    assert res.converged
    assert abs(res.x[0] - 3) <= 1e-8


def test_lbfgs_2d_quadratic_matches_solve():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    res = lbfgs_minimize(lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b), np.zeros(2),
                         LbfgsConfig(tol=1e-10))
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-8)


def rosenbrock(x):
    f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
    return float(f), g


def test_lbfgs_rosenbrock():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]))
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-5)
    # Armijo steps only ever decrease f
    assert all(b <= a for a, b in zip(res.f_history, res.f_history[1:]))


def test_lbfgs_max_iter_reported():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsConfig(max_iter=3))
    assert not res.converged and res.status == "max_iter" and res.iterations == 3


def test_lbfgs_bad_direction_raises():
    # gradient points the wrong way, so no step can satisfy Armijo
    with pytest.raises(ConvergenceError) as info:
        lbfgs_minimize(lambda x: (float(x @ x), -2 * x), np.ones(2))
    assert info.value.x is not None


@pytest.mark.parametrize("kw", [{"memory": 0}, {"shrink": 1.0}, {"c1": 0.0}, {"tol": 0.0}])
def test_lbfgs_config_validation(kw):
    with pytest.raises(ParameterError):
        LbfgsConfig(**kw)


# ---------------------------------------------------------------- logistic regression

def random_problem(rng, n=30, d=5, density=0.5):
    X = sp.random(n, d, density=density, random_state=np.random.RandomState(rng.integers(1 << 31)),
                  format="csr")
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


def test_logistic_gradient_finite_differences():
    rng = np.random.default_rng(0)
    X, y = random_problem(rng)
    obj = logistic_objective(X, y, 0.1, True)
    h = 1e-5
    for _ in range(20):
        theta = rng.normal(size=X.shape[1] + 1)
        f, g = obj(theta)
        fd = np.array([(obj(theta + h * e)[0] - obj(theta - h * e)[0]) / (2 * h)
                       for e in np.eye(theta.size)])
        assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_logistic_objective_value_by_hand():
    X = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
    y = np.array([1.0, -1.0])
    f, _ = logistic_objective(X, y, 0.5, True)(np.array([1.0, 1.0, 0.5]))
    # margins: 1*(1+0.5) = 1.5, -1*(2+0.5) = -2.5; penalty ||w||^2 / (2C) = 2
    expected = 2.0 + np.log1p(np.exp(-1.5)) + np.log1p(np.exp(2.5))
    assert f == pytest.approx(expected, abs=1e-12)


def test_lr_symmetric_data_has_zero_bias():
    X = sp.csr_matrix(np.array([[1.0], [-1.0], [2.0], [-2.0]]))
    y = np.array([1.0, -1.0, 1.0, -1.0])
    w, b, info = fit_logreg(X, y, LrConfig(c_inverse_reg=1.0))
    assert info["converged"]
    assert abs(b) <= 1e-6 and w[0] > 0


def test_lr_weight_norm_grows_with_c():
    rng = np.random.default_rng(1)
    X, y = random_problem(rng, n=60, d=6)
    norms = [np.linalg.norm(fit_logreg(X, y, LrConfig(c_inverse_reg=c))[0]) for c in (0.01, 0.1, 1.0, 10.0)]
    assert all(a < b for a, b in zip(norms, norms[1:]))


def test_lr_penalty_key_and_validation():
    cfg = LrConfig.from_dict({"penalty": 10.0})
    assert cfg.c_inverse_reg == pytest.approx(0.1) and cfg.reg_key == "penalty"
    with pytest.raises(ParameterError):
        LrConfig.from_dict({"penalty": 1.0, "c_inverse_reg": 1.0})
    with pytest.raises(ParameterError):
        LrConfig(c_inverse_reg=0.0)


def test_lr_single_class_rejected():
    X = sp.csr_matrix(np.ones((3, 2)))
    with pytest.raises(DataError):
        fit_logreg(X, np.ones(3))


# ---------------------------------------------------------------- SVM

def test_svm_two_points():
    X = sp.csr_matrix(np.array([[1.0], [-1.0]]))
    w, b, info = fit_linear_svm(X, np.array([1.0, -1.0]), SvmConfig(c=10.0, tol=1e-9))
    assert info["converged"]
    assert w[0] == pytest.approx(1.0, abs=1e-9) and b == pytest.approx(0.0, abs=1e-9)


def test_svm_duplicated_points_halve_c():
    rng = np.random.default_rng(2)
    X, y = random_problem(rng, n=20, d=4, density=0.8)
    w1, b1, _ = fit_linear_svm(X, y, SvmConfig(c=0.5, tol=1e-10, max_iter=20000))
    w2, b2, _ = fit_linear_svm(sp.vstack([X, X]).tocsr(), np.concatenate([y, y]),
                               SvmConfig(c=0.25, tol=1e-10, max_iter=20000))
    # same primal objective, so the unique w must agree
    np.testing.assert_allclose(w1, w2, atol=1e-6)
    p1 = svm_primal_objective(X, y, w1, b1, 0.5)
    p2 = svm_primal_objective(X, y, w2, b2, 0.5)
    assert p1 == pytest.approx(p2, abs=1e-8)


def test_svm_weak_duality_gap_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        X, y = random_problem(rng, n=int(rng.integers(6, 40)), d=int(rng.integers(2, 8)))
        c = float(rng.choice([0.01, 0.1, 1.0]))
        w, b, info = fit_linear_svm(X, y, SvmConfig(c=c, tol=1e-6, max_iter=20000))
        primal = svm_primal_objective(X, y, w, b, c)
        dual = svm_dual_objective(info["alpha"], w)
        assert dual <= primal + 1e-9
        assert primal - dual <= 1e-3 * max(1.0, abs(primal))


def test_svm_alpha_box_and_balance():
    rng = np.random.default_rng(4)
    X, y = random_problem(rng, n=30, d=5)
    _, _, info = fit_linear_svm(X, y, SvmConfig(c=0.3))
    a = info["alpha"]
    assert np.all(a >= -1e-12) and np.all(a <= 0.3 + 1e-12)
    assert abs(a @ y) <= 1e-9


def test_svm_deterministic():
    rng = np.random.default_rng(5)
    X, y = random_problem(rng)
    a = fit_linear_svm(X, y, SvmConfig(seed=7))
    b = fit_linear_svm(X, y, SvmConfig(seed=7))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


# ---------------------------------------------------------------- models

def toy_ovr_docs():
    words = {SentimentLabel.NEUTRAL: "bericht", SentimentLabel.PRO_ISRAEL: "israel",
             SentimentLabel.PRO_PALESTINE: "gaza"}
    docs, labels = [], []
    for k in range(30):
        lab = SENTIMENTS[k % 3]
        docs.append(TokenDoc(f"s{k}", (words[lab], "heute")))
        labels.append(lab)
    return docs, labels, words


@pytest.mark.parametrize("algo", ["lr", "svm"])
def test_ovr_separable(algo):
    docs, labels, words = toy_ovr_docs()
    vocab = fit_vocabulary(docs)
    model = fit_pipeline(docs, labels, TrainSpec("sentiment", algo, lr=LrConfig(c_inverse_reg=10.0)), vocab)
    assert isinstance(model, OvrModel) and len(model.components) == 3
    for lab, w in words.items():
        assert predict(model, featurize(model, TokenDoc("q", (w,)))) is lab


def test_ovr_missing_class():
    X = sp.csr_matrix(np.eye(4))
    with pytest.raises(DataError, match="pro_palestine"):
        train_ovr(X, [SentimentLabel.NEUTRAL, SentimentLabel.PRO_ISRAEL] * 2, TrainSpec("sentiment"))


def constant_component(lab, bias, d=2):
    return LinearModel(np.zeros(d), bias, lab.value, "rest", "sentiment_ovr_component", "lr")


def test_ovr_argmax_tie_break():
    x = SparseVector.from_dict({}, 2)
    m = OvrModel({lab: constant_component(lab, 1.0) for lab in SENTIMENTS})
    assert predict(m, x) is SentimentLabel.NEUTRAL
    m = OvrModel({SENTIMENTS[0]: constant_component(SENTIMENTS[0], 0.0),
                  SENTIMENTS[1]: constant_component(SENTIMENTS[1], 2.0),
                  SENTIMENTS[2]: constant_component(SENTIMENTS[2], 2.0)})
    assert predict(m, x) is SentimentLabel.PRO_ISRAEL


@settings(max_examples=100)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.floats(-100, 100),
       st.dictionaries(st.integers(0, 2), st.floats(-3, 3), max_size=3))
def test_ovr_common_bias_shift_keeps_argmax(ws, shift, entries):
    x = SparseVector.from_dict(entries, 3)
    comps = {lab: LinearModel(np.array(ws[3 * i:3 * i + 3]), 0.0, lab.value, "rest",
                              "sentiment_ovr_component", "lr") for i, lab in enumerate(SENTIMENTS)}
    shifted = {lab: LinearModel(m.weights, m.bias + shift, lab.value, "rest", m.task, "lr")
               for lab, m in comps.items()}
    scores = [decision_score(comps[lab], x) for lab in SENTIMENTS]
    # skip draws where the shift's rounding could create or break a near tie
    if sorted(scores)[-1] - sorted(scores)[-2] > 1e-9:
        assert predict(OvrModel(comps), x) is predict(OvrModel(shifted), x)


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(-50.0) < 1e-20
    assert 1 - sigmoid(50.0) < 1e-15
    assert sigmoid(-1000.0) == 0.0 and sigmoid(1000.0) == 1.0
    assert sigmoid(3.0) + sigmoid(-3.0) == pytest.approx(1.0, abs=1e-15)


def hate_model(w, b, algo="lr"):
    return LinearModel(np.asarray(w, float), b, "hate", "no_hate", "hate", algo)


def test_predict_threshold_inclusive():
    x = SparseVector.from_dict({}, 1)
    m = hate_model([0.0], 0.0)  # p = 0.5 exactly
    assert predict(m, x, 0.5) is HateLabel.HATE
    assert predict(m, x, 0.5000001) is HateLabel.NO_HATE
    assert predict(hate_model([0.0], 0.0, "svm"), x) is HateLabel.HATE


def test_predict_proba_svm_unsupported():
    with pytest.raises(UnsupportedOperation):
        predict_proba(hate_model([1.0], 0.0, "svm"), SparseVector.from_dict({0: 1.0}, 1))


def test_dimension_mismatch():
    with pytest.raises(DataError):
        decision_score(hate_model([1.0, 2.0], 0.0), SparseVector.from_dict({0: 1.0}, 3))


@pytest.mark.parametrize("task, algo, mode", [("hate", "lr", "bow"), ("hate", "svm", "tfidf"),
                                               ("sentiment", "lr", "tfidf")])
def test_artifact_round_trip(tmp_path, task, algo, mode):
    docs, labels, _ = toy_ovr_docs()
    if task == "hate":
        labels = [HateLabel.HATE if lab is SentimentLabel.PRO_ISRAEL else HateLabel.NO_HATE for lab in labels]
    spec = TrainSpec(task, algo, FeatureConfig(mode))
    model = fit_pipeline(docs, labels, spec, fit_vocabulary(docs, spec.features), "pfp", "tfp")
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    from hatescan.evaluation import score_docs
    rng = np.random.default_rng(0)
    terms = list(model.vocabulary.terms) + ["unbekannt"]
    probe = [TokenDoc(str(i), tuple(rng.choice(terms, size=int(rng.integers(0, 6))))) for i in range(100)]
    assert np.array_equal(score_docs(model, probe), score_docs(loaded, probe))
    assert [predict(model, featurize(model, d)) for d in probe] == \
        [predict(loaded, featurize(loaded, d)) for d in probe]
    # serialization is deterministic
    save_model(loaded, tmp_path / "again.json")
    assert path.read_bytes() == (tmp_path / "again.json").read_bytes()
    assert json.loads(path.read_text())["format_version"] == 1


def test_artifact_rejects_unknown_version():
    doc = model_to_dict(LinearModel(np.zeros(1), 0.0, "hate", "no_hate", "hate", "lr",
                                    vocabulary=fit_vocabulary([TokenDoc("a", ("x",))])))
    doc["format_version"] = 99
    with pytest.raises(Exception):
        model_from_dict(doc)


def test_train_logreg_carries_config():
    X = sp.csr_matrix(np.array([[1.0], [-1.0]]))
    m = train_logreg(X, np.array([1.0, -1.0]))
    assert m.config["lr"]["c_inverse_reg"] == 0.1 and m.algo == "lr"


# ---------------------------------------------------------------- tuning

def tuning_fixture(n=40):
    items, docs = [], {}
    for k in range(n):
        hate = k % 2 == 0
        item = make_item(f"t{k:03d}", HateLabel.HATE if hate else HateLabel.NO_HATE)
        items.append(item)
        docs[item.id] = TokenDoc(item.id, ("raus" if hate else "frieden", f"w{k % 5}"))
    return items, docs


def test_tune_single_value():
    items, docs = tuning_fixture()
    best, table = tune_svm_c(items, docs, TrainSpec("hate", "svm"), grid=[0.1], k=4)
    assert best == 0.1 and len(table) == 1


def test_tune_ties_pick_smallest(monkeypatch):
    items, docs = tuning_fixture()

    class Flat:
        mean = {"macro_f1": 0.5, "accuracy": 0.5}
        std = {"macro_f1": 0.0}

    monkeypatch.setattr(evaluation, "cross_validate", lambda *a, **k: Flat())
    best, _ = tune_svm_c(items, docs, TrainSpec("hate", "svm"), grid=[0.01, 0.1, 1.0], k=4)
    assert best == 0.01


def test_tune_picks_argmax_of_table():
    items, docs = tuning_fixture()
    best, table = tune_svm_c(items, docs, TrainSpec("hate", "svm"), grid=[0.001, 0.01, 1.0], k=4, seed=2)
    top = max(r["mean_macro_f1"] for r in table)
    assert best == min(r["c"] for r in table if r["mean_macro_f1"] == top)
    assert [r["c"] for r in table] == [0.001, 0.01, 1.0]


def test_tune_grid_validation():
    items, docs = tuning_fixture()
    with pytest.raises(ParameterError):
        tune_svm_c(items, docs, TrainSpec("hate", "svm"), grid=[1.0, 0.1])
    with pytest.raises(ParameterError):
        tune_svm_c(items, docs, TrainSpec("hate", "svm"), grid=[])
