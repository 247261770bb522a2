import numpy as np
import pytest

from robustfill.criteria import wrmse
from robustfill.generators import maximin_lhd, transformed_noise, uniform_design
from robustfill.gp_core import Design, fit_kriging
from robustfill.harness import (
    NOISE,
    RECIPES,
    StudyConfig,
    _draw_params,
    emit_profile,
    holdout_points,
    max_threads,
    noise_nodes,
    predict_grid,
    response_function,
    robust_setting,
    run_simulated_example,
    study_designs,
)
from robustfill.stats_dist import NoiseModel

SD = 1.0 / 6.0
NORMAL = NoiseModel.normal(0.5, SD)
STEP = 1.0 / 500


def true_variance(x, beta, gamma):
    # Var(z^2) = 2 for z ~ N(0, 1), and the four noise terms are independent
    x = np.asarray(x)[:, None]
    return 2 * np.exp(-2 * (x[:, 0] - gamma[4]) ** 2) * np.sum(beta**2 * (x - gamma[:4]) ** 2, axis=1)


# ---- noise quadrature ------------------------------------------------------


def test_noise_nodes_moments():
    Z, W = noise_nodes([NoiseModel.normal(1.0, 2.0), NoiseModel.normal(0.0, 0.5)])
    assert W.sum() == pytest.approx(1.0, abs=1e-13)
    np.testing.assert_allclose(W @ Z, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(W @ (Z - [1.0, 0.0]) ** 2, [4.0, 0.25], rtol=1e-12)
    Z, W = noise_nodes([NoiseModel.uniform()] * 3, mc_size=2**12)
    assert Z.shape == (4096, 3)
    np.testing.assert_allclose(W @ Z, 0.5, atol=1e-3)


def test_predict_grid_matches_pointwise_predict():
    D = transformed_noise(Design(maximin_lhd(15, 2, seed=0), roles=("control", "noise_ext")), NORMAL)
    m = fit_kriging(D, np.sin(3 * D.X[:, 0]) * D.X[:, 1], seed=0)
    xs = np.linspace(0, 1, 7)[:, None]
    Z = np.linspace(0, 1, 5)[:, None]
    G = predict_grid(m, xs, Z)
    P = np.array([[x, z] for x in xs[:, 0] for z in Z[:, 0]])
    np.testing.assert_allclose(G.ravel(), m.predict(P), atol=1e-12)


# ---- robust setting --------------------------------------------------------


def test_robust_setting_zero_sensitivity_point():
    f = lambda P: P[:, 1] * (P[:, 0] - 0.3) ** 2  # noqa: E731
    r = robust_setting(f, "variance", NORMAL, x_grid=501, p=1)
    assert r.x[0] == pytest.approx(0.3, abs=1e-12)
    assert r.value == pytest.approx(0.0, abs=1e-20)
    assert not r.flat


def test_robust_setting_flat_objective():
    f = lambda P: P[:, 0] ** 2  # noqa: E731  no z dependence
    r = robust_setting(f, "variance", NORMAL, x_grid=101, p=1)
    assert r.flat and r.x[0] == 0.0
    r2 = robust_setting(lambda P: np.zeros(len(P)), "variance", NORMAL, x_grid=[0.4, 0.2, 0.9], p=2)
    assert r2.flat
    np.testing.assert_array_equal(r2.x, [0.2, 0.2])


def test_robust_setting_quadratic_and_custom_loss():
    f = lambda P: P[:, 0] - 0.25 + 0.0 * P[:, 1]  # noqa: E731
    assert robust_setting(f, "quadratic", NORMAL, x_grid=101, p=1).x[0] == pytest.approx(0.25)
    r = robust_setting(f, lambda g: np.abs(g - 0.5), NORMAL, x_grid=101, p=1)
    assert r.x[0] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        robust_setting(f, "bogus", NORMAL, x_grid=11, p=1)


def test_robust_setting_two_controls_on_grid():
    f = lambda P: P[:, 2] * ((P[:, 0] - 0.2) ** 2 + (P[:, 1] - 0.7) ** 2)  # noqa: E731
    r = robust_setting(f, "variance", NORMAL, x_grid=101, p=2)
    np.testing.assert_allclose(r.x, [0.2, 0.7], atol=1e-12)


def test_robust_setting_refines_beyond_grid_for_p3():
    c = np.array([0.123, 0.456, 0.789])
    f = lambda P: P[:, 3] * np.sum((P[:, :3] - c) ** 2, axis=1)  # noqa: E731
    r = robust_setting(f, "variance", NORMAL, x_grid=5, p=3)
    np.testing.assert_allclose(r.x, c, atol=1e-3)


@pytest.mark.parametrize("rep", [0, 3])
def test_true_robust_setting_against_monte_carlo(rep):
    beta, gamma = _draw_params(StudyConfig(), rep)
    f = lambda P: response_function(P, beta, gamma)  # noqa: E731
    r = robust_setting(f, "variance", [NOISE] * 4, x_grid=501, p=1)
    xs = np.linspace(0, 1, 501)
    Z = np.random.default_rng(100 + rep).standard_normal((100_000, 4))
    mc = [np.var(f(np.column_stack([np.full(len(Z), x), Z]))) for x in xs]
    # the MC argmin carries sampling noise of about one grid step
    assert abs(r.x[0] - xs[int(np.argmin(mc))]) <= 2 * STEP + 1e-12
    assert r.x[0] == xs[int(np.argmin(true_variance(xs, beta, gamma)))]


def test_response_function_closed_form_variance():
    beta, gamma = _draw_params(StudyConfig(), 1)
    Z = np.random.default_rng(0).standard_normal((400_000, 4))
    for x in (0.1, 0.6):
        y = response_function(np.column_stack([np.full(len(Z), x), Z]), beta, gamma)
        assert np.var(y) == pytest.approx(true_variance([x], beta, gamma)[0], rel=0.02)


def test_robust_setting_invariant_to_constant_shift():
    cfg = StudyConfig(designs=("DTJCA",))
    D = study_designs(cfg)["DTJCA"]
    for rep in range(10):
        beta, gamma = _draw_params(cfg, rep)
        y = response_function(D.X, beta, gamma)
        a = fit_kriging(D, y, seed=rep)
        b = fit_kriging(D, y + 3.7, seed=rep)
        ra = robust_setting(a, "variance", [NOISE] * 4, x_grid=201)
        rb = robust_setting(b, "variance", [NOISE] * 4, x_grid=201)
        assert abs(ra.x[0] - rb.x[0]) <= 1.0 / 200 + 1e-12


# ---- study -----------------------------------------------------------------


def test_study_config_validation_and_roundtrip():
    cfg = StudyConfig(replications=3)
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.digest() == StudyConfig.from_dict(cfg.to_dict()).digest()
    assert cfg.digest() != StudyConfig(replications=4).digest()
    for bad in ({"replications": 0}, {"designs": ["Nope"]}, {"loss": "cubic"}):
        with pytest.raises(ValueError):
            StudyConfig(**bad)


def test_study_designs_structure():
    ds = study_designs(StudyConfig())
    assert list(ds) == list(RECIPES)
    for name, D in ds.items():
        assert D.n == 54 and D.p == 1 and D.q == 4
    jca = ds["TrJCA"]
    np.testing.assert_allclose(np.sort(jca.X[:, 0]), uniform_design(54), atol=1e-15)
    assert {tuple(r) for r in jca.labels} == {(i, j) for i in range(6) for j in range(9)}
    # DT spreads the noise columns further than Tr
    assert np.abs(ds["DTMaxProLHD"].X[:, 1:]).max() > np.abs(ds["TrMaxProLHD"].X[:, 1:]).max()


def test_holdout_points_are_sobol_normal():
    X = holdout_points(StudyConfig(test_size=256))
    assert X.shape == (256, 5)
    assert np.all((X[:, 0] > 0) & (X[:, 0] < 1))
    assert abs(X[:, 1:].mean()) < 0.05 and abs(X[:, 1:].std() - 1) < 0.05


@pytest.fixture(scope="module")
def small_report():
    cfg = StudyConfig(designs=("TrMaxProLHD", "DTJCA"), replications=2, fit_starts=4, grid_size=201,
                      mc_size=2**12, jca_restarts=4)
    return cfg, run_simulated_example(cfg, threads=2)


def test_report_rows_and_summary(small_report):
    cfg, rep = small_report
    assert len(rep.rows) == cfg.replications * len(cfg.designs)
    for name in cfg.designs:
        s = rep.summary[name]
        assert s["attempted"] == cfg.replications
        assert s["completed"] == len(rep.column(name, "rmspe"))
    assert rep.provenance["config_hash"] == cfg.digest()
    assert rep.provenance["seeds"]["replications"] == [[cfg.seed, 0], [cfg.seed, 1]]
    assert all(r["status"] == "ok" for r in rep.rows)


def test_report_deterministic_across_threads(small_report):
    cfg, rep = small_report
    again = run_simulated_example(StudyConfig.from_dict(cfg.to_dict()), threads=1)
    assert again.digest() == rep.digest()


def test_zero_response_gives_zero_flag():
    cfg = StudyConfig(designs=("TrMaxProLHD",), replications=1, beta=(0, 0, 0, 0), grid_size=51, mc_size=2**10)
    rep = run_simulated_example(cfg, threads=1)
    assert rep.rows[0]["status"] == "zero"
    assert rep.rows[0]["rmspe"] == 0.0
    assert rep.summary["TrMaxProLHD"]["zero_rmspe"]


def test_max_threads_env(monkeypatch):
    monkeypatch.setenv("ROBUSTFILL_THREADS", "3")
    assert max_threads() == 3
    monkeypatch.setenv("ROBUSTFILL_THREADS", "x")
    with pytest.warns(UserWarning):
        assert max_threads() >= 1
    monkeypatch.delenv("ROBUSTFILL_THREADS")
    assert max_threads() >= 1


# ---- profiles --------------------------------------------------------------


def test_profile_balanced_for_large_theta(tmp_path):
    D = transformed_noise(uniform_design(10), NORMAL)
    grid = np.linspace(0.5 - 2 * SD, 0.5 + 2 * SD, 401)
    vals = emit_profile(D, 1000.0, NORMAL, grid, tmp_path / "p.csv")
    assert vals.max() / np.median(vals) <= 2.0
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "z1,wrmse" and len(lines) == 402


def test_profile_empty_grid_and_design_point(tmp_path):
    D = transformed_noise(uniform_design(5), NORMAL)
    emit_profile(D, 10.0, NORMAL, np.empty((0, 1)), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "z1,wrmse\n"
    vals = emit_profile(D, 10.0, NORMAL, D.X[:, 0], tmp_path / "d.csv")
    np.testing.assert_allclose(vals, 0.0, atol=1e-12)
    np.testing.assert_allclose(vals, wrmse(D, 10.0, D.X, NORMAL), atol=0)
