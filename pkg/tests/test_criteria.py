import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss

from oracles import composite_gl, gauss_kernel_mse, imse_internal_tensor, irmse_gl
from robustfill.criteria import (
    CriterionConfig,
    InternalNoiseSpec,
    QuadratureSpec,
    a_matrix,
    abar_matrix,
    c_k,
    efficiency_table,
    imse,
    imse_internal,
    irmse,
    irmse_k,
    irmse_upper_bound,
    min_efficiency,
    nearest_point_approx,
    weighted_power_mean,
    wrmse,
)
from robustfill.generators import cross_array, random_lhd, uniform_design
from robustfill.gp_core import NUGGET, CorrelationParams, Design
from robustfill.stats_dist import BetaWarp, NoiseModel, double_transform, inverse_transform

SD = 1.0 / 6.0
NORMAL = NoiseModel.normal(0.5, SD)
PANEL = CriterionConfig(quad=QuadratureSpec(rule="panel", nodes=64))


# ---- normaliser ----------------------------------------------------------


def test_c2_for_normal():
    assert c_k(NORMAL, 2) == pytest.approx(3 / math.sqrt(math.pi), rel=1e-14)
    assert 3 / math.sqrt(math.pi) == pytest.approx(1.69257, abs=1e-5)
    quad = composite_gl(lambda z: NORMAL.pdf(z) ** 2, -1.5, 2.5, panels=40, nodes=40)
    assert c_k(NORMAL, 2) == pytest.approx(quad, rel=1e-12)


@pytest.mark.parametrize("m", [
    NoiseModel(kind="truncated-normal", mean=0.3, sd=0.2),
    NoiseModel.uniform(-1, 2),
    NoiseModel(kind="empirical-table", table=([0.0, 0.3, 1.0], [0.0, 0.6, 1.0])),
])
@pytest.mark.parametrize("k", [1.0, 2.0, 3.5])
def test_ck_against_quadrature(m, k):
    lo, hi = m.support
    pts = sorted({lo, hi, *([] if m.table is None else m.table[0])})
    quad = sum(composite_gl(lambda z: m.pdf(z) ** k, a, b, panels=20, nodes=20) for a, b in zip(pts[:-1], pts[1:]))
    assert c_k(m, k) == pytest.approx(quad, rel=1e-10)


# ---- WRMSE ---------------------------------------------------------------


def test_wrmse_zero_at_design_rows():
    z = inverse_transform(uniform_design(6), NORMAL)
    assert np.max(wrmse(z, 10.0, z, NORMAL)) <= 1e-6


def test_wrmse_zero_outside_truncated_support():
    m = NoiseModel(kind="truncated-normal", mean=0.5, sd=0.3)
    assert np.all(wrmse(np.array([0.2, 0.8]), 10.0, [-0.1, 1.2], m) == 0)


def test_wrmse_profiles_of_transformed_design():
    z = inverse_transform(uniform_design(10), NORMAL)
    g = np.linspace(0.5 - 4 * SD, 0.5 + 4 * SD, 4001)
    centre = np.abs(g - 0.5) <= SD
    tails = np.abs(g - 0.5) > 2 * SD
    w10 = wrmse(z, 10.0, g, NORMAL)
    assert w10[tails].max() > w10[centre].max()
    w1000 = wrmse(z, 1000.0, g, NORMAL)
    inner = np.abs(g - 0.5) <= 2 * SD
    assert w1000[inner].max() / np.median(w1000[inner]) <= 2.0


# ---- IRMSE ---------------------------------------------------------------


def test_irmse_single_point_large_theta_is_one():
    D = Design(np.array([[0.5, 0.5]]), roles=("control", "noise_ext"))
    assert irmse(D, 1e6, NORMAL) == pytest.approx(1.0, abs=1e-3)


def test_irmse_panel_matches_fine_oracle():
    fine = CriterionConfig(quad=QuadratureSpec(rule="panel", nodes=256))
    for z in (inverse_transform(uniform_design(10), NORMAL), double_transform(uniform_design(10), NORMAL, BetaWarp())):
        for th in (10.0, 30.0):
            f = lambda x: np.sqrt(np.clip(gauss_kernel_mse(z[:, None], th, x[:, None]), 0, 1)) * NORMAL.pdf(x)  # noqa: E731
            oracle = composite_gl(f, 0.5 - 10 * SD, 0.5 + 10 * SD, panels=1600, nodes=50)
            assert irmse(z, th, NORMAL, PANEL) == pytest.approx(oracle, rel=1e-5)
            assert irmse(z, th, NORMAL, fine) == pytest.approx(oracle, rel=1e-7)
            # the plain 2000-node rule is coarser but agrees to a few 1e-5
            assert irmse_gl(z, th, 0.5, SD) == pytest.approx(oracle, rel=5e-5)


def test_double_transform_beats_transform_at_theta_10():
    tr = inverse_transform(uniform_design(10), NORMAL)
    dt = double_transform(uniform_design(10), NORMAL, BetaWarp(2 / 3))
    assert irmse_gl(dt, 10.0, 0.5, SD) < irmse_gl(tr, 10.0, 0.5, SD)
    assert irmse(dt, 10.0, NORMAL, PANEL) < irmse(tr, 10.0, NORMAL, PANEL)


def test_irmse_is_k1_member():
    X = random_lhd(7, 2, np.random.default_rng(0))
    D = Design(X, roles=("control", "noise_ext"))
    a = irmse(D, [4.0, 9.0], NORMAL)
    b = irmse_k(D, [4.0, 9.0], NORMAL, CriterionConfig(k=1.0))
    assert abs(a - b) <= 1e-12


def test_irmse_decreases_when_point_added():
    rng = np.random.default_rng(2)
    z = NORMAL.quantile(rng.random(6))
    base = irmse(z, 20.0, NORMAL, PANEL)
    for extra in NORMAL.quantile(rng.random(5)):
        assert irmse(np.append(z, extra), 20.0, NORMAL, PANEL) <= base + 1e-10


def test_uniform_k1_is_unweighted_integrated_rmse():
    X = np.array([0.1, 0.45, 0.8])
    val = irmse_k(X, 12.0, NoiseModel.uniform(), CriterionConfig(k=1.0, quad=PANEL.quad))
    # sqrt(MSE) has a kink at each design point, so the oracle breaks there
    f = lambda x: np.sqrt(np.clip(gauss_kernel_mse(X[:, None], 12.0, x[:, None]), 0, 1))  # noqa: E731
    edges = [0.0, *X, 1.0]
    oracle = sum(composite_gl(f, a, b, panels=20, nodes=30) for a, b in zip(edges[:-1], edges[1:]))
    assert val == pytest.approx(oracle, rel=1e-6)


# ---- IMSE ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_irmse2_squared_is_imse(seed):
    rng = np.random.default_rng(seed)
    D = Design(random_lhd(6, 2, rng), roles=("control", "noise_ext"))
    theta = rng.uniform(2, 30, 2)
    assert irmse_k(D, theta, NORMAL, CriterionConfig(k=2.0)) ** 2 == pytest.approx(imse(D, theta, NORMAL), abs=1e-10)


def test_imse_uniform_matches_classical_integrated_mse():
    X = np.array([0.05, 0.3, 0.62, 0.9])
    oracle = composite_gl(lambda x: gauss_kernel_mse(X[:, None], 15.0, x[:, None]), 0.0, 1.0, panels=50, nodes=30)
    assert imse(X, 15.0, NoiseModel.uniform()) == pytest.approx(oracle, rel=1e-8)
    # control columns are integrated the same way
    assert imse(Design(X), 15.0) == pytest.approx(oracle, rel=1e-8)


def test_imse_single_centre_point_large_theta():
    assert imse(np.array([0.5]), 1e6, NORMAL) == pytest.approx(1.0, abs=1e-3)


def test_imse_matches_direct_quadrature_of_weighted_mse():
    z = NORMAL.quantile(np.array([0.1, 0.35, 0.6, 0.9]))
    t, w = hermegauss(120)
    x = 0.5 + SD / math.sqrt(2) * t
    oracle = np.sum(w / math.sqrt(2 * math.pi) * gauss_kernel_mse(z[:, None], 25.0, x[:, None]))
    assert imse(z, 25.0, NORMAL) == pytest.approx(oracle, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_theorem_identity_for_cross_arrays(n1, n2, p, q, seed):
    rng = np.random.default_rng(seed)
    Dx = random_lhd(n1, p, rng)
    Dz = random_lhd(n2, q, rng)
    tx, tz = rng.uniform(1, 50, p), rng.uniform(1, 50, q)
    D, _ = cross_array(Dx, Dz)
    whole = imse(D, CorrelationParams(tx, tz), NORMAL)
    ix = imse(Design(Dx), tx)
    iz = imse(Dz, tz, NORMAL)
    assert abs(whole - (1 - (1 - ix) * (1 - iz))) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31 - 1))
def test_imse_monotone_under_augmentation(n, seed):
    rng = np.random.default_rng(seed)
    X = random_lhd(n, 2, rng)
    D = Design(X, roles=("control", "noise_ext"))
    new = np.vstack([X, rng.random((1, 2))])
    D2 = Design(new, roles=("control", "noise_ext"))
    assert imse(D2, [5.0, 8.0], NORMAL) <= imse(D, [5.0, 8.0], NORMAL) + 1e-6


def test_criteria_permutation_invariant():
    rng = np.random.default_rng(7)
    X = random_lhd(8, 2, rng)
    perm = rng.permutation(8)
    roles = ("control", "noise_ext")
    for f in (imse, irmse):
        a = f(Design(X, roles=roles), [3.0, 11.0], NORMAL)
        b = f(Design(X[perm], roles=roles), [3.0, 11.0], NORMAL)
        assert a == pytest.approx(b, abs=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(0.5, 4.0))
def test_power_mean_invariant_to_density_scale(scale, k):
    rng = np.random.default_rng(0)
    mse, bw, dens = rng.random(40), rng.random(40), rng.random(40)
    a = weighted_power_mean(mse, bw, dens, k)
    b = weighted_power_mean(mse, bw, scale * dens, k)
    assert a == pytest.approx(b, rel=1e-10)


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(nodes=4)
    with pytest.raises(ValueError):
        CriterionConfig(k=0)
    with pytest.raises(ValueError):
        CriterionConfig(thetas=())


def test_mc_rule_close_to_tensor_rule():
    X = random_lhd(10, 3, np.random.default_rng(1))
    D = Design(X, roles=("control", "noise_ext", "noise_ext"))
    exact = imse(D, 6.0, NORMAL)
    mc = imse(D, 6.0, NORMAL, CriterionConfig(quad=QuadratureSpec(rule="mc", mc_size=2**15)))
    assert mc == pytest.approx(exact, rel=0.02)


# ---- efficiency ----------------------------------------------------------


def test_min_efficiency_of_own_optimum_is_one():
    z = inverse_transform(uniform_design(8), NORMAL)
    opt = {10.0: irmse(z, 10.0, NORMAL, PANEL)}
    assert min_efficiency(z, [10.0], opt, NORMAL) == pytest.approx(1.0, abs=1e-14)


def test_min_efficiency_missing_theta():
    with pytest.raises(KeyError):
        min_efficiency(uniform_design(5), [5.0, 10.0], {5.0: 0.1}, NORMAL)


def test_efficiency_never_exceeds_one_and_updates_optima():
    rng = np.random.default_rng(3)
    optima = {5.0: 1.0, 20.0: 1.0}
    for _ in range(5):
        z = NORMAL.quantile(np.sort(rng.random(6)))
        assert 0 < min_efficiency(z, [5.0, 20.0], optima, NORMAL) <= 1.0
    assert optima[5.0] < 1.0


def test_efficiency_table_shape_and_diagonal():
    designs = {
        "tr": inverse_transform(uniform_design(8), NORMAL),
        "dt": double_transform(uniform_design(8), NORMAL, BetaWarp()),
    }
    tab = efficiency_table(designs, [5.0, 30.0], NORMAL)
    for t in (5.0, 30.0):
        assert max(tab[a][t] for a in designs) == pytest.approx(1.0)
        assert all(0 < tab[a][t] <= 1 for a in designs)


# ---- nearest-point bound -------------------------------------------------


@pytest.mark.parametrize("theta", [5.0, 30.0])
def test_upper_bound_dominates_irmse(theta):
    rng = np.random.default_rng(int(theta))
    for _ in range(50):
        n = int(rng.integers(2, 15))
        z = np.sort(NORMAL.quantile(rng.random(n)))
        assert irmse_upper_bound(z, theta, NORMAL) >= irmse(z, theta, NORMAL, PANEL) - 1e-10


def test_upper_bound_large_n_approximation():
    z = np.linspace(0.5 - 3 * SD, 0.5 + 3 * SD, 200)
    bound = irmse_upper_bound(z, 10.0, NORMAL)
    approx = nearest_point_approx(z, 10.0, NORMAL)
    assert abs(bound - approx) <= 0.15 * approx


def test_upper_bound_vanishes_for_dense_designs():
    vals = [irmse_upper_bound(np.linspace(0.5 - 6 * SD, 0.5 + 6 * SD, n), 10.0, NORMAL) for n in (50, 500, 5000)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-3


# ---- internal noise ------------------------------------------------------

SPEC = InternalNoiseSpec(sigma_e=1 / 12, theta=50.0)


def test_a_matrix_small_sigma_limit():
    d = np.array([0.1, 0.4, 0.75])
    x = 0.3
    r = np.exp(-50.0 * (x - d) ** 2)
    np.testing.assert_allclose(a_matrix(x, d, InternalNoiseSpec(1e-12, 50.0)), np.outer(r, r), atol=1e-8)


def test_a_matrix_diagonal_at_design_point():
    d = np.array([0.2, 0.6])
    A = a_matrix(0.6, d, SPEC)
    assert A[1, 1] == pytest.approx(1 / math.sqrt(1 + 2 * 50.0 / 144), rel=1e-14)


def test_a_matrix_monte_carlo():
    d = np.array([0.3, 0.42])
    x = 0.35
    e = np.random.default_rng(0).normal(0, SPEC.sigma_e / math.sqrt(2), 100_000)
    ri = np.exp(-50 * (x + e - d[0]) ** 2)
    rj = np.exp(-50 * (x + e - d[1]) ** 2)
    assert a_matrix(x, d, SPEC)[0, 1] == pytest.approx(np.mean(ri * rj), rel=0.01)


def test_abar_symmetric():
    d = np.random.default_rng(1).random(9)
    Ab = abar_matrix(d, SPEC)
    assert np.max(np.abs(Ab - Ab.T)) <= 1e-12


def test_abar_is_integral_of_a():
    d = np.array([0.05, 0.5, 0.93])
    t, w = np.polynomial.legendre.leggauss(400)
    xs = 0.5 * t + 0.5
    full = sum(0.5 * wi * a_matrix(xi, d, SPEC) for xi, wi in zip(xs, w))
    np.testing.assert_allclose(abar_matrix(d, SPEC), full, rtol=1e-12, atol=1e-15)


def test_imse_internal_closed_form_against_quadrature():
    rng = np.random.default_rng(20)
    for _ in range(20):
        n = int(rng.integers(3, 11))
        d = np.sort(rng.random(n))
        assert imse_internal(d, SPEC) == pytest.approx(imse_internal_tensor(d, SPEC.theta, SPEC.sigma_e, nugget=NUGGET), rel=1e-6)
