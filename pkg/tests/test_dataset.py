import math

import numpy as np
import pytest

import irksindy as ik
from irksindy.errors import (DegenerateCoordinate, InvalidParameter,
                             MalformedFile, NonPolynomialLibrary,
                             NonUniformGrid, UnknownModel,
                             UnsupportedScalingMode, WindowTooLarge)


def logistic_closed_form(t, r=0.31, K=2.0, T0=0.1):
    return K / (1.0 + ((K - T0) / T0) * np.exp(-r * np.asarray(t)))


# -- reference models --------------------------------------------------------

def test_linear_oscillator_coefficients():
    m = ik.reference_model("linear_osc")
    names = m.library.names
    xi = m.coefficients.xi
    assert xi[names.index("x1")].tolist() == [-0.1, -2.0]
    assert xi[names.index("x2")].tolist() == [2.0, -0.1]
    assert np.count_nonzero(xi) == 4


def test_cubic_oscillator_coefficients():
    m = ik.reference_model("cubic_osc")
    names = m.library.names
    xi = m.coefficients.xi
    assert xi[names.index("x1^3")].tolist() == [-0.1, -2.0]
    assert xi[names.index("x2^3")].tolist() == [2.0, -0.1]
    assert np.count_nonzero(xi) == 4


def test_fhn_coefficients():
    m = ik.reference_model("fhn")
    names = m.library.names
    xi = m.coefficients.xi
    assert np.allclose(xi[names.index("1")], [0.5, 0.032])
    assert np.allclose(xi[names.index("x1")], [1.0, 0.04])
    assert np.allclose(xi[names.index("x2")], [-1.0, -0.028])
    assert np.allclose(xi[names.index("x1^3")], [-1.0 / 3.0, 0.0])


def test_lorenz_coefficients():
    m = ik.reference_model("lorenz")
    names = m.library.names
    xi = m.coefficients.xi
    assert np.allclose(xi[names.index("x1")], [-10.0, 28.0, 0.0])
    assert np.allclose(xi[names.index("x2")], [10.0, -1.0, 0.0])
    assert np.allclose(xi[names.index("x3")], [0.0, 0.0, -8.0 / 3.0])
    assert np.allclose(xi[names.index("x1*x3")], [0.0, -1.0, 0.0])
    assert np.allclose(xi[names.index("x1*x2")], [0.0, 0.0, 1.0])


def test_lotka_volterra_coefficients():
    m = ik.reference_model("lotka_volterra")
    names = m.library.names
    xi = m.coefficients.xi
    assert np.allclose(xi[names.index("x1")], [2.0 / 3.0, 0.0])
    assert np.allclose(xi[names.index("x2")], [0.0, -1.0])
    assert np.allclose(xi[names.index("x1*x2")], [-4.0 / 3.0, 1.0])


def test_logistic_expansion():
    # T' = r T (1 - T/K) expands to a T - b T^2 with a = r, b = r/K
    m = ik.reference_model("logistic")
    names = m.library.names
    xi = m.coefficients.xi
    assert xi[names.index("x1"), 0] == pytest.approx(0.31)
    assert xi[names.index("x1^2"), 0] == pytest.approx(-0.155)


def test_model_overrides():
    m = ik.reference_model("lotka_volterra", {"alpha": 1.0, "beta": 0.5})
    names = m.library.names
    assert m.coefficients.xi[names.index("x1"), 0] == pytest.approx(1.0)
    assert m.coefficients.xi[names.index("x1*x2"), 0] == pytest.approx(-0.5)
    with pytest.raises(InvalidParameter):
        ik.reference_model("linear_osc", {"alpha": 1.0})
    with pytest.raises(UnknownModel):
        ik.reference_model("van_der_pol")
    with pytest.raises(InvalidParameter):
        ik.reference_model("custom")


# -- trajectory generation ----------------------------------------------------

def test_generate_initial_state_exact():
    m = ik.reference_model("lorenz")
    x0 = np.array([-8.0, 7.0, 27.0])
    ds = ik.generate(m, x0, 0.0, 0.1, 5)
    assert np.array_equal(ds.X[0], x0)
    assert ds.t.shape == (6,)
    assert np.allclose(ds.h, 0.02)


def test_generate_exponential_decay_accuracy():
    lib = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=1,
                                          include_constant=False))
    model = ik.ReferenceModel("custom", 1, lib, ik.CoefficientMatrix([[-1.0]]))
    ds = ik.generate(model, np.array([1.0]), 0.0, 1.0, 20)
    exact = np.exp(-ds.t)
    assert np.max(np.abs(ds.X[:, 0] - exact) / exact) <= 1e-9


def test_generate_logistic_matches_closed_form():
    model = ik.reference_model("logistic")
    ds = ik.generate(model, np.array([0.1]), 0.0, 50.0, 50)
    assert ds.X[10, 0] == pytest.approx(logistic_closed_form(10.0), abs=1e-5)
    assert ds.X[50, 0] == pytest.approx(logistic_closed_form(50.0), abs=1e-8)


def test_generate_linear_spiral_norm():
    # eigenvalues -0.1 +- 2i: radius decays like 2 exp(-0.1 t)
    model = ik.reference_model("linear_osc")
    ds = ik.generate(model, np.array([2.0, 0.0]), 0.0, 20.0, 100)
    assert np.linalg.norm(ds.X[-1]) == pytest.approx(2 * math.exp(-2.0), abs=1e-4)


def test_generate_validates_grid():
    model = ik.reference_model("logistic")
    with pytest.raises(InvalidParameter):
        ik.generate(model, np.array([0.1]), 1.0, 1.0, 5)
    with pytest.raises(InvalidParameter):
        ik.generate(model, np.array([0.1]), 0.0, 1.0, 0)
    with pytest.raises(InvalidParameter):
        ik.generate(model, np.array([0.1, 0.4]), 0.0, 1.0, 5)


# -- noise ---------------------------------------------------------------------

def test_zero_noise_is_identity():
    ds = ik.Dataset(np.linspace(0, 1, 4), np.arange(8.0).reshape(4, 2))
    noisy = ik.add_noise(ds, 0.0, seed=3)
    assert np.array_equal(noisy.X, ds.X)
    assert np.array_equal(noisy.t, ds.t)


def test_noise_is_deterministic_per_seed():
    ds = ik.Dataset(np.linspace(0, 1, 50), np.zeros((50, 2)))
    a = ik.add_noise(ds, 0.1, seed=7)
    b = ik.add_noise(ds, 0.1, seed=7)
    c = ik.add_noise(ds, 0.1, seed=8)
    assert np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_noise_standard_deviation():
    ds = ik.Dataset(np.linspace(0, 1, 10001), np.zeros((10001, 1)))
    noisy = ik.add_noise(ds, 0.1, seed=123)
    # 3 sigma of the std estimator for n = 10001 draws
    assert 0.097 <= noisy.X.std() <= 0.103
    assert abs(noisy.X.mean()) <= 0.003


# -- smoothing -------------------------------------------------------------------

def test_savgol_reproduces_quadratic():
    t = np.linspace(0, 1, 41)
    X = (3.0 * t * t - 2.0 * t + 0.5)[:, None]
    ds = ik.Dataset(t, X)
    out = ik.savgol_filter(ds, window=5, poly_order=2)
    assert np.max(np.abs(out.X - X)) <= 1e-12


def test_savgol_reproduces_linear():
    t = np.linspace(0, 2, 31)
    X = np.stack([2.0 * t + 1.0, -t], axis=1)
    ds = ik.Dataset(t, X)
    out = ik.savgol_filter(ds, window=7, poly_order=1)
    assert np.max(np.abs(out.X - X)) <= 1e-12


def test_savgol_reduces_noise_on_sine():
    t = np.linspace(0, 2 * np.pi, 201)
    clean = np.sin(t)[:, None]
    improved = 0
    for seed in range(5):
        noisy = ik.add_noise(ik.Dataset(t, clean), 0.1, seed=seed)
        smooth = ik.savgol_filter(noisy, window=11, poly_order=3)
        rmse_noisy = np.sqrt(np.mean((noisy.X - clean) ** 2))
        rmse_smooth = np.sqrt(np.mean((smooth.X - clean) ** 2))
        improved += rmse_smooth < rmse_noisy
    assert improved == 5


def test_savgol_window_validation():
    ds = ik.Dataset(np.linspace(0, 1, 11), np.zeros((11, 1)))
    with pytest.raises(WindowTooLarge):
        ik.savgol_filter(ds, window=4, poly_order=1)
    with pytest.raises(WindowTooLarge):
        ik.savgol_filter(ds, window=13, poly_order=2)
    with pytest.raises(WindowTooLarge):
        ik.savgol_filter(ds, window=5, poly_order=5)
    bad = ik.Dataset(np.array([0.0, 0.1, 0.3, 0.6, 1.0]), np.zeros((5, 1)))
    with pytest.raises(NonUniformGrid):
        ik.savgol_filter(bad, window=3, poly_order=1)


# -- standardization --------------------------------------------------------------

def test_scale_only_unit_std():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 3)) * np.array([2.0, 0.5, 7.0])
    ds = ik.Dataset(np.linspace(0, 1, 200), X)
    scaled, info = ik.standardize(ds, "scale_only")
    assert np.max(np.abs(scaled.X.std(axis=0) - 1.0)) <= 1e-12
    assert np.array_equal(info.mu, np.zeros(3))
    assert info.mode == "scale_only"
    # mean/std ratio is untouched by pure scaling
    assert np.allclose(scaled.X.mean(axis=0) / scaled.X.std(axis=0),
                       ds.X.mean(axis=0) / ds.X.std(axis=0), atol=1e-12)


def test_full_standardize_zero_mean_unit_std():
    rng = np.random.default_rng(1)
    X = rng.normal(loc=5.0, scale=3.0, size=(500, 2))
    ds = ik.Dataset(np.linspace(0, 1, 500), X)
    scaled, info = ik.standardize(ds, "full_standardize")
    assert np.max(np.abs(scaled.X.mean(axis=0))) <= 1e-12
    assert np.max(np.abs(scaled.X.std(axis=0) - 1.0)) <= 1e-12
    assert np.allclose(info.mu, X.mean(axis=0))


def test_standardize_rejects_constant_coordinate():
    X = np.stack([np.linspace(0, 1, 10), np.full(10, 2.0)], axis=1)
    ds = ik.Dataset(np.linspace(0, 1, 10), X)
    with pytest.raises(DegenerateCoordinate):
        ik.standardize(ds, "scale_only")


# -- coefficient rescaling ----------------------------------------------------------

def test_rescale_identity_for_unit_sigma():
    lib = ik.build_library(ik.LibrarySpec(dimension=2, polynomial_max_degree=2))
    xi = ik.CoefficientMatrix(np.arange(12.0).reshape(6, 2))
    info = ik.ScalingInfo(np.zeros(2), np.ones(2), "scale_only")
    out = ik.rescale_coefficients(xi, info, lib)
    assert np.array_equal(out.xi, xi.xi)


def test_rescale_logistic_example():
    # y = T/2 turns T' = 0.31 T - 0.155 T^2 into y' = 0.31 y - 0.31 y^2
    lib = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=2,
                                          include_constant=False))
    scaled = ik.CoefficientMatrix(np.array([[0.31], [-0.31]]))
    info = ik.ScalingInfo(np.zeros(1), np.array([2.0]), "scale_only")
    out = ik.rescale_coefficients(scaled, info, lib)
    assert np.allclose(out.xi[:, 0], [0.31, -0.155])


def test_rescale_linear_terms_follow_sigma_ratio():
    lib = ik.build_library(ik.LibrarySpec(dimension=2, polynomial_max_degree=1,
                                          include_constant=False))
    sigma = np.array([2.0, 5.0])
    scaled = ik.CoefficientMatrix(np.ones((2, 2)))
    out = ik.rescale_coefficients(scaled, ik.ScalingInfo(np.zeros(2), sigma,
                                                         "scale_only"), lib)
    # term j feeding equation i picks up sigma_i / sigma_j
    expect = sigma[None, :] / sigma[:, None]
    assert np.allclose(out.xi, expect)


def test_rescale_round_trip():
    lib = ik.build_library(ik.LibrarySpec(dimension=3, polynomial_max_degree=2))
    rng = np.random.default_rng(5)
    xi_orig = rng.normal(size=(lib.p, 3))
    sigma = np.array([2.0, 0.3, 11.0])
    # transform original coefficients into scaled coordinates by hand
    denom = np.prod(sigma[None, :] ** lib._exponents, axis=1)
    xi_scaled = xi_orig * denom[:, None] / sigma[None, :]
    out = ik.rescale_coefficients(ik.CoefficientMatrix(xi_scaled),
                                  ik.ScalingInfo(np.zeros(3), sigma,
                                                 "scale_only"), lib)
    assert np.max(np.abs(out.xi - xi_orig)) <= 1e-12


def test_rescale_rejects_full_standardize_and_nonpolynomial():
    lib = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=2))
    xi = ik.CoefficientMatrix(np.ones((lib.p, 1)))
    with pytest.raises(UnsupportedScalingMode):
        ik.rescale_coefficients(xi, ik.ScalingInfo(np.zeros(1), np.ones(1),
                                                   "full_standardize"), lib)
    trig = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=1,
                                           trig_frequencies=(1.0,)))
    with pytest.raises(NonPolynomialLibrary):
        ik.rescale_coefficients(ik.CoefficientMatrix(np.ones((trig.p, 1))),
                                ik.ScalingInfo(np.zeros(1), np.ones(1),
                                               "scale_only"), trig)


# -- csv round trip -------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    model = ik.reference_model("lotka_volterra")
    ds = ik.generate(model, np.array([1.8, 1.8]), 0.0, 2.0, 17)
    path = tmp_path / "traj.csv"
    ik.save_csv(ds, path)
    back = ik.load_csv(path)
    assert np.array_equal(back.t, ds.t)
    assert np.array_equal(back.X, ds.X)
    header = path.read_text().splitlines()[0]
    assert header == "t,x1,x2"


def test_csv_rejects_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,x1\n0.0,1.0\n0.5,2.0\n0.25,3.0\n")
    with pytest.raises(MalformedFile):
        ik.load_csv(p)
    p.write_text("t,x1\n0.0,1.0\n0.5,2.0,9.0\n")
    with pytest.raises(MalformedFile):
        ik.load_csv(p)
    p.write_text("t,x1\n0.0,banana\n")
    with pytest.raises(MalformedFile):
        ik.load_csv(p)
    p.write_text("")
    with pytest.raises(MalformedFile):
        ik.load_csv(p)


def test_noise_then_smoothing_improves_benchmarks():
    model = ik.reference_model("linear_osc")
    ds = ik.generate(model, np.array([2.0, 0.0]), 0.0, 20.0, 400)
    for sigma in (0.01, 0.04):
        wins = 0
        for seed in range(5):
            noisy = ik.add_noise(ds, sigma, seed=seed)
            smooth = ik.savgol_filter(noisy, window=11, poly_order=3)
            rmse_noisy = np.sqrt(np.mean((noisy.X - ds.X) ** 2))
            rmse_smooth = np.sqrt(np.mean((smooth.X - ds.X) ** 2))
            wins += rmse_smooth < rmse_noisy
        assert wins >= 4
