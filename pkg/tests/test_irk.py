import numpy as np
import pytest

import irksindy as ik
from irksindy.errors import DimensionMismatch, NonConvergence


def decay_field(rate=-1.0):
    lib = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=1,
                                          include_constant=False))
    return (lib, np.array([[rate]]))


def pade_step(z, s):
    """Stability function of the s-stage Gauss method (diagonal Pade)."""
    if s == 1:
        return (1 + z / 2) / (1 - z / 2)
    if s == 2:
        return (1 + z / 2 + z * z / 12) / (1 - z / 2 + z * z / 12)
    raise ValueError(s)


@pytest.mark.parametrize("method", ["fixed_point", "newton"])
def test_scalar_affine_stage_closed_form(method):
    # x' = -x, s=1: chi = x / (1 + h/2)
    tab = ik.gauss_tableau(1)
    sv = ik.solve_stages(decay_field(), np.array([1.0]), 0.1, tab,
                         ik.SolverSettings(method=method))
    assert sv.chi[0, 0] == pytest.approx(1.0 / 1.05, abs=1e-12)
    assert sv.residual <= 1e-12


def test_zero_step_returns_base_state():
    tab = ik.gauss_tableau(3)
    sv = ik.solve_stages(decay_field(), np.array([1.0]), 0.0, tab)
    assert np.allclose(sv.chi, 1.0, rtol=0, atol=0)
    assert sv.iterations_used <= 1
    y = ik.step(decay_field(), np.array([1.0]), 0.0, tab)
    assert y[0] == 1.0


def test_stiff_scalar_newton_vs_fixed_point():
    # x' = -100 x at h=0.1: the fixed-point map has contraction factor 5
    tab = ik.gauss_tableau(1)
    field = decay_field(-100.0)
    sv = ik.solve_stages(field, np.array([1.0]), 0.1, tab,
                         ik.SolverSettings(method="newton"))
    assert sv.chi[0, 0] == pytest.approx(1.0 / 6.0, abs=1e-12)
    with pytest.raises(NonConvergence):
        ik.solve_stages(field, np.array([1.0]), 0.1, tab,
                        ik.SolverSettings(method="fixed_point"))


def test_step_closed_forms():
    tab1 = ik.gauss_tableau(1)
    y = ik.step(decay_field(), np.array([1.0]), 0.1, tab1)
    assert y[0] == pytest.approx(1.0 - 0.1 / 1.05, abs=1e-12)
    tab2 = ik.gauss_tableau(2)
    y = ik.step(decay_field(), np.array([1.0]), 0.1, tab2)
    # the s=2 step realizes the diagonal (2,2) Pade approximant of e^z,
    # which sits within |z|^5/720 of the exponential itself at z = -0.1
    assert y[0] == pytest.approx(pade_step(-0.1, 2), abs=1e-12)
    assert y[0] == pytest.approx(np.exp(-0.1), abs=2e-8)


def test_newton_and_fixed_point_agree():
    lv = ik.reference_model("lotka_volterra")
    tab = ik.gauss_tableau(3)
    x = np.array([1.8, 1.8])
    tol = 1e-12
    ya = ik.step(lv.field, x, 0.05, tab, ik.SolverSettings(method="newton", tol=tol))
    yb = ik.step(lv.field, x, 0.05, tab,
                 ik.SolverSettings(method="fixed_point", tol=tol))
    assert np.max(np.abs(ya - yb)) <= 10 * tol


def test_stage_predictor_identities():
    fhn = ik.reference_model("fhn")
    tab = ik.gauss_tableau(3)
    x = np.array([0.5, 0.2])
    h = 0.08
    tol = 1e-13
    settings = ik.SolverSettings(method="newton", tol=tol)
    sv = ik.solve_stages(fhn.field, x, h, tab, settings)
    left, right = ik.stage_predictors(sv, fhn.field, x, h, tab)
    y = ik.step(fhn.field, x, h, tab, settings)
    for i in range(tab.s):
        assert np.max(np.abs(left[i] - x)) <= 10 * tol
        assert np.max(np.abs(right[i] - y)) <= 10 * tol


def test_stage_predictor_scalar_value():
    tab = ik.gauss_tableau(1)
    field = decay_field()
    sv = ik.solve_stages(field, np.array([1.0]), 0.1, tab)
    _, right = ik.stage_predictors(sv, field, np.array([1.0]), 0.1, tab)
    assert right[0, 0] == pytest.approx(1.0 - 0.1 / 1.05, abs=1e-10)


def test_stage_predictor_shape_check():
    tab = ik.gauss_tableau(2)
    with pytest.raises(DimensionMismatch):
        ik.stage_predictors(np.zeros((3, 1)), decay_field(), np.array([1.0]),
                            0.1, tab)


def test_predict_matrices_self_consistency():
    lin = ik.reference_model("linear_osc")
    ds = ik.generate(lin, np.array([2.0, 0.0]), 0.0, 2.0, 40)
    tab = ik.gauss_tableau(5)
    xl_pred, xr_pred = ik.predict_matrices(lin.field, ds, tab)
    assert np.max(np.abs(xr_pred - ds.X[1:])) <= 1e-8
    assert np.max(np.abs(xl_pred - ds.X[:-1])) <= 1e-8


def test_predict_matrices_zero_field_is_identity():
    lib = ik.build_library(ik.LibrarySpec(dimension=2, polynomial_max_degree=2))
    ds = ik.Dataset(t=np.linspace(0, 1, 5),
                    X=np.outer(np.arange(5.0), [1.0, -0.5]) + 1.0)
    xl_pred, xr_pred = ik.predict_matrices((lib, np.zeros((lib.p, 2))), ds,
                                           ik.gauss_tableau(2))
    assert np.array_equal(xr_pred, ds.X[:-1])
    assert np.array_equal(xl_pred, ds.X[1:])


def test_predict_matrices_backward_example():
    # single interval of x' = -x data: the backward step inverts the
    # forward Pade step, so it lands on the left sample to high accuracy
    ds = ik.Dataset(t=np.array([0.0, 0.1]), X=np.array([[1.0], [np.exp(-0.1)]]))
    xl_pred, _ = ik.predict_matrices(decay_field(), ds, ik.gauss_tableau(2))
    assert xl_pred[0, 0] == pytest.approx(0.99999999, abs=1e-7)


def test_predict_matrices_literal_alignment():
    ds = ik.Dataset(t=np.array([0.0, 0.1]), X=np.array([[1.0], [0.904837]]))
    tab = ik.gauss_tableau(2)
    xl_lit, _ = ik.predict_matrices(decay_field(), ds, tab, alignment="literal")
    # literal backward rows start from the left sample instead
    assert xl_lit[0, 0] == pytest.approx(1.0 / pade_step(-0.1, 2), abs=1e-10)
    with pytest.raises(ValueError):
        ik.predict_matrices(decay_field(), ds, tab, alignment="sideways")


def test_predict_matrices_matches_per_interval_steps():
    lv = ik.reference_model("lotka_volterra")
    ds = ik.generate(lv, np.array([1.8, 1.8]), 0.0, 1.0, 8)
    tab = ik.gauss_tableau(2)
    settings = ik.SolverSettings(method="newton")
    xl_pred, xr_pred = ik.predict_matrices(lv.field, ds, tab, settings)
    for k in range(ds.m):
        fwd = ik.step(lv.field, ds.X[k], ds.h[k], tab, settings)
        bwd = ik.step(lv.field, ds.X[k + 1], -ds.h[k], tab, settings)
        assert np.max(np.abs(xr_pred[k] - fwd)) <= 1e-13
        assert np.max(np.abs(xl_pred[k] - bwd)) <= 1e-13


def test_solver_failure_reports_interval():
    # huge step on a stiff cubic makes Newton give up somewhere past row 0
    lib = ik.build_library(ik.LibrarySpec(dimension=1, polynomial_max_degree=3,
                                          include_constant=False))
    xi = np.array([[0.0], [0.0], [200.0]])
    ds = ik.Dataset(t=np.array([0.0, 5.0, 10.0]), X=np.array([[0.1], [2.0], [40.0]]))
    with pytest.raises(NonConvergence) as err:
        ik.predict_matrices((lib, xi), ds, ik.gauss_tableau(2),
                            ik.SolverSettings(method="newton", max_iterations=8))
    assert err.value.row is not None


BENCHMARKS = ["linear_osc", "cubic_osc", "fhn", "lorenz", "lotka_volterra",
              "logistic"]
START_STATES = {
    "linear_osc": [2.0, 0.0],
    "cubic_osc": [2.0, 0.0],
    "fhn": [0.0, 0.0],
    "lorenz": [-8.0, 7.0, 27.0],
    "lotka_volterra": [1.8, 1.8],
    "logistic": [0.1],
}


@pytest.mark.parametrize("name", BENCHMARKS)
@pytest.mark.parametrize("s", [1, 2, 3])
def test_forward_backward_symmetry(name, s):
    # Gauss methods are symmetric: the backward step undoes the forward one
    model = ik.reference_model(name)
    tab = ik.gauss_tableau(s)
    tol = 1e-13
    settings = ik.SolverSettings(method="newton", tol=tol)
    x = np.asarray(START_STATES[name], dtype=float)
    h = 0.1 if name != "lorenz" else 0.01
    y = ik.step(model.field, x, h, tab, settings)
    back = ik.step(model.field, y, -h, tab, settings)
    assert np.max(np.abs(back - x)) <= 100 * tol


def test_a_stability_versus_explicit_rk4():
    # Gauss s=1 damps an extremely stiff decay at h=0.1 while the
    # classical explicit fourth-order amplification polynomial explodes
    tab = ik.gauss_tableau(1)
    field = decay_field(-1e6)
    y = ik.step(field, np.array([1.0]), 0.1, tab,
                ik.SolverSettings(method="newton"))
    assert abs(y[0]) < 1.0
    z = -1e5
    rk4_amp = abs(1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24)
    assert rk4_amp > 1.0


def test_rk4_step_batch_matches_classical_formula():
    from irksindy.irk import rk4_step_batch
    lib, xi = decay_field()
    y = rk4_step_batch(xi, lib, np.array([[1.0]]), np.array([0.1]))
    z = -0.1
    expect = 1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24
    assert y[0, 0] == pytest.approx(expect, abs=1e-15)
