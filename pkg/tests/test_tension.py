"""Tests for the tension solve, including a dense-matrix oracle.

The oracle assembles every operator (dealiasing, differentiation,
Fourier multipliers, tangential projection, lift and its adjoint) as an
explicit dense matrix built from the DFT matrix, composes them into the
tension system, and solves it directly — a code path sharing nothing
with the matrix-free FFT implementation beyond the conventions.
"""

import numpy as np
import pytest

from filament.evolution import velocity
from filament.multipliers import build_table, rft_constants
from filament.spectral import (
    Grid,
    PeriodicCurve,
    SobolevIndex,
    band_limit,
    dealias,
    sobolev_norm,
)
from filament.tension import (
    SolverError,
    TensionField,
    TensionProblem,
    apply_B,
    assemble_rhs,
    lift,
    lift_adjoint,
    solve_tension,
    solve_tension_rft,
)

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------- oracle


def spectral_matrix(n, diag):
    """Dense real matrix of the Fourier multiplier with symbol diag(k)."""
    j = np.arange(n)
    forward = np.exp(-TWO_PI * 1j * np.outer(j, j) / n) / n  # samples -> coeffs
    inverse = np.exp(TWO_PI * 1j * np.outer(j, j) / n)  # coeffs -> samples
    return np.real(inverse @ np.diag(diag) @ forward)


def dense_operators(curve, model, epsilon):
    """Dense versions of the force-to-velocity map, lift, and adjoint."""
    n = curve.n
    k = np.fft.fftfreq(n, 1.0 / n)
    kabs = np.abs(k).astype(int)
    kcut = n // 3
    nyq = kabs == n // 2

    dealias_m = spectral_matrix(n, (kabs <= kcut).astype(float))
    deriv_diag = TWO_PI * 1j * k
    deriv_diag[nyq] = 0.0
    deriv_m = spectral_matrix(n, deriv_diag)

    eye3 = np.eye(3)
    dealias_v = np.kron(dealias_m, eye3)
    deriv_v = np.kron(deriv_m, eye3)

    # pointwise dot with the tangent (n x 3n) and its transpose
    dot_t = np.zeros((n, 3 * n))
    for i in range(n):
        dot_t[i, 3 * i:3 * i + 3] = curve.tangent[i]
    q = dealias_m @ dot_t @ dealias_v
    proj = q.T @ q

    if model == "leps":
        table = build_table(epsilon, n // 2)

        def mult(values):
            d = values[kabs].astype(float)
            d[nyq] = 0.0
            return np.kron(spectral_matrix(n, d), eye3)

        lmap = proj @ mult(table.mt) @ proj
        lmap += (np.eye(3 * n) - proj) @ mult(table.mn) @ (np.eye(3 * n) - proj)
    else:
        constants = rft_constants(epsilon)
        lmap = constants.normal * (np.eye(3 * n) + proj)

    lift_m = deriv_v @ dealias_v @ dot_t.T  # tau -> (tau X_s)_s
    adjoint_m = -dealias_m @ dot_t @ dealias_v @ deriv_v
    return lmap, lift_m, adjoint_m


def dense_solve(curve, model, epsilon):
    lmap, lift_m, adjoint_m = dense_operators(curve, model, epsilon)
    b = adjoint_m @ lmap @ lift_m
    rhs = adjoint_m @ lmap @ curve.xssss.reshape(-1)
    # restrict to an orthonormal basis of the retained band, where the
    # lift/adjoint sandwich is symmetric positive definite
    n = curve.n
    kabs = np.abs(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    dealias_m = spectral_matrix(n, (kabs <= n // 3).astype(float))
    w, v = np.linalg.eigh(dealias_m)
    basis = v[:, w > 0.5]
    tau_band = np.linalg.solve(basis.T @ b @ basis, basis.T @ rhs)
    return basis @ tau_band


def band_noise(n, seed):
    rng = np.random.default_rng(seed)
    return band_limit(rng.standard_normal(n))


def make_problem(curve, model, epsilon, **kwargs):
    if model == "leps":
        return TensionProblem(curve, "leps",
                              table=build_table(epsilon, curve.n // 2), **kwargs)
    return TensionProblem(curve, "rft", constants=rft_constants(epsilon), **kwargs)


# ----------------------------------------------------------------- tests


class TestOperatorStructure:
    @pytest.mark.parametrize("model", ["leps", "rft"])
    def test_B_symmetric(self, model):
        curve = PeriodicCurve.perturbed_circle(64, 3, 0.05)
        problem = make_problem(curve, model, 1e-3)
        a, b = band_noise(64, 1), band_noise(64, 2)
        lhs = float(np.dot(a, apply_B(problem, b)))
        rhs = float(np.dot(b, apply_B(problem, a)))
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-13)

    @pytest.mark.parametrize("model", ["leps", "rft"])
    def test_B_positive_definite_on_band(self, model):
        curve = PeriodicCurve.perturbed_circle(64, 2, 0.03)
        problem = make_problem(curve, model, 1e-3)
        for seed in range(10):
            tau = band_noise(64, 10 + seed)
            assert float(np.dot(tau, apply_B(problem, tau))) > 0.0

    def test_lift_adjoint_is_exact_adjoint(self):
        curve = PeriodicCurve.perturbed_circle(64, 3, 0.05)
        rng = np.random.default_rng(5)
        tau = band_noise(64, 3)
        vec = rng.standard_normal((64, 3))
        lhs = float(np.mean(np.sum(lift(curve, tau) * vec, axis=1)))
        rhs = float(np.mean(tau * lift_adjoint(curve, vec)))
        # lift pairs with vec; the adjoint pairs tau with -d/ds terms
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-13)


class TestDenseOracle:
    @pytest.mark.parametrize("model", ["leps", "rft"])
    def test_matches_dense_solve_n32(self, model):
        curve = PeriodicCurve.perturbed_circle(32, 2, 0.04)
        problem = make_problem(curve, model, 1e-2)
        tau = solve_tension(problem)
        oracle = dense_solve(curve, model, 1e-2)
        err = sobolev_norm(tau.values - oracle, SobolevIndex(0.5))
        assert err < 1e-8

    def test_dense_rhs_matches_matrix_free(self):
        curve = PeriodicCurve.perturbed_circle(32, 3, 0.05)
        problem = make_problem(curve, "leps", 1e-2)
        _, lift_m, adjoint_m = dense_operators(curve, "leps", 1e-2)
        lmap, _, _ = dense_operators(curve, "leps", 1e-2)
        dense_rhs = adjoint_m @ lmap @ curve.xssss.reshape(-1)
        assert np.max(np.abs(dense_rhs - assemble_rhs(problem))) < 1e-8

    def test_dense_B_matches_matrix_free_apply(self):
        curve = PeriodicCurve.perturbed_circle(32, 2, 0.04)
        problem = make_problem(curve, "rft", 1e-2)
        lmap, lift_m, adjoint_m = dense_operators(curve, "rft", 1e-2)
        b = adjoint_m @ lmap @ lift_m
        tau = band_noise(32, 7)
        assert np.max(np.abs(b @ tau - apply_B(problem, tau))) < 1e-10


class TestCircle:
    @pytest.mark.parametrize("model", ["leps", "rft"])
    @pytest.mark.parametrize("eps", [1e-2, 1e-4])
    def test_circle_tension_is_minus_4pi2(self, model, eps):
        curve = PeriodicCurve.circle(128)
        tau = solve_tension(make_problem(curve, model, eps))
        target = -4.0 * np.pi**2
        assert np.max(np.abs(tau.values - target)) < 1e-5 * abs(target)

    def test_solution_independent_of_warm_start(self):
        curve = PeriodicCurve.perturbed_circle(64, 3, 0.05)
        problem = make_problem(curve, "leps", 1e-3)
        a = solve_tension(problem)
        b = solve_tension(problem, initial=band_noise(64, 9) * 10.0)
        assert np.max(np.abs(a.values - b.values)) < 1e-7


class TestConstraintEnforcement:
    @pytest.mark.parametrize("model", ["leps", "rft"])
    def test_velocity_preserves_inextensibility(self, model):
        # with the solved tension, d/dt |X_s|^2 = 2 X_s . V_s vanishes
        # to solver tolerance.
        curve = PeriodicCurve.perturbed_circle(128, 3, 0.05)
        problem = make_problem(curve, model, 1e-3)
        tau = solve_tension(problem)
        v = velocity(problem, tau)
        from filament.spectral import derivative

        constraint = np.einsum("ij,ij->i", curve.tangent, dealias(derivative(v)))
        vnorm = sobolev_norm(v, SobolevIndex(1.0))
        assert np.max(np.abs(constraint)) < 1e-6 * max(vnorm, 1.0)

    def test_random_curves_bounded_tension(self):
        for seed, (mode, amp) in enumerate([(2, 0.02), (3, 0.05), (4, 0.03),
                                            (5, 0.02), (2, 0.08)]):
            curve = PeriodicCurve.perturbed_circle(128, mode, amp)
            tau = solve_tension(make_problem(curve, "leps", 1e-3))
            assert tau.iterations < 50
            assert np.isfinite(sobolev_norm(tau.values, SobolevIndex(1.0)))


class TestSolverInterface:
    def test_solver_error_carries_history(self):
        curve = PeriodicCurve.perturbed_circle(64, 3, 0.05)
        problem = make_problem(curve, "leps", 1e-3, max_iter=1)
        with pytest.raises(SolverError) as err:
            solve_tension(problem)
        assert len(err.value.residuals) >= 2
        assert err.value.residuals[0] > 0.0

    def test_rft_wrapper_accepts_epsilon(self):
        curve = PeriodicCurve.circle(64)
        a = solve_tension_rft(curve, 1e-3)
        b = solve_tension_rft(curve, rft_constants(1e-3))
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_problem_validation(self):
        curve = PeriodicCurve.circle(32)
        with pytest.raises(ValueError):
            TensionProblem(curve, "leps")
        with pytest.raises(ValueError):
            TensionProblem(curve, "rft")
        with pytest.raises(ValueError):
            TensionProblem(curve, "stokes", table=build_table(1e-3, 16))

    def test_field_immutable_with_mean(self):
        field = TensionField.from_values(np.arange(4.0))
        assert field.mean == 1.5
        with pytest.raises(ValueError):
            field.values[0] = 7.0
