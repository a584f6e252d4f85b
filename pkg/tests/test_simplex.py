import numpy as np
import pytest
from scipy.optimize import linprog

from udenoise.simplex import SimplexError, l1_fit, solve


class TestSolve:
    def test_small_lp(self):
        # min -x1 - 2 x2 s.t. x1 + x2 + s = 4, x1 + 3 x2 + t = 6
        c = np.array([-1.0, -2.0, 0.0, 0.0])
        A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
        b = np.array([4.0, 6.0])
        res = solve(c, A, b)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-5.0, abs=1e-9)
        np.testing.assert_allclose(res.x[:2], [3.0, 1.0], atol=1e-9)

    def test_matches_scipy_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            m, n = rng.integers(2, 6), rng.integers(4, 9)
            A = rng.normal(size=(m, n))
            x0 = rng.random(n)  # feasible by construction
            b = A @ x0
            flip = b < 0
            A[flip] *= -1
            b[flip] *= -1
            c = rng.normal(size=n)
            ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
            try:
                res = solve(c, A, b)
            except SimplexError as exc:
                assert "unbounded" in str(exc)
                assert ref.status == 3  # scipy: unbounded
                continue
            assert ref.success
            assert res.objective == pytest.approx(ref.fun, abs=1e-7)

    def test_infeasible(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0])
        with pytest.raises(SimplexError, match="infeasible"):
            solve(np.zeros(2), A, b)

    def test_unbounded(self):
        with pytest.raises(SimplexError, match="unbounded"):
            solve(np.array([-1.0, 0.0]), np.array([[0.0, 1.0]]),
                  np.array([1.0]))

    def test_negative_rhs_rejected(self):
        with pytest.raises(SimplexError):
            solve(np.zeros(1), np.array([[1.0]]), np.array([-1.0]))

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(4, 8))
        x0 = rng.random(8)
        b = A @ x0
        flip = b < 0
        A[flip] *= -1
        b[flip] *= -1
        c = rng.random(8)  # non-negative cost keeps the LP bounded
        first = solve(c, A, b)
        second = solve(c, A, b)
        np.testing.assert_array_equal(first.x, second.x)
        assert first.iterations == second.iterations


class TestL1Fit:
    def test_exact_fit(self):
        rng = np.random.default_rng(2)
        A = rng.random((10, 3))
        p_true = np.array([0.2, 0.5, 0.3])
        b = A @ p_true
        p, resid, obj, _ = l1_fit(A, b, extra_eq=(np.ones((1, 3)), [1.0]))
        assert obj == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(p, p_true, atol=1e-7)

    def test_bland_matches_highs(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            A = rng.random((12, 4))
            b = rng.random(12)
            eq = (np.ones((1, 4)), [1.0])
            _, _, obj_b, _ = l1_fit(A, b, extra_eq=eq, solver="bland")
            _, _, obj_h, _ = l1_fit(A, b, extra_eq=eq, solver="highs")
            assert obj_b == pytest.approx(obj_h, abs=1e-7)

    def test_handles_negative_rhs(self):
        A = np.array([[1.0], [1.0]])
        b = np.array([-2.0, 2.0])
        p, resid, obj, _ = l1_fit(A, b)
        # best single p >= 0 under L1: any p in [0, 2] gives total 4
        assert obj == pytest.approx(4.0, abs=1e-9)

    def test_residual_consistency(self):
        rng = np.random.default_rng(4)
        A = rng.random((8, 3))
        b = rng.random(8)
        p, resid, obj, _ = l1_fit(A, b, extra_eq=(np.ones((1, 3)), [1.0]))
        np.testing.assert_allclose(resid, np.abs(A @ p - b), atol=1e-12)
        assert obj == pytest.approx(resid.sum(), abs=1e-12)
