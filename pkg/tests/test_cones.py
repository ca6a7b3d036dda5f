import numpy as np
import pytest

from conftest import random_psd
from garchxtest.cones import (
    Cone,
    CompiledCone,
    Fixed,
    Free,
    HalfLine,
    grid_oracle,
    kkt_residual,
    solve_cone_qp,
    solve_cone_qp_batch,
)

ORTHANT3 = Cone((HalfLine(0.0), HalfLine(0.0), Free()))


def random_cone(rng: np.random.Generator, d: int) -> Cone:
    specs = []
    for _ in range(d):
        kind = rng.integers(3)
        if kind == 0:
            specs.append(Fixed(float(rng.normal())))
        elif kind == 1:
            specs.append(HalfLine(float(rng.normal())))
        else:
            specs.append(Free())
    return Cone(tuple(specs))


class TestWorkedExamples:
    def test_identity_metric_projection(self):
        sol = solve_cone_qp(np.eye(3), np.array([-1.0, 2.0, 5.0]), ORTHANT3)
        assert np.allclose(sol.minimizer, [0.0, 2.0, 5.0])
        assert sol.value == pytest.approx(1.0, abs=1e-12)

    def test_coupled_corner(self):
        H = np.array([[2.0, 1.0], [1.0, 2.0]])
        cone = Cone((HalfLine(0.0), HalfLine(0.0)))
        sol = solve_cone_qp(H, np.array([-1.0, -1.0]), cone)
        assert np.allclose(sol.minimizer, [0.0, 0.0])
        assert sol.value == pytest.approx(6.0, abs=1e-12)
        # gradient 2H(lam - Z) = (6, 6) >= 0 at the corner certifies optimality
        assert kkt_residual(H, np.array([-1.0, -1.0]), cone, sol.minimizer) < 1e-12

    def test_pinned_coordinate(self):
        cone = Cone((Free(), Fixed(0.0), Free()))
        sol = solve_cone_qp(np.eye(3), np.array([1.0, 1.0, 1.0]), cone)
        assert np.allclose(sol.minimizer, [1.0, 0.0, 1.0])
        assert sol.value == pytest.approx(1.0, abs=1e-12)


class TestAgainstGridOracle:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_random_instances(self, d):
        rng = np.random.default_rng(10 + d)
        for _ in range(80):
            H = random_psd(rng, d)
            Z = rng.standard_normal(d) * 2.0
            cone = random_cone(rng, d)
            sol = solve_cone_qp(H, Z, cone)
            assert kkt_residual(H, Z, cone, sol.minimizer) < 1e-8
            oracle = grid_oracle(H, Z, cone, half_width=4.0, steps=13)
            # the oracle evaluates a feasible lattice, so it can only do worse
            assert sol.value <= oracle.value + 1e-6

    def test_oracle_free_cone_returns_center(self):
        rng = np.random.default_rng(0)
        H = random_psd(rng, 3)
        Z = np.array([0.5, -1.0, 2.0])
        cone = Cone((Free(), Free(), Free()))
        oracle = grid_oracle(H, Z, cone, half_width=2.0, steps=11)
        assert np.allclose(oracle.minimizer, Z, atol=1e-9)

    def test_oracle_corner(self):
        cone = Cone((HalfLine(0.0), HalfLine(0.0)))
        oracle = grid_oracle(np.eye(2), np.array([-3.0, -3.0]), cone, 4.0, 15)
        assert np.allclose(oracle.minimizer, [0.0, 0.0])

    def test_oracle_rejects_few_steps(self):
        with pytest.raises(ValueError):
            grid_oracle(np.eye(2), np.zeros(2), Cone((Free(), Free())), 1.0, 5)


class TestInvariants:
    def test_cone_monotonicity(self):
        rng = np.random.default_rng(9)
        for _ in range(60):
            d = int(rng.integers(2, 5))
            H = random_psd(rng, d)
            Z = rng.standard_normal(d) * 2.0
            cone = random_cone(rng, d)
            val = solve_cone_qp(H, Z, cone).value
            for i in range(d):
                bigger = cone.enlarge(i)
                assert solve_cone_qp(H, Z, bigger).value <= val + 1e-10

    def test_metric_scaling(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            H = random_psd(rng, 3)
            Z = rng.standard_normal(3) * 2.0
            cone = random_cone(rng, 3)
            base = solve_cone_qp(H, Z, cone)
            scaled = solve_cone_qp(7.5 * H, Z, cone)
            assert np.allclose(scaled.minimizer, base.minimizer, atol=1e-9)
            assert scaled.value == pytest.approx(7.5 * base.value, rel=1e-9, abs=1e-12)

    def test_value_equals_objective_at_minimizer(self):
        rng = np.random.default_rng(33)
        for _ in range(40):
            d = int(rng.integers(2, 5))
            H = random_psd(rng, d)
            Z = rng.standard_normal(d) * 2.0
            cone = random_cone(rng, d)
            sol = solve_cone_qp(H, Z, cone)
            diff = sol.minimizer - Z
            assert sol.value == pytest.approx(float(diff @ H @ diff), rel=1e-9, abs=1e-10)

    def test_tie_break_prefers_fewest_active(self):
        # Z on the boundary: the interior pattern ties with the pinned one
        sol = solve_cone_qp(np.eye(2), np.array([0.0, 1.0]), Cone((HalfLine(0.0), Free())))
        assert sol.active_set == (False, False)


class TestBatchSolver:
    def test_matches_scalar_solver(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            d = int(rng.integers(2, 5))
            H = random_psd(rng, d)
            cone = random_cone(rng, d)
            Z = rng.standard_normal((50, d)) * 2.0
            lams, vals = solve_cone_qp_batch(H, Z, cone)
            for m in range(Z.shape[0]):
                ref = solve_cone_qp(H, Z[m], cone)
                assert vals[m] == pytest.approx(ref.value, rel=1e-9, abs=1e-12)
                assert np.allclose(lams[m], ref.minimizer, atol=1e-8)

    def test_values_only_path(self):
        rng = np.random.default_rng(15)
        H = random_psd(rng, 3)
        cone = ORTHANT3
        Z = rng.standard_normal((200, 3)) * 2.0
        compiled = CompiledCone(H, cone)
        _, vals = compiled.solve(Z)
        assert np.allclose(compiled.solve_values(Z), vals, atol=1e-10)

    def test_degenerate_metric_flagged(self):
        # H singular on a candidate free subspace falls back to a pseudo-inverse
        H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
        cone = Cone((HalfLine(0.0), Free(), Free()))
        sol = solve_cone_qp(H, np.array([-1.0, 1.0, 2.0]), cone)
        assert sol.degenerate
        assert np.allclose(sol.minimizer, [0.0, 1.0, 2.0])
        assert sol.value == pytest.approx(1.0, abs=1e-12)
