from __future__ import annotations

import random
import unittest

import numpy as np
from scipy.linalg import null_space

from steamnet.errors import EquilibriumError
from steamnet.inner_limit import (
    FLOW_TOL,
    PRESSURE_TOL,
    build_inner,
    check_heat_balance,
    detrend,
    equilibrium_state,
    initial_inner_state,
    rhs_inner,
    solve_equilibrium,
    to_full_state,
)
from steamnet.lumped_model import SystemParams, SystemState
from steamnet.network import Link, Network, Vertex, random_connected_network, two_site_network
from steamnet.schedules import constant


def params_for(net: Network, inputs=None, load: float = 5e6) -> SystemParams:
    inputs = inputs if inputs is not None else [load] * net.n
    return SystemParams(
        network=net,
        heat_inputs=[constant(q) for q in inputs],
        loads=[constant(load) for _ in range(net.n)],
    )


def triangle() -> Network:
    return Network(
        (Vertex("a"), Vertex("b"), Vertex("c")),
        (Link("ab", "a", "b"), Link("bc", "b", "c"), Link("ca", "c", "a")),
    )


class InnerSystemTests(unittest.TestCase):
    def setUp(self) -> None:
        self.params = params_for(two_site_network(), [6e6, 4e6])
        self.sys = build_inner(self.params, 1.0)

    def test_coefficients_from_vertex_properties(self) -> None:
        props = self.params.vertex_properties(np.array([1.0, 1.0]))
        np.testing.assert_allclose(self.sys.G_diag, props["e"] / props["hc_rho"])
        self.assertTrue(0.15 < self.sys.G_diag[0] < 0.19)
        np.testing.assert_allclose(self.sys.H_diag, 4.0 * props["rho_s"][0] / np.pi)
        self.assertGreater(self.sys.f_coeffs[0], 0.0)

    def test_source_is_balanced_and_opposite(self) -> None:
        self.assertAlmostEqual(self.sys.s[0], -self.sys.s[1], places=15)
        self.assertGreater(self.sys.s[0], 0.0)
        expected = 1e6 / self.params.refs.Q_r / self.sys.hc_rho0[0]
        self.assertAlmostEqual(self.sys.s[0], expected, places=12)

    def test_rest_state_derivatives(self) -> None:
        dpsi, dq = rhs_inner(np.zeros(2), np.zeros(1), self.sys)
        np.testing.assert_allclose(dpsi, self.sys.s / self.sys.G_diag)
        np.testing.assert_array_equal(dq, [0.0])

    def test_gauge_invariance(self) -> None:
        psi = np.array([0.3, -0.1])
        q = np.array([0.05])
        dpsi, dq = rhs_inner(psi, q, self.sys)
        dpsi_shift, dq_shift = rhs_inner(psi + 2.5, q, self.sys)
        np.testing.assert_allclose(dpsi_shift, dpsi, atol=1e-14)
        np.testing.assert_allclose(dq_shift, dq, atol=1e-14)

    def test_aggregate_heat_identity(self) -> None:
        rng = np.random.default_rng(5)
        sys = build_inner(params_for(random_connected_network(random.Random(5), 6, chords=3), [7e6, 4e6, 5e6, 5e6, 6e6, 5e6]), 1.0)
        psi, q = rng.normal(size=sys.n), rng.normal(size=sys.m) * 0.1
        dpsi, _ = rhs_inner(psi, q, sys)
        self.assertAlmostEqual(float(sys.G_diag @ dpsi), float(np.sum(sys.s)), places=12)

    def test_state_conversion_round_trip(self) -> None:
        state = SystemState(p=[1.001, 0.999], u=[0.12])
        psi, q = initial_inner_state(state, self.sys)
        back = to_full_state(psi, q, self.sys)
        np.testing.assert_allclose(back.p, state.p, rtol=1e-14)
        np.testing.assert_allclose(back.u, state.u, rtol=1e-14)


class HeatBalanceTests(unittest.TestCase):
    def test_balanced_inputs(self) -> None:
        sys = build_inner(params_for(two_site_network(), [6e6, 4e6]), 1.0)
        balance = check_heat_balance(sys)
        self.assertTrue(balance.balanced)
        self.assertEqual(balance.drift_rate, 0.0)

    def test_surplus_drifts_upward(self) -> None:
        sys = build_inner(params_for(two_site_network(), [7e6, 4e6]), 1.0)
        balance = check_heat_balance(sys)
        self.assertFalse(balance.balanced)
        self.assertGreater(balance.drift_rate, 0.0)
        self.assertAlmostEqual(balance.drift_rate, float(np.sum(sys.s) / np.sum(sys.G_diag)), places=14)
        with self.assertRaises(EquilibriumError) as ctx:
            solve_equilibrium(sys)
        self.assertIn("balanced", str(ctx.exception))

    def test_detrend_removes_uniform_drift(self) -> None:
        t = np.array([0.0, 1.0, 2.0])
        psi = np.array([[0.0, 1.0], [0.5, 1.5], [1.0, 2.0]])
        np.testing.assert_allclose(detrend(psi, t, 0.5), [[0.0, 1.0]] * 3)


class EquilibriumTests(unittest.TestCase):
    def test_two_site_closed_form(self) -> None:
        sys = build_inner(params_for(two_site_network()), 1.0)
        for sigma in (0.02, 0.0979, 0.3):
            eq = solve_equilibrium(sys.with_source([sigma, -sigma]))
            self.assertAlmostEqual(eq.q_star[0], sigma, places=12)
            self.assertAlmostEqual(eq.psi_0[0] - eq.psi_0[1], float(sys.f([sigma])[0]), places=12)
            self.assertAlmostEqual(float(np.mean(eq.psi_0)), 0.0, places=14)
            self.assertTrue(eq.feasible)
            self.assertTrue(eq.unique)

    def test_zero_source_gives_rest(self) -> None:
        eq = solve_equilibrium(build_inner(params_for(two_site_network()), 1.0))
        np.testing.assert_allclose(eq.q_star, 0.0, atol=1e-15)
        np.testing.assert_allclose(eq.psi_0, 0.0, atol=1e-15)

    def test_equilibrium_is_a_rest_point_for_every_gauge(self) -> None:
        sys = build_inner(params_for(two_site_network(), [6e6, 4e6]), 1.0)
        eq = solve_equilibrium(sys)
        for c in (-1.0, 0.0, 3.0):
            dpsi, dq = rhs_inner(eq.psi(c), eq.q_star, sys)
            np.testing.assert_allclose(dpsi, 0.0, atol=1e-12)
            np.testing.assert_allclose(dq, 0.0, atol=1e-12)
        state = equilibrium_state(sys, eq)
        self.assertAlmostEqual(state.u[0] * sys.area[0], eq.q_star[0], places=14)

    def test_two_site_velocity_near_expected(self) -> None:
        params = params_for(two_site_network(), [6e6, 4e6])
        sys = build_inner(params, 1.0)
        eq = solve_equilibrium(sys)
        u_mps = equilibrium_state(sys, eq).u[0] * params.refs.u_r
        self.assertAlmostEqual(eq.q_star[0], 0.0979, delta=0.002)
        self.assertAlmostEqual(u_mps, 3.75, delta=0.1)

    def test_triangle_matches_grid_search_and_path_split(self) -> None:
        sys = build_inner(params_for(triangle()), 1.0)
        sigma = 0.1
        sys = sys.with_source([sigma, -sigma, 0.0])
        eq = solve_equilibrium(sys)

        direct = sigma * np.sqrt(2.0) / (1.0 + np.sqrt(2.0))
        indirect = sigma - direct
        np.testing.assert_allclose(eq.q_star, [direct, -indirect, -indirect], rtol=1e-8)

        K = null_space(sys.R)
        q_p = eq.q_star - K @ (K.T @ eq.q_star)
        z = np.linspace(-0.3, 0.3, 6001)
        candidates = q_p[:, None] + K @ z[None, :]
        loop_residual = np.abs(K.T @ sys.f(candidates.T).T)[0]
        best = candidates[:, int(np.argmin(loop_residual))]
        np.testing.assert_allclose(eq.q_star, best, atol=1e-3)

    def test_residuals_on_random_looped_networks(self) -> None:
        rng = random.Random(17)
        for _ in range(10):
            net = random_connected_network(rng, rng.randint(3, 7), chords=rng.randint(1, 3))
            sys = build_inner(params_for(net), 1.0)
            s = np.array([rng.uniform(-0.1, 0.1) for _ in range(net.n)])
            eq = solve_equilibrium(sys.with_source(s - s.mean()))
            self.assertLessEqual(eq.flow_residual, FLOW_TOL)
            self.assertLessEqual(eq.pressure_residual, PRESSURE_TOL)
            self.assertTrue(eq.feasible)


if __name__ == "__main__":
    unittest.main()
