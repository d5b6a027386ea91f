from __future__ import annotations

import random
import unittest

import numpy as np

from steamnet.inner_limit import build_inner, check_heat_balance, solve_equilibrium
from steamnet.lumped_model import SystemParams, SystemState, fast_residual
from steamnet.network import random_connected_network, two_site_network
from steamnet.schedules import constant
from steamnet.simulate import SolverOptions, bind_params, integrate, make_periodic_scenario
from steamnet.spectral import (
    fast_coordinates,
    linearize,
    manifold_distance,
    nhim_certificate,
    relax_to_manifold,
    trace_manifold,
)


def two_site_params(q1: float, q2: float, load: float = 5e6) -> SystemParams:
    return SystemParams(
        network=two_site_network(),
        heat_inputs=[constant(q1), constant(q2)],
        loads=[constant(load), constant(load)],
    )


class LinearizationTests(unittest.TestCase):
    def setUp(self) -> None:
        self.sys = build_inner(two_site_params(6e6, 4e6), 1.0)
        self.eq = solve_equilibrium(self.sys)
        self.A = linearize(self.sys, self.eq)

    def test_block_structure(self) -> None:
        g, h = self.sys.G_diag, self.sys.H_diag
        self.assertEqual(self.A.shape, (3, 3))
        np.testing.assert_array_equal(self.A[:2, :2], np.zeros((2, 2)))
        self.assertAlmostEqual(self.A[0, 2], -1.0 / g[0])
        self.assertAlmostEqual(self.A[1, 2], 1.0 / g[1])
        self.assertAlmostEqual(self.A[2, 0], 1.0 / h[0])
        self.assertAlmostEqual(self.A[2, 1], -1.0 / h[0])
        self.assertLess(self.A[2, 2], 0.0)

    def test_uniform_pressure_shift_is_in_the_kernel(self) -> None:
        np.testing.assert_array_equal(self.A @ np.array([1.0, 1.0, 0.0]), np.zeros(3))

    def test_kernel_on_random_networks(self) -> None:
        rng = random.Random(29)
        for _ in range(20):
            net = random_connected_network(rng, rng.randint(2, 7), chords=rng.randint(0, 3))
            params = SystemParams(net, [constant(5e6)] * net.n, [constant(5e6)] * net.n)
            sys = build_inner(params, 1.0)
            s = np.array([rng.uniform(-0.1, 0.1) for _ in range(net.n)])
            sys = sys.with_source(s - s.mean())
            A = linearize(sys, solve_equilibrium(sys))
            direction = np.concatenate([np.ones(net.n), np.zeros(net.m)])
            self.assertLessEqual(float(np.max(np.abs(A @ direction))), 1e-12)


class CertificateTests(unittest.TestCase):
    def setUp(self) -> None:
        self.sys = build_inner(two_site_params(6e6, 4e6), 1.0)
        self.eq = solve_equilibrium(self.sys)
        self.A = linearize(self.sys, self.eq)

    def test_two_site_is_certified(self) -> None:
        report = nhim_certificate(self.A, self.eq)
        self.assertTrue(report.certified, report.reasons)
        self.assertEqual(report.zero_count, 1)
        self.assertLess(report.center_angle, 1e-6)
        self.assertTrue(report.zero_semisimple)
        self.assertTrue(report.transverse_stable)
        nonzero = report.eigenvalues[np.abs(report.eigenvalues) >= 1e-8]
        self.assertEqual(nonzero.size, 2)
        self.assertTrue(np.all(nonzero.real < 0))
        self.assertAlmostEqual(float(nonzero[0].real), -1.0, delta=0.1)
        self.assertAlmostEqual(abs(float(nonzero[0].imag)), 2.9, delta=0.3)

    def test_eigenvalues_come_in_conjugate_pairs(self) -> None:
        eigenvalues = nhim_certificate(self.A, self.eq).eigenvalues
        for z in eigenvalues:
            self.assertLess(float(np.min(np.abs(eigenvalues - np.conj(z)))), 1e-10)

    def test_zero_count_is_robust_to_tolerance(self) -> None:
        for tol in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
            report = nhim_certificate(self.A, self.eq, tol_zero=tol)
            self.assertEqual(report.zero_count, 1)
            self.assertTrue(report.certified)

    def test_zero_flow_is_not_certified(self) -> None:
        sys = build_inner(two_site_params(5e6, 5e6), 1.0)
        eq = solve_equilibrium(sys)
        report = nhim_certificate(linearize(sys, eq), eq)
        self.assertFalse(report.Df_nonsingular)
        self.assertFalse(report.certified)
        self.assertTrue(any("Df" in reason for reason in report.reasons))

    def test_report_serializes(self) -> None:
        data = nhim_certificate(self.A, self.eq).to_dict()
        self.assertTrue(data["certified"])
        self.assertEqual(len(data["eigenvalues"]), 3)
        self.assertEqual(data["reasons"], [])


class ManifoldTests(unittest.TestCase):
    def test_rest_state_is_already_relaxed(self) -> None:
        params = two_site_params(5e6, 5e6)
        result = relax_to_manifold(params, SystemState(p=[1.0, 1.0], u=[0.0]))
        self.assertTrue(result.converged)
        self.assertEqual(result.elapsed, 0.0)
        self.assertEqual(result.drift_rate, 0.0)

    def test_balanced_trace_matches_inner_equilibrium(self) -> None:
        params = two_site_params(6e6, 4e6)
        trace = trace_manifold(params, (0.9975, 1.0025), 3)
        self.assertTrue(all(trace.converged))
        np.testing.assert_allclose(trace.mean_pressure, [0.9975, 1.0, 1.0025], atol=1e-12)

        coords = trace.fast_coordinates()
        np.testing.assert_allclose(coords, np.repeat(coords[1:2], 3, axis=0), rtol=0.01)
        for sample in trace.samples:
            self.assertLess(max(fast_residual(sample, 0.0, params)), 1e-8)
            sys = build_inner(params, sample.mean_pressure)
            u_inner = solve_equilibrium(sys).q_star / sys.area
            np.testing.assert_allclose(sample.u, u_inner, rtol=0.02)

    def test_unbalanced_trace_reports_the_common_drift(self) -> None:
        params = two_site_params(7e6, 4e6)
        result = relax_to_manifold(params, SystemState(p=[1.0, 1.0], u=[0.0]), t_s=0.0)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.state.mean_pressure, 1.0, places=10)
        sys = build_inner(params, 1.0)
        expected = params.epsilon * check_heat_balance(sys).drift_rate
        self.assertAlmostEqual(result.drift_rate / expected, 1.0, delta=0.02)

    def test_distance_is_zero_on_the_trace(self) -> None:
        params = two_site_params(6e6, 4e6)
        trace = trace_manifold(params, (0.999, 1.001), 2)
        self.assertLess(manifold_distance(trace, trace.samples[0]), 1e-12)
        off = SystemState(p=trace.samples[0].p, u=trace.samples[0].u * 1.5)
        self.assertGreater(manifold_distance(trace, off), 0.1)
        np.testing.assert_allclose(
            fast_coordinates(trace.samples[0], params.R, params.epsilon),
            trace.fast_coordinates()[0],
        )

    def test_rest_trace_distance_is_absolute(self) -> None:
        params = two_site_params(5e6, 5e6)
        trace = trace_manifold(params, (0.999, 1.001), 2)
        self.assertTrue(np.all(trace.fast_coordinates() == 0.0))
        self.assertEqual(manifold_distance(trace, trace.samples[0]), 0.0)
        moved = SystemState(p=[1.0, 1.0], u=[1e-3])
        self.assertAlmostEqual(manifold_distance(trace, moved), 1e-3, places=12)

    def test_periodic_trajectory_follows_the_manifold_of_each_phase(self) -> None:
        period = 600.0
        scenario = make_periodic_scenario(period=period, t_end=2 * period)
        params = bind_params(two_site_params(7e6, 4e6), scenario)
        refs = params.refs
        ts = integrate("full", scenario, params, SolverOptions(sample_dt=1.0))
        pbar = ts.p.mean(axis=1)

        def pbar_at(t_s: float) -> float:
            return float(pbar[np.argmin(np.abs(ts.t - t_s))])

        self.assertAlmostEqual((pbar_at(300.0) - pbar_at(0.0)) / 300.0, 158.0, delta=10.0)
        self.assertAlmostEqual((pbar_at(300.0) - pbar_at(600.0)) / 300.0, 158.0, delta=10.0)

        p_range = (0.995, float(pbar.max()) / refs.p_r + 0.005)
        traces = {t_s: trace_manifold(params, p_range, 20, t_s=t_s) for t_s in (150.0, 450.0)}
        for trace in traces.values():
            self.assertTrue(all(trace.converged))

        states = [SystemState.from_dimensional(p, u, refs) for p, u in zip(ts.p, ts.u)]
        for start in (0.0, 300.0, 600.0, 900.0):
            trace = traces[150.0 if start % period == 0.0 else 450.0]
            phase = (ts.t >= start - 1e-6) & (ts.t < start + 300.0 - 1e-6)
            distances = np.array([manifold_distance(trace, s) for s, inside in zip(states, phase) if inside])
            times = ts.t[phase] - start
            self.assertGreater(distances[0], 0.02, start)
            self.assertTrue(np.any(distances[times <= 150.0] < 0.02), start)
            self.assertTrue(np.all(distances[times >= 200.0] < 0.02), (start, distances[times >= 200.0].max()))


if __name__ == "__main__":
    unittest.main()
