from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np

from steamnet.errors import ThermoRangeError
from steamnet.thermo import (
    P_MAX,
    P_MIN,
    DEFAULT_BOILER,
    BoilerParams,
    anchor_checks,
    default_curve,
    e_coeff,
    e_terms,
    export_table_csv,
    hc_rho_s,
    sat_props,
)


class SaturationCurveTests(unittest.TestCase):
    def test_anchors_at_800_kpa(self) -> None:
        sp = sat_props(800e3)
        self.assertAlmostEqual(sp.rho_s / 4.16, 1.0, delta=0.01)
        self.assertAlmostEqual(sp.h_s / 2768e3, 1.0, delta=0.01)
        self.assertAlmostEqual(sp.h_w / 721e3, 1.0, delta=0.01)
        self.assertAlmostEqual(sp.T_s / 443.0, 1.0, delta=0.005)

    def test_interpolant_passes_through_table_knots(self) -> None:
        sp = sat_props(800e3)
        self.assertAlmostEqual(sp.T_s, 170.41 + 273.15, places=6)
        self.assertAlmostEqual(sp.h_w, 720.87e3, places=3)

    def test_properties_rise_with_pressure(self) -> None:
        values = default_curve().evaluate(np.linspace(P_MIN, P_MAX, 200))
        for name in ("T_s", "rho_s", "h_w"):
            self.assertTrue(np.all(values[f"d_{name}_dp"] > 0), name)
        self.assertTrue(np.all(np.diff(values["rho_s"]) > 0))

    def test_pressure_below_range_names_bound_and_vertex(self) -> None:
        with self.assertRaises(ThermoRangeError) as ctx:
            default_curve().evaluate([0.5e6, 0.02e6], names=["1", "2"])
        self.assertEqual(ctx.exception.bound, "p_min")
        self.assertEqual(ctx.exception.vertex, "2")

    def test_pressure_above_range(self) -> None:
        with self.assertRaises(ThermoRangeError) as ctx:
            sat_props(2.5e6)
        self.assertEqual(ctx.exception.bound, "p_max")
        self.assertIn("p_max", str(ctx.exception))

    def test_boiling_point_at_one_atmosphere(self) -> None:
        self.assertAlmostEqual(sat_props(101.325e3).T_s, 373.1, delta=0.1)

    def test_derivatives_match_central_differences(self) -> None:
        curve = default_curve()
        h = 100.0
        knots = curve.knots[1:-1]
        sweep = np.concatenate([np.geomspace(P_MIN + 2 * h, P_MAX - 2 * h, 400), knots, knots + 0.5 * h])
        for p in sweep:
            here, up, down = sat_props(p), sat_props(p + h), sat_props(p - h)
            for name in ("T_s", "rho_s", "h_s", "h_w"):
                fd = (getattr(up, name) - getattr(down, name)) / (2 * h)
                exact = getattr(here, f"d_{name}_dp")
                self.assertLessEqual(abs(fd - exact), 1e-4 * abs(exact), (name, p, fd, exact))

    def test_transport_coefficient(self) -> None:
        expected = (2767.5e3 - 720.87e3) / 0.24035
        self.assertAlmostEqual(hc_rho_s(800e3) / expected, 1.0, delta=1e-3)


class BoilerCoefficientTests(unittest.TestCase):
    def test_e_coeff_near_reference_value(self) -> None:
        self.assertAlmostEqual(e_coeff(800e3, DEFAULT_BOILER) / 3073.0, 1.0, delta=0.04)

    def test_e_terms_sum_to_e(self) -> None:
        terms = e_terms(800e3, DEFAULT_BOILER)
        self.assertEqual(set(terms), {"latent", "steam_enthalpy", "water_enthalpy", "metal", "volume"})
        self.assertAlmostEqual(sum(terms.values()), e_coeff(800e3, DEFAULT_BOILER), places=6)
        self.assertEqual(terms["volume"], -20.0)

    def test_e_terms_match_finite_differences_at_400_kpa(self) -> None:
        p, h, b = 400e3, 1e3, DEFAULT_BOILER
        sp, up, down = sat_props(p), sat_props(p + h), sat_props(p - h)

        def slope(name: str) -> float:
            return (getattr(up, name) - getattr(down, name)) / (2 * h)

        expected = {
            "latent": sp.h_c * b.V_s * slope("rho_s"),
            "steam_enthalpy": sp.rho_s * b.V_s * slope("h_s"),
            "water_enthalpy": sp.rho_w * b.V_w * slope("h_w"),
            "metal": b.m_t * b.C_p * slope("T_s"),
            "volume": -(b.V_s + b.V_w),
        }
        terms = e_terms(p, b)
        for name, value in expected.items():
            self.assertAlmostEqual(terms[name] / value, 1.0, delta=1e-3, msg=name)
        self.assertAlmostEqual(e_coeff(p, b) / sum(expected.values()), 1.0, delta=1e-3)

    def test_term_signs_at_800_kpa(self) -> None:
        terms = e_terms(800e3, DEFAULT_BOILER)
        e = sum(terms.values())
        self.assertGreater(terms["metal"], 0.0)
        self.assertGreater(terms["latent"], 0.0)
        self.assertLess(terms["volume"], 0.0)
        self.assertLess(abs(terms["volume"]), 0.05 * e)

    def test_empty_boiler_has_no_capacity(self) -> None:
        with self.assertLogs("steamnet.thermo", level="WARNING"):
            e = e_coeff(800e3, BoilerParams(V_s=0.0, V_w=0.0, m_t=0.0, C_p=400.0))
        self.assertEqual(e, 0.0)

    def test_e_positive_over_working_range(self) -> None:
        for p in (0.1e6, 0.5e6, 0.8e6, 1.5e6):
            self.assertGreater(e_coeff(p, DEFAULT_BOILER), 0.0)

    def test_anchor_checks_pass(self) -> None:
        rows = anchor_checks()
        self.assertEqual([r["quantity"] for r in rows], ["rho_s", "h_s", "h_w", "T_s", "e"])
        self.assertTrue(all(r["passed"] for r in rows), rows)


class TableExportTests(unittest.TestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_export_writes_header_and_rows(self) -> None:
        path = export_table_csv(Path(self.tmp.name) / "table.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "p_Pa,T_s_K,rho_s,rho_w,h_s,h_w")
        self.assertEqual(len(lines) - 1, default_curve().knots.size)


if __name__ == "__main__":
    unittest.main()
