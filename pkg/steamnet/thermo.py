"""Saturated-steam properties on the saturation line and the boiler coefficient e(p)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from steamnet.content import load_saturation_table
from steamnet.errors import ThermoRangeError

logger = logging.getLogger(__name__)

P_MIN = 0.03e6
P_MAX = 2.0e6

# Order of the interpolated columns; derivatives follow the same order.
_PROPERTIES = ("T_s", "rho_s", "rho_w", "h_s", "h_w")


@dataclass(frozen=True)
class SaturationPoint:
    p: float
    T_s: float
    rho_s: float
    rho_w: float
    h_s: float
    h_w: float
    d_rho_s_dp: float
    d_h_s_dp: float
    d_h_w_dp: float
    d_T_s_dp: float

    @property
    def h_c(self) -> float:
        return self.h_s - self.h_w


@dataclass(frozen=True)
class BoilerParams:
    V_s: float
    V_w: float
    m_t: float
    C_p: float

    def __post_init__(self) -> None:
        for name in ("V_s", "V_w", "m_t", "C_p"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"boiler parameter {name} must be nonnegative, got {value}")


# Default boiler: 10 m3 of steam and water, 50 t of metal at 0.4 kJ/(K kg).
DEFAULT_BOILER = BoilerParams(V_s=10.0, V_w=10.0, m_t=50_000.0, C_p=400.0)


class SaturationCurve:
    """C2 cubic spline through the saturation line, parameterized by ln p.

    Instances are read-only after construction.
    """

    def __init__(self, table: dict | None = None, p_min: float = P_MIN, p_max: float = P_MAX) -> None:
        table = table if table is not None else load_saturation_table()
        p = np.asarray(table["p_kPa"], dtype=float) * 1e3
        if np.any(np.diff(p) <= 0):
            raise ValueError("saturation table pressures must be strictly increasing")
        if p[0] > p_min or p[-1] < p_max:
            raise ValueError(f"saturation table covers [{p[0]:.6g}, {p[-1]:.6g}] Pa, narrower than the validity range")
        columns = np.column_stack(
            [
                np.asarray(table["T_s_C"], dtype=float) + 273.15,
                1.0 / np.asarray(table["v_s_m3kg"], dtype=float),
                1.0 / np.asarray(table["v_w_m3kg"], dtype=float),
                np.asarray(table["h_s_kJkg"], dtype=float) * 1e3,
                np.asarray(table["h_w_kJkg"], dtype=float) * 1e3,
            ]
        )
        self._p_knots = p
        self._values = columns
        self._value_fn = CubicSpline(np.log(p), columns, axis=0, bc_type="not-a-knot", extrapolate=False)
        self._slope_fn = self._value_fn.derivative()
        self.p_min = float(p_min)
        self.p_max = float(p_max)
        self.source = table.get("source", "")

    @property
    def knots(self) -> np.ndarray:
        return self._p_knots.copy()

    def check(self, p, names: list[str] | None = None) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        low = np.flatnonzero(~(arr >= self.p_min))
        high = np.flatnonzero(arr > self.p_max)
        for idx, bound, limit in ((low, "p_min", self.p_min), (high, "p_max", self.p_max)):
            if idx.size:
                i = int(idx[0])
                vertex = names[i] if names is not None and i < len(names) else None
                raise ThermoRangeError(float(arr[i]), bound, limit, vertex=vertex)
        return arr

    def evaluate(self, p, names: list[str] | None = None) -> dict[str, np.ndarray]:
        arr = self.check(p, names)
        x = np.log(arr)
        values = self._value_fn(x)
        slopes = self._slope_fn(x) / arr[:, None]
        out = {name: values[:, i] for i, name in enumerate(_PROPERTIES)}
        out.update({f"d_{name}_dp": slopes[:, i] for i, name in enumerate(_PROPERTIES)})
        out["p"] = arr
        return out

    def props(self, p: float) -> SaturationPoint:
        v = self.evaluate(p)
        return SaturationPoint(
            p=float(p),
            T_s=float(v["T_s"][0]),
            rho_s=float(v["rho_s"][0]),
            rho_w=float(v["rho_w"][0]),
            h_s=float(v["h_s"][0]),
            h_w=float(v["h_w"][0]),
            d_rho_s_dp=float(v["d_rho_s_dp"][0]),
            d_h_s_dp=float(v["d_h_s_dp"][0]),
            d_h_w_dp=float(v["d_h_w_dp"][0]),
            d_T_s_dp=float(v["d_T_s_dp"][0]),
        )

    def table_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "p_Pa": self._p_knots,
                "T_s_K": self._values[:, 0],
                "rho_s": self._values[:, 1],
                "rho_w": self._values[:, 2],
                "h_s": self._values[:, 3],
                "h_w": self._values[:, 4],
            }
        )


@lru_cache(maxsize=1)
def default_curve() -> SaturationCurve:
    return SaturationCurve()


def sat_props(p: float, curve: SaturationCurve | None = None) -> SaturationPoint:
    return (curve or default_curve()).props(p)


def h_c(p: float, curve: SaturationCurve | None = None) -> float:
    return sat_props(p, curve).h_c


def hc_rho_s(p: float, curve: SaturationCurve | None = None) -> float:
    sp = sat_props(p, curve)
    return sp.h_c * sp.rho_s


def boiler_arrays(boilers: list[BoilerParams]) -> dict[str, np.ndarray]:
    return {
        name: np.array([getattr(b, name) for b in boilers], dtype=float)
        for name in ("V_s", "V_w", "m_t", "C_p")
    }


def e_terms_from(props: dict[str, np.ndarray], V_s, V_w, m_t, C_p) -> dict[str, np.ndarray]:
    hc = props["h_s"] - props["h_w"]
    return {
        "latent": hc * V_s * props["d_rho_s_dp"],
        "steam_enthalpy": props["rho_s"] * V_s * props["d_h_s_dp"],
        "water_enthalpy": props["rho_w"] * V_w * props["d_h_w_dp"],
        "metal": m_t * C_p * props["d_T_s_dp"],
        "volume": -(np.asarray(V_s, dtype=float) + np.asarray(V_w, dtype=float)) * np.ones_like(hc),
    }


def e_from(props: dict[str, np.ndarray], V_s, V_w, m_t, C_p) -> np.ndarray:
    terms = e_terms_from(props, V_s, V_w, m_t, C_p)
    return sum(terms.values())


def e_terms(p: float, boiler: BoilerParams, curve: SaturationCurve | None = None) -> dict[str, float]:
    props = (curve or default_curve()).evaluate(p)
    terms = e_terms_from(props, boiler.V_s, boiler.V_w, boiler.m_t, boiler.C_p)
    return {name: float(value[0]) for name, value in terms.items()}


def e_coeff(p: float, boiler: BoilerParams, curve: SaturationCurve | None = None) -> float:
    value = sum(e_terms(p, boiler, curve).values())
    if value <= 0:
        logger.warning("e(p) = %.6g J/Pa at p = %.6g Pa is not positive; the boiler model loses meaning", value, p)
    return value


def export_table_csv(path: Path | str, curve: SaturationCurve | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    (curve or default_curve()).table_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


# Anchors at 800 kPa: (expected, relative tolerance). The e band is wider
# than the others because the printed value sits 3% below what the embedded table gives.
ANCHOR_PRESSURE = 800e3
REFERENCE_ANCHORS = {
    "rho_s": (4.16, 0.01),
    "h_s": (2768e3, 0.01),
    "h_w": (721e3, 0.01),
    "T_s": (443.0, 0.005),
    "e": (3073.0, 0.04),
}


def check_row(quantity: str, value: float, expected: float, tolerance: float) -> dict:
    rel = abs(value - expected) / abs(expected)
    return {
        "quantity": quantity,
        "value": float(value),
        "expected": float(expected),
        "rel_error": float(rel),
        "tolerance": float(tolerance),
        "passed": bool(rel <= tolerance),
    }


def anchor_checks(curve: SaturationCurve | None = None, boiler: BoilerParams = DEFAULT_BOILER) -> list[dict]:
    sp = sat_props(ANCHOR_PRESSURE, curve)
    values = {
        "rho_s": sp.rho_s,
        "h_s": sp.h_s,
        "h_w": sp.h_w,
        "T_s": sp.T_s,
        "e": e_coeff(ANCHOR_PRESSURE, boiler, curve),
    }
    return [check_row(name, values[name], *REFERENCE_ANCHORS[name]) for name in REFERENCE_ANCHORS]
