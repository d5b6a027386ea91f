"""Dimensionless lumped-parameter slow-fast model of a steam network and its scaling."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from steamnet.errors import ThermoRangeError
from steamnet.network import Network, incidence_matrix, require_valid
from steamnet.schedules import Schedule
from steamnet.thermo import (
    DEFAULT_BOILER,
    BoilerParams,
    SaturationCurve,
    boiler_arrays,
    check_row,
    default_curve,
    e_coeff,
    e_from,
    sat_props,
)

VALIDITY_MULTIPLE = 10.0


@dataclass(frozen=True)
class ReferenceQuantities:
    L_r: float
    u_r: float
    p_r: float
    rho_r: float
    d_r: float

    def __post_init__(self) -> None:
        for name in ("L_r", "u_r", "p_r", "rho_r", "d_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"reference quantity {name} must be positive, got {value}")

    @property
    def x_r(self) -> float:
        return self.L_r

    @property
    def t_r(self) -> float:
        return self.L_r / self.u_r

    @property
    def h_r(self) -> float:
        return self.p_r / self.rho_r

    @property
    def lambda_r(self) -> float:
        return self.d_r / self.L_r

    @property
    def m_r(self) -> float:
        return self.rho_r * self.d_r**2 * self.u_r

    @property
    def Q_r(self) -> float:
        return self.h_r * self.rho_r * self.d_r**2 * self.u_r

    @property
    def eps2(self) -> float:
        return self.rho_r * self.u_r**2 / self.p_r

    @property
    def e_r(self) -> float:
        # Reset so that the boiler and pipe small parameters coincide.
        return self.d_r**2 * self.L_r / self.eps2


# Base reference values for the 800 kPa network.
DEFAULT_REFERENCES = ReferenceQuantities(L_r=200.0, u_r=30.0, p_r=800e3, rho_r=4.16, d_r=0.2)


class Epsilons(NamedTuple):
    eps1: float
    eps2: float
    eps3: float
    eps: float


def compute_epsilons(refs: ReferenceQuantities, e_r_raw: float, Q_w_r: float = 0.0) -> Epsilons:
    eps1 = refs.d_r**2 * refs.L_r / e_r_raw
    eps2 = refs.eps2
    eps3 = refs.d_r**2 * refs.L_r * Q_w_r / refs.Q_r
    return Epsilons(eps1=eps1, eps2=eps2, eps3=eps3, eps=eps2)


_SCALES = {
    "length": lambda r: r.L_r,
    "x": lambda r: r.x_r,
    "time": lambda r: r.t_r,
    "velocity": lambda r: r.u_r,
    "pressure": lambda r: r.p_r,
    "density": lambda r: r.rho_r,
    "enthalpy": lambda r: r.h_r,
    "diameter": lambda r: r.d_r,
    "friction": lambda r: r.lambda_r,
    "mass_flow": lambda r: r.m_r,
    "heat_rate": lambda r: r.Q_r,
    "energy_coefficient": lambda r: r.e_r,
}


def reference_scale(quantity: str, refs: ReferenceQuantities) -> float:
    try:
        return _SCALES[quantity](refs)
    except KeyError:
        raise ValueError(f"unknown quantity class '{quantity}'; known: {', '.join(sorted(_SCALES))}") from None


def _apply(value, factor: float):
    if np.ndim(value):
        return np.asarray(value, dtype=float) * factor
    return float(value) * factor


def nondimensionalize(value, quantity, refs: ReferenceQuantities | None = None):
    """z = z*/z_r. Accepts (value, quantity, refs) or ({quantity: value}, refs)."""
    if isinstance(value, Mapping):
        return {name: _apply(v, 1.0 / reference_scale(name, quantity)) for name, v in value.items()}
    return _apply(value, 1.0 / reference_scale(quantity, refs))


def dimensionalize(value, quantity, refs: ReferenceQuantities | None = None):
    if isinstance(value, Mapping):
        return {name: _apply(v, reference_scale(name, quantity)) for name, v in value.items()}
    return _apply(value, reference_scale(quantity, refs))


@dataclass
class SystemState:
    p: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).copy()
        self.u = np.asarray(self.u, dtype=float).copy()

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.u])

    @classmethod
    def from_vector(cls, y, n: int) -> "SystemState":
        y = np.asarray(y, dtype=float)
        return cls(p=y[:n], u=y[n:])

    @classmethod
    def from_dimensional(cls, p_Pa, u_mps, refs: ReferenceQuantities) -> "SystemState":
        return cls(p=np.asarray(p_Pa, dtype=float) / refs.p_r, u=np.asarray(u_mps, dtype=float) / refs.u_r)

    def to_dimensional(self, refs: ReferenceQuantities) -> tuple[np.ndarray, np.ndarray]:
        return self.p * refs.p_r, self.u * refs.u_r

    @property
    def mean_pressure(self) -> float:
        return float(np.mean(self.p))


@dataclass(eq=False)
class SystemParams:
    network: Network
    heat_inputs: list[Schedule]
    loads: list[Schedule]
    refs: ReferenceQuantities = DEFAULT_REFERENCES
    curve: SaturationCurve = field(default_factory=default_curve)
    epsilon: float | None = None

    R: np.ndarray = field(init=False, repr=False)
    tails: np.ndarray = field(init=False, repr=False)
    heads: np.ndarray = field(init=False, repr=False)
    L: np.ndarray = field(init=False, repr=False)
    d: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)
    area: np.ndarray = field(init=False, repr=False)
    boilers: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        require_valid(self.network)
        n = self.network.n
        if len(self.heat_inputs) != n or len(self.loads) != n:
            raise ValueError(
                f"need one heat-input and one load schedule per vertex ({n}), "
                f"got {len(self.heat_inputs)} and {len(self.loads)}"
            )
        if self.epsilon is None:
            self.epsilon = self.refs.eps2
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        pipes = self.network.pipe_arrays()
        self.R = incidence_matrix(self.network)
        self.tails = self.network.tails()
        self.heads = self.network.heads()
        self.L = pipes["L"] / self.refs.L_r
        self.d = pipes["d"] / self.refs.d_r
        self.lam = pipes["lam"] / self.refs.lambda_r
        self.area = math.pi * self.d**2 / 4.0
        self.boilers = boiler_arrays([v.boiler for v in self.network.vertices])

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def m(self) -> int:
        return self.network.m

    def inputs_at(self, t_s: float) -> tuple[np.ndarray, np.ndarray]:
        Q = np.array([s.value(t_s) for s in self.heat_inputs], dtype=float)
        QL = np.array([s.value(t_s) for s in self.loads], dtype=float)
        return Q, QL

    def source_at(self, t_s: float) -> np.ndarray:
        """Dimensionless Q' - Q'_L per vertex."""
        Q, QL = self.inputs_at(t_s)
        return (Q - QL) / self.refs.Q_r

    def vertex_properties(self, p: np.ndarray) -> dict[str, np.ndarray]:
        """Dimensionless e_v, h_c rho_s, rho_s at dimensionless vertex pressures."""
        props = self.curve.evaluate(np.asarray(p, dtype=float) * self.refs.p_r, self.network.vertex_names)
        b = self.boilers
        e = e_from(props, b["V_s"], b["V_w"], b["m_t"], b["C_p"])
        return {
            "e": e / self.refs.e_r,
            "hc_rho": (props["h_s"] - props["h_w"]) * props["rho_s"] / self.refs.p_r,
            "rho_s": props["rho_s"] / self.refs.rho_r,
            "h_c": (props["h_s"] - props["h_w"]) / self.refs.h_r,
        }


def transport_heat(p: np.ndarray, u: np.ndarray, params: SystemParams, hc_rho: np.ndarray | None = None) -> np.ndarray:
    """Per-vertex transport terms of the pressure equation: -h_c rho_s (R (a u))."""
    if hc_rho is None:
        hc_rho = params.vertex_properties(p)["hc_rho"]
    return -hc_rho * (params.R @ (params.area * u))


def rhs_vector(t: float, y: np.ndarray, params: SystemParams, source: np.ndarray | None = None) -> np.ndarray:
    """Right-hand side on the flat vector [p; u]; `source` freezes Q' - Q'_L (dimensionless)."""
    n = params.n
    p, u = y[:n], y[n:]
    try:
        props = params.vertex_properties(p)
    except ThermoRangeError as exc:
        raise exc.at(time_s=t * params.refs.t_r) from None
    if source is None:
        source = params.source_at(t * params.refs.t_r)
    eps = params.epsilon
    dp = eps / props["e"] * (source + transport_heat(p, u, params, props["hc_rho"]))
    rho_t, rho_h = props["rho_s"][params.tails], props["rho_s"][params.heads]
    drive = 2.0 * (p[params.tails] - p[params.heads]) / (params.L * (rho_t + rho_h))
    du = drive / eps - params.lam / (2.0 * params.d) * u * np.abs(u)
    return np.concatenate([dp, du])


def rhs_full(state: SystemState, t: float, params: SystemParams) -> SystemState:
    dy = rhs_vector(t, state.to_vector(), params)
    return SystemState.from_vector(dy, params.n)


def friction_term(state: SystemState, params: SystemParams) -> np.ndarray:
    return -params.lam / (2.0 * params.d) * state.u * np.abs(state.u)


def fast_residual(state: SystemState, t: float, params: SystemParams, source: np.ndarray | None = None) -> tuple[float, float]:
    """(max |du/dt|, max |R^T dp/dt| / eps): the fast part of the vector field."""
    dy = rhs_vector(t, state.to_vector(), params, source)
    dp, du = dy[: params.n], dy[params.n :]
    du_norm = float(np.max(np.abs(du))) if du.size else 0.0
    dpd = params.R.T @ dp
    dpd_norm = float(np.max(np.abs(dpd))) / params.epsilon if dpd.size else 0.0
    return du_norm, dpd_norm


def validity_ratio(state: SystemState, params: SystemParams) -> float:
    if params.m == 0:
        return 0.0
    return float(np.max(np.abs(params.R.T @ state.p))) / params.epsilon


def heat_outputs(state: SystemState, params: SystemParams, loads_W: np.ndarray) -> np.ndarray:
    """Q'_o,v = m'_s,v h_c(p_v) in W, from the site balance with the vertex closure."""
    transport = transport_heat(state.p, state.u, params) * params.refs.Q_r
    return np.asarray(loads_W, dtype=float) - transport


# Scaled anchor values: (expected, relative tolerance).
SCALED_ANCHORS = {
    "h_s": (14.3, 0.02),
    "h_w": (3.74, 0.02),
    "e": (1.8, 0.04),
    "lam": (16.0, 0.02),
    "Q_L": (5.2, 0.02),
}


def scaled_anchor_checks(
    refs: ReferenceQuantities = DEFAULT_REFERENCES,
    curve: SaturationCurve | None = None,
    boiler: BoilerParams = DEFAULT_BOILER,
    lam: float = 0.016,
    load_W: float = 5e6,
) -> list[dict]:
    sp = sat_props(refs.p_r, curve)
    values = {
        "h_s": nondimensionalize(sp.h_s, "enthalpy", refs),
        "h_w": nondimensionalize(sp.h_w, "enthalpy", refs),
        "e": nondimensionalize(e_coeff(refs.p_r, boiler, curve), "energy_coefficient", refs),
        "lam": nondimensionalize(lam, "friction", refs),
        "Q_L": nondimensionalize(load_W, "heat_rate", refs),
    }
    return [check_row(name, values[name], *SCALED_ANCHORS[name]) for name in SCALED_ANCHORS]
