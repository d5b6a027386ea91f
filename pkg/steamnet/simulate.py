"""Scenario-driven integration of the full and inner-limit models."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from steamnet.errors import StiffnessError, ThermoRangeError
from steamnet.inner_limit import build_inner, initial_inner_state, rhs_inner_vector, source_vector, to_full_state
from steamnet.lumped_model import (
    VALIDITY_MULTIPLE,
    SystemParams,
    SystemState,
    heat_outputs,
    rhs_vector,
    validity_ratio,
)
from steamnet.schedules import PiecewiseConstant, Schedule, SquareWave, constant, merged_breakpoints

logger = logging.getLogger(__name__)

MODELS = ("full", "inner")
CSV_FLOAT_FORMAT = "%.10g"


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = float("inf")
    sample_dt: float = 0.5

    def __post_init__(self) -> None:
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError(f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}")
        if not self.max_step > 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if not self.sample_dt > 0:
            raise ValueError(f"sample spacing must be positive, got {self.sample_dt}")


DEFAULT_SOLVER = SolverOptions()


@dataclass(frozen=True, eq=False)
class Scenario:
    heat_inputs: list[Schedule]
    loads: list[Schedule]
    t_span: tuple[float, float]
    initial_p_Pa: np.ndarray
    initial_u_mps: np.ndarray
    name: str = "custom"

    def __post_init__(self) -> None:
        t0, t1 = (float(t) for t in self.t_span)
        if t1 < t0:
            raise ValueError(f"t_span must not run backwards, got {self.t_span}")
        object.__setattr__(self, "t_span", (t0, t1))
        object.__setattr__(self, "initial_p_Pa", np.asarray(self.initial_p_Pa, dtype=float))
        object.__setattr__(self, "initial_u_mps", np.asarray(self.initial_u_mps, dtype=float))
        if len(self.heat_inputs) != len(self.loads) or len(self.heat_inputs) != self.initial_p_Pa.size:
            raise ValueError("heat inputs, loads and initial pressures need one entry per vertex")

    def breakpoints(self) -> list[float]:
        return merged_breakpoints(list(self.heat_inputs) + list(self.loads), *self.t_span)

    def initial_state(self, params: SystemParams) -> SystemState:
        return SystemState.from_dimensional(self.initial_p_Pa, self.initial_u_mps, params.refs)


def bind_params(params: SystemParams, scenario: Scenario) -> SystemParams:
    """Params with the scenario's schedules in place of their own."""
    return replace(params, heat_inputs=list(scenario.heat_inputs), loads=list(scenario.loads))


def make_step_scenario(
    before: tuple[float, float] = (5e6, 5e6),
    after: tuple[float, float] = (6e6, 4e6),
    loads: tuple[float, float] = (5e6, 5e6),
    t_step: float = 10.0,
    t_end: float = 120.0,
    p_init: float = 800e3,
) -> Scenario:
    values = list(before) + list(after) + list(loads)
    if any(v <= 0 for v in values) or t_step < 0 or t_end <= 0:
        raise ValueError("step scenario values must be positive")
    heat = [PiecewiseConstant([(0.0, b), (t_step, a)]) for b, a in zip(before, after)]
    return Scenario(
        heat_inputs=heat,
        loads=[constant(v) for v in loads],
        t_span=(0.0, t_end),
        initial_p_Pa=np.full(2, p_init),
        initial_u_mps=np.zeros(1),
        name="step",
    )


def make_periodic_scenario(
    period: float = 600.0,
    high: float = 7e6,
    low: float = 5e6,
    q2: float = 4e6,
    loads: tuple[float, float] = (5e6, 5e6),
    duty: float = 0.5,
    t_end: float = 3000.0,
    p_init: float = 800e3,
) -> Scenario:
    if any(v <= 0 for v in (period, high, low, q2, *loads, t_end)):
        raise ValueError("periodic scenario values must be positive")
    return Scenario(
        heat_inputs=[SquareWave(period, high, low, duty=duty), constant(q2)],
        loads=[constant(v) for v in loads],
        t_span=(0.0, t_end),
        initial_p_Pa=np.full(2, p_init),
        initial_u_mps=np.zeros(1),
        name="periodic",
    )


@dataclass(eq=False)
class TimeSeries:
    t: np.ndarray
    p: np.ndarray
    u: np.ndarray
    Q_in: np.ndarray
    Q_load: np.ndarray
    vertex_names: list[str]
    link_names: list[str]
    model: str = "full"
    Q_o: np.ndarray | None = None
    validity: np.ndarray | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def empty(self) -> bool:
        return len(self) == 0

    def inputs_at(self, t_s: float) -> tuple[np.ndarray, np.ndarray]:
        """Q_in and Q_load held from the last sample at or before t_s."""
        k = max(int(np.searchsorted(self.t, t_s + 1e-9, side="right")) - 1, 0)
        return self.Q_in[k], self.Q_load[k]

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.t >= t0 - 1e-9) & (self.t <= t1 + 1e-9)

    def to_frame(self) -> pd.DataFrame:
        data = {"t_s": self.t}
        for i, name in enumerate(self.vertex_names):
            data[f"p_{name}_Pa"] = self.p[:, i]
        for j, name in enumerate(self.link_names):
            data[f"u_{name}_mps"] = self.u[:, j]
        for key, values in self.extra.items():
            data[key] = values
        if self.Q_o is not None:
            for i, name in enumerate(self.vertex_names):
                data[f"Qo_{name}_W"] = self.Q_o[:, i]
        if self.validity is not None:
            data["validity_ratio"] = self.validity
        return pd.DataFrame(data)

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return path


def sample_times(t_span: tuple[float, float], sample_dt: float, breakpoints: list[float]) -> np.ndarray:
    t0, t1 = t_span
    grid = t0 + sample_dt * np.arange(int(np.floor((t1 - t0) / sample_dt + 1e-9)) + 1)
    times = np.concatenate([grid[grid <= t1], np.asarray(breakpoints, dtype=float), [t1]])
    return np.unique(np.round(times, 9))


def _segments(t_span: tuple[float, float], breakpoints: list[float]) -> list[tuple[float, float]]:
    edges = [t_span[0], *breakpoints, t_span[1]]
    return [(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def _integrate_segments(fun_for, y0, t_span, breakpoints, times, t_r, options):
    """Integrate piecewise between breakpoints; fun_for(t_mid_s) returns the frozen right-hand side."""
    out = np.empty((times.size, y0.size))
    filled = np.zeros(times.size, dtype=bool)
    out[0] = y0
    filled[0] = True
    stats = {"segments": 0, "steps": 0, "nfev": 0}
    y = np.asarray(y0, dtype=float)
    for a, b in _segments(t_span, breakpoints):
        fun = fun_for(0.5 * (a + b))
        sol = solve_ivp(
            fun,
            (a / t_r, b / t_r),
            y,
            method="RK45",
            rtol=options.rtol,
            atol=options.atol,
            max_step=options.max_step / t_r,
        )
        if sol.status < 0:
            raise StiffnessError(
                f"integration stopped at t={sol.t[-1] * t_r:.6g} s: {sol.message}; "
                "try tighter tolerances or a scenario with a smaller epsilon"
            )
        stats["segments"] += 1
        stats["steps"] += sol.t.size - 1
        stats["nfev"] += sol.nfev
        slopes = np.array([fun(tk, yk) for tk, yk in zip(sol.t, sol.y.T)])
        spline = CubicHermiteSpline(sol.t, sol.y.T, slopes, axis=0)
        inside = (times >= a - 1e-9) & (times <= b + 1e-9) & ~filled
        if np.any(inside):
            tau = np.clip(times[inside] / t_r, sol.t[0], sol.t[-1])
            out[inside] = spline(tau)
            filled |= inside
        y = sol.y[:, -1]
    return out, stats


def integrate(
    model: str,
    scenario: Scenario,
    params: SystemParams,
    options: SolverOptions = DEFAULT_SOLVER,
) -> TimeSeries:
    if model not in MODELS:
        raise ValueError(f"unknown model '{model}', expected one of {MODELS}")
    params = bind_params(params, scenario)
    refs = params.refs
    n = params.n
    breakpoints = scenario.breakpoints()
    times = sample_times(scenario.t_span, options.sample_dt, breakpoints)
    state0 = scenario.initial_state(params)
    params.curve.check(state0.p * refs.p_r, params.network.vertex_names)

    if model == "full":
        def fun_for(t_mid):
            source = params.source_at(t_mid)
            return lambda t, y: rhs_vector(t, y, params, source)

        y0 = state0.to_vector()
    else:
        base = build_inner(params, state0.mean_pressure, scenario.t_span[0])

        def fun_for(t_mid):
            seg = base.with_source(source_vector(params, base.hc_rho0, t_mid))
            return lambda t, y: rhs_inner_vector(t, y, seg)

        y0 = np.concatenate(initial_inner_state(state0, base))

    logger.info("integrating %s model over %s s in %d segments", model, scenario.t_span, len(breakpoints) + 1)
    try:
        Y, stats = _integrate_segments(fun_for, y0, scenario.t_span, breakpoints, times, refs.t_r, options)
    except ThermoRangeError as exc:
        logger.warning("integration left the steam-table range: %s", exc)
        raise

    if model == "full":
        P, U = Y[:, :n] * refs.p_r, Y[:, n:] * refs.u_r
    else:
        full = [to_full_state(row[:n], row[n:], base) for row in Y]
        P = np.array([s.p for s in full]).reshape(len(times), n) * refs.p_r
        U = np.array([s.u for s in full]).reshape(len(times), params.m) * refs.u_r

    inputs = [params.inputs_at(t) for t in times]
    ts = TimeSeries(
        t=times,
        p=P,
        u=U,
        Q_in=np.array([q for q, _ in inputs]).reshape(len(times), n),
        Q_load=np.array([ql for _, ql in inputs]).reshape(len(times), n),
        vertex_names=params.network.vertex_names,
        link_names=params.network.link_names,
        model=model,
        stats=stats,
    )
    return derived_outputs(ts, params)


def derived_outputs(ts: TimeSeries, params: SystemParams) -> TimeSeries:
    refs = params.refs
    Q_o = np.empty_like(ts.p)
    validity = np.empty(len(ts))
    for k in range(len(ts)):
        state = SystemState.from_dimensional(ts.p[k], ts.u[k], refs)
        Q_o[k] = heat_outputs(state, params, ts.Q_load[k])
        validity[k] = validity_ratio(state, params)
    worst = float(validity.max()) if validity.size else 0.0
    ts.stats["validity_max"] = worst
    if worst > VALIDITY_MULTIPLE:
        logger.warning(
            "pressure differences reached %.3g eps (limit %.0f eps); the lumped model may be inaccurate",
            worst,
            VALIDITY_MULTIPLE,
        )
    return replace(ts, Q_o=Q_o, validity=validity)
