"""Finite-volume reference solution of the distributed pipe equations coupled to the boiler balances.

Each pipe carries cell averages of rho, rho*u and E = rho*h on a uniform grid.
The steam is barotropic about an anchor pressure (p depends on rho only) and
boilers follow the site energy balance with e and h_w frozen at the anchor.
All quantities here are dimensional (SI).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from steamnet.errors import OracleError
from steamnet.lumped_model import SystemParams
from steamnet.schedules import Schedule, merged_breakpoints
from steamnet.simulate import Scenario, TimeSeries, bind_params, sample_times
from steamnet.thermo import SaturationCurve, e_coeff

logger = logging.getLogger(__name__)

MIN_CELLS = 10
CFL = 0.5


@dataclass(frozen=True)
class LinearEOS:
    """First-order saturated-steam closure about p0."""

    p0: float
    rho0: float
    drho_dp: float
    h_s0: float
    dh_s_dp: float
    h_w0: float

    @classmethod
    def at(cls, curve: SaturationCurve, p0: float) -> "LinearEOS":
        sp = curve.props(p0)
        return cls(p0=p0, rho0=sp.rho_s, drho_dp=sp.d_rho_s_dp, h_s0=sp.h_s, dh_s_dp=sp.d_h_s_dp, h_w0=sp.h_w)

    @property
    def sound_speed(self) -> float:
        return math.sqrt(1.0 / self.drho_dp)

    def pressure(self, rho):
        return self.p0 + (rho - self.rho0) / self.drho_dp

    def density(self, p):
        return self.rho0 + self.drho_dp * (p - self.p0)

    def steam_enthalpy(self, p):
        return self.h_s0 + self.dh_s_dp * (p - self.p0)


@dataclass
class PipeGrid:
    link: str
    L: float
    d: float
    lam: float
    Q_w: float
    rho: np.ndarray
    m: np.ndarray
    E: np.ndarray

    @property
    def N(self) -> int:
        return int(self.rho.shape[0])

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def area(self) -> float:
        return math.pi * self.d**2 / 4.0

    @property
    def u(self) -> np.ndarray:
        return self.m / self.rho

    def copy(self) -> "PipeGrid":
        return PipeGrid(self.link, self.L, self.d, self.lam, self.Q_w, self.rho.copy(), self.m.copy(), self.E.copy())


@dataclass
class OracleState:
    p: np.ndarray
    pipes: list[PipeGrid]
    t: float = 0.0
    boundary_flux: np.ndarray | None = None


@dataclass(eq=False)
class OracleConfig:
    eos: LinearEOS
    e0: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    heat_inputs: list[Schedule]
    loads: list[Schedule]
    vertex_names: list[str]
    cfl: float = CFL
    _warned: bool = field(default=False, repr=False)


def heat_loss_density(linear_loss_W_per_m: float, d: float) -> float:
    """Q_w (W/m^3) from a linear loss in W/m; heat leaving the pipe is negative."""
    return -float(linear_loss_W_per_m) / (math.pi * d**2 / 4.0)


def build_oracle(
    params: SystemParams,
    N: int = 50,
    linear_loss: float | list[float] = 0.0,
    initial_p_Pa=None,
    initial_u_mps=None,
    anchor_Pa: float | None = None,
    cfl: float = CFL,
) -> tuple[OracleState, OracleConfig]:
    if int(N) != N or N < MIN_CELLS:
        raise ValueError(f"the oracle needs at least {MIN_CELLS} cells per pipe, got {N}")
    net = params.network
    p_init = np.full(net.n, params.refs.p_r) if initial_p_Pa is None else np.asarray(initial_p_Pa, dtype=float)
    u_init = np.zeros(net.m) if initial_u_mps is None else np.asarray(initial_u_mps, dtype=float)
    params.curve.check(p_init, net.vertex_names)
    eos = LinearEOS.at(params.curve, float(np.mean(p_init)) if anchor_Pa is None else float(anchor_Pa))
    losses = np.broadcast_to(np.asarray(linear_loss, dtype=float), (net.m,))
    tails, heads = net.tails(), net.heads()

    pipes = []
    for j, link in enumerate(net.links):
        centers = (np.arange(N) + 0.5) / N
        p_cells = p_init[tails[j]] + (p_init[heads[j]] - p_init[tails[j]]) * centers
        rho = eos.density(p_cells)
        pipes.append(
            PipeGrid(
                link=link.name,
                L=link.pipe.L,
                d=link.pipe.d,
                lam=link.pipe.lam,
                Q_w=heat_loss_density(losses[j], link.pipe.d),
                rho=rho,
                m=rho * u_init[j],
                E=rho * eos.steam_enthalpy(p_cells),
            )
        )
    cfg = OracleConfig(
        eos=eos,
        e0=np.array([e_coeff(eos.p0, v.boiler, params.curve) for v in net.vertices]),
        tails=tails,
        heads=heads,
        heat_inputs=list(params.heat_inputs),
        loads=list(params.loads),
        vertex_names=net.vertex_names,
        cfl=cfl,
    )
    return OracleState(p=p_init.copy(), pipes=pipes, t=0.0), cfg


def cfl_limit(state: OracleState, cfg: OracleConfig) -> float:
    c = cfg.eos.sound_speed
    return cfg.cfl * min(pipe.dx / (float(np.max(np.abs(pipe.u))) + c) for pipe in state.pipes)


def _pipe_fluxes(pipe: PipeGrid, p_tail: float, p_head: float, eos: LinearEOS):
    p = eos.pressure(pipe.rho)
    u = pipe.u
    h = pipe.E / pipe.rho
    p_left, p_right = 2.0 * p_tail - p[0], 2.0 * p_head - p[-1]
    rho_ext = np.concatenate([[eos.density(p_left)], pipe.rho, [eos.density(p_right)]])
    u_ext = np.concatenate([[u[0]], u, [u[-1]]])
    p_ext = np.concatenate([[p_left], p, [p_right]])
    h_ext = np.concatenate([[eos.steam_enthalpy(p_tail)], h, [eos.steam_enthalpy(p_head)]])
    m_ext = rho_ext * u_ext

    rl, rr = rho_ext[:-1], rho_ext[1:]
    ml, mr = m_ext[:-1], m_ext[1:]
    ul, ur = u_ext[:-1], u_ext[1:]
    speed = np.maximum(np.abs(ul), np.abs(ur)) + eos.sound_speed
    F_rho = 0.5 * (ml + mr) - 0.5 * speed * (rr - rl)
    F_m = 0.5 * (ml * ul + p_ext[:-1] + mr * ur + p_ext[1:]) - 0.5 * speed * (mr - ml)
    F_E = F_rho * np.where(F_rho >= 0.0, h_ext[:-1], h_ext[1:])
    return p, F_rho, F_m, F_E


def _euler_step(state: OracleState, dt: float, cfg: OracleConfig) -> OracleState:
    eos = cfg.eos
    net_out = np.zeros_like(state.p)
    new_pipes = []
    flux = np.zeros((len(state.pipes), 2))
    for j, pipe in enumerate(state.pipes):
        tail, head = cfg.tails[j], cfg.heads[j]
        p, F_rho, F_m, F_E = _pipe_fluxes(pipe, state.p[tail], state.p[head], eos)
        k = dt / pipe.dx
        rho = pipe.rho - k * np.diff(F_rho)
        bad = np.flatnonzero(~(rho > 0.0))
        if bad.size:
            raise OracleError(f"density became non-positive at t={state.t:.6g} s", link=pipe.link, cell=int(bad[0]))
        u = pipe.u
        m = pipe.m - k * np.diff(F_m) - dt * pipe.lam / (2.0 * pipe.d) * pipe.rho * u * np.abs(u)
        E = pipe.E + (eos.pressure(rho) - p) - k * np.diff(F_E) + dt * pipe.Q_w
        new_pipes.append(PipeGrid(pipe.link, pipe.L, pipe.d, pipe.lam, pipe.Q_w, rho, m, E))

        A = pipe.area
        net_out[tail] += A * (F_E[0] - eos.h_w0 * F_rho[0])
        net_out[head] -= A * (F_E[-1] - eos.h_w0 * F_rho[-1])
        flux[j] = F_rho[0], F_rho[-1]

    Q = np.array([s.value(state.t) for s in cfg.heat_inputs])
    QL = np.array([s.value(state.t) for s in cfg.loads])
    p_new = state.p + dt / cfg.e0 * (Q - QL - net_out)
    return OracleState(p=p_new, pipes=new_pipes, t=state.t + dt, boundary_flux=flux)


def step_oracle(state: OracleState, dt: float, cfg: OracleConfig) -> OracleState:
    """Advance by dt, splitting into CFL-limited substeps when dt is too large."""
    if dt <= 0:
        return state
    limit = cfl_limit(state, cfg)
    substeps = max(1, math.ceil(dt / limit - 1e-12))
    if substeps > 1 and not cfg._warned:
        logger.warning("oracle step %.3g s exceeds the CFL limit %.3g s; splitting into %d substeps", dt, limit, substeps)
        cfg._warned = True
    h = dt / substeps
    for _ in range(substeps):
        state = _euler_step(state, h, cfg)
    return state


def boundary_velocities(state: OracleState, cfg: OracleConfig) -> tuple[np.ndarray, np.ndarray]:
    """u(t, 0) and u(t, L) per pipe from the boundary mass fluxes and the boiler densities."""
    u0, uL = [], []
    for j, pipe in enumerate(state.pipes):
        if state.boundary_flux is None:
            f0, fL = pipe.m[0], pipe.m[-1]
        else:
            f0, fL = state.boundary_flux[j]
        u0.append(f0 / cfg.eos.density(state.p[cfg.tails[j]]))
        uL.append(fL / cfg.eos.density(state.p[cfg.heads[j]]))
    return np.array(u0), np.array(uL)


def oracle_invariant(state: OracleState, cfg: OracleConfig) -> float:
    """sum e0 p_v + sum over cells A dx (E - p - h_w0 rho); constant for a closed lossless system."""
    total = float(np.sum(cfg.e0 * state.p))
    for pipe in state.pipes:
        p = cfg.eos.pressure(pipe.rho)
        total += pipe.area * pipe.dx * float(np.sum(pipe.E - p - cfg.eos.h_w0 * pipe.rho))
    return total


def integrate_oracle(
    scenario: Scenario,
    params: SystemParams,
    N: int = 50,
    linear_loss: float | list[float] = 0.0,
    sample_dt: float = 0.5,
) -> TimeSeries:
    params = bind_params(params, scenario)
    state, cfg = build_oracle(params, N, linear_loss, scenario.initial_p_Pa, scenario.initial_u_mps)
    t0, t1 = scenario.t_span
    state.t = t0
    breakpoints = merged_breakpoints(cfg.heat_inputs + cfg.loads, t0, t1)
    times = sample_times(scenario.t_span, sample_dt, breakpoints)
    stops = np.unique(np.concatenate([times, breakpoints]))

    n, m = params.n, params.m
    P = np.empty((times.size, n))
    U = np.empty((times.size, m))
    U0 = np.empty((times.size, m))
    UL = np.empty((times.size, m))
    steps = 0

    def record(k: int) -> None:
        P[k] = state.p
        U[k] = [float(np.mean(pipe.u)) for pipe in state.pipes]
        U0[k], UL[k] = boundary_velocities(state, cfg)

    record(0)
    k = 1
    logger.info("oracle: %d cells per pipe, dt <= %.3g s, loss %s W/m", N, cfl_limit(state, cfg), linear_loss)
    for stop in stops[1:]:
        while state.t < stop - 1e-12:
            dt = min(cfl_limit(state, cfg), stop - state.t)
            state = _euler_step(state, dt, cfg)
            steps += 1
        state.t = float(stop)
        if k < times.size and abs(times[k] - stop) < 1e-9:
            record(k)
            k += 1

    extra = {}
    for j, name in enumerate(params.network.link_names):
        extra[f"u0_{name}_mps"] = U0[:, j]
        extra[f"uL_{name}_mps"] = UL[:, j]
    inputs = [params.inputs_at(t) for t in times]
    return TimeSeries(
        t=times,
        p=P,
        u=U,
        Q_in=np.array([q for q, _ in inputs]).reshape(times.size, n),
        Q_load=np.array([ql for _, ql in inputs]).reshape(times.size, n),
        vertex_names=params.network.vertex_names,
        link_names=params.network.link_names,
        model="oracle",
        extra=extra,
        stats={"steps": steps, "cells": N, "linear_loss_W_per_m": linear_loss},
    )


@dataclass(frozen=True)
class ComparisonReport:
    t_window: tuple[float, float]
    rows: list[dict]
    tol_velocity: float
    tol_pressure: float

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.rows)

    def worst(self, kind: str) -> float:
        values = [row["sup_rel"] for row in self.rows if row["kind"] == kind]
        return max(values) if values else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_dict(self) -> dict:
        return {
            "t_window": list(self.t_window),
            "tol_velocity": self.tol_velocity,
            "tol_pressure": self.tol_pressure,
            "passed": self.passed,
            "rows": self.rows,
        }


def _relative_errors(reference: np.ndarray, other: np.ndarray) -> tuple[float, float]:
    scale = float(np.max(np.abs(reference))) if reference.size else 0.0
    diff = other - reference
    if scale == 0.0:
        return (0.0, 0.0) if not np.any(diff) else (float("inf"), float("inf"))
    return float(np.max(np.abs(diff))) / scale, float(np.sqrt(np.mean(diff**2))) / scale


def _require_same_inputs(lumped_ts: TimeSeries, oracle_ts: TimeSeries, times: np.ndarray) -> None:
    for t in times:
        for label, ours, theirs in zip(("heat input", "load"), lumped_ts.inputs_at(t), oracle_ts.inputs_at(t)):
            if not np.allclose(ours, theirs, rtol=1e-9, atol=1e-6):
                raise ValueError(
                    f"compared series come from different scenarios: {label} at t = {t:g} s is "
                    f"{np.round(ours, 3).tolist()} W vs {np.round(theirs, 3).tolist()} W"
                )


def compare_models(
    lumped_ts: TimeSeries,
    oracle_ts: TimeSeries,
    t_window: tuple[float, float] | None = None,
    tol_velocity: float = 0.05,
    tol_pressure: float = 0.01,
) -> ComparisonReport:
    if lumped_ts.vertex_names != oracle_ts.vertex_names or lumped_ts.link_names != oracle_ts.link_names:
        raise ValueError("compared series describe different networks")
    if lumped_ts.empty or oracle_ts.empty:
        raise ValueError("cannot compare an empty series")
    lo = max(lumped_ts.t[0], oracle_ts.t[0])
    hi = min(lumped_ts.t[-1], oracle_ts.t[-1])
    if t_window is not None:
        lo, hi = max(lo, t_window[0]), min(hi, t_window[1])
    if hi < lo:
        raise ValueError(f"series share no common time window (lumped {lumped_ts.t[[0, -1]]}, oracle {oracle_ts.t[[0, -1]]})")

    mask = lumped_ts.window(lo, hi)
    t = lumped_ts.t[mask]
    _require_same_inputs(lumped_ts, oracle_ts, t)
    rows = []
    for i, name in enumerate(lumped_ts.vertex_names):
        ref = lumped_ts.p[mask, i]
        other = np.interp(t, oracle_ts.t, oracle_ts.p[:, i])
        sup, rms = _relative_errors(ref, other)
        rows.append({"quantity": f"p_{name}", "kind": "pressure", "sup_rel": sup, "rms_rel": rms, "passed": sup <= tol_pressure})
    for j, name in enumerate(lumped_ts.link_names):
        ref = lumped_ts.u[mask, j]
        for end in ("u0", "uL"):
            column = oracle_ts.extra.get(f"{end}_{name}_mps", oracle_ts.u[:, j])
            other = np.interp(t, oracle_ts.t, column)
            sup, rms = _relative_errors(ref, other)
            rows.append(
                {"quantity": f"{end}_{name}", "kind": "velocity", "sup_rel": sup, "rms_rel": rms, "passed": sup <= tol_velocity}
            )
    return ComparisonReport(t_window=(float(lo), float(hi)), rows=rows, tol_velocity=tol_velocity, tol_pressure=tol_pressure)
