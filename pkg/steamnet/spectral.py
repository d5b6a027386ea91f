"""Linearization about the equilibrium line, normal-hyperbolicity checks and slow-manifold tracing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.integrate import solve_ivp

from steamnet.errors import NumericalError, ThermoRangeError
from steamnet.inner_limit import EquilibriumSet, InnerLimitSystem
from steamnet.lumped_model import SystemParams, SystemState, fast_residual, rhs_vector

logger = logging.getLogger(__name__)

TOL_ZERO = 1e-8
ANGLE_TOL = 1e-6
RELAX_TOL = 1e-8
RELAX_CHUNK = 20.0
RELAX_MAX_TIME = 400.0
# Traced points with fast coordinates below this norm count as the rest state.
REST_SCALE = 1e-9


def linearize(sys: InnerLimitSystem, eq: EquilibriumSet) -> np.ndarray:
    n, m = sys.n, sys.m
    A = np.zeros((n + m, n + m))
    A[:n, n:] = -sys.R / sys.G_diag[:, None]
    A[n:, :n] = sys.R.T / sys.H_diag[:, None]
    A[n:, n:] = -sys.Df(eq.q_star) / sys.H_diag[:, None]
    return A


@dataclass(frozen=True, eq=False)
class SpectralReport:
    A: np.ndarray
    eigenvalues: np.ndarray
    zero_count: int
    center_vector: np.ndarray | None
    center_angle: float
    Df_nonsingular: bool
    no_pure_imaginary: bool
    center_is_one_dim: bool
    center_tangent_to_ones: bool
    zero_semisimple: bool
    transverse_stable: bool
    tol_zero: float
    reasons: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not self.reasons

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "reasons": list(self.reasons),
            "tol_zero": self.tol_zero,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "zero_count": self.zero_count,
            "center_angle_rad": self.center_angle,
            "Df_nonsingular": self.Df_nonsingular,
            "no_pure_imaginary": self.no_pure_imaginary,
            "center_is_one_dim": self.center_is_one_dim,
            "center_tangent_to_ones": self.center_tangent_to_ones,
            "zero_semisimple": self.zero_semisimple,
            "transverse_stable": self.transverse_stable,
        }


def _angle_to(v: np.ndarray, direction: np.ndarray) -> float:
    direction = direction / np.linalg.norm(direction)
    along = abs(np.vdot(direction, v))
    across = np.linalg.norm(v - np.vdot(direction, v) * direction)
    return float(np.arctan2(across, along))


def nhim_certificate(A: np.ndarray, eq: EquilibriumSet, tol_zero: float = TOL_ZERO) -> SpectralReport:
    n = eq.psi_0.shape[0]
    size = A.shape[0]
    try:
        eigenvalues, vectors = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed on the linearization: {exc}") from exc

    magnitude = np.abs(eigenvalues)
    zero = magnitude < tol_zero
    zero_count = int(np.sum(zero))
    pure_imaginary = (np.abs(eigenvalues.real) < tol_zero) & (np.abs(eigenvalues.imag) >= tol_zero)
    Df_nonsingular = bool(np.all(np.abs(eq.q_star) > tol_zero))

    center_vector = None
    angle = float("nan")
    if zero_count:
        v = vectors[:, int(np.argmin(magnitude))]
        center_vector = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
        ones = np.concatenate([np.ones(n), np.zeros(size - n)])
        angle = _angle_to(center_vector, ones)

    rank = np.linalg.matrix_rank(A)
    transverse_stable = bool(np.all(eigenvalues.real[~zero] < -tol_zero))

    reasons = []
    if zero_count != 1:
        reasons.append(f"expected exactly one zero eigenvalue, found {zero_count}")
    if not Df_nonsingular:
        reasons.append("Df(q*) is singular: some equilibrium flow is zero")
    if np.any(pure_imaginary):
        reasons.append(f"{int(np.sum(pure_imaginary))} pure-imaginary eigenvalues")
    tangent = zero_count >= 1 and angle < ANGLE_TOL
    if zero_count >= 1 and not tangent:
        reasons.append(f"center eigenvector is {angle:.3e} rad away from the uniform-pressure direction")

    return SpectralReport(
        A=A,
        eigenvalues=eigenvalues,
        zero_count=zero_count,
        center_vector=center_vector,
        center_angle=angle,
        Df_nonsingular=Df_nonsingular,
        no_pure_imaginary=not bool(np.any(pure_imaginary)),
        center_is_one_dim=zero_count == 1,
        center_tangent_to_ones=bool(tangent),
        zero_semisimple=int(rank) == size - 1,
        transverse_stable=transverse_stable,
        tol_zero=tol_zero,
        reasons=reasons,
    )


@dataclass(frozen=True)
class RelaxResult:
    state: SystemState
    converged: bool
    drift_rate: float
    du_residual: float
    dp_residual: float
    elapsed: float


def relax_to_manifold(
    params: SystemParams,
    state: SystemState,
    t_s: float = 0.0,
    tol: float = RELAX_TOL,
    max_time: float = RELAX_MAX_TIME,
    chunk: float = RELAX_CHUNK,
) -> RelaxResult:
    """Integrate the full model with the common pressure rate removed until the fast motion stops.

    Inputs are frozen at `t_s`. The mean pressure stays where it started.
    """
    n = params.n
    source = params.source_at(t_s)

    def pinned(t, y):
        dy = rhs_vector(t_s / params.refs.t_r, y, params, source)
        dy[:n] -= np.mean(dy[:n])
        return dy

    y = state.to_vector()
    elapsed = 0.0
    du_res, dp_res = fast_residual(state, 0.0, params, source)
    while max(du_res, dp_res) >= tol and elapsed < max_time:
        try:
            sol = solve_ivp(pinned, (0.0, chunk), y, method="RK45", rtol=1e-11, atol=1e-13)
        except ThermoRangeError as exc:
            raise exc.at(time_s=t_s) from None
        if sol.status < 0:
            raise NumericalError(f"relaxation integration failed: {sol.message}")
        y = sol.y[:, -1]
        elapsed += chunk
        du_res, dp_res = fast_residual(SystemState.from_vector(y, n), 0.0, params, source)

    relaxed = SystemState.from_vector(y, n)
    dy = rhs_vector(t_s / params.refs.t_r, y, params, source)
    converged = max(du_res, dp_res) < tol
    if not converged:
        logger.warning(
            "relaxation at mean pressure %.6g did not converge in %.0f time units (residuals %.2e, %.2e)",
            relaxed.mean_pressure,
            max_time,
            du_res,
            dp_res,
        )
    return RelaxResult(
        state=relaxed,
        converged=converged,
        drift_rate=float(np.mean(dy[:n])),
        du_residual=du_res,
        dp_residual=dp_res,
        elapsed=elapsed,
    )


@dataclass(frozen=True, eq=False)
class ManifoldTrace:
    samples: list[SystemState]
    converged: list[bool]
    residuals: list[float]
    drift_rates: list[float]
    epsilon: float
    R: np.ndarray

    @property
    def mean_pressure(self) -> np.ndarray:
        return np.array([s.mean_pressure for s in self.samples])

    def fast_coordinates(self) -> np.ndarray:
        """Rows of (R^T p / eps, u): pressure differences and velocities."""
        return np.array([fast_coordinates(s, self.R, self.epsilon) for s in self.samples])

    def to_frame(self, params: SystemParams) -> pd.DataFrame:
        refs = params.refs
        data = {"p_mean_Pa": self.mean_pressure * refs.p_r}
        P = np.array([s.p for s in self.samples]) * refs.p_r
        U = np.array([s.u for s in self.samples]) * refs.u_r
        for i, name in enumerate(params.network.vertex_names):
            data[f"p_{name}_Pa"] = P[:, i]
        for j, name in enumerate(params.network.link_names):
            data[f"u_{name}_mps"] = U[:, j]
        data["drift_Pa_per_s"] = np.array(self.drift_rates) * refs.p_r / refs.t_r
        data["residual"] = self.residuals
        data["converged"] = [int(c) for c in self.converged]
        return pd.DataFrame(data)


def fast_coordinates(state: SystemState, R: np.ndarray, epsilon: float) -> np.ndarray:
    return np.concatenate([R.T @ state.p / epsilon, state.u])


def trace_manifold(
    params: SystemParams,
    p_range: tuple[float, float],
    samples: int,
    t_s: float = 0.0,
    initial: SystemState | None = None,
    tol: float = RELAX_TOL,
    max_time: float = RELAX_MAX_TIME,
) -> ManifoldTrace:
    """Relax the full model at `samples` mean pressures spanning the dimensionless `p_range`."""
    if samples < 1:
        raise ValueError(f"need at least one manifold sample, got {samples}")
    lo, hi = sorted(float(x) for x in p_range)
    targets = np.linspace(lo, hi, samples) if samples > 1 else np.array([lo])
    guess = initial or SystemState(p=np.full(params.n, targets[0]), u=np.zeros(params.m))

    states, flags, residuals, drifts = [], [], [], []
    for target in targets:
        start = SystemState(p=guess.p + (target - guess.mean_pressure), u=guess.u)
        result = relax_to_manifold(params, start, t_s, tol=tol, max_time=max_time)
        states.append(result.state)
        flags.append(result.converged)
        residuals.append(max(result.du_residual, result.dp_residual))
        drifts.append(result.drift_rate)
        guess = result.state
    logger.info("traced %d manifold samples, %d converged", len(states), sum(flags))
    return ManifoldTrace(states, flags, residuals, drifts, float(params.epsilon), params.R.copy())


def manifold_distance(trace: ManifoldTrace, state: SystemState) -> float:
    """Distance in fast coordinates to the trace at the state's mean pressure.

    Relative to the traced point, or absolute where the traced point is the rest state.
    """
    order = np.argsort(trace.mean_pressure)
    pbar = trace.mean_pressure[order]
    coords = trace.fast_coordinates()[order]
    target = np.array([np.interp(state.mean_pressure, pbar, coords[:, k]) for k in range(coords.shape[1])])
    here = fast_coordinates(state, trace.R, trace.epsilon)
    gap = float(np.linalg.norm(here - target))
    scale = float(np.linalg.norm(target))
    return gap / scale if scale > REST_SCALE else gap
