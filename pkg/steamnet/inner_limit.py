"""Inner-limit network model at a uniform base pressure and its equilibrium set.

With psi = (p - p0)/eps and q = (pi/4) d^2 u the full model reduces, to leading
order on the fast time scale, to

    G dpsi/dt = -R q + s
    H dq/dt   = R^T psi - f(q)

where G, H are positive diagonals and f(q) = coeff * q|q|.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

from steamnet.errors import EquilibriumError
from steamnet.lumped_model import SystemParams, SystemState
from steamnet.network import Network, spanning_tree_links

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
NEWTON_Q_FLOOR = 1e-8
FLOW_TOL = 1e-10
PRESSURE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class InnerLimitSystem:
    network: Network
    p0: float
    epsilon: float
    G_diag: np.ndarray
    H_diag: np.ndarray
    R: np.ndarray
    s: np.ndarray
    f_coeffs: np.ndarray
    area: np.ndarray
    hc_rho0: np.ndarray

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[1]

    @property
    def G(self) -> np.ndarray:
        return np.diag(self.G_diag)

    @property
    def H(self) -> np.ndarray:
        return np.diag(self.H_diag)

    def f(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return self.f_coeffs * q * np.abs(q)

    def Df(self, q) -> np.ndarray:
        return np.diag(2.0 * self.f_coeffs * np.abs(np.asarray(q, dtype=float)))

    def with_source(self, s) -> "InnerLimitSystem":
        return replace(self, s=np.asarray(s, dtype=float).copy())


@dataclass(frozen=True, eq=False)
class EquilibriumSet:
    q_star: np.ndarray
    psi_0: np.ndarray
    kernel_direction: np.ndarray
    feasible: bool
    unique: bool
    flow_residual: float
    pressure_residual: float
    iterations: int

    def psi(self, c: float = 0.0) -> np.ndarray:
        return self.psi_0 + c * self.kernel_direction

    def to_dict(self) -> dict:
        return {
            "q_star": self.q_star.tolist(),
            "psi_0": self.psi_0.tolist(),
            "feasible": self.feasible,
            "unique": self.unique,
            "flow_residual": self.flow_residual,
            "pressure_residual": self.pressure_residual,
            "iterations": self.iterations,
        }


class HeatBalance(NamedTuple):
    balanced: bool
    total_source: float
    drift_rate: float


def source_vector(params: SystemParams, hc_rho0: np.ndarray, t_s: float) -> np.ndarray:
    return params.source_at(t_s) / hc_rho0


def build_inner(params: SystemParams, p0: float, t_s: float = 0.0) -> InnerLimitSystem:
    props = params.vertex_properties(np.full(params.n, float(p0)))
    rho0 = float(props["rho_s"][0])
    hc_rho0 = props["hc_rho"]
    return InnerLimitSystem(
        network=params.network,
        p0=float(p0),
        epsilon=float(params.epsilon),
        G_diag=props["e"] / hc_rho0,
        H_diag=4.0 * rho0 * params.L / (np.pi * params.d**2),
        R=params.R.copy(),
        s=source_vector(params, hc_rho0, t_s),
        f_coeffs=8.0 * params.lam * params.L * rho0 / (np.pi**2 * params.d**5),
        area=params.area.copy(),
        hc_rho0=hc_rho0,
    )


def rhs_inner(psi, q, sys: InnerLimitSystem) -> tuple[np.ndarray, np.ndarray]:
    psi = np.asarray(psi, dtype=float)
    q = np.asarray(q, dtype=float)
    dpsi = (-sys.R @ q + sys.s) / sys.G_diag
    dq = (sys.R.T @ psi - sys.f(q)) / sys.H_diag
    return dpsi, dq


def rhs_inner_vector(t: float, y: np.ndarray, sys: InnerLimitSystem) -> np.ndarray:
    dpsi, dq = rhs_inner(y[: sys.n], y[sys.n :], sys)
    return np.concatenate([dpsi, dq])


def initial_inner_state(state: SystemState, sys: InnerLimitSystem) -> tuple[np.ndarray, np.ndarray]:
    return (state.p - sys.p0) / sys.epsilon, sys.area * state.u


def to_full_state(psi, q, sys: InnerLimitSystem) -> SystemState:
    return SystemState(p=sys.p0 + sys.epsilon * np.asarray(psi, dtype=float), u=np.asarray(q, dtype=float) / sys.area)


def check_heat_balance(sys: InnerLimitSystem, tol: float = 1e-12) -> HeatBalance:
    total = float(np.sum(sys.s))
    scale = max(1.0, float(np.sum(np.abs(sys.s))))
    if abs(total) <= tol * scale:
        return HeatBalance(True, total, 0.0)
    return HeatBalance(False, total, total / float(np.sum(sys.G_diag)))


def detrend(psi, t, rate: float) -> np.ndarray:
    """psi' = psi - rate * t * 1; t may be a vector of sample times (rows of psi)."""
    psi = np.asarray(psi, dtype=float)
    t = np.asarray(t, dtype=float)
    if psi.ndim == 2:
        return psi - rate * t[:, None]
    return psi - rate * t


def _particular_flow(sys: InnerLimitSystem) -> np.ndarray:
    tree = spanning_tree_links(sys.network)
    q = np.zeros(sys.m)
    if tree:
        R_tree = sys.R[:, tree]
        q_tree, *_ = np.linalg.lstsq(R_tree, sys.s, rcond=None)
        q[tree] = q_tree
    return q


def _loop_newton(sys: InnerLimitSystem, q_p: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, int]:
    def potential(q):
        return float(np.sum(sys.f_coeffs * np.abs(q) ** 3) / 3.0)

    z = np.zeros(K.shape[1])
    q = q_p.copy()
    scale = max(1.0, float(np.max(np.abs(sys.f(q_p)))))
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        F = K.T @ sys.f(q)
        if np.max(np.abs(F)) <= 1e-13 * scale:
            return q, iteration - 1
        weights = 2.0 * sys.f_coeffs * np.maximum(np.abs(q), NEWTON_Q_FLOOR)
        J = (K.T * weights) @ K
        step = np.linalg.solve(J, -F)
        phi = potential(q)
        alpha = 1.0
        for _ in range(40):
            trial = q_p + K @ (z + alpha * step)
            if potential(trial) <= phi + 1e-4 * alpha * float(F @ step):
                break
            alpha *= 0.5
        z = z + alpha * step
        q = q_p + K @ z
    F = K.T @ sys.f(q)
    residual = float(np.max(np.abs(F)))
    if residual <= 1e-10 * scale:
        return q, NEWTON_MAX_ITER
    raise EquilibriumError(f"loop-flow Newton did not converge in {NEWTON_MAX_ITER} iterations", residual=residual)


def solve_equilibrium(sys: InnerLimitSystem) -> EquilibriumSet:
    balance = check_heat_balance(sys)
    if not balance.balanced:
        raise EquilibriumError(
            "heat inputs and loads are not balanced (sum of s is nonzero); "
            f"de-trend with drift rate {balance.drift_rate:.6g} before locating equilibria",
            residual=abs(balance.total_source),
        )
    q_p = _particular_flow(sys)
    infeasible = float(np.max(np.abs(sys.R @ q_p - sys.s))) if sys.n else 0.0
    if infeasible > FLOW_TOL * max(1.0, float(np.max(np.abs(sys.s)))):
        raise EquilibriumError("source vector is not in the image of the incidence matrix", residual=infeasible)

    K = null_space(sys.R) if sys.m else np.zeros((0, 0))
    iterations = 0
    if K.size:
        q_star, iterations = _loop_newton(sys, q_p, K)
        logger.info("loop-flow Newton converged in %d iterations over %d loops", iterations, K.shape[1])
    else:
        q_star = q_p

    f_star = sys.f(q_star)
    psi_0 = np.zeros(sys.n)
    if sys.m:
        psi_0 = np.linalg.lstsq(sys.R.T, f_star, rcond=None)[0]
        psi_0 = psi_0 - np.mean(psi_0)

    flow_residual = float(np.max(np.abs(sys.R @ q_star - sys.s))) if sys.n else 0.0
    pressure_residual = float(np.max(np.abs(sys.R.T @ psi_0 - f_star))) if sys.m else 0.0
    return EquilibriumSet(
        q_star=q_star,
        psi_0=psi_0,
        kernel_direction=np.ones(sys.n),
        feasible=flow_residual <= FLOW_TOL and pressure_residual <= PRESSURE_TOL,
        unique=bool(np.all(sys.f_coeffs > 0)),
        flow_residual=flow_residual,
        pressure_residual=pressure_residual,
        iterations=iterations,
    )


def equilibrium_state(sys: InnerLimitSystem, eq: EquilibriumSet, c: float = 0.0) -> SystemState:
    """Full-model state p = p0 + eps (psi_0 + c 1), u = q*/a (leading order)."""
    return to_full_state(eq.psi(c), eq.q_star, sys)
