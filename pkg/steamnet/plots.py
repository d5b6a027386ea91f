"""Static figures: stacked time series, the slow manifold in 3D and oracle comparisons."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from steamnet.errors import ConfigError  # noqa: E402
from steamnet.lumped_model import SystemParams  # noqa: E402
from steamnet.simulate import TimeSeries  # noqa: E402
from steamnet.spectral import ManifoldTrace  # noqa: E402

logger = logging.getLogger(__name__)

DPI = 150


def _save(fig, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=DPI)
    except OSError as exc:
        raise ConfigError(f"cannot write plot {path}: {exc.strerror}", field="output.directory") from None
    finally:
        plt.close(fig)
    return path


def plot_time_series(ts: TimeSeries, path: Path | str) -> Path | None:
    """One pressure panel per vertex, then link velocities and heat outputs."""
    if ts.empty:
        logger.warning("time series is empty; no plot written to %s", path)
        return None
    n = len(ts.vertex_names)
    fig, axes = plt.subplots(n + 2, 1, sharex=True, figsize=(7, 2.2 * (n + 2)))
    for i, name in enumerate(ts.vertex_names):
        axes[i].plot(ts.t, ts.p[:, i] / 1e3, label=f"$p_{{{name}}}$")
        axes[i].set_ylabel(f"$p_{{{name}}}$ [kPa]")
    for j, name in enumerate(ts.link_names):
        axes[n].plot(ts.t, ts.u[:, j], label=f"$u_{{{name}}}$")
    axes[n].set_ylabel("velocity [m/s]")
    if ts.Q_o is not None:
        for i, name in enumerate(ts.vertex_names):
            axes[n + 1].plot(ts.t, ts.Q_o[:, i] / 1e6, label=f"$Q'_{{o,{name}}}$")
    axes[n + 1].set_ylabel("heat output [MW]")
    axes[n + 1].set_xlabel("time [s]")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        if ax.lines:
            ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_manifold(
    trace: ManifoldTrace,
    params: SystemParams,
    path: Path | str,
    trajectory: TimeSeries | None = None,
    link: int = 0,
) -> Path | None:
    """(mean pressure, pressure difference across `link`, velocity in `link`) in dimensional units."""
    if not trace.samples:
        logger.warning("manifold trace is empty; no plot written to %s", path)
        return None
    refs = params.refs
    tail, head = params.tails[link], params.heads[link]
    P = np.array([s.p for s in trace.samples]) * refs.p_r
    U = np.array([s.u for s in trace.samples]) * refs.u_r

    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(111, projection="3d")
    ax.plot(P.mean(axis=1) / 1e3, (P[:, tail] - P[:, head]) / 1e3, U[:, link], "k-", lw=2, label="traced manifold")
    if trajectory is not None and not trajectory.empty:
        ax.plot(
            trajectory.p.mean(axis=1) / 1e3,
            (trajectory.p[:, tail] - trajectory.p[:, head]) / 1e3,
            trajectory.u[:, link],
            "-",
            lw=0.8,
            label="trajectory",
        )
    name = params.network.link_names[link]
    ax.set_xlabel("mean pressure [kPa]")
    ax.set_ylabel(f"pressure difference {name} [kPa]")
    ax.set_zlabel(f"velocity {name} [m/s]")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_oracle(runs: dict[str, TimeSeries], lumped: TimeSeries, path: Path | str, link: int = 0) -> Path | None:
    """Boiler pressures and pipe-end velocities of oracle runs against the lumped model."""
    if lumped.empty or not runs:
        logger.warning("nothing to compare; no plot written to %s", path)
        return None
    name = lumped.link_names[link]
    n = len(lumped.vertex_names)
    fig, axes = plt.subplots(n + 2, 1, sharex=True, figsize=(7, 2.2 * (n + 2)))
    for i, vertex in enumerate(lumped.vertex_names):
        axes[i].plot(lumped.t, lumped.p[:, i] / 1e3, "k--", label="lumped")
        for label, ts in runs.items():
            axes[i].plot(ts.t, ts.p[:, i] / 1e3, label=label)
        axes[i].set_ylabel(f"$p_{{{vertex}}}$ [kPa]")
    for k, end in enumerate(("u0", "uL")):
        ax = axes[n + k]
        ax.plot(lumped.t, lumped.u[:, link], "k--", label="lumped")
        for label, ts in runs.items():
            ax.plot(ts.t, ts.extra.get(f"{end}_{name}_mps", ts.u[:, link]), label=label)
        ax.set_ylabel(f"${end[0]}_{{{end[1:]}}}$ [m/s]")
    axes[-1].set_xlabel("time [s]")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return _save(fig, Path(path))


def emit_plots(data, out_dir: Path | str, stem: str, params: SystemParams | None = None, trajectory: TimeSeries | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    if isinstance(data, ManifoldTrace):
        if params is None:
            raise ValueError("manifold plots need the system parameters")
        written = plot_manifold(data, params, out_dir / f"{stem}.png", trajectory)
    else:
        written = plot_time_series(data, out_dir / f"{stem}.png")
    return [written] if written is not None else []
