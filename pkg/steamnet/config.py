"""Run configuration: one JSON document with network, references, scenario, solver, output and analysis sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from steamnet.content import load_preset
from steamnet.errors import ConfigError
from steamnet.lumped_model import DEFAULT_REFERENCES, ReferenceQuantities, SystemParams
from steamnet.network import DEFAULT_PIPE, Link, Network, PipeParams, Vertex, validate
from steamnet.schedules import schedule_from_dict
from steamnet.simulate import DEFAULT_SOLVER, MODELS, Scenario, SolverOptions
from steamnet.thermo import DEFAULT_BOILER, BoilerParams

DEFAULT_OUTPUT = {"directory": "out", "sample_dt": 0.5, "plots": True}
DEFAULT_ORACLE = {
    "cells": 50,
    "linear_loss_W_per_m": [0.0],
    "window": [0.0, 60.0],
    "tol_velocity": 0.05,
    "tol_pressure": 0.01,
}
DEFAULT_MANIFOLD = {"p_min_Pa": 780e3, "p_max_Pa": 820e3, "samples": 9, "t_s": None}


@dataclass(frozen=True)
class OutputOptions:
    directory: str = DEFAULT_OUTPUT["directory"]
    sample_dt: float = DEFAULT_OUTPUT["sample_dt"]
    plots: bool = DEFAULT_OUTPUT["plots"]


@dataclass(frozen=True)
class OracleOptions:
    cells: int = DEFAULT_ORACLE["cells"]
    linear_loss_W_per_m: tuple[float, ...] = (0.0,)
    window: tuple[float, float] = (0.0, 60.0)
    tol_velocity: float = DEFAULT_ORACLE["tol_velocity"]
    tol_pressure: float = DEFAULT_ORACLE["tol_pressure"]


@dataclass(frozen=True)
class ManifoldOptions:
    p_min_Pa: float = DEFAULT_MANIFOLD["p_min_Pa"]
    p_max_Pa: float = DEFAULT_MANIFOLD["p_max_Pa"]
    samples: int = DEFAULT_MANIFOLD["samples"]
    t_s: float | None = None


@dataclass(frozen=True, eq=False)
class Config:
    name: str
    network: Network
    references: ReferenceQuantities
    epsilon: float | None
    scenario: Scenario
    solver: SolverOptions
    model: str
    output: OutputOptions
    oracle: OracleOptions = field(default_factory=OracleOptions)
    manifold: ManifoldOptions = field(default_factory=ManifoldOptions)

    def system_params(self) -> SystemParams:
        return SystemParams(
            network=self.network,
            heat_inputs=list(self.scenario.heat_inputs),
            loads=list(self.scenario.loads),
            refs=self.references,
            epsilon=self.epsilon,
        )


def _section(raw, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"expected an object, got {type(raw).__name__}", field=path)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'", field=f"{path}.{unknown[0]}" if path else unknown[0])
    missing = sorted(required - set(raw))
    if missing:
        raise ConfigError(f"missing key '{missing[0]}'", field=f"{path}.{missing[0]}" if path else missing[0])
    return raw


def _number(raw, path: str, positive: bool = False, allow_none: bool = False):
    if raw is None and allow_none:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"expected a number, got {raw!r}", field=path)
    value = float(raw)
    if not np.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"expected a positive finite number, got {raw!r}", field=path)
    return value


def _params(raw, path: str, cls, default):
    fields = list(default.__dataclass_fields__)
    body = _section(raw if raw is not None else {}, path, set(fields))
    values = {name: _number(body.get(name, getattr(default, name)), f"{path}.{name}") for name in fields}
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), field=path) from None


def _parse_network(raw) -> Network:
    body = _section(raw, "network", {"vertices", "links"}, {"vertices", "links"})
    vertices = []
    for i, item in enumerate(body["vertices"]):
        path = f"network.vertices[{i}]"
        v = _section(item, path, {"name", "boiler"}, {"name"})
        vertices.append(Vertex(str(v["name"]), _params(v.get("boiler"), f"{path}.boiler", BoilerParams, DEFAULT_BOILER)))
    links = []
    for j, item in enumerate(body["links"]):
        path = f"network.links[{j}]"
        link = _section(item, path, {"name", "tail", "head", "pipe"}, {"name", "tail", "head"})
        links.append(
            Link(
                str(link["name"]),
                str(link["tail"]),
                str(link["head"]),
                _params(link.get("pipe"), f"{path}.pipe", PipeParams, DEFAULT_PIPE),
            )
        )
    net = Network(tuple(vertices), tuple(links))
    problems = validate(net)
    if problems:
        raise ConfigError(problems[0]["detail"], field="network")
    return net


def _per_vertex(raw, path: str, names: list[str], parse):
    """A {vertex: value} mapping, or one value shared by every vertex."""
    if isinstance(raw, dict) and raw and set(raw) <= set(names):
        missing = [n for n in names if n not in raw]
        if missing:
            raise ConfigError("needs one entry per vertex", field=f"{path}.{missing[0]}")
        return [parse(raw[name], f"{path}.{name}") for name in names]
    return [parse(raw, f"{path}.{name}") for name in names]


def _schedule(raw, path: str):
    try:
        return schedule_from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), field=path) from None


def _parse_scenario(raw, net: Network) -> Scenario:
    body = _section(raw, "scenario", {"name", "t_span", "heat_inputs", "loads", "initial"}, {"t_span", "heat_inputs", "loads"})
    span = body["t_span"]
    if not isinstance(span, list) or len(span) != 2:
        raise ConfigError("expected [t_start, t_end]", field="scenario.t_span")
    t0, t1 = (_number(x, "scenario.t_span") for x in span)
    if t1 < t0:
        raise ConfigError("t_end precedes t_start", field="scenario.t_span")
    names = net.vertex_names
    initial = _section(body.get("initial", {}), "scenario.initial", {"p_Pa", "u_mps"})
    p_init = _per_vertex(initial.get("p_Pa", DEFAULT_REFERENCES.p_r), "scenario.initial.p_Pa", names, lambda v, p: _number(v, p, True))
    u_raw = initial.get("u_mps", 0.0)
    if isinstance(u_raw, dict):
        unknown = sorted(set(u_raw) - set(net.link_names))
        if unknown:
            raise ConfigError("unknown link", field=f"scenario.initial.u_mps.{unknown[0]}")
        u_init = [_number(u_raw.get(name, 0.0), f"scenario.initial.u_mps.{name}") for name in net.link_names]
    else:
        u_init = [_number(u_raw, "scenario.initial.u_mps")] * net.m
    return Scenario(
        heat_inputs=_per_vertex(body["heat_inputs"], "scenario.heat_inputs", names, _schedule),
        loads=_per_vertex(body["loads"], "scenario.loads", names, _schedule),
        t_span=(t0, t1),
        initial_p_Pa=np.array(p_init),
        initial_u_mps=np.array(u_init, dtype=float),
        name=str(body.get("name", "custom")),
    )


def parse_config(raw: dict, name: str = "config") -> Config:
    body = _section(raw, "", {"name", "network", "references", "scenario", "solver", "output", "oracle", "manifold"}, {"network", "scenario"})
    net = _parse_network(body["network"])

    ref_raw = _section(body.get("references", {}), "references", {"L_r", "u_r", "p_r", "rho_r", "d_r", "epsilon"})
    refs = _params({k: v for k, v in ref_raw.items() if k != "epsilon"}, "references", ReferenceQuantities, DEFAULT_REFERENCES)
    epsilon = _number(ref_raw.get("epsilon"), "references.epsilon", positive=True, allow_none=True)

    solver_raw = _section(body.get("solver", {}), "solver", {"rtol", "atol", "max_step", "model"})
    model = solver_raw.get("model", "full")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}", field="solver.model")
    max_step = _number(solver_raw.get("max_step"), "solver.max_step", positive=True, allow_none=True)
    out_raw = _section(body.get("output", {}), "output", set(DEFAULT_OUTPUT))
    sample_dt = _number(out_raw.get("sample_dt", DEFAULT_OUTPUT["sample_dt"]), "output.sample_dt", positive=True)
    solver = SolverOptions(
        rtol=_number(solver_raw.get("rtol", DEFAULT_SOLVER.rtol), "solver.rtol", positive=True),
        atol=_number(solver_raw.get("atol", DEFAULT_SOLVER.atol), "solver.atol", positive=True),
        max_step=float("inf") if max_step is None else max_step,
        sample_dt=sample_dt,
    )
    output = OutputOptions(
        directory=str(out_raw.get("directory", DEFAULT_OUTPUT["directory"])),
        sample_dt=sample_dt,
        plots=bool(out_raw.get("plots", DEFAULT_OUTPUT["plots"])),
    )

    oracle_raw = _section(body.get("oracle", {}), "oracle", set(DEFAULT_ORACLE))
    cells = oracle_raw.get("cells", DEFAULT_ORACLE["cells"])
    if isinstance(cells, bool) or not isinstance(cells, int) or cells < 10:
        raise ConfigError("expected an integer of at least 10", field="oracle.cells")
    losses = oracle_raw.get("linear_loss_W_per_m", DEFAULT_ORACLE["linear_loss_W_per_m"])
    losses = losses if isinstance(losses, list) else [losses]
    window = oracle_raw.get("window", DEFAULT_ORACLE["window"])
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("expected [t_start, t_end]", field="oracle.window")
    oracle = OracleOptions(
        cells=cells,
        linear_loss_W_per_m=tuple(_number(x, "oracle.linear_loss_W_per_m") for x in losses),
        window=tuple(_number(x, "oracle.window") for x in window),
        tol_velocity=_number(oracle_raw.get("tol_velocity", DEFAULT_ORACLE["tol_velocity"]), "oracle.tol_velocity", True),
        tol_pressure=_number(oracle_raw.get("tol_pressure", DEFAULT_ORACLE["tol_pressure"]), "oracle.tol_pressure", True),
    )

    man_raw = _section(body.get("manifold", {}), "manifold", set(DEFAULT_MANIFOLD))
    samples = man_raw.get("samples", DEFAULT_MANIFOLD["samples"])
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        raise ConfigError("expected a positive integer", field="manifold.samples")
    manifold = ManifoldOptions(
        p_min_Pa=_number(man_raw.get("p_min_Pa", DEFAULT_MANIFOLD["p_min_Pa"]), "manifold.p_min_Pa", True),
        p_max_Pa=_number(man_raw.get("p_max_Pa", DEFAULT_MANIFOLD["p_max_Pa"]), "manifold.p_max_Pa", True),
        samples=samples,
        t_s=_number(man_raw.get("t_s"), "manifold.t_s", allow_none=True),
    )

    scenario = _parse_scenario(body["scenario"], net)
    return Config(
        name=str(body.get("name", name)),
        network=net,
        references=refs,
        epsilon=epsilon,
        scenario=scenario,
        solver=solver,
        model=model,
        output=output,
        oracle=oracle,
        manifold=manifold,
    )


def config_to_dict(cfg: Config) -> dict:
    refs = cfg.references
    scenario = cfg.scenario
    return {
        "name": cfg.name,
        "network": {
            "vertices": [
                {"name": v.name, "boiler": {"V_s": v.boiler.V_s, "V_w": v.boiler.V_w, "m_t": v.boiler.m_t, "C_p": v.boiler.C_p}}
                for v in cfg.network.vertices
            ],
            "links": [
                {"name": l.name, "tail": l.tail, "head": l.head, "pipe": {"L": l.pipe.L, "d": l.pipe.d, "lam": l.pipe.lam}}
                for l in cfg.network.links
            ],
        },
        "references": {
            "L_r": refs.L_r,
            "u_r": refs.u_r,
            "p_r": refs.p_r,
            "rho_r": refs.rho_r,
            "d_r": refs.d_r,
            "epsilon": cfg.epsilon,
        },
        "scenario": {
            "name": scenario.name,
            "t_span": list(scenario.t_span),
            "heat_inputs": {n: s.to_dict() for n, s in zip(cfg.network.vertex_names, scenario.heat_inputs)},
            "loads": {n: s.to_dict() for n, s in zip(cfg.network.vertex_names, scenario.loads)},
            "initial": {
                "p_Pa": {n: float(p) for n, p in zip(cfg.network.vertex_names, scenario.initial_p_Pa)},
                "u_mps": {n: float(u) for n, u in zip(cfg.network.link_names, scenario.initial_u_mps)},
            },
        },
        "solver": {
            "rtol": cfg.solver.rtol,
            "atol": cfg.solver.atol,
            "max_step": None if np.isinf(cfg.solver.max_step) else cfg.solver.max_step,
            "model": cfg.model,
        },
        "output": {"directory": cfg.output.directory, "sample_dt": cfg.output.sample_dt, "plots": cfg.output.plots},
        "oracle": {
            "cells": cfg.oracle.cells,
            "linear_loss_W_per_m": list(cfg.oracle.linear_loss_W_per_m),
            "window": list(cfg.oracle.window),
            "tol_velocity": cfg.oracle.tol_velocity,
            "tol_pressure": cfg.oracle.tol_pressure,
        },
        "manifold": {
            "p_min_Pa": cfg.manifold.p_min_Pa,
            "p_max_Pa": cfg.manifold.p_max_Pa,
            "samples": cfg.manifold.samples,
            "t_s": cfg.manifold.t_s,
        },
    }


def load_config(path: Path | str) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}", field="config") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} at column {exc.colno}", line=exc.lineno) from None
    return parse_config(raw, name=path.stem)


def config_from_preset(name: str) -> Config:
    return parse_config(load_preset(name), name=name)


def dump_config(cfg: Config, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")
    return path
