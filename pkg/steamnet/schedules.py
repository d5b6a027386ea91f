"""Heat-input and load schedules: right-continuous step functions of time in seconds."""

from __future__ import annotations

import math


class Schedule:
    def value(self, t_s: float) -> float:
        raise NotImplementedError

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class PiecewiseConstant(Schedule):
    def __init__(self, points: list[tuple[float, float]]) -> None:
        if not points:
            raise ValueError("a piecewise-constant schedule needs at least one (t_start, value) point")
        starts = [float(t) for t, _ in points]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"schedule breakpoints must be strictly increasing, got {starts}")
        self.points = [(float(t), float(v)) for t, v in points]

    def value(self, t_s: float) -> float:
        current = self.points[0][1]
        for start, value in self.points:
            if t_s >= start:
                current = value
            else:
                break
        return current

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        return [t for t, _ in self.points[1:] if t0 < t < t1]

    def to_dict(self) -> dict:
        if len(self.points) == 1:
            return {"constant": self.points[0][1]}
        return {"steps": [[t, v] for t, v in self.points]}

    def __repr__(self) -> str:
        return f"PiecewiseConstant({self.points!r})"


class SquareWave(Schedule):
    """`high` for the first duty*period of each period (from `phase`), `low` otherwise."""

    def __init__(self, period: float, high: float, low: float, duty: float = 0.5, phase: float = 0.0) -> None:
        if not period > 0:
            raise ValueError(f"square-wave period must be positive, got {period}")
        if not 0.0 <= duty <= 1.0:
            raise ValueError(f"square-wave duty must lie in [0, 1], got {duty}")
        self.period = float(period)
        self.high = float(high)
        self.low = float(low)
        self.duty = float(duty)
        self.phase = float(phase)

    def value(self, t_s: float) -> float:
        if self.duty <= 0.0:
            return self.low
        if self.duty >= 1.0:
            return self.high
        offset = (t_s - self.phase) % self.period
        return self.high if offset < self.duty * self.period else self.low

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        if self.duty <= 0.0 or self.duty >= 1.0:
            return []
        out = []
        k = math.floor((t0 - self.phase) / self.period)
        while True:
            base = self.phase + k * self.period
            if base >= t1:
                break
            for t in (base, base + self.duty * self.period):
                if t0 < t < t1:
                    out.append(t)
            k += 1
        return out

    def to_dict(self) -> dict:
        return {
            "square_wave": {
                "period": self.period,
                "high": self.high,
                "low": self.low,
                "duty": self.duty,
                "phase": self.phase,
            }
        }

    def __repr__(self) -> str:
        return f"SquareWave(period={self.period}, high={self.high}, low={self.low}, duty={self.duty}, phase={self.phase})"


def constant(value: float) -> PiecewiseConstant:
    return PiecewiseConstant([(0.0, value)])


def schedule_from_dict(raw) -> Schedule:
    """Build a schedule from its config form: a number, {"constant"}, {"steps"} or {"square_wave"}."""
    if isinstance(raw, (int, float)):
        return constant(float(raw))
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ValueError(f"schedule must be a number or a single-key object, got {raw!r}")
    kind, body = next(iter(raw.items()))
    if kind == "constant":
        return constant(float(body))
    if kind == "steps":
        return PiecewiseConstant([(float(t), float(v)) for t, v in body])
    if kind == "square_wave":
        allowed = {"period", "high", "low", "duty", "phase"}
        unknown = set(body) - allowed
        if unknown:
            raise ValueError(f"unknown square_wave keys: {sorted(unknown)}")
        return SquareWave(**{k: float(v) for k, v in body.items()})
    raise ValueError(f"unknown schedule kind '{kind}'")


def merged_breakpoints(schedules: list[Schedule], t0: float, t1: float) -> list[float]:
    points = set()
    for schedule in schedules:
        points.update(schedule.breakpoints(t0, t1))
    return sorted(points)
