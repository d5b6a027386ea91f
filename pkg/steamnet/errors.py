from __future__ import annotations


class SteamNetError(Exception):
    exit_code = 1


class ConfigError(SteamNetError, ValueError):
    exit_code = 2

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None) -> None:
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NetworkError(SteamNetError, ValueError):
    exit_code = 2


class NumericalError(SteamNetError, RuntimeError):
    exit_code = 3


class ThermoRangeError(NumericalError, ValueError):
    def __init__(
        self,
        pressure: float,
        bound: str,
        limit: float,
        *,
        vertex: str | None = None,
        time_s: float | None = None,
    ) -> None:
        self.pressure = pressure
        self.bound = bound
        self.limit = limit
        self.vertex = vertex
        self.time_s = time_s
        side = "below" if bound == "p_min" else "above"
        msg = f"pressure {pressure:.6g} Pa is {side} {bound}={limit:.6g} Pa"
        if vertex is not None:
            msg += f" at vertex '{vertex}'"
        if time_s is not None:
            msg += f" (t={time_s:.6g} s)"
        super().__init__(msg)

    def at(self, *, vertex: str | None = None, time_s: float | None = None) -> "ThermoRangeError":
        return ThermoRangeError(
            self.pressure,
            self.bound,
            self.limit,
            vertex=vertex if vertex is not None else self.vertex,
            time_s=time_s if time_s is not None else self.time_s,
        )


class StiffnessError(NumericalError):
    pass


class EquilibriumError(NumericalError):
    def __init__(self, message: str, *, residual: float | None = None) -> None:
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class OracleError(NumericalError):
    def __init__(self, message: str, *, link: str | None = None, cell: int | None = None) -> None:
        self.link = link
        self.cell = cell
        if link is not None:
            message = f"{message} in pipe '{link}'" + (f" cell {cell}" if cell is not None else "")
        super().__init__(message)


class ValidityError(SteamNetError):
    exit_code = 4
