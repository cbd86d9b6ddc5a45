"""Scenario file: sources, initial conditions, injections, sensors, run options.

Sectioned text like the network file:

    [REACTIONS]          kb_per_day kw_m_per_day kf_m_per_day kr_L_per_mg_day
    [SOURCES]            node species conc_mg_L          (fixed; reservoirs)
    [INITIAL]            element species conc_mg_L       (pipes: all segments)
    [BOOSTERS-SCHEDULE]  time_s booster_id conc_mg_L     (piecewise constant)
    [SENSORS]            sensor_id element species [segment]
    [SIMULATION]         key value   with keys dt_s, duration_s, scheme,
                         record_all, clamp_negative, regrid_times_s
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ScenarioError
from .reactions import ReactionParams

SCHEMES = ("lw", "be", "cn", "moc", "ltd")

_SECTIONS = (
    "REACTIONS",
    "SOURCES",
    "INITIAL",
    "BOOSTERS-SCHEDULE",
    "SENSORS",
    "SIMULATION",
)


@dataclass(frozen=True)
class SensorSpec:
    id: str
    element: str
    species: int
    segment: int = 1


@dataclass
class Scenario:
    reactions: ReactionParams = field(default_factory=ReactionParams)
    sources: list[tuple[str, int, float]] = field(default_factory=list)
    initial: list[tuple[str, int, float]] = field(default_factory=list)
    booster_schedule: list[tuple[float, str, float]] = field(default_factory=list)
    sensors: list[SensorSpec] = field(default_factory=list)
    dt: float = 1.0
    duration: float = 0.0
    scheme: str = "lw"
    record_all: bool = False
    clamp_negative: bool = False
    regrid_times: list[float] = field(default_factory=list)

    def booster_value(self, booster_id: str, t: float) -> float:
        """Piecewise-constant injected concentration in force at time t."""
        value = 0.0
        for when, bid, v in self.booster_schedule:
            if bid == booster_id and when <= t:
                value = v
        return value


def _records(text: str):
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().upper()
            if name not in _SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{name}]")
            section = name
            continue
        if section is None:
            raise ScenarioError(f"line {lineno}: record before any section header")
        yield lineno, section, line.split()


def _species(tok: str, lineno: int) -> int:
    if tok not in ("1", "2"):
        raise ScenarioError(f"line {lineno}: species must be 1 or 2")
    return int(tok)


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    saw_simulation = False
    for lineno, section, toks in _records(text):
        if section == "REACTIONS":
            if len(toks) != 4:
                raise ScenarioError(
                    f"line {lineno}: REACTIONS record needs 4 per-day constants"
                )
            try:
                kb, kw, kf, kr = (float(t) for t in toks)
            except ValueError:
                raise ScenarioError(f"line {lineno}: non-numeric rate") from None
            sc.reactions = ReactionParams.from_per_day(kb, kw, kf, kr)
        elif section == "SOURCES":
            if len(toks) != 3:
                raise ScenarioError(
                    f"line {lineno}: SOURCES record needs: node species conc"
                )
            sc.sources.append((toks[0], _species(toks[1], lineno), float(toks[2])))
        elif section == "INITIAL":
            if len(toks) != 3:
                raise ScenarioError(
                    f"line {lineno}: INITIAL record needs: element species conc"
                )
            sc.initial.append((toks[0], _species(toks[1], lineno), float(toks[2])))
        elif section == "BOOSTERS-SCHEDULE":
            if len(toks) != 3:
                raise ScenarioError(
                    f"line {lineno}: BOOSTERS-SCHEDULE record needs: time id value"
                )
            value = float(toks[2])
            if value < 0:
                raise ScenarioError(f"line {lineno}: negative injection concentration")
            sc.booster_schedule.append((float(toks[0]), toks[1], value))
        elif section == "SENSORS":
            if len(toks) not in (3, 4):
                raise ScenarioError(
                    f"line {lineno}: SENSORS record needs: id element species [segment]"
                )
            seg = int(toks[3]) if len(toks) == 4 else 1
            sc.sensors.append(SensorSpec(toks[0], toks[1], _species(toks[2], lineno), seg))
        elif section == "SIMULATION":
            saw_simulation = True
            if len(toks) != 2:
                raise ScenarioError(f"line {lineno}: SIMULATION record needs: key value")
            key, value = toks
            if key == "dt_s":
                sc.dt = float(value)
            elif key == "duration_s":
                sc.duration = float(value)
            elif key == "scheme":
                if value not in SCHEMES:
                    raise ScenarioError(
                        f"line {lineno}: scheme must be one of {SCHEMES}"
                    )
                sc.scheme = value
            elif key == "record_all":
                sc.record_all = value not in ("0", "false", "no")
            elif key == "clamp_negative":
                sc.clamp_negative = value not in ("0", "false", "no")
            elif key == "regrid_times_s":
                sc.regrid_times = sorted(float(v) for v in value.split(",") if v)
            else:
                raise ScenarioError(f"line {lineno}: unknown SIMULATION key {key!r}")
    if not saw_simulation:
        raise ScenarioError("scenario needs a [SIMULATION] section")
    if sc.dt <= 0 or sc.duration <= 0:
        raise ScenarioError("dt_s and duration_s must be positive")
    sc.booster_schedule.sort(key=lambda r: r[0])
    return sc
