"""Network topology: parsing, validation, and serialization.

The network file is sectioned plain text. Section headers are bracketed
(``[RESERVOIRS]``, ``[JUNCTIONS]``, ``[TANKS]``, ``[PIPES]``, ``[PUMPS]``,
``[VALVES]``, ``[BOOSTERS]``), one whitespace-separated record per line,
``#`` starts a comment. Record layouts:

    RESERVOIRS  id
    JUNCTIONS   id
    TANKS       id v_init_m3 v_min_m3 v_max_m3
    PIPES       id from to length_m radius_m
    PUMPS       id from to
    VALVES      id from to
    BOOSTERS    id node kind species     (kind: flow_paced | volume_based)

Element ordering inside each section is the canonical state-vector ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NetworkFileError

SECTION_NAMES = (
    "RESERVOIRS",
    "JUNCTIONS",
    "TANKS",
    "PIPES",
    "PUMPS",
    "VALVES",
    "BOOSTERS",
)

BOOSTER_KINDS = ("flow_paced", "volume_based")


@dataclass(frozen=True)
class ReservoirSpec:
    id: str


@dataclass(frozen=True)
class JunctionSpec:
    id: str


@dataclass(frozen=True)
class TankSpec:
    id: str
    v_init: float  # m3
    v_min: float
    v_max: float


@dataclass(frozen=True)
class PipeSpec:
    id: str
    from_node: str
    to_node: str
    length: float  # m
    radius: float  # m

    @property
    def area(self) -> float:
        """Cross-sectional area, m2."""
        import math

        return math.pi * self.radius**2

    @property
    def volume(self) -> float:
        """Full pipe volume, m3."""
        return self.area * self.length


@dataclass(frozen=True)
class PumpSpec:
    id: str
    from_node: str
    to_node: str


@dataclass(frozen=True)
class ValveSpec:
    id: str
    from_node: str
    to_node: str


@dataclass(frozen=True)
class BoosterSpec:
    id: str
    node: str
    kind: str  # flow_paced (junction) or volume_based (tank)
    species: int  # 1 = chlorine, 2 = reactive surrogate


@dataclass
class NetworkTopology:
    reservoirs: list[ReservoirSpec] = field(default_factory=list)
    junctions: list[JunctionSpec] = field(default_factory=list)
    tanks: list[TankSpec] = field(default_factory=list)
    pipes: list[PipeSpec] = field(default_factory=list)
    pumps: list[PumpSpec] = field(default_factory=list)
    valves: list[ValveSpec] = field(default_factory=list)
    boosters: list[BoosterSpec] = field(default_factory=list)

    @property
    def counts(self) -> tuple[int, int, int, int, int, int]:
        """(n_R, n_J, n_TK, n_P, n_M, n_V)."""
        return (
            len(self.reservoirs),
            len(self.junctions),
            len(self.tanks),
            len(self.pipes),
            len(self.pumps),
            len(self.valves),
        )

    @property
    def node_ids(self) -> set[str]:
        return (
            {r.id for r in self.reservoirs}
            | {j.id for j in self.junctions}
            | {t.id for t in self.tanks}
        )

    @property
    def links(self) -> list[PipeSpec | PumpSpec | ValveSpec]:
        return [*self.pipes, *self.pumps, *self.valves]

    def element_ids(self) -> list[str]:
        out: list[str] = []
        for group in (
            self.reservoirs,
            self.junctions,
            self.tanks,
            self.pipes,
            self.pumps,
            self.valves,
            self.boosters,
        ):
            out.extend(e.id for e in group)
        return out

    def node_kind(self, node_id: str) -> str | None:
        if any(r.id == node_id for r in self.reservoirs):
            return "reservoir"
        if any(j.id == node_id for j in self.junctions):
            return "junction"
        if any(t.id == node_id for t in self.tanks):
            return "tank"
        return None


@dataclass(frozen=True)
class Finding:
    element_id: str
    reason: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def _split_records(text: str):
    """Yield (line_number, section, tokens) for every record line."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().upper()
            if name not in SECTION_NAMES:
                raise NetworkFileError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if section is None:
            raise NetworkFileError("record before any section header", lineno)
        yield lineno, section, line.split()


def _float(tok: str, what: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise NetworkFileError(f"bad {what} {tok!r}", lineno) from None


def parse_network(text: str) -> NetworkTopology:
    """Parse a network file into a topology, raising on structural defects."""
    net = NetworkTopology()
    seen: dict[str, int] = {}

    def register(eid: str, lineno: int) -> None:
        if eid in seen:
            raise NetworkFileError(
                f"duplicate id {eid!r} (first defined on line {seen[eid]})", lineno
            )
        seen[eid] = lineno

    for lineno, section, toks in _split_records(text):
        if section == "RESERVOIRS":
            if len(toks) != 1:
                raise NetworkFileError("RESERVOIRS record needs: id", lineno)
            register(toks[0], lineno)
            net.reservoirs.append(ReservoirSpec(toks[0]))
        elif section == "JUNCTIONS":
            if len(toks) != 1:
                raise NetworkFileError("JUNCTIONS record needs: id", lineno)
            register(toks[0], lineno)
            net.junctions.append(JunctionSpec(toks[0]))
        elif section == "TANKS":
            if len(toks) != 4:
                raise NetworkFileError(
                    "TANKS record needs: id v_init_m3 v_min_m3 v_max_m3", lineno
                )
            register(toks[0], lineno)
            v0 = _float(toks[1], "volume", lineno)
            vmin = _float(toks[2], "volume", lineno)
            vmax = _float(toks[3], "volume", lineno)
            net.tanks.append(TankSpec(toks[0], v0, vmin, vmax))
        elif section == "PIPES":
            if len(toks) != 5:
                raise NetworkFileError(
                    "PIPES record needs: id from to length_m radius_m", lineno
                )
            length = _float(toks[3], "length", lineno)
            radius = _float(toks[4], "radius", lineno)
            if length <= 0:
                raise NetworkFileError(f"pipe {toks[0]!r}: nonpositive length", lineno)
            if radius <= 0:
                raise NetworkFileError(f"pipe {toks[0]!r}: nonpositive radius", lineno)
            register(toks[0], lineno)
            net.pipes.append(PipeSpec(toks[0], toks[1], toks[2], length, radius))
        elif section == "PUMPS":
            if len(toks) != 3:
                raise NetworkFileError("PUMPS record needs: id from to", lineno)
            register(toks[0], lineno)
            net.pumps.append(PumpSpec(toks[0], toks[1], toks[2]))
        elif section == "VALVES":
            if len(toks) != 3:
                raise NetworkFileError("VALVES record needs: id from to", lineno)
            register(toks[0], lineno)
            net.valves.append(ValveSpec(toks[0], toks[1], toks[2]))
        elif section == "BOOSTERS":
            if len(toks) != 4:
                raise NetworkFileError(
                    "BOOSTERS record needs: id node kind species", lineno
                )
            if toks[2] not in BOOSTER_KINDS:
                raise NetworkFileError(
                    f"booster kind must be one of {BOOSTER_KINDS}", lineno
                )
            if toks[3] not in ("1", "2"):
                raise NetworkFileError("booster species must be 1 or 2", lineno)
            register(toks[0], lineno)
            net.boosters.append(BoosterSpec(toks[0], toks[1], toks[2], int(toks[3])))

    node_ids = net.node_ids
    for link in net.links:
        for end in (link.from_node, link.to_node):
            if end not in node_ids:
                raise NetworkFileError(
                    f"link {link.id!r} references unknown node {end!r}"
                )
    for b in net.boosters:
        if b.node not in node_ids:
            raise NetworkFileError(
                f"booster {b.id!r} references unknown node {b.node!r}"
            )
    return net


def serialize_network(net: NetworkTopology) -> str:
    """Render a topology back to file text (inverse of parse_network)."""
    lines: list[str] = []
    lines.append("[RESERVOIRS]")
    lines.extend(r.id for r in net.reservoirs)
    lines.append("[JUNCTIONS]")
    lines.extend(j.id for j in net.junctions)
    lines.append("[TANKS]")
    lines.extend(f"{t.id} {t.v_init!r} {t.v_min!r} {t.v_max!r}" for t in net.tanks)
    lines.append("[PIPES]")
    lines.extend(
        f"{p.id} {p.from_node} {p.to_node} {p.length!r} {p.radius!r}"
        for p in net.pipes
    )
    lines.append("[PUMPS]")
    lines.extend(f"{m.id} {m.from_node} {m.to_node}" for m in net.pumps)
    lines.append("[VALVES]")
    lines.extend(f"{v.id} {v.from_node} {v.to_node}" for v in net.valves)
    lines.append("[BOOSTERS]")
    lines.extend(f"{b.id} {b.node} {b.kind} {b.species}" for b in net.boosters)
    return "\n".join(lines) + "\n"


def validate_topology(net: NetworkTopology) -> ValidationReport:
    """Check topology invariants; findings are data, never exceptions."""
    findings: list[Finding] = []
    seen: set[str] = set()
    for eid in net.element_ids():
        if eid in seen:
            findings.append(Finding(eid, "duplicate element id"))
        seen.add(eid)

    node_ids = net.node_ids
    for link in net.links:
        for end in (link.from_node, link.to_node):
            if end not in node_ids:
                findings.append(
                    Finding(link.id, f"endpoint {end!r} is not a known node")
                )

    n_nodes = len(net.reservoirs) + len(net.junctions) + len(net.tanks)
    if n_nodes < 2:
        findings.append(
            Finding("<network>", "fewer than two nodes (need a source and a sink)")
        )

    for t in net.tanks:
        if not (t.v_min <= t.v_init <= t.v_max):
            findings.append(
                Finding(t.id, "initial volume outside [v_min, v_max] bounds")
            )

    for p in net.pipes:
        if p.length <= 0:
            findings.append(Finding(p.id, "nonpositive length"))
        if p.radius <= 0:
            findings.append(Finding(p.id, "nonpositive radius"))

    for b in net.boosters:
        kind = net.node_kind(b.node)
        if b.kind == "flow_paced" and kind != "junction":
            findings.append(
                Finding(b.id, f"flow-paced booster must target a junction, not {kind}")
            )
        elif b.kind == "volume_based" and kind != "tank":
            findings.append(
                Finding(b.id, f"volume-based booster must target a tank, not {kind}")
            )

    return ValidationReport(findings)
