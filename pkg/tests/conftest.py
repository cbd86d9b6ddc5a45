import math
from importlib import resources

import pytest

import aquanet as aq

FIXTURES = resources.files("aquanet") / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def single_pipe_inputs(
    velocity: float = 1.0,
    length: float = 100.0,
    radius: float = 0.1,
    duration: float = 3600.0,
    kb_per_day: float = 0.0,
    kr_per_day: float = 0.0,
    c1: float = 2.0,
    c2: float = 0.0,
    dt: float = 1.0,
    scheme: str = "lw",
):
    """Reservoir -> pipe -> demand junction with an exactly-set velocity."""
    q = velocity * (math.pi * radius**2)
    network = f"""
[RESERVOIRS]
R1
[JUNCTIONS]
J1
[PIPES]
PX R1 J1 {length!r} {radius!r}
"""
    hydraulics = (
        "time_s,element_id,quantity,value\n"
        f"0,PX,flow_m3s,{q!r}\n"
        f"0,J1,demand_m3s,{q!r}\n"
        f"0,step,duration_s,{duration!r}\n"
    )
    scenario = f"""
[REACTIONS]
{kb_per_day!r} 0.0 0.0 {kr_per_day!r}
[SOURCES]
R1 1 {c1!r}
R1 2 {c2!r}
[SENSORS]
S_OUT J1 1
S_OUT2 J1 2
[SIMULATION]
dt_s {dt!r}
duration_s {duration!r}
scheme {scheme}
"""
    net = aq.parse_network(network)
    sched = aq.load_hydraulics(hydraulics, net)
    sc = aq.parse_scenario(scenario)
    return net, sched, sc


@pytest.fixture
def three_node():
    net = aq.parse_network(fixture_text("three_node.net"))
    sched = aq.load_hydraulics(fixture_text("three_node_hydraulics.csv"), net)
    sc = aq.parse_scenario(fixture_text("three_node_scenario.txt"))
    return net, sched, sc


@pytest.fixture
def net1():
    net = aq.parse_network(fixture_text("net1.net"))
    sched = aq.load_hydraulics(fixture_text("net1_hydraulics.csv"), net)
    sc = aq.parse_scenario(fixture_text("net1_scenario.txt"))
    return net, sched, sc
