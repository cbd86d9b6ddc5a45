"""Push a sharp chlorine front through one pipe with every technique.

A 101 m pipe carries water at 0.8 m/s; the reservoir feeds a 2 mg/L step.
Sixty seconds in, the true solution is a clean step front 48 m down the
pipe. Each discretization tells a different story about that front:

* Lax-Wendroff keeps it sharp with a small overshoot,
* backward Euler smears it over tens of metres,
* Crank-Nicolson rings, overshooting the source value by ~25%,
* the method of characteristics tracks it without over- or undershoot,
* the Lagrangian parcel solver (the cross-check reference) is exact here.

Run:  python demos/scheme_showdown.py [out_dir]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import aquanet as aq

LENGTH = 101.0
VELOCITY = 0.8
T_SNAP = 60.0
RADIUS = 0.1


def build_inputs(scheme: str):
    q = VELOCITY * (np.pi * RADIUS**2)
    net = aq.parse_network(
        f"[RESERVOIRS]\nR1\n[JUNCTIONS]\nJ1\n[PIPES]\nPX R1 J1 {LENGTH} {RADIUS}\n"
    )
    sched = aq.load_hydraulics(
        "time_s,element_id,quantity,value\n"
        f"0,PX,flow_m3s,{q!r}\n0,J1,demand_m3s,{q!r}\n0,step,duration_s,200\n",
        net,
    )
    sc = aq.parse_scenario(
        "[SOURCES]\nR1 1 2.0\n[SIMULATION]\n"
        f"dt_s 1\nduration_s {T_SNAP:g}\nscheme {scheme}\nrecord_all true\n"
    )
    return net, sched, sc


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("showdown_out")
    out.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    print(f"front position at t = {T_SNAP:g} s: {VELOCITY * T_SNAP:g} m\n")
    print(f"{'technique':<10}{'max (mg/L)':>12}{'min (mg/L)':>12}")
    for scheme in ("lw", "be", "cn", "moc"):
        net, sched, sc = build_inputs(scheme)
        res = aq.run_simulation(net, sched, sc)
        prof = res.pipe_segments[("PX", 1)][-1]
        x = (np.arange(prof.size) + 0.5) * LENGTH / prof.size
        ax.plot(x, prof, label=scheme)
        print(f"{scheme:<10}{prof.max():>12.4f}{prof.min():>12.4f}")

    x_true = np.linspace(0, LENGTH, 400)
    ax.plot(x_true, np.where(x_true < VELOCITY * T_SNAP, 2.0, 0.0),
            "k--", lw=1, label="exact")
    ax.set_xlabel("distance along pipe (m)")
    ax.set_ylabel("chlorine (mg/L)")
    ax.set_title(f"sharp front after {T_SNAP:g} s, four techniques")
    ax.legend()
    path = out / "front_profiles.png"
    fig.savefig(path, dpi=130)
    print(f"\nwrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
