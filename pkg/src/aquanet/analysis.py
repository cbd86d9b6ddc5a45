"""Result containers and post-processing: pipe averages, relative difference,
analytic checks, CSV export, and plot rendering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RD_FLOOR = 1e-6  # mg/L; reference values below this give an undefined RD


@dataclass
class Diagnostics:
    min_value: dict[int, float] = field(default_factory=lambda: {1: 0.0, 2: 0.0})
    max_solve_residual: float = 0.0
    clamped_entries: int = 0
    warnings: list[str] = field(default_factory=list)
    cfl_ok: bool = True
    cfl_violations: list = field(default_factory=list)


@dataclass
class SimulationResult:
    """Per-element concentration histories on a shared time axis.

    ``series`` maps (element id, species) to one value per recorded time;
    pipe entries are the across-segment average (volume-weighted for the
    Lagrangian oracle). ``pipe_segments`` additionally carries raw segment
    values, shape (n_times, s_i), when the grid stayed fixed for the run.
    ``sensor_times``/``sensor_series`` sample the configured sensors every
    quality step.
    """

    scheme: str
    times: np.ndarray
    series: dict[tuple[str, int], np.ndarray]
    pipe_segments: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    sensor_times: np.ndarray | None = None
    sensor_series: dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    element_order: list[str] = field(default_factory=list)

    def element_series(self, element_id: str, species: int) -> np.ndarray:
        try:
            return self.series[(element_id, species)]
        except KeyError:
            raise KeyError(f"no series for element {element_id!r} species {species}")


def pipe_average_series(result: SimulationResult, pipe_id: str, species: int = 1):
    """Across-segment mean concentration of one pipe at each recorded time."""
    key = (pipe_id, species)
    if key in result.pipe_segments:
        return result.pipe_segments[key].mean(axis=1)
    if key in result.series:
        return result.series[key]  # precomputed (volume-weighted for LTD)
    raise KeyError(f"unknown pipe {pipe_id!r}")


def relative_difference(
    reference: np.ndarray, model: np.ndarray, floor: float = RD_FLOOR
) -> np.ndarray:
    """(ref - model) / ref, with NaN where the reference is below the floor."""
    reference = np.asarray(reference, dtype=float)
    model = np.asarray(model, dtype=float)
    if reference.shape != model.shape:
        raise ValueError("series share no common time axis")
    out = np.full(reference.shape, np.nan)
    ok = np.abs(reference) >= floor
    out[ok] = (reference[ok] - model[ok]) / reference[ok]
    return out


def analytic_plug_flow_decay(
    c0: float, k: float, length: float, v: float, t: float, before: float = 0.0
) -> float:
    """Steady plug-flow outlet value c0 exp(-k L / v) once the front arrives."""
    if v <= 0:
        raise ValueError("velocity must be positive")
    if t < length / v:
        return before
    return c0 * np.exp(-k * length / v)


def export_timeseries(result: SimulationResult, path) -> None:
    """CSV dump: time-major, then element file order, then species.

    Values use 17 significant digits so a re-parse is bit-exact.
    """
    elements = result.element_order or sorted({eid for eid, _ in result.series})
    with open(path, "w") as fh:
        fh.write("time_s,element_id,species,concentration_mg_L\n")
        for ti, t in enumerate(result.times):
            for eid in elements:
                for species in (1, 2):
                    key = (eid, species)
                    if key not in result.series:
                        continue
                    fh.write(
                        f"{t:.17g},{eid},{species},"
                        f"{result.series[key][ti]:.17g}\n"
                    )


def import_timeseries(path) -> tuple[np.ndarray, dict[tuple[str, int], np.ndarray]]:
    """Re-read an export_timeseries file (round-trip check, downstream use)."""
    times: list[float] = []
    raw: dict[tuple[str, int], list[float]] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "time_s,element_id,species,concentration_mg_L":
            raise ValueError("unexpected CSV header")
        for line in fh:
            t_s, eid, species, conc = line.strip().split(",")
            t = float(t_s)
            if not times or t != times[-1]:
                times.append(t)
            raw.setdefault((eid, int(species)), []).append(float(conc))
    return np.array(times), {k: np.array(v) for k, v in raw.items()}


def render_plots(
    results: dict[str, SimulationResult],
    elements: list[str],
    out_dir,
    species: tuple[int, ...] = (1, 2),
) -> list[str]:
    """One image per element, one curve per (scheme, species)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    if not results:
        raise ValueError("no results to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    for eid in elements:
        fig, ax = plt.subplots(figsize=(7, 4))
        found = False
        for scheme, result in results.items():
            for sp in species:
                key = (eid, sp)
                if key not in result.series:
                    continue
                found = True
                label = f"{scheme} sp{sp}"
                ax.plot(result.times / 3600.0, result.series[key], label=label)
        if not found:
            plt.close(fig)
            raise KeyError(f"element {eid!r} not present in any result")
        ax.set_xlabel("time (h)")
        ax.set_ylabel("concentration (mg/L)")
        ax.set_title(eid)
        ax.legend(fontsize=8)
        path = out_dir / f"{eid}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(str(path))
    return written
