"""Two-species water-quality transport in drinking-water distribution networks.

Assembles and steps sparse time-varying state-space systems
E x(t+dt) = A x(t) + B u(t) + f for chlorine and a reactive surrogate under
four pipe discretizations (Lax-Wendroff, backward Euler, Crank-Nicolson,
method of characteristics), cross-validated by an independent Lagrangian
time-driven solver.
"""

from .analysis import (
    Diagnostics,
    SimulationResult,
    analytic_plug_flow_decay,
    export_timeseries,
    import_timeseries,
    pipe_average_series,
    relative_difference,
    render_plots,
)
from .engine import (
    MeasurementMap,
    SpeciesState,
    apply_flow_reversal,
    initial_state,
    measure_outputs,
    run_simulation,
)
from .errors import (
    AquanetError,
    CflViolationError,
    HydraulicsError,
    MassBalanceError,
    NetworkFileError,
    ScenarioError,
    SolverError,
)
from .hydraulics import (
    CflReport,
    CourantField,
    DiscretizationGrid,
    HydraulicSchedule,
    HydraulicStep,
    build_fixed_grid,
    cfl_report,
    courant_numbers,
    load_hydraulics,
    mean_velocity,
    pipe_velocities,
)
from .ltd import LtdPipeState, LtdSegment, ltd_pipe_step, ltd_run
from .network import (
    NetworkTopology,
    parse_network,
    serialize_network,
    validate_topology,
)
from .reactions import (
    BulkModelSpec,
    ReactionParams,
    bulk_model_rate,
    pipe_decay_coefficient,
    tank_decay_coefficient,
)
from .scenario import Scenario, SensorSpec, parse_scenario
from .schemes import (
    AssemblyContext,
    StateLayout,
    StateSpaceSystem,
    assemble,
    assemble_be,
    assemble_cn,
    assemble_lw,
    assemble_moc,
    lw_weights,
    make_context,
)

__version__ = "0.1.0"
