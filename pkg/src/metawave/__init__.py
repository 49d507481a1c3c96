"""metawave: transmission laboratory for electromagnetic meta-materials.

Closed-form slab coefficients for perfect-conductor effective models,
periodic unit-cell solvers for effective tensors (including
frequency-dependent artificial magnetism), a fine-scale 2D Helmholtz
solver resolving the microstructure, and a two-level homogenized
pipeline, driven by a config-based CLI.
"""

from .cell import (CellMesh, ResonanceCurve, ResonanceSolution,
                   build_cell_mesh, dirichlet_spectrum, inclusion_resonance,
                   pc_permeability_matrix, solve_inclusion_resonance,
                   solve_neumann_cell, solve_pc_permeability,
                   solve_pc_permittivity, sweep_mu_eff)
from .config import ScenarioConfig, config_from_dict, parse_config
from .errors import (AccuracyError, ConsistencyError,
                     DegenerateConfigurationError, FactorizationError,
                     GeometryError, MetawaveError, ParameterError,
                     ResonanceSingularityError, ResourceLimitError,
                     SolverError)
from .geometry import (MacroDomain, Microstructure, PermittivityField,
                       inclusion_indicator, make_microstructure,
                       permittivity_at)
from .helmholtz import (DomainMesh, FieldSolution, IncidentWave,
                        assemble_and_solve, build_domain_mesh,
                        measure_transmission, region_norm)
from .hmm import (HmmResult, HomogenizedModel, compare_fields,
                  effective_model, homogenized_solve,
                  reconstruct_zeroth_order, run_hmm)
from .report import RunReport, run_scenario, run_sweep
from .slab import (CoefficientSet, SlabParams, closed_form_coeffs,
                   field_ansatz_eval, interface_matching_oracle,
                   oracle_coeffs)

__version__ = "0.1.0"
