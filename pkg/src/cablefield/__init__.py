"""Level-set percolation of the Gaussian free field on weighted graphs."""

__version__ = "0.1.0"

from .graphs import (BoxInfo, GraphError, WeightedGraph, build_from_edge_list,
                     build_lattice_box, delete_set, doob_transform, refine)
from .regions import Region, RegionError, resolve_region
from .potential import (EquilibriumMeasure, GreenMatrix, HittingVector,
                        IdentityReport, PotentialError, check_identities,
                        doob_capacity_identity, equilibrium_measure, green,
                        hitting_before, hitting_probability, hitting_vector)
from .sampling import (ClusterAtLevel, FieldSample, SamplerError, cluster_of,
                       conditional_sample, green_gap, sample_field)
from .formulas import (ExponentReferences, FormulaError, cap_transform_density,
                       exponent_references, lupu_arcsin, lupu_arctan,
                       two_point)
from .experiments import (ExperimentConfig, ExperimentError, ExperimentResult,
                          run_annulus_joint, run_cap_law, run_cap_tail,
                          run_experiment, run_green_gap_cdf, run_one_arm,
                          run_two_point)
from .stats import fit_loglog, wilson_interval
from .rng import SampleStream
