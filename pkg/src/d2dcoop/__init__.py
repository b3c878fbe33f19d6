"""Coalitional-game analysis and simulation of D2D relay content distribution."""

from .model import (AssignmentPlan, Coalition, CoalitionValue, FileSpec,
                    NetworkInstance, SymmetricParams, coalition_value,
                    destination_receive_energy, file_transfer_energy,
                    instance_from_json, instance_to_json, multicast_rate,
                    relay_download_energy, relay_multicast_energy,
                    special_case_cost, standalone_download_energy,
                    symmetric_instance, validate_plan)
from .game import (CoreResult, PayoffProfile, ValueOracle, check_convex,
                   check_core, check_superadditive, marginal_vector)
from .optimizer import (BinaryAssignment, CapExceededError, HeuristicResult,
                        InfeasibleError, assignment_cost, greedy_assign,
                        greedy_global_assign, random_assign, solve_model_a_lp,
                        solve_model_b_exact)
from .simplex import LpProblem, LpSolution, SimplexCycleError, solve_lp
from .stability import (ClusterSymmetry, Collection, MergeSplitResult,
                        Partition, StabilityVerdict, ClusterConditionsReport,
                        check_cluster_stability_conditions, collection_under_partition,
                        enumerate_best_partition, is_dc_stable,
                        merge_and_split, partition_value)
from .scenario import (ChannelParams, ScenarioConfig, build_instance,
                       cluster_partition, make_clustered_game,
                       sample_demands, sample_positions, realize_rates,
                       zipf_probabilities)

__version__ = "0.1.0"
