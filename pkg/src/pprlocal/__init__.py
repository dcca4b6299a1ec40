"""Local graph clustering with push-based personalized PageRank.

The package crawls a graph outward from seed nodes, approximates the
personalized PageRank vector locally, applies degree-based score
adjustments to recover the seed's community, and ships block model
generators plus population analytics to validate the method's statistical
behavior.
"""

from .blockmodel import (BlockPpr, DcsbmParams, block_degrees, block_ppr,
                         block_transition, landing_probabilities,
                         ld_ppr_equivalence, make_four_parameter_sbm,
                         make_geometric_sbm, make_power_law_dcsbm,
                         population_adjacency, population_ppr, realize_params,
                         replicate_rng, sample_dcsbm, sample_dcsbm_detailed,
                         sample_power_law_theta, validate_params)
from .clustering import (RankedCluster, adjust, in_out_ratio, rank_cluster,
                         recovery_accuracy, top_cluster)
from .crawl import RemoteGraphClient, RetryPolicy, crawl_ppr
from .errors import (DataError, NumericalError, ParameterError, ParseError,
                     PprLocalError, TransportError, TransportSuspended)
from .experiments import (ExperimentConfig, SensitivityResult,
                          relative_entrywise_error, run_experiment,
                          teleportation_sensitivity)
from .graph import (Graph, GraphAccess, dense_transition, from_arcs,
                    load_edge_list, read_id_map, transition_row,
                    write_edge_list, write_id_map)
from .ppr import (PprResult, PreferenceVector, approximate_ppr,
                  exact_ppr_dense, parse_result, ppr_series, serialize_result,
                  vertex_budget)
from .server import GraphServer, serve_graph

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
