"""Topology-driven positive pairs for self-supervised graph learning.

Pipeline: per-node ego networks are filtered by Ollivier-Ricci curvature
(or degree), their sublevel persistence diagrams are vectorized into
persistence images, pairs of distant nodes with near-identical images
become contrastive positives, and a two-layer GCN trains jointly on the
classification and contrastive objectives.
"""

from .curvature import (EdgeCurvature, NodeMeasure, TransportPlan, degree_values,
                        edge_curvatures, node_measure, ricci_curvature,
                        solve_transport, wasserstein)
from .errors import ConfigError, DataError, NumericError, ToposslError
from .graph import (EgoNet, Graph, HopDistance, bfs_distances, ego_net,
                    homophily_index, hop_distance, largest_connected_component,
                    load_dataset, load_graph, read_edge_list, read_features,
                    read_labels, write_edge_list, write_features, write_labels)
from .images import (NormalizationSpec, PersistenceImage, PIConfig,
                     fit_normalization, image_matrix, persistence_image,
                     read_pi_store, topo_distance, write_pi_store)
from .mining import (BiasReport, MiningConfig, PositivePairSet,
                     mine_positive_pairs, neighbor_bias_report, read_pairs,
                     write_pairs)
from .persistence import (FiltrationAssignment, PersistenceDiagram, lift_values,
                          persistence_diagram, sublevel_filtration)
from .planted import PlantedConfig, generate_planted_graph
from .training import (Metrics, ModelParams, TrainConfig, forward, joint_train,
                       make_splits, normalize_adjacency, read_checkpoint,
                       sample_negatives, ssl_loss, write_checkpoint)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
