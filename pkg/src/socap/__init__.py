"""Settlement-level social capital measures and procurement corruption risk."""

from .community import Partition, brute_force_best_partition, fragmentation, louvain, edge_count_modularity, q_max
from .diversity import ego_diversity, internal_diversity, settlement_diversity
from .graph import SocialGraph, build_graph, ego_alters_subgraph, internal_subgraph

__version__ = "0.1.0"
