"""Sample-complexity bounds for ReLU RNNs and a desk-scale ECCN learning pipeline."""

from .bounds import (
    BoundReport,
    RnnShape,
    breakeven_ratio,
    op_count_multi,
    op_count_single,
    param_count_multi,
    param_count_single,
    sample_complexity_from_pdim,
    sample_complexity_graph,
    sample_complexity_multi,
    sample_complexity_single,
    vcdim_bound,
)
from .graphs import FlatEncoding, Graph, er_generate, flatten, graph_space_size, unflatten
from .solvers import EdgeCliqueCover, exact_eccn, kellerman_cover, maximal_cliques, verify_cover

__version__ = "0.1.0"
