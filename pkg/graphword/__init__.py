from .ingest import (build_graph, make_splits, parse_interactions,
                     sample_direct_candidates)
from .propagation import (PropagationConfig, aggregate_omega,
                          influence_coefficient, init_embeddings,
                          propagate_layer, propagate_matrix,
                          random_feature_propagation)
from .wholeword import (WholeWordScheme, build_direct_prompt,
                        build_sequential_prompt, lookup_wholeword,
                        tokenize_id)
from .ranking import RankedList, rerank

__version__ = '0.1.0'

__all__ = ['build_graph', 'make_splits', 'parse_interactions',
           'sample_direct_candidates', 'PropagationConfig', 'aggregate_omega',
           'influence_coefficient', 'init_embeddings', 'propagate_layer',
           'propagate_matrix', 'random_feature_propagation',
           'WholeWordScheme', 'build_direct_prompt', 'build_sequential_prompt',
           'lookup_wholeword', 'tokenize_id', 'RankedList', 'rerank']
