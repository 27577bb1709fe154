"""Self-supervised graph encoder pre-training and transfer.

The training objective is subgraph instance discrimination: two random
walk views of the same ego vertex must match each other (against a large
dictionary of other vertices' views) under a GIN encoder fed with
spectral positional features. Pre-trained encoders transfer to node
classification, graph classification, and cross-graph vertex similarity
search, either frozen or fine-tuned.
"""

from .contrast import (ContrastConfig, EncoderPair, MocoQueue, e2e_step, infonce, moco_step,
                       momentum_update)
from .downstream import (GraphDataset, LabeledNodes, LinearHead, embed_graph, embed_nodes,
                         graph_classify, hits_at_k, load_graph_set, load_labels, load_truth,
                         logreg_fit, node_classify, save_graph_set, stratified_folds,
                         top_k_similarity)
from .encoder import GinConfig, GinParams, encode, encode_with_grads, init_params
from .graphs import (Graph, GraphDataError, Subgraph, from_edge_array, induced_subgraph,
                     load_edge_list, r_ego_network)
from .checkpoint import CorruptCheckpointError, load_checkpoint, save_checkpoint
from .optim import AdamState, LrSchedule, adam_step, clip_gradients, lr_at
from .sampling import (AugmentedSubgraph, ContrastBatch, RwrConfig, anonymize, augment,
                       make_batch, rwr_visit_set)
from .spectral import (EigenDecomposition, VertexFeatures, normalized_laplacian,
                       positional_embedding, symmetric_eig, vertex_features)
from .streams import RandomStreams
from .synthetic import (barbell_graph, cycle_graph, desk_corpus, disjoint_union, grid_graph,
                        roles_dataset, star_graph, two_family_dataset)
from .training import (Checkpoint, PretrainConfig, TrainingDivergedError, e2e_desk, e2e_full,
                       instance_discrimination_accuracy, moco_desk, moco_full,
                       params_from_checkpoint, pretrain, random_checkpoint)

__version__ = "0.1.0"
