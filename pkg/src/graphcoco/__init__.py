"""Self-supervised graph representation learning with embedding erasing."""

from .augment import (
    AugmentKind,
    AugmentPolicy,
    AugmentSpec,
    apply_augment,
    edge_add,
    edge_drop,
    feature_mask,
    node_drop,
    sample_pair,
    subgraph,
)
from .cocoloss import (
    BatchViews,
    LossConfig,
    build_mask,
    erase,
    infonce_batch,
    infonce_grad_analytic,
    minmax_scale,
)
from .encoder import (
    GinEncoder,
    GinLayer,
    ProjectionHead,
    embed_graph,
    gin_forward,
    init_encoder,
    init_head,
    project,
    readout,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    GraphCocoError,
    NumericError,
    ParseError,
    ShapeError,
)
from .estimator import GraphCoCoEmbedding, LinearProbe
from .evaluation import (
    EmbeddingTable,
    ProbeReport,
    embed_all,
    embed_rows,
    fit_probe,
    gradient_concentration,
    highlighted_overlap,
    linear_probe_cv,
    positive_pair_overlap,
    stratified_folds,
)
from .graphdata import (
    Graph,
    GraphDataset,
    degree_features,
    load_tudataset,
    save_tudataset,
    synth_two_class,
)
from .ndiff import Tape, Tensor, backward, finite_diff, tensor
from .trainer import (
    AdamState,
    Checkpoint,
    EraseMode,
    TrainConfig,
    adam_step,
    load_checkpoint,
    masks_for_mode,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AugmentKind",
    "AugmentPolicy",
    "AugmentSpec",
    "BatchViews",
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "EmbeddingTable",
    "EraseMode",
    "GinEncoder",
    "GinLayer",
    "Graph",
    "GraphCoCoEmbedding",
    "GraphCocoError",
    "GraphDataset",
    "LinearProbe",
    "LossConfig",
    "NumericError",
    "ParseError",
    "ProbeReport",
    "ProjectionHead",
    "ShapeError",
    "Tape",
    "Tensor",
    "TrainConfig",
    "adam_step",
    "apply_augment",
    "backward",
    "build_mask",
    "degree_features",
    "edge_add",
    "edge_drop",
    "embed_all",
    "embed_graph",
    "embed_rows",
    "fit_probe",
    "erase",
    "feature_mask",
    "finite_diff",
    "gin_forward",
    "gradient_concentration",
    "highlighted_overlap",
    "infonce_batch",
    "infonce_grad_analytic",
    "init_encoder",
    "init_head",
    "linear_probe_cv",
    "load_checkpoint",
    "load_tudataset",
    "masks_for_mode",
    "minmax_scale",
    "node_drop",
    "positive_pair_overlap",
    "project",
    "readout",
    "sample_pair",
    "save_checkpoint",
    "save_tudataset",
    "stratified_folds",
    "subgraph",
    "synth_two_class",
    "tensor",
    "train",
]
