"""Shape-of-text metrics and constrained edit-vector tooling."""

__version__ = "0.1.0"

from .corpus import EmbeddingTable, TokenSeq, WindowSeq, embed_windows, load_embeddings, tokenize
from .editvec import (
    EditFeature,
    EditVector,
    VmfParams,
    diff_sets,
    edit_feature,
    infer_edit,
    infer_edit_controlled,
    sample_prior,
    sample_vmf,
    vmf_log_density,
)
from .evaluate import DeltaHistogram, EvalReport, achieved_delta, bleu, build_report, delta_histogram, percent_error
from .generate import GenerationResult, IdentityEditor, generate_with_editor, retrieve_generate
from .neighborhood import (
    LshIndex,
    NeighborhoodSpec,
    TrainingPair,
    build_index,
    constrained_neighborhood,
    generate_pairs,
    jaccard_distance,
    query_candidates,
)
from .shape import (
    AttributeScorer,
    Ellipsoid,
    ShapeResult,
    circuitousness,
    mvee,
    score,
    shortest_path_length,
    speed,
    volume,
)
