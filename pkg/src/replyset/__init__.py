"""Reply-set planning, baselines, and evaluation for smart-reply systems.

The package turns ordinary (message, reply) dialogue corpora into
(message, reply set) datasets via offline planning over a retrieval index,
provides diversified-retrieval baselines, and scores any reply-suggestion
system with a weighted ROUGE ensemble and Self-ROUGE.
"""

from .baselines import (
    TopicAssignment,
    assign_topics,
    matching_topk,
    mmr_select,
    read_predictions,
    topic_dedup_select,
    write_predictions,
)
from .corpus import (
    CandidatePool,
    CorpusFormatError,
    DialoguePair,
    build_candidate_pool,
    compute_lm_bias,
    load_dialogue_corpus,
    load_pool,
    normalize_and_tokenize,
    save_pool,
)
from .encoder import (
    HashedTfidfEncoder,
    MatrixFormatError,
    augment_query,
    encode_messages,
    encode_pool,
    fit_encoder,
    load_matrix,
    save_matrix,
)
from .index import RetrievalIndex, ScoredHit, batch_top_n, select_top, top_n
from .metrics import (
    EvalReport,
    RougeScores,
    evaluate,
    max_rouge_over_set,
    rouge_n,
    self_rouge,
    weighted_rouge,
    write_report,
)
from .planner import (
    BootstrapRecord,
    PlannerConfig,
    ReplySet,
    SimulatedUser,
    bootstrap_dataset,
    expected_similarity,
    greedy_select,
    iter_bootstrap,
    iter_bootstrap_from_matrices,
    plan_from_vectors,
    plan_reply_set,
    read_bootstrap_file,
    set_similarity,
    simulate_user,
    term_f1,
    write_bootstrap_file,
)

__all__ = [
    "BootstrapRecord",
    "CandidatePool",
    "CorpusFormatError",
    "DialoguePair",
    "EvalReport",
    "HashedTfidfEncoder",
    "MatrixFormatError",
    "PlannerConfig",
    "ReplySet",
    "RetrievalIndex",
    "RougeScores",
    "ScoredHit",
    "SimulatedUser",
    "TopicAssignment",
    "assign_topics",
    "augment_query",
    "batch_top_n",
    "bootstrap_dataset",
    "build_candidate_pool",
    "compute_lm_bias",
    "encode_messages",
    "encode_pool",
    "evaluate",
    "expected_similarity",
    "fit_encoder",
    "greedy_select",
    "iter_bootstrap",
    "iter_bootstrap_from_matrices",
    "load_dialogue_corpus",
    "load_matrix",
    "load_pool",
    "matching_topk",
    "max_rouge_over_set",
    "mmr_select",
    "normalize_and_tokenize",
    "plan_from_vectors",
    "plan_reply_set",
    "read_bootstrap_file",
    "read_predictions",
    "rouge_n",
    "save_matrix",
    "save_pool",
    "select_top",
    "self_rouge",
    "set_similarity",
    "simulate_user",
    "term_f1",
    "top_n",
    "topic_dedup_select",
    "weighted_rouge",
    "write_bootstrap_file",
    "write_predictions",
    "write_report",
]

__version__ = "0.1.0"
