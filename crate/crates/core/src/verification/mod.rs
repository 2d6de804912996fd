//! Embedding extraction and fusion, cosine scoring, and the verification
//! protocols: ROC and TAR@FAR, k-fold accuracy, exhaustive pairing, and
//! score-ranked error lists.

mod embedding;
mod io;
mod metrics;
mod pairing;
mod scatter;

pub use embedding::{cosine_similarity, extract_embedding, extract_embeddings, flip_max, fuse_template, Embedding, Template};
pub use io::{
    parse_embedding_manifest, parse_fold_file, parse_pair_list, read_embedding_store, roc_to_tsv, write_embedding_manifest,
    write_embedding_store, EmbeddingStore, ManifestRow, PairEntry, Report, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use metrics::{
    contiguous_folds, kfold_accuracy, rank_errors, roc_curve, select_threshold, tar_at_far, ErrorRanking, FoldResult, RankedPair,
    RocCurve, RocPoint, ScoreSet, ScoredPair,
};
pub use pairing::{exhaustive_counts_at, exhaustive_histogram, exhaustive_pairs, worker_count, PairHistogram, HISTOGRAM_BINS};
pub use scatter::{angular_scatter, ScatterSummary};
