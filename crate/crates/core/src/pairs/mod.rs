//! Mention-pair features, candidate windows and the pair scorer.

pub mod features;
pub mod scorer;
pub mod train;

pub use features::{
    candidate_antecedents, encode_pair, mention_feature_vector, pair_feature_vector, PairFeatureLayout,
    PairFeatures, Segment,
};
pub use scorer::{PairScorerConfig, PairScorerModel};
pub use train::{
    collect_pairs, evaluate_pair_scorer, evaluate_pair_scores, train_pair_scorer, PairDataset, PairEvaluation,
    PairTrainConfig, TrainedPairScorer,
};
