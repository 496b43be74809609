//! Nested mention detection with one BIOES tagger per nesting level.

pub mod bioes;
pub mod crf;
pub mod detect;
pub mod encoder;
pub mod tagger;
pub mod train;

pub use bioes::{bioes_decode, bioes_encode, DecodedSpans, Label};
pub use detect::{detect_mentions, load_tagger, save_tagger, Detection};
pub use encoder::EncoderKind;
pub use tagger::{TaggerConfig, TaggerModel};
pub use train::{evaluate_mentions, train_tagger, write_training_log, EpochLog, TaggerTrainConfig, TrainedTagger};
