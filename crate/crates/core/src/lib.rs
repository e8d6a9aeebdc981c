//! Cross-lingual annotation projection and a native UD pipeline for
//! low-resource languages.

pub mod aligner;
pub mod conllu;
pub mod corpus_stats;
pub mod error;
pub mod evaluation;
pub mod pivot;
pub mod projection;
pub mod synth;
pub mod tokenizer;
pub mod trainer;

pub use conllu::{
    parse_conllu, serialize_conllu, serialize_tsv, CharSpan, Comment, Document, Features,
    MultiwordRange, Sentence, Token, Upos,
};
pub use error::{Error, Result};
pub use tokenizer::{tokenize, TokenizerConfig};
pub use trainer::{AnnotateInput, EvalSetting, PipelineModel, SplitSpec, TrainConfig};
