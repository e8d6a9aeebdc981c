//! Shared inputs for the benchmarks.

use pivotud::aligner::SentencePair;
use pivotud::synth::grammar_corpus;
use pivotud::trainer::train_pipeline;
use pivotud::{Document, PipelineModel, TrainConfig};

pub fn corpus(sentences: usize) -> Document {
    grammar_corpus(sentences, 7)
}

/// Each sentence paired with its reversal.
pub fn bitext(sentences: usize) -> Vec<SentencePair> {
    corpus(sentences)
        .sentences
        .iter()
        .map(|s| {
            let src: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
            let tgt: Vec<&str> = src.iter().rev().copied().collect();
            SentencePair::new(&src, &tgt)
        })
        .collect()
}

pub fn model(sentences: usize) -> PipelineModel {
    let cfg = TrainConfig {
        tagger_epochs: 3,
        parser_epochs: 3,
        ..TrainConfig::default()
    };
    train_pipeline(&corpus(sentences), &Document::new(), &cfg).expect("training on synthetic corpus")
}
