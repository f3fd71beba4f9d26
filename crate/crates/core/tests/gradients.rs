mod common;

use common::grad_cases::*;

fn assert_within(name: &str, worst: f64) {
    assert!(worst <= TOLERANCE, "{name}: max relative error {worst:e}");
}

#[test]
fn linear_layer() {
    assert_within("linear", worst_over_seeds(LinearCase::new));
}

#[test]
fn lstm_layer_both_directions() {
    assert_within("lstm", worst_over_seeds(LstmCase::new));
}

#[test]
fn bilstm_stack_with_dropout_mask() {
    assert_within("bilstm", worst_over_seeds(BiLstmCase::new));
}

#[test]
fn feature_encoders() {
    assert_within("features", worst_over_seeds(|s| HerCase::new(s, HerPart::FeatureEncoders)));
}

#[test]
fn merge_and_output_head() {
    assert_within("head", worst_over_seeds(|s| HerCase::new(s, HerPart::Head)));
}

#[test]
fn full_entailment_model() {
    assert_within("her", worst_over_seeds(|s| HerCase::new(s, HerPart::Everything)));
}

#[test]
fn self_attention_pooling() {
    assert_within("attention", worst_over_seeds(AttentionCase::new));
}

#[test]
fn attention_classifier() {
    assert_within("attention classifier", worst_over_seeds(AttentionClassifierCase::new));
}
