/// Numerically stable two-class softmax.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Softmax cross-entropy over two logits. Returns the loss and its
/// gradient with respect to the logits.
pub fn binary_class_loss(logits: [f64; 2], label: usize) -> (f64, [f64; 2]) {
    debug_assert!(label < 2);
    let p = softmax2(logits);
    // log-sum-exp minus the true logit; never negative, finite for any finite logits
    let m = logits[0].max(logits[1]);
    let loss = (m - logits[label]) + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let mut grad = p;
    grad[label] -= 1.0;
    (loss, grad)
}

/// Probability of class 1.
pub fn entailment_probability(logits: [f64; 2]) -> f64 {
    softmax2(logits)[1]
}
