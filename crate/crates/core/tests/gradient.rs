mod common;

use common::{gradient_error as check, FD_TOLERANCE as TOLERANCE};
use toric_core::end::{ModelConfig, Pooling};

#[test]
fn gradients_match_finite_differences_twisted() {
    let cfg = ModelConfig { channels: vec![4], depth: 1, kernel: 3, pooling: Pooling::Twisted, batch_norm: false };
    let e = check(cfg);
    assert!(e < TOLERANCE, "worst relative error {e}");
}

#[test]
fn gradients_match_finite_differences_with_shortcut_and_batch_norm() {
    let cfg = ModelConfig { channels: vec![4, 6], depth: 1, kernel: 3, pooling: Pooling::Twisted, batch_norm: true };
    let e = check(cfg);
    assert!(e < TOLERANCE, "worst relative error {e}");
}

#[test]
fn gradients_match_finite_differences_average_pool() {
    let cfg = ModelConfig { channels: vec![4], depth: 2, kernel: 3, pooling: Pooling::Average, batch_norm: false };
    let e = check(cfg);
    assert!(e < TOLERANCE, "worst relative error {e}");
}
