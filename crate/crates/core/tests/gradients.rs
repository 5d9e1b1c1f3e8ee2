mod common;

use common::*;

const CASES: u64 = 100;

#[test]
fn linear_layer_gradients_match_finite_differences() {
    assert!(worst(CASES, linear_case) < 1e-4);
}

#[test]
fn relu_gradients_match_finite_differences() {
    assert!(worst(CASES, relu_case) < 1e-4);
}

#[test]
fn masked_max_pool_gradients_match_finite_differences() {
    assert!(worst(CASES, pool_case) < 1e-4);
}

#[test]
fn quantile_critic_parameter_and_action_gradients() {
    let e = worst(CASES, quantile_critic_case);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn discrete_quantile_network_gradients() {
    let e = worst(CASES, quantile_network_case);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn value_network_gradients() {
    let e = worst(CASES, value_network_case);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn actor_gradients_through_bounded_output() {
    let e = worst(CASES, actor_case);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn actor_gradient_through_quantile_critic() {
    let e = worst(CASES, ac_iqn_chain_case);
    assert!(e < 1e-3, "{e}");
}

#[test]
fn actor_gradient_through_deterministic_critic() {
    let e = worst(CASES, ddpg_chain_case);
    assert!(e < 1e-3, "{e}");
}
