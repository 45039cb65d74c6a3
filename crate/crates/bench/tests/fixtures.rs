use nonmarkov_opinf_bench::{chafee, linear_fixture};

#[test]
fn fixtures_have_expected_shapes() {
    let fx = linear_fixture(30, 4, 20, 22).unwrap();
    assert_eq!(fx.data.num_bursts(), 20);
    assert_eq!(fx.data.burst_len(), 22);
    assert_eq!(fx.markov.dim(), 4);
    assert_eq!(fx.basis.dim(), 4);
    assert_eq!(fx.selector.num_observed(), 18);
    assert_eq!(fx.system.state_dim(), 30);
    assert_eq!(chafee(32).unwrap().state_dim(), 32);
}
