//! The core math compiles and runs at f32 as well as the default f64.

use relkit_core::featuremap::FeatureSequence;
use relkit_core::numerics::mlp::{Activation, Mlp};
use relkit_core::numerics::{softmax, RngStream};
use relkit_core::relgraph::gaussian_proxy_m;
use relkit_core::varloss::{ctc_neg_log_likelihood, kl_gaussian};

#[test]
fn core_operations_run_at_f32() {
    let sm = softmax(&[1.0_f32, 2.0, 3.0]).unwrap();
    assert!((sm.iter().sum::<f32>() - 1.0).abs() < 1e-6);

    let m = gaussian_proxy_m(0.25_f32, 0.05).unwrap();
    assert!((m - 0.090098).abs() < 1e-5);

    let kl = kl_gaussian(1.0_f32, 1.0, 0.0, 1.0).unwrap();
    assert!((kl - 0.5).abs() < 1e-6);

    let u = (1.0_f32 / 3.0).ln();
    let lp = vec![vec![u; 3]; 2];
    let loss = ctc_neg_log_likelihood(&lp, &[0], 2).unwrap();
    assert!((loss + (1.0_f32 / 3.0).ln()).abs() < 1e-6);

    let mut rng = RngStream::new(4);
    let net = Mlp::<f32>::new(&[3, 8, 2], Activation::Tanh, &mut rng);
    let out = net.forward(&[0.1, -0.2, 0.3]).unwrap();
    assert_eq!(out.len(), 2);

    let seq = FeatureSequence::<f32>::new(2, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let map = seq.feature_map(1, 3).unwrap();
    assert_eq!(map.matrix.at(0, 0), 0.0);
    assert_eq!(map.matrix.at(1, 2), 4.0);
}

#[test]
fn f32_and_f64_agree_to_single_precision() {
    let m32 = gaussian_proxy_m(0.1_f32, 0.2).unwrap() as f64;
    let m64 = gaussian_proxy_m(0.1_f64, 0.2).unwrap();
    assert!((m32 - m64).abs() < 1e-6);
}
