//! Cross-module invariants checked on random inputs.

use ndarray::{Array1, Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vcs_core::decoder::{init_decoder, DecoderShape};
use vcs_core::encoder::EncoderParams;
use vcs_core::metrics::{psnr, ssim, Frame};
use vcs_core::sensing::{sample_bernoulli_mask, tile_mask, FrameOperator};
use vcs_core::solvers::{tv_norm, LassoProblem, SolverConfig};
use vcs_core::trainer::{clip_gradients, mse_loss, sgd_step, Gradients, SgdState};
use vcs_core::volume::BlockDims;

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clipped_norm_never_exceeds_threshold(seed in any::<u64>(), scale in 1e-3f64..1e3, thr in 1e-3f64..1.0) {
        let enc = EncoderParams::from_mask(&sample_bernoulli_mask(BlockDims::new(2, 2, 4), 0.5, seed).unwrap());
        let dec = init_decoder(DecoderShape { inputs: 16, hidden_width: 8, hidden_layers: 1, outputs: 64 }, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grads = Gradients {
            encoder: Some((0..16).map(|_| scale * rng.random_range(-1.0..1.0)).collect()),
            decoder: SgdState::zeros(&enc, &dec).decoder,
        };
        for l in &mut grads.decoder {
            l.weights.mapv_inplace(|_| scale * rng.random_range(-1.0..1.0));
        }
        let before = grads.global_norm();
        let reported = clip_gradients(&mut grads, thr);
        prop_assert_eq!(reported, before);
        prop_assert!(grads.global_norm() <= thr + 1e-12);
        if before <= thr {
            prop_assert_eq!(grads.global_norm(), before);
        }
    }

    #[test]
    fn shadow_stays_in_unit_interval(seed in any::<u64>(), lr in 0.0f64..100.0) {
        let mut enc = EncoderParams::from_mask(&sample_bernoulli_mask(BlockDims::new(2, 2, 4), 0.5, seed).unwrap());
        let mut dec = init_decoder(DecoderShape { inputs: 16, hidden_width: 8, hidden_layers: 1, outputs: 64 }, seed).unwrap();
        let mut state = SgdState::zeros(&enc, &dec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..3 {
            let grads = Gradients {
                encoder: Some((0..16).map(|_| rng.random_range(-1.0..1.0)).collect()),
                decoder: SgdState::zeros(&enc, &dec).decoder,
            };
            sgd_step(&mut enc, &mut dec, &grads, &mut state, lr, 0.0, 0.9).unwrap();
            prop_assert!(enc.shadow().iter().all(|w| (-1.0..=1.0).contains(w)));
            for (w, &b) in enc.shadow().iter().zip(enc.bits()) {
                prop_assert_eq!(b, u8::from(*w >= 0.0));
            }
        }
    }

    #[test]
    fn frame_operator_adjoint_identity(seed in any::<u64>(), p in 0.1f64..0.9) {
        let mask = tile_mask(&sample_bernoulli_mask(BlockDims::new(4, 4, 8), p, seed).unwrap(), 12, 8).unwrap();
        let op = FrameOperator::new(&mask);
        let x = random_vec(12 * 8 * 8, seed);
        let y = random_vec(12 * 8, seed ^ 7);
        let lhs: f64 = op.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(op.adjoint(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn tv_norm_is_one_homogeneous(seed in any::<u64>(), c in -5.0f64..5.0) {
        let z = Array3::from_shape_vec((2, 5, 6), random_vec(60, seed)).unwrap();
        let lhs = tv_norm(&(&z * c));
        prop_assert!((lhs - c.abs() * tv_norm(&z)).abs() < 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn lasso_never_worse_than_zero(seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_simple_fn((6, 12), || rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_simple_fn(6, || rng.random_range(-1.0..1.0));
        let problem = LassoProblem::from_operator(a).unwrap();
        let cfg = SolverConfig { lambda, max_iters: 300, rel_tol: 1e-9 };
        let sol = problem.solve(y.view(), &cfg).unwrap();
        let zero = problem.objective(y.view(), Array1::zeros(12).view(), lambda);
        prop_assert!(sol.objective <= zero + 1e-12);
        prop_assert!((sol.objective - problem.objective(y.view(), sol.coefficients.view(), lambda)).abs() < 1e-9);
    }

    #[test]
    fn ssim_bounded_and_symmetric(seed in any::<u64>()) {
        let a = random_vec(16 * 14, seed);
        let b = random_vec(16 * 14, seed.wrapping_add(1));
        let fa = Frame::new(16, 14, &a).unwrap();
        let fb = Frame::new(16, 14, &b).unwrap();
        let s = ssim(&fa, &fb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert_eq!(s, ssim(&fb, &fa).unwrap());
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed in any::<u64>(), a1 in 0.01f64..0.2, extra in 0.01f64..0.2) {
        let r = random_vec(100, seed);
        let n = random_vec(100, seed ^ 3);
        let fr = Frame::new(10, 10, &r).unwrap();
        let noisy = |amp: f64| r.iter().zip(&n).map(|(x, e)| x + amp * (e - 0.5)).collect::<Vec<f64>>();
        let (lo, hi) = (noisy(a1), noisy(a1 + extra));
        let p_lo = psnr(&fr, &Frame::new(10, 10, &lo).unwrap(), 1.0).unwrap();
        let p_hi = psnr(&fr, &Frame::new(10, 10, &hi).unwrap(), 1.0).unwrap();
        prop_assert!(p_hi < p_lo);
    }

    #[test]
    fn mse_gradient_is_scaled_residual(seed in any::<u64>(), rows in 1usize..5) {
        let p = Array2::from_shape_vec((rows, 7), random_vec(rows * 7, seed)).unwrap();
        let t = Array2::from_shape_vec((rows, 7), random_vec(rows * 7, seed ^ 9)).unwrap();
        let (loss, g) = mse_loss(p.view(), t.view()).unwrap();
        let d = &p - &t;
        prop_assert!((loss - d.iter().map(|v| v * v).sum::<f64>() / rows as f64).abs() < 1e-12);
        prop_assert!(g.iter().zip(d.iter()).all(|(g, d)| (g - 2.0 * d / rows as f64).abs() < 1e-15));
    }
}
