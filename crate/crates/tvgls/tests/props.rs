//! Property tests for the structural invariants: the difference/cumulation
//! operators invert each other, Gaussian conditioning never produces an
//! indefinite variance, float serialization round-trips exactly, and the
//! accuracy metrics behave as fixed points on perfect estimates.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tvgls::csvio::fmt_float;
use tvgls::{apply_c, apply_c_inverse, compute_metrics, regression_lemma};

proptest! {
    #[test]
    fn cumulation_and_differencing_invert(
        m in 1usize..6,
        n in 1usize..40,
        raw in prop::collection::vec(-1e3f64..1e3, 1..240),
    ) {
        let len = n * m;
        prop_assume!(raw.len() >= len);
        let x = DVector::from_vec(raw[..len].to_vec());
        let there = apply_c_inverse(&apply_c(&x, m).unwrap(), m).unwrap();
        let back = apply_c(&apply_c_inverse(&x, m).unwrap(), m).unwrap();
        let scale = x.amax().max(1.0);
        prop_assert!((&there - &x).amax() / scale < 1e-12);
        prop_assert!((&back - &x).amax() / scale < 1e-12);
    }

    #[test]
    fn cumulation_matches_naive_prefix_sum(
        m in 1usize..4,
        n in 1usize..20,
        raw in prop::collection::vec(-10.0f64..10.0, 1..80),
    ) {
        let len = n * m;
        prop_assume!(raw.len() >= len);
        let x = DVector::from_vec(raw[..len].to_vec());
        let fast = apply_c(&x, m).unwrap();
        for t in 0..n {
            for i in 0..m {
                let slow: f64 = (0..=t).map(|s| x[s * m + i]).sum();
                prop_assert!((fast[t * m + i] - slow).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conditioning_never_inflates_variance(
        seed_vals in prop::collection::vec(-1.0f64..1.0, 16),
        dev in -5.0f64..5.0,
    ) {
        // A consistent joint covariance of (b, y): slice a random 4x4 SPD
        // matrix into its blocks.
        let root = DMatrix::from_vec(4, 4, seed_vals.to_vec());
        let joint = &root * root.transpose() + DMatrix::identity(4, 4) * 0.5;
        let cov_b = joint.view((0, 0), (2, 2)).into_owned();
        let cov_by = joint.view((0, 2), (2, 2)).into_owned();
        let cov_y = joint.view((2, 2), (2, 2)).into_owned();
        let (_, cond_var) = regression_lemma(
            &DVector::zeros(2),
            &cov_b,
            &cov_by,
            &cov_y,
            &DVector::from_column_slice(&[dev, -dev]),
        )
        .unwrap();
        let eigs = cond_var.symmetric_eigenvalues();
        // PSD and no larger than the prior in trace.
        prop_assert!(eigs.iter().all(|&e| e > -1e-9));
        prop_assert!(cond_var.trace() <= cov_b.trace() + 1e-9);
    }

    #[test]
    fn float_serialization_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn perfect_estimates_are_metric_fixed_points(
        raw in prop::collection::vec(-5.0f64..5.0, 8..60),
    ) {
        let path: Vec<DVector<f64>> =
            raw.chunks_exact(2).map(DVector::from_column_slice).collect();
        prop_assume!(path.len() >= 4);
        let metrics = compute_metrics(&path, &path).unwrap();
        for i in 0..2 {
            prop_assert_eq!(metrics.dist[i], 0.0);
            match metrics.rat[i] {
                Some(r) => prop_assert!((r - 1.0).abs() < 1e-12),
                None => prop_assert!(metrics.sd_true[i] == 0.0),
            }
        }
    }
}
