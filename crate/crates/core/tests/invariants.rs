//! Property tests for the killed walks and their operators on random
//! jittered grids.

use proptest::prelude::*;

use walkdim_core::spectral::{build_killed_operator, green_kernel, spectral_radius_bound, Convention, GreenMethod};
use walkdim_core::walks::{exit_time_measure, exit_time_renormalized, BetaField, SolveOptions};
use walkdim_core::{BallSpec, MeasureWeights, PointCloud};

/// A `side x side` grid of spacing 1/side with every point moved by at most
/// a quarter spacing, and strictly positive weights.
fn jittered() -> impl Strategy<Value = (PointCloud, MeasureWeights)> {
    (4usize..9).prop_flat_map(|side| {
        let n = side * side;
        (
            Just(side),
            prop::collection::vec((-0.25..0.25f64, -0.25..0.25f64), n),
            prop::collection::vec(0.2..5.0f64, n),
        )
            .prop_map(|(side, jitter, w)| {
                let h = 1.0 / side as f64;
                let coords: Vec<f64> = jitter
                    .iter()
                    .enumerate()
                    .flat_map(|(k, (dx, dy))| [((k % side) as f64 + dx) * h, ((k / side) as f64 + dy) * h])
                    .collect();
                let params = (0..coords.len() / 2).map(|i| i as f64).collect();
                (PointCloud::from_flat(coords, 2, params, "jittered").unwrap(), MeasureWeights::new(w).unwrap())
            })
    })
}

fn setup(cloud: &PointCloud, radius_frac: f64) -> (BallSpec, f64) {
    let side = (cloud.len() as f64).sqrt();
    let center = cloud.nearest_to(&[0.5, 0.5]);
    // Jitter keeps neighbours within 1.5 spacings, so r = 2 spacings connects the grid.
    (BallSpec::closed(center, radius_frac).unwrap(), 2.0 / side)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exit_times_are_positive_inside_and_zero_outside((cloud, mu) in jittered(), frac in 0.2..0.45f64) {
        let (ball, r) = setup(&cloud, frac);
        let f = exit_time_measure(&cloud, &mu, r, &ball, &SolveOptions::default()).unwrap();
        for (k, &s) in f.states.iter().enumerate() {
            if ball.contains(&cloud, s) {
                prop_assert!(f.values[k] >= 1.0 - 1e-9, "E = {} inside", f.values[k]);
            } else {
                prop_assert_eq!(f.values[k], 0.0);
            }
        }
        prop_assert!(f.solver_residual <= 1e-10);
    }

    #[test]
    fn smaller_balls_exit_sooner((cloud, mu) in jittered(), frac in 0.25..0.45f64, shrink in 0.3..0.9f64) {
        let (big, r) = setup(&cloud, frac);
        let small = big.with_radius(frac * shrink).unwrap();
        let opts = SolveOptions::default();
        let eb = exit_time_measure(&cloud, &mu, r, &big, &opts).unwrap();
        let es = exit_time_measure(&cloud, &mu, r, &small, &opts).unwrap();
        for i in 0..cloud.len() {
            let (a, b) = (es.value_at(i).unwrap_or(0.0), eb.value_at(i).unwrap_or(0.0));
            prop_assert!(a <= b * (1.0 + 1e-9) + 1e-9, "{a} > {b} at {i}");
        }
    }

    #[test]
    fn constant_beta_rescales_exit_times((cloud, mu) in jittered(), beta in 0.0..3.0f64) {
        let (ball, r) = setup(&cloud, 0.4);
        let opts = SolveOptions::default();
        let e = exit_time_measure(&cloud, &mu, r, &ball, &opts).unwrap();
        let field = BetaField::constant(cloud.len(), beta).unwrap();
        let phi = exit_time_renormalized(&cloud, &mu, r, &ball, &field, &opts).unwrap();
        let scale = r.powf(beta);
        for (a, b) in phi.values.iter().zip(&e.values) {
            prop_assert!((a - scale * b).abs() <= 1e-8 * (scale * b).max(1e-300));
        }
    }

    #[test]
    fn killed_kernel_is_substochastic_and_contracting((cloud, mu) in jittered(), frac in 0.2..0.45f64, beta in 1.0..3.0f64) {
        let (ball, r) = setup(&cloud, frac);
        let op = build_killed_operator(&cloud, &mu, r, &ball, &BetaField::constant(cloud.len(), beta).unwrap()).unwrap();
        for s in op.row_sums() {
            prop_assert!(s <= 1.0 + 1e-12);
        }
        prop_assert!(op.asymmetry() <= 1e-12);
        let rho = spectral_radius_bound(&op).unwrap();
        prop_assert!(rho.lower <= rho.value + 1e-12);
        prop_assert!(rho.value < 1.0);
    }

    #[test]
    fn green_rows_integrate_to_exit_times((cloud, mu) in jittered(), beta in 1.0..3.0f64) {
        let (ball, r) = setup(&cloud, 0.35);
        let op = build_killed_operator(&cloud, &mu, r, &ball, &BetaField::constant(cloud.len(), beta).unwrap()).unwrap();
        let opts = SolveOptions::default();
        for (convention, weights, renormalized) in [(Convention::MuR, &op.mu_r, false), (Convention::NuR, &op.nu_r, true)] {
            let g = green_kernel(&op, convention, GreenMethod::Direct).unwrap();
            prop_assert!(g.asymmetry() <= 1e-9);
            prop_assert!(g.min_entry() >= 0.0);
            let want = op.exit_times(renormalized, &opts).unwrap();
            for (a, b) in g.integrate(weights).iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-8 * b.abs());
            }
        }
    }
}

#[test]
fn neumann_series_matches_direct_inverse() {
    let cloud = walkdim_core::fractal::euclidean_cloud(walkdim_core::fractal::EuclideanKind::Interval, 41, 1.0).unwrap();
    let mu = MeasureWeights::uniform(cloud.len()).unwrap();
    let ball = BallSpec::closed(cloud.nearest_to(&[0.0]), 0.5).unwrap();
    let op = build_killed_operator(&cloud, &mu, 0.15, &ball, &BetaField::constant(cloud.len(), 2.0).unwrap()).unwrap();
    let a = green_kernel(&op, Convention::MuR, GreenMethod::Direct).unwrap();
    let b = green_kernel(&op, Convention::MuR, GreenMethod::Neumann).unwrap();
    assert!(b.neumann_terms_used.is_some());
    assert!((&a.matrix - &b.matrix).amax() <= 1e-9 * a.matrix.amax());
}
