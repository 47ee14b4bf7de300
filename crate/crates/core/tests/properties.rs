use morphic_core::entropy_fisher::estimators;
use morphic_core::geometrodynamics::signature;
use morphic_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn full_rank_jacobian() -> impl Strategy<Value = RectJacobian> {
    (1usize..=8)
        .prop_flat_map(|m| (Just(m), 1usize..=m))
        .prop_flat_map(|(m, n)| (Just(m), Just(n), prop::collection::vec(-2.0f64..2.0, m * n)))
        .prop_filter_map("rank deficient", |(m, n, data)| RectJacobian::from_row_slice(m, n, &data).ok())
}

fn line(lo: f64, hi: f64, h: f64) -> Grid {
    Grid::new(vec![Axis::from_range(lo, hi, h).unwrap()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn moore_penrose_identities(j in full_rank_jacobian()) {
        let a = j.matrix();
        let p = pseudo_inverse(&j).unwrap();
        prop_assert!((a * &p * a - a).amax() < 1e-9);
        prop_assert!((&p * a * &p - &p).amax() < 1e-9);
        let ap = a * &p;
        prop_assert!((&ap - ap.transpose()).amax() < 1e-9);
        let pa = &p * a;
        prop_assert!((&pa - DMatrix::identity(j.cols(), j.cols())).amax() < 1e-9);
    }

    #[test]
    fn projector_is_symmetric_idempotent(j in full_rank_jacobian()) {
        let q = projection_operator(&j).unwrap().q;
        prop_assert_eq!(&q, &q.transpose());
        prop_assert!((&q * &q - &q).amax() < 1e-10);
        let trace: f64 = q.diagonal().sum();
        prop_assert!((trace - j.cols() as f64).abs() < 1e-9);
    }

    #[test]
    fn metric_inverse_and_quadratic_length(j in full_rank_jacobian(), seed in any::<u64>()) {
        let g = metric_tensor(&j).unwrap();
        prop_assert!((&g.g_inv * &g.g - DMatrix::identity(j.cols(), j.cols())).amax() < 1e-10 * j.condition_number().max(1.0));
        let v = DVector::from_fn(j.rows(), |i, _| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64 / 500.0) - 1.0);
        let len = quadratic_length(&j, &v).unwrap();
        let proj = projection_operator(&j).unwrap().apply(&v).unwrap();
        prop_assert!((len - proj.norm_squared()).abs() < 1e-9 * (1.0 + v.norm_squared()));
        prop_assert!(len <= v.norm_squared() + 1e-9);
    }

    #[test]
    fn observer_fisher_is_symmetric_psd(
        coeffs in prop::collection::vec(-1.5f64..1.5, 12),
        theta in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let mut fam = MicrostateFamily::new(2);
        for (j, c) in coeffs.chunks(3).enumerate() {
            let (a, b, q) = (c[0], c[1], c[2]);
            fam = fam.with_member(format!("B{j}"), move |t| (a * t[0] + b * t[1] + q * t[0] * t[1]).exp() + 0.5);
        }
        let f = fisher_matrix(&fam, &theta).unwrap();
        prop_assert!(f.is_symmetric());
        prop_assert!(f.is_psd());
    }

    #[test]
    fn gauge_invariance(c in 1e-3f64..1e3, width in 0.5f64..2.0) {
        // Rescaling rounds every input value once; a second-difference stencil turns
        // that into at most Σ|coefficients|·ε/h² with Σ = 12 at the boundary.
        let h = 1e-2;
        let floor = 16.0 * f64::EPSILON / (h * h);
        let g = line(-4.0, 4.0, h);
        let consts = PhysicalConstants::default();
        let w = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / (2.0 * width * width)).exp() + 0.1);
        let cw = w.map("W", |v| c * v);
        for mode in [QMode::Microstate, QMode::Standard] {
            let a = quantum_potential_w(&w, &consts, mode).unwrap().scalar;
            let b = quantum_potential_w(&cw, &consts, mode).unwrap().scalar;
            prop_assert!(a.max_abs_diff(&b).unwrap() <= floor);
        }
        let ba = weyl_vector(&w).unwrap();
        let bb = weyl_vector(&cw).unwrap();
        prop_assert!(ba[0].max_abs_diff(&bb[0]).unwrap() <= 8.0 * f64::EPSILON / h);
    }

    #[test]
    fn conformal_metric_preserves_signature_and_scales_determinant(
        entries in prop::collection::vec(-0.3f64..0.3, 16),
        q in -5.0f64..5.0,
    ) {
        let lambda = DMatrix::identity(4, 4) + DMatrix::from_row_slice(4, 4, &entries);
        let eta = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, -1.0, -1.0, -1.0]));
        let m = &lambda * eta * lambda.transpose();
        let m = (&m + m.transpose()) * 0.5;
        prop_assume!(m.determinant().abs() > 1e-6);
        let grid = line(0.0, 0.4, 0.1);
        let metric = SpacetimeMetric::new(grid.clone(), vec![m.clone(); grid.len()]).unwrap();
        let qf = ScalarField::constant(&grid, "Q", q);
        let t = conformal_metric(&metric, &qf).unwrap();
        for p in 0..grid.len() {
            prop_assert_eq!(signature(t.at(p)), (1, 3));
            let want = (4.0 * q).exp() * m.determinant();
            prop_assert!((t.at(p).determinant() / want - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn score_oracle_matches_closed_form_gaussian() {
    let theta = [0.2, 1.3];
    let oracle = score_fisher_oracle(ParametricDistribution::Gaussian, &theta).unwrap();
    assert!((oracle.f[(0, 0)] * 1.69 - 1.0).abs() < 1e-6);
    assert!((oracle.f[(1, 1)] * 1.69 - 2.0).abs() < 1e-6);
}

#[test]
fn cramer_rao_holds_for_exponential_rate() {
    let lambda = 2.0;
    let n = 2_000;
    let cov =
        mc_estimator_covariance(ParametricDistribution::Exponential, &[lambda], estimators::exponential_mle, n, 800, 5)
            .unwrap();
    let f = score_fisher_oracle(ParametricDistribution::Exponential, &[lambda]).unwrap().scaled(n as f64);
    let gap = cramer_rao_gap(&f, &cov.covariance).unwrap();
    let se = cov.directional_stderr(&DVector::from_element(1, 1.0));
    assert!(gap >= -3.0 * se, "gap {gap:e} se {se:e}");
}

#[test]
fn trajectories_are_bit_identical_across_runs() {
    let params = DoubleSlitParams { n_particles: 500, time_steps: 80, spacing: 0.05, ..Default::default() };
    let consts = PhysicalConstants::default();
    let a = double_slit_scenario(&params, &consts).unwrap();
    let b = double_slit_scenario(&params, &consts).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.histogram, b.histogram);
}

#[test]
fn equivariance_of_free_packet() {
    let consts = PhysicalConstants::default();
    let packet = morphic_core::packets::GaussianPacket::new(0.0, 0.7, 0.5, &consts).unwrap();
    let g = line(-10.0, 10.0, 0.01);
    let rho0 = ScalarField::from_fn(&g, "rho", |x| packet.density(x[0], 0.0));
    let field =
        GuidanceField::from_phase_gradient(vec![(-10.0, 10.0)], 0.0, move |x, t| vec![packet.velocity(x[0], t)]).unwrap();
    let init = InitialEnsemble::Sampled { density: rho0, count: 10_000, seed: 3, symmetric: false };
    let ens = bohmian_trajectories(&field, &consts, &init, 0.01, 1.5).unwrap();
    let hist = Histogram::new(-10.0, 10.0, 40, (0..ens.len()).map(|i| ens.final_position(i)[0])).unwrap();
    let tv = hist.tv_distance(&hist.reference_probabilities(|x| packet.density(x, 1.5))).unwrap();
    assert!(tv < 0.05, "tv {tv}");
}

#[test]
fn quantum_mass_from_microstate_potential() {
    let g = line(-3.0, 3.0, 0.05);
    let w = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / 2.0).exp());
    let q = quantum_potential_w(&w, &PhysicalConstants::default(), QMode::Microstate).unwrap().scalar;
    let m = quantum_mass(&q, 2.0).unwrap();
    for i in 0..g.len() {
        assert!((m.m_squared.get(i) - 4.0 * q.get(i).exp()).abs() < 1e-12 * m.m_squared.get(i));
    }
}
