use proptest::prelude::*;

use roughnas::baselines::{fit_linear, linear_objective, Penalty};
use roughnas::dataio::{apply_normalizer, compute_metrics, fit_normalizer, residual_mean, split};
use roughnas::gp::{acquisition, Acquisition, GpHyper, GpSurrogate, SpaceEncoding};
use roughnas::mlp::{BATCH_SIZES, LEARNING_RATE_RANGE};
use roughnas::numerics::{cholesky_factor, Adam, AdamConfig};
use roughnas::vae::{kl_divergence, vae_generate, VaeModel, VAE_LATENT};
use roughnas::{Activation, ArchitectureSpec, Dataset, Loss, Matrix, MlpModel, Rng};

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

fn regression(n: usize, d: usize, rng: &mut Rng) -> (Matrix, Vec<f64>) {
    let x = random_matrix(n, d, rng);
    let w: Vec<f64> = (0..d).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
    let y = x
        .iter_rows()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5 + 0.1 * rng.standard_normal())
        .collect();
    (x, y)
}

fn random_spec(rng: &mut Rng) -> ArchitectureSpec {
    let (lo, hi) = LEARNING_RATE_RANGE;
    ArchitectureSpec {
        hidden_layers: 1 + rng.below(10),
        neurons_per_layer: 10 + rng.below(91),
        activation: Activation::ALL[rng.below(6)],
        batch_size: BATCH_SIZES[rng.below(5)],
        learning_rate: (lo.ln() + rng.uniform() * (hi.ln() - lo.ln())).exp(),
        loss: Loss::ALL[rng.below(2)],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cholesky_solves_spd_systems(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = Rng::new(seed);
        let b = random_matrix(n, n, &mut rng);
        let a = b.transpose().matmul(&b).unwrap().add_diagonal(1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
        let rhs = a.matvec(&x).unwrap();
        let sol = cholesky_factor(&a, 0.0).unwrap().solve_vec(&rhs).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = x.iter().zip(&sol).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * norm.max(1e-300));
    }

    #[test]
    fn rmse_decomposes_into_std_and_bias(
        pairs in prop::collection::vec((0.1f64..100.0, -50.0f64..50.0), 1..60)
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let yhat: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
        let m = compute_metrics(&y, &yhat).unwrap();
        let e = residual_mean(&y, &yhat).unwrap();
        prop_assert!((m.rmse * m.rmse - (m.std * m.std + e * e)).abs() < 1e-10 * (1.0 + m.rmse * m.rmse));
    }

    #[test]
    fn normalized_columns_are_standard(seed in any::<u64>(), n in 3usize..80, d in 1usize..5) {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.uniform_range(-30.0, 70.0)).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_range(1.0, 9.0)).collect();
        let ds = Dataset::from_xy(x, y).unwrap();
        let z = apply_normalizer(&ds, &fit_normalizer(&ds).unwrap(), false).unwrap();
        let joint = z.joint_matrix();
        for j in 0..joint.cols() {
            let col = joint.col_values(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), n in 20usize..200, train in 0.3f64..0.8, val in 0.1f64..0.15) {
        let ids: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ds = Dataset::from_xy(Matrix::from_vec(n, 1, ids.clone()).unwrap(), ids).unwrap();
        let (a, b, c) = split(&ds, train, val, &mut Rng::new(seed)).unwrap();
        let mut all: Vec<usize> = [a, b, c]
            .iter()
            .flat_map(|d| d.targets().iter().map(|v| *v as usize).collect::<Vec<_>>())
            .collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn kl_is_non_negative(pairs in prop::collection::vec((-5.0f64..5.0, -8.0f64..4.0), 1..30)) {
        let mu: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let lv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assert!(kl_divergence(&mu, &lv) >= 0.0);
    }

    #[test]
    fn generated_rows_are_finite(seed in any::<u64>(), width in 1usize..6) {
        let mut rng = Rng::new(seed);
        let vae = VaeModel::new(width, &mut rng).unwrap();
        let rows = vae_generate(&vae, 50, &mut rng);
        prop_assert_eq!(rows.shape(), (50, width));
        prop_assert!(rows.is_finite());
    }

    #[test]
    fn batch_forward_equals_rowwise(seed in any::<u64>(), n in 1usize..150) {
        let mut rng = Rng::new(seed);
        let spec = ArchitectureSpec { neurons_per_layer: 10 + rng.below(30), hidden_layers: 1 + rng.below(4), ..random_spec(&mut rng) };
        let m = MlpModel::build(spec, 4, &mut rng).unwrap();
        let x = random_matrix(n, 4, &mut rng);
        let batch = m.forward_batch(&x).unwrap();
        for (r, b) in x.iter_rows().zip(&batch) {
            prop_assert_eq!(m.forward(r).unwrap().to_bits(), b.to_bits());
        }
    }

    #[test]
    fn variance_at_data_is_below_far_variance(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let hyper = GpHyper { length_scale: 0.3, signal_var: 1.0, noise_var: 1e-3 };
        let gp = GpSurrogate::fit_with(&x, &y, hyper).unwrap();
        // Every data point lies in the unit square, so (10, 10) is > 3ℓ away.
        let (_, far) = gp.posterior_standardized(&[10.0, 10.0]).unwrap();
        for r in x.iter_rows() {
            prop_assert!(gp.posterior_standardized(r).unwrap().1 <= far);
        }
    }

    #[test]
    fn encode_decode_round_trip(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let spec = random_spec(&mut rng);
        let back = SpaceEncoding::decode(&SpaceEncoding::encode(&spec)).unwrap();
        prop_assert_eq!(back.hidden_layers, spec.hidden_layers);
        prop_assert_eq!(back.neurons_per_layer, spec.neurons_per_layer);
        prop_assert_eq!(back.activation, spec.activation);
        prop_assert_eq!(back.batch_size, spec.batch_size);
        prop_assert_eq!(back.loss, spec.loss);
        prop_assert!((back.learning_rate.ln() - spec.learning_rate.ln()).abs() < 1e-9);
    }

    #[test]
    fn acquisition_scores_are_finite(seed in any::<u64>(), n in 2usize..15) {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_vec(n, 6, (0..6 * n).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.0, 3.0)).collect();
        let gp = GpSurrogate::fit(&x, &y).unwrap();
        let best = y.iter().cloned().fold(f64::INFINITY, f64::min);
        for _ in 0..20 {
            let q: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
            for kind in Acquisition::ALL {
                prop_assert!(acquisition(&gp, &q, kind, best, 1.96).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn ridge_without_penalty_is_least_squares(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let (x, y) = regression(30, 3, &mut rng);
        let a = fit_linear(&x, &y, Penalty::None).unwrap();
        let b = fit_linear(&x, &y, Penalty::L2 { lambda: 0.0 }).unwrap();
        for (p, q) in a.weights.iter().zip(&b.weights) {
            prop_assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn elastic_net_endpoints(seed in any::<u64>(), lambda in 0.01f64..0.5) {
        let mut rng = Rng::new(seed);
        let (x, y) = regression(40, 3, &mut rng);
        let lasso = fit_linear(&x, &y, Penalty::L1 { lambda }).unwrap();
        let ridge = fit_linear(&x, &y, Penalty::L2 { lambda }).unwrap();
        let e1 = fit_linear(&x, &y, Penalty::Elastic { lambda, alpha: 1.0 }).unwrap();
        let e0 = fit_linear(&x, &y, Penalty::Elastic { lambda, alpha: 0.0 }).unwrap();
        for (p, q) in lasso.weights.iter().zip(&e1.weights) {
            prop_assert!((p - q).abs() < 1e-6);
        }
        for (p, q) in ridge.weights.iter().zip(&e0.weights) {
            prop_assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn coordinate_descent_never_increases_the_objective(seed in any::<u64>(), lambda in 0.0f64..0.5, alpha in 0.0f64..=1.0) {
        let mut rng = Rng::new(seed);
        let (x, y) = regression(25, 4, &mut rng);
        let pen = Penalty::Elastic { lambda, alpha };
        let m = fit_linear(&x, &y, pen).unwrap();
        let t = &m.objective_trace;
        prop_assert!(!t.is_empty());
        for w in t.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        prop_assert!((t[t.len() - 1] - linear_objective(&x, &y, &m.weights, &pen)).abs() < 1e-9);
    }

    #[test]
    fn adam_ignores_zero_gradients(seed in any::<u64>(), steps in 1usize..20) {
        let mut rng = Rng::new(seed);
        let mut w: Vec<f64> = (0..7).map(|_| rng.standard_normal()).collect();
        let before = w.clone();
        let mut adam = Adam::new(0.05, AdamConfig::default());
        for _ in 0..steps {
            adam.step(&mut [&mut w[..]], &[vec![0.0; 7]]);
        }
        prop_assert_eq!(w, before);
    }
}

#[test]
fn latent_width_is_twenty() {
    assert_eq!(VAE_LATENT, 20);
}
