//! Independent oracles: central finite differences for every analytic
//! gradient, eigenvalues for Gram positive-definiteness, Monte Carlo for
//! data moments.

use monge_mmd::nn::LayerShape;
use monge_mmd::{
    mmd2_unbiased, mmd2_unbiased_grad_points, Activation, CostSpec, DatasetSpec, KernelSpec,
    MaternOrder, MlpParams, Objective, Penalty, SampleSet,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> SampleSet {
    let data = (0..n * d).map(|_| rng.random_range(-scale..scale)).collect();
    SampleSet::from_flat(d, data).unwrap()
}

fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn smooth_kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::gaussian(0.7).unwrap(),
        KernelSpec::matern(MaternOrder::Half, 1.3).unwrap(),
        KernelSpec::matern(MaternOrder::ThreeHalves, 0.8).unwrap(),
        KernelSpec::matern(MaternOrder::FiveHalves, 1.1).unwrap(),
    ]
}

#[test]
fn kernel_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    for k in smooth_kernels() {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = k.grad_x(&x, &y).unwrap();
            for c in 0..3 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[c] += h;
                xm[c] -= h;
                let fd = (k.eval(&xp, &y).unwrap() - k.eval(&xm, &y).unwrap()) / (2.0 * h);
                worst = worst.max(rel_err(g[c], fd, 1e-6));
            }
        }
        assert!(worst < 1e-6, "{k:?}: relative error {worst:e}");
    }
}

#[test]
fn mmd_point_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let k = [
            KernelSpec::gaussian(1.0).unwrap(),
            KernelSpec::matern(MaternOrder::FiveHalves, 1.0).unwrap(),
        ][trial % 2];
        let m = rng.random_range(2..8);
        let n = rng.random_range(2..8);
        let xs = random_points(&mut rng, m, 2, 1.5);
        let ys = random_points(&mut rng, n, 2, 1.5);
        let grads = mmd2_unbiased_grad_points(&k, &xs, &ys).unwrap();
        for i in 0..m {
            for c in 0..2 {
                let bump = |delta: f64| {
                    let mut flat = xs.as_flat().to_vec();
                    flat[i * 2 + c] += delta;
                    mmd2_unbiased(&k, &SampleSet::from_flat(2, flat).unwrap(), &ys).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                worst = worst.max(rel_err(grads[i][c], fd, 1e-6));
            }
        }
    }
    assert!(worst < 1e-6, "relative error {worst:e}");
}

/// Sum of `c · T(x_i)` with fixed random coefficients, as a test loss.
fn linear_readout(params: &MlpParams, xs: &SampleSet, coef: &[f64]) -> f64 {
    let images = params.forward_batch(xs).unwrap();
    images.as_flat().iter().zip(coef).map(|(t, c)| t * c).sum()
}

fn with_values(params: &MlpParams, values: Vec<f64>) -> MlpParams {
    MlpParams::from_parts(params.layers().to_vec(), values).unwrap()
}

#[test]
fn backward_matches_finite_differences_on_tanh_nets() {
    let h = 1e-6;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let base = MlpParams::init(&[2, 16, 2], &[Activation::Tanh, Activation::Identity], seed).unwrap();
        let params = with_values(
            &base,
            base.as_slice().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect(),
        );
        let xs = random_points(&mut rng, 5, 2, 2.0);
        let coef: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = params.backward(&xs, &coef).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..params.num_params() {
            let bump = |delta: f64| {
                let mut v = params.as_slice().to_vec();
                v[k] += delta;
                linear_readout(&with_values(&params, v), &xs, &coef)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            worst = worst.max(rel_err(grads.as_slice()[k], fd, 1e-4));
        }
        assert!(worst < 1e-6, "seed {seed}: relative error {worst:e}");
    }
}

#[test]
fn single_linear_layer_gradient_is_outer_product() {
    // T(x) = W x + b, loss = c · T(x) on one point: ∂/∂W = c xᵀ, ∂/∂b = c.
    let p = MlpParams::affine(&[1.0, 2.0, 3.0, 4.0], &[0.5, -0.5]).unwrap();
    let xs = SampleSet::from_flat(2, vec![3.0, -2.0]).unwrap();
    let g = p.backward(&xs, &[2.0, -1.0]).unwrap();
    assert_eq!(g.weight(&p, 0), &[6.0, -4.0, -3.0, 2.0]);
    assert_eq!(g.bias(&p, 0), &[2.0, -1.0]);
}

#[test]
fn objective_gradient_matches_finite_differences_with_relu() {
    // ReLU kinks are avoided by rejecting instances where a hidden
    // pre-activation lies within the finite-difference step of zero.
    let h = 1e-6;
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 20 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let params = MlpParams::init(&[2, 8, 2], &[Activation::Relu, Activation::Identity], seed).unwrap();
        let params = with_values(
            &params,
            params.as_slice().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect(),
        );
        let xs = random_points(&mut rng, 6, 2, 2.0);
        let ys = random_points(&mut rng, 6, 2, 2.0);
        let shape: &LayerShape = &params.layers()[0];
        let near_kink = xs.points().any(|x| {
            (0..shape.outputs).any(|o| {
                let w = &params.weight(0)[o * 2..o * 2 + 2];
                let z = w[0] * x[0] + w[1] * x[1] + params.bias(0)[o];
                z.abs() < 1e-3
            })
        });
        if near_kink {
            continue;
        }
        let objective = Objective {
            kernel: KernelSpec::gaussian(1.0).unwrap(),
            penalty: Penalty::from_inv_lambda(0.3).unwrap(),
            cost: CostSpec::SquaredEuclidean,
        };
        let (_, grads) = objective.value_and_grad(&params, &xs, &ys).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..params.num_params() {
            let bump = |delta: f64| {
                let mut v = params.as_slice().to_vec();
                v[k] += delta;
                objective.value(&with_values(&params, v), &xs, &ys).unwrap().objective
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            worst = worst.max(rel_err(grads.as_slice()[k], fd, 1e-4));
        }
        assert!(worst < 1e-5, "seed {seed}: relative error {worst:e}");
        checked += 1;
    }
}

#[test]
fn reported_scalars_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..10 {
        let params = MlpParams::init(&[2, 8, 2], &[Activation::Tanh, Activation::Identity], seed).unwrap();
        let xs = random_points(&mut rng, 7, 2, 2.0);
        let ys = random_points(&mut rng, 7, 2, 2.0);
        let k = KernelSpec::default();
        let inv_lambda = 0.25;
        let objective = Objective {
            kernel: k,
            penalty: Penalty::from_inv_lambda(inv_lambda).unwrap(),
            cost: CostSpec::SquaredEuclidean,
        };
        let v = objective.value(&params, &xs, &ys).unwrap();
        let images = params.forward_batch(&xs).unwrap();
        let m = ys.len() as f64;
        let mut yy = 0.0;
        for i in 0..ys.len() {
            for j in 0..ys.len() {
                if i != j {
                    yy += k.eval(ys.point(i), ys.point(j)).unwrap();
                }
            }
        }
        yy /= m * (m - 1.0);
        let mean_cost = xs
            .points()
            .zip(images.points())
            .map(|(x, t)| (x[0] - t[0]).powi(2) + (x[1] - t[1]).powi(2))
            .sum::<f64>()
            / m;
        assert!((v.mean_cost - mean_cost).abs() < 1e-12);
        assert!((v.mmd2 - mmd2_unbiased(&k, &images, &ys).unwrap()).abs() < 1e-12);
        assert!((v.objective + yy - inv_lambda * v.mean_cost - v.mmd2).abs() < 1e-12);
    }
}

fn min_eigenvalue(k: &KernelSpec, xs: &SampleSet) -> f64 {
    let g = k.gram(xs, xs).unwrap();
    let m = DMatrix::from_row_slice(g.rows(), g.cols(), g.as_slice());
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn gram_matrices_are_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in smooth_kernels() {
        for _ in 0..50 {
            let n = rng.random_range(2..=20);
            let xs = random_points(&mut rng, n, 2, 3.0);
            let g = k.gram(&xs, &xs).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g.get(i, j), g.get(j, i));
                }
            }
            let lo = min_eigenvalue(&k, &xs);
            assert!(lo > -1e-10, "{k:?}: min eigenvalue {lo:e}");
        }
    }
}

#[test]
fn gaussian_data_moments_match() {
    let spec = DatasetSpec::IsotropicGaussian {
        n: 20_000,
        mean: vec![5.0, -1.0],
        variance: 2.0,
        seed: 4,
    };
    let s = spec.generate().unwrap();
    let n = s.len() as f64;
    let mean = s.mean().unwrap();
    let sd = s.std_dev().unwrap();
    // Standard errors: σ/√n for the mean, about σ/√(2n) for the SD.
    let sigma = 2f64.sqrt();
    for (m, target) in mean.iter().zip([5.0, -1.0]) {
        assert!((m - target).abs() < 4.0 * sigma / n.sqrt(), "mean {m}");
    }
    for v in sd {
        assert!((v - sigma).abs() < 4.0 * sigma / (2.0 * n).sqrt(), "sd {v}");
    }
}

#[test]
fn data_is_seeded() {
    let moons = |seed| DatasetSpec::TwoMoons { n: 300, noise: 0.05, seed }.generate().unwrap();
    assert_eq!(moons(1), moons(1));
    assert_ne!(moons(1), moons(2));
    let circles = |seed| {
        DatasetSpec::TwoCircles { n: 300, noise: 0.05, factor: 0.5, seed }
            .generate()
            .unwrap()
    };
    assert_eq!(circles(7), circles(7));
    assert_ne!(circles(7), circles(8));
}
