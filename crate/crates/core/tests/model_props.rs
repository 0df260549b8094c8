mod common;

use common::{finite_diff, grad_violation, toy_spec};
use misclass_core::kernel::{checked, interval_transform, simplex_transform};
use misclass_core::model::sample_hierarchy;
use misclass_core::*;

fn random_point(model: &Model, r: &mut rng::StreamRng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..model.dim()).map(|_| 4.0 * rng::uniform(r) - 2.0).collect();
    for name in ["log_omega_p", "log_omega_s", "log_omega_r"] {
        if let Some(b) = model.layout().block(name) {
            if b.len == 1 {
                u[b.start] = 8.0 * rng::uniform(r) - 2.0;
            }
        }
    }
    u
}

#[test]
fn gradients_match_finite_differences() {
    for variant in Variant::ALL {
        let model = Model::new(toy_spec(variant, 4, 3, 17)).unwrap();
        let mut r = rng::stream(99, variant as u64);
        for _ in 0..20 {
            let u = random_point(&model, &mut r);
            let (lp, g) = model.log_posterior(&u).unwrap();
            assert!(lp.is_finite());
            let fd = finite_diff(|x| model.log_density(x), &u, 1e-5);
            let v = grad_violation(&g, &fd, 1e-5, 1e-8);
            assert!(v <= 1.0, "{variant}: violation {v}");
        }
    }
}

#[test]
fn three_cause_edge_and_two_cause_gradients() {
    for (c, s) in [(2, 2), (3, 2)] {
        let model = Model::new(toy_spec(Variant::FullyHet, c, s, 5)).unwrap();
        let mut r = rng::stream(4, c as u64);
        let u = random_point(&model, &mut r);
        let (_, g) = model.log_posterior(&u).unwrap();
        let fd = finite_diff(|x| model.log_density(x), &u, 1e-5);
        assert!(grad_violation(&g, &fd, 1e-5, 1e-8) <= 1.0);
    }
}

#[test]
fn country_order_does_not_matter() {
    let spec = toy_spec(Variant::FullyHet, 4, 3, 8);
    let model = Model::new(spec.clone()).unwrap();
    let perm = [2usize, 0, 1];
    let permuted = ModelSpec::new(
        Variant::FullyHet,
        spec.hyper.clone(),
        perm.iter().map(|&k| spec.countries[k].clone()).collect(),
        perm.iter().map(|&k| spec.data[k].clone()).collect(),
    )
    .unwrap();
    let model_p = Model::new(permuted).unwrap();
    let mut r = rng::stream(3, 0);
    for _ in 0..5 {
        let u = random_point(&model, &mut r);
        let mut up = u.clone();
        for (name, width) in [("country_sensitivity", 4), ("country_rel_fp", 4 * 2)] {
            let b = model.layout().block(name).unwrap();
            for (dst, &src) in perm.iter().enumerate() {
                let from = b.start + src * width;
                let to = b.start + dst * width;
                up[to..to + width].copy_from_slice(&u[from..from + width]);
            }
        }
        let a = model.log_density(&u);
        let b = model_p.log_density(&up);
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn base_depends_on_pooled_counts_only() {
    let spec = toy_spec(Variant::Base, 3, 2, 12);
    let mut moved = spec.data.clone();
    // move every count of country 2 into country 1
    let donor = moved[1].clone();
    for i in 0..3 {
        for j in 0..3 {
            moved[0].add(i, j, donor.get(i, j));
            moved[1].set(i, j, 0);
        }
    }
    let a = Model::new(spec.clone()).unwrap();
    let b = Model::new(
        ModelSpec::new(Variant::Base, spec.hyper.clone(), spec.countries.clone(), moved).unwrap(),
    )
    .unwrap();
    let u = [0.2, -0.4, 1.1, 0.3, -0.9];
    assert_eq!(a.log_density(&u), b.log_density(&u));
}

/// `Beta(eps, eps)` on `1 / (1 + e^x)` expressed as a density in `x`.
fn log_scale_shrinkage(x: f64, eps: f64) -> f64 {
    let soft = if x > 30.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    eps * (x - 2.0 * soft) - statrs::function::beta::ln_beta(eps, eps)
}

/// Independent term-by-term evaluation of the homogeneous prior layers.
fn homogeneous_prior_terms(c: usize, u: &[f64], kappa_lambda_zero: bool) -> f64 {
    let mut lp = 0.0;
    let acc: Vec<f64> = u[..c]
        .iter()
        .map(|&x| {
            let (p, lj) = interval_transform(x);
            lp += lj;
            p.p
        })
        .collect();
    let (pull, lj) = simplex_transform(&u[c..2 * c - 1]);
    lp += lj;
    for &a in &acc {
        lp += checked::beta_lpdf(a, 1.0, 1.0).unwrap();
    }
    lp += checked::dirichlet_lpdf(&pull.p, &vec![1.0; c]).unwrap();
    let sens_start = 2 * c - 1;
    let rel_start = sens_start + c;
    let omega_idx = rel_start + c * (c - 2);
    let x = u[omega_idx];
    lp += log_scale_shrinkage(x, 0.5);
    let omega = x.exp();
    let (kappa, lambda) = if kappa_lambda_zero {
        (0.0, 0.0)
    } else {
        (2.0 * omega, (c - 1) as f64 * omega)
    };
    for i in 0..c {
        let (s, lj) = interval_transform(u[sens_start + i]);
        lp += lj;
        let m = acc[i] + (1.0 - acc[i]) * pull.p[i];
        lp += checked::beta_lpdf(s.p, 0.5 + kappa * m, 0.5 + kappa * (1.0 - m)).unwrap();
        let (q, lj) = simplex_transform(&u[rel_start + i * (c - 2)..rel_start + (i + 1) * (c - 2)]);
        lp += lj;
        let conc: Vec<f64> = (0..c)
            .filter(|&j| j != i)
            .map(|j| 0.5 + lambda * pull.p[j] / (1.0 - pull.p[i]))
            .collect();
        lp += checked::dirichlet_lpdf(&q.p, &conc).unwrap();
    }
    lp
}

fn empty_spec(variant: Variant, c: usize, s: usize) -> ModelSpec {
    let causes = CauseSet::numbered(c).unwrap();
    ModelSpec::new_any_countries(
        variant,
        Hyperparams::default(),
        (0..s).map(|k| format!("c{k}")).collect(),
        vec![CountMatrix::zeros(causes); s],
    )
    .unwrap()
}

#[test]
fn zero_pull_strength_gives_jeffreys_priors() {
    let model = Model::new(empty_spec(Variant::Homogeneous, 4, 1)).unwrap();
    let mut r = rng::stream(6, 0);
    for _ in 0..5 {
        let mut u = random_point(&model, &mut r);
        let k = model.layout().block("log_omega_p").unwrap().start;
        // exp(-800) underflows to zero, so kappa = lambda = 0 exactly
        u[k] = -800.0;
        let want = homogeneous_prior_terms(4, &u, true);
        let got = model.log_density(&u);
        assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn homogeneous_prior_matches_term_sum() {
    let model = Model::new(empty_spec(Variant::Homogeneous, 4, 1)).unwrap();
    let mut r = rng::stream(7, 0);
    for _ in 0..10 {
        let u = random_point(&model, &mut r);
        let want = homogeneous_prior_terms(4, &u, false);
        let got = model.log_density(&u);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn single_country_term_accounting() {
    let c = 4;
    let spec = toy_spec(Variant::FullyHet, c, 1, 30);
    let full = Model::new(spec.clone()).unwrap();
    let hom_empty = Model::new(empty_spec(Variant::Homogeneous, c, 1)).unwrap();
    let mut r = rng::stream(31, 0);
    for _ in 0..10 {
        let u = random_point(&full, &mut r);
        let n_hom = hom_empty.dim();
        let mut want = hom_empty.log_density(&u[..n_hom]);

        let block = full.constrain(&u).unwrap();
        let pooled_sens = block.sensitivity.as_ref().unwrap();
        let pooled_q = block.rel_fp.as_ref().unwrap();
        let omega_s = block.omega_s.unwrap();
        let omega_r = block.omega_r.unwrap();
        let xs = full.layout().block("log_omega_s").unwrap().start;
        let xr = full.layout().block("log_omega_r").unwrap().start;
        want += log_scale_shrinkage(u[xs], 0.5);
        want += log_scale_shrinkage(u[xr], 0.5);

        let cs = full.layout().block("country_sensitivity").unwrap().start;
        let cq = full.layout().block("country_rel_fp").unwrap().start;
        let phi_s = block.country_matrix(0).unwrap();
        for i in 0..c {
            let (s, lj) = interval_transform(u[cs + i]);
            want += lj;
            want += checked::beta_lpdf(
                s.p,
                0.5 + 2.0 * omega_s * pooled_sens[i],
                0.5 + 2.0 * omega_s * (1.0 - pooled_sens[i]),
            )
            .unwrap();
            let (q, lj) = simplex_transform(&u[cq + i * (c - 2)..cq + (i + 1) * (c - 2)]);
            want += lj;
            let conc: Vec<f64> = pooled_q[i].iter().map(|&x| 0.5 + (c - 1) as f64 * omega_r * x).collect();
            want += checked::dirichlet_lpdf(&q.p, &conc).unwrap();
            want += checked::multinomial_lpmf(spec.data[0].row(i), phi_s.row(i)).unwrap();
        }
        let got = full.log_density(&u);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn layout_mismatch_is_an_error() {
    let model = Model::new(toy_spec(Variant::Homogeneous, 3, 1, 1)).unwrap();
    assert!(matches!(model.log_posterior(&[0.0; 3]), Err(Error::Layout { .. })));
    assert!(model.constrain(&[0.0; 40]).is_err());
}

#[test]
fn constrained_points_satisfy_invariants() {
    for variant in Variant::ALL {
        let model = Model::new(toy_spec(variant, 5, 3, 2)).unwrap();
        let mut r = rng::stream(5, 0);
        for _ in 0..20 {
            let u: Vec<f64> = (0..model.dim()).map(|_| 16.0 * rng::uniform(&mut r) - 8.0).collect();
            let b = model.constrain(&u).unwrap();
            assert!((b.pull.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.accuracy.iter().all(|&a| (0.0..=1.0).contains(&a)));
            let m = b.pooled_matrix().unwrap();
            for s in 0..b.n_countries() {
                b.country_matrix(s).unwrap();
            }
            assert_eq!(b.scalars().unwrap().len(), model.scalar_names().len());
            assert_eq!(m.dim(), 5);
        }
    }
}

#[test]
fn prior_accuracy_concentrates_with_large_shapes() {
    let mut spec = toy_spec(Variant::Base, 3, 1, 1);
    spec.hyper.accuracy_shape = [1e4, 1e4];
    let model = Model::new(spec).unwrap();
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|k| model.prior_sample(k)).map(|b| b.accuracy[0]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    // Beta(b, b) has sd sqrt(1 / (4 (2b + 1)))
    let sd = (1.0f64 / (4.0 * 20_001.0)).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    assert!(draws.iter().all(|a| (a - 0.5).abs() < 6.0 * sd));
}

#[test]
fn prior_draws_are_valid_and_reproducible() {
    for variant in Variant::ALL {
        let model = Model::new(toy_spec(variant, 4, 2, 3)).unwrap();
        assert_eq!(model.prior_sample(5), model.prior_sample(5));
        for seed in 0..200 {
            let b = model.prior_sample(seed);
            assert!((b.pull.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            b.scalars().unwrap();
        }
    }
}

#[test]
fn huge_effect_sizes_copy_the_pooled_matrix() {
    let base = BaseParams::new(vec![0.6, 0.3, 0.5, 0.2], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let effects = EffectSizes {
        omega_p: 50.0,
        omega_s: 1e6,
        omega_r: 1e6,
    };
    let mut r = rng::stream(44, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let b = sample_hierarchy(Variant::FullyHet, 3, 0.5, &base, &effects, &mut r);
        let pooled = b.pooled_matrix().unwrap();
        for s in 0..3 {
            worst = worst.max(b.country_matrix(s).unwrap().max_abs_diff(&pooled));
        }
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn strong_pull_prior_mean_approaches_base_model() {
    let base = BaseParams::new(vec![0.6, 0.3, 0.5], vec![0.5, 0.3, 0.2]).unwrap();
    let m = build_base_matrix(&base);
    let mut r = rng::stream(45, 0);
    for omega_p in [10.0, 1e3, 1e5] {
        let effects = EffectSizes {
            omega_p,
            omega_s: f64::INFINITY,
            omega_r: f64::INFINITY,
        };
        let n = 20_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let b = sample_hierarchy(Variant::Homogeneous, 1, 0.5, &base, &effects, &mut r);
            mean += b.sensitivity.unwrap()[0] / n as f64;
        }
        let kappa = 2.0 * omega_p;
        let want = (0.5 + kappa * m.get(0, 0)) / (1.0 + kappa);
        let sd = (want * (1.0 - want) / (kappa + 2.0)).sqrt();
        assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt(), "{omega_p}: {mean} vs {want}");
    }
}
