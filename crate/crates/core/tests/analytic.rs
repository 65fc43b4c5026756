use nalgebra::{DMatrix, DVector};
use pkgsv::analytic::*;
use pkgsv::model::{LinearGaussianModel, LinearGaussianSpec, LinearPolicy, PosteriorEnsemble, ResidualSpec};
use pkgsv::shapley::{exact_shapley, shapley_estimate, ValueFunction, ValueMode};

fn scalar(h: usize, beta_s: f64, beta_a: f64, theta: f64) -> LinearInstance {
    let spec = LinearGaussianSpec {
        n: 1,
        m: 1,
        horizon: h,
        state_labels: None,
        action_labels: None,
        s0: vec![0.0],
        mu_s: vec![vec![0.0]; h],
        mu_a: vec![vec![0.0]; h],
        beta_s: vec![vec![vec![beta_s]]; h - 1],
        beta_a: vec![vec![vec![beta_a]]; h - 1],
        residual: ResidualSpec::Diagonal { sd: vec![vec![1.0]; h] },
    };
    let model = LinearGaussianModel::from_spec(spec).unwrap();
    let policy = LinearPolicy::for_linear_model(&model, vec![DMatrix::from_element(1, 1, theta); h - 1]).unwrap();
    let reward = LinearReward {
        m: vec![0.0; h],
        b: vec![DVector::zeros(1); h],
        c: vec![DVector::from_element(1, 1.0); h],
    };
    LinearInstance { model, policy, reward }
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn scalar_chain_pathway_products() {
    let inst = scalar(3, 0.5, 0.2, 1.0);
    let maps = period_maps(&inst.model, inst.policy.thetas());
    assert!((pathway_direct(&maps, 1, 1, 2)[(0, 0)] - 0.49).abs() < 1e-15);
    assert!((pathway_from_start(&maps, 1)[2][(0, 0)] - 0.49).abs() < 1e-15);
}

#[test]
fn zero_policy_pathway_uses_state_coefficients_only() {
    let inst = random_instance(4, 3, 2, CovarianceKind::Diagonal, 5).unwrap();
    let theta = vec![DMatrix::zeros(3, 2); 3];
    let maps = period_maps(&inst.model, &theta);
    for t in 1..4 {
        assert_eq!(maps[t - 1], inst.model.beta_s(t).transpose());
    }
}

#[test]
fn scalar_predictive_residual_sv() {
    let inst = scalar(2, 0.5, 0.2, 1.0);
    let policy = &inst.policy;
    let report = random_factor_sv_predictive(std::slice::from_ref(&inst.model), policy, &inst.reward, 1.0).unwrap();
    let s2 = report.output_index("s[t=2,k=s1]").unwrap();
    assert!((report.sv[0][s2] - 0.7).abs() < 1e-12);
    let vf = RandomFactorExact::new(&inst.model, policy, &inst.reward, ValueMode::Expectation).unwrap();
    let brute = exhaustive_shapley(&vf).unwrap();
    assert!((brute.sv[0][s2] - 0.7).abs() < 1e-12);
    let zero = random_factor_sv_predictive(std::slice::from_ref(&inst.model), policy, &inst.reward, 0.0).unwrap();
    assert!(zero.sv.iter().flatten().all(|v| *v == 0.0));
    let double = random_factor_sv_predictive(std::slice::from_ref(&inst.model), policy, &inst.reward, 2.0).unwrap();
    for (a, b) in double.sv.iter().flatten().zip(report.sv.iter().flatten()) {
        assert!((a - 2.0 * b).abs() < 1e-14);
    }
}

#[test]
fn scalar_variance_residual_sv() {
    let inst = scalar(2, 0.5, 0.0, 0.0);
    let report = random_factor_sv_variance(std::slice::from_ref(&inst.model), &inst.policy, &inst.reward).unwrap();
    let s2 = report.output_index("s[t=2,k=s1]").unwrap();
    assert!((report.sv[0][s2] - 0.25).abs() < 1e-10);
    assert!((report.sv[1][s2] - 1.0).abs() < 1e-10);
    assert!((report.mean_span[s2] - 1.25).abs() < 1e-12);
}

#[test]
fn scalar_covariances() {
    let inst = scalar(2, 0.5, 0.0, 0.0);
    let maps = period_maps(&inst.model, inst.policy.thetas());
    let table = state_covariance(&inst.model, &maps);
    assert!((table.get(1, 1)[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((table.get(2, 2)[(0, 0)] - 1.25).abs() < 1e-15);
    assert!((table.get(1, 2)[(0, 0)] - 0.5).abs() < 1e-15);
    let (alpha, _) = reward_loadings(&inst.model, inst.policy.thetas(), &inst.reward);
    assert!((reward_variance(&alpha, &table) - 3.25).abs() < 1e-14);
}

#[test]
fn zero_residual_covariance_gives_zero_variances() {
    let inst = random_instance(4, 2, 1, CovarianceKind::Diagonal, 3).unwrap();
    let model = inst.model.with_residual_cov(DMatrix::zeros(8, 8)).unwrap();
    let maps = period_maps(&model, inst.policy.thetas());
    let table = state_covariance(&model, &maps);
    for p in 1..=4 {
        for q in 1..=4 {
            assert_eq!(table.get(p, q).abs().max(), 0.0);
        }
    }
}

#[test]
fn closed_forms_match_exhaustive_oracle_on_random_instances() {
    for trial in 0..12u64 {
        let h = 2 + (trial as usize % 3);
        let n = 1 + (trial as usize % 2);
        let kind = if trial % 2 == 0 { CovarianceKind::Full } else { CovarianceKind::Diagonal };
        let inst = random_instance(h, n, 1, kind, 100 + trial).unwrap();
        let models = std::slice::from_ref(&inst.model);
        let policy = &inst.policy;
        for mode in [ValueMode::Expectation, ValueMode::Variance] {
            let closed = match mode {
                ValueMode::Expectation => random_factor_sv_predictive(models, policy, &inst.reward, 1.0).unwrap(),
                ValueMode::Variance => random_factor_sv_variance(models, policy, &inst.reward).unwrap(),
            };
            let vf = RandomFactorExact::new(&inst.model, policy, &inst.reward, mode).unwrap();
            let oracle = exact_shapley(&vf, 0).unwrap();
            assert!(max_diff(&closed.sv, &oracle) < 1e-9, "trial {trial} {mode:?}");
            assert!(closed.efficiency_residual.iter().all(|r| *r < 1e-9));
        }
    }
}

#[test]
fn covariance_recursion_matches_direct_sums() {
    for trial in 0..10u64 {
        let h = 2 + trial as usize % 7;
        let n = 1 + trial as usize % 4;
        let inst = random_instance(h, n, 2, CovarianceKind::Full, 7 + trial).unwrap();
        let maps = period_maps(&inst.model, inst.policy.thetas());
        let a = state_covariance(&inst.model, &maps);
        let b = state_covariance_direct(&inst.model, inst.policy.thetas());
        assert!(a.max_abs_diff(&b) < 1e-10, "trial {trial}");
    }
}

#[test]
fn analytic_moments_match_simulation() {
    use pkgsv::model::{simulate_batch, PkgModel};
    let inst = random_instance(4, 2, 1, CovarianceKind::Full, 21).unwrap();
    let spec = inst.reward.to_spec();
    let batch = simulate_batch(&inst.model, &inst.policy, &spec, 40_000, 9).unwrap();
    let js: Vec<f64> = batch.iter().map(|t| t.total_reward()).collect();
    let k = inst.model.horizon() * inst.model.n();
    let mut mean = vec![0.0; k + 1];
    let mut var = vec![0.0; k + 1];
    output_means(&inst.model, &inst.policy, &inst.reward, PathwayVariant::Reuse, &mut mean);
    output_variances(&inst.model, &inst.policy, &inst.reward, PathwayVariant::Reuse, &mut var);
    let m = pkgsv::numeric::mean(&js);
    let v = pkgsv::numeric::sample_variance(&js);
    let se = (v / js.len() as f64).sqrt();
    assert!((m - mean[k]).abs() < 4.0 * se, "{m} vs {}", mean[k]);
    assert!((v / var[k] - 1.0).abs() < 0.05, "{v} vs {}", var[k]);
}

#[test]
fn policy_variants_agree() {
    let inst = random_instance(4, 2, 1, CovarianceKind::Full, 33).unwrap();
    let models = std::slice::from_ref(&inst.model);
    let perms = pkgsv::sampling::sample_permutations(6, 5, pkgsv::sampling::PermutationMethod::Random, 1).unwrap();
    for mode in [ValueMode::Expectation, ValueMode::Variance] {
        let reports: Vec<_> = [PathwayVariant::Reuse, PathwayVariant::BruteForce, PathwayVariant::Incremental]
            .into_iter()
            .map(|v| {
                let vf = PolicyExactValue::new(models, &inst.policy, &inst.reward, mode, v).unwrap();
                shapley_estimate(&vf, &perms).unwrap()
            })
            .collect();
        assert!(max_diff(&reports[0].sv, &reports[1].sv) < 1e-10);
        assert!(max_diff(&reports[0].sv, &reports[2].sv) < 1e-10);
        assert_eq!(report_checksum(&reports[0]), report_checksum(&reports[1]));
    }
}

#[test]
fn policy_sv_vanishes_without_gains_or_offsets() {
    let inst = random_instance(3, 2, 1, CovarianceKind::Diagonal, 8).unwrap();
    let models = std::slice::from_ref(&inst.model);
    let zero = inst.policy.masked(&vec![false; inst.policy.num_parameters()]);
    for mode in [ValueMode::Expectation, ValueMode::Variance] {
        let vf = PolicyExactValue::new(models, &zero, &inst.reward, mode, PathwayVariant::Reuse).unwrap();
        assert!(exact_shapley(&vf, 0).unwrap().iter().flatten().all(|v| v.abs() < 1e-15));
    }
    let centred = inst
        .model
        .with_means(
            (1..=3).map(|_| 0.0).take(2).collect(),
            vec![DVector::zeros(2); 3],
            vec![DVector::zeros(1); 3],
        )
        .unwrap();
    let policy = LinearPolicy::for_linear_model(&centred, inst.policy.thetas().to_vec()).unwrap();
    let models = std::slice::from_ref(&centred);
    let vf = PolicyExactValue::new(models, &policy, &inst.reward, ValueMode::Expectation, PathwayVariant::Reuse).unwrap();
    assert!(exact_shapley(&vf, 0).unwrap().iter().flatten().all(|v| v.abs() < 1e-14));
}

#[test]
fn single_member_model_parameter_sv_is_zero() {
    let inst = random_instance(3, 1, 1, CovarianceKind::Diagonal, 4).unwrap();
    let ens = PosteriorEnsemble::single(inst.model.clone());
    let vf = ModelParameterExact::new(&ens, &inst.policy, &inst.reward, ValueMode::Variance).unwrap();
    let sv = exact_shapley(&vf, 0).unwrap();
    assert!(sv.iter().flatten().all(|v| v.abs() < 1e-12));
    let mut g = vec![0.0; vf.num_outputs()];
    vf.evaluate(0, 0, &vec![false; vf.num_inputs()], &mut g).unwrap();
    let mut var = vec![0.0; vf.num_outputs()];
    output_variances(&inst.model, &inst.policy, &inst.reward, PathwayVariant::Reuse, &mut var);
    assert_eq!(g, var);
}

#[test]
fn eq7_subset_form_equals_permutation_average() {
    let inst = random_instance(2, 2, 1, CovarianceKind::Full, 12).unwrap();
    let vf = RandomFactorExact::new(&inst.model, &inst.policy, &inst.reward, ValueMode::Variance).unwrap();
    let subsets = exact_shapley(&vf, 0).unwrap();
    let perms = exhaustive_shapley(&vf).unwrap();
    assert!(max_diff(&subsets, &perms.sv) < 1e-12);
    assert!(all_permutations(9).is_err());
}

#[test]
fn model_parameter_sv_matches_desk_table() {
    // s_2 = (b_s + b_a theta)(s_0 + e_1 - mu_1) + e_2 with s_0 = 1, mu = 0, unit residuals.
    let members: Vec<(f64, f64)> = vec![(0.2, 0.5), (0.6, -0.1), (0.9, 0.3)];
    let theta = 0.7;
    let base = scalar(2, 0.0, 0.0, theta);
    let models: Vec<LinearGaussianModel> = members
        .iter()
        .map(|&(bs, ba)| {
            let spec = LinearGaussianSpec { s0: vec![1.0], ..base.model.to_spec() };
            LinearGaussianModel::from_spec(spec)
                .unwrap()
                .with_coefficients(vec![DMatrix::from_element(1, 1, bs)], vec![DMatrix::from_element(1, 1, ba)])
                .unwrap()
        })
        .collect();
    let ens = PosteriorEnsemble::new("desk", 0, models).unwrap();
    let reward = LinearReward { m: vec![0.0; 2], b: vec![DVector::zeros(1); 2], c: vec![DVector::zeros(1), DVector::from_element(1, 1.0)] };
    let mean_bs = members.iter().map(|m| m.0).sum::<f64>() / 3.0;
    let mean_ba = members.iter().map(|m| m.1).sum::<f64>() / 3.0;
    let moments = |bs: f64, ba: f64| {
        let c = bs + ba * theta;
        (c, c * c + 1.0)
    };
    let pop_var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let g = |mode: ValueMode, u: [bool; 2]| -> f64 {
        let mut total = 0.0;
        for &(bs_j, ba_j) in &members {
            total += match mode {
                ValueMode::Expectation => {
                    let bs = if u[0] { mean_bs } else { bs_j };
                    let ba = if u[1] { mean_ba } else { ba_j };
                    moments(bs, ba).0
                }
                ValueMode::Variance => {
                    let inner: Vec<(f64, f64)> = members
                        .iter()
                        .map(|&(bs_i, ba_i)| moments(if u[0] { bs_i } else { bs_j }, if u[1] { ba_i } else { ba_j }))
                        .collect();
                    let means: Vec<f64> = inner.iter().map(|x| x.0).collect();
                    inner.iter().map(|x| x.1).sum::<f64>() / 3.0 + pop_var(&means)
                }
            };
        }
        total / 3.0
    };
    for mode in [ValueMode::Expectation, ValueMode::Variance] {
        let desk = [
            0.5 * ((g(mode, [true, false]) - g(mode, [false, false])) + (g(mode, [true, true]) - g(mode, [false, true]))),
            0.5 * ((g(mode, [false, true]) - g(mode, [false, false])) + (g(mode, [true, true]) - g(mode, [true, false]))),
        ];
        let vf = ModelParameterExact::new(&ens, &base.policy, &reward, mode).unwrap();
        let sv = exact_shapley(&vf, 0).unwrap();
        let s2 = vf.output_labels().iter().position(|l| l == "s[t=2,k=s1]").unwrap();
        assert!((sv[0][s2] - desk[0]).abs() < 1e-12, "{mode:?}");
        assert!((sv[1][s2] - desk[1]).abs() < 1e-12, "{mode:?}");
    }
}

#[test]
fn simulated_policy_sv_converges_to_exact() {
    use pkgsv::shapley::PolicyValue;
    let mut inst = scalar(3, 0.5, 0.4, 0.8);
    inst.model = inst.model.with_means(vec![1.5], vec![DVector::zeros(1); 3], vec![DVector::zeros(1); 3]).unwrap();
    inst.policy = LinearPolicy::for_linear_model(&inst.model, inst.policy.thetas().to_vec()).unwrap();
    let models = std::slice::from_ref(&inst.model);
    let perms = all_permutations(2).unwrap();
    let spec = inst.reward.to_spec();
    for mode in [ValueMode::Expectation, ValueMode::Variance] {
        let exact = PolicyExactValue::new(models, &inst.policy, &inst.reward, mode, PathwayVariant::Reuse).unwrap();
        let truth = shapley_estimate(&exact, &perms).unwrap();
        let mut runs = Vec::new();
        for seed in 0..20 {
            let mut vf = PolicyValue::new(models, &inst.policy, &spec, mode, seed).unwrap();
            vf.trajectories = 400;
            runs.push(shapley_estimate(&vf, &perms).unwrap());
        }
        for i in 0..2 {
            for o in 0..truth.output_labels.len() {
                let xs: Vec<f64> = runs.iter().map(|r| r.sv[i][o]).collect();
                let se = (pkgsv::numeric::sample_variance(&xs) / xs.len() as f64).sqrt();
                let m = pkgsv::numeric::mean(&xs);
                assert!((m - truth.sv[i][o]).abs() <= 3.0 * se + 1e-12, "{mode:?} input {i} output {o}: {m} vs {}", truth.sv[i][o]);
            }
        }
    }
}

fn shifted_anchors(inst: &LinearInstance) -> LinearPolicy {
    use pkgsv::model::PkgModel;
    let h = inst.model.horizon();
    LinearPolicy::new(
        (1..=h).map(|t| inst.model.mu_s(t).add_scalar(0.3 * t as f64)).collect(),
        (1..=h).map(|t| inst.model.mu_a(t).add_scalar(-0.2)).collect(),
        inst.policy.thetas().to_vec(),
        None,
    )
    .unwrap()
}

#[test]
fn off_anchor_policy_means_match_simulation() {
    use pkgsv::model::{simulate_batch, PkgModel};
    let inst = random_instance(4, 2, 1, CovarianceKind::Diagonal, 52).unwrap();
    let policy = shifted_anchors(&inst);
    let batch = simulate_batch(&inst.model, &policy, &inst.reward.to_spec(), 40_000, 3).unwrap();
    let js: Vec<f64> = batch.iter().map(|t| t.total_reward()).collect();
    let k = inst.model.horizon() * inst.model.n();
    for variant in [PathwayVariant::Reuse, PathwayVariant::BruteForce] {
        let mut mean = vec![0.0; k + 1];
        output_means(&inst.model, &policy, &inst.reward, variant, &mut mean);
        let se = (pkgsv::numeric::sample_variance(&js) / js.len() as f64).sqrt();
        assert!((pkgsv::numeric::mean(&js) - mean[k]).abs() < 4.0 * se, "{variant:?}");
        let last: Vec<f64> = batch.iter().map(|t| t.states[inst.model.horizon() - 1][1]).collect();
        let se = (pkgsv::numeric::sample_variance(&last) / last.len() as f64).sqrt();
        assert!((pkgsv::numeric::mean(&last) - mean[k - 1]).abs() < 4.0 * se, "{variant:?}");
    }
}

#[test]
fn off_anchor_policy_variants_agree() {
    let inst = random_instance(5, 2, 1, CovarianceKind::Full, 61).unwrap();
    let policy = shifted_anchors(&inst);
    let models = std::slice::from_ref(&inst.model);
    let perms = pkgsv::sampling::sample_permutations(8, 4, pkgsv::sampling::PermutationMethod::Random, 2).unwrap();
    let reports: Vec<_> = [PathwayVariant::Reuse, PathwayVariant::BruteForce, PathwayVariant::Incremental]
        .into_iter()
        .map(|v| {
            let vf = PolicyExactValue::new(models, &policy, &inst.reward, ValueMode::Expectation, v).unwrap();
            shapley_estimate(&vf, &perms).unwrap()
        })
        .collect();
    assert!(max_diff(&reports[0].sv, &reports[1].sv) < 1e-10);
    assert!(max_diff(&reports[0].sv, &reports[2].sv) < 1e-10);
}
