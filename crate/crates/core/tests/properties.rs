mod common;

use common::{conj, random_simplex, rho, Family};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regbandit::environment::{ArmSpec, EnvironmentSpec, LambdaFunction, NoiseFamily};
use regbandit::evaluation::{oracle_pstar, simplex_minimize, Evaluator, NodeSet};
use regbandit::orchestrator::{run_algorithm, RunConfig};
use regbandit::ucfw::{
    make_presample_schedule, presample_schedule_capped, MarginSettings, ScheduleInput,
};
use regbandit::{BinGrid, CoreRegularizer, Error, Regime, Regularizer, SimplexPoint};

fn family(index: usize, amplitude: f64) -> Family {
    match index % 3 {
        0 => Family::Entropy,
        1 => Family::Kl(amplitude),
        _ => Family::L2(amplitude),
    }
}

fn evaluator(
    beta: f64,
    lambda: LambdaFunction,
    family: Family,
    bins: usize,
    nodes: usize,
) -> Evaluator {
    let env = EnvironmentSpec::default().build(beta, lambda).unwrap();
    let grid = BinGrid::new(bins, 1).unwrap();
    let reg: Regularizer = family.spec().parse().unwrap();
    Evaluator::new(env, reg, NodeSet::quadrature(grid, nodes).unwrap()).unwrap()
}

fn random_policy(bins: usize, k: usize, seed: u64) -> Vec<SimplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..bins)
        .map(|_| SimplexPoint::new(random_simplex(&mut rng, k, 1e-3)).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decomposition_adds_up(
        beta in 0.2f64..=1.0,
        lambda in 0.05f64..1.0,
        fam in 0usize..3,
        amplitude in 0.0f64..0.9,
        bins in 1usize..12,
        seed in any::<u64>(),
    ) {
        let ev = evaluator(beta, LambdaFunction::Constant(lambda), family(fam, amplitude), bins, 256);
        let report = ev.regret_of(&random_policy(bins, 3, seed), 10_000).unwrap();
        prop_assert!(report.approximation_error >= -1e-10);
        prop_assert!(report.estimation_error >= -1e-10);
        let gap = report.regret - report.estimation_error - report.approximation_error;
        prop_assert!(gap.abs() <= 1e-8, "{}", gap);
        let conjugate = ev.approximation_error_conjugate().unwrap();
        prop_assert!((conjugate - report.approximation_error).abs() <= 1e-8);
    }

    #[test]
    fn flat_means_have_no_approximation_error(
        means in prop::collection::vec(0.05f64..0.95, 2..5),
        lambda in 0.05f64..1.0,
        bins in 1usize..10,
    ) {
        let spec = EnvironmentSpec {
            dim: 1,
            holder_constant: 1.0,
            clamp: [0.05, 0.95],
            arms: means
                .iter()
                .map(|&m| ArmSpec { family: NoiseFamily::Bernoulli, offset: m, slope: 0.0, anchor: vec![0.5] })
                .collect(),
        };
        let env = spec.build(0.5, LambdaFunction::Constant(lambda)).unwrap();
        let grid = BinGrid::new(bins, 1).unwrap();
        let ev = Evaluator::new(env, Regularizer::Entropy, NodeSet::quadrature(grid, 64).unwrap()).unwrap();
        prop_assert!(ev.approximation_error().unwrap().abs() <= 1e-12);
    }

    #[test]
    fn reduced_form_differs_by_the_offset(
        beta in 0.2f64..=1.0,
        fam in 1usize..3,
        amplitude in 0.0f64..0.9,
        bins in 1usize..8,
        seed in any::<u64>(),
    ) {
        let lambda = LambdaFunction::Ramp { slope: 0.5, offset: 0.1 };
        let ev = evaluator(beta, lambda, family(fam, amplitude), bins, 128);
        let policy = random_policy(bins, 3, seed);
        let direct = ev.piecewise_loss(&policy).unwrap();
        let reduced = ev.piecewise_loss_reduced(&policy).unwrap();
        prop_assert!((direct - reduced - ev.offset_integral().unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn bin_minimum_matches_conjugate(
        means in prop::collection::vec(0.0f64..1.0, 2..6),
        lambda in 0.05f64..2.0,
    ) {
        let k = means.len();
        let x = [0.5];
        let objective = |p: &[f64]| {
            means.iter().zip(p).map(|(m, q)| m * q).sum::<f64>() + lambda * rho(Family::Entropy, p, &x)
        };
        let gradient = |p: &[f64]| {
            means.iter().zip(p).map(|(m, q)| m + lambda * (1.0 + q.max(1e-300).ln())).collect()
        };
        let p = simplex_minimize(k, objective, gradient).unwrap();
        let y: Vec<f64> = means.iter().map(|m| -m / lambda).collect();
        let closed = -lambda * conj(Family::Entropy, &y, &x);
        prop_assert!((objective(p.as_slice()) - closed).abs() <= 1e-7);
    }

    #[test]
    fn oracle_matches_numerical_minimum(
        means in prop::collection::vec(0.0f64..1.0, 2..5),
        lambda in 0.05f64..2.0,
        fam in 0usize..3,
        amplitude in 0.0f64..0.9,
        x in 0.0f64..1.0,
    ) {
        let family = family(fam, amplitude);
        let reg: Regularizer = family.spec().parse().unwrap();
        let k = means.len();
        let point = [x];
        let closed = oracle_pstar(&point, &means, lambda, &reg).unwrap();
        let grad = |p: &[f64]| {
            common::rho_grad(family, &p.iter().map(|v| v.max(1e-300)).collect::<Vec<_>>(), &point)
                .iter()
                .zip(&means)
                .map(|(g, m)| m + lambda * g)
                .collect()
        };
        let numeric = simplex_minimize(
            k,
            |p| means.iter().zip(p).map(|(m, q)| m * q).sum::<f64>() + lambda * rho(family, p, &point),
            grad,
        )
        .unwrap();
        prop_assert!(common::sup_dist(closed.as_slice(), numeric.as_slice()) <= 1e-5);
    }

    #[test]
    fn schedules_are_well_formed(
        regime in prop::sample::select(vec![Regime::Slow, Regime::Fast, Regime::Intermediate]),
        lambda_bar in 0.0f64..3.0,
        occupancy in 1.0f64..1e5,
        arms in 1usize..6,
        bins_per_axis in 1usize..20,
        rank_frac in 0.0f64..1.0,
        beta in 0.2f64..=1.0,
        cap in 0.05f64..0.49,
    ) {
        let total = bins_per_axis;
        let input = ScheduleInput {
            regime,
            core: CoreRegularizer::Entropy,
            lambda_bar,
            occupancy,
            arms,
            rank: 1 + ((total - 1) as f64 * rank_frac) as usize,
            bins_per_axis,
            dim: 1,
            beta,
            margin: MarginSettings::default(),
        };
        match make_presample_schedule(&input) {
            Ok(s) => {
                prop_assert!(s.mixture_weight >= 0.0 && s.mixture_weight < 0.5);
                prop_assert_eq!(s.per_arm_counts.len(), arms);
                prop_assert!(s.per_arm_counts.windows(2).all(|w| w[0] == w[1]));
                prop_assert_eq!(s.is_empty(), s.total_count() == 0);
                if s.is_empty() {
                    prop_assert_eq!(s.mixture_weight, 0.0);
                } else {
                    let expected = SimplexPoint::uniform(arms);
                    prop_assert_eq!(&s.base_point, &expected);
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::PresampleTooLarge { .. }), "{e}"),
        }
        let (capped, was_capped) = presample_schedule_capped(&input, cap).unwrap();
        prop_assert!(capped.mixture_weight < 0.5);
        if was_capped {
            prop_assert_eq!(capped.mixture_weight, cap);
        }
        if lambda_bar == 0.0 || arms < 2 {
            prop_assert!(capped.is_empty());
        }
    }
}

fn smooth_spec() -> EnvironmentSpec {
    let arm = |family, offset, slope, anchor| ArmSpec {
        family,
        offset,
        slope,
        anchor: vec![anchor],
    };
    EnvironmentSpec {
        dim: 1,
        holder_constant: 1.0,
        clamp: [0.05, 0.95],
        arms: vec![
            arm(NoiseFamily::Bernoulli, 0.2, 0.4, -0.5),
            arm(NoiseFamily::TruncatedExponential, 0.7, -0.3, 1.5),
            arm(NoiseFamily::TruncatedPoisson, 0.3, 0.2, -1.0),
        ],
    }
}

#[test]
fn quadrature_converges_like_a_midpoint_rule() {
    for fam in 0..3 {
        for &beta in &[0.3, 0.6, 1.0] {
            let env = smooth_spec()
                .build(
                    beta,
                    LambdaFunction::Ramp {
                        slope: 0.6,
                        offset: 0.1,
                    },
                )
                .unwrap();
            let reg: Regularizer = family(fam, 0.5).spec().parse().unwrap();
            for &g in &[8, 16, 32, 64] {
                let policy = random_policy(1, 3, 7 + g as u64);
                let loss = |n: usize| {
                    let nodes = NodeSet::quadrature(BinGrid::new(1, 1).unwrap(), n).unwrap();
                    Evaluator::new(env.clone(), reg, nodes)
                        .unwrap()
                        .piecewise_loss(&policy)
                        .unwrap()
                };
                let (a, b, c) = (loss(g), loss(2 * g), loss(4 * g));
                if (a - b).abs() <= 1e-12 {
                    continue;
                }
                let ratio = (a - b) / (b - c);
                assert!((3.8..=4.2).contains(&ratio), "{fam} {beta} {g}: {ratio}");
            }
        }
    }
}

#[test]
fn quadrature_converges_on_kinked_means() {
    for fam in 0..3 {
        for &beta in &[0.3, 0.6, 1.0] {
            let policy = random_policy(1, 3, 3);
            let lambda = LambdaFunction::Ramp {
                slope: 0.6,
                offset: 0.1,
            };
            let loss = |n: usize| {
                evaluator(beta, lambda, family(fam, 0.5), 1, n)
                    .piecewise_loss(&policy)
                    .unwrap()
            };
            let fine = loss(8192);
            let errors: Vec<f64> = [16, 64, 256, 1024]
                .iter()
                .map(|&g| (loss(g) - fine).abs())
                .collect();
            assert!(
                errors.windows(2).all(|w| w[1] < w[0]),
                "{fam} {beta} {errors:?}"
            );
        }
    }
}

#[test]
fn center_oracle_improves_with_finer_bins() {
    for fam in 0..3 {
        for &beta in &[0.4, 0.7, 1.0] {
            let regrets: Vec<f64> = [4, 8, 16]
                .iter()
                .map(|&bins| {
                    let ev = evaluator(
                        beta,
                        LambdaFunction::Constant(0.3),
                        family(fam, 0.5),
                        bins,
                        512,
                    );
                    let grid = *ev.nodes().grid();
                    let policy: Vec<SimplexPoint> = (0..bins)
                        .map(|b| {
                            let c = grid.center(b);
                            oracle_pstar(
                                &c,
                                &ev.environment().mean_losses(&c),
                                0.3,
                                ev.regularizer(),
                            )
                            .unwrap()
                        })
                        .collect();
                    ev.regret_of(&policy, 10_000).unwrap().regret
                })
                .collect();
            assert!(
                regrets[0] > regrets[1] && regrets[1] > regrets[2],
                "{fam} {beta} {regrets:?}"
            );
        }
    }
}

#[test]
fn contexts_spread_evenly_over_bins() {
    let mut config = RunConfig::new(50_000, 0.5);
    config.bins = Some(16);
    let mut good = 0;
    for seed in 0..100 {
        config.seed = seed;
        let result = run_algorithm(&config).unwrap();
        let lo = 50_000.0 / 32.0;
        let hi = 3.0 * lo;
        if result
            .bins
            .iter()
            .all(|b| (b.contexts as f64) >= lo && (b.contexts as f64) <= hi)
        {
            good += 1;
        }
    }
    assert!(good >= 95, "{good}");
}
