use proptest::prelude::*;
use rand::Rng;

use rcmlab::environment::{bad_cluster, ConductanceField, ConductanceLaw, EdgeOffset, Lattice};
use rcmlab::experiments::{decay_fit, variance_decay_experiment, DecayCentering, DecayConfig, DecayPath};
use rcmlab::functionals::{centered_edge, estimate_script_n, local_drift, LocalFunctional, Polynomial};
use rcmlab::operators::{
    resolvent_solve, semigroup_apply_with, FieldFunction, GeneratorKind, SemigroupBackend, TorusOperator,
};
use rcmlab::rng::stream;
use rcmlab::spectral::{spectral_measure, Centering, SpectralMeasure};
use rcmlab::walker::{additive_functional, additive_functional_between, simulate_srw, simulate_vsrw, WalkerKind};

fn law_strategy() -> impl Strategy<Value = ConductanceLaw> {
    prop_oneof![
        (1.0..5.0f64).prop_map(ConductanceLaw::Constant),
        (0.05..0.95f64, 1.0..10.0f64).prop_map(|(p, high)| ConductanceLaw::TwoPoint { p, low: 1.0, high }),
        (1.0..8.0f64).prop_map(|hi| ConductanceLaw::Uniform { lo: 1.0, hi }),
        (0.05..0.9f64, 0.05..2.0f64, 2.0..1e4f64).prop_map(|(p, eps, cap)| ConductanceLaw::pareto(p, eps, cap)),
    ]
}

fn lattice_strategy() -> impl Strategy<Value = Lattice> {
    prop_oneof![(3usize..40).prop_map(|n| (1, n)), (3usize..10).prop_map(|n| (2, n)), (3usize..6).prop_map(|n| (3, n))]
        .prop_map(|(d, n)| Lattice::new(d, n).unwrap())
}

fn twopoint() -> ConductanceLaw {
    ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 }
}

// ---------------------------------------------------------------- environment

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn conductances_at_least_one(law in law_strategy(), lattice in lattice_strategy(), seed: u64) {
        let f = ConductanceField::<f64>::sample_realization(&law, &lattice, seed, 0).unwrap();
        prop_assert!(f.values().iter().all(|&w| w >= 1.0));
    }

    #[test]
    fn translation_is_a_group_action(lattice in lattice_strategy(), seed: u64, x in 0usize..1000, y in 0usize..1000) {
        let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, seed, 0).unwrap();
        let (x, y) = (x % lattice.sites(), y % lattice.sites());
        let composed = f.translate(x).translate(y).to_field();
        let direct = f.translate(lattice.add(x, y)).to_field();
        prop_assert_eq!(composed.values(), direct.values());
    }

    #[test]
    fn classification_monotone_in_eta(lattice in lattice_strategy(), seed: u64, a in 2.0..40.0f64, b in 2.0..40.0f64) {
        let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, seed, 0).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let (c_lo, c_hi) = (f.classify_sites(lo), f.classify_sites(hi));
        prop_assert!((0..lattice.sites()).all(|x| !c_lo.good[x] || c_hi.good[x]));
    }

    #[test]
    fn bad_cluster_paths_certify(seed: u64, n in 9usize..31, eta_frac in 0.0..1.0f64) {
        let lattice = Lattice::new(2, n).unwrap();
        let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, seed, 0).unwrap();
        let eta = 4.0 * (1.0 + 3.0 * eta_frac);
        let cluster = bad_cluster(&f, eta, 0);
        prop_assume!(!cluster.saturated);
        let class = f.classify_sites(eta);
        for &z in &cluster.sites {
            let path = cluster.certificate(z).unwrap();
            prop_assert_eq!(path[0], 0);
            prop_assert_eq!(*path.last().unwrap(), z);
            for w in path.windows(2) {
                prop_assert!(lattice.edge_between(w[0], w[1]).is_some());
            }
            for &v in path.iter().skip(1).take(path.len().saturating_sub(2)) {
                prop_assert!(class.is_bad(v));
            }
        }
    }
}

// ---------------------------------------------------------------- operators

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn semigroup_property(seed: u64, n in 3usize..8, d in 1usize..=2, s in 0.01..5.0f64, t in 0.01..5.0f64) {
        let lattice = Lattice::new(d, n).unwrap();
        let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, seed, 0).unwrap();
        let op = TorusOperator::build(&f, GeneratorKind::Conductance);
        let g = local_drift(d, &twopoint()).evaluate_all(&f).unwrap();
        for backend in [SemigroupBackend::Dense, SemigroupBackend::Uniformization] {
            let two_step = semigroup_apply_with(&op, &semigroup_apply_with(&op, &g, s, backend).unwrap(), t, backend).unwrap();
            let one_step = semigroup_apply_with(&op, &g, s + t, backend).unwrap();
            let scale = g.sup_norm().max(1e-300);
            prop_assert!(two_step.max_abs_diff(&one_step) / scale < 1e-8);
        }
    }

    #[test]
    fn resolvent_laplace_identity(seed: u64, n in 3usize..8, d in 1usize..=2, mu in 0.05..5.0f64) {
        let lattice = Lattice::new(d, n).unwrap();
        let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, seed, 0).unwrap();
        let op = TorusOperator::build(&f, GeneratorKind::Conductance);
        let g = centered_edge(d, &twopoint()).evaluate_all(&f).unwrap();
        let m = spectral_measure(&op, &g, Centering::Raw).unwrap();
        // ∫_0^∞ e^{−μt} variance(t/2) dt = (1/μ) ∫_0^1 variance(−ln u/(2μ)) du, composite Simpson
        let k = 20_000;
        let h = 1.0 / k as f64;
        let q: f64 = (0..=k)
            .map(|i| {
                let u = i as f64 * h;
                let v = if i == 0 { m.mass_at_zero() } else { m.variance(-u.ln() / (2.0 * mu)) };
                let c = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                c * v
            })
            .sum::<f64>()
            * h
            / (3.0 * mu);
        let direct = resolvent_solve(&op, &g, mu).unwrap().inner(&g);
        prop_assert!((q - direct).abs() <= 1e-5 * direct.abs().max(1e-12), "{q} vs {direct}");
    }
}

// ---------------------------------------------------------------- functionals

fn poly_strategy() -> impl Strategy<Value = Vec<(Vec<i64>, usize, u32, f64)>> {
    proptest::collection::vec((proptest::collection::vec(-1i64..=1, 2), 0usize..2, 1u32..=3, -2.0..2.0f64), 1..=4)
}

fn poly_functional(terms: &[(Vec<i64>, usize, u32, f64)], law: &ConductanceLaw) -> LocalFunctional {
    let mut p = Polynomial::constant(2, 0.5);
    for (base, axis, power, coef) in terms {
        p = p.with_term(*coef, &[(EdgeOffset::new(base.clone(), *axis), *power)]);
    }
    LocalFunctional::polynomial("p", p, law)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn evaluation_is_local(terms in poly_strategy(), seed: u64, edge in 0usize..10_000, value in 1.0..4.0f64) {
        let law = twopoint();
        let f = poly_functional(&terms, &law);
        let lattice = Lattice::new(2, 9).unwrap();
        let mut field = ConductanceField::<f64>::sample_realization(&law, &lattice, seed, 0).unwrap();
        let x = 40;
        let stencil: Vec<usize> = f.stencil().iter().map(|o| lattice.edge_at(x, o)).collect();
        let e = edge % lattice.edges();
        prop_assume!(!stencil.contains(&e));
        let before = f.evaluate_at(&field, x).unwrap();
        field.set(e, value).unwrap();
        prop_assert_eq!(before, f.evaluate_at(&field, x).unwrap());
    }

    #[test]
    fn oscillation_bounds_single_edge_changes(terms in poly_strategy(), seed: u64, which: usize, u in 0.0..1.0f64) {
        let law = ConductanceLaw::Uniform { lo: 1.0, hi: 3.0 };
        let f = poly_functional(&terms, &law);
        let osc = f.oscillation().unwrap().to_vec();
        let lattice = Lattice::new(2, 9).unwrap();
        let mut field = ConductanceField::<f64>::sample_realization(&law, &lattice, seed, 0).unwrap();
        let i = which % f.stencil().len();
        let x = 40;
        let before = f.evaluate_at(&field, x).unwrap();
        field.set(lattice.edge_at(x, &f.stencil()[i]), 1.0 + 2.0 * u).unwrap();
        let after = f.evaluate_at(&field, x).unwrap();
        prop_assert!((after - before).abs() <= osc[i] * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn monte_carlo_mean_matches_hint() {
    let law = twopoint();
    let lattice = Lattice::new(2, 16).unwrap();
    let terms = vec![(vec![0, 0], 0, 2, 1.0), (vec![-1, 0], 1, 1, -0.7), (vec![0, 1], 0, 3, 0.1)];
    for f in [local_drift(2, &law), centered_edge(2, &law), poly_functional(&terms, &law)] {
        let hint = f.mean_hint().unwrap();
        let means: Vec<f64> = (0..400)
            .map(|r| f.evaluate_all(&ConductanceField::<f64>::sample_realization(&law, &lattice, 3, r).unwrap()).unwrap().mean())
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        let se = (var / means.len() as f64).sqrt();
        assert!((m - hint).abs() <= 3.0 * se + 1e-12, "{}: {m} vs {hint} (se {se})", f.name());
    }
}

#[test]
fn nonzero_mean_is_flagged_divergent() {
    let law = twopoint();
    let lattice = Lattice::new(1, 64).unwrap();
    let raw = LocalFunctional::polynomial(
        "omega",
        Polynomial::constant(1, 0.0).with_term(1.0, &[(EdgeOffset::unit(1, 0, true), 1)]),
        &law,
    );
    assert!(raw.mean_hint().unwrap().abs() > 0.0);
    assert!(estimate_script_n(&raw, &law, &lattice, 8, 16, 1).unwrap().divergent);
}

// ---------------------------------------------------------------- walker

#[test]
fn holding_times_have_mean_inverse_rate() {
    let lattice = Lattice::new(1, 5).unwrap();
    let field = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, 11, 0).unwrap();
    let traj = simulate_vsrw(&field, 0, 40_000.0, &mut stream(11, 0, 0)).unwrap();
    let mut sum = [0.0; 5];
    let mut count = [0usize; 5];
    let mut prev = 0.0;
    let mut site = traj.start;
    for (&t, &y) in traj.times.iter().zip(&traj.sites) {
        sum[site] += t - prev;
        count[site] += 1;
        prev = t;
        site = y;
    }
    for x in 0..5 {
        let expected = 1.0 / field.total_jump_rate(x);
        let mean = sum[x] / count[x] as f64;
        assert!((mean - expected).abs() <= 4.0 * expected / (count[x] as f64).sqrt(), "site {x}");
    }
}

#[test]
fn two_time_law_is_symmetric() {
    let lattice = Lattice::new(1, 4).unwrap();
    let field = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, 5, 0).unwrap();
    let mut counts = [[0u64; 4]; 4];
    let mut rng = stream(5, 0, 1);
    for _ in 0..100_000 {
        let x = rng.random_range(0..4);
        let traj = simulate_vsrw(&field, x, 0.7, &mut rng).unwrap();
        counts[x][traj.site_at(0.7).unwrap()] += 1;
    }
    for x in 0..4 {
        for y in 0..x {
            let (a, b) = (counts[x][y] as f64, counts[y][x] as f64);
            assert!((a - b).abs() <= 4.0 * (a + b).sqrt(), "({x},{y}): {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn additive_functional_is_additive(seed: u64, a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let law = twopoint();
        let lattice = Lattice::new(2, 8).unwrap();
        let field = ConductanceField::<f64>::sample_realization(&law, &lattice, seed, 0).unwrap();
        let traj = simulate_vsrw(&field, 0, 10.0, &mut stream(seed, 0, 0)).unwrap();
        let f = local_drift(2, &law);
        let (a, b) = (a.min(b), a.max(b));
        let whole = additive_functional(&field, &f, &traj, b).unwrap();
        let split = additive_functional(&field, &f, &traj, a).unwrap()
            + additive_functional_between(&field, &f, &traj, a, b).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs() + split.abs()));
    }

    #[test]
    fn unit_field_walk_matches_simple_walk(seed: u64, d in 1usize..=3, start in 0usize..27) {
        let lattice = Lattice::new(d, 3).unwrap();
        let field = ConductanceField::<f64>::constant(lattice.clone(), 1.0).unwrap();
        let start = start % lattice.sites();
        let v = simulate_vsrw(&field, start, 20.0, &mut stream(seed, 0, 0)).unwrap();
        let s = simulate_srw(&lattice, start, 20.0, &mut stream(seed, 0, 0)).unwrap();
        prop_assert_eq!(v, s);
    }
}

// ---------------------------------------------------------------- spectral

#[test]
fn i_k_mu_scales_linearly_when_alpha_exceeds_two() {
    for alpha in [2.5, 3.0, 4.0] {
        let m = SpectralMeasure::power_law(alpha, 10_000, 1e-12, 1.0).unwrap();
        for k in [0.0, 1.0, 3.0] {
            let ratios: Vec<f64> = (0..=12)
                .map(|i| 1e-4 * 1e3f64.powf(i as f64 / 12.0))
                .map(|mu| m.i_k_mu(k, mu).unwrap().abs() / mu)
                .collect();
            let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
            assert!(lo > 0.0 && hi / lo < 10.0, "α={alpha} k={k}: {lo}..{hi}");
        }
    }
}

// ---------------------------------------------------------------- experiments

#[test]
fn power_law_curves_recover_their_exponent() {
    for alpha in [0.5, 1.0, 1.5, 2.5, 4.0] {
        let m = SpectralMeasure::power_law(alpha, 10_000, 1e-12, 1.0).unwrap();
        let times: Vec<f64> = (0..=24).map(|i| 10.0 * 1e3f64.powf(i as f64 / 24.0)).collect();
        let fit = decay_fit(&m.variance_curve(&times).unwrap(), Some((10.0, 1e4))).unwrap();
        assert!((fit.alpha() - alpha).abs() < 0.1, "α={alpha}: {}", fit.alpha());
    }
}

fn small_decay(path: DecayPath) -> DecayConfig {
    let law = twopoint();
    let mut cfg = DecayConfig::new(law, 1, 16, centered_edge(1, &law), WalkerKind::Conductance, vec![0.5, 1.0, 2.0, 4.0]);
    cfg.realizations = 24;
    cfg.seed = 9;
    cfg.path = path;
    cfg.centering = DecayCentering::LawMean;
    cfg.walks_per_field = 4000;
    cfg.target = None;
    cfg
}

#[test]
fn exact_and_monte_carlo_paths_agree() {
    let exact = variance_decay_experiment(&small_decay(DecayPath::Exact)).unwrap().curve;
    let mc = variance_decay_experiment(&small_decay(DecayPath::MonteCarlo)).unwrap().curve;
    let (se_exact, se_mc) = (exact.stderr.unwrap(), mc.stderr.unwrap());
    for i in 0..exact.times.len() {
        let pooled = (se_exact[i].powi(2) + se_mc[i].powi(2)).sqrt();
        assert!((exact.values[i] - mc.values[i]).abs() <= 3.0 * pooled, "t={}: {} vs {}", exact.times[i], exact.values[i], mc.values[i]);
    }
}

#[test]
fn experiments_reproduce_from_seed() {
    let a = variance_decay_experiment(&small_decay(DecayPath::MonteCarlo)).unwrap();
    let b = variance_decay_experiment(&small_decay(DecayPath::MonteCarlo)).unwrap();
    assert_eq!(a.curve.values, b.curve.values);
    assert_eq!(a.report.config_text(), b.report.config_text());
}

#[test]
fn centered_measure_has_no_kernel_mass() {
    let lattice = Lattice::new(3, 6).unwrap();
    let f = ConductanceField::<f64>::sample_realization(&twopoint(), &lattice, 1, 0).unwrap();
    let op = TorusOperator::build(&f, GeneratorKind::Simple);
    let g = FieldFunction::from_fn(lattice.sites(), |x| 1.0 + (x as f64).sin());
    let m = spectral_measure(&op, &g, Centering::Center).unwrap();
    assert_eq!(m.mass_at_zero(), 0.0);
    assert!((m.total_mass() - g.centered().mean_square()).abs() < 1e-12);
}
