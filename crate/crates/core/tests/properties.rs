use std::sync::Arc;

use graph_nls::functionals::{energy, gn_check, j_apply, line_gn_ratio, random_function, sublevel_bound, tangent_project};
use graph_nls::graph::{compact_core, longest_core_edge, GraphDocument};
use graph_nls::minmax::{pnorm_p, sampled_sphere_min, sphere_min_pnorm, sphere_samples, Placement, SeedFamily, SlotLayout};
use graph_nls::ps::ps_sine_sequence;
use graph_nls::soliton::{cutoff_soliton, mass_threshold, SolitonParams};
use graph_nls::solver::{flow_step, SolverConfig};
use graph_nls::{build_mesh, parse_graph, GraphFunction, Mesh, MetricGraph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NETWORK: &str = include_str!("../graphs/network19.json");

fn dumbbell_mesh(h: f64, t: f64) -> (Arc<MetricGraph>, Arc<Mesh>) {
    let g = Arc::new(MetricGraph::dumbbell(4.0).unwrap());
    let mesh = build_mesh(g.clone(), h, t).unwrap();
    (g, mesh)
}

fn random_state(mesh: &Arc<Mesh>, mu: f64, seed: u64) -> GraphFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_function(&GraphFunction::zeros(mesh.clone()), &mut rng).normalized(mu).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soliton_energy_follows_mass_scaling(p in 2.05f64..5.95, mu in 0.05f64..80.0) {
        let s = SolitonParams::new(p, mu).unwrap();
        let unit = SolitonParams::new(p, 1.0).unwrap();
        prop_assert!(rel(s.energy(), mu.powf(2.0 * s.beta + 1.0) * unit.energy()) < 1e-10);
        prop_assert!(rel(s.mass(), mu) < 1e-12);
        prop_assert!(rel(s.sign_point(), mu.powf(-s.beta) * unit.sign_point()) < 1e-12);
        prop_assert!(s.energy() < 0.0 && s.lambda > 0.0);
    }

    #[test]
    fn lagrangian_density_scaling(p in 2.05f64..5.95, mu in 0.05f64..80.0, y in -6.0f64..6.0) {
        let s = SolitonParams::new(p, mu).unwrap();
        let unit = SolitonParams::new(p, 1.0).unwrap();
        // compare at x = μ^{−β} y, measured against the size of ℒ_μ at the peak
        let x = mu.powf(-s.beta) * y / unit.rate;
        let scale = mu.powf(s.alpha * p);
        let expected = scale * unit.lagrangian(mu.powf(s.beta) * x);
        let peak = scale * unit.lagrangian(0.0).abs();
        prop_assert!((s.lagrangian(x) - expected).abs() <= 1e-10 * peak);
    }

    #[test]
    fn soliton_solves_its_ode(p in 2.05f64..5.95, mu in 0.05f64..80.0, y in -15.0f64..15.0) {
        let s = SolitonParams::new(p, mu).unwrap();
        let x = y / s.rate;
        prop_assert!(s.ode_residual(x).abs() < 1e-8 * s.ode_scale());
    }

    #[test]
    fn cutoff_keeps_mass_and_lowers_energy(p in prop::sample::select(vec![3.0, 4.0, 5.0]), ell in 1.0f64..6.0, factor in 1.0f64..3.0) {
        let mu = mass_threshold(p, ell).unwrap() * factor;
        let c = cutoff_soliton(p, mu, ell).unwrap();
        prop_assert!(rel(c.mass(), mu) < 1e-10);
        prop_assert!(c.energy <= c.unscaled_energy + 1e-12 * c.unscaled_energy.abs());
        prop_assert!(c.energy <= c.certified_bound() + 1e-12 * c.certified_bound().abs());
        prop_assert!(c.certified_bound() < 0.0);
    }

    #[test]
    fn sphere_samples_respect_the_minimum(k in 2usize..6, p in 2.1f64..5.9, seed in any::<u64>()) {
        let floor = sphere_min_pnorm(k, p);
        for t in sphere_samples(k, 200, seed) {
            prop_assert!((t.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(pnorm_p(&t, p) >= floor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn sine_sequence_sits_at_its_level(c in 0.1f64..5.0, mu in 0.5f64..10.0, n in 1usize..4) {
        let g = Arc::new(MetricGraph::dumbbell(4.0).unwrap());
        let row = ps_sine_sequence(&g, c, mu, n, 4.0, 0.1).unwrap();
        prop_assert!(rel(row.energy, c) < 1e-14);
        prop_assert!(rel(row.energy_quadrature, c) < 1e-10);
        prop_assert!(rel(row.mass_discrete, mu) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_terms_scale_homogeneously(seed in any::<u64>(), c in -4.0f64..4.0, p in 2.1f64..5.9) {
        let (_, mesh) = dumbbell_mesh(0.05, 6.0);
        let u = random_state(&mesh, 3.0, seed);
        let e = energy(&u, p).unwrap();
        let ec = energy(&u.scaled(c), p).unwrap();
        prop_assert!((ec.kinetic - c * c * e.kinetic).abs() <= 1e-12 * (c * c * e.kinetic).abs().max(1e-300));
        prop_assert!((ec.lp_core - c.abs().powf(p) * e.lp_core).abs() <= 1e-12 * (c.abs().powf(p) * e.lp_core).max(1e-300));
    }

    #[test]
    fn derivative_vanishes_along_u(seed in any::<u64>(), mu in 0.5f64..60.0) {
        let (_, mesh) = dumbbell_mesh(0.05, 6.0);
        let u = random_state(&mesh, mu, seed);
        let scale = energy(&u, 4.0).unwrap().kinetic + u.mesh().lp_core(u.values(), 4.0) + mu;
        prop_assert!(j_apply(&u, &u, mu, 4.0).unwrap().abs() < 1e-12 * scale);
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in any::<u64>(), mu in 0.5f64..60.0) {
        let (_, mesh) = dumbbell_mesh(0.05, 6.0);
        let u = random_state(&mesh, mu, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let v = random_function(&u, &mut rng);
        let once = tangent_project(&u, &v, mu).unwrap();
        let twice = tangent_project(&u, &once, mu).unwrap();
        let diff = once.plus_scaled(&twice, -1.0).unwrap().h1_norm();
        prop_assert!(diff <= 1e-10 * once.h1_norm().max(1e-300));
        prop_assert!(u.l2_dot(&once).unwrap().abs() <= 1e-10 * u.mass().sqrt() * once.mass().sqrt());
    }

    #[test]
    fn sublevel_sets_are_bounded(seed in any::<u64>(), mu in 0.5f64..60.0, p in 2.1f64..5.9) {
        let (_, mesh) = dumbbell_mesh(0.05, 6.0);
        let u = random_state(&mesh, mu, seed);
        let c = gn_check(&u, p).unwrap().ratio.max(line_gn_ratio(p).unwrap());
        prop_assert!(sublevel_bound(&u, mu, p, c).unwrap().holds());
    }

    #[test]
    fn seeds_are_odd_with_fixed_kinetic_energy(k in 2usize..5, seed in any::<u64>()) {
        let g = Arc::new(MetricGraph::dumbbell(4.0).unwrap());
        let layout = SlotLayout::new(&g, k, Placement::LongestEdge).unwrap();
        let mu = 1.1 * layout.mass_threshold(4.0).unwrap();
        let h = layout.aligned_mesh_size(&g, 0.01);
        let mesh = build_mesh(g.clone(), h, 2.0).unwrap();
        let fam = SeedFamily::new(&mesh, layout, mu, 4.0).unwrap();
        let slot_kinetic = fam.slot(0).gradient_sq();
        let slot_lp = mesh.lp_core(fam.slot(0).values(), 4.0);
        for theta in sphere_samples(k, 8, seed) {
            let u = fam.seed(&theta).unwrap();
            let minus: Vec<f64> = theta.iter().map(|t| -t).collect();
            let w = fam.seed(&minus).unwrap();
            prop_assert!(u.values().iter().zip(w.values()).all(|(a, b)| *a == -*b));
            prop_assert!(rel(u.gradient_sq(), k as f64 * slot_kinetic) < 1e-10);
            prop_assert!(mesh.lp_core(u.values(), 4.0) >= k as f64 * slot_lp * (1.0 - 1e-12));
        }
        let sym = vec![1.0 / (k as f64).sqrt(); k];
        let u = fam.seed(&sym).unwrap();
        prop_assert!(rel(mesh.lp_core(u.values(), 4.0), k as f64 * slot_lp) < 1e-10);
    }

    #[test]
    fn flow_keeps_mass_and_never_raises_energy(seed in any::<u64>(), mu in 5.0f64..60.0) {
        let (_, mesh) = dumbbell_mesh(0.05, 6.0);
        let cfg = SolverConfig::new(mu, 4.0);
        let mut u = random_state(&mesh, mu, seed);
        let mut e = energy(&u, 4.0).unwrap().total;
        for _ in 0..10 {
            let out = flow_step(&u, &cfg).unwrap();
            prop_assert!(rel(out.u.mass(), mu) < 1e-12);
            prop_assert!(out.energy <= e + 1e-13 * e.abs());
            e = out.energy;
            u = out.u;
        }
    }

    #[test]
    fn longest_edge_ignores_listing_order(seed in any::<u64>()) {
        let g = parse_graph(NETWORK).unwrap();
        let mut doc: GraphDocument = g.to_document();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(doc.edges.as_mut_slice(), &mut rng);
        rand::seq::SliceRandom::shuffle(doc.vertices.as_mut_slice(), &mut rng);
        let h = MetricGraph::from_document(&doc).unwrap();
        let (a, la) = longest_core_edge(&g);
        let (b, lb) = longest_core_edge(&h);
        prop_assert_eq!(&g.edge(a).id, &h.edge(b).id);
        prop_assert_eq!(la, lb);
    }
}

#[test]
fn core_and_half_lines_partition_the_edges() {
    let g = parse_graph(NETWORK).unwrap();
    let core = compact_core(&g);
    let tails: Vec<usize> = g.half_lines().collect();
    assert_eq!(core.len(), 19);
    assert_eq!(tails.len(), 3);
    let mut all: Vec<usize> = core.iter().chain(&tails).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..g.edges().len()).collect::<Vec<_>>());
    assert!(g.core_is_connected());
}

#[test]
fn stiffness_annihilates_constants_on_the_core() {
    let g = Arc::new(parse_graph(NETWORK).unwrap());
    let mesh = build_mesh(g, 0.1, 3.0).unwrap();
    let ones = vec![1.0; mesh.n_dofs()];
    let k1 = mesh.operators().stiffness.matvec(&ones);
    // tails are cut with a zero end value, so only their last node feels it
    for (c, em) in mesh.edges().iter().enumerate() {
        let end = if em.half_line { em.intervals - 2 } else { em.intervals };
        for i in 0..=end {
            if let Some(d) = mesh.dof(c, i) {
                assert!(k1[d].abs() < 1e-10, "edge {c} node {i}: {}", k1[d]);
            }
        }
    }
}

#[test]
fn brute_force_sphere_minimum() {
    for k in [2, 3, 4] {
        for p in [3.0, 4.0, 5.0] {
            let (m, _) = sampled_sphere_min(k, p, 20_000, 7);
            assert!((m - sphere_min_pnorm(k, p)).abs() < 1e-2, "k={k} p={p} m={m}");
        }
    }
}
