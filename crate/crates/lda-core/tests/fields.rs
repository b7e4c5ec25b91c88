//! Transition fields, fluid limits and the cubic path system.

use std::sync::Arc;

use proptest::prelude::*;

use lda_core::algorithms::{make_algorithm, AlgorithmParams};
use lda_core::ode::{
    cubic_is_system, prioritised_fluid_limit, rk4_integrate, GenericField, IsVariant, Rk4Options, TransitionField,
    CUBIC_IS_INITIAL,
};

fn field(name: &str, r: u32) -> GenericField {
    GenericField::new(make_algorithm(name, &AlgorithmParams { r, ..AlgorithmParams::default() }).unwrap())
}

/// Densities over the neutral degree types of a native algorithm, with a
/// point mass of at least 0.1.
fn native_state(r: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, r as usize).prop_filter("enough points", |w| {
        w.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v).sum::<f64>() >= 0.1
    })
}

fn embed(f: &GenericField, by_degree: &[f64]) -> Vec<f64> {
    let spec = f.spec();
    let mut y = vec![0.0; f.dim()];
    for (d, &v) in by_degree.iter().enumerate() {
        y[lda_core::ode::neutral_id(spec, d as u32 + 1)] = v;
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Query-graph probabilities and the dropped residual sum to one.
    #[test]
    fn query_distribution_is_normalised(by_degree in native_state(3), name in prop::sample::select(vec!["min_degree_is", "min_degree_dom", "dz_is"])) {
        let f = field(name, 3);
        let y = embed(&f, &by_degree);
        for d in 1..=3u32 {
            let i = lda_core::ode::neutral_id(f.spec(), d);
            let dist = f.enumerate(i, &y).unwrap();
            let total: f64 = dist.graphs.iter().map(|(_, p)| p).sum::<f64>() + dist.residual;
            prop_assert!((total - 1.0).abs() < 1e-12, "{} degree {}: {}", name, d, total);
        }
    }

    /// The field moves little under small perturbations of the state.
    #[test]
    fn field_is_lipschitz(by_degree in native_state(3), dir in prop::collection::vec(-1.0..1.0f64, 3)) {
        let f = field("min_degree_is", 3);
        let h = 1e-6;
        let y = embed(&f, &by_degree);
        let moved: Vec<f64> = by_degree.iter().zip(&dir).map(|(v, d)| (v + h * d).max(0.0)).collect();
        let z = embed(&f, &moved);
        let step = y.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assume!(step > 0.0);
        for d in 1..=3u32 {
            let i = lda_core::ode::neutral_id(f.spec(), d);
            let (a, b) = (f.eval(i, &y).unwrap(), f.eval(i, &z).unwrap());
            let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(diff / step < 1e3, "degree {}: quotient {}", d, diff / step);
        }
    }
}

#[test]
fn mixing_keeps_degree_one_empty() {
    for variant in [IsVariant::Base, IsVariant::Improved] {
        let opts = Rk4Options { h: 1e-4, record_every: 1, stop_at_boundary: true };
        let sol = rk4_integrate(&cubic_is_system(variant), 0.0, &CUBIC_IS_INITIAL, 5.0, &opts).unwrap();
        let worst = sol.ys.iter().map(|y| y[0].abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{variant:?}: {worst}");
    }
}

fn fluid(name: &str, r: u32) -> f64 {
    prioritised_fluid_limit(Arc::new(field(name, r)), r, 1e-3, 10.0).unwrap().outputs[0]
}

#[test]
fn fluid_limits_match_published_table() {
    for (r, alpha, gamma) in [(3, 0.43475, 0.27942), (4, 0.39213, 0.24399)] {
        let a = fluid("dz_is", r);
        let g = fluid("min_degree_dom", r);
        assert!((a - alpha).abs() < 1e-4, "independent set r={r}: {a} vs {alpha}");
        assert!((g - gamma).abs() < 2e-5, "dominating set r={r}: {g} vs {gamma}");
    }
}
