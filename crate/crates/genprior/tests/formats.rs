use genprior::format::{generator_from_str, generator_to_string, matrix_from_str, matrix_to_string};
use genprior::trace_csv::{read_trace, rows, trace_to_string};
use genprior_core::generator::Architecture;
use genprior_core::{Activation, FeedforwardGenerator, IterRecord, Matrix, RunTrace};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|alpha| Activation::Elu { alpha }),
        Just(Activation::Softplus),
        Just(Activation::Tanh),
        Just(Activation::Sigmoid),
        Just(Activation::Identity),
    ]
}

fn architecture() -> impl Strategy<Value = Architecture> {
    (1usize..4, prop::collection::vec((0usize..3, activation(), any::<bool>()), 1..4), 0.1f64..5.0).prop_map(
        |(s, layers, radius)| {
            let mut width = s;
            let layers = layers
                .into_iter()
                .map(|(grow, act, bias)| {
                    width += grow;
                    (width, act, bias)
                })
                .collect();
            Architecture {
                input_dim: s,
                layers,
                domain_radius: radius,
            }
        },
    )
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        Just(5e-324),
        Just(-0.0),
        Just(f64::MAX),
    ]
}

fn record() -> impl Strategy<Value = IterRecord> {
    (
        (1usize..100_000, finite(), finite(), finite(), finite()),
        (finite(), finite(), finite(), prop::option::of(finite()), prop::option::of(finite())),
        any::<u64>(),
    )
        .prop_map(|((t, objective, lagrangian, feas_gap, sigma), (step_w, step_z, stop_metric, dist_w, dist_z), wall_ns)| {
            IterRecord {
                t,
                objective,
                lagrangian,
                feas_gap,
                sigma,
                step_w,
                step_z,
                stop_metric,
                dist_w,
                dist_z,
                wall_ns,
                lambda_norm: 0.0,
            }
        })
}

proptest! {
    #[test]
    fn generator_files_round_trip(arch in architecture(), seed in any::<u64>()) {
        // rank-deficient draws are rejected at construction and skipped
        if let Ok(gen) = FeedforwardGenerator::seeded_uniform(&arch, seed) {
            let back = generator_from_str(&generator_to_string(&gen)).unwrap();
            prop_assert_eq!(back, gen);
        }
    }

    #[test]
    fn traces_round_trip(records in prop::collection::vec(record(), 0..20)) {
        let trace = RunTrace { records, stages: vec![] };
        let back = read_trace(trace_to_string(&trace).as_bytes()).unwrap();
        let expected = rows(&trace);
        prop_assert_eq!(back.len(), expected.len());
        for (a, b) in back.iter().zip(&expected) {
            prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
            prop_assert_eq!(a.dist_z.map(f64::to_bits), b.dist_z.map(f64::to_bits));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn matrices_round_trip(rows in 1usize..5, cols in 1usize..5, data in prop::collection::vec(finite(), 25)) {
        let m = Matrix::from_fn(rows, cols, |i, j| data[i * 5 + j]);
        let back = matrix_from_str(&matrix_to_string(&m)).unwrap();
        prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
