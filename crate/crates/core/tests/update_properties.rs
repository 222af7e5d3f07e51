use htkmeans::prelude::*;
use ndarray::Array2;
use proptest::prelude::*;

/// Random micro instance: data rows, labels covering every cluster, and K.
fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, usize)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(k, p)| {
        (k.max(2)..=12).prop_flat_map(move |n| {
            (
                proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, p), n),
                proptest::collection::vec(0..k, n),
                Just(k),
            )
                .prop_map(|(rows, mut labels, k)| {
                    for (c, l) in labels.iter_mut().take(k).enumerate() {
                        *l = c;
                    }
                    (rows, labels, k)
                })
        })
    })
}

fn lambda() -> impl Strategy<Value = f64> {
    (-3.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

fn objective(data: &DataMatrix, part: &Partition, mu: &Array2<f64>, spec: &PenaltySpec) -> f64 {
    penalized_objective(data, &CenterMatrix::new(mu.clone()).unwrap(), part, spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn update_beats_grid_neighbours((rows, labels, k) in instance(), lam in lambda(), fam in 0usize..4) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let part = Partition::new(labels, k).unwrap();
        let spec = PenaltySpec::new(PenaltyFamily::ALL[fam], lam).unwrap();
        let mu = update_centers(&spec, &data, &part).unwrap().into_array();
        let best = objective(&data, &part, &mu, &spec);
        // Every point of a 0.01-step grid around the solution, one coordinate or
        // one whole column at a time, plus zeroing each column.
        for j in 0..mu.ncols() {
            let mut zeroed = mu.clone();
            zeroed.column_mut(j).fill(0.0);
            prop_assert!(best <= objective(&data, &part, &zeroed, &spec) + 1e-8);
            for step in [-0.02, -0.01, 0.01, 0.02] {
                let mut shifted = mu.clone();
                shifted.column_mut(j).mapv_inplace(|v| v + step);
                prop_assert!(best <= objective(&data, &part, &shifted, &spec) + 1e-8);
                for c in 0..k {
                    let mut moved = mu.clone();
                    moved[[c, j]] += step;
                    prop_assert!(best <= objective(&data, &part, &moved, &spec) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn shrinkage_keeps_sign_and_reduces_size((rows, labels, k) in instance(), lam in lambda(), fam in 1usize..4) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let part = Partition::new(labels, k).unwrap();
        let star = cluster_means(&data, &part).unwrap().into_array();
        let spec = PenaltySpec::new(PenaltyFamily::ALL[fam], lam).unwrap();
        let mu = update_centers(&spec, &data, &part).unwrap().into_array();
        for (m, s) in mu.iter().zip(star.iter()) {
            prop_assert!(m.abs() <= s.abs() + 1e-15);
            prop_assert!(*m == 0.0 || m.signum() == s.signum());
        }
    }

    #[test]
    fn hard_threshold_keeps_or_kills_whole_columns((rows, labels, k) in instance(), lam in lambda()) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let part = Partition::new(labels, k).unwrap();
        let star = cluster_means(&data, &part).unwrap().into_array();
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, lam).unwrap();
        let mu = update_centers(&spec, &data, &part).unwrap().into_array();
        for j in 0..mu.ncols() {
            let col = mu.column(j);
            prop_assert!(col.iter().all(|&v| v == 0.0) || col == star.column(j));
        }
    }

    #[test]
    fn hard_threshold_sparsity_is_monotone_in_lambda((rows, labels, k) in instance(), a in lambda(), b in lambda()) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        let part = Partition::new(labels, k).unwrap();
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        let kept = |l: f64| {
            let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, l).unwrap();
            update_centers(&spec, &data, &part).unwrap().active_set()
        };
        let (ks, kl) = (kept(small), kept(large));
        prop_assert!(kl.iter().all(|j| ks.contains(j)));
    }

    #[test]
    fn standardized_columns_have_unit_moments(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..30)) {
        let raw = DataMatrix::from_rows(&rows).unwrap();
        let Ok(st) = standardize(&raw) else { return Ok(()) };
        let n = st.data.n_obs() as f64;
        for j in 0..st.data.n_vars() {
            let col = st.data.column(j);
            let mean = col.sum() / n;
            let second = col.iter().map(|v| v * v).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((second - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn hard_threshold_matches_best_of_mean_or_zero() {
    let data = DataMatrix::from_rows(&[vec![1.0, 0.2], vec![1.4, -0.1], vec![-1.2, 0.3], vec![-0.8, -0.4]]).unwrap();
    let part = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
    let star = cluster_means(&data, &part).unwrap().into_array();
    for lam in [0.001, 0.01, 0.1, 0.5, 1.0, 2.0] {
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, lam).unwrap();
        let mu = update_centers(&spec, &data, &part).unwrap().into_array();
        let got = objective(&data, &part, &mu, &spec);
        // Enumerate every keep/kill choice per column.
        let mut best = f64::INFINITY;
        for mask in 0..4u32 {
            let mut m = star.clone();
            for j in 0..2 {
                if mask & (1 << j) == 0 {
                    m.column_mut(j).fill(0.0);
                }
            }
            best = best.min(objective(&data, &part, &m, &spec));
        }
        assert!((got - best).abs() < 1e-12, "lambda {lam}: {got} vs {best}");
    }
}

#[test]
fn simulated_data_is_reproducible_bit_for_bit() {
    let cfg = SimConfig {
        n: 40,
        p: 70,
        k: 8,
        mu: 0.6,
        seed: 11,
    };
    let a = simulate_dataset(&cfg).unwrap();
    let b = simulate_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.data.fingerprint(), b.data.fingerprint());
}
