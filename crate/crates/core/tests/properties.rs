use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stablasso_core::data::standardize;
use stablasso_core::ranking::{ranks_to_weights, ridge_holp_xy, Ranking};
use stablasso_core::scenarios::{default_thresholds, f1_curve};
use stablasso_core::stability::{nogueira_stability, select_from_frequencies, SelectionMatrix};

fn matrix(n: usize, p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, n * p).prop_map(move |v| DMatrix::from_vec(n, p, v))
}

fn binary_rows() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..8, 1usize..10)
        .prop_flat_map(|(b, p)| prop::collection::vec(prop::collection::vec(0u8..=1, p), b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardization_round_trips_and_is_idempotent(x in matrix(12, 5), y in prop::collection::vec(-5.0..5.0f64, 12)) {
        let y = DVector::from_vec(y);
        let Ok(data) = standardize(&x, &y) else { return Ok(()); };
        let (raw_x, raw_y) = data.unstandardize();
        prop_assert!((raw_x - &x).amax() < 1e-9);
        prop_assert!((raw_y - &y).amax() < 1e-9);
        let again = standardize(data.x(), data.y()).unwrap();
        prop_assert!((again.x() - data.x()).amax() < 1e-12);
        prop_assert!((again.y() - data.y()).amax() < 1e-12);
    }

    #[test]
    fn column_permutation_permutes_ranks(x in matrix(6, 9), y in prop::collection::vec(-5.0..5.0f64, 6), shift in 1usize..9) {
        let y = DVector::from_vec(y);
        let perm: Vec<usize> = (0..9).map(|j| (j + shift) % 9).collect();
        let permuted = x.select_columns(&perm);
        let (Ok(a), Ok(b)) = (ridge_holp_xy(&x, &y, 1.0), ridge_holp_xy(&permuted, &y, 1.0)) else { return Ok(()); };
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((b.scores[k] - a.scores[j]).abs() <= 1e-9 * a.scores[j].max(1.0));
        }
    }

    #[test]
    fn weights_follow_rank_order(scores in prop::collection::vec(0.0..100.0f64, 1..40)) {
        let ranking = Ranking::from_scores(scores, 1.0, 1);
        let w = ranks_to_weights(&ranking);
        let w = w.as_slice();
        for a in 0..w.len() {
            prop_assert!((0.0..1.0).contains(&w[a]));
            for b in 0..w.len() {
                if ranking.ranks[a] < ranking.ranks[b] {
                    prop_assert!(w[a] < w[b]);
                }
            }
        }
        let mut sorted = ranking.ranks.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=w.len()).collect::<Vec<_>>());
    }

    #[test]
    fn stability_is_at_most_one_and_permutation_invariant(rows in binary_rows(), rot in 0usize..16) {
        let m = SelectionMatrix::from_dense(&rows, 1.0).unwrap();
        let phi = nogueira_stability(&m);
        prop_assert!(phi <= 1.0 + 1e-15);
        prop_assert!(phi >= -1.0 - 1e-12);

        let b = rows.len();
        let p = rows[0].len();
        let shuffled: Vec<Vec<u8>> = (0..b)
            .map(|i| {
                let row = &rows[(i + rot) % b];
                (0..p).map(|j| row[(j + rot) % p]).collect()
            })
            .collect();
        let other = nogueira_stability(&SelectionMatrix::from_dense(&shuffled, 1.0).unwrap());
        prop_assert_eq!(phi, other);
    }

    #[test]
    fn selection_shrinks_as_the_threshold_rises(freq in prop::collection::vec(0.0..=1.0f64, 1..30)) {
        let mut previous: Option<Vec<usize>> = None;
        for t in default_thresholds() {
            let chosen = select_from_frequencies(&freq, t);
            if let Some(prev) = &previous {
                prop_assert!(chosen.iter().all(|j| prev.contains(j)));
            }
            previous = Some(chosen);
        }
    }

    #[test]
    fn recall_and_selection_size_do_not_grow_with_the_threshold(
        freq in prop::collection::vec(0.0..=1.0f64, 5..30),
        k in 1usize..5,
    ) {
        let truth: Vec<usize> = (0..k).collect();
        let curve = f1_curve(&freq, &truth, &default_thresholds());
        for pair in curve.windows(2) {
            prop_assert!(pair[1].recall <= pair[0].recall);
            prop_assert!(pair[1].selected <= pair[0].selected);
        }
    }
}
