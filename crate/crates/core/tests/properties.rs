use std::collections::BTreeMap;

use btm_core::cooccur::{count_pairs, pairing_strengths, Direction, PairCounts, Pool};
use btm_core::matcher::{AssignmentRow, AssignmentTable};
use btm_core::measures::{measure_report, MeasureError};
use btm_core::{cohens_kappa, SourceCorpus, TopicId};
use proptest::prelude::*;

fn topic_ids(n: usize, outlier: bool) -> Vec<TopicId> {
    let mut ids: Vec<TopicId> = if outlier { vec![TopicId::OUTLIER] } else { vec![] };
    ids.extend((0..n as i32).map(TopicId));
    ids
}

fn pair_counts(native: Vec<TopicId>, cross: Vec<TopicId>, counts: Vec<Vec<u64>>) -> PairCounts {
    let native_totals = counts.iter().map(|r| r.iter().sum()).collect();
    PairCounts {
        direction: Direction::OneToTwo,
        pool: Pool::Both,
        native_topics: native,
        cross_topics: cross,
        counts,
        native_totals,
    }
}

/// Contingency table with 1..=6 native and 1..=5 cross non-outlier topics,
/// each side optionally with an outlier topic.
fn arb_counts() -> impl Strategy<Value = PairCounts> {
    (1usize..=6, any::<bool>(), 1usize..=5, any::<bool>()).prop_flat_map(|(n, n_out, m, m_out)| {
        let native = topic_ids(n, n_out);
        let cross = topic_ids(m, m_out);
        let rows = native.len();
        let cols = cross.len();
        // zero-heavy cells so undefined rows and sparse rows show up
        let cell = prop_oneof![2 => Just(0u64), 3 => 0u64..30];
        prop::collection::vec(prop::collection::vec(cell, cols), rows)
            .prop_map(move |counts| pair_counts(native.clone(), cross.clone(), counts))
    })
}

/// Table whose non-outlier native rows all hold exactly `size` documents.
fn arb_equal_size_counts() -> impl Strategy<Value = PairCounts> {
    (1usize..=6, 1usize..=5, any::<bool>(), 1usize..=20).prop_flat_map(|(n, m, m_out, size)| {
        let cross = topic_ids(m, m_out);
        let cols = cross.len();
        prop::collection::vec(prop::collection::vec(0..cols, size), n).prop_map(move |docs| {
            let counts = docs
                .iter()
                .map(|row| {
                    let mut r = vec![0u64; cols];
                    row.iter().for_each(|&j| r[j] += 1);
                    r
                })
                .collect();
            pair_counts(topic_ids(n, false), cross.clone(), counts)
        })
    })
}

fn has_defined_topic(pc: &PairCounts) -> bool {
    pc.native_topics
        .iter()
        .zip(&pc.native_totals)
        .any(|(t, &n)| !t.is_outlier() && n > 0)
}

proptest! {
    #[test]
    fn defined_rows_lie_on_the_simplex(pc in arb_counts()) {
        let sm = pairing_strengths::<f64>(&pc).unwrap();
        sm.check_simplex().unwrap();
        for (row, &n) in sm.rows.iter().zip(&pc.native_totals) {
            match row {
                Some(r) => {
                    prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    prop_assert!(r.iter().all(|&s| (0.0..=1.0).contains(&s)));
                }
                None => prop_assert_eq!(n, 0),
            }
        }
    }

    #[test]
    fn complements_and_impossibility_bound(pc in arb_counts()) {
        let sm = pairing_strengths::<f64>(&pc).unwrap();
        match measure_report(&sm, 0.5) {
            Ok(m) => {
                prop_assert!(has_defined_topic(&pc));
                prop_assert!((m.c + m.u - 1.0).abs() <= 1e-12);
                prop_assert!((m.c_w + m.u_w - 1.0).abs() <= 1e-12);
                prop_assert!(m.a <= 1.0 - m.u + 1e-12);
                prop_assert!(m.a_w <= 1.0 - m.u_w + 1e-12);
                for t in m.per_topic.iter().filter(|t| !t.topic.is_outlier()) {
                    if let (Some(sa), Some(u)) = (t.alignment_strength, t.uniqueness) {
                        prop_assert!(sa <= 1.0 - u + 1e-12);
                        prop_assert!(sa <= t.closeness_total.unwrap() + 1e-12);
                    }
                }
            }
            Err(MeasureError::NoNativeTopics(_)) => prop_assert!(!has_defined_topic(&pc)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn f32_and_f64_agree(pc in arb_counts()) {
        prop_assume!(has_defined_topic(&pc));
        let m64 = measure_report(&pairing_strengths::<f64>(&pc).unwrap(), 0.5).unwrap();
        let sm32 = pairing_strengths::<f32>(&pc).unwrap();
        sm32.check_simplex().unwrap();
        let m32 = measure_report(&sm32, 0.5).unwrap();
        for (a, b) in [(m64.c, m32.c), (m64.u_w, m32.u_w), (m64.a, m32.a), (m64.a_w, m32.a_w)] {
            prop_assert!((a - f64::from(b)).abs() <= 1e-5);
        }
    }

    #[test]
    fn equal_sizes_make_weighting_irrelevant(pc in arb_equal_size_counts()) {
        let m = measure_report(&pairing_strengths::<f64>(&pc).unwrap(), 0.5).unwrap();
        prop_assert!((m.c - m.c_w).abs() <= 1e-12);
        prop_assert!((m.u - m.u_w).abs() <= 1e-12);
        prop_assert!((m.a - m.a_w).abs() <= 1e-12);
        prop_assert!(m.theta.abs() <= 1e-12);
    }

    #[test]
    fn counts_match_a_naive_tally_and_ignore_row_order(
        rows in prop::collection::vec((any::<bool>(), -1i32..4, -1i32..3), 1..120),
        seed in any::<u64>(),
        native_only in any::<bool>(),
    ) {
        let pool = if native_only { Pool::NativeOnly } else { Pool::Both };
        let rows: Vec<AssignmentRow<f64>> = rows
            .into_iter()
            .enumerate()
            .map(|(k, (one, m1, m2))| AssignmentRow {
                doc_id: format!("d{k}"),
                source_corpus: if one { SourceCorpus::One } else { SourceCorpus::Two },
                model1_topic: TopicId(m1),
                model2_topic: TopicId(m2),
                cross_similarity: 0.0,
            })
            .collect();
        let table = AssignmentTable { model1_topics: topic_ids(4, true), model2_topics: topic_ids(3, true), rows };

        for direction in Direction::BOTH {
            let pc = count_pairs(&table, direction, pool).unwrap();
            let mut naive: BTreeMap<(i32, i32), u64> = BTreeMap::new();
            for r in &table.rows {
                let (native, cross, home) = match direction {
                    Direction::OneToTwo => (r.model1_topic, r.model2_topic, SourceCorpus::One),
                    Direction::TwoToOne => (r.model2_topic, r.model1_topic, SourceCorpus::Two),
                };
                if pool == Pool::Both || r.source_corpus == home {
                    *naive.entry((native.0, cross.0)).or_default() += 1;
                }
            }
            for (i, row) in pc.counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    let key = (pc.native_topics[i].0, pc.cross_topics[j].0);
                    prop_assert_eq!(c, naive.get(&key).copied().unwrap_or(0));
                }
            }
            prop_assert_eq!(pc.total(), naive.values().sum::<u64>());

            let mut shuffled = table.clone();
            let n = shuffled.rows.len();
            let mut state = seed;
            for k in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.rows.swap(k, (state >> 33) as usize % (k + 1));
            }
            prop_assert_eq!(count_pairs(&shuffled, direction, pool).unwrap(), pc);
        }
    }

    #[test]
    fn kappa_is_invariant_under_relabeling(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 2..40),
        perm in Just([0u8, 1, 2, 3]).prop_shuffle(),
    ) {
        let a: BTreeMap<TopicId, u8> = pairs.iter().enumerate().map(|(k, p)| (TopicId(k as i32), p.0)).collect();
        let b: BTreeMap<TopicId, u8> = pairs.iter().enumerate().map(|(k, p)| (TopicId(k as i32), p.1)).collect();
        let relabel = |m: &BTreeMap<TopicId, u8>| -> BTreeMap<TopicId, u8> {
            m.iter().map(|(&k, &v)| (k, perm[v as usize])).collect()
        };
        match cohens_kappa::<f64, _>(&a, &b) {
            Ok(k) => {
                let k2: f64 = cohens_kappa(&relabel(&a), &relabel(&b)).unwrap();
                prop_assert_eq!(k, k2);
                let swapped: f64 = cohens_kappa(&b, &a).unwrap();
                prop_assert_eq!(k, swapped);
                prop_assert!(k <= 1.0);
            }
            Err(_) => prop_assert!(cohens_kappa::<f64, _>(&relabel(&a), &relabel(&b)).is_err()),
        }
    }
}

#[test]
fn kappa_of_hand_derived_labelings() {
    let lab = |v: &[u8]| -> BTreeMap<TopicId, u8> { v.iter().enumerate().map(|(k, &x)| (TopicId(k as i32), x)).collect() };
    // p_o = 5/6, p_e = (3·2 + 3·4)/36 = 1/2, κ = (5/6 − 1/2)/(1/2) = 2/3
    let k: f64 = cohens_kappa(&lab(&[0, 0, 0, 1, 1, 1]), &lab(&[0, 0, 1, 1, 1, 1])).unwrap();
    assert!((k - 2.0 / 3.0).abs() <= 1e-12);
    // total disagreement on a balanced pair: p_o = 0, p_e = 1/2, κ = −1
    let k: f64 = cohens_kappa(&lab(&[0, 1]), &lab(&[1, 0])).unwrap();
    assert_eq!(k, -1.0);
}
