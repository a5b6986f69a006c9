//! Property tests: library routines against slow, obviously-correct
//! re-implementations, plus the invariants they must keep.

use proptest::prelude::*;

use tabmia::attacks::{metric_score, rmia_score, stored_metric_score, sweep_threshold, MetricFamily};
use tabmia::data::{detect_single_outs, Cell, ColumnSchema, Dataset, QuasiIdentifierSet};
use tabmia::eval::{auc, roc_curve, tpr_at_fpr};

const FLOOR: f64 = 1e-12;

fn simplex(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn simplex_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2usize..8)
        .prop_flat_map(|k| (prop::collection::vec(1e-6f64..1.0, k), 0..k))
        .prop_map(|(raw, y)| (simplex(raw), y))
}

fn oracle_metric(p: &[f64], y: usize, family: MetricFamily) -> f64 {
    match family {
        MetricFamily::Correctness => {
            let mut best = 0;
            for i in 0..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            if best == y {
                1.0
            } else {
                0.0
            }
        }
        MetricFamily::Loss => -(p[y].max(FLOOR)).ln(),
        MetricFamily::Confidence => {
            let mut m = p[0];
            for &v in p {
                if v > m {
                    m = v;
                }
            }
            m
        }
        MetricFamily::ModifiedEntropy => {
            let mut s = -(1.0 - p[y]) * p[y].max(FLOOR).ln();
            for i in 0..p.len() {
                if i != y {
                    s -= p[i] * (1.0 - p[i]).max(FLOOR).ln();
                }
            }
            s
        }
    }
}

/// Pairwise concordance with half credit for ties.
fn oracle_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if !truth[i] {
            continue;
        }
        for j in 0..scores.len() {
            if truth[j] {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Scores on a coarse grid so ties actually happen, with both classes present.
fn labelled_scores(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((-50i32..50, any::<bool>()), 2..max)
        .prop_map(|v| {
            let s: Vec<f64> = v.iter().map(|&(x, _)| f64::from(x) / 10.0).collect();
            let mut t: Vec<bool> = v.iter().map(|&(_, b)| b).collect();
            // guarantee one of each class
            t[0] = true;
            t[1] = false;
            (s, t)
        })
}

fn balanced_accuracy(members: &[f64], nonmembers: &[f64], thr: f64) -> f64 {
    let tpr = members.iter().filter(|&&s| s >= thr).count() as f64 / members.len() as f64;
    let tnr = nonmembers.iter().filter(|&&s| s < thr).count() as f64 / nonmembers.len() as f64;
    (tpr + tnr) / 2.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn metric_scores_match_oracle((p, y) in simplex_strategy()) {
        for fam in [
            MetricFamily::Correctness,
            MetricFamily::Loss,
            MetricFamily::Confidence,
            MetricFamily::ModifiedEntropy,
        ] {
            let got = metric_score(&p, y, fam);
            prop_assert!((got - oracle_metric(&p, y, fam)).abs() <= 1e-9);
            let stored = stored_metric_score(&p, y, fam);
            let sign = if matches!(fam, MetricFamily::Loss | MetricFamily::ModifiedEntropy) { -1.0 } else { 1.0 };
            prop_assert_eq!(stored, sign * got);
        }
    }

    #[test]
    fn loss_and_entropy_are_non_negative((p, y) in simplex_strategy()) {
        prop_assert!(metric_score(&p, y, MetricFamily::Loss) >= 0.0);
        prop_assert!(metric_score(&p, y, MetricFamily::ModifiedEntropy) >= -1e-12);
    }

    #[test]
    fn auc_matches_pairwise_count((s, t) in labelled_scores(120)) {
        prop_assert!((auc(&s, &t).unwrap() - oracle_auc(&s, &t)).abs() <= 1e-9);
    }

    #[test]
    fn auc_of_negated_scores_is_complement((s, t) in labelled_scores(120)) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&s, &t).unwrap() + auc(&neg, &t).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn auc_is_invariant_to_monotone_maps((s, t) in labelled_scores(120)) {
        let e: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        prop_assert!((auc(&s, &t).unwrap() - auc(&e, &t).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn roc_area_equals_auc((s, t) in labelled_scores(120)) {
        let curve = roc_curve(&s, &t).unwrap();
        prop_assert_eq!((curve.fpr[0], curve.tpr[0]), (0.0, 0.0));
        prop_assert_eq!((*curve.fpr.last().unwrap(), *curve.tpr.last().unwrap()), (1.0, 1.0));
        prop_assert!(curve.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(curve.tpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((curve.area() - auc(&s, &t).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn tpr_at_fpr_is_monotone_in_alpha((s, t) in labelled_scores(120), a in 0.001f64..1.0, b in 0.001f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tpr_at_fpr(&s, &t, lo).unwrap() <= tpr_at_fpr(&s, &t, hi).unwrap());
        prop_assert_eq!(tpr_at_fpr(&s, &t, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn sweep_finds_the_best_threshold((s, t) in labelled_scores(60)) {
        let members: Vec<f64> = s.iter().zip(&t).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
        let nonmembers: Vec<f64> = s.iter().zip(&t).filter(|(_, &m)| !m).map(|(v, _)| *v).collect();
        let (thr, acc) = sweep_threshold(&members, &nonmembers).unwrap();
        prop_assert!((balanced_accuracy(&members, &nonmembers, thr) - acc).abs() <= 1e-12);
        let mut candidates = s.clone();
        candidates.push(f64::INFINITY);
        let best = candidates
            .iter()
            .map(|&c| balanced_accuracy(&members, &nonmembers, c))
            .fold(0.0, f64::max);
        prop_assert!((acc - best).abs() <= 1e-12);
    }

    #[test]
    fn rmia_score_is_non_increasing_in_gamma(
        x in 0.0f64..1.0,
        prx in 0.0f64..1.0,
        z in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60),
        g1 in 0.01f64..10.0,
        g2 in 0.01f64..10.0,
    ) {
        let (tz, pz): (Vec<f64>, Vec<f64>) = z.into_iter().unzip();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = rmia_score(x, prx, &tz, &pz, lo);
        let b = rmia_score(x, prx, &tz, &pz, hi);
        prop_assert!(b <= a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn single_outs_match_pairwise_grouping(
        cards in prop::collection::vec(1u32..5, 1..4),
        n in 1usize..150,
        seed in any::<u64>(),
    ) {
        let ds = random_dataset(&cards, n, seed);
        let qi_cols: Vec<usize> = (0..cards.len()).collect();
        let q = QuasiIdentifierSet::new(&ds, &qi_cols).unwrap();
        let got = detect_single_outs(&ds, &q);
        let mut want = Vec::new();
        for i in 0..ds.len() {
            let same = (0..ds.len())
                .filter(|&j| qi_cols.iter().all(|&c| ds.row(i)[c] == ds.row(j)[c]))
                .count();
            if same == 1 {
                want.push(i);
            }
        }
        prop_assert_eq!(&got.single_out_indices, &want);
        let total: usize = got.equivalence_classes.iter().map(|c| c.count).sum();
        prop_assert_eq!(total, ds.len());
    }
}

fn random_dataset(cards: &[u32], n: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut rng = tabmia::seed::rng(seed);
    let mut columns: Vec<ColumnSchema> = cards
        .iter()
        .enumerate()
        .map(|(j, &k)| ColumnSchema::categorical(format!("q{j}"), (0..k).map(|v| v.to_string())))
        .collect();
    columns.push(ColumnSchema::categorical("y", ["a", "b"]));
    let rows = (0..n)
        .map(|_| {
            let mut r: Vec<Cell> = cards.iter().map(|&k| Cell::Cat(rng.gen_range(0..k))).collect();
            r.push(Cell::Cat(rng.gen_range(0..2)));
            r
        })
        .collect();
    Dataset::new("random", columns, rows, cards.len()).unwrap()
}
