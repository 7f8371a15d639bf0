//! Detection AUC and class-balanced MAE of timbre difference labels.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::groundtruth::{assign_labels, auc, GroundTruthRecord, LabelCounts, ManifestEntry};
use crate::knn::TimbreDiffResult;
use crate::label::Label;

/// AUC of anomaly scores with normal clips as negatives.
pub fn detection_auc(normal_scores: &[f64], anomalous_scores: &[f64]) -> Result<f64> {
    auc(normal_scores, anomalous_scores)
}

/// Per-attribute class-balanced MAE with the label counts behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeBreakdown {
    pub mae: [f64; 5],
    pub counts: [LabelCounts; 5],
}

/// For each attribute, sum `|pred - truth| / M(truth)` over the truth clips,
/// where `M(y)` counts truth labels equal to `y`, then divide by the number
/// of label values that occur in the truths (3 when all occur).
pub fn normalized_mae(
    predictions: &BTreeMap<String, [Label; 5]>,
    truths: &BTreeMap<String, [Label; 5]>,
) -> Result<MaeBreakdown> {
    if truths.is_empty() {
        return Err(Error::NotEnoughData {
            needed: 1,
            actual: 0,
        });
    }
    let mut counts = [LabelCounts::default(); 5];
    for labels in truths.values() {
        for (c, l) in counts.iter_mut().zip(labels) {
            c.add(*l);
        }
    }
    let mut sums = [0.0; 5];
    for (clip_id, truth) in truths {
        let pred = predictions
            .get(clip_id)
            .ok_or_else(|| Error::MissingPrediction(clip_id.clone()))?;
        for l in 0..5 {
            let err = (pred[l].value() - truth[l].value()).unsigned_abs() as f64;
            sums[l] += err / counts[l].get(truth[l]) as f64;
        }
    }
    let mut mae = [0.0; 5];
    for l in 0..5 {
        let present = [counts[l].minus, counts[l].zero, counts[l].plus]
            .iter()
            .filter(|&&c| c > 0)
            .count();
        mae[l] = sums[l] / present as f64;
    }
    Ok(MaeBreakdown { mae, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub detection_auc: f64,
    pub mae: [f64; 5],
    pub mean_mae: f64,
    pub counts: [LabelCounts; 5],
    pub n_clips: usize,
}

/// Evaluate scored test clips against the manifest and ground truth.
///
/// Every test clip in the manifest needs a result; extra results are
/// ignored.
pub fn build_report(
    results: &[TimbreDiffResult],
    entries: &[ManifestEntry],
    records: &[GroundTruthRecord],
) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &TimbreDiffResult> =
        results.iter().map(|r| (r.clip_id.as_str(), r)).collect();
    let mut normal = Vec::new();
    let mut anomalous = Vec::new();
    let mut predictions = BTreeMap::new();
    for e in entries.iter().filter(|e| e.is_test()) {
        let r = by_id
            .get(e.clip_id.as_str())
            .ok_or_else(|| Error::MissingPrediction(e.clip_id.clone()))?;
        if e.is_anomalous() {
            anomalous.push(r.anomaly_score);
            predictions.insert(e.clip_id.clone(), r.attribute_labels);
        } else {
            normal.push(r.anomaly_score);
        }
    }
    // sorted score lists keep the AUC independent of result order
    normal.sort_by(f64::total_cmp);
    anomalous.sort_by(f64::total_cmp);
    let detection_auc = detection_auc(&normal, &anomalous)?;
    let truths = assign_labels(entries, records)?;
    let MaeBreakdown { mae, counts } = normalized_mae(&predictions, &truths)?;
    Ok(EvalReport {
        detection_auc,
        mae,
        mean_mae: mae.iter().sum::<f64>() / 5.0,
        counts,
        n_clips: normal.len() + anomalous.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundtruth::{Domain, Split, State};
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(v: [i64; 5]) -> [Label; 5] {
        v.map(|x| Label::from_value(x).unwrap())
    }

    /// Map per-clip single-attribute labels onto attribute 0.
    fn column(values: &[i64]) -> BTreeMap<String, [Label; 5]> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("c{i}"), labels([v, 0, 0, 0, 0])))
            .collect()
    }

    /// Literal evaluation of the balanced MAE, one clip at a time.
    fn brute_force(preds: &[i64], truths: &[i64]) -> f64 {
        let mut total = 0.0;
        for (p, t) in preds.iter().zip(truths) {
            let m = truths.iter().filter(|&&x| x == *t).count() as f64;
            total += (p - t).abs() as f64 / m;
        }
        let classes = [-1, 0, 1].iter().filter(|c| truths.contains(c)).count() as f64;
        total / classes
    }

    #[test]
    fn detection_auc_examples() {
        assert_eq!(detection_auc(&[0.1, 0.2], &[0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(detection_auc(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.5);
        assert_eq!(detection_auc(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.75);
        assert!(detection_auc(&[], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        let truth = column(&[1, 1, 0]);
        assert_eq!(normalized_mae(&truth, &truth).unwrap().mae, [0.0; 5]);
        assert_eq!(
            normalized_mae(&column(&[0, 1, 0]), &truth).unwrap().mae[0],
            0.25
        );

        let truth = column(&[1, 0, -1, 1]);
        let got = normalized_mae(&column(&[-1, 0, -1, 1]), &truth).unwrap();
        assert!((got.mae[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            got.counts[0],
            LabelCounts {
                minus: 1,
                zero: 1,
                plus: 2
            }
        );
    }

    #[test]
    fn mae_missing_prediction() {
        let truth = column(&[1, 0]);
        let mut preds = truth.clone();
        preds.remove("c1");
        assert_eq!(
            normalized_mae(&preds, &truth),
            Err(Error::MissingPrediction("c1".into()))
        );
    }

    #[test]
    fn mae_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let t: Vec<i64> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
            let p: Vec<i64> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
            let got = normalized_mae(&column(&p), &column(&t)).unwrap().mae[0];
            assert!((got - brute_force(&p, &t)).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_flip_is_worst_case_on_small_sets() {
        // exhaustive search over predictions for every truth set up to 5 clips
        for n in 1..=5u32 {
            for code in 0..3i64.pow(n) {
                let truth: Vec<i64> = (0..n).map(|i| (code / 3i64.pow(i)) % 3 - 1).collect();
                let flipped: Vec<i64> = truth.iter().map(|t| -t).collect();
                let has_zero = truth.contains(&0);
                let mut worst = 0.0f64;
                for pcode in 0..3i64.pow(n) {
                    let pred: Vec<i64> = (0..n).map(|i| (pcode / 3i64.pow(i)) % 3 - 1).collect();
                    worst = worst.max(brute_force(&pred, &truth));
                }
                let symmetric = truth.iter().filter(|&&t| t == 1).count()
                    == truth.iter().filter(|&&t| t == -1).count();
                if symmetric && !has_zero {
                    let flip = normalized_mae(&column(&flipped), &column(&truth))
                        .unwrap()
                        .mae[0];
                    assert!((flip - worst).abs() < 1e-12, "{truth:?}");
                }
                assert!(worst <= 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn mae_is_order_and_duplication_invariant() {
        let t = [1i64, 0, -1, 1, 0];
        let p = [0i64, 0, 1, 1, -1];
        let base = normalized_mae(&column(&p), &column(&t)).unwrap().mae[0];
        let doubled_t: Vec<i64> = t.iter().chain(&t).copied().collect();
        let doubled_p: Vec<i64> = p.iter().chain(&p).copied().collect();
        let doubled = normalized_mae(&column(&doubled_p), &column(&doubled_t))
            .unwrap()
            .mae[0];
        assert!((base - doubled).abs() < 1e-12);
        let mut rt = t.to_vec();
        let mut rp = p.to_vec();
        rt.reverse();
        rp.reverse();
        assert!((normalized_mae(&column(&rp), &column(&rt)).unwrap().mae[0] - base).abs() < 1e-12);
    }

    fn entry(id: &str, split: Split, state: State, cause: &str) -> ManifestEntry {
        ManifestEntry {
            clip_id: id.to_string(),
            path: format!("{id}.wav"),
            split,
            state,
            condition: "m".to_string(),
            cause: cause.to_string(),
            domain: Domain::Source,
        }
    }

    fn result(id: &str, score: f64, l: [i64; 5]) -> TimbreDiffResult {
        TimbreDiffResult {
            clip_id: id.to_string(),
            anomaly_score: score,
            attribute_scores: [0.5; 5],
            attribute_labels: labels(l),
            neighbor_indices: vec![0],
        }
    }

    #[test]
    fn report_for_perfect_results() {
        let entries = vec![
            entry("tr", Split::Train, State::Normal, ""),
            entry("n1", Split::Test, State::Normal, ""),
            entry("n2", Split::Test, State::Normal, ""),
            entry("a1", Split::Test, State::Anomalous, "q"),
            entry("a2", Split::Test, State::Anomalous, "q"),
        ];
        let records = vec![GroundTruthRecord {
            condition: "m".into(),
            cause: "q".into(),
            scores: [1.0, 0.5, 0.5, 0.0, 0.5],
            labels: labels([1, 0, 0, -1, 0]),
        }];
        let mut results = vec![
            result("n1", 0.1, [0; 5]),
            result("n2", 0.2, [0; 5]),
            result("a1", 0.9, [1, 0, 0, -1, 0]),
            result("a2", 0.8, [1, 0, 0, -1, 0]),
        ];
        let report = build_report(&results, &entries, &records).unwrap();
        assert_eq!(report.detection_auc, 1.0);
        assert_eq!(report.mae, [0.0; 5]);
        assert_eq!(report.mean_mae, 0.0);
        assert_eq!(report.n_clips, 4);
        assert_eq!(
            report.counts[0],
            LabelCounts {
                minus: 0,
                zero: 0,
                plus: 2
            }
        );

        results.reverse();
        assert_eq!(build_report(&results, &entries, &records).unwrap(), report);

        results.retain(|r| r.clip_id != "a1");
        assert_eq!(
            build_report(&results, &entries, &records),
            Err(Error::MissingPrediction("a1".into()))
        );
    }
}
