//! Retrieval metrics over a Hamming-ranked gallery.
//!
//! Average precision is computed over the full ranking with no cutoff and no
//! interpolation: `AP = (1/R) sum_{t relevant} hits(t) / t`, where `R` is the
//! number of relevant gallery items. Queries with `R = 0` are skipped and do
//! not enter the mean.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::codec::{CodeBook, HashCode};
use crate::error::{PdhError, Result};

/// `None` when no item in the ranking shares the query label.
pub fn average_precision(ranked_labels: &[u16], query_label: u16) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (t, &label) in ranked_labels.iter().enumerate() {
        if label == query_label {
            hits += 1;
            sum += hits as f64 / (t + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Relevant items among the top `min(k, len)`, divided by `k`.
pub fn precision_at_k(ranked_labels: &[u16], query_label: u16, k: usize) -> f64 {
    assert!(k >= 1, "precision@0 is undefined");
    let hits = ranked_labels.iter().take(k).filter(|&&l| l == query_label).count();
    hits as f64 / k as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map: f64,
    /// Mean precision@k over non-skipped queries.
    pub precision_at_k: BTreeMap<usize, f64>,
    /// `None` for skipped queries.
    pub per_query_ap: Vec<Option<f64>>,
    pub n_queries: usize,
    pub n_skipped: usize,
}

impl EvalReport {
    /// Line-oriented `key=value` form: `map`, `p_at_<k>`, `n_queries`, `n_skipped`.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        writeln!(s, "map={}", self.map).unwrap();
        for (k, p) in &self.precision_at_k {
            writeln!(s, "p_at_{k}={p}").unwrap();
        }
        writeln!(s, "n_queries={}", self.n_queries).unwrap();
        writeln!(s, "n_skipped={}", self.n_skipped).unwrap();
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<14}{:>10}", "metric", "value").unwrap();
        writeln!(s, "{:<14}{:>10.4}", "mAP", self.map).unwrap();
        for (k, p) in &self.precision_at_k {
            writeln!(s, "{:<14}{:>10.4}", format!("precision@{k}"), p).unwrap();
        }
        writeln!(s, "{:<14}{:>10}", "queries", self.n_queries).unwrap();
        writeln!(s, "{:<14}{:>10}", "skipped", self.n_skipped).unwrap();
        s
    }

    /// Largest `|p@k - p@k0|` over the reported ks, with `k0` the smallest.
    pub fn precision_spread(&self) -> f64 {
        let Some((_, &first)) = self.precision_at_k.iter().next() else {
            return 0.0;
        };
        self.precision_at_k.values().map(|p| (p - first).abs()).fold(0.0, f64::max)
    }
}

/// Ranks the full gallery by `(hamming, id)` for every query and aggregates
/// AP and precision@k.
pub fn evaluate(gallery: &CodeBook, queries: &[(u16, HashCode)], k_list: &[usize]) -> Result<EvalReport> {
    if gallery.is_empty() {
        return Err(PdhError::EmptyBook);
    }
    if let Some(&k) = k_list.iter().find(|&&k| k == 0) {
        return Err(PdhError::InvalidArgument(format!("k must be >= 1, got {k}")));
    }
    let mut per_query_ap = Vec::with_capacity(queries.len());
    let mut p_sums: BTreeMap<usize, f64> = k_list.iter().map(|&k| (k, 0.0)).collect();
    let mut labels = Vec::with_capacity(gallery.len());
    for (label, code) in queries {
        labels.clear();
        labels.extend(gallery.rank_all(code)?.iter().map(|n| n.label));
        let ap = average_precision(&labels, *label);
        if ap.is_some() {
            for (&k, sum) in p_sums.iter_mut() {
                *sum += precision_at_k(&labels, *label, k);
            }
        }
        per_query_ap.push(ap);
    }
    let scored: Vec<f64> = per_query_ap.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(PdhError::AllQueriesSkipped);
    }
    let count = scored.len() as f64;
    Ok(EvalReport {
        map: scored.iter().sum::<f64>() / count,
        precision_at_k: p_sums.into_iter().map(|(k, s)| (k, s / count)).collect(),
        n_skipped: queries.len() - scored.len(),
        n_queries: queries.len(),
        per_query_ap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodeEntry;
    use crate::numerics::Rng;

    #[test]
    fn ap_examples() {
        let ap = average_precision(&[1, 0, 1], 1).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&[3, 3, 3], 3), Some(1.0));
        let mut last = vec![0u16; 9];
        last.push(1);
        assert!((average_precision(&last, 1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(average_precision(&[0, 0], 1), None);
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&[1, 0, 1, 0], 1, 2), 0.5);
        assert_eq!(precision_at_k(&[1, 0], 1, 1), 1.0);
        assert_eq!(precision_at_k(&[1, 0, 1], 1, 10), 0.2);
    }

    fn class_code(class: u16, bits: usize) -> HashCode {
        HashCode::from_bits(&(0..bits).map(|j| (class >> (j % 2)) & 1 == 1).collect::<Vec<_>>())
    }

    #[test]
    fn perfect_codes_give_unit_map() {
        let entries = (0..40)
            .map(|i| CodeEntry { id: i, label: (i % 4) as u16, code: class_code((i % 4) as u16, 8) })
            .collect();
        let gallery = CodeBook::new(8, entries).unwrap();
        let queries: Vec<_> = (0..4u16).map(|c| (c, class_code(c, 8))).collect();
        let report = evaluate(&gallery, &queries, &[5, 10]).unwrap();
        assert_eq!(report.map, 1.0);
        assert_eq!(report.precision_at_k[&10], 1.0);
        assert_eq!(report.n_skipped, 0);
    }

    #[test]
    fn skipped_queries_and_errors() {
        let gallery = CodeBook::new(
            4,
            vec![CodeEntry { id: 0, label: 0, code: HashCode::zeros(4) }],
        )
        .unwrap();
        let report = evaluate(&gallery, &[(0, HashCode::zeros(4)), (7, HashCode::zeros(4))], &[1]).unwrap();
        assert_eq!(report.n_skipped, 1);
        assert_eq!(report.per_query_ap, vec![Some(1.0), None]);
        assert!(matches!(
            evaluate(&gallery, &[(7, HashCode::zeros(4))], &[1]),
            Err(PdhError::AllQueriesSkipped)
        ));
        assert!(evaluate(&CodeBook::new(4, vec![]).unwrap(), &[(0, HashCode::zeros(4))], &[1]).is_err());
    }

    #[test]
    fn invariant_to_gallery_order() {
        let mut rng = Rng::new(17);
        let mut entries: Vec<CodeEntry> = (0..300)
            .map(|i| CodeEntry {
                id: i,
                label: rng.below(5) as u16,
                code: HashCode::from_bits(&(0..6).map(|_| rng.coin()).collect::<Vec<_>>()),
            })
            .collect();
        let queries: Vec<_> = (0..30)
            .map(|_| (rng.below(5) as u16, HashCode::from_bits(&(0..6).map(|_| rng.coin()).collect::<Vec<_>>())))
            .collect();
        let a = evaluate(&CodeBook::new(6, entries.clone()).unwrap(), &queries, &[1, 10, 50]).unwrap();
        rng.shuffle(&mut entries);
        let b = evaluate(&CodeBook::new(6, entries).unwrap(), &queries, &[1, 10, 50]).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.map));
    }

    #[test]
    fn key_value_format() {
        let report = EvalReport {
            map: 0.5,
            precision_at_k: [(100, 0.25), (200, 0.75)].into_iter().collect(),
            per_query_ap: vec![],
            n_queries: 3,
            n_skipped: 1,
        };
        assert_eq!(report.to_key_value(), "map=0.5\np_at_100=0.25\np_at_200=0.75\nn_queries=3\nn_skipped=1\n");
        assert_eq!(report.precision_spread(), 0.5);
    }
}
