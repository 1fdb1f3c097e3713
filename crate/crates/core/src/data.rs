//! Individual-level trial records and completed (imputed) copies.

use std::ops::Range;

/// One individual in a two-arm cluster randomised trial.
///
/// `y[l]` is `NaN` when outcome `l` is missing in an incomplete dataset. In a
/// completed (imputed) copy every `y` is finite and `observed` keeps the
/// original response flags, so imputed cells stay identifiable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub cluster: usize,
    pub arm: u8,
    pub x: f64,
    pub w: f64,
    pub y: [f64; 2],
    pub observed: [bool; 2],
}

/// Rows of a trial, stored contiguously by cluster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialDataset {
    pub rows: Vec<Record>,
}

impl TrialDataset {
    pub fn new(rows: Vec<Record>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Contiguous row ranges, one per cluster, in order of appearance.
    pub fn cluster_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            if i == self.rows.len() || self.rows[i].cluster != self.rows[start].cluster {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Number of distinct clusters (rows are contiguous by cluster).
    pub fn n_clusters(&self) -> usize {
        self.cluster_ranges().len()
    }

    /// Count of missing cells per outcome.
    pub fn missing_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for r in &self.rows {
            for l in 0..2 {
                if !r.observed[l] {
                    c[l] += 1;
                }
            }
        }
        c
    }

    /// True when every outcome value is present (either observed or imputed).
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.y[0].is_finite() && r.y[1].is_finite())
    }

    /// Checks the structural invariants: cluster-constant arm and W, clusters
    /// contiguous and unique, and for incomplete data `y` missing exactly when
    /// the response flag is false.
    pub fn validate(&self) -> Result<(), String> {
        let ranges = self.cluster_ranges();
        let mut seen = std::collections::HashSet::new();
        for rg in &ranges {
            let first = self.rows[rg.start];
            if !seen.insert(first.cluster) {
                return Err(format!("cluster {} is not contiguous", first.cluster));
            }
            for r in &self.rows[rg.clone()] {
                if r.arm != first.arm || r.w != first.w {
                    return Err(format!("cluster {} mixes arm or W values", first.cluster));
                }
                if r.arm > 1 {
                    return Err(format!("arm {} is not 0/1", r.arm));
                }
            }
        }
        if !self.is_complete() {
            for (i, r) in self.rows.iter().enumerate() {
                for l in 0..2 {
                    if r.observed[l] == r.y[l].is_nan() {
                        return Err(format!("row {i}: Y{} missingness disagrees with R flag", l + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Order-sensitive fingerprint of every observed outcome cell. Completed
    /// copies of a dataset carry the same fingerprint when no observed value
    /// was altered.
    pub fn observed_fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (i, r) in self.rows.iter().enumerate() {
            for l in 0..2 {
                if r.observed[l] {
                    (i, l, r.y[l].to_bits()).hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

/// `M` completed copies of one incomplete dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedSet {
    pub completed: Vec<TrialDataset>,
}

impl ImputedSet {
    pub fn len(&self) -> usize {
        self.completed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completed.is_empty()
    }
}
