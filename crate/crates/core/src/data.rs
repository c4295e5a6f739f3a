//! Dataset representation, standardization, bootstrap resampling, and seeded
//! RNG stream management.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a treatment or outcome variable is binary {0,1} or continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

/// Per-column mean and sd recorded when covariates are standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMoments {
    pub mean: f64,
    pub sd: f64,
}

/// An observed sample: standardized covariates, treatment, and outcome.
///
/// Covariates are standardized at construction (mean 0, unbiased sd 1 per
/// column); the original column moments are kept in `std_meta`. Treatment and
/// outcome are stored on their raw scale. The struct is immutable once built
/// and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    t: Array1<f64>,
    y: Array1<f64>,
    t_kind: VarKind,
    y_kind: VarKind,
    std_meta: Vec<ColumnMoments>,
}

impl Dataset {
    /// Build a dataset from raw columns, standardizing the covariates.
    pub fn from_raw(
        x_raw: Array2<f64>,
        t: Array1<f64>,
        y: Array1<f64>,
        t_kind: VarKind,
        y_kind: VarKind,
    ) -> Result<Self> {
        let n = x_raw.nrows();
        let p = x_raw.ncols();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::Data("need at least 1 covariate column".into()));
        }
        if t.len() != n || y.len() != n {
            return Err(Error::Data(format!(
                "length mismatch: X has {n} rows, T has {}, Y has {}",
                t.len(),
                y.len()
            )));
        }
        for (name, v) in [("T", &t), ("Y", &y)] {
            if v.iter().any(|e| !e.is_finite()) {
                return Err(Error::Data(format!("{name} contains non-finite values")));
            }
        }
        if x_raw.iter().any(|e| !e.is_finite()) {
            return Err(Error::Data("X contains non-finite values".into()));
        }
        check_kind("T", &t, t_kind)?;
        check_kind("Y", &y, y_kind)?;
        if t_kind == VarKind::Binary {
            let ones = t.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == n {
                return Err(Error::Data(
                    "binary treatment must contain both arms".into(),
                ));
            }
        }
        let (x, std_meta) = standardize(&x_raw)?;
        Ok(Dataset {
            x,
            t,
            y,
            t_kind,
            y_kind,
            std_meta,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Standardized covariate matrix, n x p.
    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn t(&self) -> &Array1<f64> {
        &self.t
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn t_kind(&self) -> VarKind {
        self.t_kind
    }

    pub fn y_kind(&self) -> VarKind {
        self.y_kind
    }

    pub fn std_meta(&self) -> &[ColumnMoments] {
        &self.std_meta
    }

    /// Draw a bootstrap resample; the view shares the underlying storage.
    pub fn resample(&self, stream: &RngStream) -> (DatasetView<'_>, BootstrapIndex) {
        let idx = BootstrapIndex::draw(self.n(), stream);
        let view = self.select(idx.indices.clone());
        (view, idx)
    }

    /// Row-multiset view of this dataset given bootstrap indices.
    pub fn select(&self, indices: Vec<u32>) -> DatasetView<'_> {
        debug_assert!(indices.iter().all(|&i| (i as usize) < self.n()));
        DatasetView {
            base: self,
            indices,
        }
    }
}

fn check_kind(name: &str, v: &Array1<f64>, kind: VarKind) -> Result<()> {
    if kind == VarKind::Binary && v.iter().any(|&e| e != 0.0 && e != 1.0) {
        return Err(Error::Data(format!(
            "{name} declared binary but contains values outside {{0,1}}"
        )));
    }
    Ok(())
}

/// Standardize each column to mean 0 and unbiased (n-1) sd 1.
pub fn standardize(x: &Array2<f64>) -> Result<(Array2<f64>, Vec<ColumnMoments>)> {
    let n = x.nrows();
    let mut out = x.clone();
    let mut meta = Vec::with_capacity(x.ncols());
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd <= 0.0 {
            return Err(Error::ZeroVarianceColumn(j));
        }
        col.mapv_inplace(|v| (v - mean) / sd);
        meta.push(ColumnMoments { mean, sd });
    }
    Ok((out, meta))
}

/// Indices of one bootstrap resample, drawn with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapIndex {
    pub indices: Vec<u32>,
    pub seed: u64,
}

impl BootstrapIndex {
    /// Draw `n` indices with replacement from `0..n`, deterministically per stream.
    pub fn draw(n: usize, stream: &RngStream) -> Self {
        let mut rng = stream.rng();
        let indices = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        BootstrapIndex {
            indices,
            seed: stream.seed(),
        }
    }
}

/// Read-only row-multiset view into a [`Dataset`].
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    base: &'a Dataset,
    indices: Vec<u32>,
}

impl<'a> DatasetView<'a> {
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    pub fn t_at(&self, i: usize) -> f64 {
        self.base.t[self.indices[i] as usize]
    }

    pub fn y_at(&self, i: usize) -> f64 {
        self.base.y[self.indices[i] as usize]
    }

    /// Materialize T for the selected rows.
    pub fn t_vec(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| self.base.t[i as usize])
            .collect()
    }

    /// Materialize Y for the selected rows.
    pub fn y_vec(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| self.base.y[i as usize])
            .collect()
    }
}

/// Counter-based RNG stream: the same (master seed, stream id) pair always
/// yields the same draws, and distinct ids give independent streams, so
/// parallel schedules never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        RngStream {
            master_seed,
            stream_id: 0,
        }
    }

    /// Derive a child stream; nested derivations stay collision-free because
    /// the parent's identity is folded into the child's master seed.
    pub fn substream(&self, id: u64) -> RngStream {
        RngStream {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_id)),
            stream_id: id,
        }
    }

    /// A derived u64 usable where an API takes a bare seed.
    pub fn seed(&self) -> u64 {
        splitmix64(self.master_seed.wrapping_add(splitmix64(self.stream_id)))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Load a dataset from a CSV file with a header row. The named treatment and
/// outcome columns are extracted; every remaining column is a covariate and
/// must be numeric with no missing cells. Binary/continuous kinds are
/// detected from the values.
pub fn read_csv(path: &Path, treatment_col: &str, outcome_col: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let t_idx = headers
        .iter()
        .position(|h| h == treatment_col)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("treatment column '{treatment_col}' not found"))
        })?;
    let y_idx = headers.iter().position(|h| h == outcome_col).ok_or_else(|| {
        Error::InvalidConfig(format!("outcome column '{outcome_col}' not found"))
    })?;
    if t_idx == y_idx {
        return Err(Error::InvalidConfig(
            "treatment and outcome columns must differ".into(),
        ));
    }

    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != t_idx && j != y_idx)
        .collect();
    if cov_idx.is_empty() {
        return Err(Error::Data("no covariate columns in file".into()));
    }

    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut x_rows: Vec<f64> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::Data(format!(
                    "missing value at row {}, column '{}'",
                    row_no + 2,
                    headers[j]
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "non-numeric value '{}' at row {}, column '{}'",
                    raw,
                    row_no + 2,
                    headers[j]
                ))
            })
        };
        t.push(parse(t_idx)?);
        y.push(parse(y_idx)?);
        for &j in &cov_idx {
            x_rows.push(parse(j)?);
        }
    }

    let n = t.len();
    let x = Array2::from_shape_vec((n, cov_idx.len()), x_rows)
        .map_err(|e| Error::Data(e.to_string()))?;
    let t = Array1::from_vec(t);
    let y = Array1::from_vec(y);
    let t_kind = detect_kind(&t);
    let y_kind = detect_kind(&y);
    Dataset::from_raw(x, t, y, t_kind, y_kind)
}

fn detect_kind(v: &Array1<f64>) -> VarKind {
    if v.iter().all(|&e| e == 0.0 || e == 1.0) {
        VarKind::Binary
    } else {
        VarKind::Continuous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn toy_dataset(n: usize) -> Dataset {
        let stream = RngStream::new(7);
        let mut rng = stream.rng();
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0f64));
        let t = Array1::from_shape_fn(n, |i| (i % 2) as f64);
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0f64));
        Dataset::from_raw(x, t, y, VarKind::Binary, VarKind::Continuous).unwrap()
    }

    #[test]
    fn standardize_symmetric_column() {
        let x = array![[1.0], [2.0], [3.0]];
        let (z, meta) = standardize(&x).unwrap();
        assert!((z[[0, 0]] + 1.0).abs() < 1e-12);
        assert!(z[[1, 0]].abs() < 1e-12);
        assert!((z[[2, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(meta[0].mean, 2.0);
        assert_eq!(meta[0].sd, 1.0);
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = array![[0.3, 5.0], [-1.2, 9.0], [2.5, 4.0], [0.1, 7.5]];
        let (z1, _) = standardize(&x).unwrap();
        let (z2, _) = standardize(&z1).unwrap();
        for (a, b) in z1.iter().zip(z2.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        match standardize(&x) {
            Err(Error::ZeroVarianceColumn(0)) => {}
            other => panic!("expected ZeroVarianceColumn(0), got {other:?}"),
        }
    }

    #[test]
    fn standardized_columns_have_unit_moments() {
        let data = toy_dataset(64);
        let n = data.n() as f64;
        for col in data.x().columns() {
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 1e-10);
            assert!((sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn resample_is_deterministic_per_stream() {
        let data = toy_dataset(5);
        let stream = RngStream::new(99).substream(3);
        let (_, a) = data.resample(&stream);
        let (_, b) = data.resample(&stream);
        assert_eq!(a, b);
        let (_, c) = data.resample(&stream.substream(4));
        assert_ne!(a.indices, c.indices);
    }

    #[test]
    fn resample_counts_match_binomial_oracle() {
        // Index i's total count over k resamples of size n is
        // Binomial(k*n, 1/n); check every count stays within 5 sigma.
        let n = 1000usize;
        let k = 10_000usize;
        let data = toy_dataset(n);
        let mut counts = vec![0u64; n];
        let root = RngStream::new(2024);
        for r in 0..k {
            let (_, idx) = data.resample(&root.substream(r as u64));
            for &i in &idx.indices {
                counts[i as usize] += 1;
            }
        }
        let trials = (k * n) as f64;
        let p = 1.0 / n as f64;
        let mean = trials * p;
        let sd = (trials * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - mean).abs() < 5.0 * sd,
                "count {c} outside 5 sigma of {mean}"
            );
        }
    }

    #[test]
    fn degenerate_index_vector_gives_repeated_row() {
        let data = toy_dataset(4);
        let view = data.select(vec![1, 1, 1, 1]);
        assert_eq!(view.n(), 4);
        for i in 0..4 {
            assert_eq!(view.y_at(i), data.y()[1]);
            assert_eq!(view.t_at(i), data.t()[1]);
        }
    }

    #[test]
    fn binary_treatment_requires_both_arms() {
        let x = array![[0.0], [1.0], [2.0]];
        let t = array![1.0, 1.0, 1.0];
        let y = array![0.1, 0.2, 0.3];
        assert!(Dataset::from_raw(x, t, y, VarKind::Binary, VarKind::Continuous).is_err());
    }

    #[test]
    fn rng_streams_reproduce_and_differ() {
        let s = RngStream::new(5);
        let a: Vec<u64> = (0..4).map(|_| s.rng().random()).collect();
        let b: Vec<u64> = (0..4).map(|_| s.rng().random()).collect();
        assert_eq!(a, b);
        let mut r1 = s.substream(1).rng();
        let mut r2 = s.substream(2).rng();
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
        // nested derivation differs from flat
        assert_ne!(s.substream(1).substream(2), s.substream(2).substream(1));
    }

    #[test]
    fn csv_roundtrip_and_kind_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,treat,x1,x2\n1.5,0,0.1,2.0\n2.5,1,0.4,1.0\n0.5,0,-0.2,3.0\n")
            .unwrap();
        let d = read_csv(&path, "treat", "y").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.t_kind(), VarKind::Binary);
        assert_eq!(d.y_kind(), VarKind::Continuous);
    }

    #[test]
    fn csv_rejects_missing_values_and_unknown_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,t,x1\n1.0,0,\n2.0,1,0.4\n").unwrap();
        match read_csv(&path, "t", "y") {
            Err(Error::Data(msg)) => assert!(msg.contains("x1")),
            other => panic!("expected Data error, got {other:?}"),
        }
        match read_csv(&path, "t", "nope") {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("nope")),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn standardize_idempotent_prop(cols in proptest::collection::vec(-50.0..50.0f64, 8..40)) {
            let n = cols.len();
            let x = Array2::from_shape_vec((n, 1), cols).unwrap();
            if let Ok((z1, _)) = standardize(&x) {
                let (z2, _) = standardize(&z1).unwrap();
                for (a, b) in z1.iter().zip(z2.iter()) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn bootstrap_indices_in_range(seed in any::<u64>(), n in 2usize..200) {
            let idx = BootstrapIndex::draw(n, &RngStream::new(seed));
            prop_assert_eq!(idx.indices.len(), n);
            prop_assert!(idx.indices.iter().all(|&i| (i as usize) < n));
        }
    }
}
