//! Labeled weighted point clouds and the synthetic domain-shift generator.
//!
//! A [`LabeledDataset`] is the common currency of the crate: an `n x d`
//! feature matrix, an optional class label per row, and a nonnegative mass
//! per row summing to one. The CSV layout is
//! `f0,...,f{d-1}[,label][,mass]` with `.` as decimal separator; an empty
//! label cell marks an unlabeled row and a missing mass column means
//! uniform mass.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{seed_rng, stream_rng};
use crate::scalar::Scalar;

const MASS_SUM_TOL: f64 = 1e-9;

/// Features, optional per-row class labels, per-row probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F: Scalar> {
    features: Array2<F>,
    labels: Vec<Option<usize>>,
    mass: Array1<F>,
    num_classes: usize,
}

impl<F: Scalar> LabeledDataset<F> {
    /// Build a dataset and check its invariants: at least one row and one
    /// column, labels below `num_classes`, nonnegative mass summing to one
    /// within `1e-9`.
    pub fn new(
        features: Array2<F>,
        labels: Vec<Option<usize>>,
        mass: Array1<F>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset must have n >= 1 rows and d >= 1 columns, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        Self::from_parts(features, labels, mass, num_classes)
    }

    // Shared validation; tolerates n == 0 so subset splits can hand back an
    // empty remainder.
    fn from_parts(
        features: Array2<F>,
        labels: Vec<Option<usize>>,
        mass: Array1<F>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || mass.len() != n {
            return Err(Error::InvalidParameter(format!(
                "row count mismatch: {} features, {} labels, {} masses",
                n,
                labels.len(),
                mass.len()
            )));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m >= F::zero()) || !m.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mass of row {i} must be finite and nonnegative, got {m}"
                )));
            }
        }
        if n > 0 {
            let total: F = mass.iter().copied().sum();
            if (total.as_f64() - 1.0).abs() > MASS_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "mass must sum to 1 within {MASS_SUM_TOL}, got {total}"
                )));
            }
        }
        for (i, label) in labels.iter().enumerate() {
            if let Some(c) = label {
                if *c >= num_classes {
                    return Err(Error::InvalidParameter(format!(
                        "row {i} carries label {c}, but num_classes is {num_classes}"
                    )));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            mass,
            num_classes,
        })
    }

    /// Dataset with uniform mass `1/n` on every row.
    pub fn with_uniform_mass(
        features: Array2<F>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("dataset must have n >= 1 rows".into()));
        }
        let w = F::one() / F::cast(n as f64);
        Self::new(features, labels, Array1::from_elem(n, w), num_classes)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<F> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, F> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn mass(&self) -> &Array1<F> {
        &self.mass
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(|l| l.is_some())
    }

    /// Labels of a fully labeled dataset, or a precondition error naming the
    /// first unlabeled row.
    pub fn required_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::Precondition(format!("row {i} is unlabeled")))
            })
            .collect()
    }

    /// Number of labeled rows per class.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for label in self.labels.iter().flatten() {
            counts[*label] += 1;
        }
        counts
    }

    /// Extract the given rows, renormalizing their mass to sum to one.
    /// An empty index list yields an empty dataset (the one place the
    /// `n >= 1` invariant is waived).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut features = Array2::zeros((indices.len(), d));
        let mut labels = Vec::with_capacity(indices.len());
        let mut mass = Array1::zeros(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of range for {} rows",
                    self.n()
                )));
            }
            features.row_mut(out).assign(&self.features.row(i));
            labels.push(self.labels[i]);
            mass[out] = self.mass[i];
        }
        if !indices.is_empty() {
            let total: F = mass.iter().copied().sum();
            if total <= F::zero() {
                return Err(Error::DegenerateInput(
                    "selected rows carry zero total mass".into(),
                ));
            }
            mass.mapv_inplace(|m| m / total);
        }
        Self::from_parts(features, labels, mass, self.num_classes)
    }

    /// Same rows with all labels hidden.
    pub fn without_labels(&self) -> Self {
        Self {
            features: self.features.clone(),
            labels: vec![None; self.n()],
            mass: self.mass.clone(),
            num_classes: self.num_classes,
        }
    }

    /// Same rows and labels on a replacement feature matrix (used to move a
    /// dataset into a classifier's latent space).
    pub fn with_features(&self, features: Array2<F>) -> Result<Self> {
        if features.nrows() != self.n() {
            return Err(Error::InvalidParameter(format!(
                "replacement features have {} rows, dataset has {}",
                features.nrows(),
                self.n()
            )));
        }
        Self::from_parts(
            features,
            self.labels.clone(),
            self.mass.clone(),
            self.num_classes,
        )
    }
}

/// Affine domain shift: rotate in the first two axes, scale per axis,
/// translate, and optionally advance every class label by one (cyclically).
/// The label permutation builds the adversarial case where each cluster's
/// nearest neighbor across domains belongs to a different class.
#[derive(Debug, Clone)]
pub struct ShiftSpec<F: Scalar> {
    pub rotation: F,
    pub translation: Array1<F>,
    pub scale: Array1<F>,
    pub permute_labels: bool,
}

impl<F: Scalar> ShiftSpec<F> {
    /// The do-nothing shift for dimension `d`.
    pub fn identity(d: usize) -> Self {
        Self {
            rotation: F::zero(),
            translation: Array1::zeros(d),
            scale: Array1::from_elem(d, F::one()),
            permute_labels: false,
        }
    }

    pub fn with_rotation(mut self, angle: F) -> Self {
        self.rotation = angle;
        self
    }

    pub fn with_translation(mut self, t: Array1<F>) -> Self {
        self.translation = t;
        self
    }

    pub fn with_scale(mut self, s: Array1<F>) -> Self {
        self.scale = s;
        self
    }

    pub fn with_label_permutation(mut self, on: bool) -> Self {
        self.permute_labels = on;
        self
    }
}

/// Gaussian mixture with class means on a circle (`d == 2`) or on scaled
/// coordinate axes (`d > 2`), uniform mass, every row labeled.
///
/// Row order is class-major and the generator is a pure function of the
/// seed. The circle/axis placement keeps the minimal inter-class mean
/// distance a closed-form function of `class_separation`.
pub fn generate_gaussian_mixture<F: Scalar>(
    num_classes: usize,
    samples_per_class: usize,
    dim: usize,
    class_separation: F,
    noise_sigma: F,
    seed: u64,
) -> Result<LabeledDataset<F>> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if samples_per_class < 1 {
        return Err(Error::InvalidParameter(
            "need at least 1 sample per class".into(),
        ));
    }
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "generator requires dim >= 2, got {dim}"
        )));
    }
    if dim > 2 && num_classes > dim {
        return Err(Error::InvalidParameter(format!(
            "axis placement requires num_classes <= dim, got {num_classes} > {dim}"
        )));
    }
    if !(class_separation > F::zero()) || !(noise_sigma > F::zero()) {
        return Err(Error::InvalidParameter(
            "class_separation and noise_sigma must be positive".into(),
        ));
    }

    let mut means = Array2::<F>::zeros((num_classes, dim));
    if dim == 2 {
        for k in 0..num_classes {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (num_classes as f64);
            means[(k, 0)] = class_separation * F::cast(angle.cos());
            means[(k, 1)] = class_separation * F::cast(angle.sin());
        }
    } else {
        for k in 0..num_classes {
            means[(k, k)] = class_separation;
        }
    }

    let n = num_classes * samples_per_class;
    let mut rng = seed_rng(seed);
    let mut features = Array2::<F>::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for k in 0..num_classes {
        for s in 0..samples_per_class {
            let row = k * samples_per_class + s;
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                features[(row, j)] = means[(k, j)] + noise_sigma * F::cast(z);
            }
            labels.push(Some(k));
        }
    }
    LabeledDataset::with_uniform_mass(features, labels, num_classes)
}

/// Apply a [`ShiftSpec`]: `y = diag(scale) * R(rotation) * x + translation`,
/// with the rotation acting in the `(0, 1)` coordinate plane.
pub fn apply_shift<F: Scalar>(
    data: &LabeledDataset<F>,
    spec: &ShiftSpec<F>,
) -> Result<LabeledDataset<F>> {
    let d = data.dim();
    if spec.translation.len() != d {
        return Err(Error::InvalidParameter(format!(
            "translation has length {}, data dimension is {d}",
            spec.translation.len()
        )));
    }
    if spec.scale.len() != d {
        return Err(Error::InvalidParameter(format!(
            "scale has length {}, data dimension is {d}",
            spec.scale.len()
        )));
    }
    if spec.scale.iter().any(|s| !(*s > F::zero())) {
        return Err(Error::InvalidParameter(
            "scale factors must be strictly positive".into(),
        ));
    }
    if d < 2 && spec.rotation != F::zero() {
        return Err(Error::InvalidParameter(
            "rotation requires at least 2 dimensions".into(),
        ));
    }

    let (cos, sin) = (
        F::cast(spec.rotation.as_f64().cos()),
        F::cast(spec.rotation.as_f64().sin()),
    );
    let mut features = data.features().clone();
    for mut row in features.rows_mut() {
        if d >= 2 {
            let (x0, x1) = (row[0], row[1]);
            row[0] = cos * x0 - sin * x1;
            row[1] = sin * x0 + cos * x1;
        }
        for j in 0..d {
            row[j] = spec.scale[j] * row[j] + spec.translation[j];
        }
    }

    let labels = if spec.permute_labels {
        let c = data.num_classes();
        data.labels()
            .iter()
            .map(|l| l.map(|k| (k + 1) % c))
            .collect()
    } else {
        data.labels().to_vec()
    };

    LabeledDataset::new(features, labels, data.mass().clone(), data.num_classes())
}

/// Row indices for a per-class labeled split: `per_class` seeded draws per
/// class without replacement, plus the complement. Both lists come back
/// sorted so row order is stable.
pub fn labeled_split_indices<F: Scalar>(
    data: &LabeledDataset<F>,
    per_class: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if per_class < 1 {
        return Err(Error::InvalidParameter("per_class must be >= 1".into()));
    }
    let labels = data.required_labels()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes()];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = stream_rng(seed, "labeled-split");
    let mut chosen = Vec::with_capacity(per_class * data.num_classes());
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < per_class {
            return Err(Error::InvalidParameter(format!(
                "class {c} has {} samples, need {per_class}",
                rows.len()
            )));
        }
        let mut pool = rows.clone();
        pool.shuffle(&mut rng);
        chosen.extend_from_slice(&pool[..per_class]);
    }
    chosen.sort_unstable();
    let in_subset: std::collections::HashSet<usize> = chosen.iter().copied().collect();
    let remainder: Vec<usize> = (0..data.n()).filter(|i| !in_subset.contains(i)).collect();
    Ok((chosen, remainder))
}

/// Split into a labeled subset (`per_class` rows per class, labels kept) and
/// the remainder with labels hidden. Masses of each part are renormalized to
/// sum to one; the union of rows is exactly the input.
pub fn select_labeled_subset<F: Scalar>(
    data: &LabeledDataset<F>,
    per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset<F>, LabeledDataset<F>)> {
    let (subset_idx, remainder_idx) = labeled_split_indices(data, per_class, seed)?;
    let subset = data.subset(&subset_idx)?;
    let remainder = data.subset(&remainder_idx)?.without_labels();
    Ok((subset, remainder))
}

/// Write the CSV form: header `f0,...,f{d-1},label,mass`, one row per sample,
/// floats printed with Rust's shortest round-trip formatting so
/// `load(save(x)) == x` exactly.
pub fn save_csv<F: Scalar>(data: &LabeledDataset<F>, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(data))?;
    Ok(())
}

/// CSV serialization as a string (see [`save_csv`]).
pub fn to_csv_string<F: Scalar>(data: &LabeledDataset<F>) -> String {
    let d = data.dim();
    let mut out = String::new();
    for j in 0..d {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "f{j}");
    }
    out.push_str(",label,mass\n");
    for i in 0..data.n() {
        for j in 0..d {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", data.features()[(i, j)]);
        }
        out.push(',');
        if let Some(c) = data.labels()[i] {
            let _ = write!(out, "{c}");
        }
        let _ = write!(out, ",{}", data.mass()[i]);
        out.push('\n');
    }
    out
}

/// Load the CSV form. A missing `mass` column yields uniform mass, an empty
/// label cell an unlabeled row. Malformed input reports the offending line
/// number (the header is line 1).
pub fn load_csv<F: Scalar>(path: &Path) -> Result<LabeledDataset<F>> {
    let text = std::fs::read_to_string(path)?;
    from_csv_string(&text)
}

/// Parse the CSV form from a string (see [`load_csv`]).
pub fn from_csv_string<F: Scalar>(text: &str) -> Result<LabeledDataset<F>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format {
            line: 1,
            message: "empty file".into(),
        })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();

    let mut d = 0;
    while d < cols.len() && cols[d] == format!("f{d}") {
        d += 1;
    }
    if d == 0 {
        return Err(Error::Format {
            line: 1,
            message: "header must start with feature columns f0,f1,...".into(),
        });
    }
    let mut rest = &cols[d..];
    let has_label = rest.first() == Some(&"label");
    if has_label {
        rest = &rest[1..];
    }
    let has_mass = rest.first() == Some(&"mass");
    if has_mass {
        rest = &rest[1..];
    }
    if !rest.is_empty() {
        return Err(Error::Format {
            line: 1,
            message: format!("unexpected trailing columns: {rest:?}"),
        });
    }
    let expected = d + usize::from(has_label) + usize::from(has_mass);

    let mut rows: Vec<F> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut masses: Vec<F> = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(Error::Format {
                line: line_no,
                message: format!("expected {expected} columns, got {}", fields.len()),
            });
        }
        for field in &fields[..d] {
            let v: F = field.parse().map_err(|e| Error::Format {
                line: line_no,
                message: format!("bad feature value {field:?}: {e}"),
            })?;
            rows.push(v);
        }
        let mut cursor = d;
        if has_label {
            let cell = fields[cursor];
            cursor += 1;
            if cell.is_empty() {
                labels.push(None);
            } else {
                let c: usize = cell.parse().map_err(|e| Error::Format {
                    line: line_no,
                    message: format!("bad label {cell:?}: {e}"),
                })?;
                labels.push(Some(c));
            }
        } else {
            labels.push(None);
        }
        if has_mass {
            let cell = fields[cursor];
            let m: F = cell.parse().map_err(|e| Error::Format {
                line: line_no,
                message: format!("bad mass {cell:?}: {e}"),
            })?;
            if m < F::zero() {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("negative mass {m}"),
                });
            }
            masses.push(m);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Format {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let features = Array2::from_shape_vec((n, d), rows)
        .expect("row-major shape matches collected values");
    let num_classes = labels
        .iter()
        .flatten()
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    if has_mass {
        LabeledDataset::new(features, labels, Array1::from_vec(masses), num_classes)
    } else {
        LabeledDataset::with_uniform_mass(features, labels, num_classes)
    }
}

/// Fraction of rows whose predicted label matches the true one.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    assert_eq!(truth.len(), predicted.len());
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| t == p)
        .count();
    hits as f64 / truth.len() as f64
}
