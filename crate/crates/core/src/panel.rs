//! Balanced panel storage, the within (demeaning) transformation and the
//! within-group least-squares estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RCOND};

/// A balanced panel of `n` units observed over `m` periods with `k` regressors.
///
/// Storage is unit-major: the `m` periods of unit `i` are adjacent, so time
/// slices of one unit are contiguous. Regressors for observation `(i, t)` sit
/// at `x[(i * m + t) * k..][..k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    n: usize,
    m: usize,
    k: usize,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl PanelData {
    /// Builds and validates a panel from flat unit-major buffers.
    pub fn new(n: usize, m: usize, k: usize, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        validate_panel(PanelData { n, m, k, y, x })
    }

    /// Builds a panel from per-unit rows: `y[i][t]` and `x[i][t][j]`.
    pub fn from_rows(y: &[Vec<f64>], x: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(Error::UnbalancedPanel(format!(
                "{} outcome rows but {} regressor rows",
                n,
                x.len()
            )));
        }
        let m = y[0].len();
        let k = x[0].first().map_or(0, Vec::len);
        let mut ys = Vec::with_capacity(n * m);
        let mut xs = Vec::with_capacity(n * m * k);
        for (i, (yi, xi)) in y.iter().zip(x).enumerate() {
            if yi.len() != m || xi.len() != m {
                return Err(Error::UnbalancedPanel(format!(
                    "unit {i} has {} outcomes and {} regressor rows, expected {m}",
                    yi.len(),
                    xi.len()
                )));
            }
            for (t, xit) in xi.iter().enumerate() {
                if xit.len() != k {
                    return Err(Error::UnbalancedPanel(format!(
                        "unit {i}, period {t} has {} regressors, expected {k}",
                        xit.len()
                    )));
                }
                xs.extend_from_slice(xit);
            }
            ys.extend_from_slice(yi);
        }
        PanelData::new(n, m, k, ys, xs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total number of observations, `n * m`.
    pub fn nm(&self) -> usize {
        self.n * self.m
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn unit_y(&self, i: usize) -> &[f64] {
        &self.y[i * self.m..(i + 1) * self.m]
    }

    /// The `m * k` regressor block of unit `i`.
    pub fn unit_x(&self, i: usize) -> &[f64] {
        let w = self.m * self.k;
        &self.x[i * w..(i + 1) * w]
    }

    pub fn y_at(&self, i: usize, t: usize) -> f64 {
        self.y[i * self.m + t]
    }

    pub fn x_at(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.m + t) * self.k;
        &self.x[start..start + self.k]
    }

    /// Returns a copy with `y` replaced, re-validated.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        PanelData::new(self.n, self.m, self.k, y, self.x.clone())
    }

    /// Returns a copy with `x` replaced, re-validated.
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        PanelData::new(self.n, self.m, self.k, self.y.clone(), x)
    }

    /// Constructor for buffers already known to satisfy the invariants.
    pub(crate) fn from_parts_unchecked(n: usize, m: usize, k: usize, y: Vec<f64>, x: Vec<f64>) -> Self {
        debug_assert_eq!(y.len(), n * m);
        debug_assert_eq!(x.len(), n * m * k);
        PanelData { n, m, k, y, x }
    }
}

/// Checks the panel invariants: balanced buffers, `n, k >= 1`, `m >= 2`,
/// finite entries.
pub fn validate_panel(raw: PanelData) -> Result<PanelData> {
    let PanelData { n, m, k, ref y, ref x } = raw;
    if n == 0 || k == 0 {
        return Err(Error::EmptyPanel);
    }
    if m < 2 {
        return Err(Error::TooFewPeriods { m });
    }
    if y.len() != n * m {
        return Err(Error::UnbalancedPanel(format!(
            "{} outcome cells for a {n}x{m} panel",
            y.len()
        )));
    }
    if x.len() != n * m * k {
        return Err(Error::UnbalancedPanel(format!(
            "{} regressor cells for a {n}x{m}x{k} panel",
            x.len()
        )));
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            field: "y",
            unit: pos / m,
            period: pos % m,
        });
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let obs = pos / k;
        return Err(Error::NonFiniteValue {
            field: "x",
            unit: obs / m,
            period: obs % m,
        });
    }
    Ok(raw)
}

/// Per-unit time averages of the outcome and the regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMeans {
    /// `n` outcome means.
    pub y: Vec<f64>,
    /// `n * k` regressor means, unit-major.
    pub x: Vec<f64>,
}

impl UnitMeans {
    pub fn of(panel: &PanelData) -> Self {
        let (n, m, k) = (panel.n, panel.m, panel.k);
        let inv_m = 1.0 / m as f64;
        let mut y = Vec::with_capacity(n);
        let mut x = vec![0.0; n * k];
        for i in 0..n {
            y.push(panel.unit_y(i).iter().sum::<f64>() * inv_m);
            let xm = &mut x[i * k..(i + 1) * k];
            for row in panel.unit_x(i).chunks_exact(k) {
                for (acc, v) in xm.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            xm.iter_mut().for_each(|v| *v *= inv_m);
        }
        UnitMeans { y, x }
    }

    pub fn x_of(&self, i: usize, k: usize) -> &[f64] {
        &self.x[i * k..(i + 1) * k]
    }
}

/// Output of the within transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct WithinTransform {
    /// Demeaned outcomes, `n * m`, unit-major.
    pub y: Vec<f64>,
    /// Demeaned regressors, `n * m * k`, unit-major.
    pub x: Vec<f64>,
    pub means: UnitMeans,
}

/// Subtracts each unit's time average from its outcomes and regressors.
pub fn within_transform(panel: &PanelData) -> WithinTransform {
    let means = UnitMeans::of(panel);
    let (m, k) = (panel.m, panel.k);
    let mut y = panel.y.clone();
    let mut x = panel.x.clone();
    for i in 0..panel.n {
        let ym = means.y[i];
        y[i * m..(i + 1) * m].iter_mut().for_each(|v| *v -= ym);
        let xm = means.x_of(i, k);
        for row in x[i * m * k..(i + 1) * m * k].chunks_exact_mut(k) {
            for (v, mu) in row.iter_mut().zip(xm) {
                *v -= mu;
            }
        }
    }
    WithinTransform { y, x, means }
}

/// A fitted within-group regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinFit {
    pub beta_hat: Vec<f64>,
    /// `n * m` residuals, unit-major.
    pub residuals: Vec<f64>,
    pub means: UnitMeans,
    /// `(1/nm) ΣΣ (x - x̄)(x - x̄)'`.
    pub sigma_hat: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
}

impl WithinFit {
    pub fn k(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn unit_residuals(&self, i: usize) -> &[f64] {
        &self.residuals[i * self.m..(i + 1) * self.m]
    }
}

/// Within-group estimator with the default rcond tolerance.
pub fn within_group_estimate(panel: &PanelData) -> Result<WithinFit> {
    within_group_estimate_with(panel, DEFAULT_RCOND)
}

/// Within-group estimator: least squares of demeaned `y` on demeaned `x`.
///
/// Fails with [`Error::SingularDesign`] when the demeaned cross-product
/// matrix is near singular, which happens for collinear regressors or a
/// regressor that is constant within every unit.
pub fn within_group_estimate_with(panel: &PanelData, rcond_tolerance: f64) -> Result<WithinFit> {
    let (n, m, k) = (panel.n, panel.m, panel.k);
    let wt = within_transform(panel);

    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    let mut raw_scale = vec![0.0; k];
    for (obs, row) in wt.x.chunks_exact(k).enumerate() {
        let yv = wt.y[obs];
        for a in 0..k {
            xty[a] += row[a] * yv;
            for b in 0..=a {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for row in panel.x.chunks_exact(k) {
        for (s, v) in raw_scale.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    fill_upper(&mut xtx);
    linalg::check_design(&xtx, &raw_scale, rcond_tolerance)?;
    let beta = linalg::spd_solve(&xtx, &xty)?;
    let beta_hat: Vec<f64> = beta.iter().copied().collect();

    let residuals =
        wt.y.iter()
            .zip(wt.x.chunks_exact(k))
            .map(|(yv, row)| yv - dot(row, &beta_hat))
            .collect();

    let sigma_hat = xtx / (n * m) as f64;
    Ok(WithinFit {
        beta_hat,
        residuals,
        means: wt.means,
        sigma_hat,
        n,
        m,
    })
}

/// Unit intercepts `α̂_i = ȳ_i - x̄_i'β̂`.
pub fn recover_fixed_effects(fit: &WithinFit) -> Vec<f64> {
    let k = fit.k();
    (0..fit.n)
        .map(|i| fit.means.y[i] - dot(fit.means.x_of(i, k), &fit.beta_hat))
        .collect()
}

/// A nonzero linear contrast `c` selecting `θ = c'β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Contrast(Vec<f64>);

impl Contrast {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroContrast);
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("contrast entries must be finite".into()));
        }
        Ok(Contrast(c))
    }

    /// The `j`-th unit vector of length `k`.
    pub fn unit(k: usize, j: usize) -> Self {
        assert!(j < k, "coordinate {j} out of range for k = {k}");
        let mut c = vec![0.0; k];
        c[j] = 1.0;
        Contrast(c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `c'v`, checking dimensions.
    pub fn apply(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                found: v.len(),
            });
        }
        Ok(dot(&self.0, v))
    }
}

impl TryFrom<Vec<f64>> for Contrast {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        Contrast::new(c)
    }
}

impl From<Contrast> for Vec<f64> {
    fn from(c: Contrast) -> Self {
        c.0
    }
}

/// `θ̂ = c'β̂`.
pub fn contrast_value(fit: &WithinFit, c: &Contrast) -> Result<f64> {
    c.apply(&fit.beta_hat)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn fill_upper(a: &mut DMatrix<f64>) {
    let k = a.nrows();
    for r in 0..k {
        for c in (r + 1)..k {
            a[(r, c)] = a[(c, r)];
        }
    }
}
