//! Reference scaled dot-product self-attention and the efficient
//! (linear-cost) variant, plus the RoI attention head that turns a feature
//! grid into the squashed attention map scored by the guided-attention loss.

use thiserror::Error;

/// Side length of the RoI feature grid fed to the attention head.
pub const ROI_GRID: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error("matrix data has {len} values, expected {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("matrix or grid dimension is zero")]
    ZeroDimension,
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AttentionError> {
        if rows == 0 || cols == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        if rows * cols != data.len() {
            return Err(AttentionError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AttentionError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AttentionError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self.get(r, c));
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, AttentionError> {
        if self.cols != rhs.rows {
            return Err(AttentionError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..rhs.cols {
                    out[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Rows reordered so that output row `i` is input row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.rows);
        let data = perm.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Real-valued `height × width` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, AttentionError> {
        if height == 0 || width == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        if height * width != data.len() {
            return Err(AttentionError::BadLength {
                rows: height,
                cols: width,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite(i));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "zero-sized grid");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureGrid {
        FeatureGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut data = Vec::with_capacity(m.data.len());
    for r in 0..m.rows {
        let row = m.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        data.extend(exps.iter().map(|e| e / total));
    }
    Matrix {
        rows: m.rows,
        cols: m.cols,
        data,
    }
}

fn check_qkv(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<(), AttentionError> {
    if q.cols != k.cols {
        return Err(AttentionError::DimensionMismatch(format!(
            "query width {} != key width {}",
            q.cols, k.cols
        )));
    }
    if k.rows != v.rows {
        return Err(AttentionError::DimensionMismatch(format!(
            "{} keys but {} values",
            k.rows, v.rows
        )));
    }
    Ok(())
}

/// `softmax(q·kᵀ / √d_k) · v`.
pub fn self_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix, AttentionError> {
    check_qkv(q, k, v)?;
    let scores = q.matmul(&k.transpose())?.scale(1.0 / (q.cols as f64).sqrt());
    softmax_rows(&scores).matmul(v)
}

/// Efficient attention: `softmax_row(q) · (softmax_col(k)ᵀ · v)`.
///
/// Keys are normalized over positions and aggregated with the values first,
/// so the cost is linear in the number of tokens. This is a different
/// normalization from [`self_attention`] and agrees with it only in special
/// cases (one token, uniform weights).
pub fn efficient_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix, AttentionError> {
    check_qkv(q, k, v)?;
    let q_norm = softmax_rows(q);
    let k_norm_t = softmax_rows(&k.transpose());
    let context = k_norm_t.matmul(v)?;
    q_norm.matmul(&context)
}

pub fn activate_logistic(g: &FeatureGrid) -> FeatureGrid {
    g.map(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionKind {
    #[default]
    Scaled,
    Efficient,
}

/// Attention head over a single-channel RoI grid.
///
/// Each cell is a token with one feature. `query`, `key` and `value` are
/// `1 × d` projections, `output` maps the `d_v`-wide attended tokens back to
/// one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiAttention {
    height: usize,
    width: usize,
    query: Matrix,
    key: Matrix,
    value: Matrix,
    output: Matrix,
    kind: AttentionKind,
}

impl Default for RoiAttention {
    fn default() -> Self {
        Self {
            height: ROI_GRID,
            width: ROI_GRID,
            query: Matrix::identity(1),
            key: Matrix::identity(1),
            value: Matrix::identity(1),
            output: Matrix::identity(1),
            kind: AttentionKind::Scaled,
        }
    }
}

impl RoiAttention {
    pub fn new(
        (height, width): (usize, usize),
        query: Matrix,
        key: Matrix,
        value: Matrix,
        output: Matrix,
        kind: AttentionKind,
    ) -> Result<Self, AttentionError> {
        if height == 0 || width == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        if query.rows != 1 || key.rows != 1 || value.rows != 1 {
            return Err(AttentionError::DimensionMismatch(
                "projections must map one input channel".into(),
            ));
        }
        if query.cols != key.cols {
            return Err(AttentionError::DimensionMismatch(format!(
                "query width {} != key width {}",
                query.cols, key.cols
            )));
        }
        if output.rows != value.cols || output.cols != 1 {
            return Err(AttentionError::DimensionMismatch(format!(
                "output projection must be {}x1, got {}x{}",
                value.cols, output.rows, output.cols
            )));
        }
        Ok(Self {
            height,
            width,
            query,
            key,
            value,
            output,
            kind,
        })
    }

    pub fn with_grid(mut self, height: usize, width: usize) -> Result<Self, AttentionError> {
        if height == 0 || width == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        self.height = height;
        self.width = width;
        Ok(self)
    }

    pub fn with_kind(mut self, kind: AttentionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Attention features in `(0, 1)`, same shape as `roi`.
    pub fn apply(&self, roi: &FeatureGrid) -> Result<FeatureGrid, AttentionError> {
        if roi.shape() != (self.height, self.width) {
            return Err(AttentionError::DimensionMismatch(format!(
                "RoI grid is {:?}, head expects {:?}",
                roi.shape(),
                (self.height, self.width)
            )));
        }
        let tokens = Matrix::new(roi.len(), 1, roi.data().to_vec())?;
        let q = tokens.matmul(&self.query)?;
        let k = tokens.matmul(&self.key)?;
        let v = tokens.matmul(&self.value)?;
        let attended = match self.kind {
            AttentionKind::Scaled => self_attention(&q, &k, &v)?,
            AttentionKind::Efficient => efficient_attention(&q, &k, &v)?,
        };
        let projected = attended.matmul(&self.output)?;
        let grid = FeatureGrid::new(self.height, self.width, projected.data)?;
        Ok(activate_logistic(&grid))
    }
}

/// [`RoiAttention::default`] applied to a 7×7 grid.
pub fn roi_attention(roi: &FeatureGrid) -> Result<FeatureGrid, AttentionError> {
    RoiAttention::default().apply(roi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&m(&[&[2.0, 2.0, 2.0, 2.0]]));
        assert!(s.data().iter().all(|v| (v - 0.25).abs() < 1e-15));

        let s = softmax_rows(&m(&[&[0.0, 3f64.ln()]]));
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-15);

        let s = softmax_rows(&m(&[&[5.0], &[-300.0], &[1e300]]));
        assert_eq!(s.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn softmax_survives_extreme_logits() {
        let s = softmax_rows(&m(&[&[1000.0, 0.0, -1000.0]]));
        assert_eq!(s.row(0)[0], 1.0);
        assert!(s.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_query_averages_values() {
        let q = Matrix::zeros(3, 2);
        let k = m(&[&[1.0, -2.0], &[0.5, 3.0], &[4.0, 0.0], &[-1.0, -1.0]]);
        let v = m(&[&[1.0, 10.0], &[2.0, 20.0], &[3.0, 30.0], &[6.0, 60.0]]);
        let out = self_attention(&q, &k, &v).unwrap();
        for r in 0..3 {
            assert!((out.get(r, 0) - 3.0).abs() < 1e-12);
            assert!((out.get(r, 1) - 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_token_hand_case() {
        let q = m(&[&[10.0], &[-10.0]]);
        let v = m(&[&[1.0], &[0.0]]);
        let out = self_attention(&q, &q, &v).unwrap();
        // weights are σ(±200): first row attends to key 0, second to key 1
        assert!((out.get(0, 0) - 1.0).abs() < 1e-8);
        assert!(out.get(1, 0).abs() < 1e-8);
    }

    #[test]
    fn single_token_returns_value_row() {
        let q = m(&[&[3.0, -1.0]]);
        let k = m(&[&[0.2, 7.0]]);
        let v = m(&[&[4.0, 5.0, 6.0]]);
        assert_eq!(self_attention(&q, &k, &v).unwrap(), v);
        let eff = efficient_attention(&q, &k, &v).unwrap();
        for (a, b) in eff.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn efficient_zero_inputs_average_values() {
        let q = Matrix::zeros(2, 3);
        let k = Matrix::zeros(4, 3);
        let v = m(&[&[0.0], &[4.0], &[8.0], &[12.0]]);
        let out = efficient_attention(&q, &k, &v).unwrap();
        assert!(out.data().iter().all(|x| (x - 6.0).abs() < 1e-12));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let q = Matrix::zeros(2, 3);
        let k = Matrix::zeros(2, 2);
        let v = Matrix::zeros(2, 1);
        assert!(self_attention(&q, &k, &v).is_err());
        assert!(efficient_attention(&q, &k, &v).is_err());
        let k = Matrix::zeros(3, 3);
        assert!(self_attention(&q, &k, &v).is_err());
    }

    #[test]
    fn logistic_examples() {
        let g = FeatureGrid::new(1, 4, vec![0.0, 3f64.ln(), 800.0, -800.0]).unwrap();
        let a = activate_logistic(&g);
        assert_eq!(a.get(0, 0), 0.5);
        assert!((a.get(0, 1) - 0.75).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 1.0);
        assert!(a.get(0, 3) >= 0.0 && a.get(0, 3) < 1e-300);
    }

    #[test]
    fn roi_attention_constant_grid() {
        let out = roi_attention(&FeatureGrid::filled(7, 7, 0.8)).unwrap();
        assert_eq!(out.shape(), (7, 7));
        let first = out.data()[0];
        assert!(out.data().iter().all(|v| (v - first).abs() < 1e-15));
        // attention over identical tokens returns the token itself
        assert!((first - 1.0 / (1.0 + (-0.8f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn roi_attention_rejects_wrong_shape() {
        assert!(roi_attention(&FeatureGrid::filled(5, 7, 0.0)).is_err());
        let head = RoiAttention::default().with_grid(5, 7).unwrap();
        assert!(head.apply(&FeatureGrid::filled(5, 7, 0.0)).is_ok());
    }

    #[test]
    fn roi_attention_with_wider_projection() {
        let head = RoiAttention::new(
            (3, 3),
            m(&[&[1.0, -0.5]]),
            m(&[&[0.3, 2.0]]),
            m(&[&[1.0, 2.0, -1.0]]),
            m(&[&[0.5], &[0.25], &[1.0]]),
            AttentionKind::Efficient,
        )
        .unwrap();
        let roi = FeatureGrid::new(3, 3, (0..9).map(|i| i as f64 / 4.0 - 1.0).collect()).unwrap();
        let out = head.apply(&roi).unwrap();
        assert_eq!(out.shape(), (3, 3));
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));

        let bad = RoiAttention::new(
            (3, 3),
            m(&[&[1.0]]),
            m(&[&[1.0, 1.0]]),
            m(&[&[1.0]]),
            m(&[&[1.0]]),
            AttentionKind::Scaled,
        );
        assert!(bad.is_err());
    }
}
