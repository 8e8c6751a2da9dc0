//! Differentiable dependency function: syntactic distances and heights to a
//! matrix `P_D(j|i)` of parent probabilities, with its vector-Jacobian product.
//!
//! Constituent boundaries use virtual sentinel distances of `+inf` outside
//! the sentence, so `p(-1 in C(i)) = p(n in C(i)) = 0` and the boundary
//! distributions `p(l|i)`, `p(r|i)` each sum to one.
//!
//! # Factored evaluation
//!
//! ```text
//! P_D(j|i) = sum_{l <= min(i,j)} sum_{r >= max(i,j)} p(l|i) p(r|i) e_j / S(l,r)
//!          = e_j * C_i(min(i,j), max(i,j))
//! ```
//!
//! with `e_k = exp(h_k / mu2)` and `S(l,r) = sum_{l<=k<=r} e_k`. For each row
//! `i` the table `M_i(l,r) = p(l|i) p(r|i) / S(l,r)` has O(n^2) entries and
//! `C_i(a,b) = sum_{l<=a, r>=b} M_i(l,r)` is its 2-D cumulative sum, so the
//! whole matrix costs O(n^3). The O(n^4) span enumeration lives in the tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constituent (`mu1`) and parent (`mu2`) temperatures, stored unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    pub raw_mu1: f64,
    pub raw_mu2: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Temperatures {
            raw_mu1: 0.0,
            raw_mu2: 0.0,
        }
    }
}

impl Temperatures {
    pub fn from_values(mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu2 > 0.0 && mu1.is_finite() && mu2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperatures must be positive and finite, got {mu1}, {mu2}"
            )));
        }
        Ok(Temperatures {
            raw_mu1: mu1.ln(),
            raw_mu2: mu2.ln(),
        })
    }

    pub fn mu1(&self) -> f64 {
        self.raw_mu1.exp()
    }

    pub fn mu2(&self) -> f64 {
        self.raw_mu2.exp()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-major `n x n` matrix of parent probabilities; row `i` holds `P_D(.|i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DepMatrix {
    pub fn zeros(n: usize) -> Self {
        DepMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(DepMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `P_D(j|i)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Gradients of `<upstream, P_D>` with respect to every input.
#[derive(Debug, Clone, PartialEq)]
pub struct DepGrads {
    pub distances: Vec<f64>,
    pub heights: Vec<f64>,
    pub mu1: f64,
    pub mu2: f64,
}

fn check_inputs(d: &[f64], h: &[f64], mu1: f64, mu2: f64) -> Result<()> {
    if h.is_empty() {
        return Err(Error::InvalidInput("no heights".into()));
    }
    if d.len() + 1 != h.len() {
        return Err(Error::LengthMismatch {
            expected: h.len() - 1,
            found: d.len(),
        });
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distances"));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("heights"));
    }
    if !(mu1 > 0.0 && mu1.is_finite() && mu2 > 0.0 && mu2.is_finite()) {
        return Err(Error::NonFinite("temperatures"));
    }
    Ok(())
}

/// `p(pos in C(x_i))`. Positions left of `i` use the distances between `pos`
/// and `i`, positions right of it the mirrored form. `pos == i` gives 1 and
/// the sentinels `-1` and `n` give 0.
pub fn prob_in_constituent(pos: isize, i: usize, d: &[f64], h: &[f64], mu1: f64) -> Result<f64> {
    let n = h.len();
    if i >= n {
        return Err(Error::IndexOutOfRange {
            index: i as isize,
            len: n,
        });
    }
    if pos < -1 || pos > n as isize {
        return Err(Error::IndexOutOfRange { index: pos, len: n });
    }
    if d.len() + 1 != n {
        return Err(Error::LengthMismatch {
            expected: n - 1,
            found: d.len(),
        });
    }
    if pos == -1 || pos == n as isize {
        return Ok(0.0);
    }
    let pos = pos as usize;
    let between = match pos.cmp(&i) {
        std::cmp::Ordering::Equal => return Ok(1.0),
        std::cmp::Ordering::Less => &d[pos..i],
        std::cmp::Ordering::Greater => &d[i..pos],
    };
    let m = between.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(sigmoid((h[i] - m) / mu1))
}

fn check_index(idx: usize, n: usize) -> Result<()> {
    if idx >= n {
        return Err(Error::IndexOutOfRange {
            index: idx as isize,
            len: n,
        });
    }
    Ok(())
}

/// `p_C([l,r]|i) = p(l|i) p(r|i)` for `l <= i <= r`, else 0.
pub fn span_prob(l: usize, r: usize, i: usize, d: &[f64], h: &[f64], mu1: f64) -> Result<f64> {
    let n = h.len();
    for idx in [l, r, i] {
        check_index(idx, n)?;
    }
    if !(l <= i && i <= r) {
        return Ok(0.0);
    }
    let (li, ri) = (l as isize, r as isize);
    let pl = prob_in_constituent(li, i, d, h, mu1)? - prob_in_constituent(li - 1, i, d, h, mu1)?;
    let pr = prob_in_constituent(ri, i, d, h, mu1)? - prob_in_constituent(ri + 1, i, d, h, mu1)?;
    Ok(pl * pr)
}

/// Softmax of `h / mu2` over `[l, r]`, evaluated at `j` (0 outside the span).
pub fn parent_prob(j: usize, l: usize, r: usize, h: &[f64], mu2: f64) -> Result<f64> {
    let n = h.len();
    for idx in [j, l, r] {
        check_index(idx, n)?;
    }
    if l > r {
        return Err(Error::InvalidInput(format!("empty span [{l},{r}]")));
    }
    if j < l || j > r {
        return Ok(0.0);
    }
    let top = h[l..=r].iter().copied().fold(f64::NEG_INFINITY, f64::max) / mu2;
    let z: f64 = h[l..=r].iter().map(|&v| (v / mu2 - top).exp()).sum();
    Ok((h[j] / mu2 - top).exp() / z)
}

/// Per-row boundary quantities kept for the backward pass.
struct RowBoundaries {
    /// `a_left[l] = p(l in C(i))` for `l in 0..=i`.
    a_left: Vec<f64>,
    /// Index of the distance realizing the max for each `l < i`.
    arg_left: Vec<usize>,
    /// `z_left[l] = (h_i - max) / mu1`.
    z_left: Vec<f64>,
    /// `a_right[r - i]` for `r in i..n`.
    a_right: Vec<f64>,
    arg_right: Vec<usize>,
    z_right: Vec<f64>,
    /// `p(l|i)` for `l in 0..=i`.
    p_left: Vec<f64>,
    /// `p(r|i)` indexed by `r - i`.
    p_right: Vec<f64>,
}

fn row_boundaries(i: usize, d: &[f64], h: &[f64], mu1: f64) -> RowBoundaries {
    let n = h.len();
    let mut a_left = vec![0.0; i + 1];
    let mut arg_left = vec![0; i + 1];
    let mut z_left = vec![0.0; i + 1];
    a_left[i] = 1.0;
    let mut m = f64::NEG_INFINITY;
    let mut arg = i;
    for l in (0..i).rev() {
        if d[l] > m {
            m = d[l];
            arg = l;
        }
        let z = (h[i] - m) / mu1;
        z_left[l] = z;
        arg_left[l] = arg;
        a_left[l] = sigmoid(z);
    }
    let p_left: Vec<f64> = (0..=i)
        .map(|l| a_left[l] - if l > 0 { a_left[l - 1] } else { 0.0 })
        .collect();

    let width = n - i;
    let mut a_right = vec![0.0; width];
    let mut arg_right = vec![0; width];
    let mut z_right = vec![0.0; width];
    a_right[0] = 1.0;
    let mut m = f64::NEG_INFINITY;
    let mut arg = i;
    for r in i + 1..n {
        if d[r - 1] > m {
            m = d[r - 1];
            arg = r - 1;
        }
        let z = (h[i] - m) / mu1;
        z_right[r - i] = z;
        arg_right[r - i] = arg;
        a_right[r - i] = sigmoid(z);
    }
    let p_right: Vec<f64> = (0..width)
        .map(|k| a_right[k] - if k + 1 < width { a_right[k + 1] } else { 0.0 })
        .collect();

    RowBoundaries {
        a_left,
        arg_left,
        z_left,
        a_right,
        arg_right,
        z_right,
        p_left,
        p_right,
    }
}

/// Shifted exponentials `exp(h/mu2 - max)` and the span sums `S(l, r)`.
fn span_sums(h: &[f64], mu2: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let top = h.iter().copied().fold(f64::NEG_INFINITY, f64::max) / mu2;
    let e: Vec<f64> = h.iter().map(|&v| (v / mu2 - top).exp()).collect();
    let mut s = vec![0.0; n * n];
    for l in 0..n {
        let mut acc = 0.0;
        for r in l..n {
            acc += e[r];
            s[l * n + r] = acc;
        }
    }
    (e, s)
}

/// `C_i(a, b)` for `a <= i <= b`, stored at `[a * n + b]`.
fn row_cumulative(i: usize, b: &RowBoundaries, s: &[f64], n: usize) -> Vec<f64> {
    // suffix sums over r of M(l, r), then prefix sums over l
    let mut c = vec![0.0; n * n];
    for l in 0..=i {
        let mut acc = 0.0;
        for r in (i..n).rev() {
            acc += b.p_left[l] * b.p_right[r - i] / s[l * n + r];
            c[l * n + r] = acc;
        }
    }
    for l in 1..=i {
        for r in i..n {
            c[l * n + r] += c[(l - 1) * n + r];
        }
    }
    c
}

/// Builds `P_D` with the factored O(n^3) scheme; the diagonal is 0.
pub fn dependency_matrix(d: &[f64], h: &[f64], mu1: f64, mu2: f64) -> Result<DepMatrix> {
    check_inputs(d, h, mu1, mu2)?;
    let n = h.len();
    let (e, s) = span_sums(h, mu2);
    let mut out = DepMatrix::zeros(n);
    for i in 0..n {
        let b = row_boundaries(i, d, h, mu1);
        let c = row_cumulative(i, &b, &s, n);
        for j in 0..n {
            if j != i {
                let (lo, hi) = if j < i { (j, i) } else { (i, j) };
                out.data[i * n + j] = e[j] * c[lo * n + hi];
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`dependency_matrix`] contracted with
/// `upstream` (row-major `n x n`; the diagonal is ignored).
pub fn dependency_matrix_grad(
    d: &[f64],
    h: &[f64],
    mu1: f64,
    mu2: f64,
    upstream: &[f64],
) -> Result<DepGrads> {
    check_inputs(d, h, mu1, mu2)?;
    let n = h.len();
    if upstream.len() != n * n {
        return Err(Error::Shape(format!(
            "upstream has {} entries, expected {}",
            upstream.len(),
            n * n
        )));
    }
    let (e, s) = span_sums(h, mu2);
    let mut g_d = vec![0.0; d.len()];
    let mut g_h = vec![0.0; n];
    let mut g_mu1 = 0.0;
    let mut g_e = vec![0.0; n];
    let mut g_s = vec![0.0; n * n];

    for i in 0..n {
        let b = row_boundaries(i, d, h, mu1);
        let c = row_cumulative(i, &b, &s, n);
        let g = &upstream[i * n..(i + 1) * n];

        // gC at (j, i) for j < i and (i, j) for j > i
        let mut g_c_left = vec![0.0; i];
        let mut g_c_right = vec![0.0; n - i];
        for j in 0..n {
            if j == i {
                continue;
            }
            let (lo, hi) = if j < i { (j, i) } else { (i, j) };
            g_e[j] += g[j] * c[lo * n + hi];
            if j < i {
                g_c_left[j] = g[j] * e[j];
            } else {
                g_c_right[j - i] = g[j] * e[j];
            }
        }
        // gM(l, r) = sum_{a=l}^{i-1} gC(a,i) + sum_{b=i+1}^{r} gC(i,b)
        let mut acc_left = vec![0.0; i + 1];
        for l in (0..i).rev() {
            acc_left[l] = acc_left[l + 1] + g_c_left[l];
        }
        let mut acc_right = vec![0.0; n - i];
        for k in 1..n - i {
            acc_right[k] = acc_right[k - 1] + g_c_right[k];
        }

        let mut g_pl = vec![0.0; i + 1];
        let mut g_pr = vec![0.0; n - i];
        for l in 0..=i {
            for r in i..n {
                let gm = acc_left[l] + acc_right[r - i];
                if gm == 0.0 {
                    continue;
                }
                let sv = s[l * n + r];
                let pl = b.p_left[l];
                let pr = b.p_right[r - i];
                g_pl[l] += gm * pr / sv;
                g_pr[r - i] += gm * pl / sv;
                g_s[l * n + r] -= gm * pl * pr / (sv * sv);
            }
        }

        // p(l|i) = a(l) - a(l-1); a(i) = 1 is constant
        for l in 0..i {
            let ga = g_pl[l] - g_pl[l + 1];
            let a = b.a_left[l];
            let gz = ga * a * (1.0 - a);
            g_h[i] += gz / mu1;
            g_d[b.arg_left[l]] -= gz / mu1;
            g_mu1 -= gz * b.z_left[l] / mu1;
        }
        for k in 1..n - i {
            let ga = g_pr[k] - g_pr[k - 1];
            let a = b.a_right[k];
            let gz = ga * a * (1.0 - a);
            g_h[i] += gz / mu1;
            g_d[b.arg_right[k]] -= gz / mu1;
            g_mu1 -= gz * b.z_right[k] / mu1;
        }
    }

    // S(l, r) = sum_{l<=k<=r} e_k
    for l in 0..n {
        let mut acc = 0.0;
        let mut suffix = vec![0.0; n];
        for r in (l..n).rev() {
            acc += g_s[l * n + r];
            suffix[r] = acc;
        }
        for k in l..n {
            g_e[k] += suffix[k];
        }
    }
    let mut g_mu2 = 0.0;
    for k in 0..n {
        g_h[k] += g_e[k] * e[k] / mu2;
        g_mu2 -= g_e[k] * e[k] * h[k] / (mu2 * mu2);
    }
    Ok(DepGrads {
        distances: g_d,
        heights: g_h,
        mu1: g_mu1,
        mu2: g_mu2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let d = [0.5, 1.0];
        let h = [1.0, 0.5, 2.0];
        assert_eq!(prob_in_constituent(1, 1, &d, &h, 1.0).unwrap(), 1.0);
        assert_eq!(prob_in_constituent(-1, 1, &d, &h, 1.0).unwrap(), 0.0);
        assert_eq!(prob_in_constituent(3, 1, &d, &h, 1.0).unwrap(), 0.0);
        // h_1 equals d_0
        assert_eq!(prob_in_constituent(0, 1, &d, &h, 1.0).unwrap(), 0.5);
        assert!(prob_in_constituent(4, 1, &d, &h, 1.0).is_err());
        assert!(prob_in_constituent(-2, 1, &d, &h, 1.0).is_err());
    }

    #[test]
    fn span_prob_examples() {
        let d = [0.3, -0.2];
        let h = [0.1, 0.4, -0.5];
        assert_eq!(span_prob(2, 2, 1, &d, &h, 1.0).unwrap(), 0.0);
        assert_eq!(span_prob(0, 0, 0, &[], &[0.7], 1.0).unwrap(), 1.0);
        assert!(span_prob(0, 3, 1, &d, &h, 1.0).is_err());
    }

    #[test]
    fn parent_prob_examples() {
        let h = [0.2, 0.2, 0.2];
        for j in 0..3 {
            assert!((parent_prob(j, 0, 2, &h, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(parent_prob(2, 0, 1, &h, 1.0).unwrap(), 0.0);
        let mu2 = 0.7;
        let h = [0.0, mu2 * 2f64.ln(), 5.0];
        assert!((parent_prob(0, 0, 1, &h, mu2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((parent_prob(1, 0, 1, &h, mu2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_token_matrix() {
        let m = dependency_matrix(&[], &[0.3], 1.0, 1.0).unwrap();
        assert_eq!(m.as_slice(), &[0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dependency_matrix(&[f64::NAN], &[0.0, 0.0], 1.0, 1.0).is_err());
        assert!(dependency_matrix(&[0.0], &[0.0, f64::INFINITY], 1.0, 1.0).is_err());
        assert!(dependency_matrix(&[0.0, 1.0], &[0.0, 0.0], 1.0, 1.0).is_err());
        assert!(dependency_matrix_grad(&[0.0], &[0.0, 0.0], 1.0, 1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let g =
            dependency_matrix_grad(&[0.1, 0.9], &[0.3, -0.2, 0.5], 0.8, 1.3, &[0.0; 9]).unwrap();
        assert!(g.distances.iter().chain(&g.heights).all(|v| *v == 0.0));
        assert_eq!((g.mu1, g.mu2), (0.0, 0.0));
    }

    #[test]
    fn temperatures_default_to_one() {
        let t = Temperatures::default();
        assert_eq!((t.mu1(), t.mu2()), (1.0, 1.0));
        assert!(Temperatures::from_values(0.0, 1.0).is_err());
    }
}
