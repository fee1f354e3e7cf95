//! Shared numeric primitives: softmax, decoding, divergences and a
//! central-difference gradient.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-300;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[inline]
pub fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Max-subtracted softmax of `logits` into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Row-wise `log_softmax`.
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let lse = log_sum_exp(logits);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
}

/// Per-site marginals `q_i = softmax(l_i)`.
pub fn row_marginals(logits: &Matrix) -> Result<Matrix> {
    logits.ensure_finite()?;
    Ok(row_marginals_unchecked(logits))
}

pub(crate) fn row_marginals_unchecked(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        softmax_into(logits.row(i), out.row_mut(i));
    }
    out
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Per-row argmax; ties go to the lowest index.
pub fn argmax_decode(logits: &Matrix) -> Result<Vec<usize>> {
    logits.ensure_finite()?;
    Ok(logits.row_iter().map(argmax).collect())
}

pub fn one_hot(tokens: &[usize], vocab: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(tokens.len(), vocab);
    for (i, &t) in tokens.iter().enumerate() {
        if t >= vocab {
            return Err(Error::InvalidInput(format!(
                "token {t} at position {i} is outside a vocabulary of {vocab}"
            )));
        }
        out.set(i, t, 1.0);
    }
    Ok(out)
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn check_simplex(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("not a probability vector (sum {total})")));
    }
    Ok(())
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `H(p, q) = -sum_k p[k] ln q[k]` with `q` floored at [`PROB_FLOOR`].
pub fn cross_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(-p
        .iter()
        .zip(q)
        .filter(|(&pk, _)| pk != 0.0)
        .map(|(&pk, &qk)| pk * floored_ln(qk))
        .sum::<f64>())
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    check_simplex(p)?;
    check_simplex(q)?;
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pk, _)| pk > 0.0)
        .map(|(&pk, &qk)| pk * (pk.ln() - floored_ln(qk)))
        .sum::<f64>()
        .max(0.0)
}

/// Jensen–Shannon divergence with the midpoint mixture, natural log.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    check_simplex(p)?;
    check_simplex(q)?;
    Ok(js_unchecked(p, q))
}

pub(crate) fn js_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    total.clamp(0.0, std::f64::consts::LN_2)
}

/// Central-difference gradient of `f` at `at`, entry by entry.
pub fn finite_diff_gradient<F>(f: F, at: &Matrix, step: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> f64,
{
    if !(step > 0.0) {
        return Err(crate::error::param("step", "must be positive"));
    }
    let mut probe = at.clone();
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    for i in 0..at.rows() {
        for j in 0..at.cols() {
            let x = at.get(i, j);
            probe.set(i, j, x + step);
            let up = f(&probe);
            probe.set(i, j, x - step);
            let down = f(&probe);
            probe.set(i, j, x);
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            grad.set(i, j, (up - down) / (2.0 * step));
        }
    }
    Ok(grad)
}

/// Chain rule through a row softmax: given `dF/dq` and `q = softmax(l)`
/// returns `dF/dl`.
pub(crate) fn softmax_backward(marginals: &Matrix, grad_q: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(marginals.rows(), marginals.cols());
    for i in 0..marginals.rows() {
        let q = marginals.row(i);
        let g = grad_q.row(i);
        let inner: f64 = q.iter().zip(g).map(|(a, b)| a * b).sum();
        for (o, (&qk, &gk)) in out.row_mut(i).iter_mut().zip(q.iter().zip(g)) {
            *o = qk * (gk - inner);
        }
    }
    out
}

/// Average ranks (1-based), ties share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = level.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn softmax_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let q = row_marginals(&m).unwrap();
        for &v in q.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        for c in [-700.0, -3.0, 0.0, 12.5, 700.0] {
            let q = softmax(&[c, c + 2f64.ln()]);
            assert!((q[0] - 1.0 / 3.0).abs() < 1e-12, "{c}");
            assert!((q[1] - 2.0 / 3.0).abs() < 1e-12, "{c}");
        }
        let q = softmax(&[1000.0, 0.0, 0.0]);
        assert!(q.iter().all(|v| v.is_finite()));
        assert!((q[0] - 1.0).abs() < 1e-15);
        assert!(q[1] < 1e-300);
        assert!(row_marginals(&Matrix::filled(1, 2, f64::INFINITY)).is_err());
    }

    #[test]
    fn argmax_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(argmax_decode(&m).unwrap(), vec![1, 1]);
        let m = Matrix::from_rows(&[vec![2.0, 2.0, 0.0]]).unwrap();
        assert_eq!(argmax_decode(&m).unwrap(), vec![0]);
    }

    #[test]
    fn argmax_matches_scan() {
        let mut rng = crate::Rng::seed_from(3);
        let m = Matrix::from_fn(50, 7, |_, _| rng.normal());
        let decoded = argmax_decode(&m).unwrap();
        for (i, &t) in decoded.iter().enumerate() {
            let row = m.row(i);
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first = row.iter().position(|&v| v == best).unwrap();
            assert_eq!(t, first);
        }
    }

    #[test]
    fn divergence_examples() {
        assert!((cross_entropy(&[0.0, 1.0], &[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
        let u = vec![0.2; 5];
        assert!((cross_entropy(&u, &u).unwrap() - 5f64.ln()).abs() < 1e-14);
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        assert_eq!(js_divergence(&u, &u).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - LN_2).abs() < 1e-15);
        assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
        assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn cross_entropy_matches_direct_sum() {
        let mut rng = crate::Rng::seed_from(11);
        for _ in 0..100 {
            let p = softmax(&(0..6).map(|_| rng.normal()).collect::<Vec<_>>());
            let q = softmax(&(0..6).map(|_| 2.0 * rng.normal()).collect::<Vec<_>>());
            // Kahan-compensated oracle.
            let (mut sum, mut c) = (0.0f64, 0.0f64);
            for k in 0..6 {
                let y = -p[k] * q[k].ln() - c;
                let t = sum + y;
                c = (t - sum) - y;
                sum = t;
            }
            assert!((cross_entropy(&p, &q).unwrap() - sum).abs() < 1e-14);
        }
    }

    #[test]
    fn finite_difference_examples() {
        let at = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
        let g = finite_diff_gradient(|m| m.squared_norm(), &at, DEFAULT_FD_STEP).unwrap();
        for (a, b) in g.as_slice().iter().zip(at.as_slice()) {
            assert!((a - 2.0 * b).abs() <= 1e-6 * (2.0 * b).abs());
        }
        let g = finite_diff_gradient(|_| 4.0, &at, DEFAULT_FD_STEP).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        let err = finite_diff_gradient(|m| if m.get(1, 0) > 2.0 { f64::NAN } else { 0.0 }, &at, 1e-5);
        assert!(matches!(err, Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-4.0f64..4.0, n).prop_map(|v| softmax(&v))
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(row in prop::collection::vec(-50.0f64..50.0, 2..8), c in -100.0f64..100.0) {
            let a = softmax(&row);
            let b = softmax(&row.iter().map(|v| v + c).collect::<Vec<_>>());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gibbs_inequality(p in simplex(5), q in simplex(5)) {
            let h = cross_entropy(&p, &q).unwrap();
            prop_assert!(h >= entropy(&p) - 1e-10);
            prop_assert!((cross_entropy(&p, &p).unwrap() - entropy(&p)).abs() < 1e-10);
        }

        #[test]
        fn js_symmetric(p in simplex(4), q in simplex(4)) {
            let a = js_divergence(&p, &q).unwrap();
            let b = js_divergence(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!(a <= LN_2);
        }
    }
}
