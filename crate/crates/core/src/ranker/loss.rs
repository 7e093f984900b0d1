//! Sampled logistic loss and full-softmax cross-entropy on user/podcast vectors.

use crate::{Error, Result};

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss value and gradients with respect to the user vector and each podcast row.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub du: Vec<f64>,
    /// Gradient for each podcast row passed in, in the same order.
    pub d_rows: Vec<Vec<f64>>,
}

fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `−[ln σ(u·d_pos) + Σ_j ln σ(−u·d_neg_j)]`. `d_rows` lists the positive row
/// first, then the negatives.
pub fn sampled_loss(u: &[f64], d_pos: &[f64], d_negs: &[&[f64]]) -> Result<LossGrad> {
    check_finite(u, "user vector")?;
    check_finite(d_pos, "podcast vector")?;
    let mut du = vec![0.0; u.len()];
    let mut d_rows = Vec::with_capacity(1 + d_negs.len());

    let s = dot(u, d_pos);
    let mut loss = -log_sigmoid(s);
    let g = sigmoid(s) - 1.0;
    du.iter_mut().zip(d_pos).for_each(|(a, d)| *a += g * d);
    d_rows.push(u.iter().map(|x| g * x).collect());
    for d in d_negs {
        check_finite(d, "podcast vector")?;
        let s = dot(u, d);
        loss -= log_sigmoid(-s);
        let g = sigmoid(s);
        du.iter_mut().zip(d.iter()).for_each(|(a, d)| *a += g * d);
        d_rows.push(u.iter().map(|x| g * x).collect());
    }
    Ok(LossGrad { loss, du, d_rows })
}

/// `−ln softmax(D u)[positive]`; `d_rows` covers every podcast row.
pub fn softmax_loss(u: &[f64], rows: &[&[f64]], positive: usize) -> Result<LossGrad> {
    check_finite(u, "user vector")?;
    if positive >= rows.len() {
        return Err(Error::Dimension(format!("positive {positive} outside {} rows", rows.len())));
    }
    let scores: Vec<f64> = rows.iter().map(|d| dot(u, d)).collect();
    check_finite(&scores, "podcast scores")?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let lse = max + z.ln();
    let loss = lse - scores[positive];
    let mut du = vec![0.0; u.len()];
    let mut d_rows = Vec::with_capacity(rows.len());
    for (i, (d, s)) in rows.iter().zip(&scores).enumerate() {
        let g = (s - lse).exp() - f64::from(u8::from(i == positive));
        du.iter_mut().zip(d.iter()).for_each(|(a, d)| *a += g * d);
        d_rows.push(u.iter().map(|x| g * x).collect());
    }
    Ok(LossGrad { loss, du, d_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng as _;

    #[test]
    fn three_ln_two_at_zero_scores() {
        let u = [0.0, 0.0];
        let d = [1.0, 2.0];
        let l = sampled_loss(&u, &d, &[&d, &d]).unwrap();
        assert!((l.loss - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((l.loss - 2.07944).abs() < 1e-5);
    }

    #[test]
    fn saturated_scores_give_zero_loss_without_overflow() {
        let u = [1.0];
        let l = sampled_loss(&u, &[500.0], &[&[-500.0], &[-500.0]]).unwrap();
        assert!(l.loss >= 0.0 && l.loss < 1e-200);
        let l = sampled_loss(&u, &[-500.0], &[&[500.0]]).unwrap();
        assert!((l.loss - 1000.0).abs() < 1e-9);
        assert!(l.du.iter().all(|x| x.is_finite()));
        assert!(matches!(sampled_loss(&[f64::NAN], &[1.0], &[]), Err(Error::NonFinite(_))));
    }

    fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += eps;
                b[i] -= eps;
                (f(&a) - f(&b)) / (2.0 * eps)
            })
            .collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-3 * a.abs().max(b.abs()) + 1e-7
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let dim = rng.random_range(1..=8);
            let k = rng.random_range(1..=5);
            let v = |rng: &mut crate::Rng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect() };
            let u = v(&mut rng);
            let rows: Vec<Vec<f64>> = (0..=k).map(|_| v(&mut rng)).collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();

            let sampled = |u: &[f64], rows: &[&[f64]]| sampled_loss(u, rows[0], &rows[1..]).unwrap();
            let l = sampled(&u, &refs);
            let fd = finite_difference(|x| sampled(x, &refs).loss, &u, 1e-4);
            assert!(l.du.iter().zip(&fd).all(|(a, b)| close(*a, *b)), "{:?} vs {fd:?}", l.du);
            for r in 0..rows.len() {
                let fd = finite_difference(
                    |x| {
                        let mut refs = refs.clone();
                        refs[r] = x;
                        sampled(&u, &refs).loss
                    },
                    &rows[r],
                    1e-4,
                );
                assert!(l.d_rows[r].iter().zip(&fd).all(|(a, b)| close(*a, *b)));
            }

            let pos = rng.random_range(0..rows.len());
            let l = softmax_loss(&u, &refs, pos).unwrap();
            let fd = finite_difference(|x| softmax_loss(x, &refs, pos).unwrap().loss, &u, 1e-4);
            assert!(l.du.iter().zip(&fd).all(|(a, b)| close(*a, *b)));
        }
    }
}
