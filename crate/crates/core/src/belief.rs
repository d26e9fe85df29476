//! Categorical distributions and the handful of information-theoretic
//! primitives the rest of the engine is built on.
//!
//! Every logarithm goes through [`safe_ln`], which floors its argument at
//! [`EPSILON`] so deterministic mappings never produce `-inf`. All
//! quantities are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Floor applied inside every logarithm.
pub const EPSILON: f64 = 1e-16;

/// Allowed deviation of a categorical's total mass from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn safe_ln(x: f64) -> f64 {
    x.max(EPSILON).ln()
}

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical(Vec<f64>);

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_categorical(&probs)?;
        Ok(Categorical(probs))
    }

    /// Normalizes non-negative weights. Fails when the total mass is zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty weight vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateColumn { column: 0 });
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Categorical(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform categorical needs at least one outcome");
        Categorical(vec![1.0 / n as f64; n])
    }

    pub fn delta(n: usize, index: usize) -> Self {
        assert!(index < n, "delta index {index} out of range for {n} outcomes");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Categorical(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Categorical::new(v)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.0
    }
}

impl AsRef<[f64]> for Categorical {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks the categorical invariants on a raw slice.
pub fn check_categorical(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("categorical needs at least one outcome"));
    }
    if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid(format!(
            "entry {i} is {} (must be finite and non-negative)",
            probs[i]
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

/// Lowest index of the maximum entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalized exponential, computed after subtracting the maximum.
pub fn softmax(v: &[f64]) -> Result<Categorical> {
    if v.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("softmax input contains a non-finite entry"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(Categorical(exps.into_iter().map(|e| e / total).collect()))
}

/// Rescales every column to unit mass.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for c in 0..m.cols() {
        let total: f64 = (0..m.rows()).map(|r| m.get(r, c)).sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateColumn { column: c });
        }
        for r in 0..m.rows() {
            out.set(r, c, m.get(r, c) / total);
        }
    }
    Ok(out)
}

/// KL(p ‖ q) in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "kl divergence between lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (safe_ln(*pi) - safe_ln(*qi)))
        .sum();
    // Rounding can leave a tiny negative residue when p == q.
    Ok(kl.max(0.0))
}

/// Entropy −Σ a ln a of one likelihood column.
pub fn conditional_entropy_term(column: &[f64]) -> f64 {
    -column
        .iter()
        .filter(|a| **a > 0.0)
        .map(|a| a * safe_ln(*a))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap().probs(), &[0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!(close(p.probs()[0], 2.0 / 3.0, 1e-15));
        assert!(close(p.probs()[1], 1.0 / 3.0, 1e-15));
        let a = softmax(&[1.0, 2.0]).unwrap();
        let b = softmax(&[11.0, 12.0]).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn softmax_survives_huge_inputs() {
        let p = softmax(&[1000.0, 999.0, -1e6]).unwrap();
        assert!(check_categorical(p.probs()).is_ok());
    }

    #[test]
    fn normalize_columns_examples() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let n = normalize_columns(&m).unwrap();
        assert_eq!(n.to_rows(), vec![vec![0.5, 0.0], vec![0.5, 1.0]]);

        let eye = Matrix::identity(3);
        assert_eq!(normalize_columns(&eye).unwrap(), eye);

        let siren = Matrix::from_rows(vec![vec![7.0], vec![1.0]]).unwrap();
        assert_eq!(
            normalize_columns(&siren).unwrap().to_rows(),
            vec![vec![0.875], vec![0.125]]
        );
    }

    #[test]
    fn normalize_columns_names_zero_column() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0, 2.0], vec![1.0, 0.0, 0.0]]).unwrap();
        match normalize_columns(&m) {
            Err(Error::DegenerateColumn { column }) => assert_eq!(column, 1),
            other => panic!("expected degenerate column error, got {other:?}"),
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!(close(
            kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            2f64.ln(),
            1e-15
        ));
        // 0.8 ln(0.8/0.6) + 0.2 ln(0.2/0.4)
        let expected = 0.8 * (0.8f64 / 0.6).ln() + 0.2 * (0.2f64 / 0.4).ln();
        let got = kl_divergence(&[0.8, 0.2], &[0.6, 0.4]).unwrap();
        assert!(close(got, expected, 1e-15));
        assert!(close(got, 0.09152, 1e-5));
    }

    #[test]
    fn kl_length_mismatch() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn kl_against_zero_reference_is_finite() {
        let kl = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!(kl.is_finite() && kl > 10.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(conditional_entropy_term(&[1.0, 0.0]), 0.0);
        assert!(close(conditional_entropy_term(&[0.5, 0.5]), 2f64.ln(), 1e-15));
        let expected = -(0.875f64 * 0.875f64.ln() + 0.125 * 0.125f64.ln());
        let got = conditional_entropy_term(&[0.875, 0.125]);
        assert!(close(got, expected, 1e-15));
        assert!(close(got, 0.37677, 1e-5));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.25, 0.5, 0.25, 0.5]), 1);
        assert_eq!(Categorical::uniform(4).argmax(), 0);
    }

    #[test]
    fn categorical_rejects_bad_mass() {
        assert!(Categorical::new(vec![0.5, 0.4]).is_err());
        assert!(Categorical::new(vec![1.5, -0.5]).is_err());
        assert!(Categorical::new(vec![]).is_err());
        assert!(Categorical::from_weights(vec![0.0, 0.0]).is_err());
    }

    fn categorical(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |w| {
            Categorical::from_weights(w).ok().map(Categorical::into_vec)
        })
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(v in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            let p = softmax(&v).unwrap();
            prop_assert!(check_categorical(p.probs()).is_ok());
        }

        #[test]
        fn softmax_shift_invariance(
            v in prop::collection::vec(-20.0f64..20.0, 1..10),
            shift in -100.0f64..100.0,
        ) {
            let a = softmax(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn kl_is_non_negative_and_zero_on_self(
            (p, q) in (1usize..8).prop_flat_map(|n| (categorical(n), categorical(n)))
        ) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        }

        #[test]
        fn uniform_column_maximizes_entropy(p in (1usize..10).prop_flat_map(categorical)) {
            let n = p.len();
            let uniform = conditional_entropy_term(Categorical::uniform(n).probs());
            prop_assert!((uniform - (n as f64).ln()).abs() <= 1e-12);
            prop_assert!(conditional_entropy_term(&p) <= uniform + 1e-12);
        }
    }
}
