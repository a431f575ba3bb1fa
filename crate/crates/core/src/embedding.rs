//! Unit-norm embedding vectors and cosine similarity.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on the L2 norm of a stored embedding.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A finite, unit-norm real vector. Cloning is cheap (shared storage).
#[derive(Clone, PartialEq)]
pub struct EmbeddingVector(Arc<[f64]>);

impl EmbeddingVector {
    /// Wraps `values` after checking they are finite and already unit-norm.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        let norm = l2(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::validation(format!(
                "embedding norm {norm} is not within 1 ± {NORM_TOLERANCE}"
            )));
        }
        Ok(Self(values.into()))
    }

    /// Scales `values` to unit length.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        let norm = l2(&values);
        if norm == 0.0 {
            return Err(Error::usage("cannot normalize a zero vector"));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Dot product; equals cosine similarity for unit vectors. Dimensions
    /// must agree (checked in debug builds only).
    #[inline]
    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

impl fmt::Debug for EmbeddingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmbeddingVector(dim={}, ", self.dim())?;
        f.debug_list().entries(self.0.iter().take(4)).finish()?;
        write!(f, "..)")
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::usage("embedding must have at least one component"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("embedding component {i} is not finite")));
    }
    Ok(())
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity of two raw vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    check_finite(a)?;
    check_finite(b)?;
    let (na, nb) = (l2(a), l2(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::usage("cosine similarity of a zero vector is undefined"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of two embeddings.
pub fn cosine_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine(a.as_slice(), b.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut impl Rng, d: usize) -> EmbeddingVector {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        EmbeddingVector::normalized(v).unwrap()
    }

    #[test]
    fn identity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unit(&mut rng, 64);
        assert!((cosine_sim(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_is_zero() {
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        a[0] = 1.0;
        b[1] = 1.0;
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn analytic_dot() {
        let s = cosine(&[1.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((s - 0.6).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::Usage(_))));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Usage(_))));
        assert!(EmbeddingVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(EmbeddingVector::new(vec![0.5, 0.5]).is_err());
        assert!(EmbeddingVector::normalized(vec![0.0; 3]).is_err());
    }

    #[test]
    fn symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = random_unit(&mut rng, 64);
            let b = random_unit(&mut rng, 64);
            let ab = cosine_sim(&a, &b).unwrap();
            let ba = cosine_sim(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-12);
            assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
