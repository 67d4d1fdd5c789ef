//! Multilinear extensions over the Boolean cube.
//!
//! Variable 0 is the least significant bit of a table index. A tensor laid out
//! as `[a][b][c]` has `c` on the low bits, so its point is written `(c, b, a)`.

use crate::error::{Error, Result};
use crate::field::{Ext, Field, Fp};

/// Evaluation table of a multilinear polynomial with an optional support mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MleOracle {
    num_vars: usize,
    values: Vec<Fp>,
    support: Option<Vec<u32>>,
}

impl MleOracle {
    pub fn new(values: Vec<Fp>) -> Result<Self> {
        let n = values.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Size(format!("MLE table of length {n} is not a power of two")));
        }
        Ok(MleOracle { num_vars: n.trailing_zeros() as usize, values, support: None })
    }

    pub fn zeros(num_vars: usize) -> Self {
        MleOracle { num_vars, values: vec![Fp::ZERO; 1 << num_vars], support: None }
    }

    /// Attaches a sorted support mask; every nonzero index must be listed.
    pub fn with_support(mut self, mut support: Vec<u32>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.last().is_some_and(|&i| i as usize >= self.values.len()) {
            return Err(Error::Size("support index out of range".into()));
        }
        debug_assert!(
            self.values.iter().enumerate().all(|(i, v)| *v == Fp::ZERO || support.binary_search(&(i as u32)).is_ok()),
            "support mask misses a nonzero cell"
        );
        self.support = Some(support);
        Ok(self)
    }

    /// Attaches the exact support (all nonzero cells).
    pub fn with_exact_support(self) -> Self {
        let support = nonzero_support(&self.values);
        MleOracle { support: Some(support), ..self }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[Fp] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Fp> {
        self.values
    }

    pub fn support(&self) -> Option<&[u32]> {
        self.support.as_deref()
    }

    pub fn evaluate(&self, point: &[Ext]) -> Result<Ext> {
        if point.len() != self.num_vars {
            return Err(Error::Size(format!(
                "point has {} coordinates, oracle has {} variables",
                point.len(),
                self.num_vars
            )));
        }
        Ok(mle_eval_base(&self.values, point))
    }
}

pub fn nonzero_support<F: Field>(values: &[F]) -> Vec<u32> {
    values.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, _)| i as u32).collect()
}

/// Evaluates the MLE of a base-field table; `point.len()` must be `log2(len)`.
pub fn mle_eval_base(values: &[Fp], point: &[Ext]) -> Ext {
    assert_eq!(values.len(), 1 << point.len(), "table/point dimension mismatch");
    if point.is_empty() {
        return values[0].into();
    }
    let r = point[0];
    let mut cur: Vec<Ext> = values.chunks_exact(2).map(|p| Ext::from(p[0]) + r * (p[1] - p[0])).collect();
    for &r in &point[1..] {
        fold_in_place(&mut cur, r);
    }
    cur[0]
}

/// Evaluates the MLE of an extension-field table.
pub fn mle_eval(values: &[Ext], point: &[Ext]) -> Ext {
    assert_eq!(values.len(), 1 << point.len(), "table/point dimension mismatch");
    if point.is_empty() {
        return values[0];
    }
    let mut cur: Vec<Ext> = values.chunks_exact(2).map(|p| p[0] + point[0] * (p[1] - p[0])).collect();
    for &r in &point[1..] {
        fold_in_place(&mut cur, r);
    }
    cur[0]
}

/// Binds the lowest variable: `f'(j) = f(2j) + r (f(2j+1) - f(2j))`.
pub fn fold_in_place(values: &mut Vec<Ext>, r: Ext) {
    let half = values.len() / 2;
    for j in 0..half {
        let a = values[2 * j];
        let b = values[2 * j + 1];
        values[j] = a + r * (b - a);
    }
    values.truncate(half);
}

/// Binds the `k` lowest variables of a base table at `r[..k]`.
pub fn fold_low_base(values: &[Fp], r: &[Ext]) -> Vec<Ext> {
    let block = 1usize << r.len();
    let w = eq_table(r);
    values.chunks_exact(block).map(|chunk| chunk.iter().zip(&w).map(|(v, e)| *e * *v).sum()).collect()
}

/// Binds the highest variables of a base table (the top `r.len()` index bits).
pub fn fold_high_base(values: &[Fp], r: &[Ext]) -> Vec<Ext> {
    let w = eq_table(r);
    let stride = values.len() / w.len();
    let mut out = vec![Ext::ZERO; stride];
    for (k, e) in w.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(&values[k * stride..(k + 1) * stride]) {
            *o += *e * *v;
        }
    }
    out
}

/// `eq(r, j) = Π_k (r_k j_k + (1 - r_k)(1 - j_k))`.
pub fn eq_eval(r: &[Ext], j: &[Ext]) -> Result<Ext> {
    if r.len() != j.len() {
        return Err(Error::Size(format!("eq arguments of lengths {} and {}", r.len(), j.len())));
    }
    Ok(r.iter().zip(j).map(|(a, b)| *a * *b + (Ext::ONE - *a) * (Ext::ONE - *b)).product())
}

/// `eq(r, bits(index))` for a Boolean index.
pub fn eq_at_index(r: &[Ext], index: usize) -> Ext {
    r.iter().enumerate().map(|(k, rk)| if index >> k & 1 == 1 { *rk } else { Ext::ONE - *rk }).product()
}

/// Table of `eq(r, b)` over all Boolean `b`, with `r[k]` on index bit `k`.
pub fn eq_table(r: &[Ext]) -> Vec<Ext> {
    let mut table = Vec::with_capacity(1 << r.len());
    table.push(Ext::ONE);
    for &rk in r {
        let len = table.len();
        table.resize(2 * len, Ext::ZERO);
        for i in 0..len {
            let hi = table[i] * rk;
            table[i + len] = hi;
            table[i] -= hi;
        }
    }
    table
}

/// Converts an integer index into its Boolean point (LSB first).
pub fn index_to_point(index: usize, num_vars: usize) -> Vec<Ext> {
    (0..num_vars).map(|k| if index >> k & 1 == 1 { Ext::ONE } else { Ext::ZERO }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Ext> {
        (0..n).map(|_| Ext::random(rng)).collect()
    }

    #[test]
    fn agrees_on_cube_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<Fp> = (0..16).map(|_| Fp::random(&mut rng)).collect();
        let o = MleOracle::new(vals.clone()).unwrap();
        for (b, v) in vals.iter().enumerate() {
            assert_eq!(o.evaluate(&index_to_point(b, 4)).unwrap(), Ext::from(*v));
        }
        let c = MleOracle::new(vec![Fp::new(9); 8]).unwrap();
        assert_eq!(c.evaluate(&rand_point(&mut rng, 3)).unwrap(), Ext::from_u64(9));
        assert!(matches!(o.evaluate(&rand_point(&mut rng, 3)), Err(Error::Size(_))));
    }

    #[test]
    fn one_variable_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (a, b) = (Fp::random(&mut rng), Fp::random(&mut rng));
        let r = Ext::random(&mut rng);
        let o = MleOracle::new(vec![a, b]).unwrap();
        assert_eq!(o.evaluate(&[r]).unwrap(), (Ext::ONE - r) * a + r * b);
    }

    #[test]
    fn eq_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let r = rand_point(&mut rng, 5);
            let t = eq_table(&r);
            assert_eq!(t.iter().copied().sum::<Ext>(), Ext::ONE);
            for (b, tb) in t.iter().enumerate() {
                assert_eq!(*tb, eq_eval(&r, &index_to_point(b, 5)).unwrap());
                assert_eq!(*tb, eq_at_index(&r, b));
            }
        }
        for a in 0..8 {
            for b in 0..8 {
                let v = eq_eval(&index_to_point(a, 3), &index_to_point(b, 3)).unwrap();
                assert_eq!(v, if a == b { Ext::ONE } else { Ext::ZERO });
            }
        }
        assert!(eq_eval(&[Ext::ONE], &[]).is_err());
    }

    #[test]
    fn partial_folds_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let vals: Vec<Fp> = (0..64).map(|_| Fp::random(&mut rng)).collect();
        let p = rand_point(&mut rng, 6);
        let full = mle_eval_base(&vals, &p);
        assert_eq!(mle_eval(&fold_low_base(&vals, &p[..2]), &p[2..]), full);
        assert_eq!(mle_eval(&fold_high_base(&vals, &p[4..]), &p[..4]), full);
    }
}
