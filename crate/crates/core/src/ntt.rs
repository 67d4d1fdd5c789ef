//! Radix-2 number-theoretic transform over the Goldilocks field.

use crate::error::{Error, Result};
use crate::field::{Field, Fp, TWO_ADICITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed twiddles for one transform size.
#[derive(Debug, Clone)]
pub struct NttPlan {
    log_n: u32,
    forward: Vec<Fp>,
    inverse: Vec<Fp>,
    n_inv: Fp,
}

impl NttPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Size(format!("NTT length {n} is not a power of two")));
        }
        let log_n = n.trailing_zeros();
        if log_n > TWO_ADICITY {
            return Err(Error::Size(format!("NTT length 2^{log_n} exceeds two-adicity")));
        }
        let half = n / 2;
        let w = Fp::two_adic_root(log_n)?;
        let w_inv = if n > 1 { w.inverse()? } else { Fp::ONE };
        let mut forward = Vec::with_capacity(half);
        let mut inverse = Vec::with_capacity(half);
        let (mut a, mut b) = (Fp::ONE, Fp::ONE);
        for _ in 0..half {
            forward.push(a);
            inverse.push(b);
            a *= w;
            b *= w_inv;
        }
        let n_inv = Fp::new(n as u64).inverse()?;
        Ok(NttPlan { log_n, forward, inverse, n_inv })
    }

    pub fn len(&self) -> usize {
        1 << self.log_n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place transform; `values.len()` must equal the plan length.
    pub fn transform(&self, values: &mut [Fp], direction: Direction) -> Result<()> {
        let n = self.len();
        if values.len() != n {
            return Err(Error::Size(format!("NTT plan for {n} applied to {} values", values.len())));
        }
        if n == 1 {
            return Ok(());
        }
        bit_reverse(values, self.log_n);
        let twiddles = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for chunk in values.chunks_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for j in 0..half {
                    let t = hi[j] * twiddles[j * stride];
                    let u = lo[j];
                    lo[j] = u + t;
                    hi[j] = u - t;
                }
            }
            len <<= 1;
        }
        if direction == Direction::Inverse {
            for v in values.iter_mut() {
                *v *= self.n_inv;
            }
        }
        Ok(())
    }
}

fn bit_reverse(values: &mut [Fp], log_n: u32) {
    let n = values.len();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - log_n);
        if i < j {
            values.swap(i, j);
        }
    }
}

/// One-shot transform of `values`.
pub fn ntt(values: &[Fp], direction: Direction) -> Result<Vec<Fp>> {
    let plan = NttPlan::new(values.len())?;
    let mut out = values.to_vec();
    plan.transform(&mut out, direction)?;
    Ok(out)
}

/// Systematic Reed-Solomon encoder at rate `1 / 2^log_blowup`.
///
/// The message is read as evaluations on the order-`k` subgroup; the codeword
/// is the evaluation of the same degree-`< k` polynomial on the order-`k·2^b`
/// subgroup, so `codeword[j << b] = message[j]`.
#[derive(Debug, Clone)]
pub struct RsEncoder {
    small: NttPlan,
    large: NttPlan,
    log_blowup: u32,
}

impl RsEncoder {
    pub fn new(message_len: usize, log_blowup: u32) -> Result<Self> {
        let small = NttPlan::new(message_len)?;
        let large = NttPlan::new(message_len << log_blowup)?;
        Ok(RsEncoder { small, large, log_blowup })
    }

    pub fn message_len(&self) -> usize {
        self.small.len()
    }

    pub fn codeword_len(&self) -> usize {
        self.large.len()
    }

    pub fn encode(&self, message: &[Fp]) -> Result<Vec<Fp>> {
        let k = self.small.len();
        if message.len() != k {
            return Err(Error::Size(format!("RS message of length {} (expected {k})", message.len())));
        }
        let mut coeffs = message.to_vec();
        self.small.transform(&mut coeffs, Direction::Inverse)?;
        coeffs.resize(k << self.log_blowup, Fp::ZERO);
        self.large.transform(&mut coeffs, Direction::Forward)?;
        Ok(coeffs)
    }
}
