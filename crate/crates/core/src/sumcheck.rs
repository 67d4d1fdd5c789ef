//! Generic sumcheck over products of affine factor expressions.
//!
//! A [`Combiner`] is a sum of terms `coeff · Π (a + b·f_i)`; terms may also
//! reference a shared product that is evaluated once per cube pair. Round
//! messages are the evaluations of the round polynomial at `0..=D`.
//!
//! The sparse prover path restricts each term to the cube pairs on which all
//! of its masked (plain, `a = 0`) factors can be nonzero. Field arithmetic is
//! exact, so the emitted messages are identical to the dense path.

use crate::error::{Error, Result};
use crate::field::{Ext, Field, Fp};
use crate::mle::eq_table;
use crate::transcript::Transcript;

/// `a + b · f[factor]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affine {
    pub factor: usize,
    pub a: Ext,
    pub b: Ext,
}

impl Affine {
    pub fn id(factor: usize) -> Self {
        Affine { factor, a: Ext::ZERO, b: Ext::ONE }
    }

    pub fn one_minus(factor: usize) -> Self {
        Affine { factor, a: Ext::ONE, b: -Ext::ONE }
    }

    pub fn new(factor: usize, a: Ext, b: Ext) -> Self {
        Affine { factor, a, b }
    }

    /// Vanishes wherever the factor does.
    fn is_plain(&self) -> bool {
        self.a == Ext::ZERO
    }

    #[inline]
    fn eval(&self, v: Ext, ops: &mut u64) -> Ext {
        if self.b == Ext::ONE {
            if self.a == Ext::ZERO {
                v
            } else {
                self.a + v
            }
        } else if self.b == -Ext::ONE {
            self.a - v
        } else {
            *ops += 1;
            self.a + self.b * v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: Ext,
    pub factors: Vec<Affine>,
    /// Index into [`Combiner::products`].
    pub product: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Combiner {
    pub products: Vec<Vec<Affine>>,
    pub terms: Vec<Term>,
}

impl Combiner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_product(&mut self, factors: Vec<Affine>) -> usize {
        self.products.push(factors);
        self.products.len() - 1
    }

    pub fn term(&mut self, coeff: Ext, factors: Vec<Affine>) {
        self.terms.push(Term { coeff, factors, product: None });
    }

    pub fn term_with_product(&mut self, coeff: Ext, factors: Vec<Affine>, product: usize) {
        self.terms.push(Term { coeff, factors, product: Some(product) });
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.factors.len() + t.product.map_or(0, |p| self.products[p].len())).max().unwrap_or(0)
    }

    pub fn max_factor(&self) -> Option<usize> {
        let from_terms = self.terms.iter().flat_map(|t| t.factors.iter().map(|a| a.factor));
        let from_products = self.products.iter().flat_map(|p| p.iter().map(|a| a.factor));
        from_terms.chain(from_products).max()
    }

    /// Evaluates the combiner on concrete factor values.
    pub fn evaluate(&self, f: &[Ext]) -> Ext {
        let mut ops = 0;
        let prods: Vec<Ext> =
            self.products.iter().map(|p| p.iter().map(|a| a.eval(f[a.factor], &mut ops)).product()).collect();
        self.terms
            .iter()
            .map(|t| {
                let mut acc = t.coeff;
                for a in &t.factors {
                    acc *= a.eval(f[a.factor], &mut ops);
                }
                if let Some(p) = t.product {
                    acc *= prods[p];
                }
                acc
            })
            .sum()
    }

    /// Multiplies every term by `c`.
    pub fn scale(&mut self, c: Ext) {
        for t in &mut self.terms {
            t.coeff *= c;
        }
    }

    /// Appends `other`, shifting its factor indices by `offset`.
    pub fn absorb(&mut self, other: &Combiner, offset: usize) {
        let base = self.products.len();
        for p in &other.products {
            self.products.push(p.iter().map(|a| Affine { factor: a.factor + offset, ..*a }).collect());
        }
        for t in &other.terms {
            self.terms.push(Term {
                coeff: t.coeff,
                factors: t.factors.iter().map(|a| Affine { factor: a.factor + offset, ..*a }).collect(),
                product: t.product.map(|p| p + base),
            });
        }
    }
}

/// One sumcheck operand table, optionally carrying a sorted support mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub values: Vec<Ext>,
    pub support: Option<Vec<u32>>,
}

impl Factor {
    pub fn dense(values: Vec<Ext>) -> Self {
        Factor { values, support: None }
    }

    pub fn from_base(values: &[Fp]) -> Self {
        Factor::dense(values.iter().map(|v| Ext::from(*v)).collect())
    }

    pub fn masked(values: Vec<Ext>, support: Vec<u32>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]), "support must be sorted");
        debug_assert!(
            values.iter().enumerate().all(|(i, v)| *v == Ext::ZERO || support.binary_search(&(i as u32)).is_ok()),
            "support-superset invariant violated"
        );
        Factor { values, support: Some(support) }
    }

    /// Masks the factor with its exact nonzero support.
    pub fn with_exact_support(values: Vec<Ext>) -> Self {
        let support = crate::mle::nonzero_support(&values);
        Factor { values, support: Some(support) }
    }
}

#[derive(Debug, Clone)]
pub struct SumcheckClaim {
    pub num_vars: usize,
    pub degree_bound: usize,
    pub claimed_sum: Ext,
    pub factors: Vec<Factor>,
    pub combiner: Combiner,
}

impl SumcheckClaim {
    pub fn new(
        num_vars: usize,
        degree_bound: usize,
        claimed_sum: Ext,
        factors: Vec<Factor>,
        combiner: Combiner,
    ) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.values.len() != 1 << num_vars {
                return Err(Error::Size(format!("factor {i} has {} entries, domain has 2^{num_vars}", f.values.len())));
            }
        }
        if combiner.max_factor().is_some_and(|m| m >= factors.len()) {
            return Err(Error::Size("combiner references a missing factor".into()));
        }
        if combiner.degree() > degree_bound {
            return Err(Error::Size(format!(
                "combiner degree {} exceeds declared bound {degree_bound}",
                combiner.degree()
            )));
        }
        Ok(SumcheckClaim { num_vars, degree_bound, claimed_sum, factors, combiner })
    }

    /// Direct cube summation; the reference the prover's claims are checked against.
    pub fn cube_sum(&self) -> Ext {
        let mut vals = vec![Ext::ZERO; self.factors.len()];
        (0..1usize << self.num_vars)
            .map(|b| {
                for (v, f) in vals.iter_mut().zip(&self.factors) {
                    *v = f.values[b];
                }
                self.combiner.evaluate(&vals)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SumcheckProof {
    pub rounds: Vec<Vec<Ext>>,
}

impl SumcheckProof {
    pub fn byte_len(&self) -> usize {
        self.rounds.iter().map(|r| 8 + 16 * r.len()).sum::<usize>() + 8
    }
}

#[derive(Debug, Clone)]
pub struct ProverOutput {
    pub proof: SumcheckProof,
    pub point: Vec<Ext>,
    pub final_evals: Vec<Ext>,
}

#[derive(Debug, Clone)]
pub struct VerifierOutcome {
    pub point: Vec<Ext>,
    pub reduced_claim: Ext,
}

#[derive(Debug, Clone, Copy)]
pub struct ProverOptions {
    pub sparse: bool,
    /// Masks are dropped once density exceeds this fraction of the live table.
    pub theta: f64,
}

impl Default for ProverOptions {
    fn default() -> Self {
        ProverOptions { sparse: true, theta: 0.5 }
    }
}

impl ProverOptions {
    pub fn dense() -> Self {
        ProverOptions { sparse: false, theta: 0.5 }
    }
}

/// Extension-field multiplications performed by the prover.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub round_mults: u64,
    pub fold_mults: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.round_mults + self.fold_mults
    }

    pub fn add(&mut self, other: OpCounter) {
        self.round_mults += other.round_mults;
        self.fold_mults += other.fold_mults;
    }
}

fn absorb_header(t: &mut Transcript, num_vars: usize, degree: usize, sum: Ext) {
    let mut buf = Vec::with_capacity(32);
    buf.extend_from_slice(&(num_vars as u64).to_le_bytes());
    buf.extend_from_slice(&(degree as u64).to_le_bytes());
    buf.extend_from_slice(&sum.to_le_bytes());
    t.absorb(b"sumcheck-claim", &buf);
}

/// Projects a mask on the next-coarser cube: `{ j : 2j or 2j+1 in mask }`.
fn project(mask: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(mask.len());
    for &i in mask {
        let j = i >> 1;
        if out.last() != Some(&j) {
            out.push(j);
        }
    }
    out
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

struct RoundEngine<'a> {
    combiner: &'a Combiner,
    degree: usize,
    /// Factors each term reads, including through its shared product.
    term_factors: Vec<Vec<Affine>>,
}

impl<'a> RoundEngine<'a> {
    fn new(combiner: &'a Combiner, degree: usize) -> Self {
        let term_factors = combiner
            .terms
            .iter()
            .map(|t| {
                let mut v = t.factors.clone();
                if let Some(p) = t.product {
                    v.extend_from_slice(&combiner.products[p]);
                }
                v
            })
            .collect();
        RoundEngine { combiner, degree, term_factors }
    }

    /// Pair set of a term under the current masks, or `None` if it must run dense.
    fn term_pairs(&self, term: usize, factors: &[Factor]) -> Option<Vec<u32>> {
        let mut acc: Option<Vec<u32>> = None;
        for a in self.term_factors[term].iter().filter(|a| a.is_plain()) {
            if let Some(mask) = &factors[a.factor].support {
                let proj = project(mask);
                acc = Some(match acc {
                    None => proj,
                    Some(prev) => intersect(&prev, &proj),
                });
            }
        }
        acc
    }

    fn round(&self, factors: &[Factor], sparse: bool, counter: &mut OpCounter) -> Vec<Ext> {
        let d1 = self.degree + 1;
        let half = factors[0].values.len() / 2;
        let mut out = vec![Ext::ZERO; d1];
        let mut ops = 0u64;

        let mut dense_terms = Vec::new();
        let mut sparse_terms = Vec::new();
        for ti in 0..self.combiner.terms.len() {
            match sparse.then(|| self.term_pairs(ti, factors)).flatten() {
                Some(pairs) => sparse_terms.push((ti, pairs)),
                None => dense_terms.push(ti),
            }
        }

        // Line values of every factor over X = 0..=D, computed on demand.
        let nf = factors.len();
        let mut line = vec![Ext::ZERO; nf * d1];
        let mut prod_vals = vec![Ext::ZERO; self.combiner.products.len() * d1];

        let mut used = vec![false; nf];
        let mut used_products = vec![false; self.combiner.products.len()];
        for &ti in &dense_terms {
            for a in &self.term_factors[ti] {
                used[a.factor] = true;
            }
            if let Some(p) = self.combiner.terms[ti].product {
                used_products[p] = true;
            }
        }
        let dense_factors: Vec<usize> = (0..nf).filter(|&f| used[f]).collect();
        let dense_products: Vec<usize> = (0..used_products.len()).filter(|&p| used_products[p]).collect();

        let fill_line = |line: &mut [Ext], f: usize, j: usize| {
            let v0 = factors[f].values[2 * j];
            let v1 = factors[f].values[2 * j + 1];
            let diff = v1 - v0;
            let slot = &mut line[f * d1..(f + 1) * d1];
            slot[0] = v0;
            if d1 > 1 {
                slot[1] = v1;
            }
            for x in 2..d1 {
                slot[x] = slot[x - 1] + diff;
            }
        };

        let eval_term = |ti: usize, line: &[Ext], prod_vals: &[Ext], out: &mut [Ext], ops: &mut u64| {
            let term = &self.combiner.terms[ti];
            for x in 0..d1 {
                let mut acc = term.coeff;
                for a in &term.factors {
                    acc *= a.eval(line[a.factor * d1 + x], ops);
                    *ops += 1;
                }
                if let Some(p) = term.product {
                    acc *= prod_vals[p * d1 + x];
                    *ops += 1;
                }
                out[x] += acc;
            }
        };

        let eval_products = |ps: &[usize], line: &[Ext], prod_vals: &mut [Ext], ops: &mut u64| {
            for &p in ps {
                let prod = &self.combiner.products[p];
                for x in 0..d1 {
                    let mut acc = Ext::ONE;
                    for (k, a) in prod.iter().enumerate() {
                        let v = a.eval(line[a.factor * d1 + x], ops);
                        if k == 0 {
                            acc = v;
                        } else {
                            acc *= v;
                            *ops += 1;
                        }
                    }
                    prod_vals[p * d1 + x] = acc;
                }
            }
        };

        // Sparse terms whose product the dense pass already evaluates ride along
        // with it, touching only their own pairs.
        let (attached, sparse_terms): (Vec<_>, Vec<_>) = sparse_terms
            .into_iter()
            .partition(|(ti, _)| self.combiner.terms[*ti].product.is_some_and(|p| used_products[p]));

        if !dense_terms.is_empty() {
            let mut cursors = vec![0usize; attached.len()];
            for j in 0..half {
                for &f in &dense_factors {
                    fill_line(&mut line, f, j);
                }
                eval_products(&dense_products, &line, &mut prod_vals, &mut ops);
                for &ti in &dense_terms {
                    eval_term(ti, &line, &prod_vals, &mut out, &mut ops);
                }
                for ((ti, pairs), cur) in attached.iter().zip(cursors.iter_mut()) {
                    if pairs.get(*cur) != Some(&(j as u32)) {
                        continue;
                    }
                    *cur += 1;
                    for a in &self.term_factors[*ti] {
                        fill_line(&mut line, a.factor, j);
                    }
                    eval_term(*ti, &line, &prod_vals, &mut out, &mut ops);
                }
            }
        }

        // Remaining sparse terms sharing a product evaluate it once per pair of their union.
        type Group = (Option<usize>, Vec<(usize, Vec<u32>)>);
        let mut groups: Vec<Group> = Vec::new();
        for (ti, pairs) in sparse_terms {
            let product = self.combiner.terms[ti].product;
            match groups.iter_mut().find(|g| product.is_some() && g.0 == product) {
                Some(g) => g.1.push((ti, pairs)),
                None => groups.push((product, vec![(ti, pairs)])),
            }
        }
        for (product, members) in &groups {
            let product: Vec<usize> = product.iter().copied().collect();
            let mut union: Vec<u32> = members.iter().flat_map(|m| m.1.iter().copied()).collect();
            union.sort_unstable();
            union.dedup();
            let mut cursors = vec![0usize; members.len()];
            for &j in &union {
                let mut first = true;
                for ((ti, pairs), cur) in members.iter().zip(cursors.iter_mut()) {
                    if pairs.get(*cur) != Some(&j) {
                        continue;
                    }
                    *cur += 1;
                    for a in &self.term_factors[*ti] {
                        fill_line(&mut line, a.factor, j as usize);
                    }
                    if first {
                        eval_products(&product, &line, &mut prod_vals, &mut ops);
                        first = false;
                    }
                    eval_term(*ti, &line, &prod_vals, &mut out, &mut ops);
                }
            }
        }

        counter.round_mults += ops;
        out
    }
}

fn fold_factor(f: &mut Factor, r: Ext, sparse: bool, theta: f64, counter: &mut OpCounter) {
    let half = f.values.len() / 2;
    match (&f.support, sparse) {
        (Some(mask), true) => {
            let proj = project(mask);
            let mut next = vec![Ext::ZERO; half];
            for &j in &proj {
                let j = j as usize;
                let a = f.values[2 * j];
                next[j] = a + r * (f.values[2 * j + 1] - a);
            }
            counter.fold_mults += proj.len() as u64;
            f.values = next;
            f.support = if proj.len() as f64 > theta * half as f64 { None } else { Some(proj) };
        }
        _ => {
            crate::mle::fold_in_place(&mut f.values, r);
            counter.fold_mults += half as u64;
            f.support = None;
        }
    }
}

/// Runs the prover, absorbing each round message and drawing one challenge per round.
pub fn prove(
    mut claim: SumcheckClaim,
    t: &mut Transcript,
    opts: ProverOptions,
    counter: &mut OpCounter,
) -> ProverOutput {
    let n = claim.num_vars;
    let d = claim.degree_bound;
    t.begin_scope(b"sumcheck");
    absorb_header(t, n, d, claim.claimed_sum);

    if opts.sparse {
        for f in &mut claim.factors {
            if f.support.as_ref().is_some_and(|m| m.len() as f64 > opts.theta * f.values.len() as f64) {
                f.support = None;
            }
        }
    } else {
        for f in &mut claim.factors {
            f.support = None;
        }
    }

    let engine = RoundEngine::new(&claim.combiner, d);
    let mut rounds = Vec::with_capacity(n);
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let msg = engine.round(&claim.factors, opts.sparse, counter);
        t.absorb_ext(b"sumcheck-round", &msg);
        let r = t.challenge_ext_one(b"sumcheck-challenge");
        for f in &mut claim.factors {
            fold_factor(f, r, opts.sparse, opts.theta, counter);
        }
        rounds.push(msg);
        point.push(r);
    }
    t.end_scope();
    let final_evals = claim.factors.iter().map(|f| f.values[0]).collect();
    ProverOutput { proof: SumcheckProof { rounds }, point, final_evals }
}

/// Evaluates at `r` the degree-`D` polynomial given by its values at `0..=D`.
pub fn interpolate_at(evals: &[Ext], r: Ext) -> Ext {
    let n = evals.len();
    if n == 0 {
        return Ext::ZERO;
    }
    let xs: Vec<Ext> = (0..n).map(|i| r - Ext::from_u64(i as u64)).collect();
    let mut prefix = vec![Ext::ONE; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * xs[i];
    }
    let mut suffix = vec![Ext::ONE; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * xs[i];
    }
    // w_i = 1 / Π_{j != i} (i - j) = (-1)^{n-1-i} / (i! (n-1-i)!)
    let mut fact = vec![Fp::ONE; n];
    for i in 1..n {
        fact[i] = fact[i - 1] * Fp::new(i as u64);
    }
    let mut acc = Ext::ZERO;
    for i in 0..n {
        let denom = fact[i] * fact[n - 1 - i];
        let mut w = denom.inverse().expect("factorials are nonzero for small degree");
        if (n - 1 - i) % 2 == 1 {
            w = -w;
        }
        acc += evals[i] * (prefix[i] * suffix[i + 1]) * w;
    }
    acc
}

/// Replays a sumcheck transcript. Returns the challenge point and the reduced
/// claim the caller must match against the combiner at the factor openings.
pub fn verify(
    claimed_sum: Ext,
    num_vars: usize,
    degree_bound: usize,
    proof: &SumcheckProof,
    t: &mut Transcript,
) -> Result<VerifierOutcome> {
    t.begin_scope(b"sumcheck");
    absorb_header(t, num_vars, degree_bound, claimed_sum);
    if proof.rounds.len() != num_vars {
        return Err(Error::Sumcheck {
            round: proof.rounds.len().min(num_vars) + 1,
            reason: format!("expected {num_vars} rounds, proof has {}", proof.rounds.len()),
        });
    }
    let mut claim = claimed_sum;
    let mut point = Vec::with_capacity(num_vars);
    for (i, msg) in proof.rounds.iter().enumerate() {
        if msg.len() != degree_bound + 1 {
            return Err(Error::Sumcheck {
                round: i + 1,
                reason: format!("message has {} evaluations, expected {}", msg.len(), degree_bound + 1),
            });
        }
        let h0 = msg[0];
        let h1 = if degree_bound == 0 { msg[0] } else { msg[1] };
        if h0 + h1 != claim {
            return Err(Error::Sumcheck { round: i + 1, reason: "h(0) + h(1) differs from running claim".into() });
        }
        t.absorb_ext(b"sumcheck-round", msg);
        let r = t.challenge_ext_one(b"sumcheck-challenge");
        claim = interpolate_at(msg, r);
        point.push(r);
    }
    t.end_scope();
    Ok(VerifierOutcome { point, reduced_claim: claim })
}

/// Turns `constraint ≡ 0 on the cube` into `Σ_b eq(ρ, b)·constraint(b) = 0`.
///
/// The eq table is appended as the last factor. Returns the claim and `ρ`.
pub fn zero_check_claim(
    mut factors: Vec<Factor>,
    constraint: &Combiner,
    num_vars: usize,
    t: &mut Transcript,
) -> Result<(SumcheckClaim, Vec<Ext>)> {
    let rho = t.challenge_ext(b"zero-check-rho", num_vars);
    let eq_idx = factors.len();
    factors.push(Factor::dense(eq_table(&rho)));
    let combiner = with_kernel(constraint, eq_idx);
    let degree = combiner.degree();
    Ok((SumcheckClaim::new(num_vars, degree, Ext::ZERO, factors, combiner)?, rho))
}

/// Multiplies every term of `c` by the factor `kernel`.
pub fn with_kernel(c: &Combiner, kernel: usize) -> Combiner {
    let mut out = c.clone();
    for term in &mut out.terms {
        term.factors.push(Affine::id(kernel));
    }
    out
}

/// Random linear combination of claims over a shared domain.
pub fn rlc_batch(claims: Vec<SumcheckClaim>, coeffs: &[Ext]) -> Result<SumcheckClaim> {
    if claims.is_empty() || claims.len() != coeffs.len() {
        return Err(Error::Size(format!("{} claims with {} coefficients", claims.len(), coeffs.len())));
    }
    let n = claims[0].num_vars;
    if claims.iter().any(|c| c.num_vars != n) {
        return Err(Error::Size("batched claims have different domains".into()));
    }
    let mut factors = Vec::new();
    let mut combiner = Combiner::new();
    let mut sum = Ext::ZERO;
    let mut degree = 0;
    for (claim, &beta) in claims.into_iter().zip(coeffs) {
        let mut c = claim.combiner;
        c.scale(beta);
        combiner.absorb(&c, factors.len());
        factors.extend(claim.factors);
        sum += beta * claim.claimed_sum;
        degree = degree.max(claim.degree_bound);
    }
    SumcheckClaim::new(n, degree, sum, factors, combiner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_table(rng: &mut ChaCha8Rng, n: usize) -> Vec<Ext> {
        (0..1 << n).map(|_| Ext::random(rng)).collect()
    }

    fn run(claim: SumcheckClaim, opts: ProverOptions) -> (ProverOutput, OpCounter) {
        let mut t = Transcript::new(b"test");
        let mut c = OpCounter::default();
        (prove(claim, &mut t, opts, &mut c), c)
    }

    fn check(claim: &SumcheckClaim, out: &ProverOutput) -> Result<()> {
        let mut t = Transcript::new(b"test");
        let v = verify(claim.claimed_sum, claim.num_vars, claim.degree_bound, &out.proof, &mut t)?;
        assert_eq!(v.point, out.point);
        if claim.combiner.evaluate(&out.final_evals) != v.reduced_claim {
            return Err(Error::Sumcheck { round: claim.num_vars, reason: "final".into() });
        }
        Ok(())
    }

    #[test]
    fn all_ones_single_factor() {
        let mut c = Combiner::new();
        c.term(Ext::ONE, vec![Affine::id(0)]);
        let claim = SumcheckClaim::new(2, 1, Ext::from_u64(4), vec![Factor::dense(vec![Ext::ONE; 4])], c).unwrap();
        let (out, _) = run(claim.clone(), ProverOptions::dense());
        check(&claim, &out).unwrap();
    }

    #[test]
    fn product_of_indicators_and_zero_table() {
        let ind: Vec<Ext> = (0..8).map(|i| if i % 3 == 0 { Ext::ONE } else { Ext::ZERO }).collect();
        let mut c = Combiner::new();
        c.term(Ext::ONE, vec![Affine::id(0), Affine::id(1)]);
        let direct: Ext = ind.iter().map(|x| *x * *x).sum();
        let claim =
            SumcheckClaim::new(3, 2, direct, vec![Factor::dense(ind.clone()), Factor::dense(ind)], c.clone()).unwrap();
        assert_eq!(claim.cube_sum(), direct);
        let (out, _) = run(claim.clone(), ProverOptions::dense());
        check(&claim, &out).unwrap();

        let z = vec![Ext::ZERO; 8];
        let claim = SumcheckClaim::new(3, 2, Ext::ZERO, vec![Factor::dense(z.clone()), Factor::dense(z)], c).unwrap();
        let (out, _) = run(claim, ProverOptions::dense());
        assert!(out.proof.rounds.iter().flatten().all(|e| *e == Ext::ZERO));
    }

    #[test]
    fn completeness_random_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [1usize, 3, 6] {
            for deg in [1usize, 3, 7, 12] {
                let factors: Vec<Factor> = (0..deg).map(|_| Factor::dense(rand_table(&mut rng, n))).collect();
                let mut c = Combiner::new();
                let p = c.add_product((0..deg / 2).map(Affine::id).collect());
                c.term_with_product(
                    Ext::random(&mut rng),
                    (deg / 2..deg).map(|f| Affine::new(f, Ext::random(&mut rng), Ext::random(&mut rng))).collect(),
                    p,
                );
                c.term(Ext::random(&mut rng), vec![Affine::one_minus(0)]);
                let mut claim = SumcheckClaim::new(n, deg, Ext::ZERO, factors, c).unwrap();
                claim.claimed_sum = claim.cube_sum();
                let (out, _) = run(claim.clone(), ProverOptions::dense());
                check(&claim, &out).unwrap();
            }
        }
    }

    #[test]
    fn mutations_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 4;
        let factors = vec![Factor::dense(rand_table(&mut rng, n)), Factor::dense(rand_table(&mut rng, n))];
        let mut c = Combiner::new();
        c.term(Ext::ONE, vec![Affine::id(0), Affine::id(1)]);
        let mut claim = SumcheckClaim::new(n, 2, Ext::ZERO, factors, c).unwrap();
        claim.claimed_sum = claim.cube_sum();
        let (out, _) = run(claim.clone(), ProverOptions::dense());

        let mut off = claim.clone();
        off.claimed_sum += Ext::ONE;
        let mut t = Transcript::new(b"test");
        match verify(off.claimed_sum, n, 2, &out.proof, &mut t) {
            Err(Error::Sumcheck { round, .. }) => assert_eq!(round, 1),
            other => panic!("expected rejection, got {other:?}"),
        }

        for _ in 0..1000 {
            let mut bad = out.proof.clone();
            let r = rng.gen_range(0..n);
            let e = rng.gen_range(0..3);
            bad.rounds[r][e] += Ext::random_nonzero(&mut rng);
            let mut t = Transcript::new(b"test");
            let res = verify(claim.claimed_sum, n, 2, &bad, &mut t);
            let accepted = matches!(res, Ok(v) if claim.combiner.evaluate(&out.final_evals) == v.reduced_claim);
            assert!(!accepted);
        }
    }

    #[test]
    fn interpolation_matches_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let coeffs: Vec<Ext> = (0..6).map(|_| Ext::random(&mut rng)).collect();
        let eval = |x: Ext| coeffs.iter().rev().fold(Ext::ZERO, |acc, c| acc * x + *c);
        let pts: Vec<Ext> = (0..6).map(|i| eval(Ext::from_u64(i))).collect();
        let r = Ext::random(&mut rng);
        assert_eq!(interpolate_at(&pts, r), eval(r));
        assert_eq!(interpolate_at(&pts, Ext::from_u64(3)), pts[3]);
    }

    #[test]
    fn sparse_equals_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for seed in 0..100u64 {
            let n = 8;
            let sparse_table = |rng: &mut ChaCha8Rng| -> Vec<Ext> {
                (0..1 << n).map(|_| if rng.gen_ratio(1, 16) { Ext::random(rng) } else { Ext::ZERO }).collect()
            };
            let h1 = sparse_table(&mut rng);
            let h2 = sparse_table(&mut rng);
            let g = rand_table(&mut rng, n);
            let mut c = Combiner::new();
            c.term(Ext::random(&mut rng), vec![Affine::id(0), Affine::id(2), Affine::id(2)]);
            c.term(Ext::random(&mut rng), vec![Affine::id(0), Affine::id(1), Affine::id(2)]);
            c.term(Ext::random(&mut rng), vec![Affine::one_minus(1), Affine::id(2)]);
            let masked = vec![
                Factor::with_exact_support(h1.clone()),
                Factor::with_exact_support(h2.clone()),
                Factor::dense(g.clone()),
            ];
            let mut claim = SumcheckClaim::new(n, 3, Ext::ZERO, masked, c).unwrap();
            claim.claimed_sum = claim.cube_sum();
            let (dense, dc) = run(claim.clone(), ProverOptions::dense());
            let (sparse, sc) = run(claim.clone(), ProverOptions::default());
            assert_eq!(dense.proof, sparse.proof, "seed {seed}");
            assert_eq!(dense.final_evals, sparse.final_evals);
            assert!(sc.total() < dc.total());
            check(&claim, &sparse).unwrap();
        }
    }

    #[test]
    fn empty_mask_gives_zero_message() {
        let mut c = Combiner::new();
        c.term(Ext::ONE, vec![Affine::id(0), Affine::id(1)]);
        let f0 = Factor::masked(vec![Ext::ZERO; 16], vec![]);
        let f1 = Factor::dense(vec![Ext::from_u64(3); 16]);
        let claim = SumcheckClaim::new(4, 2, Ext::ZERO, vec![f0, f1], c).unwrap();
        let (out, counter) = run(claim, ProverOptions::default());
        assert!(out.proof.rounds[0].iter().all(|e| *e == Ext::ZERO));
        assert_eq!(counter.round_mults, 0);
    }

    #[test]
    fn zero_check_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let n = 4;
        // e(1 - e) on a Boolean table
        let e: Vec<Ext> = (0..16).map(|_| if rng.gen() { Ext::ONE } else { Ext::ZERO }).collect();
        let mut c = Combiner::new();
        c.term(Ext::ONE, vec![Affine::id(0), Affine::one_minus(0)]);
        let mut t = Transcript::new(b"test");
        let (claim, _) = zero_check_claim(vec![Factor::dense(e)], &c, n, &mut t).unwrap();
        assert_eq!(claim.cube_sum(), Ext::ZERO);

        // a constraint nonzero at a single point has nonzero eq-weighted sum for random ρ
        let mut rejected = 0;
        for seed in 0..1000u64 {
            let mut f = vec![Ext::ZERO; 16];
            f[(seed % 16) as usize] = Ext::from_u64(seed + 1);
            let mut c = Combiner::new();
            c.term(Ext::ONE, vec![Affine::id(0)]);
            let mut t = Transcript::new(b"zc");
            t.absorb_u64(b"seed", seed);
            let (claim, _) = zero_check_claim(vec![Factor::dense(f)], &c, n, &mut t).unwrap();
            if claim.cube_sum() != Ext::ZERO {
                rejected += 1;
            }
        }
        assert_eq!(rejected, 1000);
    }

    #[test]
    fn rlc_batch_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let mk = |rng: &mut ChaCha8Rng| {
            let mut c = Combiner::new();
            c.term(Ext::ONE, vec![Affine::id(0), Affine::id(1)]);
            let f = vec![Factor::dense(rand_table(rng, 3)), Factor::dense(rand_table(rng, 3))];
            let mut cl = SumcheckClaim::new(3, 2, Ext::ZERO, f, c).unwrap();
            cl.claimed_sum = cl.cube_sum();
            cl
        };
        let a = mk(&mut rng);
        let single = rlc_batch(vec![a.clone()], &[Ext::ONE]).unwrap();
        assert_eq!(single.claimed_sum, a.claimed_sum);
        assert_eq!(single.cube_sum(), a.cube_sum());

        let b = mk(&mut rng);
        let (b0, b1) = (Ext::random(&mut rng), Ext::random(&mut rng));
        let batch = rlc_batch(vec![a.clone(), b.clone()], &[b0, b1]).unwrap();
        assert_eq!(batch.claimed_sum, b0 * a.claimed_sum + b1 * b.claimed_sum);
        assert_eq!(batch.cube_sum(), batch.claimed_sum);

        let other = SumcheckClaim::new(2, 1, Ext::ZERO, vec![Factor::dense(rand_table(&mut rng, 2))], {
            let mut c = Combiner::new();
            c.term(Ext::ONE, vec![Affine::id(0)]);
            c
        })
        .unwrap();
        assert!(matches!(rlc_batch(vec![a, other], &[b0, b1]), Err(Error::Size(_))));
    }
}
