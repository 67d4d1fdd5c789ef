//! The protocol, written once for both roles.
//!
//! Prover-only tables live in `Option`s that are `None` on the verifier side;
//! closures handed to the role are only ever called by the prover.

use crate::error::{Result, Section};
use crate::field::{Ext, Fp};
use crate::mle::{eq_at_index, eq_table, fold_high_base, fold_low_base, mle_eval, mle_eval_base};
use crate::pcs;
use crate::sumcheck::{Affine, Combiner, Factor};
use crate::super_oracle::PackMode;
use crate::witness::{
    harmonic_field_table, inverse_or_zero, BuyerShard, OracleSet, ProviderShard, PublicParams, Shape, Side,
    SideWitness, LIMB_SLOTS, RANGE_BITS,
};

use super::roles::{CommitData, Expect, OpenKind, OpenRequest, Role};
use super::{Layer, OracleId};

pub(crate) struct Inputs<'a> {
    pub pp: &'a PublicParams,
    pub wit: Option<&'a OracleSet>,
    pub shards: Option<&'a [ProviderShard]>,
    pub buyer: Option<&'a BuyerShard>,
    pub published: &'a [Fp],
}

fn need<T>(v: Option<T>) -> T {
    v.expect("prover-side data")
}

fn ext(v: u64) -> Ext {
    Ext::from_u64(v)
}

fn eqv(r: &[Ext], x: &[Ext]) -> Ext {
    debug_assert_eq!(r.len(), x.len());
    r.iter().zip(x).map(|(a, b)| *a * *b + (Ext::ONE - *a) * (Ext::ONE - *b)).product()
}

fn lift(v: &[Fp]) -> Vec<Ext> {
    v.iter().map(|x| Ext::from(*x)).collect()
}

/// Base-field components of an extension table, as a two-member family.
#[allow(clippy::ptr_arg)]
fn parts(v: &Vec<Ext>) -> Vec<Vec<Fp>> {
    vec![v.iter().map(|x| x.c0).collect(), v.iter().map(|x| x.c1).collect()]
}

fn join(c: &[Ext]) -> Ext {
    c[0] + Ext::GEN * c[1]
}

/// `Σ_j eq(r, j)·v_j`.
fn lin(r: &[Ext], v: &[Ext]) -> Ext {
    v.iter().enumerate().map(|(j, x)| eq_at_index(r, j) * *x).sum()
}

fn padded(v: &[Ext]) -> Vec<Ext> {
    let mut out = v.to_vec();
    out.resize(v.len().next_power_of_two(), Ext::ZERO);
    out
}

fn cat(a: &[Ext], b: &[Ext]) -> Vec<Ext> {
    [a, b].concat()
}

fn evals(members: &[Vec<Fp>], x: &[Ext]) -> Vec<Ext> {
    members.iter().map(|m| mle_eval_base(m, x)).collect()
}

fn ids(idx: &[usize]) -> Vec<Affine> {
    idx.iter().map(|&i| Affine::id(i)).collect()
}

/// Value `v[i]` at every cell `(ℓ, i)` of an `[ℓ][i]` table.
fn per_point(v: &[Ext], tables: usize) -> Vec<Ext> {
    let mut out = Vec::with_capacity(v.len() * tables);
    for _ in 0..tables {
        out.extend_from_slice(v);
    }
    out
}

/// Value `v[ℓ]` at every cell `(ℓ, i)`.
fn per_table(v: &[Ext], points: usize) -> Vec<Ext> {
    v.iter().flat_map(|x| std::iter::repeat_n(*x, points)).collect()
}

/// `Π_k ((1 − r_k) + (2r_k − 1)·s_k)` at every `(ℓ, point)`, over the real bits.
fn sign_product(s: &SideWitness, sh: &Shape, points: usize, r: &[Ext]) -> Vec<Ext> {
    let slice = sh.tables * points;
    let mut out = vec![Ext::ONE; slice];
    for (k, rk) in r.iter().enumerate() {
        let (a, b) = (Ext::ONE - *rk, *rk + *rk - Ext::ONE);
        for (o, v) in out.iter_mut().zip(s.sign_member(k, slice)) {
            *o *= a + b.mul_base(*v);
        }
    }
    out
}

fn sign_affines(first: usize, r: &[Ext]) -> Vec<Affine> {
    r.iter().enumerate().map(|(k, rk)| Affine::new(first + k, Ext::ONE - *rk, *rk + *rk - Ext::ONE)).collect()
}

/// `A[ℓ][b] = Σ_{i in bucket b of table ℓ} eq(ω, i)`, buckets read off the sign bits.
fn bucket_weights(w: &OracleSet, eq_omega: &[Ext]) -> Vec<Ext> {
    let sh = &w.shape;
    let (n, nb) = (sh.n_train, sh.buckets());
    let mut a = vec![Ext::ZERO; sh.tables * nb];
    for l in 0..sh.tables {
        for (i, e) in eq_omega.iter().enumerate() {
            let b: usize =
                (0..sh.depth).map(|k| ((w.train.sign[(k * sh.tables + l) * n + i] == Fp::ONE) as usize) << k).sum();
            a[l * nb + b] += *e;
        }
    }
    a
}

/// Public projections as a `[k][ℓ][j]` tensor with zero rows for padded bits,
/// folded at the table and bit coordinates.
fn folded_projections(pp: &PublicParams, sh: &Shape, p_l: &[Ext], p_k: &[Ext]) -> Vec<Ext> {
    let h = &pp.hash;
    let (kp, d) = (sh.depth_padded(), sh.dim);
    let mut t = vec![Fp::ZERO; kp * sh.tables * d];
    for k in 0..sh.depth {
        for l in 0..sh.tables {
            for (j, v) in h.projection(l, k).iter().enumerate() {
                t[(k * sh.tables + l) * d + j] = Fp::from_i64(*v);
            }
        }
    }
    fold_high_base(&t, &cat(p_l, p_k))
}

/// `Σ_k 2^k x_k`, the multilinear extension of the identity table.
fn index_mle(x: &[Ext]) -> Ext {
    x.iter().enumerate().map(|(k, v)| v.mul_base(Fp::new(1 << k))).sum()
}

struct Opens(Vec<OpenRequest>);

impl Opens {
    fn single(&mut self, section: Section, id: OracleId, point: Vec<Ext>, value: Ext) {
        self.0.push(OpenRequest { id, section, kind: OpenKind::Single { point, value } });
    }

    fn members(&mut self, section: Section, id: OracleId, point: Vec<Ext>, values: &[Ext]) {
        self.0.push(OpenRequest { id, section, kind: OpenKind::Members { point, values: padded(values) } });
    }

    fn point(&mut self, section: Section, id: OracleId, x: Vec<Ext>, r: Vec<Ext>, value: Ext) {
        self.0.push(OpenRequest { id, section, kind: OpenKind::Point { x, r, value } });
    }
}

pub(crate) fn run<R: Role>(role: &mut R, inp: &Inputs) -> Result<()> {
    let pp = inp.pp;
    let sh = pp.shape();
    let wit = inp.wit;
    let mode = pp.family_mode();
    let single = |vars: usize| pcs::setup(vars, &pp.pcs).map(Expect::Single);
    let family = |mode: PackMode, members: usize, sub_vars: usize| Expect::Family { mode, members, sub_vars };
    let (n, c_real, cp, kp, k_real) = (sh.n_train, sh.classes, sh.classes_padded(), sh.depth_padded(), sh.depth);
    let (log_n, log_l, log_d, ln_vars, lb_vars) = (sh.log_n(), sh.log_l(), sh.log_d(), sh.ln_vars(), sh.lb_vars());
    let lambda = Fp::new(pp.harmonic_scale);
    let lam_e = Ext::from(lambda);
    let mut opens = Opens(Vec::new());

    // Witness commitments.
    role.commit(OracleId::XTr, single(log_n + log_d)?, || Ok(CommitData::Single(need(wit).x_tr.clone())))?;
    role.commit(OracleId::YInd, family(PackMode::Packed, cp, log_n), || {
        Ok(CommitData::Family(need(wit).y_ind.clone()))
    })?;
    for side in [Side::Train, Side::Test] {
        let hv = sh.hash_vars(side);
        let slice = sh.tables * sh.points(side);
        role.commit(OracleId::Dp(side), single(hv)?, || Ok(CommitData::Single(need(wit).side(side).dp.clone())))?;
        role.commit(OracleId::Sign(side), family(mode, kp, log_l + sh.log_points(side)), || {
            Ok(CommitData::Family(need(wit).side(side).sign.chunks_exact(slice).map(<[Fp]>::to_vec).collect()))
        })?;
        role.commit(OracleId::Abs(side), single(hv)?, || Ok(CommitData::Single(need(wit).side(side).abs.clone())))?;
        role.commit(OracleId::Limbs(side), family(PackMode::Packed, LIMB_SLOTS, hv), || {
            Ok(CommitData::Family(need(wit).side(side).limb_members()))
        })?;
    }
    role.commit(OracleId::Histogram, family(mode, 2 * c_real + 1, lb_vars), || {
        Ok(CommitData::Family(need(wit).histogram_members()))
    })?;
    role.commit(OracleId::Lookup, family(mode, 2 * c_real, ln_vars), || {
        Ok(CommitData::Family(need(wit).lookup_members()))
    })?;
    type Getter = fn(&OracleSet) -> &Vec<Fp>;
    let ln_singles: [(OracleId, Getter); 8] = [
        (OracleId::Mhat, |w| &w.mhat),
        (OracleId::Harm, |w| &w.harm),
        (OracleId::Edge, |w| &w.edge),
        (OracleId::D, |w| &w.d),
        (OracleId::DInv, |w| &w.d_inv),
        (OracleId::W, |w| &w.w),
        (OracleId::WtNum, |w| &w.wt_num),
        (OracleId::TMatch, |w| &w.t_match),
    ];
    for (id, get) in ln_singles {
        role.commit(id, single(ln_vars)?, || Ok(CommitData::Single(get(need(wit)).clone())))?;
    }
    role.commit(OracleId::SvSum, single(log_n)?, || Ok(CommitData::Single(need(wit).svsum.clone())))?;
    role.commit(OracleId::SvAvg, single(log_n)?, || Ok(CommitData::Single(need(wit).svavg.clone())))?;
    role.commit(OracleId::MRange, single(RANGE_BITS)?, || Ok(CommitData::Single(need(wit).m_range.clone())))?;
    role.commit(OracleId::MHarm, single(log_n)?, || Ok(CommitData::Single(need(wit).m_harm.clone())))?;
    let s_len = sh.slice_len();
    for p in 0..sh.providers {
        role.commit(OracleId::ScoreSlice(p), Expect::Single(pp.score_slice_params()?), || {
            Ok(CommitData::Single(need(wit).svavg[p * s_len..(p + 1) * s_len].to_vec()))
        })?;
    }

    let scores = role.send_fp(Section::PublishedScores, b"published-scores", n, || need(wit).svavg.clone())?;
    role.check(scores == inp.published, Section::PublishedScores, "published scores differ from the certified ones")?;

    // Auxiliary tables that depend on challenges.
    let omega = role.challenge(b"lookup-omega", log_n);
    let alpha_r = role.challenge_one(b"range-alpha");
    let alpha_h = role.challenge_one(b"harmonic-alpha");
    let beta_h = role.challenge_one(b"harmonic-beta");
    let harm_table = harmonic_field_table(n, pp.harmonic_scale)?;

    let a_tab = wit.map(|w| bucket_weights(w, &eq_table(&omega)));
    let q_range = |side: Side| {
        wit.map(|w| {
            let d: Vec<Ext> = w.side(side).limbs.iter().map(|v| alpha_r - Ext::from(*v)).collect();
            inverse_or_zero(&d)
        })
    };
    let q_tr = q_range(Side::Train);
    let q_te = q_range(Side::Test);
    let h_range = wit.map(|w| {
        let d: Vec<Ext> = (0..1u64 << RANGE_BITS).map(|j| alpha_r - ext(j)).collect();
        inverse_or_zero(&d).into_iter().zip(&w.m_range).map(|(i, m)| i.mul_base(*m)).collect::<Vec<_>>()
    });
    let q_harm = wit.map(|w| {
        let d: Vec<Ext> =
            w.mhat.iter().zip(&w.harm).map(|(m, h)| alpha_h - Ext::from(*m) - beta_h.mul_base(*h)).collect();
        inverse_or_zero(&d)
    });
    let h_table: Vec<Ext> =
        harm_table.iter().enumerate().map(|(j, h)| ext(j as u64 + 1) + beta_h.mul_base(*h)).collect();
    let h_harm = wit.map(|w| {
        let d: Vec<Ext> = h_table.iter().map(|t| alpha_h - *t).collect();
        inverse_or_zero(&d).into_iter().zip(&w.m_harm).map(|(i, m)| i.mul_base(*m)).collect::<Vec<_>>()
    });

    role.commit(OracleId::BucketWeights, family(PackMode::Packed, 2, lb_vars), || {
        Ok(CommitData::Family(parts(need(a_tab.as_ref()))))
    })?;
    for (side, q) in [(Side::Train, &q_tr), (Side::Test, &q_te)] {
        role.commit(OracleId::QRange(side), family(PackMode::Packed, 2, 2 + sh.hash_vars(side)), || {
            Ok(CommitData::Family(parts(need(q.as_ref()))))
        })?;
    }
    role.commit(OracleId::HRange, family(PackMode::Packed, 2, RANGE_BITS), || {
        Ok(CommitData::Family(parts(need(h_range.as_ref()))))
    })?;
    role.commit(OracleId::QHarm, family(PackMode::Packed, 2, ln_vars), || {
        Ok(CommitData::Family(parts(need(q_harm.as_ref()))))
    })?;
    role.commit(OracleId::HHarm, family(PackMode::Packed, 2, log_n), || {
        Ok(CommitData::Family(parts(need(h_harm.as_ref()))))
    })?;

    // Hash binding.
    let sec = Section::HashBinding;
    let mut range_total = Ext::ZERO;
    let mut tau_x = Vec::new();
    let mut x_train_value = Ext::ZERO;
    for side in [Side::Train, Side::Test] {
        let hv = sh.hash_vars(side);
        let log_pts = sh.log_points(side);
        let lp = log_l + log_pts;
        let size = 1usize << hv;
        let sw = wit.map(|w| w.side(side));
        role.transcript().absorb(b"hash-side", side.tag());
        let mu = role.challenge(b"hash-mu", 2);
        let rho = role.challenge(b"zero-check-rho", hv);

        let (dp, s, ab, l0, l1, l2, e) = (0, 1, 2, 3, 4, 5, 6);
        let two = ext(2);
        let mut c = Combiner::new();
        c.term(two, ids(&[e, dp]));
        c.term(Ext::ONE, ids(&[e]));
        c.term(-two, ids(&[e, s, ab]));
        c.term(Ext::ONE, ids(&[e, ab]));
        c.term(mu[0], ids(&[e, s]));
        c.term(-mu[0], ids(&[e, s, s]));
        c.term(mu[1], ids(&[e, ab]));
        c.term(-mu[1], ids(&[e]));
        c.term(-mu[1], ids(&[e, l0]));
        c.term(-mu[1] * ext(1 << 16), ids(&[e, l1]));
        c.term(-mu[1] * ext(1 << 32), ids(&[e, l2]));
        let (pt, red) = role.sumcheck(sec, Layer::Hash, "hash constraint", Ext::ZERO, hv, &c, || {
            let w = need(sw);
            let limb = |q: usize| Factor::from_base(&w.limbs[q * size..(q + 1) * size]);
            vec![
                Factor::from_base(&w.dp),
                Factor::from_base(&w.sign),
                Factor::from_base(&w.abs),
                limb(0),
                limb(1),
                limb(2),
                Factor::dense(eq_table(&rho)),
            ]
        })?;
        let vals = role.send_ext(sec, b"hash-evals", 3, || {
            let w = need(sw);
            vec![mle_eval_base(&w.dp, &pt), mle_eval_base(&w.sign, &pt), mle_eval_base(&w.abs, &pt)]
        })?;
        let limb_vals = role.send_ext(sec, b"limb-evals", LIMB_SLOTS, || evals(&need(sw).limb_members(), &pt))?;
        let f = [vals[0], vals[1], vals[2], limb_vals[0], limb_vals[1], limb_vals[2], eqv(&rho, &pt)];
        role.check(c.evaluate(&f) == red, sec, "hash constraint endpoint")?;
        opens.single(Section::Openings, OracleId::Dp(side), pt.clone(), vals[0]);
        opens.point(Section::PackedOpenings, OracleId::Sign(side), pt[..lp].to_vec(), pt[lp..].to_vec(), vals[1]);
        opens.single(Section::Openings, OracleId::Abs(side), pt.clone(), vals[2]);
        opens.members(Section::Openings, OracleId::Limbs(side), pt.clone(), &limb_vals);

        // dp = ⟨r, x⟩ at the hash point.
        let (p_pt, rest) = pt.split_at(log_pts);
        let (p_l, p_k) = rest.split_at(log_l);
        let r_fold = folded_projections(pp, &sh, p_l, p_k);
        let x_table = || -> &[Fp] {
            match side {
                Side::Train => &need(wit).x_tr,
                Side::Test => &need(wit).x_te,
            }
        };
        let mut c = Combiner::new();
        c.term(Ext::ONE, ids(&[0, 1]));
        let (jstar, red) = role.sumcheck(sec, Layer::Hash, "projection", vals[0], log_d, &c, || {
            vec![Factor::dense(r_fold.clone()), Factor::dense(fold_high_base(x_table(), p_pt))]
        })?;
        let xpt = cat(&jstar, p_pt);
        let xv = role.send_ext(sec, b"feature-eval", 1, || vec![mle_eval_base(x_table(), &xpt)])?[0];
        role.check(mle_eval(&r_fold, &jstar) * xv == red, sec, "projection endpoint")?;
        match side {
            Side::Train => {
                opens.single(Section::Openings, OracleId::XTr, xpt.clone(), xv);
                tau_x = xpt;
                x_train_value = xv;
            }
            Side::Test => opens.single(Section::Openings, OracleId::BuyerFeatures, xpt, xv),
        }

        // Limbs lie in [0, 2^16): Σ 1/(α − limb) matches the table side.
        let q = match side {
            Side::Train => &q_tr,
            Side::Test => &q_te,
        };
        let qn = 2 + hv;
        let s_r = role.send_ext(sec, b"range-sum", 1, || vec![need(q.as_ref()).iter().copied().sum()])?[0];
        let lam = role.challenge_one(b"range-lambda");
        let rho_r = role.challenge(b"range-rho", qn);
        let mut c = Combiner::new();
        c.term(Ext::ONE, ids(&[0]));
        c.term(lam * alpha_r, ids(&[2, 0]));
        c.term(-lam, ids(&[2, 0, 1]));
        c.term(-lam, ids(&[2]));
        let (pt, red) = role.sumcheck(sec, Layer::Hash, "range", s_r, qn, &c, || {
            vec![
                Factor::dense(need(q.as_ref()).clone()),
                Factor::from_base(&need(sw).limbs),
                Factor::dense(eq_table(&rho_r)),
            ]
        })?;
        let qc = role.send_ext(sec, b"range-evals", 2, || evals(&parts(need(q.as_ref())), &pt))?;
        let lv = role.send_ext(sec, b"range-limb-eval", 1, || vec![mle_eval_base(&need(sw).limbs, &pt)])?[0];
        role.check(c.evaluate(&[join(&qc), lv, eqv(&rho_r, &pt)]) == red, sec, "range endpoint")?;
        opens.members(Section::Openings, OracleId::QRange(side), pt.clone(), &qc);
        opens.point(Section::Openings, OracleId::Limbs(side), pt[..hv].to_vec(), pt[hv..].to_vec(), lv);
        range_total += s_r;
    }

    let lam = role.challenge_one(b"range-table-lambda");
    let rho_t = role.challenge(b"range-table-rho", RANGE_BITS);
    let mut c = Combiner::new();
    c.term(Ext::ONE, ids(&[0]));
    c.term(lam * alpha_r, ids(&[3, 0]));
    c.term(-lam, ids(&[3, 0, 1]));
    c.term(-lam, ids(&[3, 2]));
    let (pt, red) = role.sumcheck(sec, Layer::Hash, "range table", range_total, RANGE_BITS, &c, || {
        vec![
            Factor::dense(need(h_range.as_ref()).clone()),
            Factor::dense((0..1u64 << RANGE_BITS).map(ext).collect()),
            Factor::from_base(&need(wit).m_range),
            Factor::dense(eq_table(&rho_t)),
        ]
    })?;
    let hc = role.send_ext(sec, b"range-table-evals", 2, || evals(&parts(need(h_range.as_ref())), &pt))?;
    let mv = role.send_ext(sec, b"range-table-mult", 1, || vec![mle_eval_base(&need(wit).m_range, &pt)])?[0];
    role.check(c.evaluate(&[join(&hc), index_mle(&pt), mv, eqv(&rho_t, &pt)]) == red, sec, "range table endpoint")?;
    opens.members(Section::Openings, OracleId::HRange, pt.clone(), &hc);
    opens.single(Section::Openings, OracleId::MRange, pt, mv);

    // Histogram and lookup layers.
    let sec = Section::Layers;
    let rc = role.challenge(b"class-fold", sh.log_c());
    let sigma = role.challenge(b"bucket-sigma", sh.depth);
    let rho_ls = role.challenge(b"table-sigma", log_l);
    let eq_rc = eq_table(&rc);
    let eq_omega = wit.map(|_| eq_table(&omega));
    let ew_tab = wit.map(|_| {
        let mut t = Vec::with_capacity(1 << ln_vars);
        for e in eq_table(&rho_ls) {
            t.extend(need(eq_omega.as_ref()).iter().map(|o| e * *o));
        }
        t
    });
    let lookup_sums = role.send_ext(sec, b"lookup-sums", 3, || {
        let w = need(wit);
        let p_sigma = sign_product(&w.train, &sh, n, &sigma);
        let base: Vec<Ext> = need(ew_tab.as_ref()).iter().zip(&p_sigma).map(|(a, b)| *a * *b).collect();
        let fold = |m: &[Vec<Fp>]| -> Ext {
            (0..c_real).map(|c| eq_rc[c] * base.iter().zip(&m[c]).map(|(a, v)| a.mul_base(*v)).sum::<Ext>()).sum()
        };
        vec![base.iter().zip(&w.mhat).map(|(a, v)| a.mul_base(*v)).sum(), fold(&w.mchat), fold(&w.tchat)]
    })?;
    let gamma = role.challenge(b"bucket-gamma", 3);

    let mut c = Combiner::new();
    let ga = c.add_product(ids(&[0, 1]));
    for (g, f) in gamma.iter().zip(2..5) {
        c.term_with_product(*g, ids(&[f]), ga);
    }
    let claim = gamma[0] * lookup_sums[0] + gamma[1] * lookup_sums[1] + gamma[2] * lookup_sums[2];
    let class_fold = |m: &[Vec<Fp>]| -> Vec<Ext> {
        let mut out = vec![Ext::ZERO; m[0].len()];
        for c in 0..c_real {
            for (o, v) in out.iter_mut().zip(&m[c]) {
                *o += eq_rc[c].mul_base(*v);
            }
        }
        out
    };
    let (p_lb, red) = role.sumcheck(sec, Layer::Lookups, "bucket batch", claim, lb_vars, &c, || {
        let w = need(wit);
        let mut g = Vec::with_capacity(1 << lb_vars);
        let eq_s = eq_table(&sigma);
        for e in eq_table(&rho_ls) {
            g.extend(eq_s.iter().map(|s| e * *s));
        }
        vec![
            Factor::dense(g),
            Factor::with_exact_support(need(a_tab.as_ref()).clone()),
            Factor::from_base(&w.cnt),
            Factor::with_exact_support(class_fold(&w.cnt_tr)),
            Factor::dense(class_fold(&w.cnt_te)),
        ]
    })?;
    let hist =
        role.send_ext(sec, b"histogram-evals", 2 * c_real + 1, || evals(&need(wit).histogram_members(), &p_lb))?;
    let ac = role.send_ext(sec, b"bucket-weight-evals", 2, || evals(&parts(need(a_tab.as_ref())), &p_lb))?;
    let (rb, rl) = p_lb.split_at(sh.depth);
    let ctr_f = lin(&rc, &hist[..c_real]);
    let cte_f = lin(&rc, &hist[c_real..2 * c_real]);
    let cnt_v = hist[2 * c_real];
    let a_v = join(&ac);
    let g_v = eqv(&sigma, rb) * eqv(&rho_ls, rl);
    role.check(c.evaluate(&[g_v, a_v, cnt_v, ctr_f, cte_f]) == red, sec, "bucket batch endpoint")?;
    opens.members(Section::PackedOpenings, OracleId::Histogram, p_lb.clone(), &hist);
    opens.members(Section::Openings, OracleId::BucketWeights, p_lb.clone(), &ac);

    // Per-point batch: histogram binding, lookups and weight constraints.
    let s_qh = role.send_ext(sec, b"harmonic-sum", 1, || vec![need(q_harm.as_ref()).iter().copied().sum()])?[0];
    let rho_z = role.challenge(b"point-rho", ln_vars);
    let mu = role.challenge(b"point-mu", 9);
    let gamma = role.challenge(b"point-gamma", 7);

    let (k1, k1w, ew, e) = (0, 1, 2, 3);
    let s0 = 4;
    let base = s0 + k_real;
    let (mh, hm, ed, dd, di, ww, wn, tm, qh) =
        (base, base + 1, base + 2, base + 3, base + 4, base + 5, base + 6, base + 7, base + 8);
    let mc = |c: usize| base + 9 + c;
    let tc = |c: usize| base + 9 + c_real + c;
    let yc = |c: usize| base + 9 + 2 * c_real + c;
    let one_minus_e = Affine::one_minus(ed);
    let id = Affine::id;

    let mut c = Combiner::new();
    let p_rho = c.add_product(sign_affines(s0, rb));
    let p_sig = c.add_product(sign_affines(s0, &sigma));
    c.term_with_product(gamma[0], ids(&[k1]), p_rho);
    for (cl, e) in eq_rc.iter().enumerate().take(c_real) {
        c.term_with_product(gamma[1] * *e, ids(&[k1, yc(cl)]), p_rho);
    }
    c.term_with_product(gamma[2], ids(&[k1w]), p_rho);
    c.term_with_product(gamma[3], ids(&[ew, mh]), p_sig);
    for (cl, e) in eq_rc.iter().enumerate().take(c_real) {
        c.term_with_product(gamma[4] * *e, ids(&[ew, mc(cl)]), p_sig);
        c.term_with_product(gamma[5] * *e, ids(&[ew, tc(cl)]), p_sig);
    }
    c.term(gamma[6], ids(&[qh]));
    // Edge points: W = Λ·t_match.
    c.term(mu[0], ids(&[e, ed, ww]));
    c.term(-mu[0] * lam_e, ids(&[e, ed, tm]));
    // Interior points: W·M(M−1) = wt_num.
    c.term(mu[1], vec![id(e), one_minus_e, id(ww), id(dd)]);
    c.term(-mu[1], vec![id(e), one_minus_e, id(wn)]);
    c.term(mu[2], vec![id(e), id(ed), one_minus_e]);
    c.term(mu[3], vec![id(e), one_minus_e, id(dd), id(di)]);
    c.term(-mu[3], vec![id(e), one_minus_e]);
    c.term(mu[4], ids(&[e, ed, dd]));
    c.term(mu[5], ids(&[e, dd]));
    c.term(-mu[5], ids(&[e, mh, mh]));
    c.term(mu[5], ids(&[e, mh]));
    c.term(mu[6], ids(&[e, tm]));
    for cl in 0..c_real {
        c.term(-mu[6], ids(&[e, yc(cl), tc(cl)]));
    }
    c.term(mu[7], ids(&[e, wn]));
    c.term(-mu[7], ids(&[e, tm, mh, hm]));
    c.term(mu[7] * lam_e, ids(&[e, tm]));
    for cl in 0..c_real {
        c.term(mu[7], ids(&[e, hm, tc(cl), mc(cl)]));
        c.term(-mu[7] * lam_e, ids(&[e, tc(cl), mc(cl)]));
    }
    c.term(mu[8] * alpha_h, ids(&[e, qh]));
    c.term(-mu[8], ids(&[e, qh, mh]));
    c.term(-mu[8] * beta_h, ids(&[e, qh, hm]));
    c.term(-mu[8], ids(&[e]));

    let claim = gamma[0] * cnt_v
        + gamma[1] * ctr_f
        + gamma[2] * a_v
        + gamma[3] * lookup_sums[0]
        + gamma[4] * lookup_sums[1]
        + gamma[5] * lookup_sums[2]
        + gamma[6] * s_qh;
    let (p_ln, red) = role.sumcheck(sec, Layer::Lookups, "point batch", claim, ln_vars, &c, || {
        let w = need(wit);
        let eq_rl = eq_table(rl);
        let eq_o = need(eq_omega.as_ref());
        let k1_tab = per_table(&eq_rl, n);
        let k1w_tab: Vec<Ext> = k1_tab.iter().zip(per_point(eq_o, sh.tables)).map(|(a, b)| *a * b).collect();
        let slice = sh.tables * n;
        let mut f = vec![
            Factor::dense(k1_tab),
            Factor::dense(k1w_tab),
            Factor::dense(need(ew_tab.as_ref()).clone()),
            Factor::dense(eq_table(&rho_z)),
        ];
        for k in 0..k_real {
            f.push(Factor::from_base(w.train.sign_member(k, slice)));
        }
        for t in [&w.mhat, &w.harm, &w.edge, &w.d, &w.d_inv, &w.w, &w.wt_num, &w.t_match] {
            f.push(Factor::from_base(t));
        }
        f.push(Factor::dense(need(q_harm.as_ref()).clone()));
        for cl in 0..c_real {
            f.push(Factor::with_exact_support(lift(&w.mchat[cl])));
        }
        for cl in 0..c_real {
            f.push(Factor::dense(lift(&w.tchat[cl])));
        }
        for cl in 0..c_real {
            f.push(Factor::with_exact_support(per_point(&lift(&w.y_ind[cl]), sh.tables)));
        }
        f
    })?;
    let (p_i, p_l) = p_ln.split_at(log_n);
    let sign_tr = role.send_ext(sec, b"sign-evals", kp, || {
        let w = need(wit);
        let slice = sh.tables * n;
        (0..kp).map(|k| mle_eval_base(w.train.sign_member(k, slice), &p_ln)).collect()
    })?;
    let look = role.send_ext(sec, b"lookup-evals", 2 * c_real, || evals(&need(wit).lookup_members(), &p_ln))?;
    let y_vals = role.send_ext(sec, b"label-evals", cp, || evals(&need(wit).y_ind, p_i))?;
    let singles = role.send_ext(sec, b"weight-evals", 8, || {
        let w = need(wit);
        ln_singles.iter().map(|(_, get)| mle_eval_base(get(w), &p_ln)).collect()
    })?;
    let qhc = role.send_ext(sec, b"harmonic-evals", 2, || evals(&parts(need(q_harm.as_ref())), &p_ln))?;

    let k1_v = eqv(rl, p_l);
    let ew_v = eqv(&rho_ls, p_l) * eqv(&omega, p_i);
    let mut f = vec![k1_v, k1_v * eqv(&omega, p_i), ew_v, eqv(&rho_z, &p_ln)];
    f.extend_from_slice(&sign_tr[..k_real]);
    f.extend_from_slice(&singles);
    f.push(join(&qhc));
    f.extend_from_slice(&look[..c_real]);
    f.extend_from_slice(&look[c_real..]);
    f.extend_from_slice(&y_vals[..c_real]);
    role.check(c.evaluate(&f) == red, sec, "point batch endpoint")?;
    opens.members(Section::PackedOpenings, OracleId::Sign(Side::Train), p_ln.clone(), &sign_tr);
    opens.members(Section::PackedOpenings, OracleId::Lookup, p_ln.clone(), &look);
    opens.members(Section::Openings, OracleId::YInd, p_i.to_vec(), &y_vals);
    for ((id, _), v) in ln_singles.iter().zip(&singles) {
        opens.single(Section::Openings, *id, p_ln.clone(), *v);
    }
    opens.members(Section::Openings, OracleId::QHarm, p_ln.clone(), &qhc);

    // Harmonic table side of the (M, Λ·H_M) lookup.
    let lam = role.challenge_one(b"harmonic-lambda");
    let rho_h = role.challenge(b"harmonic-rho", log_n);
    let mut c = Combiner::new();
    c.term(Ext::ONE, ids(&[0]));
    c.term(lam * alpha_h, ids(&[3, 0]));
    c.term(-lam, ids(&[3, 0, 1]));
    c.term(-lam, ids(&[3, 2]));
    let (pt, red) = role.sumcheck(sec, Layer::Weights, "harmonic table", s_qh, log_n, &c, || {
        vec![
            Factor::dense(need(h_harm.as_ref()).clone()),
            Factor::dense(h_table.clone()),
            Factor::from_base(&need(wit).m_harm),
            Factor::dense(eq_table(&rho_h)),
        ]
    })?;
    let hhc = role.send_ext(sec, b"harmonic-table-evals", 2, || evals(&parts(need(h_harm.as_ref())), &pt))?;
    let mhv = role.send_ext(sec, b"harmonic-table-mult", 1, || vec![mle_eval_base(&need(wit).m_harm, &pt)])?[0];
    let th = Ext::ONE + index_mle(&pt) + beta_h * mle_eval_base(&harm_table, &pt);
    role.check(c.evaluate(&[join(&hhc), th, mhv, eqv(&rho_h, &pt)]) == red, sec, "harmonic table endpoint")?;
    opens.members(Section::Openings, OracleId::HHarm, pt.clone(), &hhc);
    opens.single(Section::Openings, OracleId::MHarm, pt, mhv);

    // V3: validation histogram from the buyer's committed labels.
    let log_t = sh.log_t();
    let t_count = sh.n_test;
    let mut c = Combiner::new();
    let p_rho = c.add_product(sign_affines(1, rb));
    let y0 = 1 + k_real;
    for (cl, e) in eq_rc.iter().enumerate().take(c_real) {
        c.term_with_product(*e, ids(&[0, y0 + cl]), p_rho);
    }
    let (p_v3, red) = role.sumcheck(sec, Layer::V3, "validation histogram", cte_f, log_l + log_t, &c, || {
        let w = need(wit);
        let slice = sh.tables * t_count;
        let mut f = vec![Factor::dense(per_table(&eq_table(rl), t_count))];
        for k in 0..k_real {
            f.push(Factor::from_base(w.test.sign_member(k, slice)));
        }
        for cl in 0..c_real {
            f.push(Factor::dense(per_point(&lift(&need(inp.buyer).label_members[cl]), sh.tables)));
        }
        f
    })?;
    let (p_t, p_tl) = p_v3.split_at(log_t);
    let sign_te = role.send_ext(sec, b"validation-sign-evals", kp, || {
        let w = need(wit);
        let slice = sh.tables * t_count;
        (0..kp).map(|k| mle_eval_base(w.test.sign_member(k, slice), &p_v3)).collect()
    })?;
    let yt = role.send_ext(sec, b"validation-label-evals", cp, || evals(&need(inp.buyer).label_members, p_t))?;
    let mut f = vec![eqv(rl, p_tl)];
    f.extend_from_slice(&sign_te[..k_real]);
    f.extend_from_slice(&yt[..c_real]);
    role.check(c.evaluate(&f) == red, sec, "validation histogram endpoint")?;
    opens.members(Section::PackedOpenings, OracleId::Sign(Side::Test), p_v3.clone(), &sign_te);
    opens.members(Section::Openings, OracleId::BuyerLabels, p_t.to_vec(), &yt);

    // Aggregation: svsum[i] = Σ_ℓ W[ℓ][i].
    let rho_a = role.challenge(b"aggregate-rho", log_n);
    let sv = role.send_ext(sec, b"aggregate-sum", 1, || vec![mle_eval_base(&need(wit).svsum, &rho_a)])?[0];
    let mut c = Combiner::new();
    c.term(Ext::ONE, ids(&[0]));
    let (pl, red) = role.sumcheck(sec, Layer::Weights, "aggregation", sv, log_l, &c, || {
        vec![Factor::dense(fold_low_base(&need(wit).w, &rho_a))]
    })?;
    let wpt = cat(&rho_a, &pl);
    let wv = role.send_ext(sec, b"aggregate-eval", 1, || vec![mle_eval_base(&need(wit).w, &wpt)])?[0];
    role.check(wv == red, sec, "aggregation endpoint")?;
    opens.single(Section::Openings, OracleId::SvSum, rho_a, sv);
    opens.single(Section::Openings, OracleId::W, wpt, wv);

    // Normalization: Λ·L·N_test·svavg = svsum.
    let rho_n = role.challenge(b"zero-check-rho", log_n);
    let norm = Ext::from(lambda * Fp::new(sh.tables as u64) * Fp::new(sh.n_test as u64));
    let mut c = Combiner::new();
    c.term(norm, ids(&[2, 0]));
    c.term(-Ext::ONE, ids(&[2, 1]));
    let (tau, red) = role.sumcheck(sec, Layer::Weights, "normalization", Ext::ZERO, log_n, &c, || {
        let w = need(wit);
        vec![Factor::from_base(&w.svavg), Factor::from_base(&w.svsum), Factor::dense(eq_table(&rho_n))]
    })?;
    let sc = role.send_ext(sec, b"score-evals", 2, || {
        let w = need(wit);
        vec![mle_eval_base(&w.svavg, &tau), mle_eval_base(&w.svsum, &tau)]
    })?;
    role.check(c.evaluate(&[sc[0], sc[1], eqv(&rho_n, &tau)]) == red, sec, "normalization endpoint")?;
    role.check(sc[0] == mle_eval_base(inp.published, &tau), sec, "certified scores differ from the published ones")?;
    opens.single(Section::Openings, OracleId::SvAvg, tau.clone(), sc[0]);
    opens.single(Section::Openings, OracleId::SvSum, tau.clone(), sc[1]);

    // Reconstruction against per-provider commitments.
    let sec = Section::Reconstruction;
    let m = sh.providers;
    let log_s = sh.log_slice();
    let (tl, th) = tau.split_at(log_s);
    let phi = role.send_ext(sec, b"slice-evals", m, || {
        let w = need(wit);
        (0..m).map(|p| mle_eval_base(&w.svavg[p * s_len..(p + 1) * s_len], tl)).collect()
    })?;
    role.check(lin(th, &phi) == sc[0], sec, "score slices do not recombine")?;
    for (p, v) in phi.iter().enumerate() {
        opens.single(sec, OracleId::ScoreSlice(p), tl.to_vec(), *v);
    }

    let (j_star, ipt) = tau_x.split_at(log_d);
    let (il, ih) = ipt.split_at(log_s);
    let fpt = cat(j_star, il);
    let fv = role.send_ext(sec, b"provider-feature-evals", m, || {
        need(inp.shards).iter().map(|s| mle_eval_base(&s.features, &fpt)).collect()
    })?;
    role.check(lin(ih, &fv) == x_train_value, sec, "training features differ from the provider commitments")?;
    for (p, v) in fv.iter().enumerate() {
        opens.single(sec, OracleId::ProviderFeatures(p), fpt.clone(), *v);
    }

    let r_lab = role.challenge(b"label-fold", sh.log_c());
    let y_fold = lin(&r_lab, &y_vals);
    let (il, ih) = p_i.split_at(log_s);
    let lpt = cat(il, &r_lab);
    let lv = role.send_ext(sec, b"provider-label-evals", m, || {
        need(inp.shards).iter().map(|s| mle_eval_base(&s.labels, &lpt)).collect()
    })?;
    role.check(lin(ih, &lv) == y_fold, sec, "training labels differ from the provider commitments")?;
    for (p, v) in lv.iter().enumerate() {
        opens.single(sec, OracleId::ProviderLabels(p), lpt.clone(), *v);
    }

    role.transcript().absorb(b"openings", &[]);
    for req in &opens.0 {
        role.open(req)?;
    }
    Ok(())
}
