//! Seeded random generators for types, contexts, vectors, value trees and
//! well-typed terms, used by the property and acceptance tests.
//!
//! `typed_term` produces terms accepted by the plain discipline over a
//! given context: every non-unit context variable is consumed, sharing and
//! weakening included.  `strict_term` produces terms accepted by the
//! strict discipline; its shapes are chosen so the orthogonality and
//! normalisation side conditions hold by construction, which requires the
//! context dimension never to exceed the target type's dimension (only
//! then can the term denote an isometry).

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::normalizer::{cval_of_index, quote_quantum, qval_to_term};
use crate::semantics::{vec_inner, Vector};
use crate::syntax::{amp, Amplitude, Context, Pattern, QType, QVal, Term};

/// Contexts assembled here always carry distinct names, so the duplicate
/// check cannot fire.
fn ctx_of(entries: impl IntoIterator<Item = (String, QType)>) -> Context {
    Context::from_pairs(entries).expect("generated names are distinct")
}

pub struct TermGen {
    rng: StdRng,
    counter: usize,
}

const TAU: f64 = std::f64::consts::TAU;

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen {
            rng: StdRng::seed_from_u64(seed),
            counter: 0,
        }
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    /// Uniform draw from `0..n`.
    pub fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn fresh(&mut self, taken: &BTreeSet<String>) -> String {
        loop {
            self.counter += 1;
            let name = format!("v{}", self.counter);
            if !taken.contains(&name) {
                return name;
            }
        }
    }

    // -- raw material ------------------------------------------------------

    pub fn qtype(&mut self, depth: usize) -> QType {
        if depth == 0 || self.coin(0.55) {
            if self.coin(0.2) {
                QType::Unit
            } else {
                QType::Qubit
            }
        } else {
            QType::tensor(self.qtype(depth - 1), self.qtype(depth - 1))
        }
    }

    pub fn context(&mut self, max_vars: usize, ty_depth: usize) -> Context {
        let n = self.pick(max_vars + 1);
        ctx_of((0..n).map(|i| (format!("x{i}"), self.qtype(ty_depth))))
    }

    pub fn amp_any(&mut self) -> Amplitude {
        amp(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
    }

    pub fn phase(&mut self) -> Amplitude {
        let theta = self.rng.gen_range(0.0..TAU);
        amp(theta.cos(), theta.sin())
    }

    pub fn unit_vector(&mut self, ty: &QType) -> Vector {
        loop {
            let amps: Vec<Amplitude> = (0..ty.dim()).map(|_| self.amp_any()).collect();
            let v = Vector {
                ty: ty.clone(),
                amps,
            };
            let n2 = v.norm2();
            if n2 > 1e-6 {
                return v.scale(amp(1.0 / n2.sqrt(), 0.0));
            }
        }
    }

    pub fn prob_dist(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(0.0..1.0)).collect()
    }

    /// Two unit vectors with inner product zero, by Gram-Schmidt.
    pub fn orthonormal_pair(&mut self, ty: &QType) -> (Vector, Vector) {
        assert!(ty.dim() >= 2, "no orthonormal pair in dimension 1");
        let v = self.unit_vector(ty);
        loop {
            let w0 = self.unit_vector(ty);
            let proj = vec_inner(&v, &w0);
            let w = w0.add(&v.scale(-proj));
            let n2 = w.norm2();
            if n2 > 1e-6 {
                return (v, w.scale(amp(1.0 / n2.sqrt(), 0.0)));
            }
        }
    }

    pub fn qval(&mut self, ty: &QType, depth: usize) -> QVal {
        if depth == 0 {
            return QVal::Leaf(cval_of_index(ty, self.pick(ty.dim())));
        }
        match self.pick(5) {
            0 => QVal::Leaf(cval_of_index(ty, self.pick(ty.dim()))),
            1 => QVal::Zero,
            2 => QVal::scale(self.amp_any(), self.qval(ty, depth - 1)),
            _ => QVal::sum(self.qval(ty, depth - 1), self.qval(ty, depth - 1)),
        }
    }

    fn closed_classical(&mut self, ty: &QType) -> Term {
        match ty {
            QType::Unit => Term::Unit,
            QType::Qubit => {
                if self.coin(0.5) {
                    Term::True
                } else {
                    Term::False
                }
            }
            QType::Tensor(a, b) => Term::pair(self.closed_classical(a), self.closed_classical(b)),
        }
    }

    // -- plainly typed terms -------------------------------------------------

    /// A term of type `ty` over `ctx` accepted by the plain discipline,
    /// possibly with superpositions, scalings and zeros.
    pub fn typed_term(&mut self, ctx: &Context, ty: &QType, depth: usize) -> Term {
        self.build(ctx, ty, depth, false)
    }

    /// A classical term of type `ty` over `ctx`.
    pub fn classical_term(&mut self, ctx: &Context, ty: &QType, depth: usize) -> Term {
        self.build(ctx, ty, depth, true)
    }

    fn build(&mut self, ctx: &Context, ty: &QType, depth: usize, classical: bool) -> Term {
        if depth == 0 {
            return self.consume(ctx, ty, classical);
        }
        #[derive(Clone, Copy)]
        enum Move {
            Let,
            Sup,
            Scale,
            Pair,
            Qif(usize),
            Split(usize),
            Value,
            Zero,
            Leaf,
        }
        let entries: Vec<(String, QType)> = ctx.iter().cloned().collect();
        let quantum: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| *t != QType::Unit)
            .map(|(i, _)| i)
            .collect();

        let mut moves = vec![Move::Let];
        if !classical {
            moves.push(Move::Sup);
            moves.push(Move::Scale);
        }
        if matches!(ty, QType::Tensor(_, _)) {
            moves.push(Move::Pair);
            moves.push(Move::Pair);
        }
        for &i in &quantum {
            match entries[i].1 {
                QType::Qubit => moves.extend([Move::Qif(i); 2]),
                QType::Tensor(_, _) => moves.extend([Move::Split(i); 2]),
                QType::Unit => unreachable!(),
            }
        }
        if quantum.is_empty() {
            moves.push(Move::Value);
            moves.push(Move::Value);
            if !classical {
                moves.push(Move::Zero);
            }
        }
        if quantum.len() == 1 && entries[quantum[0]].1 == *ty {
            moves.push(Move::Leaf);
            moves.push(Move::Leaf);
        }

        match moves[self.pick(moves.len())] {
            Move::Leaf => Term::var(&entries[quantum[0]].0),
            Move::Value => {
                if classical {
                    self.closed_classical(ty)
                } else {
                    self.qval(ty, 2).to_term(ty)
                }
            }
            Move::Zero => Term::Zero(ty.clone()),
            Move::Sup => Term::sup(
                self.build(ctx, ty, depth - 1, classical),
                self.build(ctx, ty, depth - 1, classical),
            ),
            Move::Scale => Term::scale(self.amp_any(), self.build(ctx, ty, depth - 1, classical)),
            Move::Qif(i) => {
                let rest = remove_entry(&entries, i);
                Term::qif(
                    Term::var(&entries[i].0),
                    self.build(&rest, ty, depth - 1, classical),
                    self.build(&rest, ty, depth - 1, classical),
                )
            }
            Move::Split(i) => {
                let QType::Tensor(a, b) = &entries[i].1 else {
                    unreachable!()
                };
                let mut taken: BTreeSet<String> = entries.iter().map(|(n, _)| n.clone()).collect();
                let l = self.fresh(&taken);
                taken.insert(l.clone());
                let r = self.fresh(&taken);
                let mut inner: Vec<(String, QType)> = entries
                    .iter()
                    .filter(|(n, _)| n != &entries[i].0)
                    .cloned()
                    .collect();
                inner.push((l.clone(), (**a).clone()));
                inner.push((r.clone(), (**b).clone()));
                Term::let_in(
                    Pattern::Pair(l, r),
                    Term::var(&entries[i].0),
                    self.build(&ctx_of(inner), ty, depth - 1, classical),
                )
            }
            Move::Pair => {
                let QType::Tensor(a, b) = ty else {
                    unreachable!()
                };
                let (left, right) = self.share_split(&entries, &quantum);
                Term::pair(
                    self.build(&left, a, depth - 1, classical),
                    self.build(&right, b, depth - 1, classical),
                )
            }
            Move::Let => {
                let rho = self.qtype(1);
                let (bound_ctx, body_base) = self.share_split(&entries, &quantum);
                let taken: BTreeSet<String> = entries.iter().map(|(n, _)| n.clone()).collect();
                let mut body_entries: Vec<(String, QType)> = body_base.iter().cloned().collect();
                let pat;
                if let (QType::Tensor(a, b), true) = (&rho, self.coin(0.3)) {
                    let l = self.fresh(&taken);
                    let mut taken2 = taken.clone();
                    taken2.insert(l.clone());
                    let r = self.fresh(&taken2);
                    body_entries.push((l.clone(), (**a).clone()));
                    body_entries.push((r.clone(), (**b).clone()));
                    pat = Pattern::Pair(l, r);
                } else {
                    let x = self.fresh(&taken);
                    body_entries.push((x.clone(), rho.clone()));
                    pat = Pattern::Var(x);
                }
                Term::let_in(
                    pat,
                    self.build(&bound_ctx, &rho, depth - 1, classical),
                    self.build(&ctx_of(body_entries), ty, depth - 1, classical),
                )
            }
        }
    }

    /// Random three-way sharing of the quantum entries; unit entries ride
    /// along on both sides since either side may drop them.
    fn share_split(
        &mut self,
        entries: &[(String, QType)],
        quantum: &[usize],
    ) -> (Context, Context) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            if !quantum.contains(&i) {
                left.push(e.clone());
                right.push(e.clone());
                continue;
            }
            match self.pick(3) {
                0 => left.push(e.clone()),
                1 => right.push(e.clone()),
                _ => {
                    left.push(e.clone());
                    right.push(e.clone());
                }
            }
        }
        (ctx_of(left), ctx_of(right))
    }

    /// Deterministic fallback that consumes every quantum variable.
    fn consume(&mut self, ctx: &Context, ty: &QType, classical: bool) -> Term {
        let entries: Vec<(String, QType)> = ctx.iter().cloned().collect();
        let quantum: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| *t != QType::Unit)
            .map(|(i, _)| i)
            .collect();
        if quantum.len() == 1 && entries[quantum[0]].1 == *ty && self.coin(0.5) {
            return Term::var(&entries[quantum[0]].0);
        }
        let Some(&i) = quantum.first() else {
            return if classical || self.coin(0.5) {
                self.closed_classical(ty)
            } else {
                self.qval(ty, 1).to_term(ty)
            };
        };
        let rest = remove_entry(&entries, i);
        match &entries[i].1 {
            QType::Qubit => Term::qif(
                Term::var(&entries[i].0),
                self.consume(&rest, ty, classical),
                self.consume(&rest, ty, classical),
            ),
            QType::Tensor(a, b) => {
                let mut taken: BTreeSet<String> = entries.iter().map(|(n, _)| n.clone()).collect();
                let l = self.fresh(&taken);
                taken.insert(l.clone());
                let r = self.fresh(&taken);
                let mut inner: Vec<(String, QType)> = rest.iter().cloned().collect();
                inner.push((l.clone(), (**a).clone()));
                inner.push((r.clone(), (**b).clone()));
                Term::let_in(
                    Pattern::Pair(l, r),
                    Term::var(&entries[i].0),
                    self.consume(&ctx_of(inner), ty, classical),
                )
            }
            QType::Unit => unreachable!(),
        }
    }

    // -- strictly typed terms ------------------------------------------------

    /// A context, a type of at least the context's dimension, and a term
    /// accepted by the strict discipline at that judgement.
    pub fn strict_judgement(&mut self, eps: f64) -> (Context, QType, Term) {
        let ctx = loop {
            let c = self.context(2, 1);
            if c.dim() <= 8 {
                break c;
            }
        };
        let ty = 'ty: {
            for _ in 0..40 {
                let t = self.qtype(3);
                if t.dim() >= ctx.dim() {
                    break 'ty t;
                }
            }
            break 'ty ctx
                .iter()
                .map(|(_, t)| t.clone())
                .reduce(QType::tensor)
                .unwrap_or(QType::Qubit);
        };
        let term = self.strict_term(&ctx, &ty, 3, eps);
        (ctx, ty, term)
    }

    /// A term over `ctx` of type `ty` accepted by the strict discipline.
    /// Requires `ctx.dim() <= ty.dim()`.
    pub fn strict_term(&mut self, ctx: &Context, ty: &QType, depth: usize, eps: f64) -> Term {
        assert!(ctx.dim() <= ty.dim(), "no isometry into a smaller space");
        #[derive(Clone, Copy)]
        enum Move {
            Closed,
            Leaf(usize),
            Split(usize),
            QifOrtho(usize),
            QifTag(usize),
            PairSplit,
            LetClosed,
            Phase,
            SupTag,
        }
        let entries: Vec<(String, QType)> = ctx.iter().cloned().collect();
        let quantum: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| *t != QType::Unit)
            .map(|(i, _)| i)
            .collect();
        let rest_dim = |skip: usize| -> usize {
            entries
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, (_, t))| t.dim())
                .product()
        };

        let mut moves = Vec::new();
        if quantum.is_empty() {
            moves.extend([Move::Closed; 2]);
        }
        for &i in &quantum {
            match &entries[i].1 {
                QType::Qubit => {
                    if quantum.len() == 1 {
                        moves.push(Move::QifOrtho(i));
                    }
                    if let QType::Tensor(s, t) = ty {
                        if **s == QType::Qubit && rest_dim(i) <= t.dim() {
                            moves.push(Move::QifTag(i));
                        }
                    }
                }
                QType::Tensor(_, _) => moves.push(Move::Split(i)),
                QType::Unit => unreachable!(),
            }
            if entries[i].1 == *ty && quantum.len() == 1 {
                moves.push(Move::Leaf(i));
            }
        }
        if let QType::Tensor(s, t) = ty {
            if partition_fits(&entries, &quantum, s.dim(), t.dim()).is_some() {
                moves.push(Move::PairSplit);
            }
        }
        if depth > 0 {
            moves.push(Move::Phase);
            if ctx.dim() * 2 <= ty.dim() || self.coin(0.5) {
                moves.push(Move::LetClosed);
            }
            if let QType::Tensor(s, t) = ty {
                if **s == QType::Qubit && ctx.dim() <= t.dim() {
                    moves.push(Move::SupTag);
                }
            }
        }
        assert!(!moves.is_empty(), "no strict move for {ctx} : {ty}");

        let d = depth.saturating_sub(1);
        match moves[self.pick(moves.len())] {
            Move::Closed => {
                if self.coin(0.3) {
                    self.closed_classical(ty)
                } else {
                    let v = self.unit_vector(ty);
                    qval_to_term(ty, &quote_quantum(ty, &v, eps), eps)
                }
            }
            Move::Leaf(i) => Term::var(&entries[i].0),
            Move::Split(i) => {
                let QType::Tensor(a, b) = &entries[i].1 else {
                    unreachable!()
                };
                let mut taken: BTreeSet<String> = entries.iter().map(|(n, _)| n.clone()).collect();
                let l = self.fresh(&taken);
                taken.insert(l.clone());
                let r = self.fresh(&taken);
                let mut inner = remove_entry(&entries, i)
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>();
                inner.push((l.clone(), (**a).clone()));
                inner.push((r.clone(), (**b).clone()));
                Term::let_in(
                    Pattern::Pair(l, r),
                    Term::var(&entries[i].0),
                    self.strict_term(&ctx_of(inner), ty, d, eps),
                )
            }
            Move::QifOrtho(i) => {
                let (v0, v1) = self.orthonormal_pair(ty);
                Term::qif(
                    Term::var(&entries[i].0),
                    qval_to_term(ty, &quote_quantum(ty, &v1, eps), eps),
                    qval_to_term(ty, &quote_quantum(ty, &v0, eps), eps),
                )
            }
            Move::QifTag(i) => {
                let QType::Tensor(_, t) = ty else {
                    unreachable!()
                };
                let rest = remove_entry(&entries, i);
                Term::qif(
                    Term::var(&entries[i].0),
                    Term::pair(Term::True, self.strict_term(&rest, t, d, eps)),
                    Term::pair(Term::False, self.strict_term(&rest, t, d, eps)),
                )
            }
            Move::PairSplit => {
                let QType::Tensor(s, t) = ty else {
                    unreachable!()
                };
                let (li, ri) = partition_fits(&entries, &quantum, s.dim(), t.dim()).unwrap();
                let keep = |idx: &[usize]| -> Context {
                    ctx_of(
                        entries
                            .iter()
                            .enumerate()
                            .filter(|(i, (_, t2))| idx.contains(i) || *t2 == QType::Unit)
                            .map(|(_, e)| e.clone()),
                    )
                };
                Term::pair(
                    self.strict_term(&keep(&li), s, d, eps),
                    self.strict_term(&keep(&ri), t, d, eps),
                )
            }
            Move::LetClosed => {
                let rho = if ctx.dim() * 2 <= ty.dim() && self.coin(0.7) {
                    QType::Qubit
                } else {
                    QType::Unit
                };
                let taken: BTreeSet<String> = entries.iter().map(|(n, _)| n.clone()).collect();
                let x = self.fresh(&taken);
                let v = self.unit_vector(&rho);
                let bound = qval_to_term(&rho, &quote_quantum(&rho, &v, eps), eps);
                let mut inner: Vec<(String, QType)> = entries.clone();
                inner.push((x.clone(), rho));
                Term::let_in(
                    Pattern::Var(x),
                    bound,
                    self.strict_term(&ctx_of(inner), ty, d, eps),
                )
            }
            Move::Phase => Term::scale(self.phase(), self.strict_term(ctx, ty, d, eps)),
            Move::SupTag => {
                let QType::Tensor(_, t) = ty else {
                    unreachable!()
                };
                let theta = self.rng.gen_range(0.0..TAU);
                let lam = self.phase() * theta.cos();
                let kap = self.phase() * theta.sin();
                Term::sup(
                    Term::scale(
                        lam,
                        Term::pair(Term::False, self.strict_term(ctx, t, d, eps)),
                    ),
                    Term::scale(
                        kap,
                        Term::pair(Term::True, self.strict_term(ctx, t, d, eps)),
                    ),
                )
            }
        }
    }
}

fn remove_entry(entries: &[(String, QType)], i: usize) -> Context {
    ctx_of(
        entries
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, e)| e.clone()),
    )
}

/// Split the quantum entries into two groups whose dimensions fit the two
/// capacities, largest entries first; unit entries are ignored.
fn partition_fits(
    entries: &[(String, QType)],
    quantum: &[usize],
    left_cap: usize,
    right_cap: usize,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut order: Vec<usize> = quantum.to_vec();
    order.sort_by_key(|&i| std::cmp::Reverse(entries[i].1.dim()));
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let (mut ld, mut rd) = (1usize, 1usize);
    for i in order {
        let d = entries[i].1.dim();
        if ld * d <= left_cap {
            ld *= d;
            left.push(i);
        } else if rd * d <= right_cap {
            rd *= d;
            right.push(i);
        } else {
            return None;
        }
    }
    Some((left, right))
}
