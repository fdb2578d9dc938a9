//! Denotational semantics.
//!
//! A context over basis types denotes a finite set; a typed term denotes a
//! map out of that set.  Classical terms evaluate to lookup tables over
//! basis indices.  Quantum terms evaluate to a [`LinMap`]: one complex
//! column per basis element of the context, each column the value vector
//! of the term in that classical environment.  Superpositions of inputs
//! are recovered by linearity.
//!
//! Basis conventions: `Q1` has the single element 0; `Q2` has false = 0 and
//! true = 1; a tensor pairs indices as `a * dim(right) + b`.  A context
//! `x1:s1, .., xn:sn` denotes the left-nested tensor starting from `Q1`,
//! so its basis index reads the variables most-significant-first.

use std::collections::HashMap;

use crate::syntax::{
    amp, amp_approx_eq, merge_contexts, Amplitude, Context, Pattern, QType, Term, TypeClash,
};
use crate::typecheck::Judgement;

/// A complex vector over the basis of one type.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    pub ty: QType,
    pub amps: Vec<Amplitude>,
}

impl Vector {
    pub fn zero(ty: QType) -> Self {
        let dim = ty.dim();
        Vector {
            ty,
            amps: vec![amp(0.0, 0.0); dim],
        }
    }

    pub fn basis(ty: QType, index: usize) -> Self {
        let mut v = Vector::zero(ty);
        assert!(index < v.amps.len(), "basis index out of range");
        v.amps[index] = amp(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm2(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&self, k: Amplitude) -> Vector {
        Vector {
            ty: self.ty.clone(),
            amps: self.amps.iter().map(|a| a * k).collect(),
        }
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.ty, other.ty, "vector addition over distinct types");
        Vector {
            ty: self.ty.clone(),
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn tensor(&self, other: &Vector) -> Vector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Vector {
            ty: QType::tensor(self.ty.clone(), other.ty.clone()),
            amps,
        }
    }

    pub fn approx_eq(&self, other: &Vector, eps: f64) -> bool {
        self.ty == other.ty
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| amp_approx_eq(*a, *b, eps))
    }
}

/// Monadic return: a basis element as a vector.
pub fn vec_return(ty: QType, index: usize) -> Vector {
    Vector::basis(ty, index)
}

/// Monadic bind: linear extension of a basis-indexed family of vectors.
pub fn vec_bind(v: &Vector, out_ty: &QType, f: impl Fn(usize) -> Vector) -> Vector {
    let mut acc = Vector::zero(out_ty.clone());
    for (a, &k) in v.amps.iter().enumerate() {
        if k == amp(0.0, 0.0) {
            continue;
        }
        let fa = f(a);
        debug_assert_eq!(fa.ty, *out_ty);
        for (slot, x) in acc.amps.iter_mut().zip(&fa.amps) {
            *slot += k * x;
        }
    }
    acc
}

/// Inner product, conjugate-linear in the first argument.
pub fn vec_inner(v: &Vector, w: &Vector) -> Amplitude {
    assert_eq!(v.ty, w.ty, "inner product over distinct types");
    v.amps.iter().zip(&w.amps).map(|(a, b)| a.conj() * b).sum()
}

/// A linear map stored densely, one output-space column per input basis
/// element.
#[derive(Debug, Clone, PartialEq)]
pub struct LinMap {
    pub in_ty: QType,
    pub out_ty: QType,
    pub cols: Vec<Vector>,
}

impl LinMap {
    pub fn from_columns(in_ty: QType, out_ty: QType, cols: Vec<Vector>) -> Self {
        assert_eq!(cols.len(), in_ty.dim());
        for c in &cols {
            assert_eq!(c.ty, out_ty);
        }
        LinMap {
            in_ty,
            out_ty,
            cols,
        }
    }

    pub fn identity(ty: QType) -> Self {
        let cols = (0..ty.dim())
            .map(|i| Vector::basis(ty.clone(), i))
            .collect();
        LinMap {
            in_ty: ty.clone(),
            out_ty: ty,
            cols,
        }
    }

    /// Lift a classical table: column `g` is the basis vector `table[g]`.
    pub fn from_classical(in_ty: QType, out_ty: QType, table: &[usize]) -> Self {
        assert_eq!(table.len(), in_ty.dim());
        let cols = table
            .iter()
            .map(|&o| Vector::basis(out_ty.clone(), o))
            .collect();
        LinMap {
            in_ty,
            out_ty,
            cols,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.cols.len()
    }

    pub fn out_dim(&self) -> usize {
        self.out_ty.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> Amplitude {
        self.cols[col].amps[row]
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        assert_eq!(v.ty, self.in_ty, "argument type does not match");
        vec_bind(v, &self.out_ty, |a| self.cols[a].clone())
    }

    pub fn scale(&self, k: Amplitude) -> LinMap {
        LinMap {
            in_ty: self.in_ty.clone(),
            out_ty: self.out_ty.clone(),
            cols: self.cols.iter().map(|c| c.scale(k)).collect(),
        }
    }

    pub fn add(&self, other: &LinMap) -> LinMap {
        assert_eq!((&self.in_ty, &self.out_ty), (&other.in_ty, &other.out_ty));
        LinMap {
            in_ty: self.in_ty.clone(),
            out_ty: self.out_ty.clone(),
            cols: self
                .cols
                .iter()
                .zip(&other.cols)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn approx_eq(&self, other: &LinMap, eps: f64) -> bool {
        self.in_ty == other.in_ty
            && self.out_ty == other.out_ty
            && self
                .cols
                .iter()
                .zip(&other.cols)
                .all(|(a, b)| a.approx_eq(b, eps))
    }
}

/// Does M†M = I hold within `eps` entrywise?
pub fn is_isometry(m: &LinMap, eps: f64) -> bool {
    for i in 0..m.in_dim() {
        for j in 0..m.in_dim() {
            let g = vec_inner(&m.cols[i], &m.cols[j]);
            let target = if i == j { amp(1.0, 0.0) } else { amp(0.0, 0.0) };
            if (g - target).norm() > eps {
                return false;
            }
        }
    }
    true
}

/// Do f and g map every pair of basis vectors to orthogonal outputs?  By
/// sesquilinearity this settles ⟨f v|g v⟩ = 0 for all v.
pub fn morphisms_orthogonal(f: &LinMap, g: &LinMap, eps: f64) -> bool {
    assert_eq!((&f.in_ty, &f.out_ty), (&g.in_ty, &g.out_ty));
    for a in 0..f.in_dim() {
        for b in 0..g.in_dim() {
            if vec_inner(&f.cols[a], &g.cols[b]).norm() > eps {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Context basis arithmetic
// ---------------------------------------------------------------------------

/// Per-variable classical values encoded by a context basis index,
/// most-significant variable first.
pub fn ctx_values(ctx: &Context, index: usize) -> Vec<usize> {
    let mut vals = vec![0usize; ctx.len()];
    let mut rest = index;
    for (slot, (_, ty)) in ctx.entries().iter().enumerate().rev() {
        let d = ty.dim();
        vals[slot] = rest % d;
        rest /= d;
    }
    debug_assert_eq!(rest, 0, "index out of range for context");
    vals
}

/// Inverse of [`ctx_values`].
pub fn ctx_index(ctx: &Context, vals: &[usize]) -> usize {
    debug_assert_eq!(vals.len(), ctx.len());
    let mut index = 0;
    for ((_, ty), &v) in ctx.iter().zip(vals) {
        debug_assert!(v < ty.dim());
        index = index * ty.dim() + v;
    }
    index
}

/// The basis-level splitter from a merged context onto its two parts:
/// `pairs[m] = (left index, right index)`, duplicating shared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSplit {
    pub left: Context,
    pub right: Context,
    pub merged: Context,
    pub pairs: Vec<(usize, usize)>,
}

pub fn delta_split(left: &Context, right: &Context) -> Result<DeltaSplit, TypeClash> {
    let plan = merge_contexts(left, right)?;
    let merged = plan.context;
    let slot_of: HashMap<&str, usize> = merged
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.as_str(), i))
        .collect();
    let project = |part: &Context, vals: &[usize]| -> usize {
        let pvals: Vec<usize> = part
            .iter()
            .map(|(n, _)| vals[slot_of[n.as_str()]])
            .collect();
        ctx_index(part, &pvals)
    };
    let pairs = (0..merged.dim())
        .map(|m| {
            let vals = ctx_values(&merged, m);
            (project(left, &vals), project(right, &vals))
        })
        .collect();
    Ok(DeltaSplit {
        left: left.clone(),
        right: right.clone(),
        merged,
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

type Env = HashMap<String, (QType, usize)>;

fn env_for(ctx: &Context, index: usize) -> Env {
    ctx.iter()
        .zip(ctx_values(ctx, index))
        .map(|((n, ty), v)| (n.clone(), (ty.clone(), v)))
        .collect()
}

fn bind_pattern(env: &Env, pat: &Pattern, ty: &QType, value: usize) -> Env {
    let mut env = env.clone();
    match pat {
        Pattern::Var(x) => {
            env.insert(x.clone(), (ty.clone(), value));
        }
        Pattern::Pair(x, y) => {
            let QType::Tensor(a, b) = ty else {
                unreachable!("pair pattern over non-tensor type")
            };
            let db = b.dim();
            env.insert(x.clone(), ((**a).clone(), value / db));
            env.insert(y.clone(), ((**b).clone(), value % db));
        }
    }
    env
}

/// Evaluate a typed classical term to its table: entry `g` is the output
/// basis index on context basis element `g`.
pub fn eval_classical(j: &Judgement) -> Vec<usize> {
    debug_assert!(j.term.is_classical(), "eval_classical on a quantum term");
    (0..j.context.dim())
        .map(|g| {
            let env = env_for(&j.context, g);
            let (v, ty) = classical_value(&env, &j.term);
            debug_assert_eq!(ty, j.ty);
            v
        })
        .collect()
}

fn classical_value(env: &Env, t: &Term) -> (usize, QType) {
    match t {
        Term::Var(x) => {
            let (ty, v) = &env[x];
            (*v, ty.clone())
        }
        Term::Unit => (0, QType::Unit),
        Term::False => (0, QType::Qubit),
        Term::True => (1, QType::Qubit),
        Term::Pair(a, b) => {
            let (va, ta) = classical_value(env, a);
            let (vb, tb) = classical_value(env, b);
            (va * tb.dim() + vb, QType::tensor(ta, tb))
        }
        Term::Let(pat, bound, body) => {
            let (vb, tb) = classical_value(env, bound);
            classical_value(&bind_pattern(env, pat, &tb, vb), body)
        }
        Term::IfQ(cond, then_t, else_t) => {
            let (vc, tc) = classical_value(env, cond);
            debug_assert_eq!(tc, QType::Qubit);
            classical_value(env, if vc == 1 { then_t } else { else_t })
        }
        Term::Zero(_) | Term::Scale(_, _) | Term::Sup(_, _) => {
            unreachable!("classical evaluation of a quantum construct")
        }
    }
}

/// Evaluate a typed term to its matrix: one column per context basis
/// element, each the complex value vector in that environment.
pub fn eval_quantum(j: &Judgement) -> LinMap {
    let in_ty = j.context.as_type();
    let cols = (0..j.context.dim())
        .map(|g| {
            let env = env_for(&j.context, g);
            let v = quantum_value(&env, &j.term);
            debug_assert_eq!(v.ty, j.ty);
            v
        })
        .collect();
    LinMap {
        in_ty,
        out_ty: j.ty.clone(),
        cols,
    }
}

fn quantum_value(env: &Env, t: &Term) -> Vector {
    match t {
        Term::Var(x) => {
            let (ty, v) = &env[x];
            Vector::basis(ty.clone(), *v)
        }
        Term::Unit => Vector::basis(QType::Unit, 0),
        Term::False => Vector::basis(QType::Qubit, 0),
        Term::True => Vector::basis(QType::Qubit, 1),
        Term::Zero(ty) => Vector::zero(ty.clone()),
        Term::Pair(a, b) => quantum_value(env, a).tensor(&quantum_value(env, b)),
        Term::Scale(k, a) => quantum_value(env, a).scale(*k),
        Term::Sup(a, b) => quantum_value(env, a).add(&quantum_value(env, b)),
        Term::IfQ(cond, then_t, else_t) => {
            let vc = quantum_value(env, cond);
            debug_assert_eq!(vc.ty, QType::Qubit);
            let v1 = quantum_value(env, then_t);
            let v0 = quantum_value(env, else_t);
            v1.scale(vc.amps[1]).add(&v0.scale(vc.amps[0]))
        }
        Term::Let(pat, bound, body) => {
            let vb = quantum_value(env, bound);
            // Bind: sum the body's value over the bound vector's basis
            // support.  The first summand is always evaluated so the
            // output is typed even when the bound vector is zero.
            let mut acc: Option<Vector> = None;
            for (a, &k) in vb.amps.iter().enumerate() {
                if k == amp(0.0, 0.0) && acc.is_some() {
                    continue;
                }
                let bv = quantum_value(&bind_pattern(env, pat, &vb.ty, a), body);
                acc = Some(match acc {
                    None => bv.scale(k),
                    Some(prev) => prev.add(&bv.scale(k)),
                });
            }
            acc.expect("every type has dimension at least 1")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_context, parse_term_in};
    use crate::typecheck::infer;

    const EPS: f64 = 1e-12;

    fn eval(ctx_src: &str, term_src: &str) -> LinMap {
        let ctx = parse_context(ctx_src).unwrap();
        let t = parse_term_in(term_src, &ctx).unwrap();
        eval_quantum(&infer(&ctx, &t, false, 1e-9).unwrap())
    }

    #[test]
    fn closed_literals() {
        let m = eval("", "true");
        assert_eq!(m.in_dim(), 1);
        assert!(m.cols[0].approx_eq(&Vector::basis(QType::Qubit, 1), EPS));
        let z = eval("", "zero[Q2]");
        assert!(z.cols[0].approx_eq(&Vector::zero(QType::Qubit), EPS));
    }

    #[test]
    fn variable_is_identity() {
        let m = eval("x:Q2", "x");
        let in_ty = QType::tensor(QType::Unit, QType::Qubit);
        assert_eq!(m.in_ty, in_ty);
        let expect = LinMap::from_columns(
            in_ty,
            QType::Qubit,
            vec![
                Vector::basis(QType::Qubit, 0),
                Vector::basis(QType::Qubit, 1),
            ],
        );
        assert!(m.approx_eq(&expect, EPS));
    }

    #[test]
    fn qnot_table_and_matrix_agree() {
        let ctx = parse_context("x:Q2").unwrap();
        let t = parse_term_in("qif x then false else true", &ctx).unwrap();
        let j = infer(&ctx, &t, false, 1e-9).unwrap();
        let table = eval_classical(&j);
        assert_eq!(table, vec![1, 0]);
        let lifted = LinMap::from_classical(j.context.as_type(), QType::Qubit, &table);
        assert!(eval_quantum(&j).approx_eq(&lifted, EPS));
    }

    #[test]
    fn hadamard_matrix() {
        let h = eval(
            "x:Q2",
            "qif x then {1/sqrt(2)}*false + {-1/sqrt(2)}*true \
                  else {1/sqrt(2)}*false + {1/sqrt(2)}*true",
        );
        let r = 1.0 / 2f64.sqrt();
        let expect = [[r, r], [r, -r]];
        for (row, want) in expect.iter().enumerate() {
            for (col, w) in want.iter().enumerate() {
                assert!(amp_approx_eq(h.entry(row, col), amp(*w, 0.0), EPS));
            }
        }
        assert!(is_isometry(&h, 1e-9));
        // Self-inverse: the entrywise product H*H is the identity.
        for row in 0..2 {
            for col in 0..2 {
                let prod: Amplitude = (0..2).map(|k| h.entry(row, k) * h.entry(k, col)).sum();
                let want = amp(if row == col { 1.0 } else { 0.0 }, 0.0);
                assert!(amp_approx_eq(prod, want, 1e-12));
            }
        }
    }

    #[test]
    fn bell_state_from_cnot() {
        let m = eval(
            "",
            "let (c, x) = ({1/sqrt(2)}*false + {1/sqrt(2)}*true, false) in \
             qif c then (true, qif x then false else true) else (false, x)",
        );
        let r = 1.0 / 2f64.sqrt();
        let col = &m.cols[0];
        for (i, want) in [r, 0.0, 0.0, r].iter().enumerate() {
            assert!(
                amp_approx_eq(col.amps[i], amp(*want, 0.0), 1e-12),
                "slot {i}"
            );
        }
    }

    #[test]
    fn sharing_duplicates_basis_not_state() {
        let m = eval("", "let x = {1/sqrt(2)}*false + {1/sqrt(2)}*true in (x, x)");
        let r = 1.0 / 2f64.sqrt();
        let col = &m.cols[0];
        for (i, want) in [r, 0.0, 0.0, r].iter().enumerate() {
            assert!(
                amp_approx_eq(col.amps[i], amp(*want, 0.0), 1e-12),
                "slot {i}"
            );
        }
    }

    #[test]
    fn isometry_checks() {
        assert!(is_isometry(&LinMap::identity(QType::Qubit), 1e-12));
        let zero = LinMap::from_columns(
            QType::Qubit,
            QType::Qubit,
            vec![Vector::zero(QType::Qubit), Vector::zero(QType::Qubit)],
        );
        assert!(!is_isometry(&zero, 1e-12));
    }

    #[test]
    fn inner_product_conjugates_left() {
        let v = Vector {
            ty: QType::Qubit,
            amps: vec![amp(0.0, 1.0), amp(0.0, 0.0)],
        };
        let w = Vector::basis(QType::Qubit, 0);
        assert!(amp_approx_eq(vec_inner(&v, &w), amp(0.0, -1.0), EPS));
        assert!(amp_approx_eq(vec_inner(&w, &v), amp(0.0, 1.0), EPS));
    }

    #[test]
    fn morphism_orthogonality() {
        let const_false = LinMap::from_classical(QType::Unit, QType::Qubit, &[0]);
        let const_true = LinMap::from_classical(QType::Unit, QType::Qubit, &[1]);
        assert!(morphisms_orthogonal(&const_false, &const_true, 1e-12));
        let id = LinMap::identity(QType::Qubit);
        assert!(!morphisms_orthogonal(&id, &id, 1e-12));
    }

    #[test]
    fn delta_split_examples() {
        let shared = delta_split(
            &parse_context("x:Q2").unwrap(),
            &parse_context("x:Q2").unwrap(),
        )
        .unwrap();
        assert_eq!(shared.pairs, vec![(0, 0), (1, 1)]);

        let lonely = delta_split(&parse_context("x:Q2").unwrap(), &Context::empty()).unwrap();
        assert_eq!(lonely.pairs, vec![(0, 0), (1, 0)]);

        let disjoint = delta_split(
            &parse_context("c:Q2").unwrap(),
            &parse_context("x:Q2").unwrap(),
        )
        .unwrap();
        assert_eq!(disjoint.merged.dim(), 4);
        let mut seen: Vec<(usize, usize)> = disjoint.pairs.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4, "disjoint split is a bijection");
    }

    #[test]
    fn ctx_index_round_trip() {
        let ctx = parse_context("a:Q2, b:Q2*Q2, u:Q1").unwrap();
        for i in 0..ctx.dim() {
            assert_eq!(ctx_index(&ctx, &ctx_values(&ctx, i)), i);
        }
    }
}
