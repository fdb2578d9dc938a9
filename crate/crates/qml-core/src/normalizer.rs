//! Normalisation by evaluation.
//!
//! Evaluation sends a typed term to a matrix; quoting inverts it, reading a
//! matrix back as a term in a canonical shape.  `nf` composes the two, so
//! two terms get the same normal form exactly when they denote the same
//! matrix (up to the working tolerance).  `equiv` decides that equality
//! directly on the matrices.
//!
//! Quoting a closed column builds the value as a sum of scaled basis
//! terms, true-summand first at each qubit, with zero weights pruned and
//! unit weights elided.  Quoting an open term first rewrites tensor-typed
//! context entries into pair-let bindings over fresh qubit and unit
//! variables and then cases on each qubit entry with `qif`, the last
//! entry's conditional outermost.  `Q1` entries need no syntax: a unit
//! variable may always be dropped.

use crate::semantics::{eval_classical, eval_quantum, LinMap, Vector};
use crate::syntax::{
    amp, fresh_name, term_approx_eq, Amplitude, CVal, Context, Pattern, QType, QVal, Term,
};
use crate::typecheck::{infer, infer_classical, TypeError, TypeErrorKind};

/// Probabilities over the basis of a type, as produced by [`fst_dist`].
pub type ProbDist = Vec<f64>;

/// The weight of each left-component value of a tensor-typed vector:
/// entry `a` is the root of the summed squared magnitudes of the block
/// of `v` with left index `a`.
pub fn fst_dist(v: &Vector) -> ProbDist {
    let QType::Tensor(_, right) = &v.ty else {
        panic!("fst_dist over a non-tensor vector")
    };
    let dr = right.dim();
    v.amps
        .chunks(dr)
        .map(|block| block.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Entrywise guarded reciprocal: weights within `eps` of zero stay zero.
pub fn pinv(p: &[f64], eps: f64) -> Vec<f64> {
    p.iter()
        .map(|&x| if x <= eps { 0.0 } else { 1.0 / x })
        .collect()
}

/// The classical value sitting at a basis index of a type.
pub fn cval_of_index(ty: &QType, index: usize) -> CVal {
    debug_assert!(index < ty.dim());
    match ty {
        QType::Unit => CVal::Unit,
        QType::Qubit => {
            if index == 1 {
                CVal::True
            } else {
                CVal::False
            }
        }
        QType::Tensor(a, b) => {
            let db = b.dim();
            CVal::pair(cval_of_index(a, index / db), cval_of_index(b, index % db))
        }
    }
}

/// The basis index of a closed classical value of the given type.
pub fn cval_index(ty: &QType, v: &CVal) -> usize {
    match (ty, v) {
        (QType::Unit, CVal::Unit) => 0,
        (QType::Qubit, CVal::False) => 0,
        (QType::Qubit, CVal::True) => 1,
        (QType::Tensor(a, b), CVal::Pair(x, y)) => cval_index(a, x) * b.dim() + cval_index(b, y),
        _ => panic!("classical value does not inhabit the type"),
    }
}

/// Quote a basis index as a classical value term.
pub fn quote_classical(ty: &QType, index: usize) -> Term {
    cval_of_index(ty, index).to_term()
}

/// Monadic bind on value trees: graft `f(leaf)` onto every leaf.
pub fn qval_bind(v: &QVal, f: &impl Fn(&CVal) -> QVal) -> QVal {
    match v {
        QVal::Leaf(a) => f(a),
        QVal::Zero => QVal::Zero,
        QVal::Scale(k, inner) => QVal::scale(*k, qval_bind(inner, f)),
        QVal::Sum(l, r) => QVal::sum(qval_bind(l, f), qval_bind(r, f)),
    }
}

/// Quote a closed vector as a weighted value tree over basis leaves.
///
/// A qubit splits true-summand first.  A tensor first quotes the
/// left-component weight distribution, then grafts on each left value
/// the quote of that value's raw block, rescaled by the reciprocal
/// weight so the block's weight is not counted twice.
pub fn quote_quantum(ty: &QType, v: &Vector, eps: f64) -> QVal {
    debug_assert_eq!(*ty, v.ty);
    match ty {
        QType::Unit => QVal::scale(v.amps[0], QVal::Leaf(CVal::Unit)),
        QType::Qubit => QVal::sum(
            QVal::scale(v.amps[1], QVal::Leaf(CVal::True)),
            QVal::scale(v.amps[0], QVal::Leaf(CVal::False)),
        ),
        QType::Tensor(a, b) => {
            let dist = fst_dist(v);
            let inv = pinv(&dist, eps);
            let db = b.dim();
            let left = quote_quantum(a, &dist_vector(a, &dist), eps);
            qval_bind(&left, &|xv| {
                let x = cval_index(a, xv);
                let block = Vector {
                    ty: (**b).clone(),
                    amps: v.amps[x * db..(x + 1) * db].to_vec(),
                };
                let right = quote_quantum(b, &block, eps);
                QVal::scale(
                    amp(inv[x], 0.0),
                    qval_bind(&right, &|yv| QVal::Leaf(CVal::pair(xv.clone(), yv.clone()))),
                )
            })
        }
    }
}

fn dist_vector(ty: &QType, dist: &[f64]) -> Vector {
    Vector {
        ty: ty.clone(),
        amps: dist.iter().map(|&p| amp(p, 0.0)).collect(),
    }
}

/// Rescale a vector entrywise by a distribution over the same basis.
pub fn prob_scale(p: &[f64], v: &Vector) -> Vector {
    assert_eq!(p.len(), v.dim());
    Vector {
        ty: v.ty.clone(),
        amps: v.amps.iter().zip(p).map(|(a, &w)| a * w).collect(),
    }
}

/// Rescale a value tree leafwise by a distribution over the same basis.
pub fn prob_scale_qval(ty: &QType, p: &[f64], v: &QVal) -> QVal {
    qval_bind(v, &|a| {
        QVal::scale(amp(p[cval_index(ty, a)], 0.0), QVal::Leaf(a.clone()))
    })
}

/// Render a value tree as a term, pruning zero weights, eliding unit
/// weights, and collapsing an all-zero tree to a zero literal.
pub fn qval_to_term(ty: &QType, v: &QVal, eps: f64) -> Term {
    prune(v, amp(1.0, 0.0), eps).unwrap_or_else(|| Term::Zero(ty.clone()))
}

fn prune(v: &QVal, k: Amplitude, eps: f64) -> Option<Term> {
    match v {
        QVal::Leaf(a) => {
            if k.norm() <= eps {
                None
            } else {
                let base = a.to_term();
                if (k - amp(1.0, 0.0)).norm() <= eps {
                    Some(base)
                } else {
                    Some(Term::scale(k, base))
                }
            }
        }
        QVal::Zero => None,
        QVal::Scale(c, inner) => prune(inner, k * c, eps),
        QVal::Sum(l, r) => match (prune(l, k, eps), prune(r, k, eps)) {
            (Some(a), Some(b)) => Some(Term::sup(a, b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        },
    }
}

/// Quote a matrix as an open term over `ctx`.
pub fn quote_open(ctx: &Context, ty: &QType, m: &LinMap, eps: f64) -> Term {
    debug_assert_eq!(m.in_ty, ctx.as_type());
    debug_assert_eq!(m.out_ty, *ty);

    // Replace each tensor-typed entry by two fresh entries at the same
    // slot, recording the pair-let that rebuilds the original variable.
    // The flat basis order is unchanged, so the columns carry over.
    let mut flat: Vec<(String, QType)> = ctx.iter().cloned().collect();
    let mut wrappers: Vec<(Pattern, Term)> = Vec::new();
    while let Some(slot) = flat
        .iter()
        .position(|(_, t)| matches!(t, QType::Tensor(_, _)))
    {
        let (name, ty_slot) = flat[slot].clone();
        let QType::Tensor(a, b) = ty_slot else {
            unreachable!()
        };
        let mut taken: std::collections::BTreeSet<String> =
            flat.iter().map(|(n, _)| n.clone()).collect();
        let left = fresh_name(&format!("{name}_l"), &taken);
        taken.insert(left.clone());
        let right = fresh_name(&format!("{name}_r"), &taken);
        wrappers.push((Pattern::Pair(left.clone(), right.clone()), Term::var(&name)));
        flat.splice(slot..=slot, [(left, (*a).clone()), (right, (*b).clone())]);
    }

    let body = quote_flat(&flat, ty, &m.cols, eps);
    wrappers
        .into_iter()
        .rev()
        .fold(body, |acc, (pat, bound)| Term::let_in(pat, bound, acc))
}

/// Quote the columns of a flat (unit or qubit entries only) context by
/// recursion on the last entry.  Unit entries are dropped; a qubit entry
/// cases on its variable with `qif`, the true specialisation in the then
/// branch, so the last entry's conditional is outermost.
fn quote_flat(flat: &[(String, QType)], ty: &QType, cols: &[Vector], eps: f64) -> Term {
    match flat.split_last() {
        None => {
            debug_assert_eq!(cols.len(), 1);
            qval_to_term(ty, &quote_quantum(ty, &cols[0], eps), eps)
        }
        Some(((_, QType::Unit), rest)) => quote_flat(rest, ty, cols, eps),
        Some(((name, QType::Qubit), rest)) => {
            // The last entry is the least significant digit: column
            // g*2 + b holds environment (g, b).
            let pick =
                |bit: usize| -> Vec<Vector> { cols.iter().skip(bit).step_by(2).cloned().collect() };
            let then_t = quote_flat(rest, ty, &pick(1), eps);
            let else_t = quote_flat(rest, ty, &pick(0), eps);
            Term::qif(Term::var(name), then_t, else_t)
        }
        Some(((_, QType::Tensor(_, _)), _)) => unreachable!("context was flattened"),
    }
}

/// Normal form by evaluation: evaluate, then quote the matrix back.
pub fn nf(ctx: &Context, t: &Term, eps: f64) -> Result<Term, TypeError> {
    let j = infer(ctx, t, false, eps)?;
    Ok(quote_open(ctx, &j.ty, &eval_quantum(&j), eps))
}

/// Classical normal form: evaluate to a table and quote its lift.
pub fn nf_classical(ctx: &Context, t: &Term, eps: f64) -> Result<Term, TypeError> {
    let j = infer_classical(ctx, t, eps)?;
    let table = eval_classical(&j);
    let m = LinMap::from_classical(j.context.as_type(), j.ty.clone(), &table);
    Ok(quote_open(ctx, &j.ty, &m, eps))
}

/// Are two terms observationally equivalent over `ctx`: do they denote
/// the same matrix within `eps` entrywise?  In debug builds the verdict
/// is cross-checked against structural equality of the two normal forms.
pub fn equiv(ctx: &Context, t: &Term, u: &Term, eps: f64) -> Result<bool, TypeError> {
    let jt = infer(ctx, t, false, eps)?;
    let ju = infer(ctx, u, false, eps)?;
    if jt.ty != ju.ty {
        return Err(TypeError {
            kind: TypeErrorKind::TypeMismatch {
                expected: jt.ty,
                found: ju.ty,
            },
            path: Vec::new(),
        });
    }
    let mt = eval_quantum(&jt);
    let mu = eval_quantum(&ju);
    let same = mt.approx_eq(&mu, eps);
    #[cfg(debug_assertions)]
    {
        let qt = quote_open(ctx, &jt.ty, &mt, eps);
        let qu = quote_open(ctx, &ju.ty, &mu, eps);
        debug_assert_eq!(
            same,
            term_approx_eq(&qt, &qu, eps),
            "matrix equality and normal forms disagree"
        );
    }
    Ok(same)
}

/// The sharing map as a term: over the merged context, the pair of the
/// two parts' identity tuples.
pub fn delta_hat(split: &crate::semantics::DeltaSplit) -> (Context, Term) {
    (
        split.merged.clone(),
        Term::pair(split.left.identity_term(), split.right.identity_term()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_context, parse_term_in};
    use crate::pretty::term_to_string;
    use crate::semantics::delta_split;

    const EPS: f64 = 1e-9;

    fn norm(ctx_src: &str, term_src: &str) -> String {
        let ctx = parse_context(ctx_src).unwrap();
        let t = parse_term_in(term_src, &ctx).unwrap();
        term_to_string(&nf(&ctx, &t, EPS).unwrap())
    }

    #[test]
    fn classical_leaves() {
        assert_eq!(norm("", "true"), "true");
        assert_eq!(norm("", "(false, ())"), "(false, ())");
        assert_eq!(norm("", "zero[Q2]"), "zero[Q2]");
    }

    #[test]
    fn bell_quote_orders_true_first() {
        let printed = norm(
            "",
            "let (c, x) = ({1/sqrt(2)}*false + {1/sqrt(2)}*true, false) in \
             qif c then (true, qif x then false else true) else (false, x)",
        );
        assert_eq!(
            printed,
            "{0.7071067811865475}*(true, true) + {0.7071067811865475}*(false, false)"
        );
    }

    #[test]
    fn identity_normalises_to_conditional() {
        assert_eq!(norm("x:Q2", "x"), "qif x then true else false");
    }

    #[test]
    fn double_negation_normalises_like_identity() {
        let src = "qif (qif x then false else true) then false else true";
        assert_eq!(norm("x:Q2", src), "qif x then true else false");
    }

    #[test]
    fn interference_sum_collapses_to_false() {
        let src = "{1/sqrt(2)}*({1/sqrt(2)}*false + {1/sqrt(2)}*true) \
                 + {1/sqrt(2)}*({1/sqrt(2)}*false + {-1/sqrt(2)}*true)";
        assert_eq!(norm("", src), "false");
    }

    #[test]
    fn tensor_context_flattens_to_pair_let() {
        let printed = norm("p:Q2*Q2", "p");
        assert_eq!(
            printed,
            "let (p_l, p_r) = p in \
             qif p_r then (qif p_l then (true, true) else (false, true)) \
             else (qif p_l then (true, false) else (false, false))"
        );
    }

    #[test]
    fn last_context_entry_is_cased_outermost() {
        let printed = norm("x:Q2, y:Q2", "(x, y)");
        assert!(printed.starts_with("qif y then"), "got {printed}");
    }

    #[test]
    fn unit_entries_are_skipped() {
        assert_eq!(norm("u:Q1", "true"), "true");
        assert_eq!(norm("u:Q1, x:Q2", "x"), "qif x then true else false");
    }

    #[test]
    fn quote_classical_examples() {
        let ty = QType::tensor(QType::Qubit, QType::tensor(QType::Unit, QType::Qubit));
        assert_eq!(
            term_to_string(&quote_classical(&ty, 3)),
            "(true, ((), true))"
        );
        assert_eq!(
            term_to_string(&quote_classical(&ty, 0)),
            "(false, ((), false))"
        );
    }

    #[test]
    fn fst_dist_and_pinv() {
        let ty = QType::tensor(QType::Qubit, QType::Qubit);
        let r = 1.0 / 2f64.sqrt();
        let v = Vector {
            ty,
            amps: vec![amp(r, 0.0), amp(0.0, 0.0), amp(0.0, 0.0), amp(r, 0.0)],
        };
        let d = fst_dist(&v);
        assert!((d[0] - r).abs() < 1e-12 && (d[1] - r).abs() < 1e-12);
        let inv = pinv(&d, EPS);
        assert!((inv[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(pinv(&[0.0, 1.0], EPS)[0], 0.0);
    }

    #[test]
    fn zero_vector_quotes_to_zero_literal() {
        let ty = QType::tensor(QType::Qubit, QType::Qubit);
        let q = quote_quantum(&ty, &Vector::zero(ty.clone()), EPS);
        assert_eq!(term_to_string(&qval_to_term(&ty, &q, EPS)), "zero[Q2*Q2]");
    }

    #[test]
    fn nf_is_idempotent_on_samples() {
        let cases = [
            (
                "x:Q2",
                "qif x then {1/sqrt(2)}*false + {-1/sqrt(2)}*true \
                           else {1/sqrt(2)}*false + {1/sqrt(2)}*true",
            ),
            ("", "let x = {1/sqrt(2)}*false + {1/sqrt(2)}*true in (x, x)"),
            ("p:Q2*Q2", "let (a, b) = p in (b, a)"),
        ];
        for (ctx_src, src) in cases {
            let ctx = parse_context(ctx_src).unwrap();
            let t = parse_term_in(src, &ctx).unwrap();
            let once = nf(&ctx, &t, EPS).unwrap();
            let twice = nf(&ctx, &once, EPS).unwrap();
            assert_eq!(once, twice, "nf not idempotent on {src}");
        }
    }

    #[test]
    fn nf_classical_agrees_with_nf() {
        let ctx = parse_context("x:Q2, y:Q2").unwrap();
        let t = parse_term_in("qif x then (y, true) else (y, false)", &ctx).unwrap();
        let a = nf(&ctx, &t, EPS).unwrap();
        let b = nf_classical(&ctx, &t, EPS).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equiv_decides_hadamard_involution() {
        let ctx = parse_context("x:Q2").unwrap();
        let had = "qif x then {1/sqrt(2)}*false + {-1/sqrt(2)}*true \
                        else {1/sqrt(2)}*false + {1/sqrt(2)}*true";
        let hh = format!(
            "let y = {had} in qif y then {{1/sqrt(2)}}*false + {{-1/sqrt(2)}}*true \
                                   else {{1/sqrt(2)}}*false + {{1/sqrt(2)}}*true"
        );
        let t = parse_term_in(&hh, &ctx).unwrap();
        let x = parse_term_in("x", &ctx).unwrap();
        assert!(equiv(&ctx, &t, &x, EPS).unwrap());
        let single = parse_term_in(had, &ctx).unwrap();
        assert!(!equiv(&ctx, &single, &x, EPS).unwrap());
    }

    #[test]
    fn equiv_rejects_type_mismatch() {
        let ctx = Context::empty();
        let t = parse_term_in("true", &ctx).unwrap();
        let u = parse_term_in("()", &ctx).unwrap();
        assert!(equiv(&ctx, &t, &u, EPS).is_err());
    }

    #[test]
    fn prob_scale_variants_agree() {
        let ty = QType::Qubit;
        let v = Vector {
            ty: ty.clone(),
            amps: vec![amp(0.6, 0.0), amp(0.0, 0.8)],
        };
        let p = [2.0, 0.5];
        let scaled = prob_scale(&p, &v);
        let via_tree = prob_scale_qval(&ty, &p, &quote_quantum(&ty, &v, EPS));
        let direct = quote_quantum(&ty, &scaled, EPS);
        let a = qval_to_term(&ty, &via_tree, 0.0);
        let b = qval_to_term(&ty, &direct, 0.0);
        assert!(term_approx_eq(&a, &b, 1e-12), "{a} vs {b}");
    }

    #[test]
    fn delta_hat_shape() {
        let left = parse_context("x:Q2").unwrap();
        let split = delta_split(&left, &left).unwrap();
        let (merged, term) = delta_hat(&split);
        assert_eq!(merged, left);
        // Each side is the context's identity term, unit seed included.
        assert_eq!(term_to_string(&term), "(((), x), ((), x))");
    }
}
