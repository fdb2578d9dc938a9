//! The linear type system: the plain judgement `ctx ⊢ t : ty` and the
//! strict judgement `ctx ⊢° t : ty` under which every program denotes an
//! isometry, together with the syntactic inner product and orthogonality
//! test the strict rules rely on.
//!
//! Linearity is enforced by splitting contexts along free-variable
//! occurrence: a variable used on both sides of a split is shared
//! (contraction by sharing), and only variables of type `Q1` may be
//! dropped.  Strict mode additionally analyses each maximal layer of
//! sums, scalings and zero literals as one superposition: structurally
//! identical summands are merged by adding their coefficients, summands
//! whose merged coefficient vanishes are exempt from the side conditions,
//! the remaining distinct summands must be pairwise orthogonal, and the
//! squared coefficients must total one.

use std::collections::BTreeSet;
use std::fmt;

use crate::normalizer::nf;
use crate::syntax::{amp, Amplitude, Context, Pattern, QType, Term};

/// A derived typing statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgement {
    pub context: Context,
    pub term: Term,
    pub ty: QType,
    /// Whether this is the strict judgement (isometry discipline).
    pub strict: bool,
    /// Variables of the context consumed by the term; every context
    /// variable is either here or of type `Q1`.
    pub used: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TypeErrorKind {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is unused; discarding non-Q1 data is not allowed")]
    UnusedVariable(String),
    #[error("`{0}` is already in scope and may not be shadowed")]
    Shadowing(String),
    #[error("expected type {expected}, found {found}")]
    TypeMismatch { expected: QType, found: QType },
    #[error("pattern `{pattern}` does not fit type {found}")]
    PatternShape { pattern: Pattern, found: QType },
    #[error("summands are not orthogonal: `{left}` vs `{right}`")]
    NotOrthogonal { left: Box<Term>, right: Box<Term> },
    #[error("superposition has squared norm {0}, expected 1")]
    NotNormalised(f64),
    #[error("term is not classical")]
    NotClassical,
    #[error("path does not address a subterm")]
    NoSuchSubterm,
}

/// A type error located by the path of child indices from the checked
/// term's root to the offending node.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub path: Vec<usize>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.path.is_empty() {
            let dotted: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
            write!(f, " (at subterm {})", dotted.join("."))?;
        }
        Ok(())
    }
}

impl std::error::Error for TypeError {}

fn err(kind: TypeErrorKind) -> TypeError {
    TypeError {
        kind,
        path: Vec::new(),
    }
}

fn prefixed(mut e: TypeError, i: usize) -> TypeError {
    e.path.insert(0, i);
    e
}

fn prefixed_path(mut e: TypeError, path: &[usize]) -> TypeError {
    let mut p = path.to_vec();
    p.extend(e.path);
    e.path = p;
    e
}

/// Result of the syntactic inner product ⟨t|u⟩: a definite complex value
/// or no verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IpResult {
    Known(Amplitude),
    Unknown,
}

/// Derive the typing judgement for `t` in `ctx`; `strict` selects the
/// isometry discipline, `eps` the numeric tolerance of its side
/// conditions.
pub fn infer(ctx: &Context, t: &Term, strict: bool, eps: f64) -> Result<Judgement, TypeError> {
    let (ty, used) = check(ctx, t, strict, eps)?;
    Ok(Judgement {
        context: ctx.clone(),
        term: t.clone(),
        ty,
        strict,
        used,
    })
}

/// Like [`infer`] but restricted to the classical fragment: any zero,
/// scaling or sum anywhere in the term is rejected.
pub fn infer_classical(ctx: &Context, t: &Term, eps: f64) -> Result<Judgement, TypeError> {
    if !t.is_classical() {
        return Err(err(TypeErrorKind::NotClassical));
    }
    infer(ctx, t, false, eps)
}

/// Split `ctx` between a left use set and a right use set.  Shared
/// variables go to both sides; a variable in neither set is dropped when
/// its type is `Q1` and rejected otherwise.
pub fn context_split(
    ctx: &Context,
    left: &BTreeSet<String>,
    right: &BTreeSet<String>,
) -> Result<(Context, Context), TypeError> {
    let mut l = Context::empty();
    let mut r = Context::empty();
    for (name, ty) in ctx.iter() {
        let in_l = left.contains(name);
        let in_r = right.contains(name);
        if in_l {
            l.push(name.clone(), ty.clone());
        }
        if in_r {
            r.push(name.clone(), ty.clone());
        }
        if !in_l && !in_r && *ty != QType::Unit {
            return Err(err(TypeErrorKind::UnusedVariable(name.clone())));
        }
    }
    Ok((l, r))
}

fn all_q1_residual(ctx: &Context, used: &BTreeSet<String>) -> Result<(), TypeError> {
    for (name, ty) in ctx.iter() {
        if *ty != QType::Unit && !used.contains(name) {
            return Err(err(TypeErrorKind::UnusedVariable(name.clone())));
        }
    }
    Ok(())
}

fn is_layer_node(t: &Term) -> bool {
    matches!(t, Term::Sup(_, _) | Term::Scale(_, _) | Term::Zero(_))
}

fn check(
    ctx: &Context,
    t: &Term,
    strict: bool,
    eps: f64,
) -> Result<(QType, BTreeSet<String>), TypeError> {
    if strict && is_layer_node(t) {
        return check_layer(ctx, t, eps);
    }
    match t {
        Term::Var(x) => {
            let ty = ctx
                .lookup(x)
                .ok_or_else(|| err(TypeErrorKind::UnknownVariable(x.clone())))?
                .clone();
            let used: BTreeSet<String> = [x.clone()].into();
            all_q1_residual(ctx, &used)?;
            Ok((ty, used))
        }
        Term::Unit => {
            let used = BTreeSet::new();
            all_q1_residual(ctx, &used)?;
            Ok((QType::Unit, used))
        }
        Term::False | Term::True => {
            let used = BTreeSet::new();
            all_q1_residual(ctx, &used)?;
            Ok((QType::Qubit, used))
        }
        Term::Zero(ty) => {
            let used = BTreeSet::new();
            all_q1_residual(ctx, &used)?;
            Ok((ty.clone(), used))
        }
        Term::Pair(a, b) => {
            let (ctx_a, ctx_b) = context_split(ctx, &a.free_vars(), &b.free_vars())?;
            let (ty_a, used_a) = check(&ctx_a, a, strict, eps).map_err(|e| prefixed(e, 0))?;
            let (ty_b, used_b) = check(&ctx_b, b, strict, eps).map_err(|e| prefixed(e, 1))?;
            let mut used = used_a;
            used.extend(used_b);
            Ok((QType::tensor(ty_a, ty_b), used))
        }
        Term::Let(pat, bound, body) => {
            let pat_names = pat.names();
            for n in &pat_names {
                if ctx.contains(n) {
                    return Err(err(TypeErrorKind::Shadowing(n.to_string())));
                }
            }
            if let Pattern::Pair(x, y) = pat {
                if x == y {
                    return Err(err(TypeErrorKind::Shadowing(y.clone())));
                }
            }
            let bound_free = bound.free_vars();
            let mut body_free = body.free_vars();
            for n in &pat_names {
                body_free.remove(*n);
            }
            let (ctx_bound, mut ctx_body) = context_split(ctx, &bound_free, &body_free)?;
            let (ty_bound, used_bound) =
                check(&ctx_bound, bound, strict, eps).map_err(|e| prefixed(e, 0))?;
            match pat {
                Pattern::Var(x) => ctx_body.push(x.clone(), ty_bound),
                Pattern::Pair(x, y) => match ty_bound {
                    QType::Tensor(a, b) => {
                        ctx_body.push(x.clone(), *a);
                        ctx_body.push(y.clone(), *b);
                    }
                    found => {
                        return Err(prefixed(
                            err(TypeErrorKind::PatternShape {
                                pattern: pat.clone(),
                                found,
                            }),
                            0,
                        ));
                    }
                },
            }
            let (ty, used_body) =
                check(&ctx_body, body, strict, eps).map_err(|e| prefixed(e, 1))?;
            let mut used = used_bound;
            used.extend(
                used_body
                    .into_iter()
                    .filter(|n| !pat_names.contains(&n.as_str())),
            );
            Ok((ty, used))
        }
        Term::IfQ(cond, then_t, else_t) => {
            let mut branch_free = then_t.free_vars();
            branch_free.extend(else_t.free_vars());
            let (ctx_c, ctx_b) = context_split(ctx, &cond.free_vars(), &branch_free)?;
            let (ty_c, used_c) = check(&ctx_c, cond, strict, eps).map_err(|e| prefixed(e, 0))?;
            if ty_c != QType::Qubit {
                return Err(prefixed(
                    err(TypeErrorKind::TypeMismatch {
                        expected: QType::Qubit,
                        found: ty_c,
                    }),
                    0,
                ));
            }
            let (ty_1, used_1) = check(&ctx_b, then_t, strict, eps).map_err(|e| prefixed(e, 1))?;
            let (ty_0, used_0) = check(&ctx_b, else_t, strict, eps).map_err(|e| prefixed(e, 2))?;
            if ty_1 != ty_0 {
                return Err(prefixed(
                    err(TypeErrorKind::TypeMismatch {
                        expected: ty_1,
                        found: ty_0,
                    }),
                    2,
                ));
            }
            if strict && !orthogonal(&ctx_b, then_t, else_t, eps) {
                return Err(err(TypeErrorKind::NotOrthogonal {
                    left: Box::new((**then_t).clone()),
                    right: Box::new((**else_t).clone()),
                }));
            }
            let mut used = used_c;
            used.extend(used_1);
            used.extend(used_0);
            Ok((ty_1, used))
        }
        // Non-strict mode: zeros, scalings and sums carry no side
        // conditions beyond types and linearity.
        Term::Scale(_, a) => check(ctx, a, strict, eps).map_err(|e| prefixed(e, 0)),
        Term::Sup(a, b) => {
            let (ty_a, used_a) = check(ctx, a, strict, eps).map_err(|e| prefixed(e, 0))?;
            let (ty_b, used_b) = check(ctx, b, strict, eps).map_err(|e| prefixed(e, 1))?;
            if ty_a != ty_b {
                return Err(prefixed(
                    err(TypeErrorKind::TypeMismatch {
                        expected: ty_a,
                        found: ty_b,
                    }),
                    1,
                ));
            }
            let mut used = used_a;
            used.extend(used_b);
            Ok((ty_a, used))
        }
    }
}

struct LayerLeaf<'a> {
    coeff: Amplitude,
    core: &'a Term,
    path: Vec<usize>,
}

struct LayerGroup<'a> {
    total: Amplitude,
    core: &'a Term,
    path: Vec<usize>,
}

fn flatten_layer<'a>(
    t: &'a Term,
    coeff: Amplitude,
    path: Vec<usize>,
    leaves: &mut Vec<LayerLeaf<'a>>,
    zeros: &mut Vec<(&'a QType, Vec<usize>)>,
) {
    match t {
        Term::Sup(a, b) => {
            let mut pa = path.clone();
            pa.push(0);
            flatten_layer(a, coeff, pa, leaves, zeros);
            let mut pb = path;
            pb.push(1);
            flatten_layer(b, coeff, pb, leaves, zeros);
        }
        Term::Scale(k, a) => {
            let mut pa = path;
            pa.push(0);
            flatten_layer(a, coeff * k, pa, leaves, zeros);
        }
        Term::Zero(ty) => zeros.push((ty, path)),
        core => leaves.push(LayerLeaf { coeff, core, path }),
    }
}

/// Strict check of one maximal sum/scale/zero layer, viewed as a single
/// superposition of its non-layer cores.
fn check_layer(ctx: &Context, t: &Term, eps: f64) -> Result<(QType, BTreeSet<String>), TypeError> {
    let mut leaves = Vec::new();
    let mut zeros = Vec::new();
    flatten_layer(t, amp(1.0, 0.0), Vec::new(), &mut leaves, &mut zeros);

    let mut groups: Vec<LayerGroup> = Vec::new();
    for leaf in &leaves {
        match groups.iter_mut().find(|g| g.core == leaf.core) {
            Some(g) => g.total += leaf.coeff,
            None => groups.push(LayerGroup {
                total: leaf.coeff,
                core: leaf.core,
                path: leaf.path.clone(),
            }),
        }
    }

    let mut ty: Option<QType> = None;
    let mut used = BTreeSet::new();
    for g in &groups {
        // Summands that cancel exactly are exempt from the strict side
        // conditions; they still must be well-typed and linear.
        let core_strict = g.total.norm() > eps;
        let (cty, cused) =
            check(ctx, g.core, core_strict, eps).map_err(|e| prefixed_path(e, &g.path))?;
        match &ty {
            None => ty = Some(cty),
            Some(t0) if *t0 != cty => {
                return Err(prefixed_path(
                    err(TypeErrorKind::TypeMismatch {
                        expected: t0.clone(),
                        found: cty,
                    }),
                    &g.path,
                ));
            }
            Some(_) => {}
        }
        used.extend(cused);
    }
    for (zty, zpath) in &zeros {
        match &ty {
            None => ty = Some((*zty).clone()),
            Some(t0) if t0 != *zty => {
                return Err(prefixed_path(
                    err(TypeErrorKind::TypeMismatch {
                        expected: t0.clone(),
                        found: (*zty).clone(),
                    }),
                    zpath,
                ));
            }
            Some(_) => {}
        }
    }
    let ty = ty.expect("a layer contains at least one summand or zero literal");

    let nonzero: Vec<&LayerGroup> = groups.iter().filter(|g| g.total.norm() > eps).collect();
    for i in 0..nonzero.len() {
        for j in i + 1..nonzero.len() {
            if !orthogonal(ctx, nonzero[i].core, nonzero[j].core, eps) {
                return Err(err(TypeErrorKind::NotOrthogonal {
                    left: Box::new(nonzero[i].core.clone()),
                    right: Box::new(nonzero[j].core.clone()),
                }));
            }
        }
    }
    let norm2: f64 = nonzero.iter().map(|g| g.total.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > eps {
        return Err(err(TypeErrorKind::NotNormalised(norm2)));
    }
    Ok((ty, used))
}

/// Syntactic inner product of two terms.
///
/// Clauses, in order: a zero literal on either side gives 0; scalings are
/// conjugate-linear on the left and linear on the right; sums are additive
/// on both sides; syntactically identical terms give 1; `false`/`true`
/// cross gives 0; pairs multiply componentwise (with an exact-zero
/// shortcut, so one orthogonal component settles the pair even when the
/// other has no verdict); anything else is unknown.
pub fn inner_product(t: &Term, u: &Term) -> IpResult {
    use IpResult::{Known, Unknown};
    if t.is_zero_literal() || u.is_zero_literal() {
        return Known(amp(0.0, 0.0));
    }
    if let Term::Scale(k, t1) = t {
        return match inner_product(t1, u) {
            Known(z) => Known(k.conj() * z),
            Unknown => Unknown,
        };
    }
    if let Term::Scale(k, u1) = u {
        return match inner_product(t, u1) {
            Known(z) => Known(k * z),
            Unknown => Unknown,
        };
    }
    if let Term::Sup(a, b) = t {
        return match (inner_product(a, u), inner_product(b, u)) {
            (Known(x), Known(y)) => Known(x + y),
            _ => Unknown,
        };
    }
    if let Term::Sup(a, b) = u {
        return match (inner_product(t, a), inner_product(t, b)) {
            (Known(x), Known(y)) => Known(x + y),
            _ => Unknown,
        };
    }
    if t == u {
        return Known(amp(1.0, 0.0));
    }
    match (t, u) {
        (Term::False, Term::True) | (Term::True, Term::False) => Known(amp(0.0, 0.0)),
        (Term::Pair(a, b), Term::Pair(c, d)) => {
            let fst = inner_product(a, c);
            if matches!(fst, Known(z) if z.norm() == 0.0) {
                return Known(amp(0.0, 0.0));
            }
            let snd = inner_product(b, d);
            if matches!(snd, Known(z) if z.norm() == 0.0) {
                return Known(amp(0.0, 0.0));
            }
            match (fst, snd) {
                (Known(x), Known(y)) => Known(x * y),
                _ => Unknown,
            }
        }
        _ => Unknown,
    }
}

/// Does `⟨t|u⟩ = 0` hold within `eps`?  When the direct syntactic check
/// yields no zero, both terms are normalised once and the check is
/// retried on the normal forms.
pub fn orthogonal(ctx: &Context, t: &Term, u: &Term, eps: f64) -> bool {
    if let IpResult::Known(z) = inner_product(t, u) {
        if z.norm() <= eps {
            return true;
        }
    }
    let (Ok(nt), Ok(nu)) = (nf(ctx, t, eps), nf(ctx, u, eps)) else {
        return false;
    };
    matches!(inner_product(&nt, &nu), IpResult::Known(z) if z.norm() <= eps)
}

/// The local context and type of the subterm of `t` addressed by `path`,
/// derived by replaying the context splits of the typing rules.
pub fn judgement_at(
    ctx: &Context,
    t: &Term,
    path: &[usize],
    eps: f64,
) -> Result<(Context, QType), TypeError> {
    let Some((&i, rest)) = path.split_first() else {
        let j = infer(ctx, t, false, eps)?;
        return Ok((ctx.clone(), j.ty));
    };
    let step = |sub_ctx: Context, sub: &Term| -> Result<(Context, QType), TypeError> {
        judgement_at(&sub_ctx, sub, rest, eps).map_err(|e| prefixed(e, i))
    };
    match (t, i) {
        (Term::Pair(a, b), 0 | 1) => {
            let (ctx_a, ctx_b) = context_split(ctx, &a.free_vars(), &b.free_vars())?;
            if i == 0 {
                step(ctx_a, a)
            } else {
                step(ctx_b, b)
            }
        }
        (Term::Let(pat, bound, body), 0 | 1) => {
            let bound_free = bound.free_vars();
            let mut body_free = body.free_vars();
            for n in pat.names() {
                body_free.remove(n);
            }
            let (ctx_bound, mut ctx_body) = context_split(ctx, &bound_free, &body_free)?;
            if i == 0 {
                return step(ctx_bound, bound);
            }
            let jb = infer(&ctx_bound, bound, false, eps).map_err(|e| prefixed(e, 0))?;
            match pat {
                Pattern::Var(x) => ctx_body.push(x.clone(), jb.ty),
                Pattern::Pair(x, y) => match jb.ty {
                    QType::Tensor(a, b) => {
                        ctx_body.push(x.clone(), *a);
                        ctx_body.push(y.clone(), *b);
                    }
                    found => {
                        return Err(prefixed(
                            err(TypeErrorKind::PatternShape {
                                pattern: pat.clone(),
                                found,
                            }),
                            0,
                        ));
                    }
                },
            }
            step(ctx_body, body)
        }
        (Term::IfQ(cond, then_t, else_t), 0..=2) => {
            let mut branch_free = then_t.free_vars();
            branch_free.extend(else_t.free_vars());
            let (ctx_c, ctx_b) = context_split(ctx, &cond.free_vars(), &branch_free)?;
            match i {
                0 => step(ctx_c, cond),
                1 => step(ctx_b, then_t),
                _ => step(ctx_b, else_t),
            }
        }
        (Term::Scale(_, a), 0) => step(ctx.clone(), a),
        (Term::Sup(a, b), 0 | 1) => step(ctx.clone(), if i == 0 { a } else { b }),
        _ => Err(err(TypeErrorKind::NoSuchSubterm)),
    }
}
