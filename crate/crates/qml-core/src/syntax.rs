//! Core syntax: types, contexts, terms, values, and the structural
//! operations (context merging, substitution, term paths) shared by the
//! type checker, evaluator and normaliser.
//!
//! Contexts are ordered sequences of distinct variable names.  Variable
//! identity is by exact string name; binders never shadow anything in
//! scope (the parser rejects shadowing, and the type checker re-checks).

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// A complex amplitude.  Finiteness of both components is an invariant:
/// the parser validates every literal and no internal operation divides
/// by an unguarded zero.
pub type Amplitude = Complex64;

/// Shorthand constructor for amplitudes.
pub fn amp(re: f64, im: f64) -> Amplitude {
    Complex64::new(re, im)
}

/// `|a - b| <= eps` on complex numbers.
pub fn amp_approx_eq(a: Amplitude, b: Amplitude, eps: f64) -> bool {
    (a - b).norm() <= eps
}

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// The types of QML: the unit type `Q1`, the qubit type `Q2`, and tensor
/// products.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QType {
    Unit,
    Qubit,
    Tensor(Box<QType>, Box<QType>),
}

impl QType {
    pub fn tensor(a: QType, b: QType) -> QType {
        QType::Tensor(Box::new(a), Box::new(b))
    }

    /// Number of classical basis elements.
    pub fn dim(&self) -> usize {
        match self {
            QType::Unit => 1,
            QType::Qubit => 2,
            QType::Tensor(a, b) => a.dim() * b.dim(),
        }
    }
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QType::Unit => write!(f, "Q1"),
            QType::Qubit => write!(f, "Q2"),
            QType::Tensor(a, b) => {
                // `*` is left-associative, so only the right child needs parens.
                write!(f, "{a}*")?;
                match **b {
                    QType::Tensor(_, _) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Contexts
// ---------------------------------------------------------------------------

/// An ordered typing context with unique variable names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Context(Vec<(String, QType)>);

/// A variable occurred with two different types while merging contexts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("variable `{0}` is used at two different types")]
pub struct TypeClash(pub String);

/// For each slot of a merged context, which operand(s) the variable feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotUse {
    Left,
    Right,
    Both,
}

/// Result of [`merge_contexts`]: the merged context plus a sharing
/// descriptor aligned with its slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergePlan {
    pub context: Context,
    pub uses: Vec<SlotUse>,
}

impl Context {
    pub fn empty() -> Context {
        Context(Vec::new())
    }

    /// Build a context, rejecting duplicate names.
    pub fn from_pairs<I>(pairs: I) -> Result<Context, TypeClash>
    where
        I: IntoIterator<Item = (String, QType)>,
    {
        let mut ctx = Context::empty();
        for (name, ty) in pairs {
            if ctx.lookup(&name).is_some() {
                return Err(TypeClash(name));
            }
            ctx.0.push((name, ty));
        }
        Ok(ctx)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, QType)> {
        self.0.iter()
    }

    pub fn entries(&self) -> &[(String, QType)] {
        &self.0
    }

    pub fn lookup(&self, name: &str) -> Option<&QType> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.0.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Append an entry.  The caller guarantees freshness; debug builds check.
    pub fn push(&mut self, name: String, ty: QType) {
        debug_assert!(!self.contains(&name), "duplicate context entry {name}");
        self.0.push((name, ty));
    }

    pub fn remove(&self, name: &str) -> Context {
        Context(self.0.iter().filter(|(n, _)| n != name).cloned().collect())
    }

    /// The context viewed as a single type: a left-nested tensor starting
    /// from `Q1`, so the empty context has dimension 1.
    pub fn as_type(&self) -> QType {
        self.0
            .iter()
            .fold(QType::Unit, |acc, (_, ty)| QType::tensor(acc, ty.clone()))
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|(_, ty)| ty.dim()).product()
    }

    /// The canonical term of type `as_type()` that repackages the context's
    /// variables as a left-nested tuple.
    pub fn identity_term(&self) -> Term {
        self.0.iter().fold(Term::Unit, |acc, (name, _)| {
            Term::pair(acc, Term::Var(name.clone()))
        })
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, ty) in &self.0 {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{name}:{ty}")?;
            first = false;
        }
        Ok(())
    }
}

/// Merge two contexts that may share variables (the variables shared by
/// subterms under contraction).  A shared name must carry the same type in
/// both operands.  Slots only in the right operand come first, then the
/// left operand's slots in order, mirroring the recursion
/// `(G,x) (*) D = (G (*) (D - x)), x`.
pub fn merge_contexts(left: &Context, right: &Context) -> Result<MergePlan, TypeClash> {
    fn go(left: &[(String, QType)], right: &Context) -> Result<MergePlan, TypeClash> {
        match left.split_last() {
            None => Ok(MergePlan {
                uses: vec![SlotUse::Right; right.len()],
                context: right.clone(),
            }),
            Some(((name, ty), rest)) => {
                let (rem, slot) = match right.lookup(name) {
                    Some(other) if other == ty => (right.remove(name), SlotUse::Both),
                    Some(_) => return Err(TypeClash(name.clone())),
                    None => (right.clone(), SlotUse::Left),
                };
                let mut plan = go(rest, &rem)?;
                plan.context.push(name.clone(), ty.clone());
                plan.uses.push(slot);
                Ok(plan)
            }
        }
    }
    go(left.entries(), right)
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

/// Let-binder shapes: a single variable or a pair of distinct variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Var(String),
    Pair(String, String),
}

impl Pattern {
    pub fn binds(&self, name: &str) -> bool {
        match self {
            Pattern::Var(x) => x == name,
            Pattern::Pair(x, y) => x == name || y == name,
        }
    }

    pub fn names(&self) -> Vec<&str> {
        match self {
            Pattern::Var(x) => vec![x],
            Pattern::Pair(x, y) => vec![x, y],
        }
    }
}

/// Terms of QML.  `IfQ` is the quantum conditional `qif`, `Zero` the
/// annotated null vector, `Scale` multiplication by a complex amplitude
/// and `Sup` the superposition sum.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Unit,
    Pair(Box<Term>, Box<Term>),
    Let(Pattern, Box<Term>, Box<Term>),
    IfQ(Box<Term>, Box<Term>, Box<Term>),
    False,
    True,
    Zero(QType),
    Scale(Amplitude, Box<Term>),
    Sup(Box<Term>, Box<Term>),
}

impl Term {
    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn let_in(pat: Pattern, bound: Term, body: Term) -> Term {
        Term::Let(pat, Box::new(bound), Box::new(body))
    }

    pub fn qif(cond: Term, then: Term, els: Term) -> Term {
        Term::IfQ(Box::new(cond), Box::new(then), Box::new(els))
    }

    pub fn scale(k: Amplitude, t: Term) -> Term {
        Term::Scale(k, Box::new(t))
    }

    pub fn sup(a: Term, b: Term) -> Term {
        Term::Sup(Box::new(a), Box::new(b))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    /// Free variables, in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Var(x) => {
                    out.insert(x.clone());
                }
                Term::Unit | Term::False | Term::True | Term::Zero(_) => {}
                Term::Pair(a, b) | Term::Sup(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Term::Scale(_, a) => go(a, out),
                Term::IfQ(c, t1, t0) => {
                    go(c, out);
                    go(t1, out);
                    go(t0, out);
                }
                Term::Let(pat, bound, body) => {
                    go(bound, out);
                    let mut inner = BTreeSet::new();
                    go(body, &mut inner);
                    for n in pat.names() {
                        inner.remove(n);
                    }
                    out.extend(inner);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// All binder names occurring anywhere in the term.
    pub fn binder_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Let(pat, _, _) = t {
                for n in pat.names() {
                    out.insert(n.to_string());
                }
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        for i in 0..child_count(self) {
            child(self, i).unwrap().visit(f);
        }
    }

    /// Does the term avoid every quantum construct (`Zero`, `Scale`, `Sup`)?
    pub fn is_classical(&self) -> bool {
        match self {
            Term::Zero(_) | Term::Scale(_, _) | Term::Sup(_, _) => false,
            _ => (0..child_count(self)).all(|i| child(self, i).unwrap().is_classical()),
        }
    }

    /// View the term as a classical value, if it is one.
    pub fn as_cval(&self) -> Option<CVal> {
        match self {
            Term::Var(x) => Some(CVal::Var(x.clone())),
            Term::Unit => Some(CVal::Unit),
            Term::False => Some(CVal::False),
            Term::True => Some(CVal::True),
            Term::Pair(a, b) => Some(CVal::pair(a.as_cval()?, b.as_cval()?)),
            _ => None,
        }
    }

    /// Is the term a (possibly scaled or summed) literal null vector?
    pub fn is_zero_literal(&self) -> bool {
        match self {
            Term::Zero(_) => true,
            Term::Scale(_, t) => t.is_zero_literal(),
            Term::Sup(a, b) => a.is_zero_literal() && b.is_zero_literal(),
            _ => false,
        }
    }
}

/// Structural equality up to `eps` on amplitudes.
pub fn term_approx_eq(a: &Term, b: &Term, eps: f64) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => x == y,
        (Term::Unit, Term::Unit) | (Term::False, Term::False) | (Term::True, Term::True) => true,
        (Term::Zero(s), Term::Zero(t)) => s == t,
        (Term::Pair(a1, a2), Term::Pair(b1, b2)) | (Term::Sup(a1, a2), Term::Sup(b1, b2)) => {
            term_approx_eq(a1, b1, eps) && term_approx_eq(a2, b2, eps)
        }
        (Term::Scale(k, a1), Term::Scale(l, b1)) => {
            amp_approx_eq(*k, *l, eps) && term_approx_eq(a1, b1, eps)
        }
        (Term::Let(p, a1, a2), Term::Let(q, b1, b2)) => {
            p == q && term_approx_eq(a1, b1, eps) && term_approx_eq(a2, b2, eps)
        }
        (Term::IfQ(c1, t1, e1), Term::IfQ(c2, t2, e2)) => {
            term_approx_eq(c1, c2, eps)
                && term_approx_eq(t1, t2, eps)
                && term_approx_eq(e1, e2, eps)
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Term paths
// ---------------------------------------------------------------------------
//
// Child index convention: Pair/Sup 0,1; Let 0=bound,1=body; IfQ 0=cond,
// 1=then, 2=else; Scale 0.  Paths are sequences of child indices.

pub fn child_count(t: &Term) -> usize {
    match t {
        Term::Var(_) | Term::Unit | Term::False | Term::True | Term::Zero(_) => 0,
        Term::Scale(_, _) => 1,
        Term::Pair(_, _) | Term::Sup(_, _) | Term::Let(_, _, _) => 2,
        Term::IfQ(_, _, _) => 3,
    }
}

pub fn child(t: &Term, i: usize) -> Option<&Term> {
    match (t, i) {
        (Term::Pair(a, _), 0) | (Term::Sup(a, _), 0) | (Term::Let(_, a, _), 0) => Some(a),
        (Term::Pair(_, b), 1) | (Term::Sup(_, b), 1) | (Term::Let(_, _, b), 1) => Some(b),
        (Term::IfQ(c, _, _), 0) => Some(c),
        (Term::IfQ(_, t1, _), 1) => Some(t1),
        (Term::IfQ(_, _, t0), 2) => Some(t0),
        (Term::Scale(_, a), 0) => Some(a),
        _ => None,
    }
}

pub fn subterm_at<'a>(t: &'a Term, path: &[usize]) -> Option<&'a Term> {
    let mut cur = t;
    for &i in path {
        cur = child(cur, i)?;
    }
    Some(cur)
}

/// Rebuild `t` with the subterm at `path` replaced.
pub fn replace_at(t: &Term, path: &[usize], new: Term) -> Option<Term> {
    match path.split_first() {
        None => Some(new),
        Some((&i, rest)) => {
            let sub = replace_at(child(t, i)?, rest, new)?;
            let mut out = t.clone();
            match (&mut out, i) {
                (Term::Pair(a, _), 0) | (Term::Sup(a, _), 0) | (Term::Let(_, a, _), 0) => **a = sub,
                (Term::Pair(_, b), 1) | (Term::Sup(_, b), 1) | (Term::Let(_, _, b), 1) => **b = sub,
                (Term::IfQ(c, _, _), 0) => **c = sub,
                (Term::IfQ(_, t1, _), 1) => **t1 = sub,
                (Term::IfQ(_, _, t0), 2) => **t0 = sub,
                (Term::Scale(_, a), 0) => **a = sub,
                _ => return None,
            }
            Some(out)
        }
    }
}

/// Every path into `t`, in pre-order (root first).
pub fn all_paths(t: &Term) -> Vec<Vec<usize>> {
    fn go(t: &Term, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        for i in 0..child_count(t) {
            cur.push(i);
            go(child(t, i).unwrap(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(t, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

/// Classical values: what classical evaluation returns and what quantum
/// value trees carry at their leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CVal {
    Var(String),
    Unit,
    False,
    True,
    Pair(Box<CVal>, Box<CVal>),
}

impl CVal {
    pub fn pair(a: CVal, b: CVal) -> CVal {
        CVal::Pair(Box::new(a), Box::new(b))
    }

    pub fn to_term(&self) -> Term {
        match self {
            CVal::Var(x) => Term::Var(x.clone()),
            CVal::Unit => Term::Unit,
            CVal::False => Term::False,
            CVal::True => Term::True,
            CVal::Pair(a, b) => Term::pair(a.to_term(), b.to_term()),
        }
    }
}

/// Quantum value trees: formal superpositions of classical values.  The
/// shape mirrors the free vector-space structure; `Sum` and `Scale` nodes
/// are not normalised in any way.
#[derive(Debug, Clone, PartialEq)]
pub enum QVal {
    Leaf(CVal),
    Zero,
    Sum(Box<QVal>, Box<QVal>),
    Scale(Amplitude, Box<QVal>),
}

impl QVal {
    pub fn sum(a: QVal, b: QVal) -> QVal {
        QVal::Sum(Box::new(a), Box::new(b))
    }

    pub fn scale(k: Amplitude, v: QVal) -> QVal {
        QVal::Scale(k, Box::new(v))
    }

    /// Inject the tree into term syntax.  `ty` annotates `Zero` nodes.
    pub fn to_term(&self, ty: &QType) -> Term {
        match self {
            QVal::Leaf(v) => v.to_term(),
            QVal::Zero => Term::Zero(ty.clone()),
            QVal::Sum(a, b) => Term::sup(a.to_term(ty), b.to_term(ty)),
            QVal::Scale(k, v) => Term::scale(*k, v.to_term(ty)),
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// The value's shape does not fit the pattern (a pair pattern needs a pair
/// value).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("value shape does not match the let pattern")]
pub struct ShapeMismatch;

/// Substitute a classical value for a pattern in `body`.  Shared
/// occurrences each receive a copy.  Substitution stops below a binder
/// that rebinds a substituted name; under the no-shadowing discipline the
/// replacement values can never be captured (debug builds assert this).
pub fn substitute(body: &Term, val: &CVal, pat: &Pattern) -> Result<Term, ShapeMismatch> {
    let subs: Vec<(String, Term)> = match pat {
        Pattern::Var(x) => vec![(x.clone(), val.to_term())],
        Pattern::Pair(x, y) => match val {
            CVal::Pair(a, b) => vec![(x.clone(), a.to_term()), (y.clone(), b.to_term())],
            _ => return Err(ShapeMismatch),
        },
    };
    Ok(subst_many(body, &subs))
}

fn subst_many(t: &Term, subs: &[(String, Term)]) -> Term {
    if subs.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var(x) => subs
            .iter()
            .find(|(n, _)| n == x)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| t.clone()),
        Term::Unit | Term::False | Term::True | Term::Zero(_) => t.clone(),
        Term::Pair(a, b) => Term::pair(subst_many(a, subs), subst_many(b, subs)),
        Term::Sup(a, b) => Term::sup(subst_many(a, subs), subst_many(b, subs)),
        Term::Scale(k, a) => Term::scale(*k, subst_many(a, subs)),
        Term::IfQ(c, t1, t0) => Term::qif(
            subst_many(c, subs),
            subst_many(t1, subs),
            subst_many(t0, subs),
        ),
        Term::Let(pat, bound, body) => {
            let bound = subst_many(bound, subs);
            // Names rebound here are out of scope in the body.
            let inner: Vec<(String, Term)> = subs
                .iter()
                .filter(|(n, _)| !pat.binds(n))
                .cloned()
                .collect();
            debug_assert!(
                inner
                    .iter()
                    .all(|(_, v)| pat.names().iter().all(|n| !v.free_vars().contains(*n))),
                "substitution would capture a free variable"
            );
            Term::Let(
                pat.clone(),
                Box::new(bound),
                Box::new(subst_many(body, &inner)),
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Fresh names and let*
// ---------------------------------------------------------------------------

/// First name not in `used`: `base`, then `base_1`, `base_2`, ...
pub fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|k| format!("{base}_{k}"))
        .find(|c| !used.contains(c))
        .unwrap()
}

/// Iterated let: bind `bound` (of type `ctx.as_type()`) and explode it
/// into the variables of `ctx` around `body`.  Peels one context entry per
/// step, threading the left-nested remainder through a fresh name.
pub fn let_star(ctx: &Context, bound: Term, body: Term) -> Term {
    let mut used: BTreeSet<String> = ctx.names();
    used.extend(bound.free_vars());
    used.extend(body.free_vars());
    used.extend(body.binder_names());
    used.extend(bound.binder_names());

    fn go(
        entries: &[(String, QType)],
        bound: Term,
        body: Term,
        used: &mut BTreeSet<String>,
        depth: usize,
    ) -> Term {
        match entries.split_last() {
            None => body,
            Some(((name, _), rest)) => {
                let r = fresh_name(&format!("r{}", depth + 1), used);
                used.insert(r.clone());
                let inner = go(rest, Term::var(&r), body, used, depth + 1);
                Term::let_in(Pattern::Pair(r, name.clone()), bound, inner)
            }
        }
    }
    go(ctx.entries(), bound, body, &mut used, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q2() -> QType {
        QType::Qubit
    }

    fn ctx(entries: &[(&str, QType)]) -> Context {
        Context::from_pairs(entries.iter().map(|(n, t)| (n.to_string(), t.clone()))).unwrap()
    }

    #[test]
    fn merge_shared_variable_feeds_both() {
        let g = ctx(&[("x", q2())]);
        let plan = merge_contexts(&g, &g).unwrap();
        assert_eq!(plan.context, g);
        assert_eq!(plan.uses, vec![SlotUse::Both]);
    }

    #[test]
    fn merge_disjoint_puts_right_only_slots_first() {
        let g = ctx(&[("a", q2()), ("b", q2())]);
        let d = ctx(&[("c", q2())]);
        let plan = merge_contexts(&g, &d).unwrap();
        assert_eq!(plan.context, ctx(&[("c", q2()), ("a", q2()), ("b", q2())]));
        assert_eq!(
            plan.uses,
            vec![SlotUse::Right, SlotUse::Left, SlotUse::Left]
        );
    }

    #[test]
    fn merge_rejects_type_clash() {
        let g = ctx(&[("x", q2())]);
        let d = ctx(&[("x", QType::Unit)]);
        assert_eq!(merge_contexts(&g, &d), Err(TypeClash("x".into())));
    }

    #[test]
    fn merge_mixed_keeps_left_positions() {
        let g = ctx(&[("x", q2()), ("y", q2())]);
        let d = ctx(&[("y", q2()), ("z", q2())]);
        let plan = merge_contexts(&g, &d).unwrap();
        assert_eq!(plan.context, ctx(&[("z", q2()), ("x", q2()), ("y", q2())]));
        assert_eq!(
            plan.uses,
            vec![SlotUse::Right, SlotUse::Left, SlotUse::Both]
        );
    }

    #[test]
    fn context_as_type_is_left_nested_from_unit() {
        assert_eq!(Context::empty().as_type(), QType::Unit);
        let c = ctx(&[("x", q2())]);
        assert_eq!(c.as_type(), QType::tensor(QType::Unit, q2()));
        let c2 = ctx(&[("x", q2()), ("y", QType::Unit)]);
        assert_eq!(
            c2.as_type(),
            QType::tensor(QType::tensor(QType::Unit, q2()), QType::Unit)
        );
        assert_eq!(c2.dim(), 2);
    }

    #[test]
    fn identity_term_repackages_variables() {
        let c = ctx(&[("x", q2()), ("y", q2())]);
        assert_eq!(
            c.identity_term(),
            Term::pair(Term::pair(Term::Unit, Term::var("x")), Term::var("y"))
        );
    }

    #[test]
    fn let_star_peels_entries_from_the_right() {
        let c = ctx(&[("x", q2()), ("y", q2())]);
        let t = let_star(&c, Term::var("u"), Term::var("x"));
        // let (r1, y) = u in let (r2, x) = r1 in x
        match &t {
            Term::Let(Pattern::Pair(r1, y), bound, inner) => {
                assert_eq!(y, "y");
                assert_eq!(**bound, Term::var("u"));
                match &**inner {
                    Term::Let(Pattern::Pair(r2, x), b2, body) => {
                        assert_eq!(x, "x");
                        assert_eq!(**b2, Term::Var(r1.clone()));
                        assert_ne!(r1, r2);
                        assert_eq!(**body, Term::var("x"));
                    }
                    other => panic!("unexpected inner shape: {other:?}"),
                }
            }
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn let_star_on_empty_context_is_the_body() {
        assert_eq!(
            let_star(&Context::empty(), Term::Unit, Term::True),
            Term::True
        );
    }

    #[test]
    fn substitute_duplicates_shared_occurrences() {
        let body = Term::pair(Term::var("x"), Term::var("x"));
        let out = substitute(&body, &CVal::True, &Pattern::Var("x".into())).unwrap();
        assert_eq!(out, Term::pair(Term::True, Term::True));
    }

    #[test]
    fn substitute_pair_pattern_is_simultaneous() {
        // let (x, y) = (y, true): x := y must not be rewritten by y := true.
        let body = Term::pair(Term::var("x"), Term::var("y"));
        let val = CVal::pair(CVal::Var("y".into()), CVal::True);
        let out = substitute(&body, &val, &Pattern::Pair("x".into(), "y".into())).unwrap();
        assert_eq!(out, Term::pair(Term::var("y"), Term::True));
    }

    #[test]
    fn substitute_rejects_shape_mismatch() {
        let body = Term::var("x");
        assert_eq!(
            substitute(&body, &CVal::True, &Pattern::Pair("x".into(), "y".into())),
            Err(ShapeMismatch)
        );
    }

    #[test]
    fn substitute_into_qif_branches() {
        let body = Term::qif(Term::var("x"), Term::False, Term::True);
        let out = substitute(&body, &CVal::True, &Pattern::Var("x".into())).unwrap();
        assert_eq!(out, Term::qif(Term::True, Term::False, Term::True));
    }

    #[test]
    fn paths_navigate_and_replace() {
        let t = Term::qif(Term::var("x"), Term::True, Term::False);
        assert_eq!(subterm_at(&t, &[1]), Some(&Term::True));
        let t2 = replace_at(&t, &[1], Term::var("y")).unwrap();
        assert_eq!(t2, Term::qif(Term::var("x"), Term::var("y"), Term::False));
        assert_eq!(all_paths(&t).len(), 4);
    }

    #[test]
    fn fresh_name_skips_used_names() {
        let used: BTreeSet<String> = ["x".to_string(), "x_1".to_string()].into();
        assert_eq!(fresh_name("x", &used), "x_2");
        assert_eq!(fresh_name("y", &used), "y");
    }
}
