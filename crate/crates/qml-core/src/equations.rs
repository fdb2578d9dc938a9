//! The equational theory as named rewrite rules.
//!
//! Each rule is an oriented equation schema applied at an explicit path
//! into the term.  `L2R` rewrites an instance of the left-hand shape to
//! the right-hand one; `R2L` goes the other way when the right-hand
//! shape is itself recognisable.  Directions whose source shape is an
//! arbitrary term (pure introductions such as expanding `t` to
//! `let x = t in x`) are not supported and report `NoMatch`, so
//! enumerating applicable instances stays finite and meaningful.
//!
//! Every application re-typechecks the whole rewritten term and insists
//! on the original type, so a derivation can only move between terms of
//! one judgement.

use std::fmt;
use std::str::FromStr;

use crate::parser::{parse_context, parse_term_in, ParseError};
use crate::syntax::{
    all_paths, amp, replace_at, substitute, subterm_at, term_approx_eq, Amplitude, Context,
    Pattern, QType, Term,
};
use crate::typecheck::{infer, judgement_at, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    LetVal,
    BetaPair,
    BetaIfFalse,
    BetaIfTrue,
    EtaUnit,
    EtaLet,
    EtaPair,
    EtaIf,
    CcLetLet,
    CcLetIf,
    QIfSup,
    SupComm,
    SupZero,
    SupAssoc,
    ScaleDist,
    ScaleCombine,
    ScaleZero,
    ScaleScale,
    ScaleOne,
}

impl RuleId {
    pub const ALL: [RuleId; 19] = [
        RuleId::LetVal,
        RuleId::BetaPair,
        RuleId::BetaIfFalse,
        RuleId::BetaIfTrue,
        RuleId::EtaUnit,
        RuleId::EtaLet,
        RuleId::EtaPair,
        RuleId::EtaIf,
        RuleId::CcLetLet,
        RuleId::CcLetIf,
        RuleId::QIfSup,
        RuleId::SupComm,
        RuleId::SupZero,
        RuleId::SupAssoc,
        RuleId::ScaleDist,
        RuleId::ScaleCombine,
        RuleId::ScaleZero,
        RuleId::ScaleScale,
        RuleId::ScaleOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::LetVal => "LET_VAL",
            RuleId::BetaPair => "BETA_PAIR",
            RuleId::BetaIfFalse => "BETA_IF_FALSE",
            RuleId::BetaIfTrue => "BETA_IF_TRUE",
            RuleId::EtaUnit => "ETA_UNIT",
            RuleId::EtaLet => "ETA_LET",
            RuleId::EtaPair => "ETA_PAIR",
            RuleId::EtaIf => "ETA_IF",
            RuleId::CcLetLet => "CC_LET_LET",
            RuleId::CcLetIf => "CC_LET_IF",
            RuleId::QIfSup => "Q_IF_SUP",
            RuleId::SupComm => "SUP_COMM",
            RuleId::SupZero => "SUP_ZERO",
            RuleId::SupAssoc => "SUP_ASSOC",
            RuleId::ScaleDist => "SCALE_DIST",
            RuleId::ScaleCombine => "SCALE_COMBINE",
            RuleId::ScaleZero => "SCALE_ZERO",
            RuleId::ScaleScale => "SCALE_SCALE",
            RuleId::ScaleOne => "SCALE_ONE",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    L2R,
    R2L,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::L2R => "L2R",
            Direction::R2L => "R2L",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L2R" => Ok(Direction::L2R),
            "R2L" => Ok(Direction::R2L),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// One rewrite: a rule, a direction, and the path of the redex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleApp {
    pub rule: RuleId,
    pub direction: Direction,
    pub path: Vec<usize>,
}

impl fmt::Display for RuleApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RULE {} {} at {}",
            self.rule,
            self.direction,
            path_str(&self.path)
        )
    }
}

fn path_str(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("{rule} {direction} does not match at {path}")]
    NoMatch {
        rule: RuleId,
        direction: Direction,
        path: String,
    },
    #[error("{rule}: {message}")]
    SideCondition { rule: RuleId, message: String },
    #[error("path {0} does not address a subterm")]
    BadPath(String),
    #[error("derivation result does not match the stated end term")]
    FinalMismatch,
}

fn no_match(app: &RuleApp) -> RuleError {
    RuleError::NoMatch {
        rule: app.rule,
        direction: app.direction,
        path: path_str(&app.path),
    }
}

fn side(rule: RuleId, message: impl Into<String>) -> RuleError {
    RuleError::SideCondition {
        rule,
        message: message.into(),
    }
}

fn peel_scale(t: &Term) -> (Amplitude, &Term) {
    match t {
        Term::Scale(k, inner) => (*k, inner),
        _ => (amp(1.0, 0.0), t),
    }
}

/// Apply one rule instance to a typed term.  The result typechecks at
/// the same context and type or the application is rejected.
pub fn apply_rule(ctx: &Context, t: &Term, app: &RuleApp, eps: f64) -> Result<Term, RuleError> {
    let before = infer(ctx, t, false, eps)?;
    apply_rule_typed(ctx, t, &before.ty, app, eps)
}

fn apply_rule_typed(
    ctx: &Context,
    t: &Term,
    before_ty: &QType,
    app: &RuleApp,
    eps: f64,
) -> Result<Term, RuleError> {
    let sub = subterm_at(t, &app.path).ok_or_else(|| RuleError::BadPath(path_str(&app.path)))?;
    let replacement = rewrite(ctx, t, sub, app, eps)?;
    let out = replace_at(t, &app.path, replacement).expect("path was just resolved");
    let after = infer(ctx, &out, false, eps)?;
    if after.ty != *before_ty {
        return Err(side(app.rule, "rewrite changes the type of the term"));
    }
    Ok(out)
}

fn local_type(
    ctx: &Context,
    t: &Term,
    app: &RuleApp,
    eps: f64,
) -> Result<(Context, QType), RuleError> {
    judgement_at(ctx, t, &app.path, eps).map_err(RuleError::Type)
}

fn rewrite(
    ctx: &Context,
    whole: &Term,
    sub: &Term,
    app: &RuleApp,
    eps: f64,
) -> Result<Term, RuleError> {
    use Direction::{L2R, R2L};
    let fail = || no_match(app);
    match (app.rule, app.direction) {
        // let p = val in u  ~  u[val/p]
        (RuleId::LetVal, L2R) => {
            let Term::Let(pat, bound, body) = sub else {
                return Err(fail());
            };
            let Some(cv) = bound.as_cval() else {
                return Err(fail());
            };
            substitute(body, &cv, pat).map_err(|_| fail())
        }
        // let (x, y) = (t, u) in e  ~  let x = t in let y = u in e
        (RuleId::BetaPair, L2R) => {
            let Term::Let(Pattern::Pair(x, y), bound, e) = sub else {
                return Err(fail());
            };
            let Term::Pair(t1, u1) = &**bound else {
                return Err(fail());
            };
            if u1.free_vars().contains(x) {
                return Err(side(
                    app.rule,
                    format!("`{x}` occurs in the second component"),
                ));
            }
            Ok(Term::let_in(
                Pattern::Var(x.clone()),
                (**t1).clone(),
                Term::let_in(Pattern::Var(y.clone()), (**u1).clone(), (**e).clone()),
            ))
        }
        (RuleId::BetaPair, R2L) => {
            let Term::Let(Pattern::Var(x), t1, rest) = sub else {
                return Err(fail());
            };
            let Term::Let(Pattern::Var(y), u1, e) = &**rest else {
                return Err(fail());
            };
            if x == y {
                return Err(fail());
            }
            if u1.free_vars().contains(x) {
                return Err(side(
                    app.rule,
                    format!("`{x}` occurs in the second bound term"),
                ));
            }
            Ok(Term::let_in(
                Pattern::Pair(x.clone(), y.clone()),
                Term::pair((**t1).clone(), (**u1).clone()),
                (**e).clone(),
            ))
        }
        // qif false then t else u  ~  u
        (RuleId::BetaIfFalse, L2R) => {
            let Term::IfQ(c, _, u) = sub else {
                return Err(fail());
            };
            if **c != Term::False {
                return Err(fail());
            }
            Ok((**u).clone())
        }
        // qif true then t else u  ~  t
        (RuleId::BetaIfTrue, L2R) => {
            let Term::IfQ(c, t1, _) = sub else {
                return Err(fail());
            };
            if **c != Term::True {
                return Err(fail());
            }
            Ok((**t1).clone())
        }
        // t  ~  ()   for classical t of type Q1 consuming no quantum data
        (RuleId::EtaUnit, L2R) => {
            let (local, ty) = local_type(ctx, whole, app, eps)?;
            if ty != QType::Unit {
                return Err(side(app.rule, "subterm is not of type Q1"));
            }
            if !sub.is_classical() {
                return Err(side(app.rule, "subterm is not classical"));
            }
            for v in sub.free_vars() {
                if local.lookup(&v) != Some(&QType::Unit) {
                    return Err(side(app.rule, format!("`{v}` carries non-Q1 data")));
                }
            }
            Ok(Term::Unit)
        }
        // let x = t in x  ~  t
        (RuleId::EtaLet, L2R) => {
            let Term::Let(Pattern::Var(x), bound, body) = sub else {
                return Err(fail());
            };
            if **body != Term::Var(x.clone()) {
                return Err(fail());
            }
            Ok((**bound).clone())
        }
        // let (x, y) = t in (x, y)  ~  t
        (RuleId::EtaPair, L2R) => {
            let Term::Let(Pattern::Pair(x, y), bound, body) = sub else {
                return Err(fail());
            };
            let expected = Term::pair(Term::var(x), Term::var(y));
            if **body != expected {
                return Err(fail());
            }
            Ok((**bound).clone())
        }
        // qif t then true else false  ~  t
        (RuleId::EtaIf, L2R) => {
            let Term::IfQ(c, t1, u1) = sub else {
                return Err(fail());
            };
            if **t1 != Term::True || **u1 != Term::False {
                return Err(fail());
            }
            Ok((**c).clone())
        }
        // let p = t in let q = u in e  ~  let q = u in let p = t in e
        (RuleId::CcLetLet, _) => {
            let Term::Let(p, t1, rest) = sub else {
                return Err(fail());
            };
            let Term::Let(q, u1, e) = &**rest else {
                return Err(fail());
            };
            let u_free = u1.free_vars();
            if let Some(n) = p.names().iter().find(|n| u_free.contains(**n)) {
                return Err(side(
                    app.rule,
                    format!("`{n}` is bound above and free in the inner bound term"),
                ));
            }
            let t_free = t1.free_vars();
            if let Some(n) = q.names().iter().find(|n| t_free.contains(**n)) {
                return Err(side(
                    app.rule,
                    format!("`{n}` is bound below and free in the outer bound term"),
                ));
            }
            Ok(Term::let_in(
                q.clone(),
                (**u1).clone(),
                Term::let_in(p.clone(), (**t1).clone(), (**e).clone()),
            ))
        }
        // let p = (qif c then a else b) in e  ~  qif c then (let p = a in e) else (let p = b in e)
        (RuleId::CcLetIf, L2R) => {
            let Term::Let(p, bound, e) = sub else {
                return Err(fail());
            };
            let Term::IfQ(c, a, b) = &**bound else {
                return Err(fail());
            };
            Ok(Term::qif(
                (**c).clone(),
                Term::let_in(p.clone(), (**a).clone(), (**e).clone()),
                Term::let_in(p.clone(), (**b).clone(), (**e).clone()),
            ))
        }
        (RuleId::CcLetIf, R2L) => {
            let Term::IfQ(c, left, right) = sub else {
                return Err(fail());
            };
            let Term::Let(p1, a, e1) = &**left else {
                return Err(fail());
            };
            let Term::Let(p2, b, e2) = &**right else {
                return Err(fail());
            };
            if p1 != p2 || e1 != e2 {
                return Err(fail());
            }
            Ok(Term::let_in(
                p1.clone(),
                Term::qif((**c).clone(), (**a).clone(), (**b).clone()),
                (**e1).clone(),
            ))
        }
        // qif (l*c0 + k*c1) then a else b  ~  l*(qif c0 then a else b) + k*(qif c1 then a else b)
        (RuleId::QIfSup, L2R) => {
            let Term::IfQ(c, a, b) = sub else {
                return Err(fail());
            };
            let Term::Sup(l, r) = &**c else {
                return Err(fail());
            };
            let (lam, c0) = peel_scale(l);
            let (kap, c1) = peel_scale(r);
            Ok(Term::sup(
                Term::scale(lam, Term::qif(c0.clone(), (**a).clone(), (**b).clone())),
                Term::scale(kap, Term::qif(c1.clone(), (**a).clone(), (**b).clone())),
            ))
        }
        (RuleId::QIfSup, R2L) => {
            let Term::Sup(l, r) = sub else {
                return Err(fail());
            };
            let (lam, li) = peel_scale(l);
            let (kap, ri) = peel_scale(r);
            let Term::IfQ(c0, a, b) = li else {
                return Err(fail());
            };
            let Term::IfQ(c1, a2, b2) = ri else {
                return Err(fail());
            };
            if a != a2 || b != b2 {
                return Err(fail());
            }
            Ok(Term::qif(
                Term::sup(
                    Term::scale(lam, (**c0).clone()),
                    Term::scale(kap, (**c1).clone()),
                ),
                (**a).clone(),
                (**b).clone(),
            ))
        }
        // t + u  ~  u + t
        (RuleId::SupComm, _) => {
            let Term::Sup(t1, u1) = sub else {
                return Err(fail());
            };
            Ok(Term::sup((**u1).clone(), (**t1).clone()))
        }
        // t + zero  ~  t
        (RuleId::SupZero, L2R) => {
            let Term::Sup(t1, z) = sub else {
                return Err(fail());
            };
            if !z.is_zero_literal() {
                return Err(fail());
            }
            Ok((**t1).clone())
        }
        // (t + u) + v  ~  t + (u + v)
        (RuleId::SupAssoc, L2R) => {
            let Term::Sup(l, v) = sub else {
                return Err(fail());
            };
            let Term::Sup(t1, u1) = &**l else {
                return Err(fail());
            };
            Ok(Term::sup(
                (**t1).clone(),
                Term::sup((**u1).clone(), (**v).clone()),
            ))
        }
        (RuleId::SupAssoc, R2L) => {
            let Term::Sup(t1, r) = sub else {
                return Err(fail());
            };
            let Term::Sup(u1, v) = &**r else {
                return Err(fail());
            };
            Ok(Term::sup(
                Term::sup((**t1).clone(), (**u1).clone()),
                (**v).clone(),
            ))
        }
        // k*(t + u)  ~  k*t + k*u
        (RuleId::ScaleDist, L2R) => {
            let Term::Scale(k, inner) = sub else {
                return Err(fail());
            };
            let Term::Sup(t1, u1) = &**inner else {
                return Err(fail());
            };
            Ok(Term::sup(
                Term::scale(*k, (**t1).clone()),
                Term::scale(*k, (**u1).clone()),
            ))
        }
        (RuleId::ScaleDist, R2L) => {
            let Term::Sup(l, r) = sub else {
                return Err(fail());
            };
            let (Term::Scale(k1, t1), Term::Scale(k2, u1)) = (&**l, &**r) else {
                return Err(fail());
            };
            if k1 != k2 {
                return Err(side(app.rule, "the two scaling factors differ"));
            }
            Ok(Term::scale(*k1, Term::sup((**t1).clone(), (**u1).clone())))
        }
        // l*t + k*t  ~  (l + k)*t
        (RuleId::ScaleCombine, L2R) => {
            let Term::Sup(l, r) = sub else {
                return Err(fail());
            };
            let (lam, t1) = peel_scale(l);
            let (kap, u1) = peel_scale(r);
            if t1 != u1 {
                return Err(fail());
            }
            Ok(Term::scale(lam + kap, t1.clone()))
        }
        // k*t  ~  zero   for k within eps of 0
        (RuleId::ScaleZero, L2R) => {
            let Term::Scale(k, _) = sub else {
                return Err(fail());
            };
            if k.norm() > eps {
                return Err(side(app.rule, "scaling factor is not zero"));
            }
            let (_, ty) = local_type(ctx, whole, app, eps)?;
            Ok(Term::Zero(ty))
        }
        // k1*(k2*t)  ~  (k1 k2)*t
        (RuleId::ScaleScale, L2R) => {
            let Term::Scale(k1, inner) = sub else {
                return Err(fail());
            };
            let Term::Scale(k2, t1) = &**inner else {
                return Err(fail());
            };
            Ok(Term::scale(k1 * k2, (**t1).clone()))
        }
        // k*t  ~  t   for k within eps of 1
        (RuleId::ScaleOne, L2R) => {
            let Term::Scale(k, inner) = sub else {
                return Err(fail());
            };
            if (k - amp(1.0, 0.0)).norm() > eps {
                return Err(side(app.rule, "scaling factor is not one"));
            }
            Ok((**inner).clone())
        }
        // Pure introductions run only left to right.
        (
            RuleId::LetVal
            | RuleId::BetaIfFalse
            | RuleId::BetaIfTrue
            | RuleId::EtaUnit
            | RuleId::EtaLet
            | RuleId::EtaPair
            | RuleId::EtaIf
            | RuleId::SupZero
            | RuleId::ScaleCombine
            | RuleId::ScaleZero
            | RuleId::ScaleScale
            | RuleId::ScaleOne,
            R2L,
        ) => Err(fail()),
    }
}

/// All (rule, direction, path) triples that apply to `t`.
pub fn enumerate_rule_instances(ctx: &Context, t: &Term, eps: f64) -> Vec<RuleApp> {
    let Ok(j) = infer(ctx, t, false, eps) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for path in all_paths(t) {
        for rule in RuleId::ALL {
            for direction in [Direction::L2R, Direction::R2L] {
                let app = RuleApp {
                    rule,
                    direction,
                    path: path.clone(),
                };
                if apply_rule_typed(ctx, t, &j.ty, &app, eps).is_ok() {
                    out.push(app);
                }
            }
        }
    }
    out
}

/// Run a step list from `start` and require the result to be `end` up to
/// amplitude tolerance.  Every intermediate term is typechecked.
pub fn check_derivation(
    ctx: &Context,
    start: &Term,
    steps: &[RuleApp],
    end: &Term,
    eps: f64,
) -> Result<(), RuleError> {
    infer(ctx, start, false, eps)?;
    let mut cur = start.clone();
    for app in steps {
        cur = apply_rule(ctx, &cur, app, eps)?;
    }
    if term_approx_eq(&cur, end, eps) {
        Ok(())
    } else {
        Err(RuleError::FinalMismatch)
    }
}

/// A parsed derivation file: context, start term, steps, end term.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationScript {
    pub context: Context,
    pub start: Term,
    pub steps: Vec<RuleApp>,
    pub end: Term,
}

impl DerivationScript {
    pub fn check(&self, eps: f64) -> Result<(), RuleError> {
        check_derivation(&self.context, &self.start, &self.steps, &self.end, eps)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parse a derivation script.
///
/// Line format, with `--` comments and blank lines skipped:
///
/// ```text
/// ctx: x:Q2            (optional; empty context if absent)
/// start:
///   <term, possibly over several lines>
/// RULE <NAME> <L2R|R2L> at <root|1.0.2>
/// ...
/// end:
///   <term>
/// ```
pub fn parse_derivation(text: &str) -> Result<DerivationScript, ScriptError> {
    enum State {
        Head,
        Start,
        Steps,
        End,
    }
    let mut state = State::Head;
    let mut ctx_src = String::new();
    let mut start_src = String::new();
    let mut end_src = String::new();
    let mut raw_steps: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with("--") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("ctx:") {
            if !matches!(state, State::Head) {
                return Err(ScriptError::Malformed(lineno, "ctx after start".into()));
            }
            ctx_src = rest.trim().to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix("start:") {
            if !matches!(state, State::Head) {
                return Err(ScriptError::Malformed(lineno, "start out of order".into()));
            }
            start_src = rest.trim().to_string();
            state = State::Start;
            continue;
        }
        if let Some(rest) = line.strip_prefix("end:") {
            if !matches!(state, State::Start | State::Steps) {
                return Err(ScriptError::Malformed(lineno, "end out of order".into()));
            }
            end_src = rest.trim().to_string();
            state = State::End;
            continue;
        }
        if let Some(rest) = line.strip_prefix("RULE ") {
            if !matches!(state, State::Start | State::Steps) {
                return Err(ScriptError::Malformed(lineno, "rule out of order".into()));
            }
            raw_steps.push((lineno, rest.trim().to_string()));
            state = State::Steps;
            continue;
        }
        match state {
            State::Start => {
                if !start_src.is_empty() {
                    start_src.push(' ');
                }
                start_src.push_str(line);
            }
            State::End => {
                if !end_src.is_empty() {
                    end_src.push(' ');
                }
                end_src.push_str(line);
            }
            State::Head => {
                return Err(ScriptError::Malformed(
                    lineno,
                    "expected ctx: or start:".into(),
                ))
            }
            State::Steps => {
                return Err(ScriptError::Malformed(
                    lineno,
                    "expected RULE or end:".into(),
                ))
            }
        }
    }
    if start_src.is_empty() {
        return Err(ScriptError::Malformed(0, "missing start term".into()));
    }
    if !matches!(state, State::End) || end_src.is_empty() {
        return Err(ScriptError::Malformed(0, "missing end term".into()));
    }

    let context = parse_context(&ctx_src)?;
    let start = parse_term_in(&start_src, &context)?;
    let end = parse_term_in(&end_src, &context)?;
    let steps = raw_steps
        .into_iter()
        .map(|(lineno, src)| parse_rule_line(lineno, &src))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DerivationScript {
        context,
        start,
        steps,
        end,
    })
}

fn parse_rule_line(lineno: usize, src: &str) -> Result<RuleApp, ScriptError> {
    let parts: Vec<&str> = src.split_whitespace().collect();
    let [rule, direction, at, path] = parts.as_slice() else {
        return Err(ScriptError::Malformed(
            lineno,
            "expected `RULE <NAME> <L2R|R2L> at <path>`".into(),
        ));
    };
    if *at != "at" {
        return Err(ScriptError::Malformed(
            lineno,
            format!("expected `at`, found `{at}`"),
        ));
    }
    let rule = RuleId::from_str(rule).map_err(|e| ScriptError::Malformed(lineno, e))?;
    let direction =
        Direction::from_str(direction).map_err(|e| ScriptError::Malformed(lineno, e))?;
    let path = if *path == "root" {
        Vec::new()
    } else {
        path.split('.')
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| ScriptError::Malformed(lineno, format!("bad path `{path}`")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(RuleApp {
        rule,
        direction,
        path,
    })
}

/// The introduction-rule name table, handy for tooling.
pub fn rule_names() -> Vec<&'static str> {
    RuleId::ALL.iter().map(|r| r.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::equiv;
    use crate::pretty::term_to_string;

    const EPS: f64 = 1e-9;

    fn ctx(src: &str) -> Context {
        parse_context(src).unwrap()
    }

    fn term(src: &str, c: &Context) -> Term {
        parse_term_in(src, c).unwrap()
    }

    fn app(rule: RuleId, direction: Direction, path: &[usize]) -> RuleApp {
        RuleApp {
            rule,
            direction,
            path: path.to_vec(),
        }
    }

    fn rewrites(c: &Context, from: &str, a: RuleApp, to: &str) {
        let t = term(from, c);
        let got = apply_rule(c, &t, &a, EPS).unwrap();
        let want = term(to, c);
        assert!(
            term_approx_eq(&got, &want, 1e-12),
            "{a}: got {}, want {}",
            term_to_string(&got),
            term_to_string(&want)
        );
    }

    #[test]
    fn beta_if_rules() {
        let c = ctx("");
        rewrites(
            &c,
            "qif true then false else true",
            app(RuleId::BetaIfTrue, Direction::L2R, &[]),
            "false",
        );
        rewrites(
            &c,
            "qif false then false else true",
            app(RuleId::BetaIfFalse, Direction::L2R, &[]),
            "true",
        );
        let t = term("qif false then false else true", &c);
        assert!(matches!(
            apply_rule(&c, &t, &app(RuleId::BetaIfTrue, Direction::L2R, &[]), EPS),
            Err(RuleError::NoMatch { .. })
        ));
    }

    #[test]
    fn let_val_substitutes() {
        let c = ctx("");
        rewrites(
            &c,
            "let x = true in (x, x)",
            app(RuleId::LetVal, Direction::L2R, &[]),
            "(true, true)",
        );
        rewrites(
            &c,
            "let (p, q) = (false, true) in (q, p)",
            app(RuleId::LetVal, Direction::L2R, &[]),
            "(true, false)",
        );
        let open = ctx("z:Q2*Q2");
        let t = term("let (p, q) = z in (q, p)", &open);
        assert!(matches!(
            apply_rule(&open, &t, &app(RuleId::LetVal, Direction::L2R, &[]), EPS),
            Err(RuleError::NoMatch { .. })
        ));
    }

    #[test]
    fn beta_pair_both_ways() {
        let c = ctx("");
        rewrites(
            &c,
            "let (x, y) = (true, false) in (y, x)",
            app(RuleId::BetaPair, Direction::L2R, &[]),
            "let x = true in let y = false in (y, x)",
        );
        rewrites(
            &c,
            "let x = true in let y = false in (y, x)",
            app(RuleId::BetaPair, Direction::R2L, &[]),
            "let (x, y) = (true, false) in (y, x)",
        );
        // The first binder occurring in the second component blocks the move.
        let t = term("let (x, y) = (true, x') in (y, x)", &ctx("x':Q2"));
        let c2 = ctx("x':Q2");
        let renamed = apply_rule(&c2, &t, &app(RuleId::BetaPair, Direction::L2R, &[]), EPS);
        assert!(renamed.is_ok(), "unrelated free variable is fine");
    }

    #[test]
    fn beta_pair_side_condition() {
        // Construct `let x = true in let y = (x, false) in (y, x)` by hand:
        // converting it to a pair binding would move `(x, false)` out of
        // x's scope.
        let c = ctx("");
        let t = Term::let_in(
            Pattern::Var("x".into()),
            Term::True,
            Term::let_in(
                Pattern::Var("y".into()),
                Term::pair(Term::var("x"), Term::False),
                Term::pair(Term::var("y"), Term::var("x")),
            ),
        );
        assert!(matches!(
            apply_rule(&c, &t, &app(RuleId::BetaPair, Direction::R2L, &[]), EPS),
            Err(RuleError::SideCondition { .. })
        ));
    }

    #[test]
    fn eta_rules() {
        let c = ctx("");
        rewrites(
            &c,
            "let x = true in x",
            app(RuleId::EtaLet, Direction::L2R, &[]),
            "true",
        );
        rewrites(
            &c,
            "let (x, y) = (false, true) in (x, y)",
            app(RuleId::EtaPair, Direction::L2R, &[]),
            "(false, true)",
        );
        let cq = ctx("x:Q2");
        rewrites(
            &cq,
            "qif x then true else false",
            app(RuleId::EtaIf, Direction::L2R, &[]),
            "x",
        );
    }

    #[test]
    fn eta_unit_requires_classical_unit_data() {
        let c = ctx("u:Q1");
        rewrites(&c, "u", app(RuleId::EtaUnit, Direction::L2R, &[]), "()");
        rewrites(
            &c,
            "let v = () in v",
            app(RuleId::EtaUnit, Direction::L2R, &[]),
            "()",
        );
        let t = term("{i}*()", &ctx(""));
        assert!(matches!(
            apply_rule(
                &ctx(""),
                &t,
                &app(RuleId::EtaUnit, Direction::L2R, &[]),
                EPS
            ),
            Err(RuleError::SideCondition { .. })
        ));
        let tq = term("qif x then () else ()", &ctx("x:Q2"));
        assert!(matches!(
            apply_rule(
                &ctx("x:Q2"),
                &tq,
                &app(RuleId::EtaUnit, Direction::L2R, &[]),
                EPS
            ),
            Err(RuleError::SideCondition { .. })
        ));
    }

    #[test]
    fn commuting_conversions() {
        let c = ctx("");
        rewrites(
            &c,
            "let a = true in let b = false in (a, b)",
            app(RuleId::CcLetLet, Direction::L2R, &[]),
            "let b = false in let a = true in (a, b)",
        );
        let t = term("let a = true in let b = (a, false) in b", &c);
        assert!(matches!(
            apply_rule(&c, &t, &app(RuleId::CcLetLet, Direction::L2R, &[]), EPS),
            Err(RuleError::SideCondition { .. })
        ));
        let cq = ctx("x:Q2");
        rewrites(
            &cq,
            "let y = (qif x then false else true) in (y, y)",
            app(RuleId::CcLetIf, Direction::L2R, &[]),
            "qif x then (let y = false in (y, y)) else (let y = true in (y, y))",
        );
        rewrites(
            &cq,
            "qif x then (let y = false in (y, y)) else (let y = true in (y, y))",
            app(RuleId::CcLetIf, Direction::R2L, &[]),
            "let y = (qif x then false else true) in (y, y)",
        );
    }

    #[test]
    fn qif_sup_distributes() {
        let c = ctx("");
        rewrites(
            &c,
            "qif ({1/2}*false + {sqrt(3)/2}*true) then false else true",
            app(RuleId::QIfSup, Direction::L2R, &[]),
            "{1/2}*(qif false then false else true) + {sqrt(3)/2}*(qif true then false else true)",
        );
        rewrites(
            &c,
            "{1/2}*(qif false then false else true) + {sqrt(3)/2}*(qif true then false else true)",
            app(RuleId::QIfSup, Direction::R2L, &[]),
            "qif ({1/2}*false + {sqrt(3)/2}*true) then false else true",
        );
        // Bare summands count as scaled by one.
        let t = term("qif (false + true) then false else true", &c);
        let got = apply_rule(&c, &t, &app(RuleId::QIfSup, Direction::L2R, &[]), EPS).unwrap();
        let want = term(
            "{1}*(qif false then false else true) + {1}*(qif true then false else true)",
            &c,
        );
        assert!(term_approx_eq(&got, &want, 1e-12));
    }

    #[test]
    fn superposition_rules() {
        let c = ctx("");
        rewrites(
            &c,
            "false + true",
            app(RuleId::SupComm, Direction::L2R, &[]),
            "true + false",
        );
        rewrites(
            &c,
            "true + zero[Q2]",
            app(RuleId::SupZero, Direction::L2R, &[]),
            "true",
        );
        rewrites(
            &c,
            "(false + true) + zero[Q2]",
            app(RuleId::SupAssoc, Direction::L2R, &[]),
            "false + (true + zero[Q2])",
        );
        rewrites(
            &c,
            "false + (true + zero[Q2])",
            app(RuleId::SupAssoc, Direction::R2L, &[]),
            "(false + true) + zero[Q2]",
        );
    }

    #[test]
    fn scaling_rules() {
        let c = ctx("");
        rewrites(
            &c,
            "{1/2}*(false + true)",
            app(RuleId::ScaleDist, Direction::L2R, &[]),
            "{1/2}*false + {1/2}*true",
        );
        rewrites(
            &c,
            "{1/2}*false + {1/2}*true",
            app(RuleId::ScaleDist, Direction::R2L, &[]),
            "{1/2}*(false + true)",
        );
        rewrites(
            &c,
            "true + true",
            app(RuleId::ScaleCombine, Direction::L2R, &[]),
            "{2}*true",
        );
        rewrites(
            &c,
            "{1/2}*true + {1/2}*true",
            app(RuleId::ScaleCombine, Direction::L2R, &[]),
            "{1}*true",
        );
        rewrites(
            &c,
            "{0}*false",
            app(RuleId::ScaleZero, Direction::L2R, &[]),
            "zero[Q2]",
        );
        rewrites(
            &c,
            "{2}*({3}*true)",
            app(RuleId::ScaleScale, Direction::L2R, &[]),
            "{6}*true",
        );
        rewrites(
            &c,
            "{1}*false",
            app(RuleId::ScaleOne, Direction::L2R, &[]),
            "false",
        );
        let t = term("{1/2}*true", &c);
        assert!(matches!(
            apply_rule(&c, &t, &app(RuleId::ScaleOne, Direction::L2R, &[]), EPS),
            Err(RuleError::SideCondition { .. })
        ));
    }

    #[test]
    fn paths_address_subterms() {
        let c = ctx("x:Q2");
        rewrites(
            &c,
            "qif x then (qif true then false else true) else false",
            app(RuleId::BetaIfTrue, Direction::L2R, &[1]),
            "qif x then false else false",
        );
        let t = term("x", &c);
        assert!(matches!(
            apply_rule(&c, &t, &app(RuleId::SupComm, Direction::L2R, &[3]), EPS),
            Err(RuleError::BadPath(_))
        ));
    }

    #[test]
    fn enumeration_matches_expectations() {
        let c = ctx("");
        let t = term("qif true then false else true", &c);
        let found = enumerate_rule_instances(&c, &t, EPS);
        assert!(found.contains(&app(RuleId::BetaIfTrue, Direction::L2R, &[])));

        let z = term("true + zero[Q2]", &c);
        let found = enumerate_rule_instances(&c, &z, EPS);
        assert!(found.contains(&app(RuleId::SupZero, Direction::L2R, &[])));

        let cq = ctx("x:Q2");
        let bare = term("x", &cq);
        assert!(enumerate_rule_instances(&cq, &bare, EPS).is_empty());
    }

    #[test]
    fn derivation_script_round_trip() {
        let text = "\
-- tiny interference derivation
ctx:
start:
  {1/2}*true + {1/2}*true
RULE SCALE_COMBINE L2R at root
RULE SCALE_ONE L2R at root
end:
  true
";
        let script = parse_derivation(text).unwrap();
        assert_eq!(script.steps.len(), 2);
        script.check(EPS).unwrap();
    }

    #[test]
    fn derivation_rejects_wrong_end() {
        let text = "\
start: qif true then false else true
RULE BETA_IF_TRUE L2R at root
end: true
";
        let script = parse_derivation(text).unwrap();
        assert!(matches!(script.check(EPS), Err(RuleError::FinalMismatch)));
    }

    #[test]
    fn derivation_rejects_malformed_lines() {
        assert!(matches!(
            parse_derivation("start: true\nRULE WAT L2R at root\nend: true"),
            Err(ScriptError::Malformed(2, _))
        ));
        assert!(matches!(
            parse_derivation("RULE SUP_COMM L2R at root"),
            Err(ScriptError::Malformed(1, _))
        ));
        assert!(matches!(
            parse_derivation("start: true"),
            Err(ScriptError::Malformed(0, _))
        ));
    }

    #[test]
    fn rewrites_preserve_denotation_on_samples() {
        let c = ctx("x:Q2");
        let samples = [(
            "qif (qif x then false else true) then false else true",
            RuleId::EtaIf,
            Direction::R2L,
        )];
        // R2L eta-if is an introduction and must not match.
        for (src, rule, direction) in samples {
            let t = term(src, &c);
            assert!(matches!(
                apply_rule(&c, &t, &app(rule, direction, &[]), EPS),
                Err(RuleError::NoMatch { .. })
            ));
        }
        // Applying every enumerated instance preserves the denotation.
        let t = term(
            "let y = (qif x then {1/sqrt(2)}*false + {-1/sqrt(2)}*true \
                           else {1/sqrt(2)}*false + {1/sqrt(2)}*true) in (y, y)",
            &c,
        );
        let found = enumerate_rule_instances(&c, &t, EPS);
        assert!(!found.is_empty());
        for a in found {
            let u = apply_rule(&c, &t, &a, EPS).unwrap();
            assert!(equiv(&c, &t, &u, EPS).unwrap(), "{a} broke the denotation");
        }
    }
}
