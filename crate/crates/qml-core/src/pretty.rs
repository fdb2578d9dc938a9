//! Pretty-printer for terms, inverse to the parser.
//!
//! `term_to_string` prints amplitudes with Rust's shortest-roundtrip float
//! formatting, so `parse . print` is the identity on ASTs.  Display output
//! uses `print_term` with `format_amp_display` (12 significant digits).

use std::fmt;
use std::fmt::Write;

use crate::syntax::{Amplitude, Pattern, QType, Term};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&term_to_string(self))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(x) => f.write_str(x),
            Pattern::Pair(x, y) => write!(f, "({x}, {y})"),
        }
    }
}

/// How to render one amplitude literal (without the surrounding braces).
pub type AmpFormatter = fn(Amplitude) -> String;

/// Exact formatting: round-trips through the amplitude grammar bit-for-bit.
pub fn format_amp_exact(k: Amplitude) -> String {
    format_amp_parts(k.re, k.im, |x| format!("{x}"))
}

/// Formatting rounded to 12 significant digits, with eps-zero imaginary
/// parts dropped; used for human-facing CLI output.
pub fn format_amp_display(k: Amplitude, eps: f64) -> String {
    let im = if k.im.abs() <= eps { 0.0 } else { k.im };
    format_amp_parts(round_sig(k.re, 12), round_sig(im, 12), |x| format!("{x}"))
}

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - mag);
    (x * scale).round() / scale
}

fn format_amp_parts(re: f64, im: f64, show: impl Fn(f64) -> String) -> String {
    if im == 0.0 {
        return show(re);
    }
    let im_part = |v: f64| -> String {
        if v == 1.0 {
            "i".to_string()
        } else {
            format!("{}*i", show(v))
        }
    };
    if re == 0.0 {
        return if im < 0.0 {
            format!("-{}", im_part(-im))
        } else {
            im_part(im)
        };
    }
    if im < 0.0 {
        format!("{} - {}", show(re), im_part(-im))
    } else {
        format!("{} + {}", show(re), im_part(im))
    }
}

// Precedence levels, loosest to tightest.  `let` and `qif` bodies swallow
// everything to their right, sums bind looser than scalings, and atoms
// need no parens.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Term = 0,
    Sum = 1,
    Prod = 2,
    Atom = 3,
}

pub fn term_to_string(t: &Term) -> String {
    print_term(t, format_amp_exact)
}

pub fn print_term(t: &Term, fmt_amp: AmpFormatter) -> String {
    let mut out = String::new();
    go(t, Prec::Term, fmt_amp, &mut out);
    out
}

fn go(t: &Term, min: Prec, fmt_amp: AmpFormatter, out: &mut String) {
    let prec = prec_of(t);
    let parens = prec < min;
    if parens {
        out.push('(');
    }
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Unit => out.push_str("()"),
        Term::False => out.push_str("false"),
        Term::True => out.push_str("true"),
        Term::Zero(ty) => {
            let _ = write!(out, "zero[{ty}]");
        }
        Term::Pair(a, b) => {
            out.push('(');
            go(a, Prec::Term, fmt_amp, out);
            out.push_str(", ");
            go(b, Prec::Term, fmt_amp, out);
            out.push(')');
        }
        Term::Let(pat, bound, body) => {
            out.push_str("let ");
            match pat {
                Pattern::Var(x) => out.push_str(x),
                Pattern::Pair(x, y) => {
                    let _ = write!(out, "({x}, {y})");
                }
            }
            out.push_str(" = ");
            // The bound term must not itself swallow the `in`.
            go(bound, Prec::Sum, fmt_amp, out);
            out.push_str(" in ");
            go(body, Prec::Term, fmt_amp, out);
        }
        Term::IfQ(c, t1, t0) => {
            out.push_str("qif ");
            go(c, Prec::Sum, fmt_amp, out);
            out.push_str(" then ");
            go(t1, Prec::Sum, fmt_amp, out);
            out.push_str(" else ");
            // Symmetric with `then`: a nested conditional or binding reads
            // better delimited, and the parser accepts the parens either way.
            go(t0, Prec::Sum, fmt_amp, out);
        }
        Term::Sup(a, b) => {
            // `+` is left-associative: the right operand must bind tighter.
            go(a, Prec::Sum, fmt_amp, out);
            out.push_str(" + ");
            go(b, Prec::Prod, fmt_amp, out);
        }
        Term::Scale(k, a) => {
            let _ = write!(out, "{{{}}}*", fmt_amp(*k));
            go(a, Prec::Prod, fmt_amp, out);
        }
    }
    if parens {
        out.push(')');
    }
}

fn prec_of(t: &Term) -> Prec {
    match t {
        Term::Let(_, _, _) | Term::IfQ(_, _, _) => Prec::Term,
        Term::Sup(_, _) => Prec::Sum,
        Term::Scale(_, _) => Prec::Prod,
        _ => Prec::Atom,
    }
}

pub fn type_to_string(ty: &QType) -> String {
    ty.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::amp;

    #[test]
    fn prints_sums_and_scales_with_grammar_precedence() {
        let k = amp(1.0 / 2f64.sqrt(), 0.0);
        let t = Term::sup(Term::scale(k, Term::False), Term::scale(k, Term::True));
        assert_eq!(
            term_to_string(&t),
            "{0.7071067811865475}*false + {0.7071067811865475}*true"
        );
    }

    #[test]
    fn parenthesises_right_nested_sums() {
        let t = Term::sup(Term::False, Term::sup(Term::True, Term::False));
        assert_eq!(term_to_string(&t), "false + (true + false)");
        let u = Term::sup(Term::sup(Term::True, Term::False), Term::False);
        assert_eq!(term_to_string(&u), "true + false + false");
    }

    #[test]
    fn prints_complex_amplitudes() {
        assert_eq!(format_amp_exact(amp(0.0, 1.0)), "i");
        assert_eq!(format_amp_exact(amp(0.0, -1.0)), "-i");
        assert_eq!(format_amp_exact(amp(0.5, 0.5)), "0.5 + 0.5*i");
        assert_eq!(format_amp_exact(amp(-0.5, -2.0)), "-0.5 - 2*i");
        assert_eq!(format_amp_exact(amp(0.0, 0.25)), "0.25*i");
    }

    #[test]
    fn qif_inside_sum_gets_parens() {
        let t = Term::sup(
            Term::scale(
                amp(1.0, 0.0),
                Term::qif(Term::var("x"), Term::True, Term::False),
            ),
            Term::False,
        );
        assert_eq!(
            term_to_string(&t),
            "{1}*(qif x then true else false) + false"
        );
    }

    #[test]
    fn rounds_to_significant_digits() {
        let rounded = round_sig(std::f64::consts::FRAC_1_SQRT_2, 12);
        assert_eq!(rounded.to_string(), "0.707106781187");
        assert_eq!(round_sig(0.0, 12), 0.0);
        assert_eq!(round_sig(-123456.789, 6), -123457.0);
    }

    #[test]
    fn type_display_is_left_associative() {
        let ty = QType::tensor(QType::tensor(QType::Qubit, QType::Qubit), QType::Unit);
        assert_eq!(ty.to_string(), "Q2*Q2*Q1");
        let ty2 = QType::tensor(QType::Qubit, QType::tensor(QType::Qubit, QType::Unit));
        assert_eq!(ty2.to_string(), "Q2*(Q2*Q1)");
    }
}
