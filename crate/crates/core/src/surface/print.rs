use super::parser::{OpInfo, ARROW_LEVEL, EQ_LEVEL, TOP_LEVEL};
use super::{Assoc, SBinder, SKind, SurfaceTerm};

/// Prints a surface term with the fewest parentheses that parse back to the
/// same tree under `ops`.
pub fn print_surface(t: &SurfaceTerm, ops: &[OpInfo]) -> String {
    let mut out = String::new();
    go(t, TOP_LEVEL, ops, &mut out);
    out
}

fn op_level(op: &str, ops: &[OpInfo]) -> (u32, Assoc) {
    match op {
        "=" => (EQ_LEVEL, Assoc::NoAssoc),
        "->" => (ARROW_LEVEL, Assoc::Right),
        _ => ops.iter().find(|o| o.token == op).map(|o| (o.level, o.assoc)).unwrap_or((TOP_LEVEL - 1, Assoc::NoAssoc)),
    }
}

fn level_of(t: &SurfaceTerm, ops: &[OpInfo]) -> u32 {
    match &t.kind {
        SKind::App(..) | SKind::Type(Some(_)) => 1,
        SKind::Infix(op, ..) => op_level(op, ops).0,
        SKind::Arrow(..) => ARROW_LEVEL,
        SKind::Lam(..) | SKind::Pi(..) => TOP_LEVEL,
        _ => 0,
    }
}

fn go(t: &SurfaceTerm, max: u32, ops: &[OpInfo], out: &mut String) {
    let level = level_of(t, ops);
    if level > max {
        out.push('(');
        go(t, TOP_LEVEL, ops, out);
        out.push(')');
        return;
    }
    match &t.kind {
        SKind::Var(x) => out.push_str(x),
        SKind::Explicit(x) => {
            out.push('@');
            out.push_str(x);
        }
        SKind::Hole => out.push('_'),
        SKind::Num(n) => out.push_str(&n.to_string()),
        SKind::Prop => out.push_str("Prop"),
        SKind::Type(None) => out.push_str("Type"),
        SKind::Type(Some(n)) => out.push_str(&format!("Type {n}")),
        SKind::App(f, args) => {
            go(f, 1, ops, out);
            for a in args {
                out.push(' ');
                go(a, 0, ops, out);
            }
        }
        SKind::Infix(op, a, b) => infix(op, a, b, ops, out),
        SKind::Arrow(a, b) => infix("->", a, b, ops, out),
        SKind::Lam(bs, body) | SKind::Pi(bs, body) => {
            let is_pi = matches!(t.kind, SKind::Pi(..));
            out.push_str(if is_pi { "forall " } else { "fun " });
            binders(bs, ops, out);
            out.push_str(if is_pi { ", " } else { " => " });
            go(body, TOP_LEVEL, ops, out);
        }
        SKind::Ascribe(a, b) => {
            out.push('(');
            go(a, TOP_LEVEL, ops, out);
            out.push_str(" : ");
            go(b, TOP_LEVEL, ops, out);
            out.push(')');
        }
    }
}

fn infix(op: &str, a: &SurfaceTerm, b: &SurfaceTerm, ops: &[OpInfo], out: &mut String) {
    let (l, assoc) = op_level(op, ops);
    let (lmax, rmax) = match assoc {
        Assoc::Left => (l, l - 1),
        Assoc::Right => (l - 1, l),
        Assoc::NoAssoc => (l - 1, l - 1),
    };
    go(a, lmax, ops, out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    go(b, rmax, ops, out);
}

fn binders(bs: &[SBinder], ops: &[OpInfo], out: &mut String) {
    let names = |b: &SBinder| b.names.iter().map(|n| n.0.as_str()).collect::<Vec<_>>().join(" ");
    if let [b] = bs {
        if !b.implicit {
            out.push_str(&names(b));
            if let Some(ty) = &b.ty {
                out.push_str(" : ");
                go(ty, TOP_LEVEL, ops, out);
            }
            return;
        }
    }
    for (i, b) in bs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match (&b.ty, b.implicit) {
            (None, false) => out.push_str(&names(b)),
            (ty, implicit) => {
                out.push(if implicit { '{' } else { '(' });
                out.push_str(&names(b));
                if let Some(ty) = ty {
                    out.push_str(" : ");
                    go(ty, TOP_LEVEL, ops, out);
                }
                out.push(if implicit { '}' } else { ')' });
            }
        }
    }
}
