//! Textual program format.
//!
//! ```text
//! rel R/2
//! rel U/1 side
//! tgd R(x,y) -> R(y,z)
//! tgd R(x,y), U(x) -> U(y)
//! fact R(a,b)
//! query R(x,y), U(y)
//! ```
//!
//! Generated relations carry their purpose tag (`rel lin_0/2 @lin`). Labelled
//! nulls in facts are written `$n`.

use std::fmt::Write as _;

use crate::logic::{Atom, Cq, Instance, Origin, Purpose, RelId, RelKind, Signature, Sym, Term, Tgd};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Program {
    pub sig: Signature,
    pub tgds: Vec<Tgd>,
    pub instance: Instance,
    pub queries: Vec<Cq>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: relation `{rel}` has arity {expected}, used with {found} arguments")]
    ArityMismatch { line: usize, col: usize, rel: String, expected: usize, found: usize },
    #[error("{line}:{col}: undeclared relation `{name}`")]
    UndeclaredRelation { line: usize, col: usize, name: String },
    #[error("{line}:{col}: relation `{name}` declared twice")]
    DuplicateRelation { line: usize, col: usize, name: String },
    #[error("{line}:1: rule has an empty body")]
    EmptyBody { line: usize },
    #[error("{line}:1: rule has an empty head")]
    EmptyHead { line: usize },
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
}

impl DslError {
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            DslError::Syntax { line, col, .. }
            | DslError::ArityMismatch { line, col, .. }
            | DslError::UndeclaredRelation { line, col, .. }
            | DslError::DuplicateRelation { line, col, .. } => Some((*line, *col)),
            DslError::EmptyBody { line } | DslError::EmptyHead { line } => Some((*line, 1)),
            DslError::InvalidUtf8 => None,
        }
    }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Rule,
    Fact,
}

/// Terms as written in the source, before variable numbering.
enum RawTerm {
    Name(String),
    Const(String),
    Null(u32),
}

struct RawAtom {
    rel: RelId,
    args: Vec<RawTerm>,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    sig: &'a Signature,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, msg: impl Into<String>) -> DslError {
        DslError::Syntax { line: self.line, col: self.col(), msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_ident(self.chars[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<u32, DslError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| DslError::Syntax { line: self.line, col: start + 1, msg: "expected number".into() })
    }

    fn term(&mut self, ctx: Ctx) -> Result<RawTerm, DslError> {
        self.skip_ws();
        match self.peek() {
            Some('\'') => {
                self.pos += 1;
                Ok(RawTerm::Const(self.ident()?))
            }
            Some('$') if ctx == Ctx::Fact => {
                self.pos += 1;
                Ok(RawTerm::Null(self.number()?))
            }
            _ => {
                let name = self.ident()?;
                Ok(match ctx {
                    Ctx::Rule => RawTerm::Name(name),
                    Ctx::Fact => RawTerm::Const(name),
                })
            }
        }
    }

    fn atom(&mut self, ctx: Ctx) -> Result<RawAtom, DslError> {
        self.skip_ws();
        let col = self.col();
        let name = self.ident()?;
        let rel = self
            .sig
            .lookup(&name)
            .ok_or(DslError::UndeclaredRelation { line: self.line, col, name: name.clone() })?;
        self.expect('(')?;
        let mut args = vec![self.term(ctx)?];
        while self.eat(',') {
            args.push(self.term(ctx)?);
        }
        self.expect(')')?;
        let expected = self.sig.arity(rel);
        if args.len() != expected {
            return Err(DslError::ArityMismatch { line: self.line, col, rel: name, expected, found: args.len() });
        }
        Ok(RawAtom { rel, args })
    }

    /// Comma-separated atoms, possibly empty when `stop` follows immediately.
    fn atom_list(&mut self, ctx: Ctx, stop: impl Fn(&mut Self) -> bool) -> Result<Vec<RawAtom>, DslError> {
        let mut out = Vec::new();
        if stop(self) {
            return Ok(out);
        }
        out.push(self.atom(ctx)?);
        while self.eat(',') {
            out.push(self.atom(ctx)?);
        }
        Ok(out)
    }

    fn at_arrow(&mut self) -> bool {
        self.skip_ws();
        self.chars.get(self.pos) == Some(&'-') && self.chars.get(self.pos + 1) == Some(&'>')
    }
}

/// Numbers variable names by first occurrence across the given atom lists.
fn resolve(lists: &[&[RawAtom]]) -> (Vec<Vec<Atom>>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for list in lists {
        let mut atoms = Vec::new();
        for raw in list.iter() {
            let args = raw
                .args
                .iter()
                .map(|t| match t {
                    RawTerm::Name(n) => {
                        let id = match names.iter().position(|m| m == n) {
                            Some(i) => i,
                            None => {
                                names.push(n.clone());
                                names.len() - 1
                            }
                        };
                        Term::Var(id as u32)
                    }
                    RawTerm::Const(c) => Term::Const(Sym::new(c)),
                    RawTerm::Null(n) => Term::Null(*n),
                })
                .collect();
            atoms.push(Atom::new(raw.rel, args));
        }
        out.push(atoms);
    }
    (out, names)
}

pub fn parse_program_bytes(bytes: &[u8]) -> Result<Program, DslError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DslError::InvalidUtf8)?;
    parse_program(text)
}

pub fn parse_program(text: &str) -> Result<Program, DslError> {
    let mut prog = Program::default();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let sig_snapshot = prog.sig.clone();
        let mut cur = Cursor { chars: content.chars().collect(), pos: 0, line, sig: &sig_snapshot };
        if cur.at_end() {
            continue;
        }
        let kw_col = cur.col();
        let kw = cur.ident()?;
        match kw.as_str() {
            "rel" => {
                let name_col = {
                    cur.skip_ws();
                    cur.col()
                };
                let name = cur.ident()?;
                if name.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(DslError::Syntax { line, col: name_col, msg: "relation names start with a letter".into() });
                }
                cur.expect('/')?;
                let arity = cur.number()? as usize;
                if arity == 0 {
                    return Err(cur.err("arity must be positive"));
                }
                let mut kind = RelKind::Principal;
                let mut origin = Origin::Source;
                if !cur.at_end() && cur.peek() != Some('@') {
                    let word = cur.ident()?;
                    if word != "side" {
                        return Err(cur.err(format!("unexpected `{word}`")));
                    }
                    kind = RelKind::Side;
                }
                if cur.eat('@') {
                    let tag = cur.ident()?;
                    let purpose = Purpose::from_tag(&tag).ok_or_else(|| cur.err(format!("unknown tag `{tag}`")))?;
                    origin = Origin::Generated(purpose);
                }
                if !cur.at_end() {
                    return Err(cur.err("trailing input"));
                }
                prog.sig
                    .add(&name, arity, kind, origin)
                    .map_err(|_| DslError::DuplicateRelation { line, col: name_col, name })?;
            }
            "tgd" => {
                let body = cur.atom_list(Ctx::Rule, |c| c.at_arrow())?;
                if !cur.at_arrow() {
                    return Err(cur.err("expected `->`"));
                }
                cur.pos += 2;
                let head = cur.atom_list(Ctx::Rule, |c| c.at_end())?;
                if !cur.at_end() {
                    return Err(cur.err("trailing input"));
                }
                if body.is_empty() {
                    return Err(DslError::EmptyBody { line });
                }
                if head.is_empty() {
                    return Err(DslError::EmptyHead { line });
                }
                let (mut lists, names) = resolve(&[&body, &head]);
                let head = lists.pop().unwrap();
                let body = lists.pop().unwrap();
                prog.tgds.push(Tgd::new(body, head, &names));
            }
            "fact" => {
                let atom = cur.atom(Ctx::Fact)?;
                if !cur.at_end() {
                    return Err(cur.err("trailing input"));
                }
                let (mut lists, _) = resolve(&[std::slice::from_ref(&atom)]);
                prog.instance.insert(lists.pop().unwrap().pop().unwrap());
            }
            "query" => {
                let atoms = cur.atom_list(Ctx::Rule, |c| c.at_end())?;
                if atoms.is_empty() {
                    return Err(cur.err("empty query"));
                }
                if !cur.at_end() {
                    return Err(cur.err("trailing input"));
                }
                let (mut lists, names) = resolve(&[&atoms]);
                prog.queries.push(Cq::new(lists.pop().unwrap(), &names));
            }
            other => {
                return Err(DslError::Syntax { line, col: kw_col, msg: format!("unknown directive `{other}`") });
            }
        }
    }
    Ok(prog)
}

fn write_atom(out: &mut String, sig: &Signature, atom: &Atom, names: &[String], ctx: Ctx) {
    out.push_str(sig.name(atom.rel));
    out.push('(');
    for (i, t) in atom.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match t {
            Term::Var(v) => out.push_str(&names[*v as usize]),
            Term::Const(c) => {
                if ctx == Ctx::Rule {
                    out.push('\'');
                }
                out.push_str(c.as_str());
            }
            Term::Null(n) => {
                let _ = write!(out, "${n}");
            }
        }
    }
    out.push(')');
}

fn write_list(out: &mut String, sig: &Signature, atoms: &[Atom], names: &[String]) {
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_atom(out, sig, a, names, Ctx::Rule);
    }
}

pub fn render_tgd(sig: &Signature, rule: &Tgd) -> String {
    let mut out = String::new();
    write_list(&mut out, sig, &rule.body, &rule.var_names);
    out.push_str(" -> ");
    write_list(&mut out, sig, &rule.head, &rule.var_names);
    out
}

pub fn render_fact(sig: &Signature, fact: &Atom) -> String {
    let mut out = String::new();
    write_atom(&mut out, sig, fact, &[], Ctx::Fact);
    out
}

pub fn render_query(sig: &Signature, q: &Cq) -> String {
    let mut out = String::new();
    write_list(&mut out, sig, &q.atoms, &q.var_names);
    out
}

pub fn render_signature(sig: &Signature) -> String {
    let mut out = String::new();
    for (_, r) in sig.iter() {
        let _ = write!(out, "rel {}/{}", r.name, r.arity);
        if r.kind == RelKind::Side {
            out.push_str(" side");
        }
        if let Origin::Generated(p) = r.origin {
            let _ = write!(out, " @{}", p.tag());
        }
        out.push('\n');
    }
    out
}

pub fn render_program(p: &Program) -> String {
    let mut out = render_signature(&p.sig);
    for r in &p.tgds {
        let _ = writeln!(out, "tgd {}", render_tgd(&p.sig, r));
    }
    for f in p.instance.iter() {
        let _ = writeln!(out, "fact {}", render_fact(&p.sig, f));
    }
    for q in &p.queries {
        let _ = writeln!(out, "query {}", render_query(&p.sig, q));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX9: &str = "rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)\nquery R(x,y), U(y)";

    #[test]
    fn parses_running_example() {
        let p = parse_program(EX9).unwrap();
        assert_eq!(p.sig.len(), 2);
        assert_eq!(p.tgds.len(), 2);
        assert!(!p.tgds[0].is_full());
        assert_eq!(p.tgds[0].existentials().len(), 1);
        assert!(p.tgds[1].is_full());
        assert_eq!(p.instance.len(), 2);
        assert_eq!(p.queries.len(), 1);
    }

    #[test]
    fn renders_running_example() {
        let p = parse_program(EX9).unwrap();
        assert_eq!(render_program(&p), format!("{EX9}\n"));
        assert_eq!(parse_program(&render_program(&p)).unwrap(), p);
    }

    #[test]
    fn arity_mismatch_is_positioned() {
        let err = parse_program("rel R/2\nfact R(a,b,c)").unwrap_err();
        assert!(matches!(err, DslError::ArityMismatch { line: 2, expected: 2, found: 3, .. }));
    }

    #[test]
    fn diagnostics() {
        assert!(matches!(parse_program("fact R(a)"), Err(DslError::UndeclaredRelation { line: 1, .. })));
        assert!(matches!(parse_program("rel R/1\ntgd -> R(x)"), Err(DslError::EmptyBody { line: 2 })));
        assert!(matches!(parse_program("rel R/1\ntgd R(x) ->"), Err(DslError::EmptyHead { line: 2 })));
        assert!(matches!(parse_program("rel R/1\nrel R/2"), Err(DslError::DuplicateRelation { line: 2, .. })));
        assert!(matches!(parse_program("rel R/1\nfoo"), Err(DslError::Syntax { line: 2, col: 1, .. })));
        assert!(matches!(parse_program_bytes(&[0xff, 0xfe]), Err(DslError::InvalidUtf8)));
    }

    #[test]
    fn single_relation_program() {
        let p = parse_program("rel R/2").unwrap();
        assert_eq!(render_program(&p), "rel R/2\n");
    }

    #[test]
    fn constants_tags_and_nulls() {
        let text = "rel R/2\nrel lin_0/2 @lin\nrel P/1 side @const\ntgd R(x,'c) -> lin_0(x,x)\nfact R(a,$3)\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.sig.get(RelId(1)).origin, Origin::Generated(Purpose::Lin));
        assert_eq!(p.sig.get(RelId(2)).kind, RelKind::Side);
        assert!(p.tgds[0].has_constants());
        assert!(p.instance.iter().next().unwrap().args.contains(&Term::Null(3)));
        assert_eq!(render_program(&p), text);
    }
}
