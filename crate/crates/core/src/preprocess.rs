//! Normalization into single-headed, constant-free rules that strongly obey the
//! side signature.

use std::collections::HashSet;

use indexmap::IndexMap;

use crate::dsl::Program;
use crate::logic::{analyze_rule, Atom, Cq, Purpose, RelId, RelKind, Signature, SignatureStats, Sym, Term, Tgd};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("rule {rule} has a constant in its head")]
    HeadConstant { rule: usize },
    #[error("rule {rule} is not guarded")]
    Unguarded { rule: usize },
    #[error("rule {rule} does not obey the side signature")]
    NotObeying { rule: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub enum Transformation {
    MultiheadSplit,
    ConstantElim,
    GuardIntro,
    HeadRedirect,
    SideTwin,
    HomClosure,
}

#[derive(Clone, PartialEq, Eq, Debug, serde::Serialize)]
pub struct RuleOrigin {
    /// Index of the input rule, `None` for rules introduced from scratch.
    pub source: Option<usize>,
    pub tags: Vec<Transformation>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, serde::Serialize)]
pub struct NormalizationTrace {
    /// Generated relation name → provenance.
    pub symbols: IndexMap<String, String>,
    /// One entry per output rule.
    pub rules: Vec<RuleOrigin>,
    /// Set when the twin-relation step was skipped because the rules already
    /// had principal guards and principal heads on non-full rules.
    pub twins_skipped: bool,
}

impl NormalizationTrace {
    fn identity(n: usize) -> NormalizationTrace {
        NormalizationTrace {
            rules: (0..n).map(|i| RuleOrigin { source: Some(i), tags: vec![] }).collect(),
            ..Default::default()
        }
    }

    fn derive(&self, from: usize, tag: Transformation) -> RuleOrigin {
        let mut o = self.rules[from].clone();
        if !o.tags.contains(&tag) {
            o.tags.push(tag);
        }
        o
    }
}

/// Ordered distinct constants of an atom list.
fn constants_of(atoms: &[Atom], out: &mut Vec<Sym>) {
    for a in atoms {
        for t in &a.args {
            if let Term::Const(c) = t {
                if !out.contains(c) {
                    out.push(*c);
                }
            }
        }
    }
}

/// Replaces each constant `c` by a fresh variable `x_c` and appends `P_c(x_c)`.
fn lift_constants(atoms: &mut Vec<Atom>, names: &mut Vec<String>, markers: &IndexMap<Sym, RelId>) {
    let mut present = Vec::new();
    constants_of(atoms, &mut present);
    let first = atoms.iter().flat_map(|a| a.args.iter()).filter_map(Term::var).max().map_or(0, |v| v + 1);
    for (v, c) in (first..).zip(present) {
        while names.len() < v as usize {
            names.push(format!("x{}", names.len()));
        }
        names.push(format!("x_{}", c.as_str()));
        for a in atoms.iter_mut() {
            for t in a.args.iter_mut() {
                if *t == Term::Const(c) {
                    *t = Term::Var(v);
                }
            }
        }
        atoms.push(Atom::new(markers[&c], vec![Term::Var(v)]));
    }
}

fn eliminate_constants_traced(p: &Program, trace: &mut NormalizationTrace) -> Result<Program, PreprocessError> {
    let mut consts = Vec::new();
    for (i, r) in p.tgds.iter().enumerate() {
        if r.head.iter().any(|a| a.args.iter().any(|t| matches!(t, Term::Const(_)))) {
            return Err(PreprocessError::HeadConstant { rule: i });
        }
        constants_of(&r.body, &mut consts);
    }
    for q in &p.queries {
        constants_of(&q.atoms, &mut consts);
    }
    if consts.is_empty() {
        return Ok(p.clone());
    }
    let mut out = p.clone();
    let mut markers = IndexMap::new();
    for c in &consts {
        let id = out.sig.add_fresh(&format!("const_{}", c.as_str()), 1, RelKind::Side, Purpose::Const);
        trace.symbols.insert(out.sig.name(id).to_owned(), format!("marker for constant {}", c.as_str()));
        markers.insert(*c, id);
    }
    let adom = p.instance.adom();
    for (c, rel) in &markers {
        if adom.contains(&Term::Const(*c)) {
            out.instance.insert(Atom::new(*rel, vec![Term::Const(*c)]));
        }
    }
    for (i, r) in p.tgds.iter().enumerate() {
        if !r.has_constants() {
            continue;
        }
        let mut body = r.body.clone();
        let mut names = r.var_names.clone();
        // Head variables that are existential keep their ids; shift them past the new ones.
        let shift = consts.len() as u32;
        let nb = r.n_body_vars() as u32;
        let mut head = r.head.clone();
        for a in head.iter_mut() {
            for t in a.args.iter_mut() {
                if let Term::Var(v) = *t {
                    if v >= nb {
                        *t = Term::Var(v + shift);
                    }
                }
            }
        }
        let mut body_names: Vec<String> = names.drain(..nb as usize).collect();
        lift_constants(&mut body, &mut body_names, &markers);
        while body_names.len() < (nb + shift) as usize {
            body_names.push(format!("_unused{}", body_names.len()));
        }
        body_names.extend(names);
        out.tgds[i] = Tgd::new(body, head, &body_names);
        trace.rules[i].tags.push(Transformation::ConstantElim);
    }
    for (i, q) in p.queries.iter().enumerate() {
        let mut atoms = q.atoms.clone();
        let mut names = q.var_names.clone();
        lift_constants(&mut atoms, &mut names, &markers);
        out.queries[i] = Cq::new(atoms, &names);
    }
    Ok(out)
}

/// Replaces each constant in rule bodies and queries by a variable guarded
/// through a fresh unary side relation.
pub fn eliminate_constants(p: &Program) -> Result<Program, PreprocessError> {
    eliminate_constants_traced(p, &mut NormalizationTrace::identity(p.tgds.len()))
}

fn split_multiheads_traced(p: &Program, trace: &mut NormalizationTrace) -> Result<Program, PreprocessError> {
    let mut out = p.clone();
    out.tgds.clear();
    let mut origins = Vec::new();
    for (i, r) in p.tgds.iter().enumerate() {
        if !r.is_guarded() {
            return Err(PreprocessError::Unguarded { rule: i });
        }
        if r.head.len() == 1 {
            out.tgds.push(r.clone());
            origins.push(trace.rules[i].clone());
            continue;
        }
        let mut vars: Vec<u32> = r.exported();
        vars.extend(r.existentials());
        let id = out.sig.add_fresh(&format!("split_{i}"), vars.len(), RelKind::Principal, Purpose::Split);
        trace.symbols.insert(out.sig.name(id).to_owned(), format!("head of input rule {i}"));
        let p_atom = Atom::new(id, vars.iter().map(|v| Term::Var(*v)).collect());
        out.tgds.push(Tgd::new(r.body.clone(), vec![p_atom.clone()], &r.var_names));
        origins.push(trace.derive(i, Transformation::MultiheadSplit));
        for h in &r.head {
            out.tgds.push(Tgd::new(vec![p_atom.clone()], vec![h.clone()], &r.var_names));
            origins.push(trace.derive(i, Transformation::MultiheadSplit));
        }
    }
    trace.rules = origins;
    Ok(out)
}

/// Splits every multi-atom head through a fresh principal relation.
pub fn split_multiheads(p: &Program) -> Result<Program, PreprocessError> {
    split_multiheads_traced(p, &mut NormalizationTrace::identity(p.tgds.len()))
}

fn check_obedience(p: &Program) -> Result<(), PreprocessError> {
    for (i, r) in p.tgds.iter().enumerate() {
        let m = analyze_rule(r, &p.sig);
        if !m.is_guarded {
            return Err(PreprocessError::Unguarded { rule: i });
        }
        if !m.obeys_side {
            return Err(PreprocessError::NotObeying { rule: i });
        }
    }
    Ok(())
}

/// True when every rule has a principal body atom and every non-full rule a
/// principal head, so twin relations are unnecessary.
pub fn has_principal_structure(p: &Program) -> bool {
    p.tgds.iter().all(|r| {
        r.body.iter().any(|a| p.sig.is_principal(a.rel))
            && (r.is_full() || r.head.iter().all(|a| p.sig.is_principal(a.rel)))
    })
}

fn twin_step(p: &Program, trace: &mut NormalizationTrace) -> Program {
    let mut out = p.clone();
    let mut twin: IndexMap<RelId, RelId> = IndexMap::new();
    for id in p.sig.ids() {
        if p.sig.is_side(id) {
            let name = format!("{}_prime", p.sig.name(id));
            let t = out.sig.add_fresh(&name, p.sig.arity(id), RelKind::Principal, Purpose::Twin);
            trace.symbols.insert(out.sig.name(t).to_owned(), format!("principal twin of {}", p.sig.name(id)));
            twin.insert(id, t);
        }
    }
    out.tgds.clear();
    let mut origins = Vec::new();
    for (i, r) in p.tgds.iter().enumerate() {
        let mut origin = trace.rules[i].clone();
        let mut body = r.body.clone();
        if !body.iter().any(|a| p.sig.is_principal(a.rel)) {
            let guard = r
                .guards()
                .into_iter()
                .min_by(|&a, &b| {
                    let key = |i: usize| {
                        let at = &r.body[i];
                        (p.sig.name(at.rel).to_owned(), at.args.clone())
                    };
                    key(a).cmp(&key(b))
                })
                .expect("guarded rule");
            let g = &r.body[guard];
            body.insert(0, Atom::new(twin[&g.rel], g.args.clone()));
            origin.tags.push(Transformation::GuardIntro);
        }
        let mut head = r.head.clone();
        let mut redirected = false;
        for a in head.iter_mut() {
            if let Some(&t) = twin.get(&a.rel) {
                a.rel = t;
                redirected = true;
            }
        }
        if redirected {
            origin.tags.push(Transformation::HeadRedirect);
        }
        out.tgds.push(Tgd::new(body, head, &r.var_names));
        origins.push(origin);
    }
    for (&side, &t) in &twin {
        let args: Vec<Term> = (0..p.sig.arity(side) as u32).map(Term::Var).collect();
        out.tgds.push(Tgd::unnamed(vec![Atom::new(t, args.clone())], vec![Atom::new(side, args)]));
        origins.push(RuleOrigin { source: None, tags: vec![Transformation::SideTwin] });
    }
    for f in p.instance.iter() {
        if let Some(&t) = twin.get(&f.rel) {
            out.instance.insert(Atom::new(t, f.args.clone()));
        }
    }
    trace.rules = origins;
    out
}

/// All set partitions of `0..n` as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            go(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    go(1, n, &mut cur, 0, &mut out);
    out
}

fn hom_closure(p: &Program, trace: &mut NormalizationTrace) -> Program {
    let mut out = p.clone();
    let mut seen: HashSet<(Vec<Atom>, Vec<Atom>)> = p.tgds.iter().map(Tgd::shape).collect();
    for (i, r) in p.tgds.iter().enumerate() {
        let exported = r.exported();
        for part in set_partitions(exported.len()) {
            if part.iter().enumerate().all(|(k, &b)| k == b) {
                continue;
            }
            let rep = |v: u32| -> u32 {
                match exported.iter().position(|&e| e == v) {
                    Some(k) => exported[part.iter().position(|&b| b == part[k]).unwrap()],
                    None => v,
                }
            };
            let map = |a: &Atom| a.map_terms(|t| if let Term::Var(v) = t { Term::Var(rep(v)) } else { t });
            let body: Vec<Atom> = r.body.iter().map(map).collect();
            let head: Vec<Atom> = r.head.iter().map(map).collect();
            let rule = Tgd::new(body, head, &r.var_names);
            if seen.insert(rule.shape()) {
                out.tgds.push(rule);
                let o = trace.derive(i, Transformation::HomClosure);
                trace.rules.push(o);
            }
        }
    }
    out
}

fn enforce_traced(p: &Program, trace: &mut NormalizationTrace, twins: bool) -> Result<Program, PreprocessError> {
    check_obedience(p)?;
    for (i, r) in p.tgds.iter().enumerate() {
        if r.head.len() != 1 {
            return Err(PreprocessError::NotObeying { rule: i });
        }
    }
    let stepped = if twins { twin_step(p, trace) } else { p.clone() };
    trace.twins_skipped = !twins;
    Ok(hom_closure(&stepped, trace))
}

/// Literal strong-obedience construction: principal twins for every side
/// relation, redirected side heads, guard twins, and homomorphism closure.
pub fn enforce_strong_obedience(p: &Program) -> Result<(Program, NormalizationTrace), PreprocessError> {
    let mut trace = NormalizationTrace::identity(p.tgds.len());
    let out = enforce_traced(p, &mut trace, true)?;
    Ok((out, trace))
}

/// Full normalization. The twin step only runs when some rule lacks a
/// principal body atom or some non-full rule has a side head.
pub fn normalize(p: &Program) -> Result<(Program, NormalizationTrace), PreprocessError> {
    let mut trace = NormalizationTrace::identity(p.tgds.len());
    let p1 = eliminate_constants_traced(p, &mut trace)?;
    let p2 = split_multiheads_traced(&p1, &mut trace)?;
    let twins = !has_principal_structure(&p2);
    let out = enforce_traced(&p2, &mut trace, twins)?;
    debug_assert!(check_normalized(&out).is_ok());
    Ok((out, trace))
}

/// Post-normalization conditions; returns the index of the first offending rule.
pub fn check_normalized(p: &Program) -> Result<(), (usize, &'static str)> {
    let stats = SignatureStats::compute(&p.sig, &p.tgds);
    let shapes: HashSet<_> = p.tgds.iter().map(Tgd::shape).collect();
    for (i, r) in p.tgds.iter().enumerate() {
        if r.head.len() != 1 {
            return Err((i, "multi-head"));
        }
        if r.has_constants() {
            return Err((i, "constant"));
        }
        let m = analyze_rule(r, &p.sig);
        if m.principal_guard_count != 1 || !m.obeys_side {
            return Err((i, "principal guard"));
        }
        if !r.is_full() && !p.sig.is_principal(r.head[0].rel) {
            return Err((i, "side head on non-full rule"));
        }
        if m.width > stats.w_prime {
            return Err((i, "width"));
        }
        let exported = r.exported();
        for part in set_partitions(exported.len()) {
            let rep = |v: u32| match exported.iter().position(|&e| e == v) {
                Some(k) => exported[part.iter().position(|&b| b == part[k]).unwrap()],
                None => v,
            };
            let map = |a: &Atom| a.map_terms(|t| if let Term::Var(v) = t { Term::Var(rep(v)) } else { t });
            let img = Tgd::new(r.body.iter().map(map).collect(), r.head.iter().map(map).collect(), &r.var_names);
            if !shapes.contains(&img.shape()) {
                return Err((i, "not homomorphism-closed"));
            }
        }
    }
    Ok(())
}

/// Upper bound on the normalized rule count: `|Σ|·(B(w)+1) + n′` with `B` the Bell number.
pub fn rule_count_bound(input_rules: usize, split_rules: usize, max_exported: usize, n_side: usize) -> usize {
    let bell = set_partitions(max_exported).len();
    (input_rules + split_rules) * (bell + 1) + n_side
}

pub fn signature_of(p: &Program) -> &Signature {
    &p.sig
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, render_tgd};

    fn rules(p: &Program) -> Vec<String> {
        p.tgds.iter().map(|r| render_tgd(&p.sig, r)).collect()
    }

    #[test]
    fn partitions_are_bell_numbers() {
        let counts: Vec<usize> = (0..6).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52]);
    }

    #[test]
    fn split_example() {
        let p = parse_program("rel B/1\nrel R/2\nrel S/1\ntgd B(x) -> R(x,y), S(y)").unwrap();
        let out = split_multiheads(&p).unwrap();
        assert_eq!(rules(&out), vec!["B(x) -> split_0(x,y)", "split_0(x,y) -> R(x,y)", "split_0(x,y) -> S(y)"]);
        let single = parse_program("rel R/2\ntgd R(x,y) -> R(y,z)").unwrap();
        assert_eq!(split_multiheads(&single).unwrap(), single);
    }

    #[test]
    fn constant_example() {
        let p = parse_program("rel R/2\nrel S/1\ntgd R(x,'c) -> S(x)\nfact R(a,c)\nquery R('c,y)").unwrap();
        let out = eliminate_constants(&p).unwrap();
        assert_eq!(rules(&out), vec!["R(x,x_c), const_c(x_c) -> S(x)"]);
        assert_eq!(out.instance.len(), 2);
        assert_eq!(crate::dsl::render_query(&out.sig, &out.queries[0]), "R(x_c,y), const_c(x_c)");
        let bad = parse_program("rel S/1\nrel R/1\ntgd R(x) -> S('c)").unwrap();
        assert_eq!(eliminate_constants(&bad), Err(PreprocessError::HeadConstant { rule: 0 }));
    }

    #[test]
    fn guard_twin_example() {
        let p = parse_program("rel R/4\nrel T/1 side\nrel U/2 side\ntgd U(x,y), U(x,x) -> U(y,y)").unwrap();
        let (out, trace) = enforce_strong_obedience(&p).unwrap();
        let rs = rules(&out);
        assert_eq!(rs[0], "U_prime(x,y), U(x,y), U(x,x) -> U_prime(y,y)");
        assert!(rs.contains(&"U_prime(x1,x2) -> U(x1,x2)".to_owned()));
        assert!(rs.contains(&"T_prime(x1) -> T(x1)".to_owned()));
        assert!(trace.rules[0].tags.contains(&Transformation::GuardIntro));
        assert!(check_normalized(&out).is_ok());
    }

    #[test]
    fn head_redirect_example() {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y), U(x) -> U(y)\nfact U(a)").unwrap();
        let (out, _) = enforce_strong_obedience(&p).unwrap();
        assert_eq!(rules(&out), vec!["R(x,y), U(x) -> U_prime(y)", "U_prime(x1) -> U(x1)"]);
        assert_eq!(out.instance.len(), 2);
    }

    #[test]
    fn hom_closure_example() {
        let p = parse_program("rel R/2\nrel S/3\ntgd R(x,y) -> S(x,y,z)").unwrap();
        let (out, _) = normalize(&p).unwrap();
        assert_eq!(rules(&out), vec!["R(x,y) -> S(x,y,z)", "R(x,x) -> S(x,x,z)"]);
    }

    #[test]
    fn not_obeying() {
        let p = parse_program("rel R/2\nrel P/2\ntgd R(x,y), P(x,y) -> R(y,x)").unwrap();
        assert_eq!(enforce_strong_obedience(&p).unwrap_err(), PreprocessError::NotObeying { rule: 0 });
    }
}
