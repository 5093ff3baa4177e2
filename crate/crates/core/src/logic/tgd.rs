use serde::{Deserialize, Serialize};

use super::syntax::{Atom, Signature, Term};

/// Renumbers variables densely by first occurrence across `groups` (in order)
/// and carries their printable names along.
fn renumber(groups: &mut [&mut Vec<Atom>], names: &[String]) -> Vec<String> {
    let mut map: Vec<(u32, u32)> = Vec::new();
    let mut out_names = Vec::new();
    for group in groups.iter_mut() {
        for atom in group.iter_mut() {
            for t in atom.args.iter_mut() {
                if let Term::Var(v) = *t {
                    let new = match map.iter().find(|(old, _)| *old == v) {
                        Some((_, n)) => *n,
                        None => {
                            let n = map.len() as u32;
                            map.push((v, n));
                            let name = names
                                .get(v as usize)
                                .cloned()
                                .unwrap_or_else(|| format!("x{v}"));
                            out_names.push(name);
                            n
                        }
                    };
                    *t = Term::Var(new);
                }
            }
        }
    }
    dedup_names(&mut out_names);
    out_names
}

fn dedup_names(names: &mut [String]) {
    for i in 0..names.len() {
        if names[..i].contains(&names[i]) {
            let base = names[i].clone();
            let mut k = 1;
            loop {
                let cand = format!("{base}_{k}");
                if !names.contains(&cand) {
                    names[i] = cand;
                    break;
                }
                k += 1;
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Tgd {
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
    pub var_names: Vec<String>,
    n_body_vars: u32,
}

impl Tgd {
    /// Builds a rule, renumbering variables by first occurrence (body, then head).
    /// `names[v]` is the printable name of input variable `v`.
    pub fn new(mut body: Vec<Atom>, mut head: Vec<Atom>, names: &[String]) -> Tgd {
        let var_names = renumber(&mut [&mut body, &mut head], names);
        let n_body_vars = body
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(Term::var)
            .map(|v| v + 1)
            .max()
            .unwrap_or(0);
        Tgd { body, head, var_names, n_body_vars }
    }

    /// Builds a rule naming variable `v` as `x<v+1>`.
    pub fn unnamed(body: Vec<Atom>, head: Vec<Atom>) -> Tgd {
        let max = body
            .iter()
            .chain(head.iter())
            .flat_map(|a| a.args.iter())
            .filter_map(Term::var)
            .max()
            .map_or(0, |v| v + 1);
        let names: Vec<String> = (0..max).map(|v| format!("x{}", v + 1)).collect();
        Tgd::new(body, head, &names)
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    /// Body variables are exactly `0..n_body_vars`.
    pub fn n_body_vars(&self) -> usize {
        self.n_body_vars as usize
    }

    pub fn is_full(&self) -> bool {
        self.n_vars() == self.n_body_vars()
    }

    pub fn is_linear(&self) -> bool {
        self.body.len() == 1
    }

    pub fn exported(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for a in &self.head {
            for v in a.vars() {
                if v < self.n_body_vars && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn existentials(&self) -> Vec<u32> {
        (self.n_body_vars..self.n_vars() as u32).collect()
    }

    pub fn width(&self) -> usize {
        self.exported().len()
    }

    /// Indices of body atoms containing every body variable.
    pub fn guards(&self) -> Vec<usize> {
        let n = self.n_body_vars;
        self.body
            .iter()
            .enumerate()
            .filter(|(_, a)| (0..n).all(|v| a.args.contains(&Term::Var(v))))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_guarded(&self) -> bool {
        !self.guards().is_empty()
    }

    pub fn principal_guard(&self, sig: &Signature) -> Option<usize> {
        self.guards().into_iter().find(|&i| sig.is_principal(self.body[i].rel))
    }

    pub fn has_constants(&self) -> bool {
        self.body
            .iter()
            .chain(self.head.iter())
            .any(|a| a.args.iter().any(|t| matches!(t, Term::Const(_))))
    }

    pub fn single_head(&self) -> &Atom {
        &self.head[0]
    }

    pub fn var_name(&self, v: u32) -> &str {
        &self.var_names[v as usize]
    }

    /// Structural key ignoring variable names: equal keys mean equal up to renaming
    /// given the same atom order.
    pub fn shape(&self) -> (Vec<Atom>, Vec<Atom>) {
        (self.body.clone(), self.head.clone())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Cq {
    pub atoms: Vec<Atom>,
    pub var_names: Vec<String>,
}

impl Cq {
    pub fn new(mut atoms: Vec<Atom>, names: &[String]) -> Cq {
        let var_names = renumber(&mut [&mut atoms], names);
        Cq { atoms, var_names }
    }

    pub fn unnamed(atoms: Vec<Atom>) -> Cq {
        let max = atoms.iter().flat_map(|a| a.args.iter()).filter_map(Term::var).max().map_or(0, |v| v + 1);
        let names: Vec<String> = (0..max).map(|v| format!("x{}", v + 1)).collect();
        Cq::new(atoms, &names)
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct RuleMetrics {
    pub width: usize,
    /// `None` stands for infinite breadth (no principal guard).
    pub breadth: Option<usize>,
    pub is_guarded: bool,
    pub obeys_side: bool,
    pub principal_guard_count: usize,
}

pub fn analyze_rule(rule: &Tgd, sig: &Signature) -> RuleMetrics {
    let guards = rule.guards();
    let obeys_side = guards.iter().any(|&g| {
        rule.body.iter().enumerate().all(|(i, a)| i == g || sig.is_side(a.rel))
    });
    let principal: Vec<usize> =
        guards.iter().copied().filter(|&g| sig.is_principal(rule.body[g].rel)).collect();
    let breadth = principal
        .iter()
        .map(|&g| {
            let mut vs: Vec<u32> = Vec::new();
            for (i, a) in rule.body.iter().enumerate() {
                if i != g {
                    for v in a.vars() {
                        if !vs.contains(&v) {
                            vs.push(v);
                        }
                    }
                }
            }
            vs.len()
        })
        .min();
    RuleMetrics {
        width: rule.width(),
        breadth,
        is_guarded: !guards.is_empty(),
        obeys_side,
        principal_guard_count: principal.len(),
    }
}
