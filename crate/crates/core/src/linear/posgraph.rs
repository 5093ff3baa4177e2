use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::logic::{RelId, Signature, Term, Tgd};

pub type Position = (RelId, usize);

/// Basic position graph: an edge per (rule, exported variable, body position,
/// head position). Existential variables contribute nothing.
#[derive(Clone, Debug, Default)]
pub struct PositionGraph {
    pub edges: Vec<(Position, Position, usize)>,
}

impl PositionGraph {
    pub fn build<'a>(rules: impl IntoIterator<Item = (usize, &'a Tgd)>) -> PositionGraph {
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (ri, r) in rules {
            let nb = r.n_body_vars() as u32;
            for b in &r.body {
                for (bp, bt) in b.args.iter().enumerate() {
                    let Term::Var(v) = *bt else { continue };
                    if v >= nb {
                        continue;
                    }
                    for h in &r.head {
                        for (hp, ht) in h.args.iter().enumerate() {
                            if *ht == Term::Var(v) {
                                let e = ((b.rel, bp), (h.rel, hp), ri);
                                if seen.insert(e) {
                                    edges.push(e);
                                }
                            }
                        }
                    }
                }
            }
        }
        PositionGraph { edges }
    }

    /// Some cycle as a closed walk of positions (first position repeated at the end).
    pub fn find_cycle(&self) -> Option<Vec<Position>> {
        let mut adj: HashMap<Position, Vec<Position>> = HashMap::new();
        for (a, b, _) in &self.edges {
            adj.entry(*a).or_default().push(*b);
        }
        let mut nodes: Vec<Position> = adj.keys().copied().collect();
        nodes.sort();
        // 0 = unseen, 1 = on stack, 2 = done
        let mut state: HashMap<Position, u8> = HashMap::new();
        for start in nodes {
            if state.get(&start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(Position, usize)> = vec![(start, 0)];
            state.insert(start, 1);
            while let Some((n, i)) = stack.last().copied() {
                let succ = adj.get(&n).map_or(&[][..], |v| v.as_slice());
                if i < succ.len() {
                    stack.last_mut().unwrap().1 += 1;
                    let m = succ[i];
                    match state.get(&m).copied().unwrap_or(0) {
                        0 => {
                            state.insert(m, 1);
                            stack.push((m, 0));
                        }
                        1 => {
                            let from = stack.iter().position(|(p, _)| *p == m).unwrap();
                            let mut cyc: Vec<Position> = stack[from..].iter().map(|(p, _)| *p).collect();
                            cyc.push(m);
                            return Some(cyc);
                        }
                        _ => {}
                    }
                } else {
                    state.insert(n, 2);
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle().is_none()
    }
}

/// Rule indices split into a width-bounded part and a part with an acyclic
/// position graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SemiWidthDecomposition {
    pub sigma1: Vec<usize>,
    pub sigma2: Vec<usize>,
    pub w: usize,
}

impl SemiWidthDecomposition {
    pub fn verify(&self, rules: &[Tgd]) -> bool {
        let mut all: Vec<usize> = self.sigma1.iter().chain(&self.sigma2).copied().collect();
        all.sort();
        all == (0..rules.len()).collect::<Vec<_>>()
            && self.sigma1.iter().all(|&i| rules[i].width() <= self.w)
            && PositionGraph::build(self.sigma2.iter().map(|&i| (i, &rules[i]))).is_acyclic()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("position graph of the wide rules has a cycle through {} positions", cycle.len() - 1)]
pub struct NotDecomposable {
    pub cycle: Vec<Position>,
}

impl NotDecomposable {
    pub fn render(&self, sig: &Signature) -> String {
        self.cycle.iter().map(|(r, p)| format!("{}[{}]", sig.name(*r), p + 1)).collect::<Vec<_>>().join(" -> ")
    }
}

/// Greedy decomposition: rules of width ≤ `w` go to Σ₁, the rest to Σ₂.
pub fn semi_width(rules: &[Tgd], w: usize) -> Result<SemiWidthDecomposition, NotDecomposable> {
    let (sigma1, sigma2): (Vec<usize>, Vec<usize>) = (0..rules.len()).partition(|&i| rules[i].width() <= w);
    if let Some(cycle) = PositionGraph::build(sigma2.iter().map(|&i| (i, &rules[i]))).find_cycle() {
        return Err(NotDecomposable { cycle });
    }
    Ok(SemiWidthDecomposition { sigma1, sigma2, w })
}

/// Uses a prescribed split, checking it.
pub fn decomposition_from_split(rules: &[Tgd], sigma1: Vec<usize>, w: usize) -> Result<SemiWidthDecomposition, NotDecomposable> {
    let sigma2: Vec<usize> = (0..rules.len()).filter(|i| !sigma1.contains(i)).collect();
    if let Some(cycle) = PositionGraph::build(sigma2.iter().map(|&i| (i, &rules[i]))).find_cycle() {
        return Err(NotDecomposable { cycle });
    }
    let d = SemiWidthDecomposition { sigma1, sigma2, w };
    if !d.sigma1.iter().all(|&i| rules[i].width() <= w) {
        // A narrow Σ₁ is part of the contract; report the widest rule as a trivial cycle.
        let bad = d.sigma1.iter().copied().find(|&i| rules[i].width() > w).unwrap();
        let pos = (rules[bad].body[0].rel, 0);
        return Err(NotDecomposable { cycle: vec![pos, pos] });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    #[test]
    fn swap_rule_has_a_two_cycle() {
        let p = parse_program("rel R/2\ntgd R(x,y) -> R(y,x)").unwrap();
        let e = semi_width(&p.tgds, 0).unwrap_err();
        assert_eq!(e.cycle.len(), 3);
        assert_eq!(e.render(&p.sig).matches("R[").count(), 3);
        assert!(e.render(&p.sig) == "R[1] -> R[2] -> R[1]" || e.render(&p.sig) == "R[2] -> R[1] -> R[2]");
        assert!(semi_width(&p.tgds, 2).is_ok());
    }

    #[test]
    fn empty_is_decomposable() {
        let d = semi_width(&[], 0).unwrap();
        assert!(d.sigma1.is_empty() && d.sigma2.is_empty());
        assert!(d.verify(&[]));
    }

    #[test]
    fn existentials_add_no_edges() {
        let p = parse_program("rel R/2\ntgd R(x,y) -> R(y,z)").unwrap();
        let g = PositionGraph::build(p.tgds.iter().enumerate());
        assert_eq!(g.edges.len(), 1);
        assert!(g.is_acyclic());
    }
}
