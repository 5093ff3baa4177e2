//! Tree-like chase variants, the bounded entailment oracle and the proof checker.

mod check;
mod run;

pub use check::{check_one_pass_discipline, check_proof, check_shortcut_discipline, ProofError};
pub use run::{bounded_entailment_oracle, run_chase, run_chase_with_query, IllegalStrategyInput};

use serde::Serialize;

use crate::logic::{Atom, Instance, Term, Tgd};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Strategy {
    Tree,
    OnePass,
    PrincipalExempt,
    Shortcut,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "tree" => Some(Strategy::Tree),
            "one-pass" | "one_pass" => Some(Strategy::OnePass),
            "principal-exempt" | "principal_exempt" => Some(Strategy::PrincipalExempt),
            "shortcut" => Some(Strategy::Shortcut),
            _ => None,
        }
    }
}

/// A rule of the program (`Sigma`) or of an auxiliary full rule set such as a
/// saturation (`Closure`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub enum RuleRef {
    Sigma(usize),
    Closure(usize),
}

impl RuleRef {
    pub fn resolve<'a>(self, sigma: &'a [Tgd], closure: &'a [Tgd]) -> Option<&'a Tgd> {
        match self {
            RuleRef::Sigma(i) => sigma.get(i),
            RuleRef::Closure(i) => closure.get(i),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ChaseApplication {
    pub rule: RuleRef,
    pub node: usize,
    /// Values of the body variables `0..n_body_vars`.
    pub trigger: Vec<Term>,
    /// Head atoms under the trigger, existentials replaced by fresh nulls.
    pub derived: Vec<Atom>,
    /// New node created by the step, if any.
    pub child: Option<usize>,
    /// Facts copied from `node` into the child.
    pub inherited: Vec<Atom>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub enum StepKind {
    Chase(ChaseApplication),
    /// A full rule fired into a new child node.
    RelaxedChase(ChaseApplication),
    Propagation { facts: Vec<Atom>, from: usize, to: usize },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ChaseStep {
    pub kind: StepKind,
    pub recently_updated: usize,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChaseNode {
    pub id: usize,
    pub facts: Instance,
    pub parent: Option<usize>,
    /// Index of the step that created the node; `None` for the root.
    pub birth: Option<usize>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChaseRun {
    pub strategy: Strategy,
    pub initial: Vec<Atom>,
    pub steps: Vec<ChaseStep>,
    pub nodes: Vec<ChaseNode>,
    pub budget: usize,
    /// The step budget ran out before the strategy had nothing left to do.
    pub exhausted: bool,
}

impl ChaseRun {
    /// All facts of all nodes.
    pub fn union(&self) -> Instance {
        self.nodes.iter().flat_map(|n| n.facts.iter().cloned()).collect()
    }

    pub fn is_ancestor(&self, anc: usize, mut node: usize) -> bool {
        loop {
            if node == anc {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum OracleVerdict {
    /// The query matches the run's final tree; `matching` gives the query variable values.
    Entailed { matching: Vec<Term>, run: ChaseRun },
    /// No match found. `terminated` means the chase reached a fixpoint, so the
    /// query is certainly not entailed.
    Unknown { terminated: bool },
}

impl OracleVerdict {
    pub fn is_entailed(&self) -> bool {
        matches!(self, OracleVerdict::Entailed { .. })
    }

    pub fn is_certain_no(&self) -> bool {
        matches!(self, OracleVerdict::Unknown { terminated: true })
    }
}

/// Some fact of `node` contains every value of `f`.
pub fn guarded_in(f: &Atom, node: &Instance) -> bool {
    let vals = f.terms();
    node.iter().any(|g| vals.iter().all(|v| g.args.contains(v)))
}

/// Every value of `f` occurs among `guard`'s values.
pub fn guarded_by(f: &Atom, guard: &[Atom]) -> bool {
    f.args.iter().all(|v| guard.iter().any(|g| g.args.contains(v)))
}
