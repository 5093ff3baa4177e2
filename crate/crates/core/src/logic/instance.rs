use std::collections::HashMap;

use indexmap::IndexSet;

use super::syntax::{Atom, RelId, Term};

/// Insertion-ordered fact set with a per-relation index. Equality is set equality.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    facts: IndexSet<Atom>,
    by_rel: HashMap<RelId, Vec<usize>>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.facts == other.facts
    }
}

impl Eq for Instance {}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        let rel = atom.rel;
        let (idx, fresh) = self.facts.insert_full(atom);
        if fresh {
            self.by_rel.entry(rel).or_default().push(idx);
        }
        fresh
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.facts.contains(atom)
    }

    pub fn index_of(&self, atom: &Atom) -> Option<usize> {
        self.facts.get_index_of(atom)
    }

    pub fn get(&self, idx: usize) -> &Atom {
        &self.facts[idx]
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    pub fn of_rel(&self, rel: RelId) -> impl Iterator<Item = &Atom> {
        self.by_rel.get(&rel).into_iter().flatten().map(move |&i| &self.facts[i])
    }

    pub fn rel_indices(&self, rel: RelId) -> &[usize] {
        self.by_rel.get(&rel).map_or(&[], |v| v.as_slice())
    }

    /// Values in order of first occurrence.
    pub fn adom(&self) -> IndexSet<Term> {
        self.facts.iter().flat_map(|a| a.args.iter().copied()).collect()
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut inst = Instance::new();
        for a in iter {
            inst.insert(a);
        }
        inst
    }
}

impl Extend<Atom> for Instance {
    fn extend<I: IntoIterator<Item = Atom>>(&mut self, iter: I) {
        for a in iter {
            self.insert(a);
        }
    }
}
