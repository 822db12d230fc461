//! Internal label storage for the labelled simulators.
//!
//! Labels live once in a [`LabelArena`] as parent-pointer nodes. Each
//! population keeps a [`Members`] view over the arena: the type of every
//! present node, per-type live lists for uniform sampling, and for every
//! node the number of present descendants, kept up to date along the
//! ancestor path.

use std::collections::HashMap;

use rand::Rng;

use super::label::{IndividualLabel, LabeledPopulation};
use crate::error::{Error, Result};
use crate::forward::PopulationState;
use crate::rng::SimRng;
use crate::types::Type;

pub(crate) type NodeId = u32;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    parent: NodeId,
    last: u32,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LabelArena {
    nodes: Vec<Node>,
    lookup: HashMap<(NodeId, u32), NodeId>,
}

impl LabelArena {
    fn intern(&mut self, parent: NodeId, last: u32) -> NodeId {
        if let Some(&id) = self.lookup.get(&(parent, last)) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { parent, last });
        self.lookup.insert((parent, last), id);
        id
    }

    pub fn child(&mut self, parent: NodeId, k: u32) -> NodeId {
        self.intern(parent, k)
    }

    pub fn insert_label(&mut self, label: &IndividualLabel) -> NodeId {
        let mut id = NONE;
        for &part in label.parts() {
            id = self.intern(id, part);
        }
        id
    }

    pub fn find(&self, label: &IndividualLabel) -> Option<NodeId> {
        let mut id = NONE;
        for &part in label.parts() {
            id = *self.lookup.get(&(id, part))?;
        }
        Some(id)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let p = self.nodes[id as usize].parent;
        (p != NONE).then_some(p)
    }

    /// `a ⪯ b` on node ids.
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }

    pub fn label(&self, id: NodeId) -> IndividualLabel {
        let mut parts = Vec::new();
        let mut cur = id;
        while cur != NONE {
            let node = &self.nodes[cur as usize];
            parts.push(node.last);
            cur = node.parent;
        }
        parts.reverse();
        IndividualLabel::new(parts).expect("arena labels are valid")
    }
}

/// Membership of one population over a shared arena.
#[derive(Debug, Clone, Default)]
pub(crate) struct Members {
    ty: Vec<Option<Type>>,
    pos: Vec<u32>,
    live: [Vec<NodeId>; 2],
    descendants: Vec<u32>,
}

impl Members {
    fn ensure(&mut self, id: NodeId) {
        let need = id as usize + 1;
        if self.ty.len() < need {
            self.ty.resize(need, None);
            self.pos.resize(need, 0);
            self.descendants.resize(need, 0);
        }
    }

    pub fn type_of(&self, id: NodeId) -> Option<Type> {
        self.ty.get(id as usize).copied().flatten()
    }

    pub fn count(&self, ty: Type) -> u64 {
        self.live[ty.index()].len() as u64
    }

    pub fn total(&self) -> u64 {
        self.count(Type::Plus) + self.count(Type::Minus)
    }

    pub fn counts(&self) -> PopulationState {
        PopulationState::new(self.count(Type::Plus), self.count(Type::Minus))
    }

    /// Number of present nodes descending from `id`, itself included.
    pub fn descendants(&self, id: NodeId) -> u64 {
        self.descendants.get(id as usize).copied().unwrap_or(0) as u64
    }

    fn adjust_ancestors(&mut self, arena: &LabelArena, id: NodeId, up: bool) {
        let mut cur = Some(id);
        while let Some(c) = cur {
            self.ensure(c);
            let d = &mut self.descendants[c as usize];
            if up {
                *d += 1;
            } else {
                *d -= 1;
            }
            cur = arena.parent(c);
        }
    }

    pub fn insert(&mut self, arena: &LabelArena, id: NodeId, ty: Type) {
        self.ensure(id);
        debug_assert!(self.ty[id as usize].is_none(), "node inserted twice");
        self.ty[id as usize] = Some(ty);
        let list = &mut self.live[ty.index()];
        self.pos[id as usize] = list.len() as u32;
        list.push(id);
        self.adjust_ancestors(arena, id, true);
    }

    fn unlink(&mut self, id: NodeId, ty: Type) {
        let list = &mut self.live[ty.index()];
        let at = self.pos[id as usize] as usize;
        list.swap_remove(at);
        if let Some(&moved) = list.get(at) {
            self.pos[moved as usize] = at as u32;
        }
    }

    pub fn remove(&mut self, arena: &LabelArena, id: NodeId) -> Type {
        let ty = self.ty[id as usize].take().expect("removing a present node");
        self.unlink(id, ty);
        self.adjust_ancestors(arena, id, false);
        ty
    }

    pub fn flip(&mut self, id: NodeId) {
        let ty = self.ty[id as usize].expect("flipping a present node");
        self.unlink(id, ty);
        let other = ty.other();
        self.ty[id as usize] = Some(other);
        let list = &mut self.live[other.index()];
        self.pos[id as usize] = list.len() as u32;
        list.push(id);
    }

    /// Replace `id` by its children `1..=offspring`; zero offspring is a death.
    pub fn reproduce(&mut self, arena: &mut LabelArena, id: NodeId, offspring: u32) {
        let ty = self.remove(arena, id);
        for k in 1..=offspring {
            let child = arena.child(id, k);
            self.insert(arena, child, ty);
        }
    }

    pub fn live_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.live[0].iter().chain(&self.live[1]).copied()
    }

    pub fn uniform(&self, ty: Type, rng: &mut SimRng) -> NodeId {
        let list = &self.live[ty.index()];
        list[rng.random_range(0..list.len())]
    }

    /// Uniform over all present nodes.
    pub fn uniform_any(&self, rng: &mut SimRng) -> NodeId {
        let n_plus = self.live[0].len();
        let idx = rng.random_range(0..self.total() as usize);
        if idx < n_plus {
            self.live[0][idx]
        } else {
            self.live[1][idx - n_plus]
        }
    }

    pub fn snapshot(&self, arena: &LabelArena) -> LabeledPopulation {
        LabeledPopulation {
            plus: self.live[0].iter().map(|&id| arena.label(id)).collect(),
            minus: self.live[1].iter().map(|&id| arena.label(id)).collect(),
        }
    }

    /// Load a population, rejecting labels related by ancestry.
    pub fn load(arena: &mut LabelArena, pop: &LabeledPopulation) -> Result<Self> {
        if !pop.is_antichain() {
            return Err(Error::InvalidLabel("initial labels must be pairwise non-ancestral".into()));
        }
        let mut members = Self::default();
        for (label, ty) in pop.members() {
            let id = arena.insert_label(&label);
            members.insert(arena, id, ty);
        }
        Ok(members)
    }
}
