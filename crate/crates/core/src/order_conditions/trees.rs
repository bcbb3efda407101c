//! Two-partition TPS-trees up to order three in the canonical table ordering.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Node kinds. Round nodes are component functions, square nodes are
/// linear operators applied to their single child (or to `y` when childless).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    /// Filled circle: f^{1} (or N^{1} for split methods).
    N,
    /// Filled square: W^{1} (or L^{1}).
    L,
    /// Open circle: f^{2} (or N^{2}).
    P,
    /// Open square: W^{2} (or L^{2}).
    M,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::N, NodeKind::L, NodeKind::P, NodeKind::M];

    pub fn is_square(self) -> bool {
        matches!(self, NodeKind::L | NodeKind::M)
    }

    /// Zero-based partition index the node belongs to.
    pub fn partition(self) -> usize {
        match self {
            NodeKind::N | NodeKind::L => 0,
            NodeKind::P | NodeKind::M => 1,
        }
    }

    pub fn round(partition: usize) -> NodeKind {
        if partition == 0 {
            NodeKind::N
        } else {
            NodeKind::P
        }
    }

    pub fn square(partition: usize) -> NodeKind {
        if partition == 0 {
            NodeKind::L
        } else {
            NodeKind::M
        }
    }

    fn symbol(self) -> char {
        match self {
            NodeKind::N => 'N',
            NodeKind::L => 'L',
            NodeKind::P => 'P',
            NodeKind::M => 'M',
        }
    }

    fn from_symbol(c: char) -> Option<NodeKind> {
        match c {
            'N' => Some(NodeKind::N),
            'L' => Some(NodeKind::L),
            'P' => Some(NodeKind::P),
            'M' => Some(NodeKind::M),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TpsTree {
    pub root: NodeKind,
    pub children: Vec<TpsTree>,
}

impl TpsTree {
    pub fn leaf(root: NodeKind) -> Self {
        TpsTree {
            root,
            children: Vec::new(),
        }
    }

    pub fn new(root: NodeKind, children: Vec<TpsTree>) -> Result<Self> {
        if root.is_square() && children.len() > 1 {
            return Err(Error::contract("square nodes are singly branched"));
        }
        Ok(TpsTree { root, children })
    }

    pub fn order(&self) -> usize {
        1 + self.children.iter().map(TpsTree::order).sum::<usize>()
    }

    pub fn contains_square(&self) -> bool {
        self.root.is_square() || self.children.iter().any(TpsTree::contains_square)
    }

    /// Tree factorial of the uncoloured tree.
    pub fn density(&self) -> u64 {
        self.order() as u64 * self.children.iter().map(TpsTree::density).product::<u64>()
    }

    /// Number of automorphisms (identical sibling subtrees).
    pub fn symmetry(&self) -> u64 {
        let mut sigma: u64 = self.children.iter().map(TpsTree::symmetry).product();
        let mut counts: HashMap<&TpsTree, u64> = HashMap::new();
        for c in &self.children {
            *counts.entry(c).or_default() += 1;
        }
        for &k in counts.values() {
            sigma *= (1..=k).product::<u64>();
        }
        sigma
    }

    pub fn parse(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (tree, used) = parse_at(&chars, 0)?;
        if used != chars.len() {
            return Err(Error::Parse(format!("trailing input in tree '{s}'")));
        }
        Ok(tree)
    }
}

fn parse_at(c: &[char], pos: usize) -> Result<(TpsTree, usize)> {
    let root = c
        .get(pos)
        .and_then(|&ch| NodeKind::from_symbol(ch))
        .ok_or_else(|| Error::Parse(format!("expected node kind at {pos}")))?;
    let mut pos = pos + 1;
    let mut children = Vec::new();
    if c.get(pos) == Some(&'[') {
        pos += 1;
        loop {
            let (child, next) = parse_at(c, pos)?;
            children.push(child);
            pos = next;
            match c.get(pos) {
                Some(',') => pos += 1,
                Some(']') => {
                    pos += 1;
                    break;
                }
                _ => return Err(Error::Parse(format!("unbalanced brackets at {pos}"))),
            }
        }
    }
    Ok((TpsTree::new(root, children)?, pos))
}

impl fmt::Display for TpsTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root.symbol())?;
        if !self.children.is_empty() {
            write!(f, "[")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

/// Highest tree order supported.
pub const MAX_ORDER: usize = 3;
/// Number of non-empty trees of order at most [`MAX_ORDER`].
pub const NUM_TREES: usize = 104;

/// The 104 trees in table order: index `i` here is tree tau_{i+1}.
///
/// Order 1 and 2 follow kind order N, L, P, M (root, then child). Order 3
/// lists the two-child round-rooted trees first (N-rooted, then P-rooted,
/// children as a multiset), then every single-child tree over the order-2
/// list.
pub fn enumerate_trees() -> Vec<TpsTree> {
    let order1: Vec<TpsTree> = NodeKind::ALL.iter().map(|&k| TpsTree::leaf(k)).collect();
    let order2: Vec<TpsTree> = NodeKind::ALL
        .iter()
        .flat_map(|&r| {
            order1.iter().map(move |c| TpsTree {
                root: r,
                children: vec![c.clone()],
            })
        })
        .collect();
    let mut out = order1.clone();
    out.extend(order2.iter().cloned());
    for root in [NodeKind::N, NodeKind::P] {
        for a in 0..4 {
            for b in a..4 {
                out.push(TpsTree {
                    root,
                    children: vec![order1[a].clone(), order1[b].clone()],
                });
            }
        }
    }
    for &root in &NodeKind::ALL {
        for c in &order2 {
            out.push(TpsTree {
                root,
                children: vec![c.clone()],
            });
        }
    }
    out
}

/// Precomputed tree table with child indices. Slot 0 is the empty tree,
/// slot `i` (1..=104) is tau_i.
pub struct TreeTable {
    pub trees: Vec<TpsTree>,
    index: HashMap<TpsTree, usize>,
    child_slots: Vec<Vec<usize>>,
}

impl TreeTable {
    fn build() -> Self {
        let trees = enumerate_trees();
        let index: HashMap<TpsTree, usize> = trees.iter().enumerate().map(|(i, t)| (t.clone(), i + 1)).collect();
        let mut child_slots = vec![Vec::new()];
        for t in &trees {
            child_slots.push(t.children.iter().map(|c| index[c]).collect());
        }
        TreeTable { trees, index, child_slots }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Slot of a tree (1-based); `None` when it exceeds the truncation order.
    pub fn slot(&self, tree: &TpsTree) -> Option<usize> {
        self.index.get(tree).copied()
    }

    pub fn tree(&self, slot: usize) -> Option<&TpsTree> {
        slot.checked_sub(1).and_then(|i| self.trees.get(i))
    }

    pub fn root(&self, slot: usize) -> Option<NodeKind> {
        self.tree(slot).map(|t| t.root)
    }

    pub fn children(&self, slot: usize) -> &[usize] {
        &self.child_slots[slot]
    }

    /// Root removal: the slot left after deleting a root of kind `kind`, or
    /// `None` when the root is not of that square kind. A childless square
    /// leaves the empty tree (slot 0).
    pub fn remove_root(&self, slot: usize, kind: NodeKind) -> Option<usize> {
        match self.root(slot) {
            Some(r) if r == kind && kind.is_square() => Some(self.child_slots[slot].first().copied().unwrap_or(0)),
            _ => None,
        }
    }

    pub fn order(&self, slot: usize) -> usize {
        self.tree(slot).map_or(0, TpsTree::order)
    }
}

pub fn tree_table() -> &'static TreeTable {
    static TABLE: OnceLock<TreeTable> = OnceLock::new();
    TABLE.get_or_init(TreeTable::build)
}
