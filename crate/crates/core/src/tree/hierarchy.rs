use serde::{Deserialize, Serialize};

use crate::data::SkeletonTopology;

pub const DEFAULT_TREE_DILATIONS: [usize; 3] = [1, 2, 4];

/// Which nodes of the triangular region under each position feed the filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TapScheme {
    /// Top node plus the leftmost and rightmost depth-`d` descendants.
    #[default]
    Corners,
    /// Top node plus every depth-`d` slot of the full binary sub-tree.
    FullBottom,
}

impl TapScheme {
    pub fn tap_count(self, dilation: usize) -> usize {
        match self {
            TapScheme::Corners => 3,
            TapScheme::FullBottom => 1 + (1 << dilation),
        }
    }

    pub fn tap_names(self, dilation: usize) -> Vec<String> {
        match self {
            TapScheme::Corners => vec!["w_top".into(), "w_left".into(), "w_right".into()],
            TapScheme::FullBottom => std::iter::once("w_top".to_string())
                .chain((0..1usize << dilation).map(|k| format!("w_bottom{k}")))
                .collect(),
        }
    }
}

/// One tree-conv layer: `table[v * taps + k]` is the node feeding tap `k` at
/// position `v`, `None` for zero padding. Tap 0 is always the node itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeLayer {
    pub dilation: usize,
    pub taps: usize,
    pub table: Vec<Option<usize>>,
}

impl TreeLayer {
    #[inline]
    pub fn tap(&self, v: usize, k: usize) -> Option<usize> {
        self.table[v * self.taps + k]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeHierarchy {
    pub joints: usize,
    pub scheme: TapScheme,
    pub layers: Vec<TreeLayer>,
    /// Breadth-first node order, left child first. Aggregation sums in this
    /// order so relabelling joints cannot change the rounding.
    pub order: Vec<usize>,
    depth: Vec<usize>,
}

fn follow(topology: &SkeletonTopology, mut v: usize, steps: usize, right: bool) -> Option<usize> {
    for _ in 0..steps {
        v = if right { topology.right(v)? } else { topology.left(v)? };
    }
    Some(v)
}

/// Descendant reached by reading `slot` as `depth` bits, most significant
/// first, 0 = left child and 1 = right child.
fn slot_descendant(topology: &SkeletonTopology, mut v: usize, depth: usize, slot: usize) -> Option<usize> {
    for i in (0..depth).rev() {
        v = if (slot >> i) & 1 == 1 {
            topology.right(v)?
        } else {
            topology.left(v)?
        };
    }
    Some(v)
}

pub fn build_tap_tables(topology: &SkeletonTopology, dilations: &[usize], scheme: TapScheme) -> TreeHierarchy {
    let j = topology.joint_count();
    let layers = dilations
        .iter()
        .map(|&d| {
            let taps = scheme.tap_count(d);
            let mut table = Vec::with_capacity(j * taps);
            for v in 0..j {
                table.push(Some(v));
                match scheme {
                    TapScheme::Corners => {
                        table.push(follow(topology, v, d, false));
                        table.push(follow(topology, v, d, true));
                    }
                    TapScheme::FullBottom => {
                        for slot in 0..1usize << d {
                            table.push(slot_descendant(topology, v, d, slot));
                        }
                    }
                }
            }
            TreeLayer {
                dilation: d,
                taps,
                table,
            }
        })
        .collect();

    let mut order = vec![topology.root()];
    let mut i = 0;
    while i < order.len() {
        order.extend_from_slice(topology.children(order[i]));
        i += 1;
    }
    TreeHierarchy {
        joints: j,
        scheme,
        layers,
        order,
        depth: (0..j).map(|v| topology.depth(v)).collect(),
    }
}

impl TreeHierarchy {
    /// Height of the sub-tree each layer's nodes can perceive, read off the
    /// tap tables: one plus the deepest joint reachable through stacked taps.
    pub fn perception_heights(&self) -> Vec<usize> {
        let mut reach = vec![0usize; self.joints];
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next: Vec<usize> = (0..self.joints)
                .map(|v| {
                    (0..layer.taps)
                        .filter_map(|k| layer.tap(v, k))
                        .map(|u| self.depth[u] - self.depth[v] + reach[u])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            reach = next;
            out.push(1 + reach.iter().max().copied().unwrap_or(0));
        }
        out
    }
}
