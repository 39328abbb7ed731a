use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Shipped 25-joint skeleton: head root, binary, height 8.
pub const DEFAULT_TOPOLOGY_JSON: &str = include_str!("../../assets/skeleton25.json");

/// Rooted joint tree with at most two ordered children per joint.
///
/// `children[v][0]` is the left child, `children[v][1]` the right one; a
/// single child is always the left child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonTopology {
    root: usize,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    root: usize,
    children: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<BTreeMap<String, String>>,
}

fn joint_key(key: &str) -> Result<usize> {
    key.trim()
        .parse()
        .map_err(|_| Error::Topology(format!("joint key `{key}` is not an index")))
}

impl SkeletonTopology {
    /// Validate a child table rooted at `root`.
    pub fn new(root: usize, children: Vec<Vec<usize>>, names: Option<Vec<String>>) -> Result<Self> {
        let j = children.len();
        if j == 0 {
            return Err(Error::Topology("no joints".into()));
        }
        if root >= j {
            return Err(Error::Topology(format!("root {root} out of range for {j} joints")));
        }
        let mut parent = vec![None; j];
        for (v, kids) in children.iter().enumerate() {
            if kids.len() > 2 {
                return Err(Error::Topology(format!("branching exceeds 2 at joint {v}")));
            }
            for &c in kids {
                if c >= j {
                    return Err(Error::Topology(format!("joint {v} lists unknown child {c}")));
                }
                if c == root {
                    return Err(Error::Topology(format!("cycle: root joint {root} is a child of {v}")));
                }
                if let Some(p) = parent[c] {
                    return Err(Error::Topology(format!(
                        "joint {c} has multiple parents ({p} and {v})"
                    )));
                }
                parent[c] = Some(v);
            }
        }
        if let Some(v) = (0..j).find(|&v| v != root && parent[v].is_none()) {
            return Err(Error::Topology(format!(
                "multiple roots: joint {v} has no parent"
            )));
        }
        let mut depth = vec![usize::MAX; j];
        depth[root] = 0;
        let mut queue = vec![root];
        while let Some(v) = queue.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                queue.push(c);
            }
        }
        if let Some(v) = depth.iter().position(|d| *d == usize::MAX) {
            return Err(Error::Topology(format!("joint {v} is unreachable from the root (cycle)")));
        }
        if let Some(n) = &names {
            if n.len() != j {
                return Err(Error::Topology(format!("{} names for {j} joints", n.len())));
            }
        }
        Ok(Self {
            root,
            children,
            parent,
            depth,
            names,
        })
    }

    /// The shipped 25-joint topology.
    pub fn default_25() -> Self {
        parse_topology(DEFAULT_TOPOLOGY_JSON).expect("shipped topology is valid")
    }

    /// Full binary tree with `height` levels, nodes in breadth-first order.
    pub fn full_binary(height: usize) -> Self {
        assert!(height >= 1);
        let n = (1usize << height) - 1;
        let children = (0..n)
            .map(|v| {
                let (l, r) = (2 * v + 1, 2 * v + 2);
                if r < n {
                    vec![l, r]
                } else {
                    vec![]
                }
            })
            .collect();
        Self::new(0, children, None).expect("full binary tree")
    }

    /// Each joint's only child is the next joint.
    pub fn path(len: usize) -> Self {
        let children = (0..len)
            .map(|v| if v + 1 < len { vec![v + 1] } else { vec![] })
            .collect();
        Self::new(0, children, None).expect("path")
    }

    pub fn joint_count(&self) -> usize {
        self.children.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn left(&self, v: usize) -> Option<usize> {
        self.children[v].first().copied()
    }

    pub fn right(&self, v: usize) -> Option<usize> {
        self.children[v].get(1).copied()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Distance from the root (root = 0).
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// Number of levels; a lone root has height 1.
    pub fn height(&self) -> usize {
        self.depth.iter().max().copied().unwrap_or(0) + 1
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// SHA-256 over the canonical child table, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("joints={};root={};", self.joint_count(), self.root));
        for (v, kids) in self.children.iter().enumerate() {
            h.update(format!("{v}:{kids:?};"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = TopologyDoc {
            root: self.root,
            children: self
                .children
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_empty())
                .map(|(v, c)| (v.to_string(), c.clone()))
                .collect(),
            names: self.names.as_ref().map(|n| {
                n.iter()
                    .enumerate()
                    .map(|(i, s)| (i.to_string(), s.clone()))
                    .collect()
            }),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

/// Parse and validate a topology document.
///
/// Joints are indexed `0..J`; `J` is one more than the largest index named
/// anywhere in the document. Joints without a `children` entry are leaves.
pub fn parse_topology(text: &str) -> Result<SkeletonTopology> {
    let doc: TopologyDoc =
        serde_json::from_str(text).map_err(|e| Error::json("topology document", e))?;
    let mut max = doc.root;
    let mut table = BTreeMap::new();
    for (key, kids) in &doc.children {
        let v = joint_key(key)?;
        max = max.max(v);
        max = kids.iter().copied().fold(max, usize::max);
        if table.insert(v, kids.clone()).is_some() {
            return Err(Error::Topology(format!("joint {v} listed twice")));
        }
    }
    let mut names = None;
    if let Some(map) = &doc.names {
        let mut out = Vec::new();
        for (k, n) in map {
            let v = joint_key(k)?;
            max = max.max(v);
            out.push((v, n.clone()));
        }
        out.sort();
        names = Some(out);
    }
    let j = max + 1;
    let children = (0..j).map(|v| table.remove(&v).unwrap_or_default()).collect();
    let names = match names {
        None => None,
        Some(list) => {
            if list.len() != j {
                return Err(Error::Topology(format!("names given for {} of {j} joints", list.len())));
            }
            Some(list.into_iter().map(|(_, n)| n).collect())
        }
    };
    SkeletonTopology::new(doc.root, children, names)
}
