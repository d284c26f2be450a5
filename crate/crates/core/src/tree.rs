//! Arena search tree shared by the local solvers and the global planner.
//! Edges carry a verification status so that lazily added moves can be
//! checked later, branch by branch.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manipulation::{EdgePaths, EdgeVerifier};
use crate::world::{Arrangement, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    GoalMove,
    BufferMove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeStatus {
    /// Constraint-consistent but not yet motion planned.
    Unverified,
    /// A pick-and-place path has been found.
    Verified,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub object: ObjectId,
    pub kind: EdgeKind,
    pub status: EdgeStatus,
    pub paths: Option<Arc<EdgePaths>>,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub arrangement: Arrangement,
    pub parent: Option<NodeId>,
    /// The edge from the parent; `None` only at the root.
    pub edge: Option<Edge>,
    pub children: Vec<NodeId>,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TreeCounters {
    pub created: u64,
    pub trimmed: u64,
    pub verified_edges: u64,
    pub failed_verifications: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("edge into node {0:?} on the requested branch is not verified")]
pub struct BranchNotVerified(pub NodeId);

/// Result of checking a root-to-node branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchCheck {
    pub success: bool,
    /// The branch end on success; otherwise the deepest node still
    /// accessible from the root (the parent of the failed edge).
    pub last: NodeId,
    /// Nodes deleted because their edge, or one above it, failed.
    pub removed: Vec<NodeId>,
}

/// One step of a root-to-node branch.
#[derive(Debug, Clone)]
pub struct BranchStep {
    pub object: ObjectId,
    pub kind: EdgeKind,
    pub parent: Arrangement,
    pub child: Arrangement,
    pub paths: Arc<EdgePaths>,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Option<TreeNode>>,
    index: HashMap<Arrangement, NodeId>,
    dedup: bool,
    live: usize,
    pub counters: TreeCounters,
}

impl SearchTree {
    /// A tree with at most one node per arrangement.
    pub fn new(root: Arrangement) -> Self {
        Self::with_dedup(root, true)
    }

    /// With `dedup == false` several nodes may share an arrangement; the index
    /// then remembers only the first one.
    pub fn with_dedup(root: Arrangement, dedup: bool) -> Self {
        let mut index = HashMap::new();
        index.insert(root.clone(), NodeId(0));
        SearchTree {
            nodes: vec![Some(TreeNode {
                arrangement: root,
                parent: None,
                edge: None,
                children: Vec::new(),
                depth: 0,
            })],
            index,
            dedup,
            live: 1,
            counters: TreeCounters {
                created: 1,
                ..TreeCounters::default()
            },
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn dedup(&self) -> bool {
        self.dedup
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn get(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }

    /// Panics if `id` has been deleted.
    pub fn node(&self, id: NodeId) -> &TreeNode {
        self.get(id)
            .unwrap_or_else(|| panic!("node {id:?} is not in the tree"))
    }

    pub fn arrangement(&self, id: NodeId) -> &Arrangement {
        &self.node(id).arrangement
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    pub fn find(&self, arrangement: &Arrangement) -> Option<NodeId> {
        self.index.get(arrangement).copied()
    }

    /// Live node ids in creation order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(i, _)| NodeId(i))
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        arrangement: Arrangement,
        object: ObjectId,
        kind: EdgeKind,
        paths: Option<Arc<EdgePaths>>,
    ) -> NodeId {
        let p = self.node(parent);
        debug_assert_eq!(p.arrangement.diff(&arrangement), vec![object]);
        debug_assert!(!self.dedup || !self.index.contains_key(&arrangement));
        let depth = p.depth + 1;
        let id = NodeId(self.nodes.len());
        let status = if paths.is_some() {
            EdgeStatus::Verified
        } else {
            EdgeStatus::Unverified
        };
        self.index.entry(arrangement.clone()).or_insert(id);
        self.nodes.push(Some(TreeNode {
            arrangement,
            parent: Some(parent),
            edge: Some(Edge {
                object,
                kind,
                status,
                paths,
            }),
            children: Vec::new(),
            depth,
        }));
        self.nodes[parent.0].as_mut().unwrap().children.push(id);
        self.live += 1;
        self.counters.created += 1;
        id
    }

    /// Removes `id` and all of its descendants; returns the removed ids.
    pub fn delete_subtree(&mut self, id: NodeId) -> Vec<NodeId> {
        assert_ne!(id, self.root(), "the root cannot be deleted");
        if let Some(parent) = self.node(id).parent {
            self.nodes[parent.0]
                .as_mut()
                .unwrap()
                .children
                .retain(|&c| c != id);
        }
        let mut removed = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let node = self.nodes[n.0].take().expect("live descendant");
            if self.index.get(&node.arrangement) == Some(&n) {
                self.index.remove(&node.arrangement);
            }
            stack.extend(node.children);
            removed.push(n);
        }
        self.live -= removed.len();
        self.counters.trimmed += removed.len() as u64;
        removed.sort();
        removed
    }

    /// Node ids from the root to `id`, inclusive.
    pub fn branch(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn edge_verified(&self, id: NodeId) -> bool {
        self.node(id)
            .edge
            .as_ref()
            .is_none_or(|e| e.status == EdgeStatus::Verified)
    }

    /// True if every edge from the root to `id` is verified.
    pub fn accessible(&self, id: NodeId) -> bool {
        self.branch(id).into_iter().all(|n| self.edge_verified(n))
    }

    pub fn mark_verified(&mut self, id: NodeId, paths: Arc<EdgePaths>) {
        let edge = self.nodes[id.0]
            .as_mut()
            .and_then(|n| n.edge.as_mut())
            .expect("non-root node");
        edge.status = EdgeStatus::Verified;
        edge.paths = Some(paths);
    }

    /// Verifies the unverified suffix of the branch ending at `id`, starting
    /// from the deepest ancestor already accessible from the root. On the
    /// first failing edge the subtree below it is deleted.
    pub fn verify_branch(&mut self, id: NodeId, verifier: &mut EdgeVerifier) -> BranchCheck {
        let branch = self.branch(id);
        let start = branch
            .iter()
            .position(|&n| !self.edge_verified(n))
            .unwrap_or(branch.len());
        for i in start..branch.len() {
            let (parent, child) = (branch[i - 1], branch[i]);
            let object = self.node(child).edge.as_ref().unwrap().object;
            let to = self.arrangement(child).get(object);
            let parent_arr = self.arrangement(parent).clone();
            match verifier.verify_move(&parent_arr, object, to) {
                Some(paths) => {
                    self.mark_verified(child, paths);
                    self.counters.verified_edges += 1;
                }
                None => {
                    self.counters.failed_verifications += 1;
                    let removed = self.delete_subtree(child);
                    return BranchCheck {
                        success: false,
                        last: parent,
                        removed,
                    };
                }
            }
        }
        BranchCheck {
            success: true,
            last: id,
            removed: Vec::new(),
        }
    }

    /// The verified moves from the root to `id`.
    pub fn trace_back(&self, id: NodeId) -> Result<Vec<BranchStep>, BranchNotVerified> {
        let branch = self.branch(id);
        branch
            .windows(2)
            .map(|w| {
                let node = self.node(w[1]);
                let edge = node.edge.as_ref().unwrap();
                match (&edge.status, &edge.paths) {
                    (EdgeStatus::Verified, Some(paths)) => Ok(BranchStep {
                        object: edge.object,
                        kind: edge.kind,
                        parent: self.arrangement(w[0]).clone(),
                        child: node.arrangement.clone(),
                        paths: paths.clone(),
                    }),
                    _ => Err(BranchNotVerified(w[1])),
                }
            })
            .collect()
    }

    /// Structural self-check used by tests: index consistency, parent/child
    /// symmetry, reachability and edge labels.
    pub fn check_well_formed(&self) -> Result<(), String> {
        let mut reachable = 0;
        let mut stack = vec![self.root()];
        while let Some(n) = stack.pop() {
            let node = self.get(n).ok_or(format!("dangling child {n:?}"))?;
            reachable += 1;
            for &c in &node.children {
                let child = self
                    .get(c)
                    .ok_or(format!("dangling child {c:?} of {n:?}"))?;
                if child.parent != Some(n) {
                    return Err(format!("{c:?} does not point back to {n:?}"));
                }
                let edge = child.edge.as_ref().ok_or(format!("{c:?} lacks an edge"))?;
                if node.arrangement.diff(&child.arrangement) != vec![edge.object] {
                    return Err(format!("edge into {c:?} does not move exactly its object"));
                }
                if edge.status == EdgeStatus::Verified && edge.paths.is_none() {
                    return Err(format!("verified edge into {c:?} has no paths"));
                }
                stack.push(c);
            }
        }
        if reachable != self.live {
            return Err(format!(
                "{} live nodes but {reachable} reachable",
                self.live
            ));
        }
        for (arr, id) in &self.index {
            match self.get(*id) {
                Some(n) if &n.arrangement == arr => {}
                _ => return Err(format!("stale index entry {id:?}")),
            }
        }
        if self.dedup {
            if self.index.len() != self.live {
                return Err("duplicate arrangements in a deduplicated tree".into());
            }
        } else {
            for id in self.node_ids() {
                if !self.index.contains_key(self.arrangement(id)) {
                    return Err(format!("{id:?} missing from index"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manipulation::{MotionPlanner, PickPlaceOracle, PickPlaceQuery};
    use crate::world::{sample_instance, Instance, Placement, WorldSpec};
    use std::sync::Mutex;

    fn instance() -> Instance {
        let world = WorldSpec {
            workspace: crate::geometry::Rect::new(
                crate::geometry::Point2::new(0.0, 0.0),
                crate::geometry::Point2::new(20.0, 12.0),
            ),
            ..WorldSpec::default()
        };
        sample_instance(&world, 3, 4).unwrap()
    }

    /// Plans with the real planner unless the query is listed as failing.
    struct Scripted {
        fail: Vec<(Arrangement, ObjectId)>,
        log: Mutex<Vec<(Arrangement, ObjectId)>>,
    }

    impl PickPlaceOracle for Scripted {
        fn plan(
            &self,
            instance: &Instance,
            q: &PickPlaceQuery,
            checks: &mut u64,
        ) -> Option<EdgePaths> {
            self.log
                .lock()
                .unwrap()
                .push((q.arrangement.clone(), q.object));
            if self.fail.contains(&(q.arrangement.clone(), q.object)) {
                return None;
            }
            MotionPlanner::grid(instance).plan(instance, q, checks)
        }
    }

    fn goal_chain(inst: &Instance, tree: &mut SearchTree) -> Vec<NodeId> {
        let mut ids = vec![tree.root()];
        let mut arr = inst.start.clone();
        for o in inst.object_ids() {
            arr = arr.with(o, inst.goal.get(o));
            let id = tree.add_child(
                *ids.last().unwrap(),
                arr.clone(),
                o,
                EdgeKind::GoalMove,
                None,
            );
            ids.push(id);
        }
        ids
    }

    #[test]
    fn full_branch_verifies_once() {
        let inst = instance();
        let oracle = Scripted {
            fail: vec![],
            log: Mutex::new(vec![]),
        };
        let mut v = EdgeVerifier::new(&inst, &oracle);
        let mut tree = SearchTree::new(inst.start.clone());
        let ids = goal_chain(&inst, &mut tree);
        let end = *ids.last().unwrap();
        assert_eq!(
            tree.verify_branch(end, &mut v),
            BranchCheck {
                success: true,
                last: end,
                removed: vec![]
            }
        );
        assert_eq!(v.stats().planner_calls, 3);
        assert!(tree.accessible(end));
        assert_eq!(tree.trace_back(end).unwrap().len(), 3);
        // second pass is free
        assert!(tree.verify_branch(end, &mut v).success);
        assert_eq!(v.stats().planner_calls, 3);
        tree.check_well_formed().unwrap();
    }

    #[test]
    fn failure_trims_below_the_failing_edge() {
        let inst = instance();
        let mut tree = SearchTree::new(inst.start.clone());
        let ids = goal_chain(&inst, &mut tree);
        // second edge (moving object 1 out of ids[1]) fails
        let oracle = Scripted {
            fail: vec![(tree.arrangement(ids[1]).clone(), ObjectId(1))],
            log: Mutex::new(vec![]),
        };
        let mut v = EdgeVerifier::new(&inst, &oracle);
        let sibling = tree.add_child(
            ids[1],
            inst.start
                .with(ObjectId(0), inst.goal.get(ObjectId(0)))
                .with(ObjectId(2), inst.goal.get(ObjectId(2))),
            ObjectId(2),
            EdgeKind::GoalMove,
            None,
        );
        let check = tree.verify_branch(ids[3], &mut v);
        assert_eq!(
            check,
            BranchCheck {
                success: false,
                last: ids[1],
                removed: vec![ids[2], ids[3]]
            }
        );
        assert!(tree.edge_verified(ids[1]));
        assert!(!tree.contains(ids[2]) && !tree.contains(ids[3]));
        assert!(tree.contains(sibling));
        assert_eq!(tree.counters.trimmed, 2);
        assert_eq!(tree.counters.failed_verifications, 1);
        assert!(tree.find(&inst.goal).is_none());
        assert!(tree.trace_back(sibling).is_err());
        tree.check_well_formed().unwrap();
        assert_eq!(oracle.log.lock().unwrap().len(), 2);
    }

    #[test]
    fn non_dedup_trees_allow_repeats() {
        let inst = instance();
        let mut tree = SearchTree::with_dedup(inst.start.clone(), false);
        let a = inst.start.with(ObjectId(0), Placement::Grid(0));
        let x = tree.add_child(
            tree.root(),
            a.clone(),
            ObjectId(0),
            EdgeKind::BufferMove,
            None,
        );
        let back = tree.add_child(
            x,
            inst.start.clone(),
            ObjectId(0),
            EdgeKind::BufferMove,
            None,
        );
        assert_eq!(tree.find(&inst.start), Some(tree.root()));
        tree.check_well_formed().unwrap();
        tree.delete_subtree(back);
        tree.check_well_formed().unwrap();
        assert_eq!(tree.len(), 2);
    }
}
