//! Observation-branching policy trees.

use std::collections::BTreeMap;

use crate::belief::Belief;
use crate::plan::CandidatePlan;

/// A policy keyed by observation history. Each node stores the belief reached
/// along its branch; internal nodes carry an action and one child per
/// positive-probability observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTree {
    pub belief: Belief,
    pub action: Option<usize>,
    pub children: BTreeMap<usize, PolicyTree>,
    pub goal_reached: bool,
}

impl PolicyTree {
    pub fn leaf(belief: Belief, goal_reached: bool) -> Self {
        Self {
            belief,
            action: None,
            children: BTreeMap::new(),
            goal_reached,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.action.is_none()
    }

    /// Number of root-to-leaf paths.
    pub fn path_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.values().map(PolicyTree::path_count).sum()
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.values().map(PolicyTree::node_count).sum::<usize>()
    }

    /// Longest root-to-leaf path, in actions.
    pub fn depth(&self) -> usize {
        self.children.values().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Every root-to-leaf path as a plan starting at `start_step`, using the
    /// stored beliefs.
    pub fn plans(&self, start_step: usize) -> Vec<CandidatePlan> {
        let mut out = Vec::new();
        let mut current = CandidatePlan::empty(start_step, self.belief.clone());
        self.collect_plans(&mut current, &mut out);
        out
    }

    fn collect_plans(&self, current: &mut CandidatePlan, out: &mut Vec<CandidatePlan>) {
        match self.action {
            Some(a) if !self.children.is_empty() => {
                for (&o, child) in &self.children {
                    current.push(a, o, child.belief.clone());
                    child.collect_plans(current, out);
                    current.actions.pop();
                    current.observations.pop();
                    current.beliefs.pop();
                }
            }
            _ => out.push(current.clone()),
        }
    }

    /// Actions used anywhere in the tree, in pre-order.
    pub fn actions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |node| {
            if let Some(a) = node.action {
                out.push(a);
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&PolicyTree)) {
        f(self);
        for child in self.children.values() {
            child.visit(f);
        }
    }

    /// Observation histories leading to each internal node, in pre-order.
    pub fn internal_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_internal(&mut path, &mut out);
        out
    }

    fn collect_internal(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if self.action.is_some() {
            out.push(path.clone());
        }
        for (&o, child) in &self.children {
            path.push(o);
            child.collect_internal(path, out);
            path.pop();
        }
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&PolicyTree> {
        path.iter().try_fold(self, |node, o| node.children.get(o))
    }

    pub fn node_at_mut(&mut self, path: &[usize]) -> Option<&mut PolicyTree> {
        path.iter().try_fold(self, |node, o| node.children.get_mut(o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_paths_and_depth() {
        let mut root = PolicyTree::leaf(Belief::point(2, 0), false);
        root.action = Some(0);
        root.children.insert(0, PolicyTree::leaf(Belief::point(2, 1), true));
        root.children.insert(1, PolicyTree::leaf(Belief::point(2, 1), true));
        assert_eq!(root.path_count(), 2);
        assert_eq!(root.depth(), 1);
        assert_eq!(root.node_count(), 3);
        let plans = root.plans(0);
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[1].observations, vec![1]);
    }
}
