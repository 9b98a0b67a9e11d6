use std::collections::{BTreeMap, BTreeSet};

use super::scope::{clause_units, resolve, Resolved};
use crate::model::{ContractDefinition, VariableSource};

/// Read-dependencies between variables, clauses and procedure locals.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    /// `reads[n]`: nodes that node `n` reads.
    reads: Vec<BTreeSet<usize>>,
}

impl DependencyGraph {
    /// All versions of a clause contribute edges to the same node.
    pub fn build(def: &ContractDefinition) -> Self {
        let mut g = DependencyGraph {
            nodes: Vec::new(),
            index: BTreeMap::new(),
            reads: Vec::new(),
        };
        for v in &def.variables {
            if v.source != VariableSource::Derived {
                g.node(&v.name);
            }
        }
        for name in def.clause_names() {
            for (i, clause) in def.clauses.iter().enumerate().filter(|(_, c)| c.name == name) {
                for unit in clause_units(clause, i) {
                    let from = g.node(&unit.node);
                    for part in &unit.parts {
                        let to = g.node(part);
                        g.reads[from].insert(to);
                    }
                    for read in &unit.reads {
                        let target = match resolve(def, &unit, read) {
                            Resolved::Local(n) | Resolved::Clause(n) | Resolved::Variable(n) => n,
                            Resolved::Forward { .. } | Resolved::Unresolved => continue,
                        };
                        let to = g.node(&target);
                        g.reads[from].insert(to);
                    }
                }
            }
        }
        g
    }

    fn node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.nodes.push(name.to_string());
        self.reads.push(BTreeSet::new());
        self.index.insert(name.to_string(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Nodes read directly by `name`.
    pub fn reads_of(&self, name: &str) -> Vec<&str> {
        self.index
            .get(name)
            .map(|&i| self.reads[i].iter().map(|&j| self.nodes[j].as_str()).collect())
            .unwrap_or_default()
    }

    /// Every node reachable from `name` through reads, excluding itself.
    pub fn transitive_reads(&self, name: &str) -> BTreeSet<&str> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.index.get(name).into_iter().copied().collect();
        while let Some(n) = stack.pop() {
            for &m in &self.reads[n] {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen.into_iter().map(|i| self.nodes[i].as_str()).collect()
    }

    /// Kahn's algorithm; among ready nodes the earliest declared goes first.
    pub fn topological_order(&self) -> Result<Vec<String>, Vec<String>> {
        let n = self.nodes.len();
        let mut pending: Vec<usize> = self.reads.iter().map(BTreeSet::len).collect();
        let mut readers: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (from, tos) in self.reads.iter().enumerate() {
            for &to in tos {
                readers[to].push(from);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(self.nodes[i].clone());
            for &r in &readers[i] {
                pending[r] -= 1;
                if pending[r] == 0 {
                    ready.insert(r);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        Err(collapse_cycle(self.find_cycle(&pending)))
    }

    /// One cycle among the nodes Kahn could not place, starting at the
    /// earliest-declared node that lies on a cycle.
    fn find_cycle(&self, pending: &[usize]) -> Vec<String> {
        let stuck: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| pending[i] > 0).collect();
        for &start in &stuck {
            // Depth-first walk restricted to stuck nodes, looking for `start` again.
            let mut path = vec![start];
            let mut iters = vec![self.reads[start].iter()];
            let mut on_path = BTreeSet::from([start]);
            let mut dead = BTreeSet::new();
            while let Some(it) = iters.last_mut() {
                match it.next() {
                    Some(&next) if next == start => {
                        return path.iter().map(|&i| self.nodes[i].clone()).collect();
                    }
                    Some(&next) if stuck.contains(&next) && !on_path.contains(&next) && !dead.contains(&next) => {
                        path.push(next);
                        on_path.insert(next);
                        iters.push(self.reads[next].iter());
                    }
                    Some(_) => {}
                    None => {
                        iters.pop();
                        let done = path.pop().expect("path tracks iters");
                        on_path.remove(&done);
                        dead.insert(done);
                    }
                }
            }
        }
        stuck.into_iter().map(|i| self.nodes[i].clone()).collect()
    }
}

/// Reports a cycle in terms of clauses and variables: procedure locals are
/// folded into the clause that owns them.
fn collapse_cycle(nodes: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in nodes {
        let owner = n.split('.').next().unwrap_or(&n).to_string();
        if out.last() != Some(&owner) {
            out.push(owner);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def(json: &str) -> ContractDefinition {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn pricing_targets_precede_their_readers() {
        let d = def(
            r#"{"dacl_version": "1", "contract_id": "t",
                "variables": [{"name": "w", "source": "external", "type": "decimal"},
                              {"name": "r", "source": "external", "type": "decimal"},
                              {"name": "fee", "source": "external", "type": "decimal"}],
                "clauses": [{"name": "price", "kind": "pricing", "precision": 2, "result_variable": "total",
                             "sub_formulas": [{"target": "base", "expression": "w * r"},
                                              {"target": "total", "expression": "base + fee"}]}]}"#,
        );
        let order = DependencyGraph::build(&d).topological_order().unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        assert!(pos("price.base") < pos("price.total"));
        assert!(pos("price.total") < pos("price"));
        assert!(pos("fee") < pos("price.total"));
    }

    #[test]
    fn cross_clause_cycle_is_named() {
        let d = def(
            r#"{"dacl_version": "1", "contract_id": "t",
                "clauses": [{"name": "a", "kind": "pricing", "precision": 2, "result_variable": "v",
                             "sub_formulas": [{"target": "v", "expression": "b + 1"}]},
                            {"name": "b", "kind": "pricing", "precision": 2, "result_variable": "v",
                             "sub_formulas": [{"target": "v", "expression": "a + 1"}]}]}"#,
        );
        let cycle = DependencyGraph::build(&d).topological_order().unwrap_err();
        assert_eq!(cycle, ["a", "b"]);
    }
}
