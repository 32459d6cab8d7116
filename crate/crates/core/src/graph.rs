//! The ecosystem graph: an activation tree plus sharing edges derived from
//! wirings. The combined graph stays acyclic, so any set of stale
//! components has a topological rebuild order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("`{0}` cannot activate itself")]
    SelfEdge(String),
    #[error("`{child}` is already activated by `{parent}`")]
    SecondParent { child: String, parent: String },
    #[error("edge {from} -> {to} would close the cycle {}", path.join(" -> "))]
    Cycle { from: String, to: String, path: Vec<String> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Act,
    Sh,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Act => "act",
            EdgeKind::Sh => "sh",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcosystemGraph {
    nodes: BTreeSet<String>,
    act: BTreeSet<(String, String)>,
    sh: BTreeSet<(String, String)>,
}

/// One edge per distinct (provider, consumer) pair.
pub fn sharing_edges<'a, I>(wirings: I) -> BTreeSet<(String, String)>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    wirings.into_iter().map(|(a, b)| (a.to_owned(), b.to_owned())).collect()
}

impl EcosystemGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) {
        self.nodes.insert(name.to_owned());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn activation_edges(&self) -> &BTreeSet<(String, String)> {
        &self.act
    }

    pub fn sharing_edge_set(&self) -> &BTreeSet<(String, String)> {
        &self.sh
    }

    /// Every edge of the combined graph with its label.
    pub fn edges(&self) -> Vec<(&str, &str, EdgeKind)> {
        let mut out: Vec<(&str, &str, EdgeKind)> = self
            .act
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str(), EdgeKind::Act))
            .chain(self.sh.iter().map(|(a, b)| (a.as_str(), b.as_str(), EdgeKind::Sh)))
            .collect();
        out.sort();
        out
    }

    fn successors(&self, n: &str) -> BTreeSet<&str> {
        self.act
            .iter()
            .chain(&self.sh)
            .filter(|(a, _)| a == n)
            .map(|(_, b)| b.as_str())
            .collect()
    }

    fn require(&self, n: &str) -> Result<(), GraphError> {
        if self.nodes.contains(n) {
            Ok(())
        } else {
            Err(GraphError::UnknownComponent(n.to_owned()))
        }
    }

    /// A path `to ->* from` in the combined graph, if one exists.
    fn path(&self, to: &str, from: &str) -> Option<Vec<String>> {
        let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([to]);
        let mut seen = BTreeSet::from([to]);
        while let Some(n) = queue.pop_front() {
            if n == from {
                let mut path = vec![n.to_owned()];
                let mut cur = n;
                while let Some(p) = prev.get(cur) {
                    path.push(p.to_string());
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for m in self.successors(n) {
                if seen.insert(m) {
                    prev.insert(m, n);
                    queue.push_back(m);
                }
            }
        }
        None
    }

    fn check_acyclic(&self, from: &str, to: &str) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::Cycle { from: from.into(), to: to.into(), path: vec![from.into(), to.into()] });
        }
        if let Some(mut path) = self.path(to, from) {
            path.insert(0, from.to_owned());
            return Err(GraphError::Cycle { from: from.into(), to: to.into(), path });
        }
        Ok(())
    }

    /// Adds `parent -> child` if the activation structure stays a tree and
    /// the combined graph stays acyclic. A rejected edge leaves the graph
    /// unchanged.
    pub fn add_activation(&mut self, parent: &str, child: &str) -> Result<(), GraphError> {
        self.require(parent)?;
        self.require(child)?;
        if parent == child {
            return Err(GraphError::SelfEdge(parent.to_owned()));
        }
        if self.act.contains(&(parent.to_owned(), child.to_owned())) {
            return Ok(());
        }
        if let Some((p, _)) = self.act.iter().find(|(_, c)| c == child) {
            return Err(GraphError::SecondParent { child: child.to_owned(), parent: p.clone() });
        }
        self.check_acyclic(parent, child)?;
        self.act.insert((parent.to_owned(), child.to_owned()));
        Ok(())
    }

    /// Adds a sharing edge for a wiring from `provider` into `consumer`.
    pub fn add_sharing(&mut self, provider: &str, consumer: &str) -> Result<(), GraphError> {
        self.require(provider)?;
        self.require(consumer)?;
        if self.sh.contains(&(provider.to_owned(), consumer.to_owned())) {
            return Ok(());
        }
        self.check_acyclic(provider, consumer)?;
        self.sh.insert((provider.to_owned(), consumer.to_owned()));
        Ok(())
    }

    /// Removes a sharing edge; removal never creates a cycle.
    pub fn remove_sharing(&mut self, provider: &str, consumer: &str) -> bool {
        self.sh.remove(&(provider.to_owned(), consumer.to_owned()))
    }

    /// Whether adding `from -> to` would be accepted as a sharing edge.
    pub fn check_sharing(&self, from: &str, to: &str) -> Result<(), GraphError> {
        let mut g = self.clone();
        g.add_sharing(from, to)
    }

    /// Every component reachable from `changed`, itself included.
    pub fn stale_closure(&self, changed: &str) -> Result<BTreeSet<String>, GraphError> {
        self.require(changed)?;
        let mut seen = BTreeSet::from([changed.to_owned()]);
        let mut stack = vec![changed];
        while let Some(n) = stack.pop() {
            for m in self.successors(n) {
                if seen.insert(m.to_owned()) {
                    stack.push(m);
                }
            }
        }
        Ok(seen)
    }

    /// Topological order of `stale` restricted to edges within it, breaking
    /// ties by name.
    pub fn rebuild_order(&self, stale: &BTreeSet<String>) -> Vec<String> {
        let mut indegree: BTreeMap<&str, usize> = stale.iter().map(|s| (s.as_str(), 0)).collect();
        let edges: Vec<(&str, &str)> = self
            .act
            .iter()
            .chain(&self.sh)
            .filter(|(a, b)| stale.contains(a) && stale.contains(b))
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        for (_, b) in &edges {
            *indegree.get_mut(b).unwrap() += 1;
        }
        let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut out = Vec::with_capacity(stale.len());
        while let Some(n) = ready.pop_first() {
            out.push(n.to_owned());
            for (_, b) in edges.iter().filter(|(a, _)| *a == n) {
                let d = indegree.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(b);
                }
            }
        }
        out
    }

    /// `a -> b [act|sh]`, one edge per line, sorted.
    pub fn export(&self) -> String {
        self.edges().iter().map(|(a, b, k)| format!("{a} -> {b} [{k}]\n")).collect()
    }

    /// Parses activation declarations: `parent -> child` per line, `#`
    /// comments. Returns the edges in file order.
    pub fn parse_activations(text: &str) -> Result<Vec<(String, String)>, GraphError> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| GraphError::Parse { line: i + 1, message: message.to_owned() };
            let (a, b) = line.split_once("->").ok_or_else(|| err("expected `parent -> child`"))?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() || a.contains(char::is_whitespace) || b.contains(char::is_whitespace) {
                return Err(err("expected `parent -> child`"));
            }
            out.push((a.to_owned(), b.to_owned()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo() -> EcosystemGraph {
        let mut g = EcosystemGraph::new();
        for n in ["SocialApp", "Groups", "Messaging", "LiveSearch", "LiveSearchResults"] {
            g.add_node(n);
        }
        for c in ["Groups", "Messaging", "LiveSearch"] {
            g.add_activation("SocialApp", c).unwrap();
        }
        g.add_activation("LiveSearch", "LiveSearchResults").unwrap();
        g.add_sharing("Groups", "LiveSearch").unwrap();
        g.add_sharing("Messaging", "LiveSearch").unwrap();
        g
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn activation_tree() {
        let mut g = demo();
        let before = g.clone();
        assert!(matches!(g.add_activation("LiveSearchResults", "SocialApp"), Err(GraphError::SecondParent { .. }) | Err(GraphError::Cycle { .. })));
        assert!(matches!(g.add_activation("Groups", "Groups"), Err(GraphError::SelfEdge(_))));
        assert!(matches!(g.add_activation("Groups", "LiveSearch"), Err(GraphError::SecondParent { .. })));
        assert!(matches!(g.add_activation("Groups", "Nobody"), Err(GraphError::UnknownComponent(_))));
        assert_eq!(g, before);
    }

    #[test]
    fn loops_are_rejected() {
        let mut g = EcosystemGraph::new();
        g.add_node("A");
        g.add_node("B");
        g.add_activation("A", "B").unwrap();
        let e = g.add_sharing("B", "A").unwrap_err();
        assert_eq!(e, GraphError::Cycle { from: "B".into(), to: "A".into(), path: vec!["B".into(), "A".into(), "B".into()] });
        assert!(g.add_sharing("A", "A").is_err());
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn sharing_edge_set_semantics() {
        let edges = sharing_edges([("Groups", "LiveSearch"), ("Messaging", "LiveSearch"), ("Groups", "LiveSearch")]);
        assert_eq!(edges.len(), 2);
        assert!(sharing_edges([]).is_empty());
    }

    #[test]
    fn closure_and_order_on_demo() {
        let g = demo();
        let stale = g.stale_closure("Groups").unwrap();
        assert_eq!(stale, set(&["Groups", "LiveSearch", "LiveSearchResults"]));
        assert_eq!(g.rebuild_order(&stale), ["Groups", "LiveSearch", "LiveSearchResults"]);
        assert_eq!(g.stale_closure("LiveSearchResults").unwrap(), set(&["LiveSearchResults"]));
        assert_eq!(g.rebuild_order(&set(&["Messaging"])), ["Messaging"]);
        // Messaging does not feed Groups, yet changing SocialApp marks both.
        assert!(g.stale_closure("SocialApp").unwrap().contains("Messaging"));
        assert!(g.stale_closure("Nobody").is_err());
    }

    #[test]
    fn export_format() {
        let text = demo().export();
        assert!(text.contains("Groups -> LiveSearch [sh]\n"));
        assert!(text.contains("LiveSearch -> LiveSearchResults [act]\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn activation_file() {
        let edges = EcosystemGraph::parse_activations("# tree\nSocialApp -> Groups\n\nLiveSearch -> LiveSearchResults  # leaf\n").unwrap();
        assert_eq!(edges.len(), 2);
        assert!(matches!(EcosystemGraph::parse_activations("a b"), Err(GraphError::Parse { line: 1, .. })));
    }

    fn brute_reach(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut r = vec![vec![false; n]; n];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in edges {
            r[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    proptest! {
        #[test]
        fn closure_matches_transitive_closure(n in 1..=12usize, raw in prop::collection::vec((0..12usize, 0..12usize, any::<bool>()), 0..40)) {
            let mut g = EcosystemGraph::new();
            let name = |i: usize| format!("n{i:02}");
            for i in 0..n {
                g.add_node(&name(i));
            }
            let mut accepted = Vec::new();
            for (a, b, act) in raw {
                let (a, b) = (a % n, b % n);
                let before = g.clone();
                let r = if act { g.add_activation(&name(a), &name(b)) } else { g.add_sharing(&name(a), &name(b)) };
                match r {
                    Ok(()) => accepted.push((a, b)),
                    Err(_) => prop_assert_eq!(&g, &before),
                }
            }
            let reach = brute_reach(n, &accepted);
            for (i, row) in reach.iter().enumerate() {
                prop_assert!(!(0..n).any(|j| j != i && row[j] && reach[j][i]));
                let closure = g.stale_closure(&name(i)).unwrap();
                let expected: BTreeSet<String> = (0..n).filter(|&j| row[j]).map(name).collect();
                prop_assert_eq!(&closure, &expected);
                let order = g.rebuild_order(&closure);
                prop_assert_eq!(order.len(), closure.len());
                for (a, b, _) in g.edges() {
                    if let (Some(x), Some(y)) = (order.iter().position(|s| s == a), order.iter().position(|s| s == b)) {
                        prop_assert!(x < y);
                    }
                }
            }
        }
    }
}
