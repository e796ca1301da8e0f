//! Story graphs and edge-on-path queries.
//!
//! A story's binary facts form an undirected labeled multigraph over its
//! non-reserved entities; facts mentioning a reserved group/property
//! constant become self-loops on their entity.  OPEC needs to know, for a
//! query pair (s, t), which story-fact edges lie on *some* simple s–t path.
//!
//! Membership is decided through the block-cut tree: an edge lies on a
//! simple s–t path iff its biconnected component is one of the blocks the
//! s–t path of the block-cut tree passes through (within a biconnected
//! component, every edge is reachable by a simple path between any two of
//! its attachment vertices).  Self-loops lie on no simple path.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::story::{EntityKind, GroundAtom, Story};

/// One story-fact edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub atom: GroundAtom,
    /// Endpoint node indices; equal for self-loops.
    pub u: usize,
    pub v: usize,
}

/// Undirected labeled multigraph over a story's entities.
#[derive(Debug, Clone)]
pub struct StoryGraph {
    pub nodes: Vec<String>,
    node_ids: BTreeMap<String, usize>,
    pub edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>, // (neighbor, edge id); self-loops excluded
}

impl StoryGraph {
    /// Builds the graph of the given facts. Facts whose constants are all
    /// reserved contribute nothing; facts with exactly one non-reserved
    /// constant become self-loops.
    pub fn new<'a>(facts: impl IntoIterator<Item = &'a GroundAtom>, story: &Story) -> Self {
        let mut nodes: Vec<String> = story.proper_entities().map(|(n, _)| n.to_string()).collect();
        nodes.sort();
        let node_ids: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut edges = Vec::new();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
        for atom in facts {
            let proper: Vec<usize> = atom
                .args
                .iter()
                .filter(|c| story.kind_of(c) != EntityKind::Reserved)
                .filter_map(|c| node_ids.get(c.as_str()).copied())
                .collect();
            let (u, v) = match proper.as_slice() {
                [] => continue,
                [u] => (*u, *u),
                [u, v, ..] => (*u, *v),
            };
            let id = edges.len();
            edges.push(Edge { atom: atom.clone(), u, v });
            if u != v {
                adj[u].push((v, id));
                adj[v].push((u, id));
            }
        }
        StoryGraph { nodes, node_ids, edges, adj }
    }

    /// Graph over all of the story's plain facts plus every alternative of
    /// its ambiguous facts.
    pub fn of_story(story: &Story) -> Self {
        let mut facts: Vec<GroundAtom> = story.facts.iter().cloned().collect();
        for card in &story.ambiguous {
            for choice in &card.choices {
                if let Some(ga) = GroundAtom::from_atom(choice) {
                    facts.push(ga);
                }
            }
        }
        StoryGraph::new(facts.iter(), story)
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.node_ids.get(name).copied()
    }

    /// Ids of the edges lying on at least one simple path from `s` to `t`.
    /// Empty when `s == t`, when either endpoint is unknown, or when they
    /// are disconnected.
    pub fn on_path_edges(&self, s: &str, t: &str) -> BTreeSet<usize> {
        let (Some(s), Some(t)) = (self.node_id(s), self.node_id(t)) else {
            return BTreeSet::new();
        };
        if s == t {
            return BTreeSet::new();
        }
        let comps = self.biconnected_components();
        // Vertex -> set of component ids it belongs to.
        let mut comps_of: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        for (ci, comp) in comps.iter().enumerate() {
            for &eid in comp {
                let e = &self.edges[eid];
                comps_of.entry(e.u).or_default().insert(ci);
                comps_of.entry(e.v).or_default().insert(ci);
            }
        }
        // Block-cut tree: block nodes 0..B, then one node per cut vertex
        // (any vertex in ≥ 2 blocks).
        let b = comps.len();
        let mut cut_ids: HashMap<usize, usize> = HashMap::new();
        let mut tree: Vec<Vec<usize>> = vec![Vec::new(); b];
        for (&v, cs) in &comps_of {
            if cs.len() >= 2 {
                let id = b + cut_ids.len();
                cut_ids.insert(v, id);
                tree.push(Vec::new());
                for &ci in cs {
                    tree[ci].push(id);
                    tree[id].push(ci);
                }
            }
        }
        let locate = |v: usize| -> Option<usize> {
            cut_ids.get(&v).copied().or_else(|| comps_of.get(&v).map(|cs| *cs.iter().next().expect("nonempty")))
        };
        let (Some(start), Some(goal)) = (locate(s), locate(t)) else {
            return BTreeSet::new();
        };
        // BFS path in the block-cut tree.
        let mut prev: Vec<Option<usize>> = vec![None; tree.len()];
        let mut seen = vec![false; tree.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            if n == goal {
                break;
            }
            for &m in &tree[n] {
                if !seen[m] {
                    seen[m] = true;
                    prev[m] = Some(n);
                    queue.push_back(m);
                }
            }
        }
        if !seen[goal] {
            return BTreeSet::new();
        }
        let mut blocks_on_path: BTreeSet<usize> = BTreeSet::new();
        let mut cur = Some(goal);
        while let Some(n) = cur {
            if n < b {
                blocks_on_path.insert(n);
            }
            cur = prev[n];
        }
        let mut out = BTreeSet::new();
        for ci in blocks_on_path {
            out.extend(comps[ci].iter().copied());
        }
        out
    }

    /// Biconnected components as sets of edge ids (self-loops excluded).
    fn biconnected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut disc = vec![0usize; n];
        let mut low = vec![0usize; n];
        let mut visited = vec![false; n];
        let mut timer = 1usize;
        let mut edge_stack: Vec<usize> = Vec::new();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        // Iterative DFS; frame: (vertex, parent edge id, next adj index).
        for root in 0..n {
            if visited[root] || self.adj[root].is_empty() {
                continue;
            }
            let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
            visited[root] = true;
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&(v, pe, i)) = stack.last() {
                if i < self.adj[v].len() {
                    stack.last_mut().expect("nonempty").2 += 1;
                    let (w, eid) = self.adj[v][i];
                    if Some(eid) == pe {
                        continue;
                    }
                    if !visited[w] {
                        edge_stack.push(eid);
                        visited[w] = true;
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, Some(eid), 0));
                    } else if disc[w] < disc[v] {
                        // Back edge.
                        edge_stack.push(eid);
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[v]);
                        if low[v] >= disc[p] {
                            // p is an articulation point (or the root):
                            // pop one component.
                            let mut comp = Vec::new();
                            while let Some(&eid) = edge_stack.last() {
                                let e = &self.edges[eid];
                                if disc[e.u].max(disc[e.v]) >= disc[v] {
                                    comp.push(edge_stack.pop().expect("nonempty"));
                                } else {
                                    break;
                                }
                            }
                            if !comp.is_empty() {
                                comps.push(comp);
                            }
                        }
                    }
                }
            }
        }
        comps
    }

    /// Renders the graph in DOT format.  When a query pair is given, edges
    /// on no simple path between the endpoints are drawn dashed.
    pub fn to_dot(&self, query: Option<(&str, &str)>) -> String {
        let on_path = query.map(|(s, t)| self.on_path_edges(s, t));
        let mut out = String::from("graph story {\n");
        for (i, name) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{name}\"];");
        }
        for (i, e) in self.edges.iter().enumerate() {
            let style = match &on_path {
                Some(set) if !set.contains(&i) => ", style=dashed",
                _ => "",
            };
            let _ = writeln!(out, "  n{} -- n{} [label=\"{}\"{}];", e.u, e.v, e.atom, style);
        }
        out.push_str("}\n");
        out
    }
}
