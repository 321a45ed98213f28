//! Canonical atom ordering by iterative partition refinement with
//! individualization, plus a depth-first line-notation writer driven by that
//! order. Shared by molecules and template pattern graphs.

/// Minimal graph view needed for canonical ordering and writing.
pub(crate) trait LabeledGraph {
    fn node_count(&self) -> usize;
    /// Comparable invariant for the initial partition.
    fn node_key(&self, i: usize) -> Vec<i64>;
    /// `(neighbor, bond key)` pairs.
    fn node_edges(&self, i: usize) -> Vec<(usize, u8)>;
    fn node_text(&self, i: usize) -> String;
    /// Text written between `a` and `b` for the bond with key `key`.
    fn bond_text(&self, a: usize, b: usize, key: u8) -> &'static str;
}

/// Upper bound on individualization leaves explored before the first leaf
/// string is accepted.
const MAX_LEAVES: usize = 4096;

pub(crate) fn canonical_string<G: LabeledGraph>(g: &G) -> String {
    canonical_form(g).0
}

/// Canonical text plus the node indices in the order they appear in it.
pub(crate) fn canonical_form<G: LabeledGraph>(g: &G) -> (String, Vec<usize>) {
    let n = g.node_count();
    if n == 0 {
        return (String::new(), Vec::new());
    }
    let edges: Vec<Vec<(usize, u8)>> = (0..n).map(|i| g.node_edges(i)).collect();
    let keys: Vec<Vec<i64>> = (0..n).map(|i| g.node_key(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0usize; n];
    for w in 1..n {
        let (prev, cur) = (order[w - 1], order[w]);
        ranks[cur] = if keys[cur] == keys[prev] { ranks[prev] } else { w };
    }
    let ranks = refine(&edges, ranks);
    let mut best: Option<(String, Vec<usize>)> = None;
    let mut leaves = 0;
    search(g, &edges, ranks, &mut best, &mut leaves);
    best.unwrap_or_default()
}

/// Ranks where each value is the number of nodes with a strictly smaller
/// class; equal ranks mean the nodes are not (yet) distinguished.
fn refine(edges: &[Vec<(usize, u8)>], mut ranks: Vec<usize>) -> Vec<usize> {
    let n = ranks.len();
    let mut classes = count_classes(&ranks);
    loop {
        let sigs: Vec<(usize, Vec<(u8, usize)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u8, usize)> =
                    edges[i].iter().map(|&(j, k)| (k, ranks[j])).collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sigs[a].cmp(&sigs[b]));
        let mut next = vec![0usize; n];
        for w in 1..n {
            let (prev, cur) = (order[w - 1], order[w]);
            next[cur] = if sigs[cur] == sigs[prev] { next[prev] } else { w };
        }
        let c = count_classes(&next);
        ranks = next;
        if c == classes {
            return ranks;
        }
        classes = c;
    }
}

fn count_classes(ranks: &[usize]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn search<G: LabeledGraph>(
    g: &G,
    edges: &[Vec<(usize, u8)>],
    ranks: Vec<usize>,
    best: &mut Option<(String, Vec<usize>)>,
    leaves: &mut usize,
) {
    if *leaves >= MAX_LEAVES && best.is_some() {
        return;
    }
    let n = ranks.len();
    // Smallest tied class, by rank value.
    let mut tied: Option<usize> = None;
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    for (r, &c) in counts.iter().enumerate() {
        if c > 1 {
            tied = Some(r);
            break;
        }
    }
    let Some(rank) = tied else {
        *leaves += 1;
        let (s, order) = write_ordered(g, edges, &ranks);
        if best.as_ref().is_none_or(|b| s < b.0) {
            *best = Some((s, order));
        }
        return;
    };
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == rank).collect();
    for &chosen in &members {
        let mut next = ranks.clone();
        for &m in &members {
            if m != chosen {
                next[m] = rank + 1;
            }
        }
        search(g, edges, refine(edges, next), best, leaves);
    }
}

/// Write the graph visiting atoms in ascending rank; disconnected components
/// are written separately, sorted, and joined with '.'.
fn write_ordered<G: LabeledGraph>(
    g: &G,
    edges: &[Vec<(usize, u8)>],
    ranks: &[usize],
) -> (String, Vec<usize>) {
    let n = ranks.len();
    let mut sorted_edges: Vec<Vec<(usize, u8)>> = edges.to_vec();
    for e in &mut sorted_edges {
        e.sort_by_key(|&(j, _)| ranks[j]);
    }
    let mut visited = vec![false; n];
    let mut parts = Vec::new();
    let mut by_rank: Vec<usize> = (0..n).collect();
    by_rank.sort_by_key(|&i| ranks[i]);
    for &start in &by_rank {
        if visited[start] {
            continue;
        }
        let mut w = Writer {
            g,
            edges: &sorted_edges,
            visited: &mut visited,
            children: vec![Vec::new(); n],
            ring_partners: vec![Vec::new(); n],
            out: String::new(),
            visit: Vec::new(),
            digits_in_use: Vec::new(),
            open_digit: Vec::new(),
        };
        w.plan(start);
        w.emit(start);
        parts.push((w.out, w.visit));
    }
    parts.sort();
    let text = parts.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(".");
    let order = parts.into_iter().flat_map(|p| p.1).collect();
    (text, order)
}

struct Writer<'a, G> {
    g: &'a G,
    edges: &'a [Vec<(usize, u8)>],
    visited: &'a mut [bool],
    children: Vec<Vec<(usize, u8)>>,
    /// Ring-closure partners in discovery order: `(partner, key, opens_here)`.
    ring_partners: Vec<Vec<(usize, u8, bool)>>,
    out: String,
    visit: Vec<usize>,
    digits_in_use: Vec<u32>,
    /// `(opening atom, partner, digit)`.
    open_digit: Vec<(usize, usize, u32)>,
}

impl<G: LabeledGraph> Writer<'_, G> {
    fn plan(&mut self, start: usize) {
        // Iterative DFS: (atom, parent, next edge position)
        let n = self.visited.len();
        let mut on_stack = vec![false; n];
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(start, None, 0)];
        self.visited[start] = true;
        on_stack[start] = true;
        let mut done_edges: Vec<(usize, usize)> = Vec::new();
        while let Some(top) = stack.last_mut() {
            let (u, parent, pos) = (top.0, top.1, top.2);
            if pos >= self.edges[u].len() {
                on_stack[u] = false;
                stack.pop();
                continue;
            }
            top.2 += 1;
            let (v, key) = self.edges[u][pos];
            if Some(v) == parent {
                continue;
            }
            if self.visited[v] {
                let e = (u.min(v), u.max(v));
                if on_stack[v] && !done_edges.contains(&e) {
                    done_edges.push(e);
                    self.ring_partners[v].push((u, key, true));
                    self.ring_partners[u].push((v, key, false));
                }
                continue;
            }
            self.visited[v] = true;
            on_stack[v] = true;
            self.children[u].push((v, key));
            stack.push((v, Some(u), 0));
        }
    }

    fn emit(&mut self, start: usize) {
        // Explicit stack of actions keeps deep chains off the call stack.
        enum Step {
            Atom(usize, Option<(usize, u8)>),
            Text(&'static str),
        }
        let mut todo = vec![Step::Atom(start, None)];
        while let Some(step) = todo.pop() {
            match step {
                Step::Text(t) => self.out.push_str(t),
                Step::Atom(u, via) => {
                    if let Some((p, key)) = via {
                        self.out.push_str(self.g.bond_text(p, u, key));
                    }
                    self.out.push_str(&self.g.node_text(u));
                    self.visit.push(u);
                    self.ring_labels(u);
                    let kids = self.children[u].clone();
                    for (idx, &(v, key)) in kids.iter().enumerate().rev() {
                        let last = idx + 1 == kids.len();
                        if last {
                            todo.push(Step::Atom(v, Some((u, key))));
                        } else {
                            todo.push(Step::Text(")"));
                            todo.push(Step::Atom(v, Some((u, key))));
                            todo.push(Step::Text("("));
                        }
                    }
                }
            }
        }
    }

    fn ring_labels(&mut self, u: usize) {
        let partners = std::mem::take(&mut self.ring_partners[u]);
        // Closings first (freeing digits), then openings.
        for &(v, _key, opens) in &partners {
            if opens {
                continue;
            }
            let i = self
                .open_digit
                .iter()
                .position(|&(a, b, _)| a == v && b == u)
                .expect("ring opened before closing");
            let (_, _, d) = self.open_digit.remove(i);
            push_digit(&mut self.out, d);
            self.digits_in_use.retain(|&x| x != d);
        }
        for &(v, key, opens) in &partners {
            if !opens {
                continue;
            }
            let d = (1..).find(|d| !self.digits_in_use.contains(d)).unwrap();
            self.digits_in_use.push(d);
            self.open_digit.push((u, v, d));
            self.out.push_str(self.g.bond_text(u, v, key));
            push_digit(&mut self.out, d);
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}
