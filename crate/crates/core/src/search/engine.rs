use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::Ordering as AtomicOrdering;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::chem::{Molecule, MoleculeSet};
use crate::conditions::{aggregate_temperature, Candidate, ReactionConditions};
use crate::pricing::{effective_cost, is_buyable};
use crate::scoring::score_reaction;
use crate::templates::{apply_template, TemplateSource};

use super::{Enzyme, SearchConfig, SearchEdge, SearchError, SearchNode, Services, TemplateRanker};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    QueueEmpty,
    TimeLimit,
    ExpansionLimit,
    RouteLimit,
    Cancelled,
}

/// One queue pop. Pops rejected by the goal check have zero counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionRecord {
    pub step: usize,
    pub popped_priority: f64,
    pub node_key: String,
    pub templates_tried: usize,
    pub children_added: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub root: SearchNode,
    pub log: Vec<ExpansionRecord>,
    pub expansions: usize,
    pub termination: Termination,
}

impl SearchOutcome {
    /// CSV: step, popped_priority, node_key, templates_tried, children_added.
    pub fn log_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "popped_priority", "node_key", "templates_tried", "children_added"])
            .expect("in-memory write");
        for r in &self.log {
            let mut prio = String::new();
            let _ = write!(prio, "{}", r.popped_priority);
            w.write_record([
                r.step.to_string(),
                prio,
                r.node_key.clone(),
                r.templates_tried.to_string(),
                r.children_added.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

struct QueueEntry {
    priority: f64,
    counter: u64,
    node: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Max-heap: higher priority first, then lower counter.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.counter.cmp(&self.counter))
    }
}

struct ArenaNode {
    set: MoleculeSet,
    cost: f64,
    depth: usize,
    solved: bool,
    parent: Option<usize>,
    children: Vec<(SearchEdge, usize)>,
}

struct State<'s, 'a> {
    cfg: &'s SearchConfig,
    services: &'s Services<'a>,
    prices: HashMap<String, Option<f64>>,
    arena: Vec<ArenaNode>,
}

impl State<'_, '_> {
    fn price(&mut self, key: &str) -> Option<f64> {
        if let Some(p) = self.prices.get(key) {
            return *p;
        }
        let p = self.services.catalog.price_of_key(key);
        self.prices.insert(key.to_string(), p);
        p
    }

    fn set_cost_and_solved(&mut self, set: &MoleculeSet) -> (f64, bool) {
        let policy = self.cfg.policy;
        let mut cost = 0.0;
        let mut solved = true;
        for k in set.member_smiles() {
            let p = self.price(k);
            cost += effective_cost(p, &policy);
            solved &= is_buyable(p, &policy);
        }
        (cost, solved)
    }

    fn on_ancestor_chain(&self, node: usize, key: &str) -> bool {
        let mut cur = Some(node);
        while let Some(i) = cur {
            if self.arena[i].set.canonical_key() == key {
                return true;
            }
            cur = self.arena[i].parent;
        }
        false
    }

    fn conditions(&self, reaction: &str) -> Vec<Candidate> {
        match self.services.conditions.predict(reaction) {
            Ok(c) if !c.is_empty() => c,
            Ok(_) => vec![(ReactionConditions::default_row(), 1.0)],
            Err(e) => {
                log::warn!("condition prediction failed for {reaction}: {e}; using defaults");
                vec![(ReactionConditions::default_row(), 1.0)]
            }
        }
    }

    /// Index of the most expensive non-buyable member, lowest index on ties.
    fn expansion_target(&mut self, node: usize) -> Option<usize> {
        let policy = self.cfg.policy;
        let keys: Vec<String> = self.arena[node].set.member_smiles().to_vec();
        let mut best: Option<(usize, f64)> = None;
        for (i, k) in keys.iter().enumerate() {
            let p = self.price(k);
            if is_buyable(p, &policy) {
                continue;
            }
            let c = effective_cost(p, &policy);
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Children in (prioritizer, template rank, result index) order.
    fn expand(&mut self, node: usize) -> (usize, Vec<(SearchEdge, ArenaNode)>) {
        let Some(idx) = self.expansion_target(node) else {
            return (0, Vec::new());
        };
        let parent_set = self.arena[node].set.clone();
        let member: &Molecule = &parent_set.members()[idx];
        let member_key = &parent_set.member_smiles()[idx];
        let rankers: Vec<&dyn TemplateRanker> = [self.services.enzymatic, self.services.synthetic]
            .into_iter()
            .flatten()
            .collect();
        let mut proposals = Vec::new();
        for r in &rankers {
            for (tid, _) in r.rank(member, self.cfg.top_n_templates, self.cfg.screen) {
                if let Some(t) = r.library().get(tid) {
                    proposals.push(t);
                }
            }
        }
        let max_matches = self.cfg.max_matches;
        let results: Vec<Vec<MoleculeSet>> = proposals
            .par_iter()
            .map(|t| apply_template(t, member, max_matches))
            .collect();

        let depth = self.arena[node].depth + 1;
        let mut children = Vec::new();
        for (t, sets) in proposals.iter().zip(results) {
            for pre in sets {
                let mut members: Vec<Molecule> = parent_set
                    .members()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != idx)
                    .map(|(_, m)| m.clone())
                    .collect();
                members.extend(pre.members().iter().cloned());
                let child_set = MoleculeSet::new(members).expect("non-empty");
                if self.on_ancestor_chain(node, child_set.canonical_key()) {
                    continue;
                }
                let reaction = format!("{}>>{}", pre.canonical_key(), member_key);
                let cands = self.conditions(&reaction);
                let temperature = aggregate_temperature(&cands, self.cfg.temperature_top_k)
                    .expect("non-empty candidates");
                let policy = self.cfg.policy;
                let pre_cost: f64 = pre
                    .member_smiles()
                    .iter()
                    .map(|k| {
                        let p = self.price(k);
                        effective_cost(p, &policy)
                    })
                    .sum();
                let comp = score_reaction(
                    pre_cost,
                    temperature,
                    &cands[0].0,
                    self.services.toxicity,
                    &self.cfg.weights,
                );
                let (cost, solved) = self.set_cost_and_solved(&child_set);
                let edge = SearchEdge {
                    reaction_smiles: reaction,
                    temperature_c: temperature,
                    enzyme: match (t.source, &t.enzyme) {
                        (TemplateSource::Enzymatic, Some(e)) => Enzyme::Id(e.clone()),
                        _ => Enzyme::Synthetic,
                    },
                    score: comp.composite,
                    rule: t.text().to_string(),
                    label: 0,
                    template_id: Some(t.id),
                    components: Some(comp),
                };
                children.push((
                    edge,
                    ArenaNode {
                        set: child_set,
                        cost,
                        depth,
                        solved,
                        parent: Some(node),
                        children: Vec::new(),
                    },
                ));
            }
        }
        (proposals.len(), children)
    }

    fn goal_reached(&self, node: usize) -> bool {
        let n = &self.arena[node];
        n.solved
            || n.depth >= self.cfg.max_depth
            || self.cfg.early_accept_cost.is_some_and(|c| n.cost <= c)
    }

    fn into_tree(mut self, root: usize) -> SearchNode {
        build(&mut self.arena, root)
    }
}

fn build(arena: &mut Vec<ArenaNode>, i: usize) -> SearchNode {
    let children = std::mem::take(&mut arena[i].children);
    let subtrees = children
        .into_iter()
        .map(|(e, c)| (e, build(arena, c)))
        .collect();
    let n = &arena[i];
    SearchNode {
        molecule_set: n.set.clone(),
        cost_usd_per_g: n.cost,
        depth: n.depth,
        subtrees,
        solved: n.solved,
    }
}

/// Best-first search from `target`. Returns the whole explored tree,
/// unsolved branches included.
pub fn run_search(target: &Molecule, cfg: &SearchConfig, services: &Services) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    if services.enzymatic.is_none() && services.synthetic.is_none() {
        return Err(SearchError::Config("at least one template prioritizer is required".into()));
    }
    let start = Instant::now();
    let deadline = cfg.time_limit_s.map(|s| start + Duration::from_secs_f64(s));
    let mut st = State {
        cfg,
        services,
        prices: HashMap::new(),
        arena: Vec::new(),
    };
    let root_set = MoleculeSet::single(target.strip_maps());
    let (cost, solved) = st.set_cost_and_solved(&root_set);
    st.arena.push(ArenaNode {
        set: root_set,
        cost,
        depth: 0,
        solved,
        parent: None,
        children: Vec::new(),
    });
    let mut queue = BinaryHeap::new();
    let mut counter = 0u64;
    queue.push(QueueEntry {
        priority: f64::INFINITY,
        counter,
        node: 0,
    });
    let mut log = Vec::new();
    let mut expansions = 0;
    let mut solved_count = usize::from(solved);
    let termination = loop {
        if services.cancel.is_some_and(|c| c.load(AtomicOrdering::Relaxed)) {
            break Termination::Cancelled;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Termination::TimeLimit;
        }
        if cfg.max_expansions.is_some_and(|m| expansions >= m) {
            break Termination::ExpansionLimit;
        }
        if cfg.route_limit.is_some_and(|r| solved_count >= r) {
            break Termination::RouteLimit;
        }
        let Some(entry) = queue.pop() else {
            break Termination::QueueEmpty;
        };
        let node = entry.node;
        let mut rec = ExpansionRecord {
            step: log.len() + 1,
            popped_priority: entry.priority,
            node_key: st.arena[node].set.canonical_key().to_string(),
            templates_tried: 0,
            children_added: 0,
        };
        if !st.goal_reached(node) {
            let (tried, children) = st.expand(node);
            expansions += 1;
            rec.templates_tried = tried;
            rec.children_added = children.len();
            for (label, (mut edge, child)) in children.into_iter().enumerate() {
                edge.label = label;
                solved_count += usize::from(child.solved);
                let id = st.arena.len();
                let priority = edge.score;
                st.arena.push(child);
                st.arena[node].children.push((edge, id));
                counter += 1;
                queue.push(QueueEntry { priority, counter, node: id });
            }
        }
        log.push(rec);
    };
    log::info!(
        "search finished after {expansions} expansions ({termination:?}), {} nodes",
        st.arena.len()
    );
    Ok(SearchOutcome {
        root: st.into_tree(0),
        log,
        expansions,
        termination,
    })
}

