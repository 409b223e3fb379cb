//! Greedy Coalition Auction Algorithm.
//!
//! Every agent `i` keeps a [`BidState`] view of the whole team: the task it
//! believes each agent selected (`z_i`), that agent's bid (`y_i`) and whether
//! the choice is final (`c_i`). One iteration runs three synchronous phases:
//!
//! 1. [`select_best_task`]: each unfinalized agent bids its best marginal
//!    utility given its current view (null, worth 0, when nothing is positive);
//! 2. [`share_state_vectors`]: each agent copies its neighbours' own rows;
//! 3. [`update_state_vectors`]: among the agents it sees on its own task,
//!    each agent finalizes the highest bidder and resets the others.
//!
//! The loop stops once every agent is finalized, or when no unfinalized agent
//! changed its selection since the previous iteration. An unfinalized agent
//! always ends an iteration on the null selection, so the second condition
//! means nobody found a task worth bidding on. Each bidding round finalizes
//! at least the globally highest bidder, which bounds the loop by `n`.

use thiserror::Error;

use crate::model::{AgentState, AgentStatus, AllocationProfile, Assignment, CommRange, CostTable, Scenario};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("communication range must be non-negative, got {0}")]
    NegativeRange(f64),
    #[error("non-finite position for agent {0}")]
    NonFinitePosition(usize),
}

/// Symmetric who-hears-whom relation; every agent hears itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl CommunicationGraph {
    pub fn complete(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![true; n * n],
        }
    }

    /// Graph from an explicit undirected edge list; self-loops are implied.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self {
            n,
            adjacency: vec![false; n * n],
        };
        for i in 0..n {
            g.adjacency[i * n + i] = true;
        }
        for &(a, b) in edges {
            g.adjacency[a * n + b] = true;
            g.adjacency[b * n + a] = true;
        }
        g
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn connected(&self, i: usize, k: usize) -> bool {
        self.adjacency[i * self.n + k]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&k| self.connected(i, k))
    }

    pub fn is_complete(&self) -> bool {
        self.adjacency.iter().all(|&e| e)
    }
}

/// Links every pair of agents at distance at most `range`.
pub fn build_comm_graph(positions: &[Vec2], range: CommRange) -> Result<CommunicationGraph, AuctionError> {
    if let Some(i) = positions.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
        return Err(AuctionError::NonFinitePosition(i));
    }
    let n = positions.len();
    let range = match range {
        CommRange::Unlimited => return Ok(CommunicationGraph::complete(n)),
        CommRange::Limited(r) if r < 0.0 || r.is_nan() => return Err(AuctionError::NegativeRange(r)),
        CommRange::Limited(r) => r,
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            if (positions[i] - positions[k]).norm() <= range {
                edges.push((i, k));
            }
        }
    }
    Ok(CommunicationGraph::from_edges(n, &edges))
}

/// One agent's view of the team.
#[derive(Debug, Clone, PartialEq)]
pub struct BidState {
    pub selected: Vec<Assignment>,
    pub bids: Vec<f64>,
    pub finalized: Vec<bool>,
}

impl BidState {
    pub fn new(n: usize) -> Self {
        Self {
            selected: vec![Assignment::Null; n],
            bids: vec![0.0; n],
            finalized: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn finalized_count(&self) -> usize {
        self.finalized.iter().filter(|&&c| c).count()
    }
}

/// Marginal utilities an agent assigns to each task, given its view of the
/// other agents' selections. The agent's own entry in `view` is ignored.
pub trait UtilityModel {
    fn task_count(&self) -> usize;

    fn marginal_utilities(&self, agent: usize, view: &[Assignment]) -> Vec<f64>;
}

/// Marginal utilities from a scenario's rewards and success probabilities
/// plus a table of costs-to-go (`+inf` or missing entries are never selected).
pub struct ScenarioUtility<'a> {
    scenario: &'a Scenario,
    costs: &'a CostTable,
}

impl<'a> ScenarioUtility<'a> {
    pub fn new(scenario: &'a Scenario, costs: &'a CostTable) -> Self {
        Self { scenario, costs }
    }
}

impl UtilityModel for ScenarioUtility<'_> {
    fn task_count(&self) -> usize {
        self.scenario.task_count()
    }

    fn marginal_utilities(&self, agent: usize, view: &[Assignment]) -> Vec<f64> {
        let s = self.scenario;
        let mut failure = vec![1.0; s.task_count()];
        for (k, a) in view.iter().enumerate() {
            if let (Assignment::Task(j), true) = (*a, k != agent) {
                failure[j] *= 1.0 - s.success(k, j);
            }
        }
        s.tasks
            .iter()
            .zip(failure)
            .enumerate()
            .map(|(j, (task, others_failure))| {
                let cost = self.costs.get(agent, j).unwrap_or(f64::INFINITY);
                crate::model::marginal_reward(task.nominal_reward, s.success(agent, j), others_failure)
                    - task.lambda * cost
            })
            .collect()
    }
}

/// Auction phase for one agent: bid on the best task of `task_utilities`,
/// or on null (worth 0) when no task is strictly positive. Ties go to the
/// lowest task index. Finalized agents keep their bid.
pub fn select_best_task(agent: usize, bid: &mut BidState, task_utilities: &[f64]) {
    if bid.finalized[agent] {
        return;
    }
    let mut best = (Assignment::Null, 0.0);
    for (j, &u) in task_utilities.iter().enumerate() {
        if u > best.1 {
            best = (Assignment::Task(j), u);
        }
    }
    bid.selected[agent] = best.0;
    bid.bids[agent] = best.1;
}

/// Consensus, first half: every agent copies the own rows of the agents it
/// hears. Rows already finalized in the receiver's view are kept.
pub fn share_state_vectors(bids: &mut [BidState], graph: &CommunicationGraph) {
    let own: Vec<(Assignment, f64, bool)> = bids
        .iter()
        .enumerate()
        .map(|(k, b)| (b.selected[k], b.bids[k], b.finalized[k]))
        .collect();
    for (i, view) in bids.iter_mut().enumerate() {
        for k in graph.neighbors(i) {
            if view.finalized[k] {
                continue;
            }
            let (z, y, c) = own[k];
            view.selected[k] = z;
            view.bids[k] = y;
            view.finalized[k] = c;
        }
    }
}

/// Consensus, second half, for one agent's view. Returns the agent finalized
/// in this view, if any.
pub fn update_agent_view(agent: usize, view: &mut BidState) -> Option<usize> {
    if view.finalized[agent] {
        return None;
    }
    let task = view.selected[agent];
    if task.is_null() {
        return None;
    }
    let contenders: Vec<usize> = (0..view.len())
        .filter(|&k| view.selected[k] == task && !view.finalized[k])
        .collect();
    let mut winner = contenders[0];
    for &k in &contenders[1..] {
        if view.bids[k] > view.bids[winner] {
            winner = k;
        }
    }
    view.finalized[winner] = true;
    for k in contenders.into_iter().filter(|&k| k != winner) {
        view.selected[k] = Assignment::Null;
        view.bids[k] = 0.0;
    }
    Some(winner)
}

/// Consensus, second half: each agent finalizes the highest bidder (lowest
/// index on ties) among the unfinalized agents it sees on its own task and
/// resets the others to null.
pub fn update_state_vectors(bids: &mut [BidState]) {
    for (i, view) in bids.iter_mut().enumerate() {
        update_agent_view(i, view);
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuctionOptions {
    /// Keep a snapshot of every agent's view after each iteration.
    pub record_trace: bool,
    /// Order in which agents are processed inside each phase. Results do not
    /// depend on it; exposed so that property can be tested.
    pub order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionResult {
    /// Each agent's own final selection.
    pub profile: AllocationProfile,
    pub iterations: usize,
    pub final_views: Vec<BidState>,
    /// Per iteration, every agent's view after the update phase.
    pub bid_trace: Option<Vec<Vec<BidState>>>,
}

/// Runs the auction among `frozen.len()` agents. `frozen[i] = Some(task)`
/// marks a passive agent whose assignment is fixed; such agents start
/// finalized and are announced to their neighbours before the first round.
pub fn run_auction<U: UtilityModel + ?Sized>(
    utility: &U,
    frozen: &[Option<usize>],
    graph: &CommunicationGraph,
    options: &AuctionOptions,
) -> AuctionResult {
    let n = frozen.len();
    assert_eq!(graph.len(), n, "graph size must match agent count");
    let order: Vec<usize> = options.order.clone().unwrap_or_else(|| (0..n).collect());
    debug_assert_eq!(order.len(), n);

    let mut bids: Vec<BidState> = (0..n).map(|_| BidState::new(n)).collect();
    let mut any_frozen = false;
    for (i, f) in frozen.iter().enumerate() {
        if let Some(j) = *f {
            bids[i].selected[i] = Assignment::Task(j);
            bids[i].finalized[i] = true;
            any_frozen = true;
        }
    }
    if any_frozen {
        share_state_vectors(&mut bids, graph);
    }

    let mut trace = options.record_trace.then(Vec::new);
    let mut previous: Vec<Assignment> = (0..n).map(|i| bids[i].selected[i]).collect();
    let mut iterations = 0;
    let all_final = |b: &[BidState]| (0..n).all(|i| b[i].finalized[i]);

    while !all_final(&bids) {
        iterations += 1;
        for &i in &order {
            if !bids[i].finalized[i] {
                let utilities = utility.marginal_utilities(i, &bids[i].selected);
                select_best_task(i, &mut bids[i], &utilities);
            }
        }
        let proposed: Vec<Assignment> = (0..n).map(|i| bids[i].selected[i]).collect();
        share_state_vectors(&mut bids, graph);
        for &i in &order {
            update_agent_view(i, &mut bids[i]);
        }
        if let Some(t) = trace.as_mut() {
            t.push(bids.clone());
        }
        let settled = (0..n).all(|i| bids[i].finalized[i] || proposed[i] == previous[i]);
        if settled {
            break;
        }
        previous = (0..n).map(|i| bids[i].selected[i]).collect();
    }
    // Final broadcast so views reflect the last round's outcome.
    share_state_vectors(&mut bids, graph);

    AuctionResult {
        profile: AllocationProfile::new((0..n).map(|i| bids[i].selected[i]).collect()),
        iterations,
        final_views: bids,
        bid_trace: trace,
    }
}

/// GCAA over a scenario's agents in their current states, with costs-to-go
/// from `costs`. Passive agents keep their frozen task.
pub fn run_gcaa(
    scenario: &Scenario,
    agents: &[AgentState],
    graph: &CommunicationGraph,
    costs: &CostTable,
    options: &AuctionOptions,
) -> AuctionResult {
    let frozen: Vec<Option<usize>> = agents
        .iter()
        .map(|a| match a.status {
            AgentStatus::Passive(j) => Some(j),
            AgentStatus::Active => None,
        })
        .collect();
    run_auction(&ScenarioUtility::new(scenario, costs), &frozen, graph, options)
}
