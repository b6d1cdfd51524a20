//! Round loop of the simulator: election, cluster formation, steady-state
//! energy accounting, death processing, and per-round metrics.

use crate::metrics::summarize;
use crate::model::{build_network, ConfigError, NodeState, ScenarioConfig};
use crate::protocols::{elect_cluster_heads, ElectionContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Absolute tolerance for the per-round energy conservation identity.
pub const ENERGY_TOLERANCE_J: f64 = 1e-9;

/// Observables of one simulated round, sampled after its deaths.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// Round index, starting at 1.
    pub round: u32,
    pub alive: u32,
    pub dead: u32,
    /// Cluster heads elected this round.
    pub ch_count: u32,
    /// Packets delivered to the sink this round.
    pub packets_to_bs: u64,
    pub packets_to_bs_cum: u64,
    /// Network residual energy at the end of the round, joules.
    pub residual_energy_total: f64,
}

/// Whole-run result: stability metrics plus the full round series.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    /// Round of the first node death (end of the stability period).
    pub fnd: Option<u32>,
    /// Round by which half the population has died.
    pub hnd: Option<u32>,
    /// Round of the last node death (network lifetime).
    pub lnd: Option<u32>,
    pub total_packets: u64,
    pub series: Vec<RoundMetrics>,
}

/// Where a non-head node sends its packet this round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uplink {
    /// Member of the cluster led by this node id.
    Cluster(usize),
    /// Straight to the sink; used only when no head was elected.
    Direct,
}

/// Assigns each alive non-head node to its nearest cluster head (ties broken
/// by lowest head id). With no heads at all, every alive node goes direct to
/// the sink. Returns `(node id, uplink)` pairs in ascending id order.
pub fn form_clusters(head_ids: &[usize], nodes: &[NodeState]) -> Vec<(usize, Uplink)> {
    let mut links = Vec::new();
    for node in nodes.iter().filter(|n| n.alive) {
        if head_ids.contains(&node.id) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &head in head_ids {
            let d = node.distance_to(nodes[head].x, nodes[head].y);
            match best {
                Some((_, best_d)) if d >= best_d => {}
                _ => best = Some((head, d)),
            }
        }
        match best {
            Some((head, _)) => links.push((node.id, Uplink::Cluster(head))),
            None => links.push((node.id, Uplink::Direct)),
        }
    }
    links
}

/// Energy drawn and packets delivered by one steady-state phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOutcome {
    pub packets_to_bs: u64,
    /// Total energy actually debited, joules.
    pub energy_spent: f64,
}

/// Withdraws up to `cost` from the node, clamping at zero. Returns the amount
/// actually debited.
fn debit(node: &mut NodeState, cost: f64) -> f64 {
    let applied = cost.min(node.residual_energy);
    node.residual_energy -= applied;
    applied
}

/// Marks nodes whose energy reached zero as dead. Called at phase boundaries
/// so that a node always finishes its current action before dying.
fn mark_deaths(nodes: &mut [NodeState]) {
    for node in nodes.iter_mut() {
        if node.alive && node.residual_energy <= 0.0 {
            node.residual_energy = 0.0;
            node.alive = false;
        }
    }
}

/// Runs the steady-state data flow for one round over an already-formed
/// cluster layout.
///
/// Members transmit to their heads first (the head pays receive plus
/// aggregation per member, even for members that die transmitting); then
/// every head still alive aggregates its own reading and forwards one packet
/// to the sink, and direct senders transmit straight to the sink. A node that
/// cannot afford a debit completes the action on its remaining energy and
/// dies at the phase boundary, so its packet still counts.
pub fn run_steady_state(
    nodes: &mut [NodeState],
    head_ids: &[usize],
    links: &[(usize, Uplink)],
    config: &ScenarioConfig,
) -> SteadyStateOutcome {
    let radio = &config.radio;
    let k = config.k_bits;
    let (sink_x, sink_y) = config.sink;
    let mut spent = 0.0;

    // Member uplink: transmit to the head; the head receives and aggregates.
    for &(member, uplink) in links {
        if let Uplink::Cluster(head) = uplink {
            let d = nodes[member].distance_to(nodes[head].x, nodes[head].y);
            spent += debit(&mut nodes[member], radio.tx_cost(k, d));
            let head_cost = radio.rx_cost(k) + radio.aggregation_cost(k, 1);
            spent += debit(&mut nodes[head], head_cost);
        }
    }
    mark_deaths(nodes);

    // Forwarding: heads aggregate their own reading and send one packet to
    // the sink; direct senders send their own packet. Heads that died while
    // receiving do not forward.
    let mut packets = 0u64;
    for &head in head_ids {
        if !nodes[head].alive {
            continue;
        }
        let d = nodes[head].distance_to(sink_x, sink_y);
        let cost = radio.aggregation_cost(k, 1) + radio.tx_cost(k, d);
        spent += debit(&mut nodes[head], cost);
        packets += 1;
    }
    for &(sender, uplink) in links {
        if uplink == Uplink::Direct && nodes[sender].alive {
            let d = nodes[sender].distance_to(sink_x, sink_y);
            spent += debit(&mut nodes[sender], radio.tx_cost(k, d));
            packets += 1;
        }
    }
    mark_deaths(nodes);

    SteadyStateOutcome {
        packets_to_bs: packets,
        energy_spent: spent,
    }
}

/// Result of one [`Simulation::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub metrics: RoundMetrics,
    /// Heads elected this round, ascending by id.
    pub head_ids: Vec<usize>,
    /// Energy debited across the round, joules.
    pub energy_spent: f64,
}

/// A single in-progress run. Owns its node list, election bookkeeping, and
/// random stream; independent runs never share state.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    nodes: Vec<NodeState>,
    ctx: ElectionContext,
    rng: ChaCha8Rng,
    next_round: u32,
    packets_cum: u64,
    spent_cum: f64,
    initial_total: f64,
}

impl Simulation {
    /// Builds the network from the config seed and prepares round 1.
    pub fn new(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let nodes = build_network(config, &mut rng)?;
        let initial_total: f64 = nodes.iter().map(|n| n.initial_energy).sum();
        let ctx = ElectionContext::compute(1, &nodes, HashSet::new());
        Ok(Simulation {
            config: config.clone(),
            nodes,
            ctx,
            rng,
            next_round: 1,
            packets_cum: 0,
            spent_cum: 0.0,
            initial_total,
        })
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn alive_count(&self) -> u32 {
        self.nodes.iter().filter(|n| n.alive).count() as u32
    }

    /// Total energy actually debited since the start of the run, joules.
    pub fn energy_spent_total(&self) -> f64 {
        self.spent_cum
    }

    /// Runs the next round: election, cluster formation, steady state, death
    /// processing, context refresh. Returns `None` once the round budget is
    /// exhausted or no node is left alive.
    pub fn step(&mut self) -> Option<StepOutcome> {
        if self.next_round > self.config.max_rounds || self.alive_count() == 0 {
            return None;
        }
        let round = self.next_round;
        debug_assert_eq!(self.ctx.round, round);
        let residual_before: f64 = self.nodes.iter().map(|n| n.residual_energy).sum();

        let head_ids = elect_cluster_heads(&mut self.nodes, &self.ctx, &self.config, &mut self.rng);
        let links = form_clusters(&head_ids, &self.nodes);
        let outcome = run_steady_state(&mut self.nodes, &head_ids, &links, &self.config);

        let residual_after: f64 = self.nodes.iter().map(|n| n.residual_energy).sum();
        self.packets_cum += outcome.packets_to_bs;
        self.spent_cum += outcome.energy_spent;
        // Bookkeeping identity: everything debited left the residual pool.
        assert!(
            (residual_before - residual_after - outcome.energy_spent).abs() <= ENERGY_TOLERANCE_J,
            "round {round}: energy not conserved"
        );
        assert!(
            (self.initial_total - residual_after - self.spent_cum).abs() <= ENERGY_TOLERANCE_J,
            "round {round}: cumulative energy drifted"
        );

        let alive = self.alive_count();
        let metrics = RoundMetrics {
            round,
            alive,
            dead: self.config.n - alive,
            ch_count: head_ids.len() as u32,
            packets_to_bs: outcome.packets_to_bs,
            packets_to_bs_cum: self.packets_cum,
            residual_energy_total: residual_after,
        };

        self.next_round = round + 1;
        self.ctx = ElectionContext::compute(
            self.next_round,
            &self.nodes,
            head_ids.iter().copied().collect(),
        );

        Some(StepOutcome {
            metrics,
            head_ids,
            energy_spent: outcome.energy_spent,
        })
    }
}

/// Runs a full scenario to completion: builds the network from the seed and
/// iterates rounds until every node is dead or the budget runs out. Identical
/// configs (seed included) produce bit-identical summaries.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationSummary, ConfigError> {
    let mut sim = Simulation::new(config)?;
    let mut series = Vec::new();
    while let Some(outcome) = sim.step() {
        series.push(outcome.metrics);
    }
    let lifetime = summarize(&series);
    Ok(SimulationSummary {
        fnd: lifetime.fnd,
        hnd: lifetime.hnd,
        lnd: lifetime.lnd,
        total_packets: lifetime.total_packets,
        series,
    })
}
