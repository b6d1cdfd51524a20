//! The five cluster-head election rules behind one common entry point:
//! given the network state, the round context, and a random stream,
//! [`elect_cluster_heads`] returns the head set for the round.

use crate::model::{EcrMode, NodeState, Protocol, ScenarioConfig, Tier};
use rand::Rng;
use std::collections::HashSet;

/// Upper clamp for the energy-aware election probabilities (DEEC, ECRSEP).
pub const MAX_ELECTION_PROBABILITY: f64 = 0.99;
/// Lower clamp keeping probabilities strictly positive for the threshold rule.
const MIN_ELECTION_PROBABILITY: f64 = 1e-6;

/// Per-round election inputs shared by every node.
#[derive(Debug, Clone)]
pub struct ElectionContext {
    /// Current round index, starting at 1.
    pub round: u32,
    /// Mean residual energy over alive nodes (DEEC normalization).
    pub avg_residual_energy: f64,
    /// Mean energy consumption rate over alive nodes (ECRSEP normalization).
    pub avg_ecr: f64,
    /// Nodes that served as cluster head in the previous round.
    pub prev_round_chs: HashSet<usize>,
}

impl ElectionContext {
    /// Context for round `round`, computed from the current node states.
    pub fn compute(round: u32, nodes: &[NodeState], prev_round_chs: HashSet<usize>) -> Self {
        let mut alive = 0u32;
        let mut residual_sum = 0.0;
        let mut ecr_sum = 0.0;
        for node in nodes.iter().filter(|n| n.alive) {
            alive += 1;
            residual_sum += node.residual_energy;
            ecr_sum += ecr(node, round);
        }
        let (avg_residual_energy, avg_ecr) = if alive > 0 {
            (residual_sum / f64::from(alive), ecr_sum / f64::from(alive))
        } else {
            (0.0, 0.0)
        };
        ElectionContext {
            round,
            avg_residual_energy,
            avg_ecr,
            prev_round_chs,
        }
    }
}

/// Rotating-epoch length for a node elected with probability `p`: the node
/// sits out `ceil(1/p) - 1` rounds before rejoining the eligible set.
pub fn epoch_length(p: f64) -> u32 {
    debug_assert!(p > 0.0 && p < 1.0);
    // The subtracted epsilon absorbs representation noise in 1/p so that
    // e.g. p = 1/11 yields exactly 11.
    ((1.0 / p) - 1e-9).ceil().max(1.0) as u32
}

/// Election threshold for a node in the eligible set G with probability `p`
/// at round `r`. Nodes outside G get no draw at all (threshold zero).
///
/// Returns 1.0 (certain election) at the final round of an epoch, where the
/// denominator reaches zero within floating tolerance.
pub fn threshold(p: f64, r: u32) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "threshold requires p in (0,1), got {p}");
    let epoch = ((1.0 / p).round_ties_even() as u32).max(1);
    let phase = r % epoch;
    let denom = 1.0 - p * f64::from(phase);
    if denom <= 1e-12 {
        return 1.0;
    }
    let t = p / denom;
    if t >= 1.0 - 1e-12 {
        1.0
    } else {
        t
    }
}

/// LEACH: every node shares the flat probability, blind to heterogeneity.
pub fn leach_probability(node: &NodeState, config: &ScenarioConfig) -> f64 {
    debug_assert!(node.alive);
    config.p_opt
}

/// SEP: election probability weighted by initial-energy tier, so advanced
/// nodes serve (1 + alpha) times as often as normal nodes.
pub fn sep_probability(node: &NodeState, config: &ScenarioConfig) -> f64 {
    debug_assert!(node.alive);
    config.p_opt * sep_tier_weight(node.tier, config)
}

fn sep_tier_weight(tier: Tier, config: &ScenarioConfig) -> f64 {
    let denom = 1.0 + config.alpha * config.m;
    match tier {
        Tier::Advanced => (1.0 + config.alpha) / denom,
        // Intermediate tiers only exist under ESEP.
        Tier::Normal | Tier::Intermediate => 1.0 / denom,
    }
}

/// ESEP: the three-tier extension of SEP's weighting.
pub fn esep_probability(node: &NodeState, config: &ScenarioConfig) -> f64 {
    debug_assert!(node.alive);
    let denom = 1.0 + config.alpha * config.m + config.esep_beta * config.esep_x;
    let weight = match node.tier {
        Tier::Advanced => 1.0 + config.alpha,
        Tier::Intermediate => 1.0 + config.esep_beta,
        Tier::Normal => 1.0,
    };
    config.p_opt * weight / denom
}

/// DEEC: probability proportional to the node's residual energy relative to
/// the network average.
pub fn deec_probability(node: &NodeState, ctx: &ElectionContext, config: &ScenarioConfig) -> f64 {
    debug_assert!(node.alive);
    assert!(
        ctx.avg_residual_energy > 0.0,
        "deec_probability requires a positive average residual energy"
    );
    let p = config.p_opt * node.residual_energy / ctx.avg_residual_energy;
    p.clamp(MIN_ELECTION_PROBABILITY, MAX_ELECTION_PROBABILITY)
}

/// Energy consumption rate of a node at round `r`: mean energy spent per
/// elapsed round. Zero at round 1, where no history exists.
pub fn ecr(node: &NodeState, r: u32) -> f64 {
    if r <= 1 {
        return 0.0;
    }
    (node.initial_energy - node.residual_energy) / f64::from(r - 1)
}

/// ECRSEP: SEP's tier weight scaled by a consumption-rate factor.
///
/// In `InverseNormalized` mode the factor is `avg_ecr / ecr`, capped at 2, so
/// nodes that have been spending slowly take over head duty. In `AsWritten`
/// mode the factor is `ecr / avg_ecr`. Either ratio is defined as 1 when its
/// inputs vanish (round 1, or an untouched node), falling back to the plain
/// SEP weighting.
pub fn ecrsep_probability(node: &NodeState, ctx: &ElectionContext, config: &ScenarioConfig) -> f64 {
    debug_assert!(node.alive);
    assert!(
        !ctx.prev_round_chs.contains(&node.id),
        "node {} was cluster head last round and is excluded from election",
        node.id
    );
    let weight = sep_tier_weight(node.tier, config);
    let node_ecr = ecr(node, ctx.round);
    let ratio = match config.ecr_mode {
        EcrMode::AsWritten => {
            if ctx.avg_ecr == 0.0 {
                1.0
            } else {
                node_ecr / ctx.avg_ecr
            }
        }
        EcrMode::InverseNormalized => {
            if ctx.avg_ecr == 0.0 || node_ecr == 0.0 {
                1.0
            } else {
                (ctx.avg_ecr / node_ecr).min(2.0)
            }
        }
    };
    (config.p_opt * weight * ratio).clamp(MIN_ELECTION_PROBABILITY, MAX_ELECTION_PROBABILITY)
}

/// Per-node election probability under the configured protocol.
pub fn election_probability(
    node: &NodeState,
    ctx: &ElectionContext,
    config: &ScenarioConfig,
) -> f64 {
    match config.protocol {
        Protocol::Leach => leach_probability(node, config),
        Protocol::Sep => sep_probability(node, config),
        Protocol::Esep => esep_probability(node, config),
        Protocol::Deec => deec_probability(node, ctx, config),
        Protocol::Ecrsep => ecrsep_probability(node, ctx, config),
    }
}

/// Rounds a node elected at round `r` sits out before rejoining the eligible
/// set G.
///
/// The fixed-probability protocols rotate on a shared per-tier epoch grid of
/// `round(1/p)` rounds (the same modulus the threshold cycles over): an
/// elected node stays out exactly until the grid boundary, so each epoch the
/// whole tier rejoins together and heads stay spread across the epoch's
/// rounds. ECRSEP rotates on its tier's epoch length from the election round
/// onward; its per-round probability modulation happens inside the threshold
/// draw, not the rotation. DEEC enforces no sit-out at all: rotation is
/// carried entirely by the residual-energy weighting of its probability.
fn exclusion_rounds(node: &NodeState, config: &ScenarioConfig, r: u32) -> u32 {
    match config.protocol {
        Protocol::Leach | Protocol::Sep | Protocol::Esep => {
            let p = election_tier_probability(node, config);
            let modulus = ((1.0 / p).round_ties_even() as u32).max(1);
            modulus - 1 - (r % modulus)
        }
        Protocol::Deec => 0,
        Protocol::Ecrsep => {
            epoch_length(config.p_opt * sep_tier_weight(node.tier, config)).saturating_sub(1)
        }
    }
}

/// The static, tier-determined election probability of a node (the dynamic
/// ECR/residual factors stripped away).
fn election_tier_probability(node: &NodeState, config: &ScenarioConfig) -> f64 {
    match config.protocol {
        Protocol::Leach | Protocol::Deec => config.p_opt,
        Protocol::Sep | Protocol::Ecrsep => sep_probability(node, config),
        Protocol::Esep => esep_probability(node, config),
    }
}

/// Runs one round of cluster-head election over the network.
///
/// Nodes are visited in ascending id order so the outcome is a pure function
/// of the inputs and the random stream. A node sitting out its epoch has its
/// counter decremented and gets no draw; an eligible node draws u ~ U[0,1)
/// and becomes head iff u < threshold(p, r). Elected nodes leave G for
/// [`exclusion_rounds`]. An empty result is a legal outcome.
pub fn elect_cluster_heads(
    nodes: &mut [NodeState],
    ctx: &ElectionContext,
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut heads = Vec::new();
    for node in nodes.iter_mut() {
        if !node.alive {
            continue;
        }
        if node.epoch_counter > 0 {
            node.epoch_counter -= 1;
            continue;
        }
        if config.protocol == Protocol::Ecrsep && ctx.prev_round_chs.contains(&node.id) {
            continue;
        }
        let p = election_probability(node, ctx, config);
        let u: f64 = rng.gen();
        if u < threshold(p, ctx.round) {
            node.ch_in_round = Some(ctx.round);
            node.epoch_counter = exclusion_rounds(node, config, ctx.round);
            heads.push(node.id);
        }
    }
    heads
}
