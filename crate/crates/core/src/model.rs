//! Physical substrate of the simulated network: node placement, energy
//! heterogeneity tiers, and the first-order radio energy model.

use rand::Rng;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Energy tier of a sensor node. `Intermediate` nodes only exist in ESEP
/// networks; the other protocols build two-tier populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Normal,
    Intermediate,
    Advanced,
}

/// Cluster-head election rule driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Leach,
    Sep,
    Esep,
    Deec,
    Ecrsep,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Leach,
        Protocol::Sep,
        Protocol::Esep,
        Protocol::Deec,
        Protocol::Ecrsep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Leach => "leach",
            Protocol::Sep => "sep",
            Protocol::Esep => "esep",
            Protocol::Deec => "deec",
            Protocol::Ecrsep => "ecrsep",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "leach" => Ok(Protocol::Leach),
            "sep" => Ok(Protocol::Sep),
            "esep" => Ok(Protocol::Esep),
            "deec" => Ok(Protocol::Deec),
            "ecrsep" => Ok(Protocol::Ecrsep),
            other => Err(format!(
                "unknown protocol '{other}' (valid: leach, sep, esep, deec, ecrsep)"
            )),
        }
    }
}

/// Direction of the consumption-rate factor in the ECRSEP election rule.
///
/// `InverseNormalized` favors nodes that have been spending less than the
/// network average; `AsWritten` scales the probability by the node's own
/// rate, favoring heavy spenders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EcrMode {
    #[default]
    InverseNormalized,
    AsWritten,
}

impl EcrMode {
    pub fn name(self) -> &'static str {
        match self {
            EcrMode::InverseNormalized => "inverse_normalized",
            EcrMode::AsWritten => "as_written",
        }
    }
}

impl fmt::Display for EcrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EcrMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inverse_normalized" | "inverse-normalized" => Ok(EcrMode::InverseNormalized),
            "as_written" | "as-written" => Ok(EcrMode::AsWritten),
            other => Err(format!(
                "unknown ecr_mode '{other}' (valid: inverse_normalized, as_written)"
            )),
        }
    }
}

/// Configuration rejected by validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("node count must be at least 1, got {0}")]
    NodeCount(u32),
    #[error("field dimensions must be positive, got {0}m x {1}m")]
    FieldDimensions(f64, f64),
    #[error(
        "tier fractions must satisfy 0 <= m, 0 <= esep_x and m + esep_x <= 1, \
         got m={m}, esep_x={esep_x}"
    )]
    TierFractions { m: f64, esep_x: f64 },
    #[error("energy factors must satisfy alpha >= esep_beta >= 0, got alpha={alpha}, esep_beta={esep_beta}")]
    EnergyFactors { alpha: f64, esep_beta: f64 },
    #[error("initial energy e0 must be positive, got {0} J")]
    InitialEnergy(f64),
    #[error("p_opt must lie in (0,1) with p_opt * n >= 1, got p_opt={p_opt}, n={n}")]
    ChProbability { p_opt: f64, n: u32 },
    #[error("packet size must be at least 1 bit, got {0}")]
    PacketSize(u32),
    #[error("radio coefficient {name} must be strictly positive, got {value}")]
    RadioCoefficient { name: &'static str, value: f64 },
}

/// First-order radio energy model: per-bit electronics and aggregation costs
/// plus a two-region (free-space / multipath) transmit amplifier.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioModel {
    /// Electronics cost, J/bit, paid on both transmit and receive.
    pub e_elec: f64,
    /// Data-aggregation cost, J/bit/signal.
    pub e_da: f64,
    /// Free-space amplifier coefficient, J/bit/m^2.
    pub eps_fs: f64,
    /// Multipath amplifier coefficient, J/bit/m^4.
    pub eps_mp: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            e_elec: 50e-9,
            e_da: 5e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
        }
    }
}

impl RadioModel {
    /// Crossover distance between the free-space and multipath amplifier
    /// regions. Always derived from the coefficients, never stored.
    pub fn d0(&self) -> f64 {
        (self.eps_fs / self.eps_mp).sqrt()
    }

    /// Energy to transmit `k` bits over `d` meters.
    ///
    /// Uses the d^2 free-space amplifier below the crossover distance and the
    /// d^4 multipath amplifier at or beyond it.
    pub fn tx_cost(&self, k: u32, d: f64) -> f64 {
        assert!(k > 0, "packet size must be positive");
        assert!(d >= 0.0, "distance must be nonnegative");
        let k = f64::from(k);
        let amp = if d < self.d0() {
            self.eps_fs * k * d.powi(2)
        } else {
            self.eps_mp * k * d.powi(4)
        };
        self.e_elec * k + amp
    }

    /// Energy to receive `k` bits (electronics only).
    pub fn rx_cost(&self, k: u32) -> f64 {
        assert!(k > 0, "packet size must be positive");
        self.e_elec * f64::from(k)
    }

    /// Energy for a cluster head to aggregate `signals` readings of `k` bits
    /// each (one signal per member plus the head's own reading).
    pub fn aggregation_cost(&self, k: u32, signals: u32) -> f64 {
        assert!(k > 0, "packet size must be positive");
        assert!(signals >= 1, "aggregation requires at least one signal");
        self.e_da * f64::from(k) * f64::from(signals)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("e_elec", self.e_elec),
            ("e_da", self.e_da),
            ("eps_fs", self.eps_fs),
            ("eps_mp", self.eps_mp),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::RadioCoefficient { name, value });
            }
        }
        Ok(())
    }
}

/// Full description of one experiment: population, field geometry,
/// heterogeneity, radio constants, protocol choice, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Node count.
    pub n: u32,
    /// Field rectangle (width, height) in meters; nodes are placed inside it.
    pub field: (f64, f64),
    /// Sink position in meters (may lie outside the field).
    pub sink: (f64, f64),
    /// Fraction of advanced nodes, in [0,1].
    pub m: f64,
    /// Extra-energy factor of advanced nodes (they start with e0*(1+alpha)).
    pub alpha: f64,
    /// Fraction of intermediate nodes, in [0,1]. Only ESEP builds this tier.
    pub esep_x: f64,
    /// Extra-energy factor of intermediate nodes.
    pub esep_beta: f64,
    /// Initial energy of a normal node, joules.
    pub e0: f64,
    /// Desired cluster-head probability per node per round.
    pub p_opt: f64,
    /// Packet size in bits.
    pub k_bits: u32,
    pub radio: RadioModel,
    /// Round budget; the run also stops when every node is dead.
    pub max_rounds: u32,
    pub seed: u64,
    pub protocol: Protocol,
    /// ECRSEP only; ignored by the other protocols.
    pub ecr_mode: EcrMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 100,
            field: (100.0, 100.0),
            sink: (50.0, 50.0),
            m: 0.1,
            alpha: 1.0,
            esep_x: 0.1,
            esep_beta: 0.5,
            e0: 0.5,
            p_opt: 0.1,
            k_bits: 4000,
            radio: RadioModel::default(),
            max_rounds: 20_000,
            seed: 1,
            protocol: Protocol::Ecrsep,
            ecr_mode: EcrMode::InverseNormalized,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 1 {
            return Err(ConfigError::NodeCount(self.n));
        }
        let (w, h) = self.field;
        if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
            return Err(ConfigError::FieldDimensions(w, h));
        }
        if !(0.0..=1.0).contains(&self.m)
            || !(0.0..=1.0).contains(&self.esep_x)
            || self.m + self.esep_x > 1.0
        {
            return Err(ConfigError::TierFractions {
                m: self.m,
                esep_x: self.esep_x,
            });
        }
        if !(self.esep_beta >= 0.0 && self.alpha >= self.esep_beta) {
            return Err(ConfigError::EnergyFactors {
                alpha: self.alpha,
                esep_beta: self.esep_beta,
            });
        }
        if !(self.e0 > 0.0) || !self.e0.is_finite() {
            return Err(ConfigError::InitialEnergy(self.e0));
        }
        if !(self.p_opt > 0.0 && self.p_opt < 1.0) || self.p_opt * f64::from(self.n) < 1.0 {
            return Err(ConfigError::ChProbability {
                p_opt: self.p_opt,
                n: self.n,
            });
        }
        if self.k_bits < 1 {
            return Err(ConfigError::PacketSize(self.k_bits));
        }
        self.radio.validate()
    }

    /// Whether this configuration builds an intermediate tier.
    pub fn is_three_tier(&self) -> bool {
        self.protocol == Protocol::Esep && self.esep_x > 0.0
    }

    /// Number of advanced nodes, rounded to nearest with ties toward even.
    pub fn advanced_count(&self) -> u32 {
        (self.m * f64::from(self.n)).round_ties_even() as u32
    }

    /// Number of intermediate nodes (zero outside ESEP).
    pub fn intermediate_count(&self) -> u32 {
        if !self.is_three_tier() {
            return 0;
        }
        let raw = (self.esep_x * f64::from(self.n)).round_ties_even() as u32;
        // Both counts round half-to-even independently, which can overshoot
        // the population by one when both land on .5 ties.
        raw.min(self.n - self.advanced_count())
    }
}

/// One sensor node: placement, energy bookkeeping, and the per-node election
/// state (epoch counter and most recent cluster-head round).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// Index into the network vector; stable across the run.
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub tier: Tier,
    pub initial_energy: f64,
    pub residual_energy: f64,
    pub alive: bool,
    /// Most recent round in which this node served as cluster head.
    pub ch_in_round: Option<u32>,
    /// Rounds remaining before this node rejoins the eligible set G.
    pub epoch_counter: u32,
}

impl NodeState {
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }
}

/// Places `config.n` nodes i.i.d. uniformly over the field and assigns energy
/// tiers. The same `(config, rng state)` always yields a bit-identical
/// network; tier counts round half-to-even.
pub fn build_network(
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<Vec<NodeState>, ConfigError> {
    config.validate()?;
    let n = config.n as usize;
    let n_adv = config.advanced_count() as usize;
    let n_int = config.intermediate_count() as usize;
    let (w, h) = config.field;

    let mut nodes = Vec::with_capacity(n);
    for id in 0..n {
        let x = rng.gen_range(0.0..w);
        let y = rng.gen_range(0.0..h);
        let tier = if id < n_adv {
            Tier::Advanced
        } else if id < n_adv + n_int {
            Tier::Intermediate
        } else {
            Tier::Normal
        };
        let initial_energy = match tier {
            Tier::Advanced => config.e0 * (1.0 + config.alpha),
            Tier::Intermediate => config.e0 * (1.0 + config.esep_beta),
            Tier::Normal => config.e0,
        };
        nodes.push(NodeState {
            id,
            x,
            y,
            tier,
            initial_energy,
            residual_energy: initial_energy,
            alive: true,
            ch_in_round: None,
            epoch_counter: 0,
        });
    }
    Ok(nodes)
}

/// Total initial energy of the population per the heterogeneity parameters:
/// `n * e0 * (1 + alpha*m)` for two-tier networks, with an extra
/// `esep_beta*esep_x` term when the intermediate tier is built.
pub fn total_initial_energy(config: &ScenarioConfig) -> f64 {
    let mut factor = 1.0 + config.alpha * config.m;
    if config.is_three_tier() {
        factor += config.esep_beta * config.esep_x;
    }
    f64::from(config.n) * config.e0 * factor
}
