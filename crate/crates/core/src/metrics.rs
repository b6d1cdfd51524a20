//! Lifetime summaries, comparison statistics over seeded replications, and
//! the CSV serialization of round series.

use crate::engine::{run_simulation, RoundMetrics, SimulationSummary};
use crate::model::{ConfigError, Protocol, ScenarioConfig};
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Exact header of the per-run series CSV.
pub const SERIES_CSV_HEADER: &str =
    "round,alive,dead,ch_count,packets_round,packets_cum,energy_residual_j";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("protocol {protocol}, replication {replication}: {source}")]
    Run {
        protocol: Protocol,
        replication: u32,
        #[source]
        source: ConfigError,
    },
}

/// First-crossing lifetime metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifetimeSummary {
    /// First round with at least one dead node.
    pub fnd: Option<u32>,
    /// First round with at least half the population dead.
    pub hnd: Option<u32>,
    /// First round with the whole population dead.
    pub lnd: Option<u32>,
    pub total_packets: u64,
}

/// Extracts the lifetime metrics from a round series. Each crossing is absent
/// if the series ends before it happens; appending rounds past the last death
/// never changes the result.
pub fn summarize(series: &[RoundMetrics]) -> LifetimeSummary {
    let mut fnd = None;
    let mut hnd = None;
    let mut lnd = None;
    let mut total_packets = 0;
    if let Some(first) = series.first() {
        let n = first.alive + first.dead;
        let half = n.div_ceil(2);
        for m in series {
            if fnd.is_none() && m.dead >= 1 {
                fnd = Some(m.round);
            }
            if hnd.is_none() && m.dead >= half {
                hnd = Some(m.round);
            }
            if lnd.is_none() && m.dead >= n {
                lnd = Some(m.round);
            }
        }
        total_packets = series.last().unwrap().packets_to_bs_cum;
    }
    LifetimeSummary {
        fnd,
        hnd,
        lnd,
        total_packets,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a round series as CSV: the fixed header, then one row per round
/// with residual energy printed to 9 decimal places. Output bytes are a pure
/// function of the series.
pub fn write_series_csv(series: &[RoundMetrics], path: &Path) -> Result<(), MetricsError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "{SERIES_CSV_HEADER}")?;
        for m in series {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.9}",
                m.round,
                m.alive,
                m.dead,
                m.ch_count,
                m.packets_to_bs,
                m.packets_to_bs_cum,
                m.residual_energy_total
            )?;
        }
        out.flush()
    })()
    .map_err(io_err(path))
}

/// Reads a series CSV produced by [`write_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<Vec<RoundMetrics>, MetricsError> {
    let parse_err = |line: usize, message: String| MetricsError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header == SERIES_CSV_HEADER => {}
        Some((_, Ok(header))) => {
            return Err(parse_err(1, format!("unexpected header '{header}'")));
        }
        Some((_, Err(source))) => return Err(io_err(path)(source)),
        None => return Err(parse_err(1, "missing header".into())),
    }
    let mut series = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(idx + 1, format!("expected 7 fields, got {}", fields.len())));
        }
        let field = |i: usize| -> Result<&str, MetricsError> { Ok(fields[i]) };
        let parse_int = |i: usize| -> Result<u64, MetricsError> {
            field(i)?
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("field {i}: {e}")))
        };
        series.push(RoundMetrics {
            round: parse_int(0)? as u32,
            alive: parse_int(1)? as u32,
            dead: parse_int(2)? as u32,
            ch_count: parse_int(3)? as u32,
            packets_to_bs: parse_int(4)?,
            packets_to_bs_cum: parse_int(5)?,
            residual_energy_total: fields[6]
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("field 6: {e}")))?,
        });
    }
    Ok(series)
}

/// Mean and population standard deviation of a lifetime metric across
/// replications, together with how many replications actually reached it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    /// Replications in which the metric was defined.
    pub defined: u32,
}

impl MetricStats {
    fn from_values(values: impl Iterator<Item = Option<u64>>) -> Self {
        // Integer accumulation keeps the aggregate exactly permutation
        // invariant in replication order.
        let mut count = 0u64;
        let mut sum = 0u128;
        let mut sum_sq = 0u128;
        for v in values.flatten() {
            count += 1;
            sum += u128::from(v);
            sum_sq += u128::from(v) * u128::from(v);
        }
        if count == 0 {
            return MetricStats {
                mean: f64::NAN,
                std: f64::NAN,
                defined: 0,
            };
        }
        let mean = sum as f64 / count as f64;
        let var = (sum_sq as f64 / count as f64 - mean * mean).max(0.0);
        MetricStats {
            mean,
            std: var.sqrt(),
            defined: count as u32,
        }
    }
}

/// Aggregated lifetime statistics for one protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub fnd: MetricStats,
    pub hnd: MetricStats,
    pub lnd: MetricStats,
    pub packets: MetricStats,
}

/// One point of a per-round mean curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCurvePoint {
    pub round: u32,
    pub alive_mean: f64,
    pub dead_mean: f64,
    pub packets_cum_mean: f64,
}

/// Everything compare produced for one protocol.
#[derive(Debug, Clone)]
pub struct ProtocolComparison {
    pub protocol: Protocol,
    /// One run per replication, in replication order (seed = base + k).
    pub runs: Vec<SimulationSummary>,
    pub stats: AggregateStats,
    /// Per-round means of alive/dead/cumulative packets, padded with each
    /// run's terminal state past its end.
    pub mean_curve: Vec<MeanCurvePoint>,
}

/// How often one protocol's stability beat another's across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderingTally {
    pub a: Protocol,
    pub b: Protocol,
    /// Replications with FND(a) > FND(b).
    pub a_wins: u32,
    /// Replications with FND(b) > FND(a).
    pub b_wins: u32,
    pub ties: u32,
}

/// Cross-protocol comparison over paired seeded replications.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub replications: u32,
    pub protocols: Vec<ProtocolComparison>,
    pub fnd_tallies: Vec<OrderingTally>,
}

impl ComparisonReport {
    pub fn protocol(&self, protocol: Protocol) -> Option<&ProtocolComparison> {
        self.protocols.iter().find(|p| p.protocol == protocol)
    }

    /// Summary file content: one line per protocol with the fixed keys.
    pub fn summary_text(&self) -> String {
        let mut text = String::new();
        for p in &self.protocols {
            text.push_str(&format_summary_line(p.protocol, &p.stats));
            text.push('\n');
        }
        text
    }

    /// Human-readable pairwise FND tally lines.
    pub fn tally_lines(&self) -> Vec<String> {
        self.fnd_tallies
            .iter()
            .map(|t| {
                format!(
                    "fnd {a} vs {b}: {a} wins {aw}/{r}, {b} wins {bw}/{r}, ties {ties}",
                    a = t.a,
                    b = t.b,
                    aw = t.a_wins,
                    bw = t.b_wins,
                    ties = t.ties,
                    r = self.replications
                )
            })
            .collect()
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.3}")
    }
}

fn format_summary_line(protocol: Protocol, stats: &AggregateStats) -> String {
    format!(
        "protocol={protocol} fnd_mean={} fnd_std={} hnd_mean={} hnd_std={} \
         lnd_mean={} lnd_std={} packets_mean={} packets_std={}",
        fmt_stat(stats.fnd.mean),
        fmt_stat(stats.fnd.std),
        fmt_stat(stats.hnd.mean),
        fmt_stat(stats.hnd.std),
        fmt_stat(stats.lnd.mean),
        fmt_stat(stats.lnd.std),
        fmt_stat(stats.packets.mean),
        fmt_stat(stats.packets.std),
    )
}

fn aggregate(runs: &[SimulationSummary]) -> AggregateStats {
    AggregateStats {
        fnd: MetricStats::from_values(runs.iter().map(|r| r.fnd.map(u64::from))),
        hnd: MetricStats::from_values(runs.iter().map(|r| r.hnd.map(u64::from))),
        lnd: MetricStats::from_values(runs.iter().map(|r| r.lnd.map(u64::from))),
        packets: MetricStats::from_values(runs.iter().map(|r| Some(r.total_packets))),
    }
}

fn mean_curve(runs: &[SimulationSummary], population: u32) -> Vec<MeanCurvePoint> {
    let len = runs.iter().map(|r| r.series.len()).max().unwrap_or(0);
    let mut curve = Vec::with_capacity(len);
    for i in 0..len {
        let mut alive_sum = 0u64;
        let mut dead_sum = 0u64;
        let mut packets_sum = 0u128;
        for run in runs {
            // Past its end a run holds its terminal state; an empty series
            // means the initial state (everyone alive, nothing sent).
            let row = run.series.get(i).or(run.series.last());
            match row {
                Some(m) => {
                    alive_sum += u64::from(m.alive);
                    dead_sum += u64::from(m.dead);
                    packets_sum += u128::from(m.packets_to_bs_cum);
                }
                None => alive_sum += u64::from(population),
            }
        }
        let r = runs.len() as f64;
        curve.push(MeanCurvePoint {
            round: (i + 1) as u32,
            alive_mean: alive_sum as f64 / r,
            dead_mean: dead_sum as f64 / r,
            packets_cum_mean: packets_sum as f64 / r,
        });
    }
    curve
}

/// Writes a protocol's mean curve as CSV.
pub fn write_mean_curve_csv(curve: &[MeanCurvePoint], path: &Path) -> Result<(), MetricsError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "round,alive_mean,dead_mean,packets_cum_mean")?;
        for p in curve {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                p.round, p.alive_mean, p.dead_mean, p.packets_cum_mean
            )?;
        }
        out.flush()
    })()
    .map_err(io_err(path))
}

/// Runs `replications` seeded replications of every protocol and aggregates
/// them. Replication `k` of every protocol uses seed `base.seed + k`, so the
/// protocols see identical node placements and paired randomness.
pub fn compare(
    base: &ScenarioConfig,
    protocols: &[Protocol],
    replications: u32,
) -> Result<ComparisonReport, CompareError> {
    assert!(replications >= 1, "compare requires at least one replication");
    let jobs: Vec<(usize, u32)> = (0..protocols.len())
        .flat_map(|pi| (0..replications).map(move |k| (pi, k)))
        .collect();
    let results: Result<Vec<SimulationSummary>, CompareError> = jobs
        .par_iter()
        .map(|&(pi, k)| {
            let config = ScenarioConfig {
                protocol: protocols[pi],
                seed: base.seed.wrapping_add(u64::from(k)),
                ..base.clone()
            };
            run_simulation(&config).map_err(|source| CompareError::Run {
                protocol: protocols[pi],
                replication: k,
                source,
            })
        })
        .collect();
    let mut results = results?;

    let mut report = ComparisonReport {
        replications,
        protocols: Vec::with_capacity(protocols.len()),
        fnd_tallies: Vec::new(),
    };
    for (pi, &protocol) in protocols.iter().enumerate() {
        let runs: Vec<SimulationSummary> = results
            .drain(..replications as usize)
            .collect();
        debug_assert_eq!(runs.len(), replications as usize);
        let stats = aggregate(&runs);
        let curve = mean_curve(&runs, base.n);
        let _ = pi;
        report.protocols.push(ProtocolComparison {
            protocol,
            runs,
            stats,
            mean_curve: curve,
        });
    }

    // Pairwise stability tallies; a run that never lost a node ranks above
    // any death round.
    let effective = |s: &SimulationSummary| u64::from(s.fnd.unwrap_or(base.max_rounds + 1));
    for i in 0..report.protocols.len() {
        for j in (i + 1)..report.protocols.len() {
            let (a, b) = (&report.protocols[i], &report.protocols[j]);
            let mut tally = OrderingTally {
                a: a.protocol,
                b: b.protocol,
                a_wins: 0,
                b_wins: 0,
                ties: 0,
            };
            for k in 0..replications as usize {
                let (fa, fb) = (effective(&a.runs[k]), effective(&b.runs[k]));
                if fa > fb {
                    tally.a_wins += 1;
                } else if fb > fa {
                    tally.b_wins += 1;
                } else {
                    tally.ties += 1;
                }
            }
            report.fnd_tallies.push(tally);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use tempfile::TempDir;

    fn row(round: u32, alive: u32, dead: u32, packets: u64, cum: u64, energy: f64) -> RoundMetrics {
        RoundMetrics {
            round,
            alive,
            dead,
            ch_count: 1,
            packets_to_bs: packets,
            packets_to_bs_cum: cum,
            residual_energy_total: energy,
        }
    }

    // ------------------------------------------------------------------
    // summarize
    // ------------------------------------------------------------------

    #[test]
    fn no_deaths_leaves_crossings_absent() {
        let series = vec![row(1, 10, 0, 2, 2, 4.0), row(2, 10, 0, 2, 4, 3.9)];
        let s = summarize(&series);
        assert_eq!((s.fnd, s.hnd, s.lnd), (None, None, None));
        assert_eq!(s.total_packets, 4);
    }

    #[test]
    fn first_crossings_are_one_indexed() {
        let deads = [0u32, 0, 1, 3, 5, 10];
        let series: Vec<RoundMetrics> = deads
            .iter()
            .enumerate()
            .map(|(i, &d)| row(i as u32 + 1, 10 - d, d, 1, i as u64 + 1, 1.0))
            .collect();
        let s = summarize(&series);
        assert_eq!(s.fnd, Some(3));
        assert_eq!(s.hnd, Some(5)); // needs ceil(10/2) = 5 dead
        assert_eq!(s.lnd, Some(6));
    }

    #[test]
    fn half_crossing_uses_ceiling() {
        let series: Vec<RoundMetrics> = (1..=5)
            .map(|r| row(r, 9 - r.min(5), r.min(5), 0, 0, 1.0))
            .collect();
        // n = 9, so hnd needs dead >= 5.
        assert_eq!(summarize(&series).hnd, Some(5));
    }

    #[test]
    fn summarize_ignores_rows_after_last_death() {
        let mut series = vec![row(1, 1, 9, 1, 1, 0.5), row(2, 0, 10, 0, 1, 0.0)];
        let base = summarize(&series);
        series.push(row(3, 0, 10, 0, 1, 0.0));
        series.push(row(4, 0, 10, 0, 1, 0.0));
        assert_eq!(summarize(&series), base);
    }

    #[test]
    fn empty_series_is_all_absent() {
        let s = summarize(&[]);
        assert_eq!((s.fnd, s.hnd, s.lnd, s.total_packets), (None, None, None, 0));
    }

    // ------------------------------------------------------------------
    // CSV
    // ------------------------------------------------------------------

    #[test]
    fn empty_series_writes_header_only() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("empty.csv");
        write_series_csv(&[], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content, format!("{SERIES_CSV_HEADER}\n"));
    }

    #[test]
    fn one_round_series_writes_two_lines() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("one.csv");
        write_series_csv(&[row(1, 99, 1, 10, 10, 49.123456789)], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 2);
        assert!(content.ends_with('\n'));
        assert!(content.contains("1,99,1,1,10,10,49.123456789"));
    }

    #[test]
    fn csv_round_trips_at_stated_precision() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("rt.csv");
        let series = vec![
            row(1, 100, 0, 11, 11, 54.999999871),
            row(2, 99, 1, 9, 20, 54.97251),
            row(3, 0, 100, 0, 20, 0.0),
        ];
        write_series_csv(&series, &path).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(back.len(), series.len());
        for (a, b) in series.iter().zip(&back) {
            assert_eq!(
                (a.round, a.alive, a.dead, a.ch_count, a.packets_to_bs, a.packets_to_bs_cum),
                (b.round, b.alive, b.dead, b.ch_count, b.packets_to_bs, b.packets_to_bs_cum)
            );
            assert_abs_diff_eq!(
                a.residual_energy_total,
                b.residual_energy_total,
                epsilon = 5e-10
            );
        }
    }

    #[test]
    fn csv_bytes_are_deterministic() {
        let dir = TempDir::new().unwrap();
        let series = vec![row(1, 10, 0, 2, 2, 4.567)];
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_series_csv(&series, &pa).unwrap();
        write_series_csv(&series, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = write_series_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn reader_rejects_foreign_headers() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        let err = read_series_csv(&path).unwrap_err();
        assert!(err.to_string().contains("unexpected header"));
    }

    // ------------------------------------------------------------------
    // Aggregation
    // ------------------------------------------------------------------

    #[test]
    fn metric_stats_handle_missing_values() {
        let stats = MetricStats::from_values([Some(10u64), None, Some(20)].into_iter());
        assert_eq!(stats.defined, 2);
        assert_abs_diff_eq!(stats.mean, 15.0);
        assert_abs_diff_eq!(stats.std, 5.0);
        let none = MetricStats::from_values([None, None].into_iter());
        assert_eq!(none.defined, 0);
        assert!(none.mean.is_nan());
    }

    #[test]
    fn metric_stats_are_permutation_invariant() {
        let forward = MetricStats::from_values([Some(3u64), Some(1), Some(400), None].into_iter());
        let backward = MetricStats::from_values([None, Some(400), Some(1), Some(3)].into_iter());
        assert_eq!(forward, backward);
    }

    #[test]
    fn single_replication_has_zero_spread() {
        let cfg = ScenarioConfig {
            n: 20,
            max_rounds: 400,
            e0: 0.02,
            ..ScenarioConfig::default()
        };
        let report = compare(&cfg, &[Protocol::Leach, Protocol::Sep], 1).unwrap();
        for p in &report.protocols {
            assert_eq!(p.stats.packets.std, 0.0);
            if p.stats.fnd.defined > 0 {
                assert_eq!(p.stats.fnd.std, 0.0);
            }
        }
    }

    #[test]
    fn duplicate_protocol_rows_are_identical() {
        let cfg = ScenarioConfig {
            n: 20,
            max_rounds: 300,
            e0: 0.02,
            ..ScenarioConfig::default()
        };
        let report = compare(&cfg, &[Protocol::Deec, Protocol::Deec], 3).unwrap();
        assert_eq!(report.protocols[0].stats, report.protocols[1].stats);
        assert_eq!(report.protocols[0].mean_curve, report.protocols[1].mean_curve);
        // Paired seeds: every replication ties against itself.
        let tally = &report.fnd_tallies[0];
        assert_eq!((tally.a_wins, tally.b_wins, tally.ties), (0, 0, 3));
    }

    #[test]
    fn summary_text_lists_the_fixed_keys() {
        let cfg = ScenarioConfig {
            n: 20,
            max_rounds: 200,
            e0: 0.02,
            ..ScenarioConfig::default()
        };
        let report = compare(&cfg, &[Protocol::Leach], 2).unwrap();
        let text = report.summary_text();
        for key in [
            "protocol=", "fnd_mean=", "fnd_std=", "hnd_mean=", "hnd_std=", "lnd_mean=",
            "lnd_std=", "packets_mean=", "packets_std=",
        ] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
    }

    #[test]
    fn mean_curve_pads_with_terminal_state() {
        let cfg = ScenarioConfig {
            n: 10,
            p_opt: 0.2,
            max_rounds: 500,
            e0: 0.01,
            ..ScenarioConfig::default()
        };
        let report = compare(&cfg, &[Protocol::Leach], 4).unwrap();
        let p = &report.protocols[0];
        let max_len = p.runs.iter().map(|r| r.series.len()).max().unwrap();
        assert_eq!(p.mean_curve.len(), max_len);
        if let Some(last) = p.mean_curve.last() {
            assert_abs_diff_eq!(last.alive_mean, 0.0);
            assert_abs_diff_eq!(last.dead_mean, 10.0);
        }
    }
}
