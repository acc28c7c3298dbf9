//! Monte-Carlo experiment harness: seeded BER sweeps, metric reports and
//! capacity-region exports.
//!
//! A run is split into independent streams, each owning its own pipeline
//! state and derived seed. Streams advance in lockstep rounds of one block;
//! the adaptive stop ("enough bit errors") is evaluated at round boundaries,
//! so results are identical for any `--threads` value.

use crate::broadcast::{bc_roundtrip, BcConfig, BcSystem};
use crate::channel::{
    awgn_capacity_snr_for_rate, bc_capacity_region, granular_gain_and_shaping_loss, DitherMode,
    GaussianChannel, InterferenceSource,
};
use crate::conv::{ConvCode, CosetSpec, InverseSyndromeFormer};
use crate::error::{Error, Result};
use crate::gf2::BitVector;
use crate::ldpc::{BpVariant, DegreeDistribution};
use crate::modulation::PamMapping;
use crate::pipeline::{
    decode_block, encode_block, DecoderState, DpcSystem, DpcSystemParams, EncoderState,
    SystemOptions,
};
use crate::real::Real;
use crate::shaping::shape_to_target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Awgn,
    Dpc,
    Broadcast,
}

fn default_streams() -> usize {
    1
}

fn default_min_errors() -> u64 {
    100
}

fn default_bp_max_iter() -> usize {
    50
}

fn default_calibration_samples() -> usize {
    100_000
}

/// One experiment: a human-readable key-value (TOML) file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub m_pam: usize,
    /// SNR grid in dB (`P_X / P_N`). Ignored in broadcast mode.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Total transmitted blocks per point, across all streams.
    pub blocks: usize,
    #[serde(default = "default_streams")]
    pub streams: usize,
    pub seed: u64,
    /// Nominal transmit power; omitted = calibrate from a shaping-only run.
    #[serde(default)]
    pub p_x: Option<f64>,
    /// Interference power as a multiple of `P_X` (DPC mode).
    #[serde(default)]
    pub interference_factor: Option<f64>,
    /// Absolute interference power; overrides the factor.
    #[serde(default)]
    pub interference_power: Option<f64>,
    /// Whitespace-separated f64 interference samples; requires `streams = 1`.
    #[serde(default)]
    pub interference_file: Option<String>,
    #[serde(default)]
    pub dither: bool,
    /// Adaptive stop: a point may end early once it has seen this many bit
    /// errors (at a stream-round boundary).
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_bp_max_iter")]
    pub bp_max_iter: usize,
    #[serde(default)]
    pub bp_variant: BpVariant,
    /// Shaping generators, binary MSB-first or `0o` octal strings.
    #[serde(default)]
    pub generators: Option<[String; 2]>,
    /// Variable node degree distribution as `[[degree, fraction], ..]`.
    #[serde(default)]
    pub var_degrees: Option<Vec<(usize, f64)>>,
    /// Regular check-node degree.
    #[serde(default)]
    pub chk_degree: Option<usize>,
    #[serde(default = "default_calibration_samples")]
    pub calibration_samples: usize,
    // Broadcast-only fields.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub total_power: Option<f64>,
    #[serde(default)]
    pub p_n1: Option<f64>,
    #[serde(default)]
    pub p_n2: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Validate everything a run needs, before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        // Block structure invariants come from the params constructor.
        DpcSystemParams::<f64>::new(self.n, self.k, self.k_prime, self.m_pam, 16.0, 0.0, 1.0)?;
        if self.streams == 0 {
            return Err(Error::InvalidParameter("streams must be positive".into()));
        }
        if self.blocks % self.streams != 0 || self.blocks / self.streams < 2 {
            return Err(Error::InvalidParameter(format!(
                "blocks = {} must be a multiple of streams = {} with at least 2 per stream",
                self.blocks, self.streams
            )));
        }
        if self.interference_file.is_some() && self.streams != 1 {
            return Err(Error::InvalidParameter(
                "file-backed interference requires streams = 1".into(),
            ));
        }
        if let Some(gens) = &self.generators {
            ConvCode::new(
                ConvCode::parse_generator(&gens[0])?,
                ConvCode::parse_generator(&gens[1])?,
            )?;
        }
        if let Some(v) = &self.var_degrees {
            DegreeDistribution::new(v)?;
        }
        match self.mode {
            Mode::Broadcast => {
                let (Some(beta), Some(p), Some(p_n1), Some(p_n2)) =
                    (self.beta, self.total_power, self.p_n1, self.p_n2)
                else {
                    return Err(Error::InvalidParameter(
                        "broadcast mode needs beta, total_power, p_n1, p_n2".into(),
                    ));
                };
                BcConfig::<f64> {
                    n: self.n,
                    k: self.k,
                    k_prime: self.k_prime,
                    m_pam: self.m_pam,
                    total_power: p,
                    beta,
                    p_n1,
                    p_n2,
                }
                .validate()?;
            }
            Mode::Awgn | Mode::Dpc => {
                if self.snr_db.is_empty() {
                    return Err(Error::InvalidParameter(
                        "snr_db grid must not be empty".into(),
                    ));
                }
                if self.snr_db.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("snr_db"));
                }
            }
        }
        Ok(())
    }

    pub fn system_options(&self) -> Result<SystemOptions> {
        let mut opts = SystemOptions {
            dither: if self.dither {
                DitherMode::Uniform
            } else {
                DitherMode::Off
            },
            bp_variant: self.bp_variant,
            bp_max_iter: self.bp_max_iter,
            ..SystemOptions::default()
        };
        if let Some(gens) = &self.generators {
            opts.generators = (
                ConvCode::parse_generator(&gens[0])?,
                ConvCode::parse_generator(&gens[1])?,
            );
        }
        if let Some(v) = &self.var_degrees {
            opts.var_dist = DegreeDistribution::new(v)?;
        }
        if let Some(d) = self.chk_degree {
            opts.chk_dist = DegreeDistribution::regular(d)?;
        }
        Ok(opts)
    }

    fn interference_power(&self, p_x: f64) -> f64 {
        match self.mode {
            Mode::Awgn => 0.0,
            _ => self
                .interference_power
                .unwrap_or_else(|| self.interference_factor.unwrap_or(1.0) * p_x),
        }
    }
}

/// One BER sweep point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub block_errors: u64,
    pub seconds: f64,
}

impl BerRecord {
    pub const CSV_HEADER: &'static str = "snr_db,bits,errors,ber,block_errors,seconds";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6e},{},{:.3}",
            self.snr_db, self.bits, self.errors, self.ber, self.block_errors, self.seconds
        )
    }
}

/// Per-point bookkeeping the metrics report needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointMeta {
    pub snr_db: f64,
    pub p_n: f64,
    /// Mean square of the transmitted symbols over the whole point.
    pub measured_sx: f64,
    /// `10 log10(measured_sx / p_n)`.
    pub measured_snr_db: f64,
    pub blocks: u64,
    pub bits: u64,
    pub errors: u64,
    /// Fewer bit errors than the adaptive-stop target.
    pub low_confidence: bool,
}

/// Run artifacts beyond the CSV rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub m_pam: usize,
    pub seed: u64,
    pub p_x_nominal: f64,
    pub rate_bits_per_symbol: f64,
    pub c_star: f64,
    pub min_errors: u64,
    pub points: Vec<PointMeta>,
    /// Broadcast runs only.
    #[serde(default)]
    pub broadcast: Option<BcMeta>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BcMeta {
    pub beta: f64,
    pub total_power: f64,
    pub p_n1: f64,
    pub p_n2: f64,
    pub measured_p_x1: f64,
    pub measured_p_x2: f64,
    pub measured_p_total: f64,
    pub snr1_db: f64,
    pub snr2_db: f64,
    pub rate_pair: (f64, f64),
}

impl RunMeta {
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("run metadata: {e}")))
    }
}

pub struct RunArtifacts {
    pub records: Vec<BerRecord>,
    pub meta: RunMeta,
}

/// Measure the unit shaped power of the configured shaping code directly
/// (no LDPC involved: lower bit planes are data-uniform either way).
///
/// `zero_target` selects the no-interference case (symbols stay on the
/// alphabet); otherwise targets are uniform over the modulo cell, the
/// steady state any strong interference produces.
pub fn calibrate_unit_power(
    generators: (u32, u32),
    s: usize,
    m_pam: usize,
    zero_target: bool,
    min_samples: usize,
    seed: u64,
) -> Result<f64> {
    let code = ConvCode::new(generators.0, generators.1)?;
    let isf = InverseSyndromeFormer::new(&code, s)?;
    let mapping: PamMapping<f64> = PamMapping::new(m_pam)?;
    let l = mapping.bits_per_symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca1b);
    let blocks = min_samples.div_ceil(s).max(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for _ in 0..blocks {
        let m_prime = BitVector::random(s / 2, &mut rng);
        let planes: Vec<BitVector> = (0..l - 1).map(|_| BitVector::random(s, &mut rng)).collect();
        let target: Vec<f64> = (0..s)
            .map(|_| {
                if zero_target {
                    0.0
                } else {
                    (rng.random::<f64>() - 0.5) * m_pam as f64
                }
            })
            .collect();
        let coset = CosetSpec::from_syndrome(&code, &isf, &m_prime)?;
        let z = shape_to_target(&coset, &planes, &target, &mapping)?;
        let v = mapping.map_symbols(&z, &planes)?;
        for i in 0..s {
            let x = crate::modulation::mod_fold(v[i] - target[i], m_pam)?;
            acc += x * x;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

enum StreamInterference {
    Gaussian(InterferenceSource<f64>),
    File(Vec<f64>, usize),
}

impl StreamInterference {
    fn next_block(&mut self, len: usize) -> Result<Vec<f64>> {
        match self {
            StreamInterference::Gaussian(src) => Ok(src.next_block(len)),
            StreamInterference::File(vals, pos) => {
                if *pos + len > vals.len() {
                    return Err(Error::InvalidParameter(format!(
                        "interference file exhausted at sample {pos} (need {len} more)"
                    )));
                }
                let out = vals[*pos..*pos + len].to_vec();
                *pos += len;
                Ok(out)
            }
        }
    }
}

struct Stream {
    enc: EncoderState,
    dec: DecoderState<f64>,
    msg_rng: ChaCha8Rng,
    interference: StreamInterference,
    channel: GaussianChannel<f64>,
    last_msg: Option<BitVector>,
    errors: u64,
    bits: u64,
    block_errors: u64,
    power_acc: f64,
    power_samples: u64,
    blocks_tx: u64,
}

impl Stream {
    fn step(&mut self, sys: &DpcSystem<f64>) -> Result<()> {
        let s = sys.params.symbols_per_block();
        let msg = BitVector::random(sys.params.k, &mut self.msg_rng);
        let s_vec = self.interference.next_block(s)?;
        let block = encode_block(sys, &mut self.enc, &msg, &s_vec)?;
        for &x in &block.x {
            self.power_acc += x * x;
        }
        self.power_samples += s as u64;
        self.blocks_tx += 1;
        let y = self.channel.dirty_paper(&block.x, &s_vec)?;
        match decode_block(sys, &mut self.dec, &y) {
            Ok(out) => {
                let reference = self
                    .last_msg
                    .as_ref()
                    .expect("decoder produced output before any encoded block");
                let d = reference.distance(&out.msg) as u64;
                self.errors += d;
                self.bits += reference.len() as u64;
                if d > 0 {
                    self.block_errors += 1;
                }
            }
            Err(Error::NoOutputYet) => {}
            Err(e) => return Err(e),
        }
        self.last_msg = Some(msg);
        Ok(())
    }
}

fn derive_seed(master: u64, point: usize, stream: usize, tag: u64) -> u64 {
    let mut x = master
        ^ tag
        ^ (point as u64).wrapping_mul(0x9e3779b97f4a7c15)
        ^ (stream as u64).wrapping_mul(0xbf58476d1ce4e5b9);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Run a DPC/AWGN sweep, handing each finished point to `sink` (incremental
/// CSV flushing lives there).
pub fn run_experiment_with_sink(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
    no_timing: bool,
    sink: &mut dyn FnMut(&BerRecord) -> Result<()>,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    if cfg.mode == Mode::Broadcast {
        return run_broadcast_experiment(cfg, no_timing, sink);
    }
    let pool = build_pool(threads)?;

    let opts = cfg.system_options()?;
    let s = cfg.n / (cfg.m_pam.trailing_zeros() as usize);
    let p_x = match cfg.p_x {
        Some(px) => px,
        None => calibrate_unit_power(
            opts.generators,
            s,
            cfg.m_pam,
            cfg.mode == Mode::Awgn,
            cfg.calibration_samples,
            cfg.seed,
        )?,
    };
    let p_s = cfg.interference_power(p_x);

    // Build the full system once at the first SNR point, then swap the
    // noise power per point.
    let first_p_n = p_x / 10f64.powf(cfg.snr_db[0] / 10.0);
    let params = DpcSystemParams::new(cfg.n, cfg.k, cfg.k_prime, cfg.m_pam, p_x, p_s, first_p_n)?;
    let base_sys = DpcSystem::build(params, cfg.seed, opts)?;

    let file_samples: Option<Vec<f64>> = match &cfg.interference_file {
        Some(path) => Some(read_interference_file(path)?),
        None => None,
    };

    let mut records = Vec::new();
    let mut points = Vec::new();
    for (pi, &snr_db) in cfg.snr_db.iter().enumerate() {
        let t0 = Instant::now();
        let p_n = p_x / 10f64.powf(snr_db / 10.0);
        let sys = base_sys.with_noise_power(p_n);
        let mut streams: Vec<Stream> = (0..cfg.streams)
            .map(|si| {
                let interference = match &file_samples {
                    Some(vals) => StreamInterference::File(vals.clone(), 0),
                    None => StreamInterference::Gaussian(
                        InterferenceSource::new(p_s, derive_seed(cfg.seed, pi, si, 0x51))
                            .expect("validated power"),
                    ),
                };
                Stream {
                    enc: EncoderState::new(&sys),
                    dec: DecoderState::new(),
                    msg_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, pi, si, 0x33)),
                    interference,
                    channel: GaussianChannel::new(p_n, derive_seed(cfg.seed, pi, si, 0x77))
                        .expect("validated power"),
                    last_msg: None,
                    errors: 0,
                    bits: 0,
                    block_errors: 0,
                    power_acc: 0.0,
                    power_samples: 0,
                    blocks_tx: 0,
                }
            })
            .collect();

        let rounds = cfg.blocks / cfg.streams;
        let mut failure: Option<Error> = None;
        for _round in 0..rounds {
            pool.install(|| {
                streams
                    .par_iter_mut()
                    .map(|st| st.step(&sys))
                    .collect::<Vec<Result<()>>>()
            })
            .into_iter()
            .for_each(|r| {
                if let Err(e) = r {
                    failure.get_or_insert(e);
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            let errors: u64 = streams.iter().map(|st| st.errors).sum();
            if errors >= cfg.min_errors {
                break;
            }
        }

        let bits: u64 = streams.iter().map(|st| st.bits).sum();
        let errors: u64 = streams.iter().map(|st| st.errors).sum();
        let block_errors: u64 = streams.iter().map(|st| st.block_errors).sum();
        let blocks_tx: u64 = streams.iter().map(|st| st.blocks_tx).sum();
        let power_acc: f64 = streams.iter().map(|st| st.power_acc).sum();
        let power_samples: u64 = streams.iter().map(|st| st.power_samples).sum();
        let measured_sx = power_acc / power_samples.max(1) as f64;
        let seconds = if no_timing {
            0.0
        } else {
            t0.elapsed().as_secs_f64()
        };
        let rec = BerRecord {
            snr_db,
            bits,
            errors,
            ber: if bits > 0 { errors as f64 / bits as f64 } else { 0.0 },
            block_errors,
            seconds,
        };
        sink(&rec)?;
        records.push(rec);
        points.push(PointMeta {
            snr_db,
            p_n,
            measured_sx,
            measured_snr_db: 10.0 * (measured_sx / p_n).log10(),
            blocks: blocks_tx,
            bits,
            errors,
            low_confidence: errors < cfg.min_errors,
        });
    }

    Ok(RunArtifacts {
        records,
        meta: RunMeta {
            mode: cfg.mode,
            n: cfg.n,
            k: cfg.k,
            k_prime: cfg.k_prime,
            m_pam: cfg.m_pam,
            seed: cfg.seed,
            p_x_nominal: p_x,
            rate_bits_per_symbol: cfg.k as f64 / s as f64,
            c_star: (cfg.m_pam.trailing_zeros() as usize - 1) as f64
                + cfg.k_prime as f64 / s as f64,
            min_errors: cfg.min_errors,
            points,
            broadcast: None,
        },
    })
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn read_interference_file(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::Parse(format!("interference sample {tok:?}: {e}")))
        })
        .collect()
}

/// Broadcast run: one operating point, one CSV row per user (snr_db column
/// holds the per-user effective SNR).
fn run_broadcast_experiment(
    cfg: &ExperimentConfig,
    no_timing: bool,
    sink: &mut dyn FnMut(&BerRecord) -> Result<()>,
) -> Result<RunArtifacts> {
    let t0 = Instant::now();
    let bc_cfg = BcConfig::<f64> {
        n: cfg.n,
        k: cfg.k,
        k_prime: cfg.k_prime,
        m_pam: cfg.m_pam,
        total_power: cfg.total_power.unwrap(),
        beta: cfg.beta.unwrap(),
        p_n1: cfg.p_n1.unwrap(),
        p_n2: cfg.p_n2.unwrap(),
    };
    let s = cfg.n / (cfg.m_pam.trailing_zeros() as usize);
    let cal_blocks = (cfg.calibration_samples.div_ceil(s)).max(2);
    let sys = BcSystem::build(bc_cfg.clone(), cfg.seed, cfg.system_options()?, cal_blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, 0, 0xbc));
    let msgs1: Vec<BitVector> = (0..cfg.blocks)
        .map(|_| BitVector::random(cfg.k, &mut rng))
        .collect();
    let msgs2: Vec<BitVector> = (0..cfg.blocks)
        .map(|_| BitVector::random(cfg.k, &mut rng))
        .collect();
    let out = bc_roundtrip(&sys, &msgs1, &msgs2, derive_seed(cfg.seed, 0, 1, 0xbc))?;
    let seconds = if no_timing {
        0.0
    } else {
        t0.elapsed().as_secs_f64()
    };
    let (p1, p2, pt) = out.measured_powers;
    let mut records = Vec::new();
    for (snr, errors) in [
        (bc_cfg.snr1_db(), out.bit_errors_user1),
        (bc_cfg.snr2_db(), out.bit_errors_user2),
    ] {
        let rec = BerRecord {
            snr_db: snr,
            bits: out.bits_per_user,
            errors,
            ber: if out.bits_per_user > 0 {
                errors as f64 / out.bits_per_user as f64
            } else {
                0.0
            },
            block_errors: 0,
            seconds,
        };
        sink(&rec)?;
        records.push(rec);
    }
    let rate = cfg.k as f64 / s as f64;
    Ok(RunArtifacts {
        meta: RunMeta {
            mode: cfg.mode,
            n: cfg.n,
            k: cfg.k,
            k_prime: cfg.k_prime,
            m_pam: cfg.m_pam,
            seed: cfg.seed,
            p_x_nominal: bc_cfg.total_power,
            rate_bits_per_symbol: rate,
            c_star: (cfg.m_pam.trailing_zeros() as usize - 1) as f64
                + cfg.k_prime as f64 / s as f64,
            min_errors: cfg.min_errors,
            points: records
                .iter()
                .map(|r| PointMeta {
                    snr_db: r.snr_db,
                    p_n: 0.0,
                    measured_sx: pt,
                    measured_snr_db: r.snr_db,
                    blocks: cfg.blocks as u64,
                    bits: r.bits,
                    errors: r.errors,
                    low_confidence: r.errors < cfg.min_errors,
                })
                .collect(),
            broadcast: Some(BcMeta {
                beta: bc_cfg.beta,
                total_power: bc_cfg.total_power,
                p_n1: bc_cfg.p_n1,
                p_n2: bc_cfg.p_n2,
                measured_p_x1: p1,
                measured_p_x2: p2,
                measured_p_total: pt,
                snr1_db: bc_cfg.snr1_db(),
                snr2_db: bc_cfg.snr2_db(),
                rate_pair: (rate, rate),
            }),
        },
        records,
    })
}

/// Run and write `out.csv` (incrementally flushed) plus `out.meta.toml`.
pub fn run_experiment_to_files(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: Option<usize>,
    no_timing: bool,
) -> Result<RunArtifacts> {
    let csv_path = out.with_extension("csv");
    let mut csv = std::fs::File::create(&csv_path)?;
    writeln!(csv, "{}", BerRecord::CSV_HEADER)?;
    csv.flush()?;
    let artifacts = run_experiment_with_sink(cfg, threads, no_timing, &mut |rec| {
        writeln!(csv, "{}", rec.csv_line())?;
        csv.flush()?;
        Ok(())
    })?;
    let meta_path = out.with_extension("meta.toml");
    let meta_text = toml::to_string_pretty(&artifacts.meta)
        .map_err(|e| Error::Parse(format!("meta encode: {e}")))?;
    std::fs::write(meta_path, meta_text)?;
    Ok(artifacts)
}

/// In-memory run without artifacts on disk.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
    no_timing: bool,
) -> Result<RunArtifacts> {
    run_experiment_with_sink(cfg, threads, no_timing, &mut |_| Ok(()))
}

// ---------------------------------------------------------------------------
// Metrics report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MetricsRow {
    pub snr_db: f64,
    pub measured_sx: f64,
    pub granular_gain_db: f64,
    pub shaping_loss_db: f64,
    pub operating_snr_db: f64,
    pub capacity_snr_db: f64,
    pub total_gap_db: f64,
    pub shaping_gap_db: f64,
    pub coding_gap_db: f64,
    pub low_confidence: bool,
}

/// Post-process a run: measured power, granular gain, shaping loss, and the
/// gap-to-capacity split per point.
pub fn report_metrics(meta: &RunMeta) -> Vec<MetricsRow> {
    let capacity_snr_db = awgn_capacity_snr_for_rate(meta.rate_bits_per_symbol);
    meta.points
        .iter()
        .map(|pt| {
            let (gain_db, loss_db) = granular_gain_and_shaping_loss(meta.c_star, pt.measured_sx);
            let operating = pt.measured_snr_db;
            let gap = operating - capacity_snr_db;
            MetricsRow {
                snr_db: pt.snr_db,
                measured_sx: pt.measured_sx,
                granular_gain_db: gain_db,
                shaping_loss_db: loss_db,
                operating_snr_db: operating,
                capacity_snr_db,
                total_gap_db: gap,
                shaping_gap_db: loss_db,
                coding_gap_db: gap - loss_db,
                low_confidence: pt.low_confidence,
            }
        })
        .collect()
}

pub fn metrics_table(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "snr_db  S_x      gain_dB  loss_dB  op_snr_dB  cap_dB  gap_dB  shaping  coding  flag\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:<7.3} {:<8.4} {:<8.4} {:<8.4} {:<10.4} {:<7.3} {:<7.4} {:<8.4} {:<7.4} {}\n",
            r.snr_db,
            r.measured_sx,
            r.granular_gain_db,
            r.shaping_loss_db,
            r.operating_snr_db,
            r.capacity_snr_db,
            r.total_gap_db,
            r.shaping_gap_db,
            r.coding_gap_db,
            if r.low_confidence { "LOW-CONF" } else { "ok" }
        ));
    }
    out
}

/// BER monotonicity audit: flags any increase between consecutive points
/// that both carry at least 10 errors (statistical noise below that).
pub fn monotonicity_warnings(records: &[BerRecord]) -> Vec<String> {
    let mut warnings = Vec::new();
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.snr_db > a.snr_db && a.errors >= 10 && b.errors >= 10 && b.ber > a.ber {
            warnings.push(format!(
                "BER rose from {:.3e} at {} dB to {:.3e} at {} dB",
                a.ber, a.snr_db, b.ber, b.snr_db
            ));
        }
    }
    warnings
}

/// Emit the broadcast capacity-region boundary as CSV (`beta,r1,r2`).
pub fn write_region_csv<W: Write>(
    p: f64,
    p_n1: f64,
    p_n2: f64,
    grid_points: usize,
    mut w: W,
) -> Result<()> {
    let grid: Vec<f64> = (0..=grid_points)
        .map(|i| i as f64 / grid_points as f64)
        .collect();
    let region = bc_capacity_region(p, p_n1, p_n2, &grid)?;
    writeln!(w, "beta,r1,r2")?;
    for pt in region {
        writeln!(w, "{},{},{}", pt.beta, pt.r1, pt.r2)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Self-test property suites
// ---------------------------------------------------------------------------

pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast property suites runnable from the CLI; each returns pass/fail plus
/// a one-line detail.
pub fn selftest() -> Vec<SelfTestResult> {
    let mut results = Vec::new();
    let mut push = |name: &'static str, outcome: std::result::Result<String, String>| {
        results.push(match outcome {
            Ok(detail) => SelfTestResult {
                name,
                passed: true,
                detail,
            },
            Err(detail) => SelfTestResult {
                name,
                passed: false,
                detail,
            },
        });
    };

    push("syndrome-roundtrip", selftest_syndrome_roundtrip());
    push("coset-membership", selftest_coset_membership());
    push("interleaver-roundtrip", selftest_interleaver());
    push("mod-fold", selftest_mod_fold());
    push("label-table", selftest_label_table());
    push("ldpc-encode", selftest_ldpc_encode());
    push("bp-validity", selftest_bp_validity());
    push("demapper-oracle", selftest_demapper_oracle());
    push("noiseless-roundtrip", selftest_noiseless_roundtrip());
    results
}

fn selftest_syndrome_roundtrip() -> std::result::Result<String, String> {
    let small = ConvCode::memory2();
    for k_prime in 1..=8usize {
        let isf = InverseSyndromeFormer::new(&small, 2 * k_prime).map_err(|e| e.to_string())?;
        for pat in 0..(1u32 << k_prime) {
            let mut m = BitVector::zeros(k_prime);
            for b in 0..k_prime {
                if (pat >> b) & 1 != 0 {
                    m.set(b, true);
                }
            }
            let t = isf.apply(&m).map_err(|e| e.to_string())?;
            if small.syndrome_former(&t).map_err(|e| e.to_string())? != m {
                return Err(format!("SF(ISF(m)) != m at k'={k_prime}, pattern {pat:b}"));
            }
        }
    }
    let big = ConvCode::memory8();
    let isf = InverseSyndromeFormer::new(&big, 512).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xf00d);
    for _ in 0..100 {
        let m = BitVector::random(256, &mut rng);
        let t = isf.apply(&m).map_err(|e| e.to_string())?;
        if big.syndrome_former(&t).map_err(|e| e.to_string())? != m {
            return Err("memory-8 round trip failed".into());
        }
    }
    Ok("exhaustive k'<=8 plus 100 random memory-8 vectors".into())
}

fn selftest_coset_membership() -> std::result::Result<String, String> {
    let code = ConvCode::memory8();
    let s = 128;
    let isf = InverseSyndromeFormer::new(&code, s).map_err(|e| e.to_string())?;
    let mapping: PamMapping<f64> = PamMapping::new(16).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc053);
    for _ in 0..20 {
        let m = BitVector::random(s / 2, &mut rng);
        let coset = CosetSpec::from_syndrome(&code, &isf, &m).map_err(|e| e.to_string())?;
        let planes: Vec<BitVector> = (0..3).map(|_| BitVector::random(s, &mut rng)).collect();
        let target: Vec<f64> = (0..s).map(|_| (rng.random::<f64>() - 0.5) * 16.0).collect();
        let z = shape_to_target(&coset, &planes, &target, &mapping).map_err(|e| e.to_string())?;
        if code.syndrome_former(&z).map_err(|e| e.to_string())? != m {
            return Err("shaped output left its coset".into());
        }
    }
    Ok("20 random shaped blocks stayed in coset".into())
}

fn selftest_interleaver() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11ea);
    for len in [30usize, 144, 1000] {
        let il = crate::pipeline::Interleaver::new(len, 7);
        for _ in 0..10 {
            let x = BitVector::random(len, &mut rng);
            if il.deinterleave_bits(&il.interleave_bits(&x)) != x {
                return Err(format!("round trip failed at len {len}"));
            }
        }
    }
    Ok("bit round trips at three sizes".into())
}

fn selftest_mod_fold() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f0d);
    for _ in 0..10_000 {
        let x = (rng.random::<f64>() - 0.5) * 1000.0;
        let y = crate::modulation::mod_fold(x, 16).map_err(|e| e.to_string())?;
        if !(-8.0..8.0).contains(&y) {
            return Err(format!("{x} folded out of range: {y}"));
        }
        if (crate::modulation::mod_fold(y, 16).map_err(|e| e.to_string())? - y).abs() > 0.0 {
            return Err(format!("fold not idempotent at {x}"));
        }
        let k = (x - y) / 16.0;
        if (k - k.round()).abs() > 1e-9 {
            return Err(format!("fold changed congruence class at {x}"));
        }
    }
    Ok("10k random folds in range, idempotent, congruent".into())
}

fn selftest_label_table() -> std::result::Result<String, String> {
    let mapping: PamMapping<f64> = PamMapping::new(16).map_err(|e| e.to_string())?;
    let mut seen = std::collections::HashSet::new();
    for label in 0..16 {
        if !seen.insert(mapping.symbol_for_label(label).to_bits()) {
            return Err("label table is not a bijection".into());
        }
    }
    for lower in 0..8 {
        let a = mapping.symbol_for_label(mapping.label_from_bits(false, lower));
        let b = mapping.symbol_for_label(mapping.label_from_bits(true, lower));
        let d = crate::modulation::mod_fold(b - a, 16).map_err(|e| e.to_string())?;
        if d.abs() != 8.0 {
            return Err(format!("sign flip moved by {d} at lower {lower:03b}"));
        }
    }
    Ok("bijective; sign flip displaces by M/2 for all 8 lower values".into())
}

fn selftest_ldpc_encode() -> std::result::Result<String, String> {
    let code = crate::ldpc::LdpcCode::construct(
        600,
        500,
        &DegreeDistribution::new(&[(2, 0.1256), (3, 0.7140), (10, 0.1604)]).unwrap(),
        &DegreeDistribution::regular(24).unwrap(),
        0x5eed,
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d9c);
    for _ in 0..100 {
        let msg = BitVector::random(500, &mut rng);
        let (cw, _) = code.encode_systematic(&msg).map_err(|e| e.to_string())?;
        if !code.syndrome_ok(&cw) {
            return Err("encoded word failed a parity check".into());
        }
    }
    Ok("100 random encodings, all syndromes zero".into())
}

fn selftest_bp_validity() -> std::result::Result<String, String> {
    let code = crate::ldpc::LdpcCode::construct(
        60,
        40,
        &DegreeDistribution::regular(3).unwrap(),
        &DegreeDistribution::regular(9).unwrap(),
        0xbb,
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    let mut converged = 0;
    for _ in 0..200 {
        let llr: Vec<f64> = (0..60)
            .map(|_| 3.0 * <f64 as Real>::std_normal(&mut rng))
            .collect();
        let out = code
            .bp_decode(&llr, 30, BpVariant::SumProduct)
            .map_err(|e| e.to_string())?;
        if out.converged {
            converged += 1;
            if !code.syndrome_ok(&out.hard_bits) {
                return Err("converged output violates a check".into());
            }
        }
    }
    Ok(format!("{converged}/200 converged, all with zero syndrome"))
}

fn selftest_demapper_oracle() -> std::result::Result<String, String> {
    let mapping: PamMapping<f64> = PamMapping::new(16).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xde3a);
    for _ in 0..100 {
        let rep = rng.random_range(0..=2);
        let rc = crate::modulation::ReplicatedConstellation::new(&mapping, rep);
        let y = (rng.random::<f64>() - 0.5) * 40.0;
        let nv = 0.1 + rng.random::<f64>() * 3.9;
        let got = rc.demap_llr(y, nv).map_err(|e| e.to_string())?;
        // Direct summation oracle.
        let m = 16i64;
        for bit in 0..4 {
            let (mut s0, mut s1) = (0.0f64, 0.0f64);
            for j in -(rep as i64)..=(rep as i64) {
                for slot in 0..16usize {
                    let label = mapping.label_for_slot(slot);
                    let sym = mapping.symbol_for_label(label) + (j * m) as f64;
                    let e = (-(y - sym) * (y - sym) / (2.0 * nv)).exp();
                    if (label >> (3 - bit)) & 1 == 0 {
                        s0 += e;
                    } else {
                        s1 += e;
                    }
                }
            }
            let want = (s0 / s1).ln();
            if (got[bit] - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(format!("LLR mismatch: {} vs {want}", got[bit]));
            }
        }
    }
    Ok("100 random demaps match direct summation to 1e-9".into())
}

fn selftest_noiseless_roundtrip() -> std::result::Result<String, String> {
    let params = DpcSystemParams::new(192, 144, 24, 16, 16.0, 16.0, 1e-4)
        .map_err(|e| e.to_string())?;
    let opts = SystemOptions {
        chk_dist: DegreeDistribution::regular(24).unwrap(),
        ..SystemOptions::default()
    };
    let sys = DpcSystem::build(params, 0x57e5, opts).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xabcd);
    let msgs: Vec<BitVector> = (0..4).map(|_| BitVector::random(144, &mut rng)).collect();
    let mut src = InterferenceSource::<f64>::new(16.0, 3).map_err(|e| e.to_string())?;
    let out = crate::pipeline::one_shot_roundtrip(&sys, &msgs, |_, len| src.next_block(len), 9)
        .map_err(|e| e.to_string())?;
    if out.bit_errors != 0 {
        return Err(format!("{} bit errors on a noiseless link", out.bit_errors));
    }
    Ok("3 steady-state blocks recovered exactly".into())
}
