//! Seeded generator of NSL-KDD-format records.
//!
//! Each class has its own protocol/service/flag vocabulary and its own
//! per-feature value profile; `overlap` controls how often a row borrows the
//! numeric profile of a different class, which keeps the problem from being
//! trivially separable. Output is fully determined by the config.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::dataset::{Cell, ClassLabel, FeatureKind, FeatureSchema, LabeledDataset, RawRecord, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub rows: usize,
    /// Drives row sampling.
    pub seed: u64,
    /// Drives the per-class feature profiles; files meant to share a
    /// distribution share this value.
    pub profile_seed: u64,
    /// Relative class frequencies in `ClassLabel` order.
    pub class_weights: [f64; NUM_CLASSES],
    /// Probability that a row takes another class's numeric profile.
    pub overlap: f64,
    pub with_difficulty: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 2_000,
            seed: 0,
            profile_seed: 0,
            class_weights: [0.50, 0.35, 0.10, 0.04, 0.01],
            overlap: 0.05,
            with_difficulty: true,
        }
    }
}

struct ClassProfile {
    attacks: &'static [&'static str],
    protocols: &'static [&'static str],
    services: &'static [&'static str],
    flags: &'static [&'static str],
}

const PROFILES: [ClassProfile; NUM_CLASSES] = [
    ClassProfile {
        attacks: &["normal"],
        protocols: &["tcp", "udp", "icmp"],
        services: &["http", "smtp", "domain_u", "ftp_data", "private", "other"],
        flags: &["SF", "SF", "SF", "REJ"],
    },
    ClassProfile {
        attacks: &["neptune", "smurf", "back", "teardrop", "pod"],
        protocols: &["tcp", "icmp", "udp"],
        services: &["private", "ecr_i", "http", "telnet"],
        flags: &["S0", "SF", "REJ"],
    },
    ClassProfile {
        attacks: &["satan", "ipsweep", "portsweep", "nmap"],
        protocols: &["tcp", "icmp", "udp"],
        services: &["private", "eco_i", "other", "ftp_data"],
        flags: &["REJ", "SF", "RSTO", "SH"],
    },
    ClassProfile {
        attacks: &["warezclient", "guess_passwd", "ftp_write", "phf", "imap"],
        protocols: &["tcp"],
        services: &["ftp_data", "ftp", "telnet", "imap4", "http"],
        flags: &["SF", "RSTO"],
    },
    ClassProfile {
        attacks: &["buffer_overflow", "rootkit", "loadmodule", "perl"],
        protocols: &["tcp"],
        services: &["telnet", "ftp_data", "login"],
        flags: &["SF"],
    },
];

/// Per-class location of every continuous feature, in `[0, 1]`.
fn class_centers(seed: u64, n_features: usize) -> Vec<[f64; NUM_CLASSES]> {
    let mut rng = stream_rng(seed, 0xC3);
    (0..n_features)
        .map(|_| std::array::from_fn(|_| rng.gen::<f64>()))
        .collect()
}

fn continuous_value(name: &str, center: f64, rng: &mut StreamRng) -> f64 {
    let jitter = (rng.gen::<f64>() - 0.5) * 0.3;
    let u = (center + jitter).clamp(0.0, 1.0);
    if name.contains("rate") {
        (u * 100.0).round() / 100.0
    } else if name.ends_with("bytes") {
        (u * 12.0).exp().floor()
    } else if name.contains("count") {
        (u * 511.0).round()
    } else if name == "duration" {
        (u * u * 5000.0).floor()
    } else {
        (u * 4.0).floor()
    }
}

fn pick<'a>(items: &[&'a str], rng: &mut StreamRng) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

pub fn generate(cfg: &SynthConfig) -> Result<LabeledDataset> {
    if cfg.rows == 0 {
        return Err(Error::Empty);
    }
    if !(0.0..=1.0).contains(&cfg.overlap) {
        return Err(Error::InvalidParam("overlap must lie in [0,1]".into()));
    }
    let classes = WeightedIndex::new(cfg.class_weights)
        .map_err(|e| Error::InvalidParam(format!("class weights: {e}")))?;
    let schema = FeatureSchema::nsl_kdd();
    let centers = class_centers(cfg.profile_seed, schema.len());
    let mut rng = stream_rng(cfg.seed, 0x5E);

    let mut records = Vec::with_capacity(cfg.rows);
    for _ in 0..cfg.rows {
        let k = classes.sample(&mut rng);
        let label = ClassLabel::from_index(k).expect("weighted index below K");
        let profile = &PROFILES[k];
        let numeric_class = if rng.gen::<f64>() < cfg.overlap {
            rng.gen_range(0..NUM_CLASSES)
        } else {
            k
        };
        let values = schema
            .features
            .iter()
            .enumerate()
            .map(|(j, desc)| match desc.kind {
                FeatureKind::Categorical => Cell::Token(
                    match desc.name.as_str() {
                        "protocol_type" => pick(profile.protocols, &mut rng),
                        "service" => pick(profile.services, &mut rng),
                        _ => pick(profile.flags, &mut rng),
                    }
                    .to_string(),
                ),
                FeatureKind::Binary => {
                    let p = centers[j][numeric_class];
                    Cell::Number(if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
                }
                FeatureKind::Continuous => {
                    Cell::Number(continuous_value(&desc.name, centers[j][numeric_class], &mut rng))
                }
            })
            .collect();
        let attack_name = pick(profile.attacks, &mut rng).to_string();
        let difficulty = cfg.with_difficulty.then(|| rng.gen_range(0..=21));
        records.push(RawRecord {
            values,
            label,
            attack_name,
            difficulty,
        });
    }
    Ok(LabeledDataset {
        schema,
        records,
        source: None,
    })
}
