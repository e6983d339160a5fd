//! Deterministic stand-in for the PROMISE CK-metric corpus.
//!
//! Each project version gets exactly the instance and defect counts of
//! [`REFERENCE_COUNTS`](super::REFERENCE_COUNTS) (times an optional scale factor). Metrics are
//! drawn from a small latent model (class size, coupling, inheritance depth,
//! cohesion) with heavy-tailed marginals like real ckjm output, and the
//! defective rows are the top-scoring rows of a noisy size/coupling risk
//! score. A small fraction of cells is left missing and a small fraction
//! of rows is duplicated, so the cleaning steps have something to do.
//!
//! The generator is for exercising the pipeline end to end; it carries no
//! claim of reproducing the real repository's statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, FeatureSchema, MetricRow, REFERENCE_COUNTS};

#[derive(Debug, Clone)]
pub struct SurrogateConfig {
    /// Multiplier on the reference instance and defect counts.
    pub scale: f64,
    pub seed: u64,
    /// Probability that any single metric cell is missing.
    pub missing_rate: f64,
    /// Fraction of rows that are exact copies of an earlier row.
    pub duplicate_rate: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            scale: 1.0,
            seed: 20_240_601,
            missing_rate: 0.002,
            duplicate_rate: 0.015,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn hash_tag(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

struct Latent {
    metrics: Vec<f64>,
    risk: f64,
}

fn draw_class(rng: &mut ChaCha8Rng, project_size: f64) -> Latent {
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let mut e = || n01.sample(rng);
    let s = project_size + e();
    let c = 0.5 * s + 0.85 * e();
    let h = e();
    let q = e();

    let wmc = (1.9 + 0.75 * s + 0.25 * e()).exp().round().max(0.0);
    let dit = (0.25 + 0.45 * h).exp().floor().clamp(0.0, 8.0);
    let noc = (-1.8 + 0.9 * e()).exp().floor();
    let cbo = (1.8 + 0.7 * c + 0.2 * e()).exp().round();
    let rfc = (wmc * (0.9 + 0.25 * e()).exp() + 0.5 * cbo).round();
    let lcom = (0.5 * wmc * (wmc - 1.0).max(0.0) * sigmoid(q + 0.3 * e())).round();
    let ca = ((0.8 + 0.6 * c + 0.6 * e()).exp() - 1.0).round().max(0.0);
    let ce = ((1.2 + 0.7 * c + 0.3 * e()).exp() - 1.0).round().max(0.0);
    let npm = (wmc * sigmoid(0.8 + e())).round();
    let lcom3 = round2((1.0 + 0.3 * q + 0.25 * e()).clamp(0.0, 2.0));
    let loc = (4.6 + 0.95 * s + 0.3 * e()).exp().round();
    let dam = round2(sigmoid(1.2 + 1.5 * e()));
    let moa = (-1.0 + 0.5 * s + 0.6 * e()).exp().floor();
    let mfa = if dit <= 1.0 {
        0.0
    } else {
        round2(sigmoid(0.5 + e()))
    };
    let cam = round2((1.0 / (1.0 + 0.08 * wmc) + 0.1 * e()).clamp(0.05, 1.0));
    let ic = if dit <= 1.0 {
        0.0
    } else {
        (-0.8 + 0.6 * e()).exp().floor()
    };
    let cbm = (ic * (1.0 + 2.0 * sigmoid(e()))).round();
    let amc = round2(loc / wmc.max(1.0));
    let max_cc = (0.8 + 0.5 * s + 0.4 * e()).exp().round().max(1.0);
    let avg_cc = round2(max_cc * (0.3 + 0.7 * sigmoid(e())));

    let risk = 0.9 * s + 0.5 * c + 0.15 * s * c + 0.3 * (max_cc).ln() - 0.2 * cam
        + 0.9 * logistic_noise(rng);

    Latent {
        metrics: vec![
            wmc, dit, noc, cbo, rfc, lcom, ca, ce, npm, lcom3, loc, dam, moa, mfa, cam, ic, cbm,
            amc, max_cc, avg_cc,
        ],
        risk,
    }
}

fn logistic_noise(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
    (u / (1.0 - u)).ln()
}

/// Scaled `(instances, defective)` for one reference row.
pub fn scaled_counts(instances: usize, defective: usize, scale: f64) -> (usize, usize) {
    let n = ((instances as f64 * scale).round() as usize).max(4);
    let k = ((defective as f64 * scale).round() as usize).clamp(1, n - 1);
    (n, k)
}

/// Generates one project version with exactly `instances` rows of which
/// `defective` carry a positive bug count.
pub fn generate_project(
    tag: &str,
    instances: usize,
    defective: usize,
    cfg: &SurrogateConfig,
) -> Dataset {
    let (project, version) = tag.rsplit_once('-').unwrap_or((tag, ""));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ hash_tag(tag));
    // Versions of one project share a size offset.
    let mut prng = ChaCha8Rng::seed_from_u64(cfg.seed ^ hash_tag(project));
    let project_size = Normal::new(0.0, 0.3).unwrap().sample(&mut prng);

    let mut classes: Vec<Latent> = Vec::with_capacity(instances);
    for i in 0..instances {
        if i > 0 && rng.random::<f64>() < cfg.duplicate_rate {
            let j = rng.random_range(0..i);
            let copy = Latent {
                metrics: classes[j].metrics.clone(),
                risk: classes[j].risk,
            };
            classes.push(copy);
        } else {
            classes.push(draw_class(&mut rng, project_size));
        }
    }

    let mut order: Vec<usize> = (0..instances).collect();
    order.sort_by(|&a, &b| classes[b].risk.total_cmp(&classes[a].risk).then(a.cmp(&b)));
    let mut faulty = vec![false; instances];
    for &i in order.iter().take(defective) {
        faulty[i] = true;
    }

    let rows = classes
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            for v in c.metrics.iter_mut() {
                if rng.random::<f64>() < cfg.missing_rate {
                    *v = f64::NAN;
                }
            }
            let bug_count = if faulty[i] {
                1 + (rng.random::<f64>().ln() / 0.5f64.ln()).floor() as u32
            } else {
                0
            };
            MetricRow {
                project_id: project.to_string(),
                version: version.to_string(),
                class_name: format!("org.{project}.pkg{}.Class{i}", i % 17),
                metrics: c.metrics,
                bug_count,
            }
        })
        .collect();
    Dataset::from_rows(FeatureSchema::default(), rows)
        .expect("surrogate rows match the default schema")
}

/// All 19 reference project versions, one dataset each.
pub fn generate_corpus(cfg: &SurrogateConfig) -> Vec<Dataset> {
    REFERENCE_COUNTS
        .iter()
        .map(|&(tag, n, k)| {
            let (n, k) = scaled_counts(n, k, cfg.scale);
            generate_project(tag, n, k, cfg)
        })
        .collect()
}

/// Writes each project version to `<dir>/<tag>.csv` and returns the paths.
pub fn write_corpus(
    dir: &std::path::Path,
    cfg: &SurrogateConfig,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    generate_corpus(cfg)
        .into_iter()
        .map(|d| {
            let path = dir.join(format!("{}.csv", d.provenance()[0].tag()));
            let file = std::fs::File::create(&path)?;
            d.write_csv(std::io::BufWriter::new(file))
                .map_err(std::io::Error::other)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::summarize;

    #[test]
    fn counts_match_reference_rows() {
        let cfg = SurrogateConfig::default();
        for d in generate_corpus(&cfg) {
            let s = &summarize(&d)[0];
            let (n, k) = crate::corpus::reference_entry(&s.project).unwrap();
            assert_eq!((s.instances, s.defective), (n, k), "{}", s.project);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SurrogateConfig {
            scale: 0.1,
            ..Default::default()
        };
        let a = generate_corpus(&cfg);
        let b = generate_corpus(&cfg);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.y(), y.y());
            assert_eq!(x.x().rows(), y.x().rows());
            for r in 0..x.x().rows() {
                for (u, v) in x.x().row(r).iter().zip(y.x().row(r)) {
                    assert!(u.to_bits() == v.to_bits());
                }
            }
        }
    }
}
