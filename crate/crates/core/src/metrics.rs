//! SSIM, PSNR and the four-way quality report.
//!
//! SSIM follows the usual Gaussian-window formulation: an 11×11 window with
//! σ = 1.5, `C1 = (0.01·L)²`, `C2 = (0.03·L)²`, `L = 1`, evaluated at every
//! position where the window fits inside the image and averaged. Channels are
//! scored independently and averaged.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Returned by [`psnr`] for identical images, and the upper cap otherwise.
pub const PSNR_IDENTICAL_DB: f64 = 100.0;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let centre = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - centre;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable "valid" filtering of a `height`×`width` plane.
fn filter_valid(plane: &[f64], height: usize, width: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], height: usize, width: usize) -> f64 {
    let k = gaussian_kernel();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, height, width, &k);
    let mu_b = filter_valid(b, height, width, &k);
    let e_aa = filter_valid(&aa, height, width, &k);
    let e_bb = filter_valid(&bb, height, width, &k);
    let e_ab = filter_valid(&ab, height, width, &k);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let luminance = (2.0 * ma * mb + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1);
        let structure = (2.0 * cov + SSIM_C2) / (var_a + var_b + SSIM_C2);
        sum += luminance * structure;
    }
    sum / mu_a.len() as f64
}

/// Mean structural similarity of two same-shaped images.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.shape().expect(b.shape())?;
    let shape = a.shape();
    if shape.height < SSIM_WINDOW || shape.width < SSIM_WINDOW {
        return Err(Error::TooSmall {
            shape,
            window: SSIM_WINDOW,
        });
    }
    let total: f64 = (0..shape.channels)
        .map(|c| ssim_plane(a.plane(c), b.plane(c), shape.height, shape.width))
        .sum();
    Ok((total / shape.channels as f64).clamp(-1.0, 1.0))
}

/// Peak signal-to-noise ratio in dB with a peak of 1.0.
///
/// Identical images return [`PSNR_IDENTICAL_DB`]; all results are capped there.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.shape().expect(b.shape())?;
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL_DB);
    }
    Ok((10.0 * libm::log10(1.0 / mse)).min(PSNR_IDENTICAL_DB))
}

/// Slot for a learned perceptual distance. None ships with this crate.
pub trait PerceptualMetric {
    fn name(&self) -> &str;
    fn distance(&self, a: &Image, b: &Image) -> Result<f64>;
}

/// The four comparisons reported per dataset, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    HostRefined,
    HostSynthetic,
    PlaintextRefined,
    PlaintextSynthetic,
}

impl PairKind {
    pub const ALL: [PairKind; 4] = [
        PairKind::HostRefined,
        PairKind::HostSynthetic,
        PairKind::PlaintextRefined,
        PairKind::PlaintextSynthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::HostRefined => "host-vs-refined",
            PairKind::HostSynthetic => "host-vs-synthetic",
            PairKind::PlaintextRefined => "plaintext-vs-refined",
            PairKind::PlaintextSynthetic => "plaintext-vs-synthetic",
        }
    }

    pub fn notation(&self) -> &'static str {
        match self {
            PairKind::HostRefined => "(x_ho, x_su')",
            PairKind::HostSynthetic => "(x_ho, x_sy)",
            PairKind::PlaintextRefined => "(x_pl, x_su')",
            PairKind::PlaintextSynthetic => "(x_pl, x_sy)",
        }
    }

    fn slot(&self) -> usize {
        *self as usize
    }
}

/// Scores of one manifest entry for every pair kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryScores {
    pub ssim: [f64; 4],
    pub psnr: [f64; 4],
    pub perceptual: Option<[f64; 4]>,
}

impl EntryScores {
    pub fn get(&self, kind: PairKind) -> (f64, f64) {
        (self.ssim[kind.slot()], self.psnr[kind.slot()])
    }
}

/// Scores host/plaintext against synthetic/refined for one entry.
pub fn score_entry(
    host: &Image,
    plaintext: &Image,
    synthetic: &Image,
    refined: &Image,
    perceptual: Option<&dyn PerceptualMetric>,
) -> Result<EntryScores> {
    let mut out = EntryScores {
        ssim: [0.0; 4],
        psnr: [0.0; 4],
        perceptual: perceptual.map(|_| [0.0; 4]),
    };
    for kind in PairKind::ALL {
        let (reference, candidate) = match kind {
            PairKind::HostRefined => (host, refined),
            PairKind::HostSynthetic => (host, synthetic),
            PairKind::PlaintextRefined => (plaintext, refined),
            PairKind::PlaintextSynthetic => (plaintext, synthetic),
        };
        out.ssim[kind.slot()] = ssim(reference, candidate)?;
        out.psnr[kind.slot()] = psnr(reference, candidate)?;
        if let (Some(metric), Some(p)) = (perceptual, out.perceptual.as_mut()) {
            p[kind.slot()] = metric.distance(reference, candidate)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSummary {
    pub kind: PairKind,
    pub ssim_mean: f64,
    pub psnr_mean: f64,
    pub perceptual_mean: Option<f64>,
    pub count: usize,
}

/// One machine-readable line of a [`QualityReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub population: String,
    pub pair_kind: &'static str,
    pub metric: &'static str,
    pub mean: f64,
    pub count: usize,
}

/// Per-pair-kind means over a set of entries.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub dataset: String,
    /// Which images were averaged, e.g. "all entries" or "test split".
    pub population: String,
    pub summaries: [PairSummary; 4],
    pub failures: usize,
}

impl QualityReport {
    pub fn from_entries(
        dataset: &str,
        population: &str,
        entries: &[EntryScores],
        failures: usize,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("no entries to report"));
        }
        let n = entries.len() as f64;
        let has_perceptual = entries.iter().all(|e| e.perceptual.is_some());
        let summaries = PairKind::ALL.map(|kind| {
            let s = kind.slot();
            PairSummary {
                kind,
                ssim_mean: entries.iter().map(|e| e.ssim[s]).sum::<f64>() / n,
                psnr_mean: entries.iter().map(|e| e.psnr[s]).sum::<f64>() / n,
                perceptual_mean: has_perceptual.then(|| {
                    entries
                        .iter()
                        .map(|e| e.perceptual.map_or(0.0, |p| p[s]))
                        .sum::<f64>()
                        / n
                }),
                count: entries.len(),
            }
        });
        Ok(Self {
            dataset: dataset.into(),
            population: population.into(),
            summaries,
            failures,
        })
    }

    pub fn summary(&self, kind: PairKind) -> &PairSummary {
        &self.summaries[kind.slot()]
    }

    /// Host-side SSIM ordering observed for every reported dataset:
    /// refined surrogates sit closer to the host than first-pass synthetics.
    pub fn host_ordering_holds(&self) -> bool {
        self.summary(PairKind::HostRefined).ssim_mean
            > self.summary(PairKind::HostSynthetic).ssim_mean
    }

    /// Refined surrogates resemble the host more than the plaintext.
    pub fn privacy_proxy_holds(&self) -> bool {
        self.summary(PairKind::HostRefined).ssim_mean
            > self.summary(PairKind::PlaintextRefined).ssim_mean
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for s in &self.summaries {
            let mut push = |metric, mean| {
                rows.push(ReportRow {
                    dataset: self.dataset.clone(),
                    population: self.population.clone(),
                    pair_kind: s.kind.as_str(),
                    metric,
                    mean,
                    count: s.count,
                })
            };
            push("ssim", s.ssim_mean);
            push("psnr_db", s.psnr_mean);
            if let Some(p) = s.perceptual_mean {
                push("perceptual", p);
            }
        }
        rows
    }

    /// Two text tables: host-referenced pairs, then plaintext-referenced pairs.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| String::from("n/a"), |v| format!("{v:.4}"));
        for (title, kinds) in [
            (
                "host vs refined surrogate / synthetic",
                [PairKind::HostRefined, PairKind::HostSynthetic],
            ),
            (
                "plaintext vs refined surrogate / synthetic",
                [PairKind::PlaintextRefined, PairKind::PlaintextSynthetic],
            ),
        ] {
            let [a, b] = kinds.map(|k| self.summary(k));
            let _ = writeln!(out, "Image quality: {title}");
            let _ = writeln!(
                out,
                "{:<16} | {:>14} {:>14} | {:>14} {:>14} | {:>14} {:>14}",
                "", "SSIM", "", "PSNR (dB)", "", "LPIPS", ""
            );
            let _ = writeln!(
                out,
                "{:<16} | {:>14} {:>14} | {:>14} {:>14} | {:>14} {:>14}",
                "dataset",
                a.kind.notation(),
                b.kind.notation(),
                a.kind.notation(),
                b.kind.notation(),
                a.kind.notation(),
                b.kind.notation()
            );
            let _ = writeln!(
                out,
                "{:<16} | {:>14.4} {:>14.4} | {:>14.4} {:>14.4} | {:>14} {:>14}",
                self.dataset,
                a.ssim_mean,
                b.ssim_mean,
                a.psnr_mean,
                b.psnr_mean,
                fmt_opt(a.perceptual_mean),
                fmt_opt(b.perceptual_mean)
            );
            let _ = writeln!(out);
        }
        let verdict = |ok: bool| if ok { "holds" } else { "VIOLATED" };
        let _ = writeln!(
            out,
            "population: {} (n = {}, failed entries = {})",
            self.population, self.summaries[0].count, self.failures
        );
        let _ = writeln!(
            out,
            "expected direction SSIM(x_ho, x_su') > SSIM(x_ho, x_sy): {}",
            verdict(self.host_ordering_holds())
        );
        let _ = writeln!(
            out,
            "expected direction SSIM(x_ho, x_su') > SSIM(x_pl, x_su'): {}",
            verdict(self.privacy_proxy_holds())
        );
        out
    }
}
