//! Paired nonparametric agreement testing between the radar and reference
//! parameter sets: Wilcoxon signed-rank tests per grid cell, a
//! Benjamini-Hochberg threshold across all cells, and distribution-free
//! median confidence intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{LabeledParameters, ParameterId};
use crate::reference::Leg;
use crate::signal::View;

/// How zero differences enter the signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroHandling {
    /// Remove zeros before ranking (the classic test).
    Drop,
    /// Rank zeros with the rest, then exclude them from the statistic
    /// (Pratt's variant).
    Pratt,
}

/// How the p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    /// Full enumeration of the null distribution.
    Exact,
    /// Normal approximation with tie correction.
    Normal,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WilcoxonConfig {
    pub zero_handling: ZeroHandling,
    /// Largest effective n for which the exact distribution is enumerated.
    pub exact_max_n: usize,
    /// Continuity correction in the normal approximation. Improves the
    /// exact/normal agreement near the crossover.
    pub continuity_correction: bool,
}

impl Default for WilcoxonConfig {
    fn default() -> Self {
        WilcoxonConfig {
            zero_handling: ZeroHandling::Drop,
            exact_max_n: 25,
            continuity_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    /// Differences entering the statistic (zeros removed).
    pub n_used: usize,
    pub n_zeros: usize,
    /// Sum of the ranks of positive differences.
    pub w_plus: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: PMethod,
    /// All differences were zero; `p_value` is 1 by convention.
    pub degenerate: bool,
}

/// Average ranks (1-based) of `values`; tied values share the mean of the
/// ranks they occupy.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sum of t³ − t over groups of tied values.
fn tie_correction_sum(sorted_mags: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut i = 0;
    while i < sorted_mags.len() {
        let mut j = i + 1;
        while j < sorted_mags.len() && sorted_mags[j] == sorted_mags[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        sum += t * t * t - t;
        i = j;
    }
    sum
}

/// Exact two-sided p by dynamic programming over the null distribution of
/// W⁺. Average ranks are half-integers, so doubling them yields an integer
/// lattice; counts stay exact in f64 for n ≤ 25.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut dp = vec![0.0f64; total + 1];
    dp[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            dp[s] += dp[s - r];
        }
    }
    let s_obs = (2.0 * w_plus).round() as usize;
    let patterns = 2f64.powi(ranks.len() as i32);
    let p_le: f64 = dp[..=s_obs.min(total)].iter().sum::<f64>() / patterns;
    let p_ge: f64 = dp[s_obs.min(total)..].iter().sum::<f64>() / patterns;
    (2.0 * p_le.min(p_ge)).min(1.0)
}

fn normal_two_sided_p(w_plus: f64, mu: f64, var: f64, continuity: bool) -> f64 {
    if var <= 0.0 {
        return 1.0;
    }
    let mut num = w_plus - mu;
    if continuity {
        if num > 0.5 {
            num -= 0.5;
        } else if num < -0.5 {
            num += 0.5;
        } else {
            return 1.0;
        }
    }
    let z = num.abs() / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Wilcoxon signed-rank test of zero median on paired
/// differences.
///
/// # Errors
///
/// Empty or non-finite input is invalid. An all-zero sample is not an
/// error: it returns p = 1 with the `degenerate` flag set.
pub fn wilcoxon_signed_rank(diffs: &[f64], cfg: &WilcoxonConfig) -> Result<WilcoxonOutcome> {
    if diffs.is_empty() {
        return Err(Error::invalid("signed-rank test needs at least one difference"));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("differences must be finite"));
    }
    let n_total = diffs.len();
    let n_zeros = diffs.iter().filter(|&&d| d == 0.0).count();
    let n_used = n_total - n_zeros;
    if n_used == 0 {
        return Ok(WilcoxonOutcome {
            n_used: 0,
            n_zeros,
            w_plus: 0.0,
            p_value: 1.0,
            method: PMethod::Exact,
            degenerate: true,
        });
    }

    // Ranks of the nonzero magnitudes, under either zero-handling rule, and
    // the moments of the null distribution of W⁺.
    let (nonzero_ranks, w_plus, mu, var) = match cfg.zero_handling {
        ZeroHandling::Drop => {
            let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
            let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
            let ranks = average_ranks(&mags);
            let w: f64 = nz
                .iter()
                .zip(&ranks)
                .filter(|(d, _)| **d > 0.0)
                .map(|(_, r)| *r)
                .sum();
            let n = n_used as f64;
            let mut sorted = mags;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mu = n * (n + 1.0) / 4.0;
            let var =
                n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_correction_sum(&sorted) / 48.0;
            (ranks, w, mu, var)
        }
        ZeroHandling::Pratt => {
            let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
            let all_ranks = average_ranks(&mags);
            let mut ranks = Vec::with_capacity(n_used);
            let mut w = 0.0;
            for (d, r) in diffs.iter().zip(&all_ranks) {
                if *d != 0.0 {
                    ranks.push(*r);
                    if *d > 0.0 {
                        w += *r;
                    }
                }
            }
            let n = n_total as f64;
            let z = n_zeros as f64;
            let mut sorted_nz: Vec<f64> =
                mags.iter().copied().filter(|&m| m != 0.0).collect();
            sorted_nz.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mu = (n * (n + 1.0) - z * (z + 1.0)) / 4.0;
            let var = (n * (n + 1.0) * (2.0 * n + 1.0) - z * (z + 1.0) * (2.0 * z + 1.0))
                / 24.0
                - tie_correction_sum(&sorted_nz) / 48.0;
            (ranks, w, mu, var)
        }
    };

    let (p, method) = if n_used <= cfg.exact_max_n {
        (exact_two_sided_p(&nonzero_ranks, w_plus), PMethod::Exact)
    } else {
        (
            normal_two_sided_p(w_plus, mu, var, cfg.continuity_correction),
            PMethod::Normal,
        )
    };
    Ok(WilcoxonOutcome {
        n_used,
        n_zeros,
        w_plus,
        p_value: p,
        method,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BhOutcome {
    /// Adaptive significance threshold p*; 0 when nothing passes.
    pub p_star: f64,
    /// Per input p-value: rejected (p ≤ p*)?
    pub rejected: Vec<bool>,
    pub n_rejected: usize,
}

/// Benjamini-Hochberg step-up procedure: sort the p-values, find the
/// largest j with p_(j) ≤ jα/N, and reject everything at or below that
/// p-value.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<BhOutcome> {
    if p_values.is_empty() {
        return Err(Error::invalid("no p-values to correct"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0,1)"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("p-values must lie in [0,1]"));
    }
    let n = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut p_star = 0.0;
    let mut found = false;
    for j in (1..=n).rev() {
        if sorted[j - 1] <= j as f64 * alpha / n as f64 {
            p_star = sorted[j - 1];
            found = true;
            break;
        }
    }
    let rejected: Vec<bool> = if found {
        p_values.iter().map(|&p| p <= p_star).collect()
    } else {
        vec![false; n]
    };
    let n_rejected = rejected.iter().filter(|&&r| r).count();
    Ok(BhOutcome {
        p_star,
        rejected,
        n_rejected,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MedianCi {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Actual (conservative) coverage of the order-statistic interval.
    pub coverage: f64,
    /// The interval is (d_(k), d_(n+1−k)), 1-based.
    pub order_k: usize,
}

/// P(X ≤ k−1) for X ~ Binomial(n, ½).
fn binomial_half_lower_tail(n: usize, k: usize) -> f64 {
    let mut term = 0.5f64.powi(n as i32);
    let mut acc = 0.0;
    for i in 0..k {
        if i > 0 {
            term *= (n - i + 1) as f64 / i as f64;
        }
        acc += term;
    }
    acc
}

/// Distribution-free confidence interval for the median from binomial order
/// statistics: the tightest symmetric pair (d_(k), d_(n+1−k)) whose coverage
/// reaches `level`. Returns `None` when no such pair exists (n < 6 at the
/// 95% level).
pub fn median_ci(values: &[f64], level: f64) -> Result<Option<MedianCi>> {
    if values.is_empty() {
        return Err(Error::invalid("median CI needs a non-empty sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("confidence level must lie in (0,1)"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let med = median(values).unwrap();
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=n / 2 {
        let coverage = 1.0 - 2.0 * binomial_half_lower_tail(n, k);
        if coverage >= level {
            best = Some((k, coverage));
        } else {
            break; // coverage shrinks as k grows
        }
    }
    Ok(best.map(|(k, coverage)| MedianCi {
        median: med,
        lo: v[k - 1],
        hi: v[n - k],
        coverage,
        order_k: k,
    }))
}

/// One cell's worth of paired differences (radar minus reference).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedSample {
    pub parameter: ParameterId,
    pub speed_mps: f64,
    pub view: View,
    pub restriction: String,
    /// Differences, ordered by (subject, leg).
    pub differences: Vec<f64>,
}

/// Statistical verdict for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Median difference significantly nonzero (p ≤ p*).
    Reject,
    /// No significant difference.
    Accept,
    /// Strong evidence of agreement (p above the high-confidence mark).
    HighConfidence,
}

impl Decision {
    pub fn code(self) -> &'static str {
        match self {
            Decision::Reject => "R",
            Decision::Accept => "A",
            Decision::HighConfidence => "H",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub parameter: ParameterId,
    pub speed_mps: f64,
    pub view: View,
    pub restriction: String,
    pub n_pairs: usize,
    pub w_plus: f64,
    pub p_value: f64,
    pub method: PMethod,
    pub degenerate: bool,
    pub median_diff: f64,
    pub median_ci95: Option<(f64, f64)>,
    pub ci_coverage: Option<f64>,
    pub decision: Decision,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub p_star: f64,
    pub n_tests: usize,
    pub n_rejected: usize,
    pub cells: Vec<TestResult>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub alpha: f64,
    /// p-values above this mark are flagged HighConfidence.
    pub high_confidence_p: f64,
    pub ci_level: f64,
    pub wilcoxon: WilcoxonConfig,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            alpha: 0.05,
            high_confidence_p: 0.8,
            ci_level: 0.95,
            wilcoxon: WilcoxonConfig::default(),
        }
    }
}

fn leg_code(leg: Option<Leg>) -> u8 {
    match leg {
        None => 0,
        Some(Leg::Left) => 1,
        Some(Leg::Right) => 2,
    }
}

fn view_code(view: View) -> u8 {
    match view {
        View::Front => 0,
        View::Back => 1,
    }
}

fn speed_key(speed: f64) -> i64 {
    (speed * 1000.0).round() as i64
}

type PairKey = (String, u8, i64, u8, String);
type CellKey = (usize, i64, u8, String);

/// Match radar and reference parameter sets by (subject, leg, speed, view,
/// restriction) and collect per-parameter paired differences. Entries
/// without a partner are excluded with a warning.
pub fn collect_paired_samples(
    radar: &[LabeledParameters],
    reference: &[LabeledParameters],
) -> Result<(Vec<PairedSample>, Vec<String>)> {
    if radar.is_empty() || reference.is_empty() {
        return Err(Error::invalid(
            "paired comparison needs both radar and reference parameter sets",
        ));
    }
    let key_of = |lp: &LabeledParameters| -> PairKey {
        (
            lp.meta.subject.clone(),
            leg_code(lp.meta.leg),
            speed_key(lp.meta.speed_mps),
            view_code(lp.meta.view),
            lp.meta.restriction.clone(),
        )
    };
    let mut warnings = Vec::new();
    let mut ref_map: BTreeMap<PairKey, (&LabeledParameters, bool)> = BTreeMap::new();
    for lp in reference {
        let k = key_of(lp);
        if ref_map.contains_key(&k) {
            warnings.push(format!(
                "duplicate reference entry for subject '{}' — keeping the first",
                lp.meta.subject
            ));
        } else {
            ref_map.insert(k, (lp, false));
        }
    }

    let mut radar_sorted: Vec<&LabeledParameters> = radar.iter().collect();
    radar_sorted.sort_by_key(|lp| key_of(lp));

    let mut cells: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for lp in radar_sorted {
        let k = key_of(lp);
        let Some((partner, used)) = ref_map.get_mut(&k) else {
            warnings.push(format!(
                "no reference match for radar entry (subject '{}', {} leg, {:.2} m/s, {}, '{}') — excluded",
                lp.meta.subject,
                lp.meta.leg.map(|l| l.to_string()).unwrap_or_else(|| "unassigned".into()),
                lp.meta.speed_mps,
                lp.meta.view,
                lp.meta.restriction
            ));
            continue;
        };
        *used = true;
        for (idx, id) in ParameterId::ALL.iter().enumerate() {
            if let (Some(m), Some(r)) = (lp.params.get(*id), partner.params.get(*id)) {
                cells
                    .entry((idx, k.2, k.3, k.4.clone()))
                    .or_default()
                    .push(m - r);
            }
        }
    }
    for (k, (lp, used)) in &ref_map {
        if !used {
            warnings.push(format!(
                "no radar match for reference entry (subject '{}', key {:?}) — excluded",
                lp.meta.subject, k
            ));
        }
    }

    let samples = cells
        .into_iter()
        .map(|((idx, speed_milli, view, restriction), differences)| PairedSample {
            parameter: ParameterId::ALL[idx],
            speed_mps: speed_milli as f64 / 1000.0,
            view: if view == 0 { View::Front } else { View::Back },
            restriction,
            differences,
        })
        .collect();
    Ok((samples, warnings))
}

/// Run the full agreement analysis: one signed-rank test per (parameter,
/// speed, view, restriction) cell, Benjamini-Hochberg across all cells, and
/// per-cell median confidence intervals.
pub fn build_report(
    radar: &[LabeledParameters],
    reference: &[LabeledParameters],
    cfg: &ReportConfig,
) -> Result<ComparisonReport> {
    let (samples, warnings) = collect_paired_samples(radar, reference)?;
    build_report_from_samples(&samples, warnings, cfg)
}

/// Same as [`build_report`], starting from already-collected samples.
pub fn build_report_from_samples(
    samples: &[PairedSample],
    mut warnings: Vec<String>,
    cfg: &ReportConfig,
) -> Result<ComparisonReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no matched radar/reference pairs"));
    }
    let mut outcomes = Vec::with_capacity(samples.len());
    for s in samples {
        outcomes.push(wilcoxon_signed_rank(&s.differences, &cfg.wilcoxon)?);
    }
    let p_values: Vec<f64> = outcomes.iter().map(|o| o.p_value).collect();
    let bh = benjamini_hochberg(&p_values, cfg.alpha)?;

    let mut cells = Vec::with_capacity(samples.len());
    for ((s, o), rejected) in samples.iter().zip(&outcomes).zip(&bh.rejected) {
        let decision = if *rejected {
            Decision::Reject
        } else if o.p_value > cfg.high_confidence_p {
            Decision::HighConfidence
        } else {
            Decision::Accept
        };
        let ci = median_ci(&s.differences, cfg.ci_level)?;
        if ci.is_none() && s.differences.len() < 6 {
            warnings.push(format!(
                "cell ({}, {:.2} m/s, {}, '{}'): n = {} too small for a {}% median CI",
                s.parameter,
                s.speed_mps,
                s.view,
                s.restriction,
                s.differences.len(),
                cfg.ci_level * 100.0
            ));
        }
        cells.push(TestResult {
            parameter: s.parameter,
            speed_mps: s.speed_mps,
            view: s.view,
            restriction: s.restriction.clone(),
            n_pairs: s.differences.len(),
            w_plus: o.w_plus,
            p_value: o.p_value,
            method: o.method,
            degenerate: o.degenerate,
            median_diff: median(&s.differences).unwrap(),
            median_ci95: ci.map(|c| (c.lo, c.hi)),
            ci_coverage: ci.map(|c| c.coverage),
            decision,
        });
    }
    Ok(ComparisonReport {
        alpha: cfg.alpha,
        p_star: bh.p_star,
        n_tests: cells.len(),
        n_rejected: bh.n_rejected,
        cells,
        warnings,
    })
}
