//! Forecast accuracy (ARV^I), one-way ANOVA and Tukey HSD post-hoc
//! comparison across replicated methods.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Squared forecast error over squared deviation from the sample mean,
/// summed across all output columns. `0/0` is defined as 0; against a
/// constant sample, errors at rounding level of the actuals also count as 0.
pub fn relative_variance(actuals: &[Vec<f64>], predictions: &[Vec<f64>]) -> Result<f64> {
    if actuals.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} actuals for {} predictions",
            actuals.len(),
            predictions.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::Size {
            what: "forecast pairs",
            needed: 1,
            got: 0,
        });
    }
    let m = actuals[0].len();
    if actuals.iter().chain(predictions).any(|v| v.len() != m) {
        return Err(Error::Shape("ragged forecast vectors".into()));
    }
    let n = actuals.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut magnitude = 0.0;
    for j in 0..m {
        let mean = actuals.iter().map(|a| a[j]).sum::<f64>() / n;
        for (a, p) in actuals.iter().zip(predictions) {
            num += (a[j] - p[j]).powi(2);
            den += (a[j] - mean).powi(2);
            magnitude += a[j] * a[j];
        }
    }
    Ok(if num == 0.0 {
        0.0
    } else if den == 0.0 {
        if num <= 1e-24 * magnitude {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    })
}

/// Interval average relative variance:
/// `[sum (U - U^)^2 + sum (L - L^)^2] / [sum (U - mean U)^2 + sum (L - mean L)^2]`.
pub fn arv_interval(actuals: &[Interval], predictions: &[Interval]) -> Result<f64> {
    let to_rows = |v: &[Interval]| v.iter().map(|iv| vec![iv.lower, iv.upper]).collect::<Vec<_>>();
    relative_variance(&to_rows(actuals), &to_rows(predictions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResults {
    pub method: String,
    pub horizon: usize,
    pub arv_values: Vec<f64>,
}

impl ReplicateResults {
    pub fn mean(&self) -> f64 {
        self.arv_values.iter().sum::<f64>() / self.arv_values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_within: f64,
    /// Zero within-group variance.
    pub degenerate: bool,
}

fn check_groups(groups: &[ReplicateResults]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::Size {
            what: "groups",
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        if g.arv_values.len() < 2 {
            return Err(Error::Size {
                what: "replicates per group",
                needed: 2,
                got: g.arv_values.len(),
            });
        }
        if g.arv_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value in group {}", g.method)));
        }
    }
    Ok(())
}

pub fn one_way_anova(groups: &[ReplicateResults]) -> Result<AnovaResult> {
    check_groups(groups)?;
    let total: usize = groups.iter().map(|g| g.arv_values.len()).sum();
    let grand = groups.iter().flat_map(|g| &g.arv_values).sum::<f64>() / total as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let mean = g.mean();
        ssb += g.arv_values.len() as f64 * (mean - grand).powi(2);
        ssw += g.arv_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    let msb = ssb / df_between as f64;
    let msw = ssw / df_within as f64;
    // Rounding leaves ssb a few ulps above zero when the means coincide.
    let scale = groups.iter().flat_map(|g| &g.arv_values).map(|v| v * v).sum::<f64>();
    let ssb_is_zero = ssb <= 1e-24 * scale.max(f64::MIN_POSITIVE);
    let (f_statistic, p_value, degenerate) = if ssb_is_zero {
        (0.0, 1.0, msw == 0.0)
    } else if msw == 0.0 {
        (f64::INFINITY, 0.0, true)
    } else {
        let f = msb / msw;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| Error::Domain(e.to_string()))?;
        (f, dist.sf(f).clamp(0.0, 1.0), false)
    };
    Ok(AnovaResult {
        f_statistic,
        p_value,
        df_between,
        df_within,
        ms_within: msw,
        degenerate,
    })
}

// ---------------------------------------------------------------------------
// Studentized range distribution

const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// Composite 16-point Gauss-Legendre quadrature over `panels` equal panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + width * (p as f64 + 0.5);
        let half = width / 2.0;
        let mut s = 0.0;
        for (x, w) in GL16_NODES.iter().zip(&GL16_WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Phi(b) - Phi(a)` for `a <= b`, using whichever tail avoids cancellation.
fn norm_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a > 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    }
}

/// CDF of the range of `k` iid standard normals.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let lo: f64 = -8.5;
    let hi: f64 = 8.5;
    let panels = (hi - lo + w).ceil() as usize;
    let v = kf * integrate(|z| norm_pdf(z) * norm_mass(z, z + w).powi(k as i32 - 1), lo - w, hi, panels);
    v.clamp(0.0, 1.0)
}

/// CDF of the studentized range statistic for `k` groups and `df` error
/// degrees of freedom.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    if q <= 0.0 || k < 2 {
        return 0.0;
    }
    if !q.is_finite() {
        return 1.0;
    }
    if df > 50_000.0 {
        return normal_range_cdf(q, k);
    }
    // density of s = sqrt(chi2_df / df)
    let half = df / 2.0;
    let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let log_density = |s: f64| log_norm + (df - 1.0) * s.ln() - half * s * s;
    let mode = ((df - 1.0) / df).max(0.0).sqrt();
    let peak = if mode > 0.0 { log_density(mode) } else { log_norm };
    let cutoff = peak - 45.0;
    let spread = 1.0 / (2.0 * df).sqrt();
    let mut lo = mode;
    while lo > 0.0 && log_density(lo) > cutoff {
        lo = (lo - spread).max(0.0);
    }
    let mut hi = mode.max(spread);
    while log_density(hi) > cutoff {
        hi += spread;
    }
    let panels = ((hi - lo) / spread).ceil().clamp(8.0, 200.0) as usize;
    let v = integrate(
        |s| {
            if s <= 0.0 {
                0.0
            } else {
                log_density(s).exp() * normal_range_cdf(q * s, k)
            }
        },
        lo,
        hi,
        panels,
    );
    v.clamp(0.0, 1.0)
}

/// Upper-tail probability of the studentized range.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    (1.0 - studentized_range_cdf(q, k, df)).max(0.0)
}

/// Quantile of the studentized range: bracket by doubling, then refine with
/// Illinois-style regula falsi on the CDF.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> f64 {
    let f = |q: f64| studentized_range_cdf(q, k, df) - p;
    let (mut a, mut fa) = (0.0, -p);
    let mut b = 1.0;
    let mut fb = f(b);
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        if b > 1e6 {
            return f64::INFINITY;
        }
        fb = f(b);
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < 1e-12 * c.abs() {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb /= 2.0;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa /= 2.0;
            }
            side = 1;
        }
        if fc.abs() < 1e-14 {
            return c;
        }
    }
    (a * fb - b * fa) / (fb - fa)
}

// ---------------------------------------------------------------------------
// Tukey HSD

#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub i: usize,
    pub j: usize,
    /// `mean_i - mean_j`.
    pub mean_diff: f64,
    pub q_statistic: f64,
    pub p_value: f64,
    /// Smallest absolute mean difference that is significant for this pair.
    pub threshold: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TukeyResult {
    pub methods: Vec<String>,
    pub means: Vec<f64>,
    pub alpha: f64,
    pub pairs: Vec<PairComparison>,
    /// Group indices ordered by ascending mean (best first).
    pub ranking: Vec<usize>,
    /// Set when the preceding ANOVA was not significant.
    pub warning: Option<String>,
}

pub fn tukey_hsd(groups: &[ReplicateResults], alpha: f64) -> Result<TukeyResult> {
    check_groups(groups)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 1)")));
    }
    let anova = one_way_anova(groups)?;
    let warning = (anova.p_value >= alpha).then(|| {
        format!(
            "ANOVA not significant at {alpha} (p = {:.4}); pairwise results are indicative only",
            anova.p_value
        )
    });
    let k = groups.len();
    let df = anova.df_within as f64;
    let q_crit = studentized_range_quantile(1.0 - alpha, k, df);
    let means: Vec<f64> = groups.iter().map(ReplicateResults::mean).collect();
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let ni = groups[i].arv_values.len() as f64;
            let nj = groups[j].arv_values.len() as f64;
            // Tukey-Kramer standard error
            let se = (anova.ms_within / 2.0 * (1.0 / ni + 1.0 / nj)).sqrt();
            let diff = means[i] - means[j];
            let (q, p) = if se == 0.0 {
                if diff == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let q = diff.abs() / se;
                (q, studentized_range_sf(q, k, df))
            };
            let threshold = q_crit * se;
            pairs.push(PairComparison {
                i,
                j,
                mean_diff: diff,
                q_statistic: q,
                p_value: p,
                threshold,
                significant: diff.abs() > threshold,
            });
        }
    }
    let mut ranking: Vec<usize> = (0..k).collect();
    ranking.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
    Ok(TukeyResult {
        methods: groups.iter().map(|g| g.method.clone()).collect(),
        means,
        alpha,
        pairs,
        ranking,
        warning,
    })
}

impl TukeyResult {
    pub fn pair(&self, a: usize, b: usize) -> Option<&PairComparison> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    /// Symmetric significance matrix.
    pub fn significance_matrix(&self) -> Vec<Vec<bool>> {
        let k = self.means.len();
        let mut m = vec![vec![false; k]; k];
        for p in &self.pairs {
            m[p.i][p.j] = p.significant;
            m[p.j][p.i] = p.significant;
        }
        m
    }

    /// 1-based rank of each group (1 = lowest mean).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.ranking.len()];
        for (pos, &g) in self.ranking.iter().enumerate() {
            r[g] = pos + 1;
        }
        r
    }

    /// Methods from best to worst, separated by `<*` where the adjacent pair
    /// differs significantly and `<` otherwise.
    pub fn ranking_line(&self) -> String {
        let mut out = String::new();
        for (pos, &g) in self.ranking.iter().enumerate() {
            if pos > 0 {
                let prev = self.ranking[pos - 1];
                let sig = self.pair(prev, g).is_some_and(|p| p.significant);
                out.push_str(if sig { " <* " } else { " < " });
            }
            out.push_str(&self.methods[g]);
        }
        out
    }

    /// CSV of every pairwise comparison.
    pub fn pairwise_csv(&self) -> String {
        let mut out = String::from("method_a,method_b,mean_diff,q,p_value,threshold,significant\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                self.methods[p.i], self.methods[p.j], p.mean_diff, p.q_statistic, p.p_value, p.threshold, p.significant
            );
        }
        out
    }
}
