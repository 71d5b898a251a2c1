//! Regression metrics, residual diagnostics and the multi-seed leaderboard.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FEATURE_NAMES, N_FEATURES};
use crate::error::{invalid, Error, Result};
use crate::model::{train_pipeline, ModelKind, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// MSE, MAE and `R^2 = 1 - SS_res / SS_tot`. A constant `actual` gives
/// `r2 = 0` for an exact fit and a [`Error::DegenerateTarget`] otherwise.
pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    if actual.len() != predicted.len() {
        return Err(invalid(format!("{} actual values but {} predictions", actual.len(), predicted.len())));
    }
    if actual.is_empty() {
        return Err(invalid("metrics need at least one value"));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let mae = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / n;
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        0.0
    } else {
        return Err(Error::DegenerateTarget("actual values are constant but predictions differ".into()));
    };
    Ok(MetricsReport { mse: ss_res / n, mae, r2 })
}

/// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16),
/// relative accuracy about 1e-16.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn ratio(num: &[f64; 8], den: &[f64; 8], r: f64) -> f64 {
        let poly = |c: &[f64; 8]| c.iter().rev().fold(0.0, |acc, k| acc * r + k);
        poly(num) / poly(den)
    }

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        return q * ratio(&A, &B, 0.180625 - q * q);
    }
    let r = (-(p.min(1.0 - p)).ln()).sqrt();
    let value = if r <= 5.0 { ratio(&C, &D, r - 1.6) } else { ratio(&E, &F, r - 5.0) };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Standardised residuals (sample standard deviation) sorted ascending and
/// paired with the normal quantiles at `(i - 0.5) / n`.
pub fn qq_points(residuals: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = residuals.len();
    if n < 2 {
        return Err(invalid("a Q-Q plot needs at least two residuals"));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = residuals.iter().map(|r| (r - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    Ok(z.into_iter().enumerate().map(|(i, v)| (normal_quantile((i as f64 + 0.5) / n as f64), v)).collect())
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    if two_point_support(x, y) {
        // any two points are collinear; rounding in the means must not hide that
        return r.signum();
    }
    r
}

/// True when both columns take exactly two values, paired one-to-one.
fn two_point_support(x: &[f64], y: &[f64]) -> bool {
    let (x0, y0) = (x[0], y[0]);
    let Some(k) = x.iter().position(|v| *v != x0) else { return false };
    let (x1, y1) = (x[k], y[k]);
    y0 != y1 && x.iter().zip(y).all(|(a, b)| (*a == x0 && *b == y0) || (*a == x1 && *b == y1))
}

/// Pairwise Pearson correlation of equal-length columns. Constant columns
/// correlate 0 with everything else and 1 with themselves.
pub fn pearson_correlation_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = columns.first() else {
        return Err(invalid("no columns given"));
    };
    if first.len() < 2 {
        return Err(invalid("correlation needs at least two rows"));
    }
    if columns.iter().any(|c| c.len() != first.len()) {
        return Err(invalid("columns must have equal length"));
    }
    let k = columns.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in 0..i {
            let r = pearson(&columns[i], &columns[j]);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    /// `(actual, predicted)` on the test split.
    pub pairs: Vec<(f64, f64)>,
    /// `actual - predicted`, in the same order as `pairs`.
    pub residuals: Vec<f64>,
    pub qq: Vec<(f64, f64)>,
    /// Labels of the correlation rows and columns: features then target.
    pub correlation_labels: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub importances: Vec<f64>,
    pub metrics: MetricsReport,
}

/// Assembles the diagnostics payload. `columns` are the encoded feature
/// columns followed by the target column.
pub fn diagnostics_bundle(
    actual: &[f64],
    predicted: &[f64],
    columns: &[Vec<f64>],
    importances: Vec<f64>,
) -> Result<DiagnosticsBundle> {
    let metrics = compute_metrics(actual, predicted)?;
    let residuals: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    let qq = qq_points(&residuals)?;
    let correlation = pearson_correlation_matrix(columns)?;
    let feature_names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let mut correlation_labels = feature_names.clone();
    correlation_labels.push(crate::dataset::COLUMNS[N_FEATURES].to_string());
    Ok(DiagnosticsBundle {
        pairs: actual.iter().copied().zip(predicted.iter().copied()).collect(),
        residuals,
        qq,
        correlation_labels,
        correlation,
        feature_names,
        importances,
        metrics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardCell {
    pub model: ModelKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub model: ModelKind,
    /// Per-metric medians over the seeds that trained successfully.
    pub median: Option<MetricsReport>,
    pub failures: usize,
    pub cells: Vec<LeaderboardCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub seeds: Vec<u64>,
    /// Ordered by median R^2, best first; models with no successful seed last.
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    pub fn entry(&self, model: ModelKind) -> Option<&LeaderboardEntry> {
        self.entries.iter().find(|e| e.model == model)
    }

    /// One row per cell then one `median` row per model. Failed cells have
    /// empty metric fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,seed,mse,mae,r2\n");
        let fmt = |m: Option<MetricsReport>| match m {
            Some(m) => format!("{},{},{}", m.mse, m.mae, m.r2),
            None => ",,".to_string(),
        };
        for e in &self.entries {
            for c in &e.cells {
                let _ = writeln!(out, "{},{},{}", e.model, c.seed, fmt(c.metrics));
            }
        }
        for e in &self.entries {
            let _ = writeln!(out, "{},median,{}", e.model, fmt(e.median));
        }
        out
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Trains and scores all five model kinds on every seed's split. Cells run
/// concurrently; a failing cell is recorded and the table continues.
pub fn model_leaderboard(
    dataset: &Dataset,
    seeds: &[u64],
    configs: &BTreeMap<ModelKind, TrainConfig>,
) -> Result<Leaderboard> {
    if seeds.is_empty() {
        return Err(invalid("leaderboard needs at least one seed"));
    }
    let jobs: Vec<(ModelKind, u64)> = ModelKind::ALL.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let cells: Vec<LeaderboardCell> = jobs
        .par_iter()
        .map(|&(model, seed)| {
            let config = configs.get(&model).cloned().unwrap_or_default();
            match train_pipeline(dataset, model, &config, seed) {
                Ok(out) => LeaderboardCell { model, seed, metrics: Some(out.artifact.metrics), error: None },
                Err(e) => LeaderboardCell { model, seed, metrics: None, error: Some(e.to_string()) },
            }
        })
        .collect();

    let mut entries: Vec<LeaderboardEntry> = ModelKind::ALL
        .iter()
        .map(|&model| {
            let cells: Vec<LeaderboardCell> = cells.iter().filter(|c| c.model == model).cloned().collect();
            let ok: Vec<MetricsReport> = cells.iter().filter_map(|c| c.metrics).collect();
            let pick = |f: fn(&MetricsReport) -> f64| median(&ok.iter().map(f).collect::<Vec<_>>());
            let median = match (pick(|m| m.mse), pick(|m| m.mae), pick(|m| m.r2)) {
                (Some(mse), Some(mae), Some(r2)) => Some(MetricsReport { mse, mae, r2 }),
                _ => None,
            };
            LeaderboardEntry { model, median, failures: cells.len() - ok.len(), cells }
        })
        .collect();
    entries.sort_by(|a, b| {
        let key = |e: &LeaderboardEntry| e.median.map_or(f64::NEG_INFINITY, |m| m.r2);
        key(b).total_cmp(&key(a))
    });
    Ok(Leaderboard { seeds: seeds.to_vec(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn hand_metrics() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(m, MetricsReport { mse: 2.0 / 3.0, mae: 2.0 / 3.0, r2: 0.0 });
        let perfect = compute_metrics(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(perfect, MetricsReport { mse: 0.0, mae: 0.0, r2: 1.0 });
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert_eq!(compute_metrics(&[2.0, 2.0], &[2.0, 2.0]).unwrap().r2, 0.0);
        assert!(matches!(compute_metrics(&[2.0, 2.0], &[2.0, 3.0]), Err(Error::DegenerateTarget(_))));
        assert!(matches!(compute_metrics(&[1.0], &[1.0, 2.0]), Err(Error::InvalidArgument(_))));
        assert!(compute_metrics(&[], &[]).is_err());
    }

    #[test]
    fn mean_predictor_scores_zero_in_sample_and_negative_out_of_sample() {
        let train = [1.0, 4.0, 2.0, 7.0];
        let mean = train.iter().sum::<f64>() / 4.0;
        assert!(compute_metrics(&train, &[mean; 4]).unwrap().r2.abs() < 1e-15);
        let held_out = [10.0, 12.0, 11.0];
        assert!(compute_metrics(&held_out, &[mean; 3]).unwrap().r2 < 0.0);
    }

    #[test]
    fn quantile_matches_reference_normal() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.75) - 0.674_489_750_196_081_7).abs() < 1e-15);
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            assert!((normal_quantile(p) - normal.inverse_cdf(p)).abs() < 1e-9, "p = {p}");
        }
        for p in [1e-300, 1e-50, 1e-12, 1e-5, 0.02] {
            let z = normal_quantile(p);
            assert!(((normal.cdf(z) - p) / p).abs() < 1e-9, "p = {p}");
            assert!((normal_quantile(1.0 - p) + z).abs() < 1e-6 * z.abs() || p < 1e-15);
        }
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
        assert!(normal_quantile(1.5).is_nan());
    }

    #[test]
    fn qq_small_cases() {
        let two = qq_points(&[3.0, -1.0]).unwrap();
        assert!((two[0].0 + 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!((two[1].0 - 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!(two[0].1 < two[1].1);
        assert_eq!(qq_points(&[0.1, 0.5, 0.2]).unwrap()[1].0, 0.0);
        assert!(matches!(qq_points(&[1.0, 1.0, 1.0]), Err(Error::Degenerate(_))));
        assert!(qq_points(&[1.0]).is_err());
    }

    #[test]
    fn qq_of_a_ramp_is_nearly_linear() {
        let ramp: Vec<f64> = (0..50).map(|i| 0.3 * i as f64 - 4.0).collect();
        let qq = qq_points(&ramp).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = qq.into_iter().unzip();
        assert!(pearson(&xs, &ys) > 0.95);
    }

    #[test]
    fn correlation_cases() {
        let m = pearson_correlation_matrix(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(m[0][1], -1.0);
        assert_eq!(m[0][2], 0.0);
        assert_eq!(m[2][2], 1.0);
        assert!(pearson_correlation_matrix(&[vec![1.0], vec![2.0]]).is_err());
        assert!(pearson_correlation_matrix(&[vec![1.0, 2.0], vec![2.0]]).is_err());
    }

    #[test]
    fn alloy_constants_are_perfectly_correlated_in_the_embedded_data() {
        let rows = crate::dataset::embedded_dataset();
        let e: Vec<f64> = rows.rows().iter().map(|r| r.alloy_young_modulus).collect();
        let k: Vec<f64> = rows.rows().iter().map(|r| r.conductivity).collect();
        assert_eq!(pearson_correlation_matrix(&[e, k]).unwrap()[0][1], 1.0);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn metric_invariants(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..60)) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(m) = compute_metrics(&a, &p) {
                prop_assert!(m.mse >= 0.0 && m.mae >= 0.0 && m.r2 <= 1.0);
                prop_assert!(m.mae * m.mae <= m.mse * (1.0 + 1e-12));
            }
        }

        #[test]
        fn qq_abscissae_are_increasing_and_antisymmetric(res in prop::collection::vec(-50f64..50.0, 2..80)) {
            if let Ok(qq) = qq_points(&res) {
                let n = qq.len();
                for i in 0..n {
                    prop_assert!((qq[i].0 + qq[n - 1 - i].0).abs() < 1e-9);
                    if i + 1 < n {
                        prop_assert!(qq[i].0 < qq[i + 1].0);
                        prop_assert!(qq[i].1 <= qq[i + 1].1);
                    }
                }
            }
        }

        #[test]
        fn correlation_is_symmetric_with_unit_diagonal(
            cols in prop::collection::vec(prop::collection::vec(-10f64..10.0, 6), 1..6)
        ) {
            let m = pearson_correlation_matrix(&cols).unwrap();
            for i in 0..m.len() {
                prop_assert_eq!(m[i][i], 1.0);
                for j in 0..m.len() {
                    prop_assert_eq!(m[i][j], m[j][i]);
                    prop_assert!(m[i][j].abs() <= 1.0);
                }
            }
        }
    }
}
