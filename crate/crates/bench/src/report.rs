//! Benchmark reports, the synthetic cost model, side-by-side comparison and
//! rendering as CSV, JSON or Markdown.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use resa_core::histogram::LatencyHistogram;
use serde::{Deserialize, Serialize};

use crate::resources::ResourceReport;
use crate::LoadProfile;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn of(h: &LatencyHistogram) -> Self {
        LatencySummary {
            mean_ms: h.mean().unwrap_or(0.0),
            p50_ms: h.percentile(50.0).unwrap_or(0.0),
            p95_ms: h.percentile(95.0).unwrap_or(0.0),
            p99_ms: h.percentile(99.0).unwrap_or(0.0),
            max_ms: h.max().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EndpointReport {
    /// Responses received in the window, errors included.
    pub count: u64,
    pub errors: u64,
    pub latency: LatencySummary,
}

/// Prices of the synthetic cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub cpu_price_per_cpu_hour: f64,
    pub mem_price_per_gb_hour: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            cpu_price_per_cpu_hour: 0.04048,
            mem_price_per_gb_hour: 0.004445,
        }
    }
}

impl CostModel {
    pub fn cost(&self, cpu_seconds: f64, gb_seconds: f64) -> f64 {
        (cpu_seconds * self.cpu_price_per_cpu_hour + gb_seconds * self.mem_price_per_gb_hour) / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostReport {
    pub model: CostModel,
    pub total: f64,
    /// `total / completed`; 0 when nothing completed.
    pub per_request: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Deployment mode as reported by the target, if it says.
    pub mode: Option<String>,
    pub target: String,
    pub profile: LoadProfile,
    /// Length of the measurement window in seconds.
    pub window_s: f64,
    /// Non-error responses completed in the window.
    pub completed: u64,
    /// Transport failures and responses with status >= 500.
    pub errors: u64,
    pub error_rate: f64,
    /// `completed / window_s`.
    pub throughput: f64,
    pub latency: LatencySummary,
    pub histogram: LatencyHistogram,
    pub endpoints: BTreeMap<String, EndpointReport>,
    pub status_counts: BTreeMap<String, u64>,
    pub resources: ResourceReport,
    pub cost: CostReport,
}

impl BenchReport {
    /// Σ per-endpoint counts; equals `completed + errors`.
    pub fn total_responses(&self) -> u64 {
        self.endpoints.values().map(|e| e.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub unit: String,
    pub baseline: f64,
    pub optimized: f64,
    /// `optimized / baseline`; absent when the baseline is 0.
    pub ratio: Option<f64>,
}

impl ComparisonRow {
    pub fn new(metric: &str, unit: &str, baseline: f64, optimized: f64) -> Self {
        ComparisonRow {
            metric: metric.into(),
            unit: unit.into(),
            baseline,
            optimized,
            ratio: ratio(optimized, baseline),
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline_label: String,
    pub optimized_label: String,
    pub rows: Vec<ComparisonRow>,
    /// Throughput ratio, optimized over baseline.
    pub speedup: Option<f64>,
    /// Mean latency ratio, optimized over baseline.
    pub latency_ratio: Option<f64>,
    pub cpu_percent_delta: f64,
    pub memory_mb_delta: f64,
    pub cost_delta: f64,
    pub cost_per_request_ratio: Option<f64>,
    /// The two runs used different load profiles (seed aside).
    pub profile_mismatch: bool,
}

impl Comparison {
    pub fn empty(baseline_label: &str, optimized_label: &str) -> Self {
        Comparison {
            baseline_label: baseline_label.into(),
            optimized_label: optimized_label.into(),
            rows: Vec::new(),
            speedup: None,
            latency_ratio: None,
            cpu_percent_delta: 0.0,
            memory_mb_delta: 0.0,
            cost_delta: 0.0,
            cost_per_request_ratio: None,
            profile_mismatch: false,
        }
    }
}

fn label(r: &BenchReport, fallback: &str) -> String {
    r.mode.clone().unwrap_or_else(|| fallback.to_owned())
}

/// Side-by-side metrics of a baseline run `a` and a candidate run `b`.
pub fn compare_reports(a: &BenchReport, b: &BenchReport) -> Comparison {
    let mb = |r: &BenchReport| r.resources.mean_rss_bytes / 1e6;
    let rows = vec![
        ComparisonRow::new("Average Response Time", "ms", a.latency.mean_ms, b.latency.mean_ms),
        ComparisonRow::new("Throughput", "req/s", a.throughput, b.throughput),
        ComparisonRow::new("CPU Usage", "%", a.resources.mean_cpu_percent, b.resources.mean_cpu_percent),
        ComparisonRow::new("Memory Usage", "MB", mb(a), mb(b)),
    ];
    let mut pa = a.profile.clone();
    let mut pb = b.profile.clone();
    pa.seed = 0;
    pb.seed = 0;
    Comparison {
        baseline_label: label(a, "baseline"),
        optimized_label: label(b, "optimized"),
        speedup: ratio(b.throughput, a.throughput),
        latency_ratio: ratio(b.latency.mean_ms, a.latency.mean_ms),
        cpu_percent_delta: b.resources.mean_cpu_percent - a.resources.mean_cpu_percent,
        memory_mb_delta: mb(b) - mb(a),
        cost_delta: b.cost.total - a.cost.total,
        cost_per_request_ratio: ratio(b.cost.per_request, a.cost.per_request),
        profile_mismatch: pa != pb,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format {other:?} (expected csv, json or markdown)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "markdown",
        })
    }
}

/// Number formatting shared by the CSV and Markdown renderings.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map(fmt_value).unwrap_or_default()
}



/// Renders the metric rows: one line per row plus a header.
pub fn render_report(c: &Comparison, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(c).expect("serializable") + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "metric".to_owned(),
                "unit".to_owned(),
                c.baseline_label.clone(),
                c.optimized_label.clone(),
                "ratio".to_owned(),
            ])
            .expect("in-memory write");
            for r in &c.rows {
                w.write_record([r.metric.clone(), r.unit.clone(), fmt_value(r.baseline), fmt_value(r.optimized), fmt_ratio(r.ratio)])
                    .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        Format::Markdown => {
            let mut s = format!(
                "| Metric | Unit | {} | {} | Ratio |\n|---|---|---:|---:|---:|\n",
                c.baseline_label, c.optimized_label
            );
            for r in &c.rows {
                s.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    r.metric,
                    r.unit,
                    fmt_value(r.baseline),
                    fmt_value(r.optimized),
                    fmt_ratio(r.ratio)
                ));
            }
            s
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn report(throughput: f64, mean_ms: f64) -> BenchReport {
        BenchReport {
            mode: None,
            target: "http://x".into(),
            profile: LoadProfile::default(),
            window_s: 10.0,
            completed: (throughput * 10.0) as u64,
            errors: 0,
            error_rate: 0.0,
            throughput,
            latency: LatencySummary {
                mean_ms,
                ..Default::default()
            },
            histogram: LatencyHistogram::new(),
            endpoints: BTreeMap::new(),
            status_counts: BTreeMap::new(),
            resources: ResourceReport {
                mean_cpu_percent: 65.0,
                mean_rss_bytes: 512e6,
                ..Default::default()
            },
            cost: CostReport::default(),
        }
    }

    #[test]
    fn table_shaped_ratios() {
        let c = compare_reports(&report(150.0, 2300.0), &report(300.0, 1100.0));
        assert_eq!(c.speedup, Some(2.0));
        assert!((c.latency_ratio.unwrap() - 0.478).abs() < 1e-3);
        assert_eq!(c.rows.len(), 4);
        assert_eq!(c.rows[1].ratio, Some(2.0));
        assert!(!c.profile_mismatch);
    }

    #[test]
    fn identical_reports_have_unit_ratios() {
        let r = report(123.0, 45.0);
        let c = compare_reports(&r, &r);
        assert!(c.rows.iter().all(|row| row.ratio == Some(1.0)));
        assert_eq!(c.cpu_percent_delta, 0.0);
    }

    #[test]
    fn zero_baseline_has_no_ratio_and_mismatch_is_flagged() {
        let a = report(0.0, 0.0);
        let mut b = report(10.0, 5.0);
        b.profile.concurrency += 1;
        let c = compare_reports(&a, &b);
        assert_eq!(c.speedup, None);
        assert!(c.profile_mismatch);
        let mut b = report(10.0, 5.0);
        b.profile.seed = 99;
        assert!(!compare_reports(&a, &b).profile_mismatch);
    }

    #[test]
    fn renderings_agree() {
        let c = compare_reports(&report(150.0, 2300.0), &report(300.0, 1100.0));
        let csv_doc = render_report(&c, Format::Csv);
        let md = render_report(&c, Format::Markdown);
        let json: Comparison = serde_json::from_str(&render_report(&c, Format::Json)).unwrap();
        assert_eq!(json, c);
        assert_eq!(csv_doc.lines().count(), 5);
        assert_eq!(md.lines().count(), 6);
        let mut rd = csv::Reader::from_reader(csv_doc.as_bytes());
        for (rec, row) in rd.records().zip(&c.rows) {
            let rec = rec.unwrap();
            let md_line = md.lines().find(|l| l.starts_with(&format!("| {} |", row.metric))).unwrap();
            let cells: Vec<&str> = md_line.trim_matches('|').split('|').map(str::trim).collect();
            assert_eq!(cells, rec.iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn empty_comparison_is_header_only() {
        let c = Comparison::empty("a", "b");
        assert_eq!(render_report(&c, Format::Csv), "metric,unit,a,b,ratio\n");
        assert_eq!(render_report(&c, Format::Markdown).lines().count(), 2);
        assert!("xml".parse::<Format>().is_err());
    }

    #[test]
    fn cost_model_arithmetic() {
        let m = CostModel::default();
        assert!((m.cost(3600.0, 0.0) - 0.04048).abs() < 1e-12);
        assert!((m.cost(0.0, 3600.0) - 0.004445).abs() < 1e-12);
    }
}
