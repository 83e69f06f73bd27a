//! Output files of a batch run: ledger CSV, campaign JSON, and two SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::campaign::{run_campaigns_each, CampaignResult};
use crate::config::{Overrides, RunConfig, RunManifest};
use crate::error::{Error, Result};
use crate::ledger::AccumulationLedger;

pub const CSV_FILE: &str = "ledgers.csv";
pub const JSON_FILE: &str = "campaign.json";
pub const ACCUMULATION_SVG: &str = "accumulation.svg";
pub const INCREMENTS_SVG: &str = "increments.svg";
pub const FAILED_FILE: &str = "FAILED";

pub const CSV_HEADER: &str = "contributor,span_index,inverse_snr_linear,inverse_snr_dB,increment_dB";

fn db_or_empty(x: f64) -> String {
    if x > 0.0 && x.is_finite() {
        format!("{}", 10.0 * x.log10())
    } else {
        String::new()
    }
}

/// One row per contributor and span. Contributors are prefixed with the
/// campaign label, e.g. `widespread-32g:gaussian/SPM`. Non-positive values
/// leave their dB cells empty.
pub fn ledger_csv(results: &[CampaignResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        for ledger in r.ledgers() {
            let inc = crate::ledger::increments(ledger);
            for (i, (&q, &d)) in ledger.values.iter().zip(&inc).enumerate() {
                let _ = writeln!(
                    out,
                    "{}/{},{},{:e},{},{}",
                    r.label,
                    ledger.contributor,
                    i + 1,
                    q,
                    db_or_empty(q),
                    db_or_empty(d)
                );
            }
        }
    }
    out
}

#[derive(Serialize)]
struct CampaignDocument<'a> {
    manifest: &'a RunManifest,
    results: &'a [CampaignResult],
}

/// The campaign results with the run manifest embedded; accepted by
/// [`crate::config::load_config`] to repeat the run.
pub fn campaign_json(manifest: &RunManifest, results: &[CampaignResult]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CampaignDocument { manifest, results })?)
}

/// A plotted series: label, stroke colour, dash pattern, points.
struct Series {
    label: String,
    color: &'static str,
    dash: Option<&'static str>,
    points: Vec<(f64, f64)>,
}

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 190.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel(out: &mut String, y0: f64, title: &str, y_label: &str, n_spans: usize, series: &[Series]) {
    let finite: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let step = nice_step(hi - lo);
    let lo = (lo / step).floor() * step;
    let hi = (hi / step).ceil() * step;
    let x_max = n_spans.max(2) as f64;
    let px = |x: f64| MARGIN_L + (x - 1.0) / (x_max - 1.0) * (PANEL_W - MARGIN_L - MARGIN_R + 120.0);
    let plot_right = px(x_max);
    let py = |y: f64| y0 + MARGIN_T + (hi - y) / (hi - lo) * (PANEL_H - MARGIN_T - MARGIN_B);
    let bottom = py(lo);

    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        (MARGIN_L + plot_right) / 2.0,
        y0 + 22.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        MARGIN_L,
        py(hi),
        plot_right - MARGIN_L,
        bottom - py(hi)
    );
    let mut t = lo;
    while t <= hi + step * 1e-6 {
        let y = py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_L,
            plot_right,
            MARGIN_L - 6.0,
            y + 4.0,
            format!("{:.1}", t)
        );
        t += step;
    }
    for i in 1..=n_spans {
        let x = px(i as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">span index</text>"#,
        (MARGIN_L + plot_right) / 2.0,
        bottom + 36.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        18.0,
        (py(hi) + bottom) / 2.0,
        18.0,
        (py(hi) + bottom) / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = s.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{}"/>"#, s.color);
        }
        let ly = py(hi) + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            plot_right + 12.0,
            plot_right + 36.0,
            s.color,
            plot_right + 42.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn provenance(out: &mut String, manifest: &RunManifest, what: &str) {
    let c = &manifest.config;
    let _ = writeln!(out, "<!-- nlilab {} : {what} -->", manifest.software_version);
    let _ = writeln!(
        out,
        "<!-- run `{}`{}: {} channels, {} GBaud, {} GHz spacing, {} dBm per channel, {} x {} km, {} symbols, seed {} -->",
        escape(&c.label),
        manifest.preset.as_deref().map(|p| format!(" (preset {p})")).unwrap_or_default(),
        c.channels.count,
        c.channels.symbol_rate_gbaud,
        c.channels.spacing_ghz,
        c.channels.power_dbm,
        c.link.n_spans,
        c.link.span.length_km,
        c.n_symbols,
        c.seed
    );
}

fn data_comment(out: &mut String, campaign: &str, series: &[Series]) {
    for s in series {
        let values: Vec<String> = s.points.iter().map(|p| format!("{}", p.1)).collect();
        let _ = writeln!(out, "<!-- data {}/{}: {} -->", escape(campaign), escape(&s.label), values.join(" "));
    }
}

fn svg_document(manifest: &RunManifest, what: &str, panels: Vec<(String, Vec<Series>)>, y_label: &str) -> String {
    let n_spans = manifest.config.link.n_spans;
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}">"#
    );
    provenance(&mut out, manifest, what);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, (title, series)) in panels.iter().enumerate() {
        data_comment(&mut out, title, series);
        panel(&mut out, PANEL_H * k as f64, title, y_label, n_spans, series);
    }
    out.push_str("</svg>\n");
    out
}

fn snr_series(label: &str, color: &'static str, dash: Option<&'static str>, l: &AccumulationLedger) -> Series {
    Series {
        label: label.into(),
        color,
        dash,
        points: l
            .values
            .iter()
            .enumerate()
            .map(|(i, &q)| ((i + 1) as f64, -10.0 * q.log10()))
            .collect(),
    }
}

fn increment_series(label: &str, color: &'static str, dash: Option<&'static str>, l: &AccumulationLedger) -> Series {
    Series {
        label: label.into(),
        color,
        dash,
        points: crate::ledger::increments(l)
            .iter()
            .enumerate()
            .map(|(i, &d)| ((i + 1) as f64, 10.0 * d.log10()))
            .collect(),
    }
}

/// Nonlinear SNR accumulation per campaign: full spectrum against the
/// pump-and-probe superposition, with SPM, total XPM and the closed-form XPM.
pub fn accumulation_svg(manifest: &RunManifest, results: &[CampaignResult]) -> String {
    let panels = results
        .iter()
        .map(|r| {
            let series = vec![
                snr_series("full spectrum", "#1f4e9c", None, &r.full_spectrum),
                snr_series("superposition", "#d62728", Some("6 4"), &r.superposition),
                snr_series("SPM", "#2ca02c", None, &r.probe_only),
                snr_series("XPM total", "#9467bd", None, &r.xpm_total),
                snr_series("analytic XPM", "#7f7f7f", Some("2 3"), &r.analytic_total),
            ];
            (r.label.clone(), series)
        })
        .collect();
    svg_document(manifest, "nonlinear SNR accumulation", panels, "SNR_NL [dB]")
}

/// Span-by-span increments of the inverse nonlinear SNR, in dB.
pub fn increments_svg(manifest: &RunManifest, results: &[CampaignResult]) -> String {
    let panels = results
        .iter()
        .map(|r| {
            let series = vec![
                increment_series("superposition", "#d62728", None, &r.superposition),
                increment_series("SPM", "#2ca02c", None, &r.probe_only),
                increment_series("XPM total", "#9467bd", None, &r.xpm_total),
                increment_series("analytic XPM", "#7f7f7f", Some("2 3"), &r.analytic_total),
            ];
            (r.label.clone(), series)
        })
        .collect();
    svg_document(manifest, "per-span inverse SNR increments", panels, "increment [dB]")
}

/// A batch run request, as assembled by the command line.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub config: RunConfig,
    pub preset: Option<String>,
    pub overrides: Overrides,
    pub jobs: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub results: Vec<CampaignResult>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct FailureReport<'a> {
    status: &'static str,
    kind: &'static str,
    exit_code: i32,
    message: String,
    completed_campaigns: Vec<&'a str>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Runs every campaign of a configuration and writes the four output files.
///
/// If any campaign fails, results of the others are still written and a
/// `FAILED` file describing the error is left beside them.
pub fn execute(req: &RunRequest) -> Result<RunReport> {
    let campaigns = req.config.campaigns()?;
    let mut manifest = RunManifest::new(&req.config, req.preset.clone(), req.overrides.clone(), req.jobs)?;
    std::fs::create_dir_all(&req.out_dir).map_err(|e| Error::io(&req.out_dir, e))?;
    let failed_path = req.out_dir.join(FAILED_FILE);
    if failed_path.exists() {
        std::fs::remove_file(&failed_path).map_err(|e| Error::io(&failed_path, e))?;
    }

    let start = Instant::now();
    let outcome = run_campaigns_each(&campaigns, req.jobs);
    let mut results = Vec::new();
    let mut failure = None;
    match outcome {
        Ok(each) => {
            for r in each {
                match r {
                    Ok(r) => results.push(r),
                    Err(e) if failure.is_none() => failure = Some(e),
                    Err(e) => log::error!("{e}"),
                }
            }
        }
        Err(e) => failure = Some(e),
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.status = if failure.is_some() { "failed" } else { "complete" }.into();
    manifest.outputs = [CSV_FILE, JSON_FILE, ACCUMULATION_SVG, INCREMENTS_SVG]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if failure.is_some() {
        manifest.outputs.push(FAILED_FILE.into());
    }

    let mut files = vec![
        write_file(&req.out_dir, CSV_FILE, &ledger_csv(&results))?,
        write_file(&req.out_dir, JSON_FILE, &campaign_json(&manifest, &results)?)?,
        write_file(&req.out_dir, ACCUMULATION_SVG, &accumulation_svg(&manifest, &results))?,
        write_file(&req.out_dir, INCREMENTS_SVG, &increments_svg(&manifest, &results))?,
    ];
    if let Some(err) = failure {
        let report = FailureReport {
            status: "FAILED",
            kind: err.kind(),
            exit_code: err.exit_code(),
            message: err.to_string(),
            completed_campaigns: results.iter().map(|r| r.label.as_str()).collect(),
        };
        files.push(write_file(&req.out_dir, FAILED_FILE, &serde_json::to_string_pretty(&report)?)?);
        return Err(err);
    }
    Ok(RunReport { manifest, results, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Contributor;

    fn fake_result() -> CampaignResult {
        let l = |c, v: &[f64]| AccumulationLedger::new(c, v.to_vec());
        let spm = l(Contributor::Spm, &[1e-5, 3e-5, 6e-5]);
        let xpm = l(Contributor::Xpm(1), &[2e-5, 4e-5, 6e-5]);
        let mut r = CampaignResult {
            label: "t:pm-qpsk".into(),
            full_spectrum: l(Contributor::Total, &[3.1e-5, 7.2e-5, 1.2e-4]),
            probe_only: spm,
            pump_probe: vec![l(Contributor::PumpProbe(1), &[3e-5, 7e-5, 1.2e-4])],
            xpm: vec![xpm.clone()],
            xpm_total: l(Contributor::XpmTotal, &[2e-5, 4e-5, 6e-5]),
            superposition: l(Contributor::Superposition, &[3e-5, 7e-5, 1.2e-4]),
            analytic_xpm: vec![l(Contributor::AnalyticXpm(1), &[2e-5, 4e-5, 6e-5])],
            analytic_total: l(Contributor::AnalyticXpmTotal, &[2e-5, 4e-5, 6e-5]),
            increments: Default::default(),
            dominance_crossing: None,
            coherence_exponent: None,
            coherence_exponent_xpm: None,
            diagnostics: vec![],
        };
        r.xpm_total.values[0] = 0.0;
        r
    }

    #[test]
    fn csv_rows_and_db_columns() {
        let csv = ledger_csv(&[fake_result()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 8 * 3);
        assert_eq!(rows[0][0], "t:pm-qpsk/total");
        for r in &rows {
            let q: f64 = r[2].parse().unwrap();
            if q > 0.0 {
                let db: f64 = r[3].parse().unwrap();
                assert!((db - 10.0 * q.log10()).abs() < 1e-9);
            } else {
                assert_eq!(r[3], "");
            }
        }
    }

    #[test]
    fn svg_is_self_contained() {
        let cfg = RunConfig::preset("widespread-32g").unwrap();
        let m = RunManifest::new(&cfg, Some("widespread-32g".into()), Overrides::default(), 1).unwrap();
        let svg = accumulation_svg(&m, &[fake_result()]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<!-- data t:pm-qpsk/superposition:"));
        assert!(!svg.contains("NaN"));
        let inc = increments_svg(&m, &[fake_result()]);
        assert!(inc.contains("polyline"));
    }
}
