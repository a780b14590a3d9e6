use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    sel, success_rate, Bucket, EntropyHistogram, EpisodeRecord, EvalError, RobustnessPoint, SweepResult, HIST_BINS,
};
use crate::gate::token_accounting;

pub const STRATEGY_CSV_HEADER: &str = "strategy,episodes,sr,sel,tokens_per_episode,tokens_per_step,thinking_ratio";

/// One row of the strategy comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub sel: f64,
    pub tokens_per_episode: f64,
    pub tokens_per_step: f64,
    pub thinking_ratio: f64,
}

impl StrategySummary {
    pub fn from_records(strategy: &str, records: &[EpisodeRecord]) -> Result<Self, EvalError> {
        let n = records.len() as f64;
        let acc: Vec<(u64, f64, f64)> = records.iter().map(token_accounting).collect();
        Ok(Self {
            strategy: strategy.to_string(),
            episodes: records.len(),
            success_rate: success_rate(records)?,
            sel: sel(records)?,
            tokens_per_episode: acc.iter().map(|a| a.0 as f64).sum::<f64>() / n,
            tokens_per_step: acc.iter().map(|a| a.1).sum::<f64>() / n,
            thinking_ratio: acc.iter().map(|a| a.2).sum::<f64>() / n,
        })
    }
}

/// Everything `emit_report` can write; absent parts are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub strategies: Vec<StrategySummary>,
    pub records: Vec<EpisodeRecord>,
    pub histogram: Option<EntropyHistogram>,
    pub sweep: Option<SweepResult>,
    pub pass_at_k: Vec<(usize, f64)>,
    pub strata: Option<[Bucket; 3]>,
    pub robustness: Vec<RobustnessPoint>,
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// Writes CSV tables, JSONL records and SVG plots into `out_dir`. Returns the
/// files written, in order. Output is a pure function of `report`.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), EvalError> {
        let p = out_dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };

    let mut csv = format!("{STRATEGY_CSV_HEADER}\n");
    for s in &report.strategies {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.strategy,
            s.episodes,
            f(s.success_rate),
            f(s.sel),
            f(s.tokens_per_episode),
            f(s.tokens_per_step),
            f(s.thinking_ratio)
        );
    }
    put("strategies.csv", csv)?;

    if !report.records.is_empty() {
        let mut jsonl = String::new();
        for r in &report.records {
            jsonl.push_str(&serde_json::to_string(r).map_err(|e| EvalError::Invalid(e.to_string()))?);
            jsonl.push('\n');
        }
        put("records.jsonl", jsonl)?;
    }

    if let Some(h) = &report.histogram {
        let mut csv = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                f(i as f64 / HIST_BINS as f64),
                f((i + 1) as f64 / HIST_BINS as f64),
                c
            );
        }
        put("entropy_hist.csv", csv)?;
        let labels: Vec<String> = (0..HIST_BINS)
            .map(|i| format!("{:.2}", i as f64 / HIST_BINS as f64))
            .collect();
        let vals: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
        put(
            "entropy_hist.svg",
            bar_chart("Normalized action entropy", &labels, &vals),
        )?;
    }

    if let Some(s) = &report.sweep {
        let mut csv = String::from("tau,tau_nats,mean_q,tokens_per_step,sr,episodes\n");
        for i in 0..s.thresholds.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                f(s.thresholds[i]),
                f(s.thresholds_raw[i]),
                f(s.mean_q[i]),
                f(s.mean_tokens_per_step[i]),
                f(s.success_rate[i]),
                s.episodes[i]
            );
        }
        put("q_sweep.csv", csv)?;
        put(
            "q_sweep.svg",
            line_chart("Mean Q vs threshold", &s.thresholds, &s.mean_q),
        )?;
    }

    if !report.pass_at_k.is_empty() {
        let mut csv = String::from("k,pass_at_k\n");
        for (k, v) in &report.pass_at_k {
            let _ = writeln!(csv, "{},{}", k, f(*v));
        }
        put("pass_at_k.csv", csv)?;
        let xs: Vec<f64> = report.pass_at_k.iter().map(|(k, _)| *k as f64).collect();
        let ys: Vec<f64> = report.pass_at_k.iter().map(|(_, v)| *v).collect();
        put("pass_at_k.svg", line_chart("Pass@k", &xs, &ys))?;
    }

    if let Some(strata) = &report.strata {
        let mut csv = String::from("bucket,count,sr,thinking_ratio\n");
        for b in strata {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                b.name,
                b.count,
                opt(b.success_rate),
                opt(b.thinking_ratio)
            );
        }
        put("strata.csv", csv)?;
        let labels: Vec<String> = strata.iter().map(|b| b.name.clone()).collect();
        let vals: Vec<f64> = strata.iter().map(|b| b.success_rate.unwrap_or(0.0)).collect();
        put("strata.svg", bar_chart("Success rate by difficulty", &labels, &vals))?;
    }

    if !report.robustness.is_empty() {
        let mut csv = String::from("p_drop,p_mislabel,sr,sel,episodes\n");
        for p in &report.robustness {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                f(p.p_drop),
                f(p.p_mislabel),
                f(p.success_rate),
                f(p.sel),
                p.episodes
            );
        }
        put("robustness.csv", csv)?;
    }
    Ok(written)
}

const W: f64 = 480.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn svg_open(title: &str, table: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <desc>{table}</desc>\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n",
        W / 2.0,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    )
}

fn y_range(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().cloned().fold(0.0f64, f64::min);
    let hi = vals.iter().cloned().fold(lo + 1e-9, f64::max);
    (lo, hi)
}

fn bar_chart(title: &str, labels: &[String], vals: &[f64]) -> String {
    let table: Vec<String> = labels.iter().zip(vals).map(|(l, v)| format!("{l}={}", f(*v))).collect();
    let mut s = svg_open(title, &table.join(";"));
    let (lo, hi) = y_range(vals);
    let n = vals.len().max(1) as f64;
    let bw = (W - 2.0 * PAD) / n;
    for (i, v) in vals.iter().enumerate() {
        let h = (v - lo) / (hi - lo) * (H - 2.0 * PAD);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4a78b5\"/>",
            PAD + i as f64 * bw + 1.0,
            H - PAD - h,
            (bw - 2.0).max(1.0),
            h
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"middle\">{}</text>",
            PAD + (i as f64 + 0.5) * bw,
            H - PAD + 12.0,
            labels[i]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn line_chart(title: &str, xs: &[f64], ys: &[f64]) -> String {
    let table: Vec<String> = xs.iter().zip(ys).map(|(x, y)| format!("{}={}", f(*x), f(*y))).collect();
    let mut s = svg_open(title, &table.join(";"));
    let (ylo, yhi) = y_range(ys);
    let (xlo, xhi) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| PAD + if xhi > xlo { (x - xlo) / (xhi - xlo) } else { 0.5 } * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ylo) / (yhi - ylo) * (H - 2.0 * PAD);
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>",
        pts.join(" ")
    );
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#c0392b\"/>",
            sx(*x),
            sy(*y)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">{}</text>",
            sx(*x),
            H - PAD + 12.0,
            x
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&Report::default(), dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(
            fs::read_to_string(&files[0]).unwrap(),
            format!("{STRATEGY_CSV_HEADER}\n")
        );
    }

    #[test]
    fn unwritable_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(emit_report(&Report::default(), &blocker.join("sub")).is_err());
    }
}
