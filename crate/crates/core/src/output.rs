//! CSV and SVG emission.
//!
//! Every file is first written to a temporary file in the target directory
//! and only renamed into place once all files of the batch were staged, so a
//! failure leaves no partial outputs. Reals are written with 17 significant
//! digits; arms are numbered from 1.
//!
//! | file                 | columns |
//! |----------------------|---------|
//! | `summary.csv`        | name, algorithm, model, environment, eta, horizon, repetitions, seed, mean_total_reward, stderr_total_reward, final_avg_regret, final_avg_regret_stderr |
//! | `<name>.trace.csv`   | step, mean_avg_regret, stderr |
//! | `<name>.arms.csv`    | arm, mean_play_count, learnt_probability, explored_flag |
//! | `verification.csv`   | check, model, samples, worst_margin, status |
//! | `regret.svg`         | optional plot of every trace |
//!
//! `learnt_probability` is `NA` for an arm no repetition played.

use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::Result;
use crate::harness::{AggregateResult, Algorithm};
use crate::verify::VerificationReport;

/// 17 significant digits, round-trippable.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

struct Staged {
    dir: PathBuf,
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Staged {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn add(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        self.files.push((tmp, self.dir.join(name)));
        Ok(())
    }

    /// Dropping an uncommitted batch deletes its temporaries.
    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (tmp, path) in self.files {
            tmp.persist(&path).map_err(|e| e.error)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| io::Error::other(e.to_string());
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(&row).map_err(to_io)?;
    }
    w.into_inner()
        .map_err(|e| io::Error::other(e.to_string()).into())
}

/// File-name-safe form of an experiment name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn algorithm_label(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Experts => "experts",
        Algorithm::Bandit => "bandit",
    }
}

pub fn summary_csv(results: &[AggregateResult]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "name",
            "algorithm",
            "model",
            "environment",
            "eta",
            "horizon",
            "repetitions",
            "seed",
            "mean_total_reward",
            "stderr_total_reward",
            "final_avg_regret",
            "final_avg_regret_stderr",
        ],
        results.iter().map(|r| {
            vec![
                r.name.clone(),
                algorithm_label(r.algorithm).into(),
                r.model.clone(),
                r.environment.clone(),
                real(r.eta),
                r.horizon.to_string(),
                r.repetitions.to_string(),
                r.seed.to_string(),
                real(r.mean_total_reward),
                real(r.stderr_total_reward),
                real(r.final_avg_regret()),
                real(r.final_avg_regret_stderr()),
            ]
        }),
    )
}

pub fn trace_csv(result: &AggregateResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["step", "mean_avg_regret", "stderr"],
        result
            .checkpoints
            .iter()
            .zip(&result.regret_mean)
            .zip(&result.regret_stderr)
            .map(|((c, m), s)| vec![c.to_string(), real(*m), real(*s)]),
    )
}

pub fn arms_csv(result: &AggregateResult) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "arm",
            "mean_play_count",
            "learnt_probability",
            "explored_flag",
        ],
        result.arms.iter().enumerate().map(|(i, a)| {
            vec![
                (i + 1).to_string(),
                real(a.mean_plays),
                a.learnt_probability.map_or_else(|| "NA".into(), real),
                a.explored.to_string(),
            ]
        }),
    )
}

pub fn verification_csv(report: &VerificationReport) -> Result<Vec<u8>> {
    csv_bytes(
        &["check", "model", "samples", "worst_margin", "status"],
        report.entries.iter().map(|e| {
            vec![
                e.name.clone(),
                e.model.clone(),
                e.samples.clone(),
                real(e.worst_margin),
                e.status.to_string(),
            ]
        }),
    )
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Average-regret curves on a logarithmic step axis.
pub fn regret_svg(results: &[AggregateResult]) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 420.0, 70.0, 20.0, 20.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let t_max = results.iter().map(|r| r.horizon).max().unwrap_or(1).max(2) as f64;
    let y_max = results
        .iter()
        .flat_map(|r| r.regret_mean.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let y_min = results
        .iter()
        .flat_map(|r| r.regret_mean.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::min);
    let sx = |step: f64| left + plot_w * step.log10() / t_max.log10();
    let sy = |v: f64| top + plot_h * (y_max - v) / (y_max - y_min);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    );
    let mut decade = 1.0;
    while decade <= t_max {
        let x = sx(decade);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{0}" x2="{x:.2}" y2="{1}" stroke="black"/><text x="{x:.2}" y="{2}" text-anchor="middle">{decade}</text>"#,
            top + plot_h,
            top + plot_h + 5.0,
            top + plot_h + 20.0
        );
        decade *= 10.0;
    }
    for k in 0..=4 {
        let v = y_min + (y_max - y_min) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{1}" y="{2:.2}" text-anchor="end">{v:.3}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{0}" y="{1}" text-anchor="middle">step</text>"#,
        left + plot_w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">average regret</text>"#,
        top + plot_h / 2.0
    );
    for (k, r) in results.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = r
            .checkpoints
            .iter()
            .zip(&r.regret_mean)
            .filter(|(_, v)| v.is_finite())
            .map(|(&c, &v)| format!("{:.2},{:.2}", sx(c as f64), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = top + 16.0 * (k as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="{colour}" stroke-width="2"/><text x="{3}" y="{4:.2}">{5}</text>"#,
            w - right - 200.0,
            ly - 4.0,
            w - right - 180.0,
            w - right - 175.0,
            ly,
            xml_escape(&r.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes the summary, per-experiment trace and arm tables, and optionally
/// the regret plot, into `dir`. Returns the paths written.
pub fn emit_outputs(results: &[AggregateResult], dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    let mut staged = Staged::new(dir)?;
    staged.add("summary.csv", &summary_csv(results)?)?;
    for r in results {
        let stem = file_stem(&r.name);
        staged.add(&format!("{stem}.trace.csv"), &trace_csv(r)?)?;
        if !r.arms.is_empty() {
            staged.add(&format!("{stem}.arms.csv"), &arms_csv(r)?)?;
        }
    }
    if plot {
        staged.add("regret.svg", regret_svg(results).as_bytes())?;
    }
    staged.commit()
}

pub fn emit_verification(report: &VerificationReport, dir: &Path) -> Result<PathBuf> {
    let mut staged = Staged::new(dir)?;
    staged.add("verification.csv", &verification_csv(report)?)?;
    Ok(staged.commit()?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ArmSummary;

    fn sample() -> AggregateResult {
        AggregateResult {
            name: "env1/nl".into(),
            model: "NL(mu=1; {1,3}:0.05; {2,4}:0.1)".into(),
            environment: "bernoulli".into(),
            algorithm: Algorithm::Bandit,
            eta: 1.0,
            horizon: 10,
            repetitions: 2,
            seed: 3,
            totals: vec![7.0, 8.0],
            mean_total_reward: 7.5,
            stderr_total_reward: 0.5,
            checkpoints: vec![1, 10],
            regret_mean: vec![0.5, 0.1],
            regret_stderr: vec![0.1, 0.01],
            arms: vec![
                ArmSummary {
                    mean_plays: 10.0,
                    learnt_probability: Some(0.75),
                    learnt_stderr: Some(0.0),
                    explored_reps: 2,
                    explored: true,
                },
                ArmSummary {
                    mean_plays: 0.0,
                    learnt_probability: None,
                    learnt_stderr: None,
                    explored_reps: 0,
                    explored: false,
                },
            ],
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(7962.24).parse::<f64>().unwrap(), 7962.24);
    }

    #[test]
    fn table_layouts() {
        let r = sample();
        let arms = String::from_utf8(arms_csv(&r).unwrap()).unwrap();
        assert_eq!(
            arms,
            "arm,mean_play_count,learnt_probability,explored_flag\n\
             1,1.0000000000000000e1,7.5000000000000000e-1,true\n\
             2,0.0000000000000000e0,NA,false\n"
        );
        let trace = String::from_utf8(trace_csv(&r).unwrap()).unwrap();
        assert!(trace.starts_with("step,mean_avg_regret,stderr\n1,5.0000000000000000e-1,"));
        let summary = String::from_utf8(summary_csv(&[r]).unwrap()).unwrap();
        assert!(summary.contains("\"NL(mu=1; {1,3}:0.05; {2,4}:0.1)\""));
        assert_eq!(summary.lines().count(), 2);
    }

    #[test]
    fn writes_all_files_and_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let written = emit_outputs(&[sample()], dir.path(), true).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            [
                "env1_nl.arms.csv",
                "env1_nl.trace.csv",
                "regret.svg",
                "summary.csv"
            ]
        );
        assert_eq!(written.len(), 4);
        let svg = std::fs::read_to_string(dir.path().join("regret.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn unwritable_target_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = emit_outputs(&[sample()], &blocker.join("sub"), false);
        assert!(err.is_err());
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
