//! Figure data and SVG views.
//!
//! Every emitter computes rows once, writes them to CSV, and renders the SVG
//! from the same rows. Each plotted SVG element carries `data-*` attributes
//! holding exactly the numbers in the CSV. Standard deviations across seeds
//! use the sample (n - 1) convention and are 0 for a single seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{write_csv_with_notes, RunRecord};
use crate::env::EpisodeRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub notes: Vec<String>,
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trailing mean over the last `window` stable episodes at or before each
/// episode index. Unstable or non-finite episodes are dropped before
/// windowing; `None` until the first stable episode.
pub fn rolling_stable_mean(episodes: &[EpisodeRow], window: usize) -> Vec<Option<f64>> {
    let mut stable: Vec<f64> = Vec::new();
    episodes
        .iter()
        .map(|row| {
            if !row.unstable && row.episode_return.is_finite() {
                stable.push(row.episode_return);
            }
            if stable.is_empty() {
                return None;
            }
            let tail = &stable[stable.len().saturating_sub(window)..];
            Some(tail.iter().sum::<f64>() / tail.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_adaptive: Option<f64>,
    pub std_adaptive: Option<f64>,
    pub mean_nonadaptive: Option<f64>,
    pub std_nonadaptive: Option<f64>,
}

fn across_seeds(per_seed: &[Vec<Option<f64>>], episode: usize) -> Option<(f64, f64)> {
    let xs: Vec<f64> = per_seed.iter().filter_map(|s| s.get(episode).copied().flatten()).collect();
    if xs.is_empty() {
        None
    } else {
        Some(mean_and_std(&xs))
    }
}

/// Rolling-mean reward curves for one target, both arms.
pub fn reward_curves(records: &[&RunRecord], window: usize) -> (Vec<CurveRow>, Vec<String>) {
    let mut notes = Vec::new();
    let longest = records.iter().map(|r| r.episodes.len()).max().unwrap_or(0);
    let mut window = window.max(1);
    if window > longest && longest > 0 {
        notes.push(format!("window {window} exceeds the history length; shrunk to {longest}"));
        window = longest;
    }
    let arm = |adaptive: bool| -> Vec<Vec<Option<f64>>> {
        records
            .iter()
            .filter(|r| r.meta.adaptation == adaptive)
            .map(|r| rolling_stable_mean(&r.episodes, window))
            .collect()
    };
    let (on, off) = (arm(true), arm(false));
    for (series, name) in [(&on, "adaptive"), (&off, "non-adaptive")] {
        if series.is_empty() {
            notes.push(format!("no {name} runs; series omitted"));
        }
    }
    let rows = (0..longest)
        .filter_map(|e| {
            let a = across_seeds(&on, e);
            let b = across_seeds(&off, e);
            if a.is_none() && b.is_none() {
                return None;
            }
            Some(CurveRow {
                episode: e,
                mean_adaptive: a.map(|x| x.0),
                std_adaptive: a.map(|x| x.1),
                mean_nonadaptive: b.map(|x| x.0),
                std_nonadaptive: b.map(|x| x.1),
            })
        })
        .collect();
    (rows, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarRow {
    pub target_index: usize,
    pub adaptation: bool,
    pub n_seeds: usize,
    pub mean_max_return: f64,
    pub std_max_return: f64,
}

/// Largest finite episode return of a run.
pub fn max_return(record: &RunRecord) -> Option<f64> {
    record.episodes.iter().map(|e| e.episode_return).filter(|r| r.is_finite()).reduce(f64::max)
}

/// Per (target, arm): maximum episode return of each seed, then mean and std.
pub fn max_reward_bars(records: &[&RunRecord]) -> (Vec<BarRow>, Vec<String>) {
    let mut groups: BTreeMap<(usize, bool), Vec<f64>> = BTreeMap::new();
    let mut targets: Vec<usize> = Vec::new();
    for r in records {
        targets.push(r.meta.target_index);
        if let Some(m) = max_return(r) {
            groups.entry((r.meta.target_index, r.meta.adaptation)).or_default().push(m);
        }
    }
    targets.sort_unstable();
    targets.dedup();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for t in targets {
        // adaptive bar first
        for adaptation in [true, false] {
            match groups.get(&(t, adaptation)) {
                Some(maxima) => {
                    let (mean, std) = mean_and_std(maxima);
                    rows.push(BarRow {
                        target_index: t,
                        adaptation,
                        n_seeds: maxima.len(),
                        mean_max_return: mean,
                        std_max_return: std,
                    });
                }
                None => notes.push(format!(
                    "target {t}: no completed {} runs; bar omitted",
                    if adaptation { "adaptive" } else { "non-adaptive" }
                )),
            }
        }
    }
    (rows, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub muscle_id: usize,
    pub episode: usize,
    pub lambda: f64,
    pub force: f64,
}

pub fn adaptation_traces(record: &RunRecord) -> (Vec<TraceRow>, Vec<String>) {
    let mut notes = Vec::new();
    if !record.meta.adaptation {
        let msg = format!("run {} has adaptation disabled; ceilings are flat", record.meta.run_id);
        log::warn!("{msg}");
        notes.push(msg);
    }
    let mut rows: Vec<TraceRow> = record
        .muscles
        .iter()
        .map(|m| TraceRow { muscle_id: m.muscle_id, episode: m.episode, lambda: m.lambda, force: m.force })
        .collect();
    rows.sort_by_key(|r| (r.muscle_id, r.episode));
    (rows, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatRow {
    pub muscle_id: usize,
    pub column: usize,
    pub level: usize,
    pub mean_activation: f64,
    pub normalized: f64,
}

/// Mean activation per muscle over `episodes`, normalized by the largest mean.
pub fn activation_heatmap(record: &RunRecord, episodes: Range<usize>) -> Result<(Vec<HeatRow>, Vec<String>)> {
    if episodes.is_empty() {
        return Err(Error::invalid("heatmap episode range is empty"));
    }
    let n_cols = record.meta.n_columns;
    let n_muscles = n_cols * record.meta.n_levels;
    let mut sums = vec![0.0; n_muscles];
    let mut counts = vec![0usize; n_muscles];
    for m in record.muscles.iter().filter(|m| episodes.contains(&m.episode)) {
        if m.muscle_id < n_muscles {
            sums[m.muscle_id] += m.activation;
            counts[m.muscle_id] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "run {} has no activation rows in episodes {}..{}",
            record.meta.run_id, episodes.start, episodes.end
        )));
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let max = means.iter().cloned().fold(0.0, f64::max);
    let mut notes = Vec::new();
    if max == 0.0 {
        notes.push("all mean activations are zero; normalization skipped".into());
    }
    let rows = means
        .iter()
        .enumerate()
        .map(|(id, &mean)| HeatRow {
            muscle_id: id,
            column: id % n_cols,
            level: id / n_cols,
            mean_activation: mean,
            normalized: if max > 0.0 { mean / max } else { 0.0 },
        })
        .collect();
    Ok((rows, notes))
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn push(&mut self, element: impl AsRef<str>) {
        self.body.push_str(element.as_ref());
        self.body.push('\n');
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        self.push(format!(
            r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            escape(content)
        ));
    }

    fn save(self, path: &Path) -> Result<()> {
        let doc = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        );
        std::fs::write(path, doc).map_err(Error::at(path))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`, centered when the range is empty.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        0.5 * (a + b)
    }
}

const ADAPTIVE_COLOR: &str = "#c0392b";
const NONADAPTIVE_COLOR: &str = "#2c6fbb";

pub fn emit_reward_curves(records: &[&RunRecord], target: usize, window: usize, dir: &Path) -> Result<Emitted> {
    let (rows, notes) = reward_curves(records, window);
    let csv = dir.join(format!("reward_curves_target{target}.csv"));
    let svg_path = dir.join(format!("reward_curves_target{target}.svg"));
    write_csv_with_notes(&csv, "reward-curves", &notes, &rows)?;

    let (w, h, l, r, t, b) = (720.0, 420.0, 70.0, 20.0, 40.0, 50.0);
    let mut svg = Svg::new(w, h);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &rows {
        for (m, s) in [(row.mean_adaptive, row.std_adaptive), (row.mean_nonadaptive, row.std_nonadaptive)] {
            if let (Some(m), Some(s)) = (m, s) {
                lo = lo.min(m - s);
                hi = hi.max(m + s);
            }
        }
    }
    let last = rows.last().map_or(1, |row| row.episode.max(1)) as f64;
    let x = |e: usize| scale(e as f64, 0.0, last, l, w - r);
    let y = |v: f64| scale(v, lo, hi, h - b, t);
    svg.text(w / 2.0, 22.0, 14.0, "middle", &format!("Target {target}: rolling mean return (window {window})"));
    svg.push(format!(r#"<line x1="{l}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - b, w - r, h - b));
    svg.push(format!(r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{}" stroke="black"/>"#, h - b));
    svg.text(w / 2.0, h - 12.0, 12.0, "middle", "episode");
    if lo.is_finite() {
        svg.text(l - 6.0, y(hi) + 4.0, 10.0, "end", &format!("{hi:.3e}"));
        svg.text(l - 6.0, y(lo) + 4.0, 10.0, "end", &format!("{lo:.3e}"));
    }
    type Pick = fn(&CurveRow) -> (Option<f64>, Option<f64>);
    let arms: [(&str, &str, Pick); 2] = [
        ("adaptive", ADAPTIVE_COLOR, |r| (r.mean_adaptive, r.std_adaptive)),
        ("non-adaptive", NONADAPTIVE_COLOR, |r| (r.mean_nonadaptive, r.std_nonadaptive)),
    ];
    for (k, (name, color, pick)) in arms.iter().enumerate() {
        let pts: Vec<(usize, f64, f64)> =
            rows.iter().filter_map(|row| match pick(row) {
                (Some(m), Some(s)) => Some((row.episode, m, s)),
                _ => None,
            }).collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(e, m, s) in &pts {
            let _ = write!(band, "{:.2},{:.2} ", x(e), y(m + s));
        }
        for &(e, m, s) in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", x(e), y(m - s));
        }
        svg.push(format!(r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end()));
        let line: Vec<String> = pts.iter().map(|&(e, m, _)| format!("{:.2},{:.2}", x(e), y(m))).collect();
        svg.push(format!(r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" ")));
        for &(e, m, s) in &pts {
            svg.push(format!(
                r#"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="{color}" data-series="{name}" data-episode="{e}" data-mean="{m}" data-std="{s}"/>"#,
                x(e),
                y(m)
            ));
        }
        svg.text(w - r - 110.0, t + 14.0 + 16.0 * k as f64, 12.0, "start", name);
        svg.push(format!(
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="3"/>"#,
            w - r - 135.0,
            t + 10.0 + 16.0 * k as f64,
            w - r - 115.0,
            t + 10.0 + 16.0 * k as f64
        ));
    }
    for (i, n) in notes.iter().enumerate() {
        svg.text(l + 6.0, t + 14.0 + 14.0 * i as f64, 10.0, "start", n);
    }
    svg.save(&svg_path)?;
    Ok(Emitted { csv, svg: svg_path, notes })
}

pub fn emit_max_reward_bars(records: &[&RunRecord], dir: &Path) -> Result<Emitted> {
    let (rows, notes) = max_reward_bars(records);
    let csv = dir.join("max_reward_bars.csv");
    let svg_path = dir.join("max_reward_bars.svg");
    write_csv_with_notes(&csv, "max-reward-bars", &notes, &rows)?;

    let mut targets: Vec<usize> = rows.iter().map(|r| r.target_index).collect();
    targets.dedup();
    let (l, r, t, b) = (70.0, 20.0, 40.0, 50.0);
    let w = (l + r + 90.0 * targets.len().max(1) as f64).max(360.0);
    let h = 380.0;
    let lo = rows.iter().map(|r| r.mean_max_return - r.std_max_return).fold(0.0, f64::min);
    let hi = rows.iter().map(|r| r.mean_max_return + r.std_max_return).fold(0.0, f64::max);
    let y = |v: f64| scale(v, lo, hi, h - b, t);
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 22.0, 14.0, "middle", "Maximum episode return (mean over seeds, whiskers 1 std)");
    svg.push(format!(r#"<line x1="{l}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="black"/>"#, y(0.0), w - r, y(0.0)));
    svg.push(format!(r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{}" stroke="black"/>"#, h - b));
    svg.text(l - 6.0, y(hi) + 4.0, 10.0, "end", &format!("{hi:.3e}"));
    svg.text(l - 6.0, y(lo) + 4.0, 10.0, "end", &format!("{lo:.3e}"));
    for (k, target) in targets.iter().enumerate() {
        let x0 = l + 20.0 + 90.0 * k as f64;
        svg.text(x0 + 30.0, h - b + 18.0, 11.0, "middle", &format!("corner {target}"));
        for row in rows.iter().filter(|r| r.target_index == *target) {
            let (xb, color) = if row.adaptation { (x0, ADAPTIVE_COLOR) } else { (x0 + 30.0, NONADAPTIVE_COLOR) };
            let (y0, y1) = (y(0.0), y(row.mean_max_return));
            svg.push(format!(
                r#"<rect x="{xb:.2}" y="{:.2}" width="28" height="{:.2}" fill="{color}" data-target="{}" data-adaptation="{}" data-n-seeds="{}" data-mean="{}" data-std="{}"/>"#,
                y0.min(y1),
                (y1 - y0).abs(),
                row.target_index,
                row.adaptation,
                row.n_seeds,
                row.mean_max_return,
                row.std_max_return
            ));
            let cx = xb + 14.0;
            svg.push(format!(
                r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                y(row.mean_max_return - row.std_max_return),
                y(row.mean_max_return + row.std_max_return)
            ));
        }
    }
    svg.text(w - r - 150.0, t + 12.0, 11.0, "start", "left: adaptive, right: non-adaptive");
    for (i, n) in notes.iter().enumerate() {
        svg.text(l + 6.0, t + 28.0 + 14.0 * i as f64, 10.0, "start", n);
    }
    svg.save(&svg_path)?;
    Ok(Emitted { csv, svg: svg_path, notes })
}

pub fn emit_adaptation_traces(record: &RunRecord, dir: &Path) -> Result<Emitted> {
    let (rows, notes) = adaptation_traces(record);
    let id = &record.meta.run_id;
    let csv = dir.join(format!("adaptation_traces_{id}.csv"));
    let svg_path = dir.join(format!("adaptation_traces_{id}.svg"));
    write_csv_with_notes(&csv, "adaptation-traces", &notes, &rows)?;

    let (n_cols, n_levels) = (record.meta.n_columns, record.meta.n_levels);
    let (pw, ph, pad) = (150.0, 90.0, 12.0);
    let w = pad + n_cols as f64 * (pw + pad);
    let h = 40.0 + n_levels as f64 * (ph + pad);
    let last = rows.iter().map(|r| r.episode).max().unwrap_or(0).max(1) as f64;
    let top = rows.iter().map(|r| r.lambda.max(r.force)).fold(2.0 * record.meta.lambda_0, f64::max);
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 20.0, 13.0, "middle", &format!("{id}: force ceiling (blue) and force produced (red)"));
    for muscle in 0..n_cols * n_levels {
        let (c, k) = (muscle % n_cols, muscle / n_cols);
        let x0 = pad + c as f64 * (pw + pad);
        let y0 = 32.0 + (n_levels - 1 - k) as f64 * (ph + pad);
        svg.push(format!(
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{pw}" height="{ph}" fill="none" stroke="#999" data-muscle="{muscle}"/>"##
        ));
        svg.text(x0 + 4.0, y0 + 11.0, 9.0, "start", &format!("m{muscle}"));
        let x = |e: usize| x0 + scale(e as f64, 0.0, last, 2.0, pw - 2.0);
        let y = |v: f64| y0 + scale(v, 0.0, top, ph - 2.0, 2.0);
        for row in rows.iter().filter(|r| r.muscle_id == muscle) {
            svg.push(format!(
                r##"<circle cx="{:.2}" cy="{:.2}" r="0.9" fill="#2c6fbb" data-kind="lambda" data-muscle="{muscle}" data-episode="{}" data-value="{}"/>"##,
                x(row.episode),
                y(row.lambda),
                row.episode,
                row.lambda
            ));
            svg.push(format!(
                r##"<circle cx="{:.2}" cy="{:.2}" r="0.9" fill="#c0392b" data-kind="force" data-muscle="{muscle}" data-episode="{}" data-value="{}"/>"##,
                x(row.episode),
                y(row.force),
                row.episode,
                row.force
            ));
        }
    }
    svg.save(&svg_path)?;
    Ok(Emitted { csv, svg: svg_path, notes })
}

pub fn emit_activation_heatmap(record: &RunRecord, episodes: Range<usize>, dir: &Path) -> Result<Emitted> {
    let (rows, notes) = activation_heatmap(record, episodes.clone())?;
    let id = &record.meta.run_id;
    let csv = dir.join(format!("activation_heatmap_{id}.csv"));
    let svg_path = dir.join(format!("activation_heatmap_{id}.svg"));
    let mut all_notes = vec![format!("episodes {}..{}", episodes.start, episodes.end)];
    all_notes.extend(notes.iter().cloned());
    write_csv_with_notes(&csv, "activation-heatmap", &all_notes, &rows)?;

    let (n_cols, n_levels) = (record.meta.n_columns, record.meta.n_levels);
    let cell = 60.0;
    let (ox, oy) = (40.0, 50.0);
    let w = 2.0 * ox + n_cols as f64 * cell;
    let h = oy + 30.0 + n_levels as f64 * cell;
    let px = |c: f64| ox + c * cell;
    let py = |k: f64| oy + (n_levels as f64 - k) * cell;
    let mut svg = Svg::new(w, h);
    svg.text(w / 2.0, 20.0, 13.0, "middle", &format!("{id}: normalized mean activation"));
    svg.text(w / 2.0, 36.0, 10.0, "middle", &format!("episodes {}..{}", episodes.start, episodes.end));
    for c in 0..=n_cols {
        svg.push(format!(
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#555" stroke-width="3"/>"##,
            px(c as f64),
            py(0.0),
            px(c as f64),
            py(n_levels as f64)
        ));
    }
    for row in &rows {
        let v = row.normalized.clamp(0.0, 1.0);
        let fade = (255.0 * (1.0 - v)).round() as u8;
        svg.push(format!(
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="rgb(255,{fade},{fade})" stroke-width="5" data-muscle="{}" data-column="{}" data-level="{}" data-mean="{}" data-normalized="{}"/>"#,
            px(row.column as f64),
            py(row.level as f64),
            px(row.column as f64 + 1.0),
            py(row.level as f64 + 1.0),
            row.muscle_id,
            row.column,
            row.level,
            row.mean_activation,
            row.normalized
        ));
    }
    for (i, n) in notes.iter().enumerate() {
        svg.text(w / 2.0, h - 10.0 - 12.0 * i as f64, 10.0, "middle", n);
    }
    svg.save(&svg_path)?;
    Ok(Emitted { csv, svg: svg_path, notes: all_notes })
}

/// Emits every figure for the completed runs of a sweep into `out/report`.
pub fn report(out: &Path, window: usize, heatmap_episodes: usize) -> Result<Vec<Emitted>> {
    let manifest = super::sweep::Manifest::load(out)?;
    let mut records = Vec::new();
    for entry in &manifest.runs {
        if entry.status == super::sweep::RunStatus::Completed {
            records.push(RunRecord::load(&super::sweep::run_dir(out, &entry.spec.run_id))?);
        }
    }
    if records.is_empty() {
        return Err(Error::invalid(format!("{}: no completed runs to report", out.display())));
    }
    for r in &records {
        if r.meta.config_hash != manifest.config_hash {
            return Err(Error::config(format!("run {} was produced by a different config", r.meta.run_id)));
        }
    }
    let dir = out.join("report");
    std::fs::create_dir_all(&dir).map_err(Error::at(&dir))?;
    let refs: Vec<&RunRecord> = records.iter().collect();
    let mut emitted = Vec::new();
    let mut targets: Vec<usize> = refs.iter().map(|r| r.meta.target_index).collect();
    targets.sort_unstable();
    targets.dedup();
    for t in targets {
        let group: Vec<&RunRecord> = refs.iter().copied().filter(|r| r.meta.target_index == t).collect();
        emitted.push(emit_reward_curves(&group, t, window, &dir)?);
    }
    emitted.push(emit_max_reward_bars(&refs, &dir)?);
    for r in &records {
        emitted.push(emit_adaptation_traces(r, &dir)?);
        let n = r.episodes.len();
        if n > 0 {
            emitted.push(emit_activation_heatmap(r, n.saturating_sub(heatmap_episodes)..n, &dir)?);
        }
    }
    Ok(emitted)
}
