//! Deterministic SVG rendering of grid results: stacked composition
//! panels and per-coordinate log-ratio dot plots.
//!
//! Every figure is a view over the same grid outcome the CSVs report and
//! over the same scenario streams, never a separate computation; the
//! composition panels replay the first draws of each scenario's own
//! stream. Output is SVG 1.1 with no external references.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::cli::{write_text, CliError, PlannedScenario};
use crate::harness::{ApproxVariant, GridOutcome, HarnessError};
use crate::sampling::sample_counts;

/// Draws shown in a composition panel; more adds ink, not information.
const MAX_PANEL_DRAWS: usize = 200;

/// Fill colors cycled over classes and coordinates.
const PALETTE: [&str; 8] = [
    "#4c78a8", "#f58518", "#e45756", "#72b7b2", "#54a24b", "#eeca3b", "#b279a2", "#9d755d",
];

/// Minimal SVG assembly; coordinates are written at fixed precision so
/// output is byte-stable.
struct Svg {
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        let mut body = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
             width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
        );
        let _ = writeln!(body, "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>");
        Svg { body }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
        );
    }

    fn frame(&mut self, x: f64, y: f64, w: f64, h: f64) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
             fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>"
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: Option<&str>) {
        let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"{stroke}\" stroke-width=\"1\"{dash}/>"
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r}\" fill=\"{fill}\" \
             fill-opacity=\"0.85\"/>"
        );
    }

    fn text(&mut self, x: f64, y: f64, size: u32, anchor: &str, content: &str) {
        let content = escape(content);
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" \
             font-family=\"sans-serif\" fill=\"#333333\" text-anchor=\"{anchor}\">{content}</text>"
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Stacked shares of the first draws of one scenario's stream, one bar
/// per draw, class 1 at the top, sorted by descending last-class share.
fn composition_panel(p: &PlannedScenario) -> Result<String, CliError> {
    let s = &p.scenario;
    let n = s.n_draws().min(MAX_PANEL_DRAWS);
    let mut rng = ChaCha12Rng::seed_from_u64(s.seed());
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sample_counts(s.model(), &mut rng).map_err(HarnessError::from)?;
        let total = x.total() as f64;
        draws.push(x.counts().iter().map(|&c| c as f64 / total).collect());
    }
    draws.sort_by(|a, b| {
        f64::total_cmp(b.last().expect("classes"), a.last().expect("classes"))
    });

    let (width, height) = (760.0, 320.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 45.0);
    let (plot_w, plot_h) = (width - left - right, height - top - bottom);
    let mut svg = Svg::new(width, height);
    svg.text(width / 2.0, 22.0, 14, "middle", s.label());
    let bar_w = plot_w / n as f64;
    for (i, shares) in draws.iter().enumerate() {
        let x = left + i as f64 * bar_w;
        let mut y = top;
        for (j, &share) in shares.iter().enumerate() {
            let h = share * plot_h;
            svg.rect(x, y, bar_w, h, PALETTE[j % PALETTE.len()]);
            y += h;
        }
    }
    svg.frame(left, top, plot_w, plot_h);
    svg.text(left, height - 12.0, 11, "start", "draws, sorted by descending last-class share");
    svg.text(14.0, top + 10.0, 11, "start", "1");
    svg.text(14.0, top + plot_h, 11, "start", "0");
    svg.text(30.0, top + plot_h / 2.0, 11, "middle", "share");
    Ok(svg.finish())
}

/// Which per-coordinate statistic a dot plot shows.
#[derive(Debug, Clone, Copy)]
enum Stat {
    Mean,
    Eigenvalue,
}

impl Stat {
    fn code(self) -> &'static str {
        match self {
            Stat::Mean => "means",
            Stat::Eigenvalue => "eigs",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Eigenvalue => "eigenvalue",
        }
    }
}

/// One dot per scenario and coordinate: the log-ratio of the empirical
/// statistic to one approximation variant, against the (median) total on
/// a log axis. The zero line marks perfect correspondence.
fn log_ratio_panel(
    stat: Stat,
    variant: ApproxVariant,
    planned: &[PlannedScenario],
    outcome: &GridOutcome,
) -> String {
    let meta = |label: &str| {
        planned.iter().find(|p| p.scenario.label() == label).expect("report label is planned")
    };
    // (x position, value, coordinate) triples, finite values only; the
    // comparison sentinels for sign flips cannot be placed on this axis.
    let mut points: Vec<(f64, f64, usize)> = Vec::new();
    let mut totals: Vec<u64> = Vec::new();
    let mut coords = 0usize;
    // Deterministic within-total offsets keep scenarios sharing a total
    // visually separate.
    let mut seen_per_total: std::collections::BTreeMap<u64, usize> = Default::default();
    for report in &outcome.reports {
        let p = meta(&report.label);
        totals.push(p.total);
        let slot = seen_per_total.entry(p.total).or_insert(0);
        let offset = *slot as f64;
        *slot += 1;
        for vc in &report.variants {
            if vc.variant != variant {
                continue;
            }
            let values = match stat {
                Stat::Mean => vc.report.log_ratio_means(),
                Stat::Eigenvalue => vc.report.log_ratio_eigs(),
            };
            coords = coords.max(values.len());
            for (c, &v) in values.iter().enumerate() {
                if v.is_finite() {
                    points.push(((p.total as f64).log10() + offset * 0.03, v, c));
                }
            }
        }
    }
    totals.sort_unstable();
    totals.dedup();

    let (width, height) = (760.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 50.0, 50.0);
    let (plot_w, plot_h) = (width - left - right, height - top - bottom);
    let mut svg = Svg::new(width, height);
    svg.text(
        width / 2.0,
        24.0,
        14,
        "middle",
        &format!("log-ratio of empirical to {} {}", variant.code(), stat.title()),
    );

    let (mut x_min, mut x_max) = match (totals.first(), totals.last()) {
        (Some(&lo), Some(&hi)) => ((lo as f64).log10(), (hi as f64).log10()),
        _ => (0.0, 1.0),
    };
    if x_max - x_min < 0.5 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    let mut y_min = 0.0f64;
    let mut y_max = 0.0f64;
    for &(_, v, _) in &points {
        y_min = y_min.min(v);
        y_max = y_max.max(v);
    }
    let pad = (0.08 * (y_max - y_min)).max(0.1);
    y_min -= pad;
    y_max += pad;
    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| top + (y_max - y) / (y_max - y_min) * plot_h;

    for &t in &totals {
        let x = px((t as f64).log10());
        svg.line(x, top + plot_h, x, top + plot_h + 4.0, "#333333", None);
        svg.text(x, top + plot_h + 18.0, 11, "middle", &format!("{t}"));
    }
    for y in [y_min, y_max] {
        svg.text(left - 6.0, py(y) + 4.0, 11, "end", &format!("{y:.3}"));
    }
    let zero_y = py(0.0);
    svg.line(left, zero_y, left + plot_w, zero_y, "#888888", Some("5,4"));
    svg.text(left - 6.0, zero_y + 4.0, 11, "end", "0");
    svg.text(left + 8.0, zero_y - 6.0, 11, "start", "perfect correspondence");
    for &(x, v, c) in &points {
        svg.circle(px(x), py(v), 4.0, PALETTE[c % PALETTE.len()]);
    }
    svg.frame(left, top, plot_w, plot_h);
    svg.text(left + plot_w / 2.0, height - 14.0, 11, "middle", "total count (log scale)");
    for c in 0..coords {
        let y = top + 14.0 + c as f64 * 18.0;
        svg.circle(left + plot_w + 24.0, y - 4.0, 4.0, PALETTE[c % PALETTE.len()]);
        svg.text(left + plot_w + 34.0, y, 11, "start", &format!("coordinate {}", c + 1));
    }
    svg.finish()
}

/// Renders every figure for a grid outcome into `out_dir`: one
/// composition panel per completed scenario and one dot plot per
/// (statistic, approximation variant) pair. Returns the paths written.
pub fn render_figures(
    out_dir: &Path,
    planned: &[PlannedScenario],
    outcome: &GridOutcome,
) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for report in &outcome.reports {
        let p = planned
            .iter()
            .find(|p| p.scenario.label() == report.label)
            .expect("report label is planned");
        let path = out_dir.join(format!("fig_composition_{}.svg", report.label));
        write_text(&path, &composition_panel(p)?)?;
        paths.push(path);
    }
    for stat in [Stat::Mean, Stat::Eigenvalue] {
        for variant in ApproxVariant::ALL {
            let path =
                out_dir.join(format!("fig_log_ratio_{}_{}.svg", stat.code(), variant.code()));
            write_text(&path, &log_ratio_panel(stat, variant, planned, outcome))?;
            paths.push(path);
        }
    }
    Ok(paths)
}
