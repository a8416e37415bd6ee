//! Position-trajectory figure: the simulated price path on the left
//! axis, each policy's hedging positions on the right axis, emitted as a
//! self-contained SVG plus the underlying CSV trace.

use std::path::Path;

use crate::env::{run_episode, EnvConfig, Policy};
use crate::market::PricePath;
use crate::Result;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 64.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
];

/// Runs every policy over the same path and writes `<out>.svg` and
/// `<out>.csv`. An empty policy list yields a price-only figure.
pub fn emit_position_plot(
    policies: &[(String, &dyn Policy)],
    path: &PricePath,
    config: &EnvConfig,
    out_base: &Path,
) -> Result<()> {
    let horizon = config.horizon;
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, policy) in policies {
        let record = run_episode(*policy, path, config)?;
        series.push((name.clone(), record.positions));
    }

    // CSV: t, S_t, then one position column per policy
    let mut csv = String::from("t,S_t");
    for (name, _) in &series {
        csv.push_str(&format!(",X_{name}"));
    }
    csv.push('\n');
    for t in 0..=horizon {
        csv.push_str(&format!("{},{}", t, path.prices[t]));
        for (_, positions) in &series {
            if t < horizon {
                csv.push_str(&format!(",{}", positions[t]));
            } else {
                csv.push(',');
            }
        }
        csv.push('\n');
    }

    let svg = render_svg(path, &series, horizon);
    if let Some(dir) = out_base.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(out_base.with_extension("csv"), csv)?;
    std::fs::write(out_base.with_extension("svg"), svg)?;
    Ok(())
}

fn render_svg(path: &PricePath, series: &[(String, Vec<f64>)], horizon: usize) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |t: f64| MARGIN_L + plot_w * t / horizon as f64;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &path.prices {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let y_price = |p: f64| MARGIN_T + plot_h * (1.0 - (p - lo) / (hi - lo));
    let y_pos = |x: f64| MARGIN_T + plot_h * (1.0 - x);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>\n"
    ));

    // horizontal grid + right-axis ticks at position levels
    for k in 0..=4 {
        let level = k as f64 / 4.0;
        let y = y_pos(level);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            MARGIN_L + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#444\">{level:.2}</text>\n",
            MARGIN_L + plot_w + 6.0,
            y + 4.0
        ));
    }
    // left-axis price ticks
    for k in 0..=4 {
        let p = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_price(p);
        svg.push_str(&format!(
            "<text x=\"6\" y=\"{:.1}\" font-size=\"11\" fill=\"#1f77b4\">{p:.1}</text>\n",
            y + 4.0
        ));
    }
    // time ticks
    for t in 0..=horizon {
        let x = x_of(t as f64);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#444\" text-anchor=\"middle\">{t}</text>\n",
            x,
            HEIGHT - MARGIN_B + 16.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#444\" text-anchor=\"middle\">time step</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" fill=\"#1f77b4\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">price</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#444\" transform=\"rotate(90 {:.1} {:.1})\" text-anchor=\"middle\">position</text>\n",
        WIDTH - 12.0,
        MARGIN_T + plot_h / 2.0,
        WIDTH - 12.0,
        MARGIN_T + plot_h / 2.0
    ));

    // price line
    let mut pts = String::new();
    for (t, &p) in path.prices.iter().enumerate() {
        pts.push_str(&format!("{:.2},{:.2} ", x_of(t as f64), y_price(p)));
    }
    svg.push_str(&format!(
        "<polyline points=\"{pts}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n"
    ));

    // position step-lines: X_{t+1} applies over (t, t+1]
    for (i, (_, positions)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (t, &x) in positions.iter().enumerate() {
            pts.push_str(&format!("{:.2},{:.2} ", x_of(t as f64), y_pos(x)));
            pts.push_str(&format!("{:.2},{:.2} ", x_of(t as f64 + 1.0), y_pos(x)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n"
        ));
    }

    // legend
    let mut ly = MARGIN_T + 14.0;
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"12\" fill=\"#1f77b4\">price</text>\n",
        MARGIN_L + 10.0
    ));
    for (i, (name, _)) in series.iter().enumerate() {
        ly += 16.0;
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            MARGIN_L + 10.0
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
