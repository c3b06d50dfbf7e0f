//! Table and figure writers.
//!
//! All tables are plain CSV with float fields rendered through `Display`
//! (shortest round-trip form), and all figures are static SVG built from
//! the same numbers — no plotting library, no randomness, no timestamps,
//! so outputs are byte-identical across runs.

use shiftshare_core::regress::{BinscatterResult, IrfResult, LongRunRow};
use shiftshare_core::taxonomy::AnnotatedPanel;
use shiftshare_core::Result;

/// Renders `irf.csv` (also used for `balance.csv`): one row per horizon
/// with the estimate, its 95% interval, and the first-stage diagnostics.
pub fn irf_csv(irf: &IrfResult) -> String {
    let mut out = String::from(
        "outcome,instrument,cluster,horizon,beta,se,ci_lo,ci_hi,\
         first_stage_f,first_stage_f_classical,n_obs,n_clusters\n",
    );
    for e in &irf.estimates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            irf.outcome,
            irf.instrument_kind.token(),
            irf.cluster_key,
            e.horizon,
            e.beta,
            e.se,
            e.ci_lo,
            e.ci_hi,
            e.first_stage_f,
            e.first_stage_f_classical,
            e.n_obs,
            e.n_clusters
        ));
    }
    out
}

/// Renders `longrun.csv`: one row per (outcome, slice, window).
pub fn longrun_csv(rows: &[LongRunRow]) -> String {
    let mut out = String::from(
        "outcome,slice,window_start,window_end,fe_absorbed,beta,se,\
         first_stage_f,n_obs,n_clusters,singleton_groups_dropped\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.outcome,
            r.slice,
            r.window.0,
            r.window.1,
            r.fe_absorbed,
            r.beta,
            r.se,
            r.first_stage_f,
            r.n_obs,
            r.n_clusters,
            r.singleton_groups_dropped
        ));
    }
    out
}

/// Renders `taxonomy_shares.csv`: per region-year employment counts and
/// shares for the risky and sustainable slices.
pub fn taxonomy_shares_csv(annotated: &AnnotatedPanel<'_>) -> Result<String> {
    let mut out = String::from(
        "region_id,year,risky_employment,sustainable_employment,total_employment,\
         risky_share,sustainable_share\n",
    );
    let panel = annotated.panel();
    for region in panel.regions() {
        for year in panel.years() {
            let (risky, sustainable, total) = annotated.employment_counts(region, year)?;
            let (risky_share, sustainable_share) = annotated.shares(region, year)?;
            out.push_str(&format!(
                "{region},{year},{risky},{sustainable},{total},{risky_share},{sustainable_share}\n"
            ));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SVG figures
// ---------------------------------------------------------------------------

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

struct Scale {
    lo: f64,
    hi: f64,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        let t = (v - self.lo) / (self.hi - self.lo);
        self.pixel_lo + t * (self.pixel_hi - self.pixel_lo)
    }
}

/// Two-decimal pixel coordinates keep the SVG short and deterministic.
fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// A tick step of the form {1, 2, 5}·10^k giving roughly `target` ticks.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target.max(1) as f64;
    let magnitude = 10f64.powf(raw.abs().log10().floor());
    let ratio = raw / magnitude;
    let factor = if ratio <= 1.0 {
        1.0
    } else if ratio <= 2.0 {
        2.0
    } else if ratio <= 5.0 {
        5.0
    } else {
        10.0
    };
    factor * magnitude
}

/// Tick positions covering `[lo, hi]` at a nice step.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        // Snap near-zero ticks so labels read "0" instead of "-0".
        out.push(if t.abs() < 1e-12 { 0.0 } else { t });
        t += step;
    }
    out
}

fn svg_open(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
}

fn axes(out: &mut String, x: &Scale, y: &Scale, x_label: &str, y_label: &str) {
    let x0 = px(x.pixel_lo);
    let x1 = px(x.pixel_hi);
    let y0 = px(y.pixel_lo);
    let y1 = px(y.pixel_hi);
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n",
        px((x.pixel_lo + x.pixel_hi) / 2.0),
        px(HEIGHT - 10.0)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        px((y.pixel_lo + y.pixel_hi) / 2.0),
        px((y.pixel_lo + y.pixel_hi) / 2.0)
    ));
}

fn y_ticks(out: &mut String, x: &Scale, y: &Scale) {
    for t in ticks(y.lo, y.hi, 6) {
        let yy = px(y.map(t));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" stroke=\"black\"/>\n",
            px(x.pixel_lo - 4.0),
            px(x.pixel_lo)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{yy}\" text-anchor=\"end\" dy=\"4\">{t}</text>\n",
            px(x.pixel_lo - 8.0)
        ));
    }
}

fn zero_line(out: &mut String, x: &Scale, y: &Scale) {
    if y.lo < 0.0 && y.hi > 0.0 {
        let yy = px(y.map(0.0));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" \
             stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
            px(x.pixel_lo),
            px(x.pixel_hi)
        ));
    }
}

/// Renders the impulse-response figure: point estimates connected by a
/// line, with 95% whiskers at every horizon and a dashed zero line.
pub fn irf_svg(irf: &IrfResult, title: &str) -> String {
    let estimates = &irf.estimates;
    let (h_lo, h_hi) = match (estimates.first(), estimates.last()) {
        (Some(first), Some(last)) => (first.horizon as f64, last.horizon as f64),
        _ => (0.0, 1.0),
    };
    let mut v_lo = estimates.iter().map(|e| e.ci_lo).fold(f64::INFINITY, f64::min);
    let mut v_hi = estimates
        .iter()
        .map(|e| e.ci_hi)
        .fold(f64::NEG_INFINITY, f64::max);
    if !v_lo.is_finite() || !v_hi.is_finite() {
        v_lo = -1.0;
        v_hi = 1.0;
    }
    let pad = 0.05 * (v_hi - v_lo).max(1e-6);
    let x = Scale {
        lo: h_lo - 0.5,
        hi: h_hi + 0.5,
        pixel_lo: LEFT,
        pixel_hi: WIDTH - RIGHT,
    };
    let y = Scale {
        lo: v_lo - pad,
        hi: v_hi + pad,
        pixel_lo: HEIGHT - BOTTOM,
        pixel_hi: TOP,
    };

    let mut out = String::new();
    svg_open(&mut out);
    out.push_str(&format!(
        "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        px(WIDTH / 2.0)
    ));
    zero_line(&mut out, &x, &y);
    y_ticks(&mut out, &x, &y);
    // Horizon ticks: thin out labels when the window is wide.
    let label_step = ((h_hi - h_lo) as usize / 16).max(1);
    for e in estimates {
        if (e.horizon - estimates[0].horizon) as usize % label_step != 0 {
            continue;
        }
        let xx = px(x.map(e.horizon as f64));
        out.push_str(&format!(
            "<line x1=\"{xx}\" y1=\"{}\" x2=\"{xx}\" y2=\"{}\" stroke=\"black\"/>\n",
            px(y.pixel_lo),
            px(y.pixel_lo + 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{xx}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(y.pixel_lo + 18.0),
            e.horizon
        ));
    }
    // Whiskers with serif caps.
    for e in estimates {
        let xx = px(x.map(e.horizon as f64));
        let lo = px(y.map(e.ci_lo));
        let hi = px(y.map(e.ci_hi));
        out.push_str(&format!(
            "<line x1=\"{xx}\" y1=\"{lo}\" x2=\"{xx}\" y2=\"{hi}\" stroke=\"steelblue\"/>\n"
        ));
        for yy in [lo, hi] {
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" stroke=\"steelblue\"/>\n",
                px(x.map(e.horizon as f64) - 3.0),
                px(x.map(e.horizon as f64) + 3.0)
            ));
        }
    }
    // Point estimates connected in horizon order.
    let path: Vec<String> = estimates
        .iter()
        .map(|e| format!("{},{}", px(x.map(e.horizon as f64)), px(y.map(e.beta))))
        .collect();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"navy\" stroke-width=\"1.5\"/>\n",
        path.join(" ")
    ));
    for e in estimates {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"navy\"/>\n",
            px(x.map(e.horizon as f64)),
            px(y.map(e.beta))
        ));
    }
    axes(&mut out, &x, &y, "horizon (years)", "elasticity");
    out.push_str("</svg>\n");
    out
}

/// Renders the binned-scatter figure: bin means plus the fitted line of
/// the underlying (unbinned) regression.
pub fn binscatter_svg(result: &BinscatterResult, x_label: &str, y_label: &str) -> String {
    let xs: Vec<f64> = result.bins.iter().map(|b| b.x_mean).collect();
    let ys: Vec<f64> = result.bins.iter().map(|b| b.y_mean).collect();
    let (mut x_lo, mut x_hi) = min_max(&xs);
    let (mut y_lo, mut y_hi) = min_max(&ys);
    let x_pad = 0.05 * (x_hi - x_lo).max(1e-6);
    let y_pad = 0.10 * (y_hi - y_lo).max(1e-6);
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;
    let x = Scale {
        lo: x_lo,
        hi: x_hi,
        pixel_lo: LEFT,
        pixel_hi: WIDTH - RIGHT,
    };
    let y = Scale {
        lo: y_lo,
        hi: y_hi,
        pixel_lo: HEIGHT - BOTTOM,
        pixel_hi: TOP,
    };

    // Equal-count bins partition the sample, so count-weighted bin means
    // recover the overall means exactly; the fitted line passes through
    // them with the reported slope.
    let total: usize = result.bins.iter().map(|b| b.count).sum();
    let grand_x: f64 =
        result.bins.iter().map(|b| b.x_mean * b.count as f64).sum::<f64>() / total as f64;
    let grand_y: f64 =
        result.bins.iter().map(|b| b.y_mean * b.count as f64).sum::<f64>() / total as f64;
    let line_y = |v: f64| grand_y + result.slope * (v - grand_x);

    let mut out = String::new();
    svg_open(&mut out);
    zero_line(&mut out, &x, &y);
    y_ticks(&mut out, &x, &y);
    for t in ticks(x.lo, x.hi, 8) {
        let xx = px(x.map(t));
        out.push_str(&format!(
            "<line x1=\"{xx}\" y1=\"{}\" x2=\"{xx}\" y2=\"{}\" stroke=\"black\"/>\n",
            px(y.pixel_lo),
            px(y.pixel_lo + 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{xx}\" y=\"{}\" text-anchor=\"middle\">{t}</text>\n",
            px(y.pixel_lo + 18.0)
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n",
        px(x.map(x_lo)),
        px(y.map(line_y(x_lo))),
        px(x.map(x_hi)),
        px(y.map(line_y(x_hi)))
    ));
    for b in &result.bins {
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"steelblue\"/>\n",
            px(x.map(b.x_mean)),
            px(y.map(b.y_mean))
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">slope = {:.4} (t = {:.2}, n = {})</text>\n",
        px(WIDTH - RIGHT - 6.0),
        px(TOP + 14.0),
        result.slope,
        result.t_stat,
        result.n_obs
    ));
    axes(&mut out, &x, &y, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
