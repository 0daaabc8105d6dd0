use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lagcorr::{optimal_delay, read_heatmap_csv, CorrelationMap, DelayProfile, Mode};
use crate::numfmt::fmt_num;

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const LEGEND_W: f64 = 90.0;
const COLOR_LEVELS: u32 = 32;
const UNDEFINED_FILL: &str = "#d9d9d9";

/// Position of `v` on the blue-to-red scale, in `[0, 1]`.
fn color_position(mode: Mode, v: f64) -> f64 {
    match mode {
        Mode::Heading => ((v - 0.5) / 0.5).clamp(0.0, 1.0),
        Mode::Speed => (v / 0.5).clamp(0.0, 1.0),
    }
}

/// Value marking strong coupling, drawn as a level curve.
fn level(mode: Mode) -> f64 {
    match mode {
        Mode::Heading => 0.95,
        Mode::Speed => 0.05,
    }
}

fn quantize(s: f64) -> u32 {
    ((s * (COLOR_LEVELS - 1) as f64).round() as u32).min(COLOR_LEVELS - 1)
}

fn level_color(q: u32) -> String {
    let s = q as f64 / (COLOR_LEVELS - 1) as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * s).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(49.0, 215.0),
        lerp(54.0, 48.0),
        lerp(149.0, 39.0)
    )
}

/// Renders a heatmap with time on x and lag on y, a dashed zero-lag line,
/// the optimal-lag trace, and a level curve at the strong-coupling value.
/// Equal colors along a lag row are merged into one rectangle.
pub fn render_heatmap_svg(
    map: &CorrelationMap,
    trace: &DelayProfile,
    sample_rate_hz: f64,
    title: &str,
) -> String {
    let n_t = map.times.len().max(1) as f64;
    let n_l = map.lag_count() as f64;
    let l = map.max_lag as isize;
    let total_w = MARGIN_L + PLOT_W + LEGEND_W;
    let total_h = MARGIN_T + PLOT_H + MARGIN_B;
    // viewBox units: one per sample along x, one per lag along y, lag +max at top
    let y_of = |tau: isize| (l - tau) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + PLOT_W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<svg x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {n_t} {n_l}" preserveAspectRatio="none" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{n_t}" height="{n_l}" fill="{UNDEFINED_FILL}"/>"#
    );

    let width = map.times.len();
    for tau in map.lags() {
        let col = (tau + l) as usize;
        let mut run: Option<(usize, u32)> = None;
        let flush = |s: &mut String, start: usize, end: usize, q: u32| {
            let _ = writeln!(
                s,
                r#"<rect x="{start}" y="{}" width="{}" height="1" fill="{}"/>"#,
                y_of(tau),
                end - start,
                level_color(q)
            );
        };
        for x in 0..width {
            let v = map.row(map.times.start + x)[col];
            let q = (!v.is_nan()).then(|| quantize(color_position(map.mode, v)));
            match (run, q) {
                (Some((_, rq)), Some(q)) if rq == q => {}
                (prev, q) => {
                    if let Some((start, rq)) = prev {
                        flush(&mut s, start, x, rq);
                    }
                    run = q.map(|q| (x, q));
                }
            }
        }
        if let Some((start, rq)) = run {
            flush(&mut s, start, width, rq);
        }
    }

    // level curve: a unit tick on the boundary between lags whose values straddle the level
    let lv = level(map.mode);
    let mut contour = String::new();
    for x in 0..width {
        let row = map.row(map.times.start + x);
        for k in 0..row.len().saturating_sub(1) {
            let (a, b) = (row[k], row[k + 1]);
            if !a.is_nan() && !b.is_nan() && ((a >= lv) != (b >= lv)) {
                let tau = k as isize - l;
                let _ = write!(contour, "M{x} {}h1", y_of(tau));
            }
        }
    }
    if !contour.is_empty() {
        let _ = writeln!(
            s,
            r#"<path d="{contour}" stroke="black" stroke-width="0.6" vector-effect="non-scaling-stroke" fill="none"/>"#
        );
    }

    let zero_y = y_of(0) + 0.5;
    let _ = writeln!(
        s,
        r#"<line x1="0" y1="{zero_y}" x2="{n_t}" y2="{zero_y}" stroke="white" stroke-width="1.2" stroke-dasharray="6 4" vector-effect="non-scaling-stroke"/>"#
    );

    let mut segments: Vec<Vec<(usize, isize)>> = Vec::new();
    let mut current = Vec::new();
    for t in map.times.clone() {
        match trace.get(t) {
            Some(tau) => current.push((t - map.times.start, tau)),
            None if !current.is_empty() => segments.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    for seg in segments {
        let pts: Vec<String> = seg
            .iter()
            .map(|&(x, tau)| format!("{},{}", x as f64 + 0.5, y_of(tau) + 0.5))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" stroke="#1a9641" stroke-width="1.5" fill="none" vector-effect="non-scaling-stroke"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(s, "</svg>");

    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    axes(&mut s, map, sample_rate_hz);
    legend(&mut s, map.mode);
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, map: &CorrelationMap, fs: f64) {
    let n_t = map.times.len().max(1) as f64;
    let l = map.max_lag as f64;
    let bottom = MARGIN_T + PLOT_H;
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let x = MARGIN_L + frac * PLOT_W;
        let t = (map.times.start as f64 + frac * n_t) / fs;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{bottom}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            fmt_num((t * 100.0).round() / 100.0)
        );
        let y = MARGIN_T + frac * PLOT_H;
        let tau = (l - frac * 2.0 * l) / fs;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{MARGIN_L}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_num((tau * 100.0).round() / 100.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#,
        MARGIN_L + PLOT_W / 2.0,
        bottom + 38.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">lag (s)</text>"#,
        MARGIN_T + PLOT_H / 2.0,
        MARGIN_T + PLOT_H / 2.0
    );
}

fn legend(s: &mut String, mode: Mode) {
    let x = MARGIN_L + PLOT_W + 20.0;
    let h = PLOT_H / COLOR_LEVELS as f64;
    for q in 0..COLOR_LEVELS {
        let y = MARGIN_T + PLOT_H - (q + 1) as f64 * h;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="16" height="{}" fill="{}"/>"#,
            fmt_num(y),
            fmt_num(h + 0.5),
            level_color(q)
        );
    }
    let (lo, hi) = match mode {
        Mode::Heading => ("\u{2264}0.5", "1"),
        Mode::Speed => ("0", "\u{2265}0.5"),
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{hi}</text><text x="{}" y="{}">{lo}</text>"#,
        x + 20.0,
        MARGIN_T + 10.0,
        x + 20.0,
        MARGIN_T + PLOT_H
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Re-renders a heatmap CSV as SVG.
pub fn render_heatmap_file(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let map = read_heatmap_csv(BufReader::new(file))?;
    let fs_hz = read_sample_rate(csv_path)?.unwrap_or(1.0);
    let title = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = render_heatmap_svg(&map, &optimal_delay(&map), fs_hz, &title);
    super::write_atomic(svg_path, svg.as_bytes())
}

fn read_sample_rate(path: &Path) -> Result<Option<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| {
            l.trim_start_matches('#')
                .trim()
                .strip_prefix("fs=")?
                .parse()
                .ok()
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_scale_endpoints() {
        assert_eq!(quantize(color_position(Mode::Heading, 0.2)), 0);
        assert_eq!(
            quantize(color_position(Mode::Heading, 1.0)),
            COLOR_LEVELS - 1
        );
        assert_eq!(quantize(color_position(Mode::Speed, 0.0)), 0);
        assert_eq!(quantize(color_position(Mode::Speed, 3.0)), COLOR_LEVELS - 1);
        assert_eq!(level_color(0), "#313695");
        assert_eq!(level_color(COLOR_LEVELS - 1), "#d73027");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b>&c"), "a&lt;b&gt;&amp;c");
    }
}
