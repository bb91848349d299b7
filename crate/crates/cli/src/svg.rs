//! Hand-written SVG: coupling heatmaps and log–log scatter plots with fit
//! lines.

use std::fmt::Write;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Viridis, sampled at five stops and interpolated linearly.
fn viridis(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|j| (STOPS[k][j] + f * (STOPS[k + 1][j] - STOPS[k][j])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of a `rows × cols` row-major grid, coloured by `log10` of the
/// value. Entries that are exactly zero are drawn hatched; the colour scale
/// spans the positive entries.
pub fn heatmap(
    values: &[f64],
    rows: usize,
    cols: usize,
    cell: f64,
    title: &str,
    row_label: &str,
    col_label: &str,
) -> String {
    assert_eq!(values.len(), rows * cols);
    let logs: Vec<f64> = values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v.log10())
        .collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (left, top) = (60.0, 50.0);
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let bar_x = left + w + 30.0;
    let width = bar_x + 90.0;
    let height = top + h + 50.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="zero" patternUnits="userSpaceOnUse" width="6" height="6">"#,
        r##"<rect width="6" height="6" fill="#ffffff"/><path d="M0,6 L6,0" stroke="#999999" stroke-width="1"/>"##,
        "</pattern></defs>\n"
    ));
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="25" font-size="14">{}</text>"#,
        esc(title)
    );
    s.push_str("<g class=\"cells\">\n");
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j];
            let fill = if v > 0.0 {
                viridis((v.log10() - lo) / span)
            } else {
                "url(#zero)".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{fill}" stroke="none"><title>({i}, {j}): {v:e}</title></rect>"#,
                left + j as f64 * cell,
                top + i as f64 * cell,
            );
        }
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#000000"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + w / 2.0,
        top + h + 30.0,
        esc(col_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + h / 2.0,
        top + h / 2.0,
        esc(row_label)
    );

    let steps = 32;
    let bar_h = h.max(120.0) / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{}" width="16" height="{bar_h}" fill="{}"/>"#,
            top + k as f64 * bar_h,
            viridis(t)
        );
    }
    if logs.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">no mass</text>"#,
            bar_x + 20.0,
            top + 12.0
        );
    } else {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{hi:.2}</text>"#,
            bar_x + 20.0,
            top + 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{lo:.2}</text>"#,
            bar_x + 20.0,
            top + steps as f64 * bar_h
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{bar_x}" y="{}">log10</text>"#,
        top + steps as f64 * bar_h + 18.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{bar_x}" y="{}" width="16" height="10" fill="url(#zero)" stroke="#999999"/><text x="{}" y="{}">zero</text>"##,
        top + steps as f64 * bar_h + 26.0,
        bar_x + 20.0,
        top + steps as f64 * bar_h + 35.0
    );
    s.push_str("</svg>\n");
    s
}

/// One series of a log–log plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `(x, y, half-width of the error bar)`; non-positive points are skipped.
    pub points: Vec<(f64, f64, f64)>,
    /// Natural-log line `ln y = intercept + slope · ln x`.
    pub fit: Option<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub fn loglog(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let (width, height) = (640.0, 440.0);
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
    let (pw, ph) = (width - left - right, height - top - bottom);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y, e) in &s.points {
            if x > 0.0 && y > 0.0 {
                xs.push(x.log10());
                ys.push(y.log10());
                if e > 0.0 {
                    ys.push((y + e).log10());
                    if y - e > 0.0 {
                        ys.push((y - e).log10());
                    }
                }
            }
        }
    }
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else {
            let (lo, hi) = (lo.floor(), hi.ceil());
            if hi > lo {
                (lo, hi)
            } else {
                (lo, lo + 1.0)
            }
        }
    };
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |lx: f64| left + (lx - x0) / (x1 - x0) * pw;
    let py = |ly: f64| top + ph - (ly - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="24" font-size="14">{}</text>"#,
        esc(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>"##
    );
    for k in x0 as i32..=x1 as i32 {
        let x = px(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{top}" x2="{x}" y2="{}" stroke="#dddddd"/><text x="{x}" y="{}" text-anchor="middle">1e{k}</text>"##,
            top + ph,
            top + ph + 18.0
        );
    }
    for k in y0 as i32..=y1 as i32 {
        let y = py(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">1e{k}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        height - 15.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        esc(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" stroke="{colour}" fill="{colour}">"#);
        let pts: Vec<_> = ser
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0)
            .collect();
        for &&(x, y, e) in &pts {
            let cx = px(x.log10());
            if e > 0.0 {
                let hi = py((y + e).log10());
                let lo = if y - e > 0.0 {
                    py((y - e).log10())
                } else {
                    top + ph
                };
                let _ = writeln!(s, r#"<line x1="{cx}" y1="{hi}" x2="{cx}" y2="{lo}"/>"#);
            }
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{}" r="3.5"/>"#, py(y.log10()));
        }
        if let (Some((slope, intercept)), Some(first), Some(last)) =
            (ser.fit, pts.first(), pts.last())
        {
            let at = |x: f64| (intercept + slope * x.ln()).exp().log10();
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke-width="1.5" stroke-dasharray="5,3"/>"#,
                px(first.0.log10()),
                py(at(first.0)),
                px(last.0.log10()),
                py(at(last.0))
            );
        }
        let label = match ser.fit {
            Some((slope, _)) => format!("{} (slope {slope:.3})", ser.name),
            None => ser.name.clone(),
        };
        let ly = top + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="3.5"/><text x="{}" y="{}" stroke="none" fill="#000000">{}</text>"##,
            left + pw - 200.0,
            ly - 4.0,
            left + pw - 190.0,
            ly,
            esc(&label)
        );
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn viridis_endpoints() {
        assert_eq!(viridis(0.0), "#440154");
        assert_eq!(viridis(1.0), "#fde725");
        assert_eq!(viridis(f64::NAN), "#440154");
    }

    #[test]
    fn heatmap_marks_zero_cells() {
        let s = heatmap(&[1.0, 0.0, 0.5, 0.25], 2, 2, 10.0, "a < b", "x1", "x2");
        assert_eq!(s.matches("fill=\"url(#zero)\"").count(), 1 + 1);
        assert!(s.contains("a &lt; b"));
    }

    #[test]
    fn loglog_handles_single_decade() {
        let s = loglog(
            &[Series {
                name: "s".into(),
                points: vec![(2.0, 3.0, 0.1), (4.0, 2.0, 0.0)],
                fit: Some((-0.5, 1.0)),
            }],
            "t",
            "x",
            "y",
        );
        assert!(s.contains("slope -0.500") && !s.contains("NaN"));
    }
}
