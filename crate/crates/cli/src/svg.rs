//! Minimal self-contained SVG line plots and heatmaps.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

fn header(title: &str, comment: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<!--\n{}-->\n",
        comment.replace("--", "- -")
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub ys: Vec<f64>,
}

/// Line plot of series against their index, with a log₁₀ y axis.
pub fn log_lines(title: &str, comment: &str, series: &[Series<'_>]) -> String {
    let mut s = header(title, comment);
    let logs: Vec<Vec<f64>> = series.iter().map(|se| se.ys.iter().map(|&y| y.max(1e-300).log10()).collect()).collect();
    let all = logs.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo < hi { (lo.floor(), hi.ceil()) } else { (lo - 1.0, lo + 1.0) };
    let n = series.iter().map(|se| se.ys.len()).max().unwrap_or(1).max(2);
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let _ = writeln!(
        s,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let mut e = lo as i64;
    while e <= hi as i64 {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">1e{e}</text>",
            PAD - 6.0,
            y(e as f64) + 4.0
        );
        e += 1;
    }
    for (k, (se, l)) in series.iter().zip(&logs).enumerate() {
        let pts: Vec<String> = l.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v))).collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            se.color,
            pts.join(" ")
        );
        let ly = PAD + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>",
            W - PAD - 100.0,
            se.color,
            escape(se.label)
        );
    }
    s + "</svg>\n"
}

/// Heatmap of `log10(values[i][j])`, rows bottom to top, with axis labels.
pub fn log_heatmap(
    title: &str,
    comment: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<f64>],
) -> String {
    let mut s = header(title, comment);
    let logs: Vec<Vec<f64>> = values.iter().map(|r| r.iter().map(|v| v.log10()).collect()).collect();
    let finite = logs.iter().flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let (rows, cols) = (row_labels.len().max(1), col_labels.len().max(1));
    let cw = (W - 2.0 * PAD) / cols as f64;
    let ch = (H - 2.0 * PAD) / rows as f64;
    for (i, row) in logs.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() {
                let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                format!("rgb({},{},{})", (255.0 * t) as u8, (80.0 + 100.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8)
            } else {
                "gray".to_string()
            };
            let (x0, y0) = (PAD + cw * j as f64, H - PAD - ch * (i + 1) as f64);
            let _ =
                writeln!(s, "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{fill}\"/>");
        }
    }
    for (i, l) in row_labels.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            PAD - 6.0,
            H - PAD - ch * (i as f64 + 0.5) + 4.0,
            escape(l)
        );
    }
    for (j, l) in col_labels.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            PAD + cw * (j as f64 + 0.5),
            H - PAD + 16.0,
            escape(l)
        );
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">log10 error from {lo:.2} (blue) to {hi:.2} (red)</text>", W / 2.0, H - 18.0);
    s + "</svg>\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed_and_escaped() {
        let s = log_lines("a < b", "x -- y\n", &[Series { label: "s", color: "red", ys: vec![1.0, 0.1, 0.01] }]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b") && !s.contains("x -- y"));
        let h = log_heatmap("t", "", &["1".into()], &["10".into(), "20".into()], &[vec![0.1, f64::NAN]]);
        assert!(h.contains("gray"));
    }
}
