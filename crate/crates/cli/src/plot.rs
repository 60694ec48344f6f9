//! Log-log SVG line plots.

use std::fmt::Write;

use crate::recipes::Plot;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const ENVELOPE_POINTS: usize = 64;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, t: f64) -> f64 {
        MARGIN + (t.log10() - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        H - MARGIN - (v.log10() - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn bounds(points: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = points
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    Some((lo - pad, hi + pad))
}

fn polyline(out: &mut String, axes: &Axes, pts: &[(f64, f64)], color: &str, dashed: bool) {
    let coords: Vec<String> = pts
        .iter()
        .filter(|&&(t, v)| t > 0.0 && v > 0.0 && v.is_finite())
        .map(|&(t, v)| format!("{:.2},{:.2}", axes.px(t), axes.py(v)))
        .collect();
    if coords.len() < 2 {
        return;
    }
    let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
        coords.join(" ")
    );
}

pub fn render_svg(plot: &Plot) -> String {
    let envelope_curves: Vec<(String, Vec<(f64, f64)>)> = plot
        .envelopes
        .iter()
        .filter(|(_, _, w)| w.0 > 0.0 && w.1 > w.0)
        .map(|(name, env, w)| {
            let r = w.1 / w.0;
            let pts = (0..ENVELOPE_POINTS)
                .map(|i| {
                    let t = w.0 * r.powf(i as f64 / (ENVELOPE_POINTS - 1) as f64);
                    (t, env.at(t))
                })
                .collect();
            (name.clone(), pts)
        })
        .collect();
    let all = || plot.curves.iter().chain(&envelope_curves).flat_map(|(_, p)| p.iter().copied());

    let mut out = String::new();
    let _ = writeln!(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">");
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        W / 2.0,
        escape(&plot.title)
    );
    let (Some(x), Some(y)) = (bounds(all().map(|p| p.0)), bounds(all().map(|p| p.1))) else {
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\">no positive data</text>", W / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        return out;
    };
    let axes = Axes { x, y };
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for d in x.0.ceil() as i32..=x.1.floor() as i32 {
        let px = axes.px(10f64.powi(d));
        let _ = writeln!(out, "<line x1=\"{px:.2}\" y1=\"{MARGIN}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#ddd\"/>", H - MARGIN);
        let _ = writeln!(out, "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e{d}</text>", H - MARGIN + 16.0);
    }
    for d in y.0.ceil() as i32..=y.1.floor() as i32 {
        let py = axes.py(10f64.powi(d));
        let _ = writeln!(out, "<line x1=\"{MARGIN}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"#ddd\"/>", W - MARGIN);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{d}</text>", MARGIN - 6.0, py + 4.0);
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>", W / 2.0, H - 16.0);

    let mut legend = Vec::new();
    for (i, (label, pts)) in plot.curves.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        polyline(&mut out, &axes, pts, c, false);
        legend.push((label.clone(), c, false));
    }
    for (i, (label, pts)) in envelope_curves.iter().enumerate() {
        let c = COLORS[(plot.curves.len() + i) % COLORS.len()];
        polyline(&mut out, &axes, pts, c, true);
        legend.push((format!("{label} envelope"), c, true));
    }
    for (i, (label, c, dashed)) in legend.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(out, "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{c}\" stroke-width=\"1.5\"{dash}/>", W - MARGIN - 150.0, W - MARGIN - 126.0);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>", W - MARGIN - 120.0, y + 4.0, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use anisolab::verify::Envelope;

    #[test]
    fn renders_curves_and_envelopes() {
        let plot = Plot {
            name: "p".into(),
            title: "a < b".into(),
            curves: vec![("u".into(), vec![(0.01, 10.0), (0.1, 1.0), (1.0, 0.1)])],
            envelopes: vec![("uno".into(), Envelope { c: 0.2, h: 1.0, sigma: 0.0 }, (0.01, 1.0))],
        };
        let svg = render_svg(&plot);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("uno envelope"));
    }

    #[test]
    fn empty_plot_is_still_valid() {
        let plot = Plot { name: "p".into(), title: "t".into(), curves: vec![("u".into(), vec![(0.0, 0.0)])], envelopes: vec![] };
        let svg = render_svg(&plot);
        assert!(svg.contains("no positive data"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
