//! Static SVG rendering of a single curve.

use crate::report::sig9;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 56.0;
const TICKS: usize = 5;

pub struct Figure<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: &'a [(f64, f64)],
    pub marker: Option<(f64, f64)>,
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn short(x: f64) -> String {
    let s = sig9(x);
    if s.contains('e') {
        return format!("{x:.2e}");
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t.is_empty() || t == "-" { "0".into() } else { t.chars().take(6).collect() }
}

impl Figure<'_> {
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> =
            self.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        );
        s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        s += &format!(
            "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
            W / 2.0,
            escape(self.title)
        );
        s += &format!(
            "<path d=\"M{m} {b} H{r} M{m} {b} V{m}\" stroke=\"black\" fill=\"none\"/>\n",
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            s += &format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
                sx(x),
                H - MARGIN + 16.0,
                short(x)
            );
            s += &format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
                MARGIN - 6.0,
                sy(y) + 4.0,
                short(y)
            );
        }
        s += &format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            W / 2.0,
            H - 14.0,
            escape(self.x_label)
        );
        s += &format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            H / 2.0,
            H / 2.0,
            escape(self.y_label)
        );
        if !pts.is_empty() {
            let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            s += &format!(
                "<polyline points=\"{}\" stroke=\"steelblue\" stroke-width=\"2\" fill=\"none\"/>\n",
                d.join(" ")
            );
        }
        if let Some((x, y)) = self.marker {
            s += &format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"firebrick\"/>\n",
                sx(x),
                sy(y)
            );
        }
        s += "</svg>\n";
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline() {
        let pts = [(0.0, 1.0), (0.25, 0.1), (0.5, 0.0)];
        let svg = Figure { title: "a < b", x_label: "x", y_label: "y", points: &pts, marker: Some((0.25, 0.1)) }
            .to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn degenerate_data_still_renders() {
        let svg = Figure { title: "", x_label: "", y_label: "", points: &[(1.0, 1.0)], marker: None }.to_svg();
        assert!(!svg.contains("NaN"));
        let svg = Figure { title: "", x_label: "", y_label: "", points: &[], marker: None }.to_svg();
        assert!(svg.ends_with("</svg>\n"));
    }
}
