//! Hand-written SVG: a heatmap, a scatter plot and a line plot.

use std::fmt::Write as _;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

fn open(title: &str) -> String {
    let full = SIZE + 2.0 * MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{full}\" height=\"{full}\" viewBox=\"0 0 {full} {full}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        MARGIN * 0.6,
        escape(title)
    )
}

fn close(mut s: String, x_label: &str, y_label: &str) -> String {
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        MARGIN + SIZE / 2.0,
        SIZE + 1.7 * MARGIN,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">{}</text>",
        MARGIN * 0.4,
        MARGIN + SIZE / 2.0,
        MARGIN * 0.4,
        MARGIN + SIZE / 2.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Diverging colour for integer values in roughly [−4, 4].
pub fn phase_colour(v: i32) -> String {
    let t = (v as f64 / 4.0).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({:.0},{:.0},{:.0})", r, g, b)
}

/// `n_rows × n_cols` cells, row 0 at the bottom. `None` cells are drawn
/// black.
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub n_rows: usize,
    pub n_cols: usize,
    pub fill: Vec<Option<String>>,
    /// Extra outlined cells, each with its stroke colour.
    pub outlines: Vec<(usize, &'a str)>,
}

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let mut s = open(self.title);
        let w = SIZE / self.n_cols as f64;
        let h = SIZE / self.n_rows as f64;
        let cell_xy = |idx: usize| {
            let (r, c) = (idx / self.n_cols, idx % self.n_cols);
            (MARGIN + c as f64 * w, MARGIN + SIZE - (r + 1) as f64 * h)
        };
        for (idx, fill) in self.fill.iter().enumerate() {
            let (x, y) = cell_xy(idx);
            let colour = fill.as_deref().unwrap_or("black");
            let _ = writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{colour}\"/>",
                w + 0.05,
                h + 0.05
            );
        }
        for &(idx, stroke) in &self.outlines {
            let (x, y) = cell_xy(idx);
            let _ = writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{stroke}\" fill-opacity=\"0.8\"/>"
            );
        }
        close(s, self.x_label, self.y_label)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Points with a highlight flag (drawn red and larger).
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64, bool)]) -> String {
    let mut s = open(title);
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (y0, y1) = bounds(points.iter().map(|p| p.1));
    for &(x, y, hi) in points.iter().filter(|p| !p.2).chain(points.iter().filter(|p| p.2)) {
        let px = MARGIN + (x - x0) / (x1 - x0) * SIZE;
        let py = MARGIN + SIZE - (y - y0) / (y1 - y0) * SIZE;
        let (r, fill) = if hi { (4.0, "red") } else { (2.0, "steelblue") };
        let _ = writeln!(s, "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"{r}\" fill=\"{fill}\"/>");
    }
    close(s, x_label, y_label)
}

/// Polylines, one per named series.
pub fn lines(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const COLOURS: [&str; 6] = ["steelblue", "firebrick", "seagreen", "darkorange", "purple", "black"];
    let mut s = open(title);
    let (x0, x1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    MARGIN + (x - x0) / (x1 - x0) * SIZE,
                    MARGIN + SIZE - (y - y0) / (y1 - y0) * SIZE
                )
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"><title>{}</title></polyline>",
            path.join(" "),
            escape(name)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{colour}\">{}</text>",
            MARGIN + SIZE + 4.0,
            MARGIN + 12.0 * (i + 1) as f64,
            escape(name)
        );
    }
    close(s, x_label, y_label)
}
