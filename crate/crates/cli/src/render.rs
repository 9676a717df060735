//! Static SVG plots of box-center trajectories.

use std::fmt::Write;

use deeptrack::geometry::BoundingBox;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(id: u64) -> &'static str {
    PALETTE[(id.wrapping_sub(1) % PALETTE.len() as u64) as usize]
}

/// One trajectory per identity, in the order given.
pub struct Series {
    pub id: u64,
    pub samples: Vec<(u64, BoundingBox)>,
}

/// Runs of consecutive samples moving slower than `stationary` box diagonals
/// per frame, each reduced to its mean center. A lone sample is its own run.
pub fn dwell_points(samples: &[(u64, BoundingBox)], stationary: f64) -> Vec<(f64, f64)> {
    if samples.len() == 1 {
        return vec![samples[0].1.center()];
    }
    let diag = samples.iter().map(|s| s.1.diagonal()).sum::<f64>() / samples.len() as f64;
    let slow: Vec<bool> = samples
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].1.center(), w[1].1.center());
            (b.0 - a.0).hypot(b.1 - a.1) / ((w[1].0 - w[0].0) as f64) < stationary * diag
        })
        .collect();

    let mut points = Vec::new();
    let mut k = 0;
    while k < slow.len() {
        if !slow[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < slow.len() && slow[k] {
            k += 1;
        }
        // Steps start..k join samples start..=k.
        let run = &samples[start..=k];
        let n = run.len() as f64;
        let cx = run.iter().map(|s| s.1.x()).sum::<f64>() / n;
        let cy = run.iter().map(|s| s.1.y()).sum::<f64>() / n;
        points.push((cx, cy));
    }
    points
}

pub fn render_svg(series: &[Series], frame_size: (f64, f64), stationary: f64) -> String {
    let (w, h) = frame_size;
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>"
    )
    .unwrap();
    for s in series {
        let c = color(s.id);
        writeln!(svg, "  <g id=\"track-{}\">", s.id).unwrap();
        let points: Vec<String> = s
            .samples
            .iter()
            .map(|(_, b)| format!("{:.2},{:.2}", b.x(), b.y()))
            .collect();
        writeln!(
            svg,
            "    <polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        )
        .unwrap();
        for (x, y) in dwell_points(&s.samples, stationary) {
            writeln!(
                svg,
                "    <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{c}\"/>"
            )
            .unwrap();
        }
        svg.push_str("  </g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
