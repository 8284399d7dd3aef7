//! Minimal self-contained SVG line plot for two curves on
//! `e ∈ [0, 0.5]`, `τ ∈ [0, 1]`.

use std::fmt::Write;

use fpep_core::SecurityCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const E_MAX: f64 = 0.5;

fn x(e: f64) -> f64 {
    LEFT + e / E_MAX * (WIDTH - LEFT - RIGHT)
}

fn y(tau: f64) -> f64 {
    HEIGHT - BOTTOM - tau * (HEIGHT - TOP - BOTTOM)
}

/// `(curve, stroke colour, legend label)`.
pub type Series<'a> = (&'a SecurityCurve, &'a str, &'a str);

pub fn render(series: &[Series<'_>], comment: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, "<!-- {comment} -->");
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" style="fill:#ffffff"/>"#
    );

    let text = "font-family:sans-serif;font-size:12px;fill:#000000";
    let axis = "stroke:#000000;stroke-width:1";
    let grid = "stroke:#dddddd;stroke-width:1";
    for k in 0..=5 {
        let e = 0.1 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" style="{grid}"/>"#,
            x(e),
            y(0.0),
            y(1.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" style="{text};text-anchor:middle">{e:.1}</text>"#,
            x(e),
            y(0.0) + 18.0
        );
    }
    for k in 0..=5 {
        let t = 0.2 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" style="{grid}"/>"#,
            x(0.0),
            y(t),
            x(E_MAX)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" style="{text};text-anchor:end">{t:.1}</text>"#,
            x(0.0) - 8.0,
            y(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" style="{axis}"/>"#,
        x(0.0),
        y(0.0),
        x(E_MAX)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" style="{axis}"/>"#,
        x(0.0),
        y(0.0),
        y(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" style="{text};text-anchor:middle">QBER e</text>"#,
        0.5 * (x(0.0) + x(E_MAX)),
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0:.2}" style="{text};text-anchor:middle" transform="rotate(-90 20 {0:.2})">discarded fraction tau</text>"#,
        0.5 * (y(0.0) + y(1.0))
    );

    for (k, (curve, colour, label)) in series.iter().enumerate() {
        let points: Vec<String> = curve
            .samples
            .iter()
            .map(|&(e, t)| format!("{:.3},{:.3}", x(e), y(t)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-kind="{}" points="{}" style="fill:none;stroke:{colour};stroke-width:2"/>"#,
            curve.kind,
            points.join(" ")
        );
        if let Some(&(e, t)) = curve.samples.last() {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" style="fill:{colour}"><title>{} e={e:.6} tau={t:.6}</title></circle>"#,
                x(e),
                y(t),
                curve.kind
            );
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" style="stroke:{colour};stroke-width:2"/>"#,
            x(0.0) + 12.0,
            x(0.0) + 36.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" style="{text}">{label}</text>"#,
            x(0.0) + 42.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
