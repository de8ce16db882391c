//! Minimal SVG line charts of suboptimality-gap curves: one line per agent
//! with a one-standard-deviation band, fixed policies drawn dashed.

use std::fmt::Write;

use super::output::AggregateCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;
const MAX_POINTS: usize = 1000;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn is_fixed_policy(agent: &str) -> bool {
    agent.starts_with("reward_greedy")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Indices kept when thinning a curve to at most `MAX_POINTS` vertices.
fn thin(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let stride = len.div_ceil(MAX_POINTS);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn nice_ceiling(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(x.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * magnitude >= x {
            return step * magnitude;
        }
    }
    10.0 * magnitude
}

/// Renders the curves as a standalone SVG document.
pub fn render_chart(curves: &[AggregateCurve], title: &str) -> String {
    let x_max = curves
        .iter()
        .filter_map(|c| c.episodes.last().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_top = curves
        .iter()
        .flat_map(|c| c.mean_gap.iter().zip(&c.std_gap).map(|(m, s)| m + s))
        .fold(0.0, f64::max);
    let y_max = nice_ceiling(y_top);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + plot_w * x / x_max;
    let py = |y: f64| TOP + plot_h * (1.0 - y.clamp(0.0, y_max) / y_max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    for i in 0..=5 {
        let y = y_max * i as f64 / 5.0;
        let x = x_max * i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#e0e0e0"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{4}</text>"##,
            py(y),
            LEFT + plot_w,
            LEFT - 6.0,
            py(y) + 4.0,
            format_tick(y)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + plot_h + 18.0,
            format_tick(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode k</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">V*_1 - V^pi_1</text>"#,
        TOP + plot_h / 2.0
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let keep = thin(curve.episodes.len());
        let fixed = is_fixed_policy(&curve.agent);
        if !fixed {
            let mut band = String::new();
            for &j in &keep {
                let _ = write!(band, "{:.2},{:.2} ", px(curve.episodes[j] as f64), py(curve.mean_gap[j] + curve.std_gap[j]));
            }
            for &j in keep.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", px(curve.episodes[j] as f64), py(curve.mean_gap[j] - curve.std_gap[j]));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                band.trim_end()
            );
        }
        let mut line = String::new();
        for &j in &keep {
            let _ = write!(line, "{:.2},{:.2} ", px(curve.episodes[j] as f64), py(curve.mean_gap[j]));
        }
        let dash = if fixed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            line.trim_end()
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&curve.agent)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(agent: &str, n: usize) -> AggregateCurve {
        AggregateCurve {
            agent: agent.into(),
            episodes: (1..=n).collect(),
            mean_gap: (1..=n).map(|k| 1.0 / k as f64).collect(),
            std_gap: vec![0.1; n],
            mean_regret: (1..=n).map(|k| k as f64).collect(),
        }
    }

    #[test]
    fn chart_has_one_line_per_agent_and_dashed_baseline() {
        let svg = render_chart(&[curve("ucb_f(zeta=0)", 5000), curve("reward_greedy", 5000)], "A=4 <H=5>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains("A=4 &lt;H=5&gt;"));
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let idx = thin(5000);
        assert!(idx.len() <= MAX_POINTS + 1);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 4999);
        assert_eq!(thin(10), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn axis_ceiling() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(3.7), 5.0);
        assert_eq!(nice_ceiling(1.2), 2.0);
        assert_eq!(nice_ceiling(0.21), 0.25);
    }
}
