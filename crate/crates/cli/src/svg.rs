//! Static tail plot: `log10 P(f_n >= t)` against `t` for each checkpoint,
//! with the fitted envelope dashed.

use std::fmt::Write;

use nilwalk_core::stats::{ConcentrationFit, TailPoint};

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1b6ca8", "#d1495b", "#2a9d8f", "#e9a03b", "#6d597a", "#3d405b"];

pub fn tail_plot(curves: &[(u64, Vec<TailPoint>)], fit: &ConcentrationFit) -> String {
    let t_max = curves
        .iter()
        .flat_map(|(_, c)| c.iter().map(|p| p.t))
        .fold(0.0, f64::max)
        .max(1e-12);
    let floor = curves
        .iter()
        .flat_map(|(_, c)| c.iter().filter(|p| p.p_hat > 0.0).map(|p| p.p_hat.log10()))
        .fold(0.0, f64::min)
        .min(-1.0)
        .floor();
    let x = |t: f64| PAD + (W - 2.0 * PAD) * t / t_max;
    let y = |lp: f64| PAD + (H - 2.0 * PAD) * lp / floor;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        s,
        r##"<path d="M{PAD} {PAD} V{:.3} H{:.3}" fill="none" stroke="#000000"/>"##,
        H - PAD,
        W - PAD
    )
    .unwrap();
    for k in 0..=(-floor as i64) {
        let yy = y(-(k as f64));
        writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">1e-{k}</text>"#, PAD - 6.0, yy + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">t (max {t_max:.4})</text>"#, W / 2.0, H - 15.0).unwrap();

    for (i, (n, pts)) in curves.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let d: Vec<String> = pts
            .iter()
            .filter(|p| p.p_hat > 0.0)
            .map(|p| format!("{:.3},{:.3}", x(p.t), y(p.p_hat.log10())))
            .collect();
        if d.is_empty() {
            continue;
        }
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}"/>"#, d.join(" ")).unwrap();
        writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" fill="{colour}">n = {n}</text>"#,
            W - PAD - 80.0,
            PAD + 16.0 * (i as f64 + 1.0)
        )
        .unwrap();
    }

    if let (Some(a), Some(c1), Some(c2)) = (fit.alpha_tail, fit.c1, fit.c2) {
        let d: Vec<String> = (0..=100)
            .map(|i| t_max * i as f64 / 100.0)
            .map(|t| (t, (c2.ln() - c1 * t.powf(a)) / std::f64::consts::LN_10))
            .filter(|&(_, lp)| lp <= 0.0 && lp >= floor)
            .map(|(t, lp)| format!("{:.3},{:.3}", x(t), y(lp)))
            .collect();
        if !d.is_empty() {
            writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#000000" stroke-dasharray="5,4"/>"##,
                d.join(" ")
            )
            .unwrap();
        }
        writeln!(s, r#"<text x="{:.3}" y="{:.3}">alpha_tail = {a:.4}</text>"#, PAD + 10.0, H - PAD - 10.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
