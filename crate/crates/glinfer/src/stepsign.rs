//! Step-sign plots: a compact rendering of a selected 1-d model that shows
//! where the changepoints sit and which direction each one jumps.
//!
//! Each detected location draws a dashed vertical marker, and the stretch
//! between consecutive locations is drawn as a horizontal bar at +1 or -1
//! according to the sign of the jump that opened the stretch.  The plot
//! depends only on locations and signs, never on the magnitude of the data,
//! so rescaling the input by any positive constant leaves it unchanged.

use glinfer_core::contrast::SelectedModel1D;

/// Horizontal bar segments at the requested sign level.  Returns
/// `(start, end, sign)` with 1-based inclusive positions.
fn sign_segments(model: &SelectedModel1D) -> Vec<(usize, usize, i8)> {
    let mut out = Vec::with_capacity(model.locations.len());
    for (j, (&loc, &s)) in model.locations.iter().zip(&model.signs).enumerate() {
        let end = if j + 1 < model.locations.len() {
            model.locations[j + 1] - 1
        } else {
            model.n
        };
        out.push((loc, end, s));
    }
    out
}

/// Plain-text rendering, one column per data index.
pub fn render_txt(model: &SelectedModel1D) -> String {
    let n = model.n;
    let mut plus = vec![b' '; n];
    let mut minus = vec![b' '; n];
    let mut marks = vec![b' '; n];
    for (start, end, s) in sign_segments(model) {
        let row = if s >= 0 { &mut plus } else { &mut minus };
        for cell in row.iter_mut().take(end).skip(start - 1) {
            *cell = b'=';
        }
        marks[start - 1] = b'|';
    }
    let mut out = String::new();
    out.push_str(&format!("+1 | {}\n", String::from_utf8(plus).unwrap()));
    out.push_str(&format!(" 0 | {}\n", "-".repeat(n)));
    out.push_str(&format!("-1 | {}\n", String::from_utf8(minus).unwrap()));
    out.push_str(&format!("     {}\n", String::from_utf8(marks).unwrap()));
    let labels: Vec<String> = model
        .locations
        .iter()
        .zip(&model.signs)
        .map(|(&l, &s)| format!("{}{}", l, if s >= 0 { "(+)" } else { "(-)" }))
        .collect();
    out.push_str(&format!("locations: {}\n", labels.join(" ")));
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 200.0;
const PAD: f64 = 40.0;

fn x_of(i: usize, n: usize) -> f64 {
    if n <= 1 {
        SVG_W / 2.0
    } else {
        PAD + (i as f64 - 1.0) * (SVG_W - 2.0 * PAD) / (n as f64 - 1.0)
    }
}

/// SVG rendering in a fixed 640 x 200 viewport.
pub fn render_svg(model: &SelectedModel1D) -> String {
    let n = model.n;
    let y_zero = SVG_H / 2.0;
    let y_plus = SVG_H / 2.0 - 50.0;
    let y_minus = SVG_H / 2.0 + 50.0;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{y_zero}\" x2=\"{:.1}\" y2=\"{y_zero}\" \
         stroke=\"#999\" stroke-width=\"1\"/>\n",
        x_of(1, n),
        x_of(n, n)
    ));
    for (start, end, sign) in sign_segments(model) {
        let y = if sign >= 0 { y_plus } else { y_minus };
        s.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{y}\" x2=\"{:.1}\" y2=\"{y}\" \
             stroke=\"#000\" stroke-width=\"3\"/>\n",
            x_of(start, n),
            x_of(end, n)
        ));
        s.push_str(&format!(
            "  <line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" \
             stroke=\"#555\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
            x_of(start, n),
            y_plus - 15.0,
            y_minus + 15.0
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}{}</text>\n",
            x_of(start, n),
            y_minus + 30.0,
            start,
            if sign >= 0 { "+" } else { "-" }
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">+1</text>\n",
        PAD - 6.0,
        y_plus + 4.0
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">-1</text>\n",
        PAD - 6.0,
        y_minus + 4.0
    ));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use glinfer_core::contrast::SelectedModel1D;
    use glinfer_core::path::run_path;
    use glinfer_core::PenaltyMatrix;
    use nalgebra::DVector;

    fn model(locations: Vec<usize>, signs: Vec<i8>, n: usize) -> SelectedModel1D {
        SelectedModel1D { n, locations, signs }
    }

    #[test]
    fn txt_marks_segments_at_the_right_heights() {
        let m = model(vec![3, 6], vec![1, -1], 8);
        let txt = render_txt(&m);
        let lines: Vec<&str> = txt.lines().collect();
        // Positive bar spans columns 3..=5, negative bar 6..=8.
        assert_eq!(lines[0], "+1 |   ===   ");
        assert_eq!(lines[2], "-1 |      ===");
        assert!(lines[3].contains('|'));
        assert!(lines[4].contains("3(+) 6(-)"));
    }

    #[test]
    fn svg_contains_markers_and_both_levels() {
        let m = model(vec![2, 5], vec![-1, 1], 9);
        let svg = render_svg(&m);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains(">2-<"));
        assert!(svg.contains(">5+<"));
    }

    #[test]
    fn plot_is_invariant_under_positive_rescaling_of_the_data() {
        let d = PenaltyMatrix::diff1(12).unwrap();
        let raw: Vec<f64> = (0..12)
            .map(|i| if i >= 7 { 1.0 } else { 0.0 } + 0.05 * ((i * i) as f64).sin())
            .collect();
        let y = DVector::from_vec(raw);
        let y_scaled = &y * 37.5;

        let t1 = run_path(&y, &d, Some(2)).unwrap();
        let t2 = run_path(&y_scaled, &d, Some(2)).unwrap();
        let m1 = SelectedModel1D::from_step(&t1, 2).unwrap();
        let m2 = SelectedModel1D::from_step(&t2, 2).unwrap();

        assert_eq!(render_txt(&m1), render_txt(&m2));
        assert_eq!(render_svg(&m1), render_svg(&m2));
    }
}
