//! Stroke-only SVG renders of planar partitions.

use std::fmt::Write;

use crate::geometry::{polygon_vertices_2d, ConvexBody, GeometryError, HPolytope, Window};

/// Renders the cells of a planar partition; `scale` is pixels per unit.
///
/// The y axis points up, as in the window coordinates.
pub fn render_cells(
    window: &Window,
    cells: &[HPolytope],
    scale: f64,
) -> Result<String, GeometryError> {
    if window.dim() != 2 {
        return Err(GeometryError::NotPlanar(window.dim()));
    }
    let lo = [window.support(&[-1.0, 0.0])?, window.support(&[0.0, -1.0])?];
    let hi = [window.support(&[1.0, 0.0])?, window.support(&[0.0, 1.0])?];
    let lo = [-lo[0], -lo[1]];
    let width = (hi[0] - lo[0]) * scale;
    let height = (hi[1] - lo[1]) * scale;
    let px = |p: &[f64]| ((p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3}" height="{height:.3}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(
        out,
        r#"<g fill="none" stroke="black" stroke-width="1" stroke-linejoin="round">"#
    );
    for cell in cells {
        let vs = polygon_vertices_2d(cell)?;
        if vs.len() < 3 {
            continue;
        }
        let points: Vec<String> = vs
            .iter()
            .map(|v| {
                let (x, y) = px(v);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}"/>"#, points.join(" "));
    }
    if let Window::Ball { center, radius } = window {
        let (cx, cy) = px(center);
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}"/>"#,
            radius * scale
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_at_ten_pixels() {
        let w = Window::unit_cube(2);
        let cells = vec![
            HPolytope::from_box(&[0.0, 0.0], &[0.5, 1.0]),
            HPolytope::from_box(&[0.5, 0.0], &[1.0, 1.0]),
        ];
        let svg = render_cells(&w, &cells, 10.0).unwrap();
        assert!(svg.contains(r#"width="10.000""#));
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains("5.000,0.000"));
        assert!(!svg.contains("fill=\"black\""));
    }

    #[test]
    fn rejects_three_dimensions() {
        let w = Window::unit_cube(3);
        assert!(matches!(
            render_cells(&w, &[], 1.0),
            Err(GeometryError::NotPlanar(3))
        ));
    }
}
