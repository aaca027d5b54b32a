//! Static SVG plots of reachable sets with optional trajectory overlays.

use std::fmt::Write as _;

use crate::geometry::HyperRect;
use crate::reach::ReachSet;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// Affine map from data coordinates (first two dimensions) to pixels:
/// `px = sx * x + tx`, `py = sy * y + ty`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub sx: f64,
    pub tx: f64,
    pub sy: f64,
    pub ty: f64,
}

impl Transform {
    fn fit(view: &HyperRect) -> Self {
        let (x0, x1) = (view.lo()[0], view.hi()[0]);
        let (y0, y1) = if view.dim() > 1 {
            (view.lo()[1], view.hi()[1])
        } else {
            (0.0, 1.0)
        };
        let sx = (WIDTH - 2.0 * MARGIN) / (x1 - x0).max(1e-12);
        let sy = -(HEIGHT - 2.0 * MARGIN) / (y1 - y0).max(1e-12);
        Transform {
            sx,
            tx: MARGIN - sx * x0,
            sy,
            ty: HEIGHT - MARGIN - sy * y0,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.sx * x + self.tx, self.sy * y + self.ty)
    }
}

fn yrange(r: &HyperRect) -> (f64, f64) {
    if r.dim() > 1 {
        (r.lo()[1], r.hi()[1])
    } else {
        (0.0, 1.0)
    }
}

/// Draws one `<rect>` per fragment of every step, the domain outline as a
/// `<path>`, and each overlay trajectory as a `<polyline>`. The transform is
/// recorded in `<metadata>`.
pub fn render(reach: &ReachSet, domain: &HyperRect, overlay: &[Vec<Vec<f64>>]) -> String {
    let mut view = domain.clone();
    for k in 0..reach.steps.len() {
        view.expand_to(&reach.hull(k));
    }
    for traj in overlay {
        for x in traj {
            if let Ok(p) = HyperRect::point(&x[..view.dim().min(x.len())]) {
                if p.dim() == view.dim() {
                    view.expand_to(&p);
                }
            }
        }
    }
    let t = Transform::fit(&view);
    let horizon = reach.steps.len().max(2) - 1;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<metadata>{{"transform":"px = {} * x1 + {}; py = {} * x2 + {}"}}</metadata>"#,
        t.sx, t.tx, t.sy, t.ty
    );

    let (dx0, dy0) = t.apply(domain.lo()[0], yrange(domain).0);
    let (dx1, dy1) = t.apply(domain.hi()[0], yrange(domain).1);
    let _ = writeln!(
        s,
        r##"<path d="M {dx0:.3} {dy0:.3} L {dx1:.3} {dy0:.3} L {dx1:.3} {dy1:.3} L {dx0:.3} {dy1:.3} Z" fill="none" stroke="#888" stroke-dasharray="4 3"/>"##
    );

    for (k, frags) in reach.steps.iter().enumerate() {
        // early steps blue, late steps red
        let a = k as f64 / horizon as f64;
        let color = format!(
            "rgb({},{},{})",
            (40.0 + 200.0 * a) as u8,
            60,
            (220.0 - 180.0 * a) as u8
        );
        for f in frags {
            let (ylo, yhi) = yrange(&f.rect);
            let (px0, py0) = t.apply(f.rect.lo()[0], yhi);
            let (px1, py1) = t.apply(f.rect.hi()[0], ylo);
            let _ = writeln!(
                s,
                r#"<rect x="{px0:.3}" y="{py0:.3}" width="{:.3}" height="{:.3}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="0.5"><title>k={k} cell={}</title></rect>"#,
                (px1 - px0).max(0.0),
                (py1 - py0).max(0.0),
                f.cell
            );
        }
    }

    for traj in overlay {
        let pts: Vec<String> = traj
            .iter()
            .map(|x| {
                let (px, py) = t.apply(x[0], if x.len() > 1 { x[1] } else { 0.0 });
                format!("{px:.3},{py:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#222" stroke-width="0.4" stroke-opacity="0.6"/>"##,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reach::Fragment;

    #[test]
    fn one_rect_per_fragment() {
        let r = |b: &[(f64, f64)]| HyperRect::from_bounds(b).unwrap();
        let reach = ReachSet {
            steps: vec![
                vec![Fragment { cell: 0, rect: r(&[(0.0, 1.0), (0.0, 1.0)]) }],
                vec![
                    Fragment { cell: 0, rect: r(&[(0.0, 0.5), (0.0, 1.0)]) },
                    Fragment { cell: 1, rect: r(&[(1.0, 2.0), (0.0, 1.0)]) },
                ],
            ],
            step_seconds: vec![0.0, 0.0],
            exterior_volume: vec![0.0, 0.0],
        };
        let domain = r(&[(0.0, 2.0), (0.0, 2.0)]);
        let svg = render(&reach, &domain, &[vec![vec![0.1, 0.1], vec![0.2, 0.3]]]);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("<metadata>"));
    }

    #[test]
    fn transform_maps_view_to_margins() {
        let view = HyperRect::from_bounds(&[(-4.0, 4.0), (-3.0, 3.0)]).unwrap();
        let t = Transform::fit(&view);
        let (x, y) = t.apply(-4.0, -3.0);
        assert!((x - MARGIN).abs() < 1e-9 && (y - (HEIGHT - MARGIN)).abs() < 1e-9);
        let (x, y) = t.apply(4.0, 3.0);
        assert!((x - (WIDTH - MARGIN)).abs() < 1e-9 && (y - MARGIN).abs() < 1e-9);
    }
}
