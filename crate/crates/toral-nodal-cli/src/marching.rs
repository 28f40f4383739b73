//! Marching squares with linear interpolation on a uniform grid over the
//! unit square, plus CSV/SVG emitters for the resulting polylines.

use rayon::prelude::*;
use toral_nodal::eigenfun::Eigenfunction;

/// A chained contour polyline.
pub type Polyline = Vec<(f64, f64)>;

/// Grid of `Re phi` on `(n+1) x (n+1)` vertices of `[0, 1]^2`.
pub struct NodalGrid {
    pub n: usize,
    /// Row-major values, `values[j * (n + 1) + i]` at `(i/n, j/n)`.
    pub values: Vec<f64>,
}

impl NodalGrid {
    pub fn evaluate(phi: &Eigenfunction, n: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..=n)
            .into_par_iter()
            .map(|j| {
                let y = j as f64 / n as f64;
                (0..=n).map(|i| phi.evaluate(&[i as f64 / n as f64, y]).re).collect()
            })
            .collect();
        Self { n, values: rows.into_iter().flatten().collect() }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    /// Max absolute difference between grid neighbours divided by the
    /// cell size: a finite-difference estimate of `max |grad phi|`.
    pub fn gradient_bound(&self) -> f64 {
        let n = self.n;
        let h = 1.0 / n as f64;
        let mut worst: f64 = 0.0;
        for j in 0..=n {
            for i in 0..=n {
                if i + 1 <= n {
                    worst = worst.max((self.at(i + 1, j) - self.at(i, j)).abs() / h);
                }
                if j + 1 <= n {
                    worst = worst.max((self.at(i, j + 1) - self.at(i, j)).abs() / h);
                }
            }
        }
        worst
    }
}

/// Extract the zero contours of the grid as chained polylines.
pub fn contours(grid: &NodalGrid) -> Vec<Polyline> {
    let n = grid.n;
    let h = 1.0 / n as f64;
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    // Edge interpolation: zero crossing between a and b.
    let lerp = |a: f64, b: f64| -> f64 {
        if (a - b).abs() < 1e-300 {
            0.5
        } else {
            a / (a - b)
        }
    };
    for j in 0..n {
        for i in 0..n {
            let v00 = grid.at(i, j);
            let v10 = grid.at(i + 1, j);
            let v01 = grid.at(i, j + 1);
            let v11 = grid.at(i + 1, j + 1);
            let x0 = i as f64 * h;
            let y0 = j as f64 * h;
            let mut case = 0u8;
            if v00 > 0.0 {
                case |= 1;
            }
            if v10 > 0.0 {
                case |= 2;
            }
            if v11 > 0.0 {
                case |= 4;
            }
            if v01 > 0.0 {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            // Crossing points on the four cell edges.
            let bottom = (x0 + h * lerp(v00, v10), y0);
            let top = (x0 + h * lerp(v01, v11), y0 + h);
            let left = (x0, y0 + h * lerp(v00, v01));
            let right = (x0 + h, y0 + h * lerp(v10, v11));
            let mut push = |a: (f64, f64), b: (f64, f64)| segments.push((a, b));
            match case {
                1 | 14 => push(bottom, left),
                2 | 13 => push(bottom, right),
                3 | 12 => push(left, right),
                4 | 11 => push(right, top),
                6 | 9 => push(bottom, top),
                7 | 8 => push(left, top),
                5 | 10 => {
                    // Saddle cell: split by the center average.
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    let flip = (case == 5) == (center > 0.0);
                    if flip {
                        push(bottom, left);
                        push(right, top);
                    } else {
                        push(bottom, right);
                        push(left, top);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain_segments(segments)
}

/// Join segments sharing endpoints (to 1e-9) into polylines.
fn chain_segments(segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Polyline> {
    use std::collections::HashMap;
    let key = |p: (f64, f64)| -> (i64, i64) {
        ((p.0 * 1e9).round() as i64, (p.1 * 1e9).round() as i64)
    };
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(key(*a)).or_default().push(idx);
        adjacency.entry(key(*b)).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut line = vec![a, b];
        // Extend forwards then backwards.
        for end in 0..2 {
            loop {
                let tip = if end == 0 { *line.last().unwrap() } else { line[0] };
                let Some(cands) = adjacency.get(&key(tip)) else { break };
                let Some(&next) = cands.iter().find(|&&i| !used[i]) else { break };
                used[next] = true;
                let (p, q) = segments[next];
                let fresh = if key(p) == key(tip) { q } else { p };
                if end == 0 {
                    line.push(fresh);
                } else {
                    line.insert(0, fresh);
                }
            }
        }
        out.push(line);
    }
    // Deterministic order: by first vertex.
    out.sort_by(|a, b| {
        a[0].partial_cmp(&b[0]).unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// CSV rows `polyline,x,y`.
pub fn contours_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("polyline,x,y\n");
    for (k, line) in lines.iter().enumerate() {
        for (x, y) in line {
            out.push_str(&format!("{k},{x},{y}\n"));
        }
    }
    out
}

/// Minimal SVG rendering of the contour set on the unit square.
pub fn contours_svg(lines: &[Polyline]) -> String {
    let mut out = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\" width=\"512\" height=\"512\">\n",
    );
    out.push_str("<rect width=\"1\" height=\"1\" fill=\"white\"/>\n");
    for line in lines {
        if line.is_empty() {
            continue;
        }
        out.push_str("<path d=\"");
        for (k, (x, y)) in line.iter().enumerate() {
            let c = if k == 0 { 'M' } else { 'L' };
            out.push_str(&format!("{c}{x} {y} "));
        }
        out.push_str("\" fill=\"none\" stroke=\"black\" stroke-width=\"0.002\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use toral_nodal::eigenfun::make_geodesic_vanisher;
    use toral_nodal::lattice::LatticePoint;

    #[test]
    fn vertical_nodal_lines_of_sine() {
        // sin(2 pi x) vanishes on x = 0 and x = 1/2.
        let phi = make_geodesic_vanisher(&LatticePoint::new(vec![1, 0]), 0.0, 1).unwrap();
        let grid = NodalGrid::evaluate(&phi, 64);
        let lines = contours(&grid);
        assert!(!lines.is_empty());
        let mut near_zero = 0;
        let mut near_half = 0;
        for line in &lines {
            for &(x, _) in line {
                if x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9 {
                    near_zero += 1;
                } else if (x - 0.5).abs() < 1e-9 {
                    near_half += 1;
                } else {
                    panic!("unexpected contour vertex at x = {x}");
                }
            }
        }
        assert!(near_zero > 0 && near_half > 0);
    }

    #[test]
    fn contour_vertices_are_near_zeros() {
        // Every emitted vertex satisfies the cell-size gradient bound.
        let phi = make_geodesic_vanisher(&LatticePoint::new(vec![2, -1]), 0.3, 2).unwrap();
        let n = 128;
        let grid = NodalGrid::evaluate(&phi, n);
        let bound = 10.0 * grid.gradient_bound() / n as f64;
        for line in contours(&grid) {
            for (x, y) in line {
                let v = phi.evaluate(&[x, y]).norm();
                assert!(v < bound, "|phi({x}, {y})| = {v} >= {bound}");
            }
        }
    }
}
