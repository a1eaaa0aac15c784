use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MapError;
use crate::geometry::{Area, Position};

/// Known sensing-node positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeRegistry {
    nodes: BTreeMap<u16, Position>,
}

impl NodeRegistry {
    pub fn new(nodes: impl IntoIterator<Item = (u16, Position)>) -> Result<Self, MapError> {
        let mut map = BTreeMap::new();
        for (id, p) in nodes {
            if !p.is_finite() {
                return Err(MapError::InvalidParameter(format!(
                    "node {id} has a non-finite position"
                )));
            }
            if map.values().any(|q: &Position| q.distance(&p) == 0.0) {
                return Err(MapError::CoincidentNodes(id));
            }
            if map.insert(id, p).is_some() {
                return Err(MapError::DuplicateNode(id));
            }
        }
        Ok(NodeRegistry { nodes: map })
    }

    /// As [`NodeRegistry::new`], additionally requiring every node inside `area`.
    pub fn within(nodes: impl IntoIterator<Item = (u16, Position)>, area: &Area) -> Result<Self, MapError> {
        let reg = Self::new(nodes)?;
        if let Some((&id, _)) = reg.nodes.iter().find(|(_, p)| !area.contains(p)) {
            return Err(MapError::NodeOutsideArea(id));
        }
        Ok(reg)
    }

    pub fn contains(&self, id: u16) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn position(&self, id: u16) -> Option<Position> {
        self.nodes.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, Position)> + '_ {
        self.nodes.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Regular raster; cell `(i, j)` is centred at
/// `origin + ((i + 0.5) * cell_m, (j + 0.5) * cell_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Position,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub const DEFAULT_CELL_M: f64 = 0.5;

    /// Cells of `cell_m` covering `area` from the origin.
    pub fn covering(area: &Area, cell_m: f64) -> Self {
        GridSpec {
            origin: Position::new(0.0, 0.0),
            cell_m,
            nx: (area.width_m / cell_m).ceil().max(1.0) as usize,
            ny: (area.height_m / cell_m).ceil().max(1.0) as usize,
        }
    }

    pub fn center(&self, i: usize, j: usize) -> Position {
        Position::new(
            self.origin.x + (i as f64 + 0.5) * self.cell_m,
            self.origin.y + (j as f64 + 0.5) * self.cell_m,
        )
    }
}

/// Interpolated raster; `values[j * nx + i]` is cell `(i, j)`. Masked cells
/// lie outside the node hull and hold nearest-neighbour values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMap {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl SpatialMap {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn masked(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.grid.nx + i]
    }

    /// Centre of the largest unmasked cell; ties go to the first in row-major order.
    pub fn argmax(&self) -> Option<Position> {
        let mut best: Option<(usize, f64)> = None;
        for (k, (&v, &m)) in self.values.iter().zip(&self.mask).enumerate() {
            if !m && best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| self.grid.center(k % self.grid.nx, k / self.grid.nx))
    }

    /// Matrix CSV, one line per grid row from `j = 0` upward.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.chunks(self.grid.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self, units: &str) -> String {
        let mask: Vec<String> = self
            .mask
            .chunks(self.grid.nx)
            .map(|r| r.iter().map(|&m| if m { '1' } else { '0' }).collect())
            .collect();
        let v = serde_json::json!({
            "origin_m": [self.grid.origin.x, self.grid.origin.y],
            "cell_m": self.grid.cell_m,
            "nx": self.grid.nx,
            "ny": self.grid.ny,
            "row_order": "south_to_north",
            "units": units,
            "mask_outside_hull": mask,
        });
        serde_json::to_string_pretty(&v).expect("json") + "\n"
    }

    /// Plain PGM heatmap, north up. Masked cells are black; the rest map
    /// linearly onto 1..=255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let inside = self.values.iter().zip(&self.mask).filter(|(_, &m)| !m).map(|(&v, _)| v);
        let (lo, hi) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        writeln!(out, "P2\n{} {}\n255", self.grid.nx, self.grid.ny)?;
        for j in (0..self.grid.ny).rev() {
            let line: Vec<String> = (0..self.grid.nx)
                .map(|i| {
                    if self.masked(i, j) {
                        0
                    } else if hi > lo {
                        1 + ((self.value(i, j) - lo) / (hi - lo) * 254.0).round() as u32
                    } else {
                        255
                    }
                })
                .map(|g| g.to_string())
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull without collinear points.
pub fn convex_hull(points: &[Position]) -> Vec<Position> {
    let mut p: Vec<Pt> = points.iter().map(|q| (q.x, q.y)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p.into_iter().map(|(x, y)| Position::new(x, y)).collect();
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.into_iter().map(|(x, y)| Position::new(x, y)).collect()
}

fn hull_contains(hull: &[Pt], q: Pt, eps: f64) -> bool {
    (0..hull.len()).all(|k| cross(hull[k], hull[(k + 1) % hull.len()], q) >= -eps)
}

/// Keeps the part of convex `poly` where `a.x * x + a.y * y <= b`.
fn clip(poly: &[Pt], a: Pt, b: f64) -> Vec<Pt> {
    let side = |p: Pt| a.0 * p.0 + a.1 * p.1 - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn area(poly: &[Pt]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| poly[k].0 * poly[(k + 1) % n].1 - poly[(k + 1) % n].0 * poly[k].1)
        .sum::<f64>()
        / 2.0
}

/// Half-plane of points at least as close to `p` as to `q`.
fn bisector(p: Pt, q: Pt) -> (Pt, f64) {
    let a = (q.0 - p.0, q.1 - p.1);
    let b = ((q.0 * q.0 + q.1 * q.1) - (p.0 * p.0 + p.1 * p.1)) / 2.0;
    (a, b)
}

/// Sibson natural-neighbour interpolator over a fixed node set.
#[derive(Debug, Clone)]
pub struct NaturalNeighbor {
    sites: Vec<Pt>,
    values: Vec<f64>,
    hull: Vec<Pt>,
    bounds: Vec<Pt>,
    scale: f64,
}

impl NaturalNeighbor {
    pub fn new(points: &[(Position, f64)]) -> Result<Self, MapError> {
        let positions: Vec<Position> = points.iter().map(|p| p.0).collect();
        let hull = convex_hull(&positions);
        if hull.len() < 3 {
            return Err(MapError::InsufficientNodes(points.len()));
        }
        let sites: Vec<Pt> = positions.iter().map(|p| (p.x, p.y)).collect();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &sites {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let scale = (x1 - x0).max(y1 - y0);
        let m = 1e3 * scale;
        Ok(NaturalNeighbor {
            sites,
            values: points.iter().map(|p| p.1).collect(),
            hull: hull.iter().map(|p| (p.x, p.y)).collect(),
            bounds: vec![(x0 - m, y0 - m), (x1 + m, y0 - m), (x1 + m, y1 + m), (x0 - m, y1 + m)],
            scale,
        })
    }

    pub fn in_hull(&self, q: Position) -> bool {
        hull_contains(&self.hull, (q.x, q.y), 1e-12 * self.scale * self.scale)
    }

    /// Sibson weights of `q`, one per site, or `None` outside the hull.
    pub fn weights(&self, q: Position) -> Option<Vec<f64>> {
        let q = (q.x, q.y);
        if let Some(k) = self.sites.iter().position(|&s| s == q) {
            let mut w = vec![0.0; self.sites.len()];
            w[k] = 1.0;
            return Some(w);
        }
        if !hull_contains(&self.hull, q, 1e-12 * self.scale * self.scale) {
            return None;
        }
        // Cell of q once inserted into the diagram.
        let mut cell = self.bounds.clone();
        for &s in &self.sites {
            let (a, b) = bisector(q, s);
            cell = clip(&cell, a, b);
        }
        let mut stolen = vec![0.0; self.sites.len()];
        for (i, &si) in self.sites.iter().enumerate() {
            let mut part = cell.clone();
            for (j, &sj) in self.sites.iter().enumerate() {
                if i != j && part.len() >= 3 {
                    let (a, b) = bisector(si, sj);
                    part = clip(&part, a, b);
                }
            }
            if part.len() >= 3 {
                stolen[i] = area(&part).max(0.0);
            }
        }
        let total: f64 = stolen.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(stolen.into_iter().map(|a| a / total).collect())
    }

    fn nearest(&self, q: Position) -> f64 {
        let mut best = (f64::INFINITY, 0);
        for (k, s) in self.sites.iter().enumerate() {
            let d = (s.0 - q.x).hypot(s.1 - q.y);
            if d < best.0 {
                best = (d, k);
            }
        }
        self.values[best.1]
    }

    /// Interpolated value and whether `q` fell outside the hull.
    pub fn evaluate(&self, q: Position) -> (f64, bool) {
        match self.weights(q) {
            Some(w) => {
                let v: f64 = w.iter().zip(&self.values).map(|(w, v)| w * v).sum();
                let (lo, hi) = self
                    .values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                (v.clamp(lo, hi), false)
            }
            None => (self.nearest(q), true),
        }
    }
}

/// Natural-neighbour map of per-node values over `grid`.
pub fn natural_neighbor(
    values: &BTreeMap<u16, f64>,
    registry: &NodeRegistry,
    grid: &GridSpec,
) -> Result<SpatialMap, MapError> {
    let mut pts = Vec::with_capacity(values.len());
    for (&id, &v) in values {
        let p = registry.position(id).ok_or(MapError::UnknownNode(id))?;
        pts.push((p, v));
    }
    let nn = NaturalNeighbor::new(&pts)?;
    let mut out = SpatialMap {
        grid: *grid,
        values: Vec::with_capacity(grid.nx * grid.ny),
        mask: Vec::with_capacity(grid.nx * grid.ny),
    };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (v, outside) = nn.evaluate(grid.center(i, j));
            out.values.push(v);
            out.mask.push(outside);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let h = convex_hull(&[
            p(0.0, 0.0),
            p(1.0, 0.0),
            p(0.5, 0.5),
            p(1.0, 1.0),
            p(0.0, 1.0),
            p(0.5, 0.0),
        ]);
        assert_eq!(h, vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]);
    }

    #[test]
    fn collinear_nodes_are_rejected() {
        let e = NaturalNeighbor::new(&[(p(0.0, 0.0), 1.0), (p(1.0, 1.0), 2.0), (p(2.0, 2.0), 3.0)]).unwrap_err();
        assert_eq!(e, MapError::InsufficientNodes(3));
        assert!(NaturalNeighbor::new(&[(p(0.0, 0.0), 1.0), (p(1.0, 1.0), 2.0)]).is_err());
    }

    #[test]
    fn square_centre_is_the_corner_mean() {
        let nn = NaturalNeighbor::new(&[
            (p(0.0, 0.0), 1.0),
            (p(1.0, 0.0), 2.0),
            (p(1.0, 1.0), 3.0),
            (p(0.0, 1.0), 6.0),
        ])
        .unwrap();
        let w = nn.weights(p(0.5, 0.5)).unwrap();
        for wi in w {
            assert!((wi - 0.25).abs() < 1e-12);
        }
        assert!((nn.evaluate(p(0.5, 0.5)).0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one_and_reproduce_linear_fields() {
        let sites = [p(0.0, 0.0), p(4.0, 0.5), p(3.0, 3.0), p(0.5, 4.0), p(2.0, 1.5)];
        let pts: Vec<(Position, f64)> = sites.iter().map(|s| (*s, 2.0 * s.x - s.y + 1.0)).collect();
        let nn = NaturalNeighbor::new(&pts).unwrap();
        for q in [p(1.0, 1.0), p(2.5, 2.0), p(1.0, 3.0), p(3.0, 1.0)] {
            let w = nn.weights(q).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x >= 0.0));
            // Sibson coordinates reproduce linear functions.
            assert!((nn.evaluate(q).0 - (2.0 * q.x - q.y + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_hull_is_nearest_and_masked() {
        let nn = NaturalNeighbor::new(&[(p(0.0, 0.0), 1.0), (p(1.0, 0.0), 2.0), (p(0.0, 1.0), 3.0)]).unwrap();
        assert_eq!(nn.evaluate(p(1.0, 1.0)), (2.0, true));
        assert_eq!(nn.evaluate(p(-5.0, 0.2)), (1.0, true));
        assert!(!nn.evaluate(p(0.2, 0.2)).1);
    }

    #[test]
    fn registry_rejects_bad_layouts() {
        assert_eq!(
            NodeRegistry::new([(1, p(0.0, 0.0)), (1, p(1.0, 0.0))]),
            Err(MapError::DuplicateNode(1))
        );
        assert_eq!(
            NodeRegistry::new([(1, p(0.0, 0.0)), (2, p(0.0, 0.0))]),
            Err(MapError::CoincidentNodes(2))
        );
        let area = Area {
            width_m: 2.0,
            height_m: 2.0,
        };
        assert_eq!(
            NodeRegistry::within([(4, p(3.0, 0.0))], &area),
            Err(MapError::NodeOutsideArea(4))
        );
    }

    #[test]
    fn map_exports() {
        let reg = NodeRegistry::new([(1, p(0.0, 0.0)), (2, p(2.0, 0.0)), (3, p(0.0, 2.0))]).unwrap();
        let values: BTreeMap<u16, f64> = [(1, -50.0), (2, -60.0), (3, -70.0)].into();
        let grid = GridSpec {
            origin: p(0.0, 0.0),
            cell_m: 1.0,
            nx: 2,
            ny: 2,
        };
        let m = natural_neighbor(&values, &reg, &grid).unwrap();
        assert_eq!(m.mask, vec![false, false, false, true]);
        let mut pgm = Vec::new();
        m.write_pgm(&mut pgm).unwrap();
        let pgm = String::from_utf8(pgm).unwrap();
        assert!(pgm.starts_with("P2\n2 2\n255\n"));
        assert_eq!(pgm.lines().nth(3).unwrap().split(' ').nth(1), Some("0"));
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
        assert!(m.sidecar_json("dBm").contains("\"01\""));
    }
}
