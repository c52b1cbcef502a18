//! Sign structure of `u` and `v` over a rectangle of the quadrant
//! `x ≥ 0, y ≥ 0`, the curves `v = 0` that separate the sign domains of
//! `v`, and audits of those curves.
//!
//! Tracing works on `w = v/(xy)`, which has the sign of `v` inside the
//! quadrant and finite limits on the axes: `−u_y(0, y)/y` on `x = 0` and
//! `u_x(x, 0)/x` on `y = 0`. The trivial zero lines of `v` on both axes
//! therefore never produce curves, and a curve reaching `x = 0` ends at a
//! stationary point of `u(0, ·)`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical_line::{refine_root, u_line, LineError, StationaryPoint};
use crate::eta_integral::{eta, uv_from, LineKernel, QuadratureError, QuadratureSpec, Route};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid region: {0}")]
    Region(String),
    #[error("evaluation failed at ({x}, {y}): {source}")]
    Node {
        x: f64,
        y: f64,
        #[source]
        source: QuadratureError,
    },
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("curves can only be traced on a grid of v")]
    WrongField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 100.0,
            nx: 128,
            ny: 512,
        }
    }
}

impl Region {
    pub fn validate(&self) -> Result<(), MapError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(MapError::Region("bounds must be finite".into()));
        }
        if self.x_min < 0.0 || self.x_max > 2.0 || self.x_min >= self.x_max {
            return Err(MapError::Region(format!(
                "need 0 <= x_min < x_max <= 2, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.y_min < 0.0 || self.y_min >= self.y_max {
            return Err(MapError::Region(format!(
                "need 0 <= y_min < y_max, got [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(MapError::Region("nx and ny must be at least 2".into()));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            return self.x_max;
        }
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            return self.y_max;
        }
        self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    /// Parses `x0:x1:y0:y1`.
    pub fn parse_bounds(text: &str, nx: usize, ny: usize) -> Result<Self, MapError> {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| MapError::Region(format!("cannot parse '{text}': {e}")))?;
        let [x_min, x_max, y_min, y_max] = parts[..] else {
            return Err(MapError::Region(format!("expected x0:x1:y0:y1, got '{text}'")));
        };
        let r = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    U,
    V,
}

/// Values of `u` and `v` on the grid nodes, row-major with rows indexed by
/// `y`. `signs` refers to `field`; a node gets sign 0 only when the value is
/// within its error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignGrid {
    pub region: Region,
    pub field: Field,
    pub signs: Vec<Vec<i8>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Per-node error bound (shared by `u` and `v`).
    pub bounds: Vec<Vec<f64>>,
    /// Largest per-node bound.
    pub bound: f64,
}

impl SignGrid {
    pub fn values(&self) -> &Vec<Vec<f64>> {
        match self.field {
            Field::U => &self.u,
            Field::V => &self.v,
        }
    }

    /// Node sign of `u` or `v` with the zero band applied.
    pub fn sign_of(&self, field: Field, i: usize, j: usize) -> i8 {
        let value = match field {
            Field::U => self.u[j][i],
            Field::V => self.v[j][i],
        };
        band_sign(value, self.bounds[j][i])
    }
}

fn band_sign(value: f64, bound: f64) -> i8 {
    if value.abs() <= bound {
        0
    } else if value > 0.0 {
        1
    } else {
        -1
    }
}

/// Evaluates `u`, `v` on every node of `region`, one quadrature kernel per
/// row.
pub fn sign_grid(region: &Region, field: Field, spec: &QuadratureSpec) -> Result<SignGrid, MapError> {
    region.validate()?;
    let rows: Vec<Vec<(f64, f64, f64)>> = (0..region.ny)
        .into_par_iter()
        .map(|j| {
            let y = region.y(j);
            let node_err = |x: f64| {
                move |source| MapError::Node { x, y, source }
            };
            let kernel = LineKernel::g(y, region.x_max, 0, spec).map_err(node_err(region.x_max))?;
            (0..region.nx)
                .map(|i| {
                    let x = region.x(i);
                    let (value, bound) = kernel.eval(x).map_err(node_err(x))?;
                    let r = uv_from(x, y, value, bound);
                    Ok((r.u.value, r.v.value, bound))
                })
                .collect()
        })
        .collect::<Result<_, MapError>>()?;
    let mut grid = SignGrid {
        region: *region,
        field,
        signs: Vec::with_capacity(region.ny),
        u: Vec::with_capacity(region.ny),
        v: Vec::with_capacity(region.ny),
        bounds: Vec::with_capacity(region.ny),
        bound: 0.0,
    };
    for row in rows {
        grid.u.push(row.iter().map(|r| r.0).collect());
        grid.v.push(row.iter().map(|r| r.1).collect());
        grid.bounds.push(row.iter().map(|r| r.2).collect());
        grid.bound = row.iter().fold(grid.bound, |m, r| m.max(r.2));
    }
    grid.signs = (0..region.ny)
        .map(|j| (0..region.nx).map(|i| grid.sign_of(field, i, j)).collect())
        .collect();
    Ok(grid)
}

/// A scalar field whose sign pattern is traced, with the `(u, v)` pair that
/// is reported along the curves.
pub trait TraceField: Sync {
    /// Sign-carrying value and its error bound.
    fn w(&self, x: f64, y: f64) -> Result<(f64, f64), MapError>;
    fn uv(&self, x: f64, y: f64) -> Result<(f64, f64), MapError>;
}

/// `w = v/(xy)` for η, continued onto the axes.
pub struct EtaField<'a> {
    pub spec: &'a QuadratureSpec,
}

impl TraceField for EtaField<'_> {
    fn w(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
        let node = |source| MapError::Node { x, y, source };
        match (x == 0.0, y == 0.0) {
            (false, false) => {
                let r = eta(Complex64::new(x, y), self.spec, Route::ViaG).map_err(node)?;
                let s = x * y;
                Ok((r.value.im / s, r.abs_error_bound / s))
            }
            (true, false) => {
                let d = u_line(y, 1, self.spec)?;
                Ok((-d.value / y, d.bound / y))
            }
            (false, true) => {
                let (d, b) = LineKernel::g(0.0, x, 1, self.spec)
                    .and_then(|k| k.eval(x))
                    .map_err(node)?;
                Ok((d.re / x, b / x))
            }
            (true, true) => {
                let (d, b) = LineKernel::g(0.0, 0.0, 2, self.spec)
                    .and_then(|k| k.eval(0.0))
                    .map_err(node)?;
                Ok((d.re, b))
            }
        }
    }

    fn uv(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
        let r = eta(Complex64::new(x, y), self.spec, Route::ViaG).map_err(|source| MapError::Node { x, y, source })?;
        let r = uv_from(x, y, r.value, r.abs_error_bound);
        Ok((r.u.value, r.v.value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    pub v_residual_max: f64,
    pub u_min_abs: f64,
    /// +1 or −1 when `u` keeps one sign along the curve, 0 otherwise.
    pub u_sign: i8,
    pub start_anchor: Option<StationaryPoint>,
    /// Curves split at a junction share the component index.
    pub component: usize,
    /// Junction points this curve ends at.
    pub junctions: Vec<(f64, f64)>,
    /// Set when an edge crossing could not be refined to a sign change.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Vertex {
    /// Crossing on the edge from node `(i, j)` to `(i+1, j)`.
    H(usize, usize),
    /// Crossing on the edge from node `(i, j)` to `(i, j+1)`.
    V(usize, usize),
    /// Unresolvable saddle at the center of cell `(i, j)`.
    Center(usize, usize),
}

/// Marching squares on the sign of `node_w` (rows indexed by `y`), with
/// crossings refined on `field`. Zero-band nodes count as positive.
pub fn trace_field<F: TraceField>(
    region: &Region,
    node_w: &[Vec<f64>],
    field: &F,
    refine_tol: f64,
) -> Result<Vec<Curve>, MapError> {
    region.validate()?;
    let (nx, ny) = (region.nx, region.ny);
    let pos = |i: usize, j: usize| node_w[j][i] >= 0.0;

    let mut adjacency: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    let mut link = |a: Vertex, b: Vertex| {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    };
    let mut saddles = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let bl = pos(i, j);
            let br = pos(i + 1, j);
            let tr = pos(i + 1, j + 1);
            let tl = pos(i, j + 1);
            let bottom = (bl != br).then_some(Vertex::H(i, j));
            let right = (br != tr).then_some(Vertex::V(i + 1, j));
            let top = (tl != tr).then_some(Vertex::H(i, j + 1));
            let left = (bl != tl).then_some(Vertex::V(i, j));
            let crossings: Vec<Vertex> = [bottom, right, top, left].into_iter().flatten().collect();
            match crossings.len() {
                2 => link(crossings[0], crossings[1]),
                4 => saddles.push((i, j)),
                _ => {}
            }
        }
    }
    // center rule for ambiguous cells
    let centers: Vec<(usize, usize, f64, f64)> = saddles
        .par_iter()
        .map(|&(i, j)| {
            let cx = 0.5 * (region.x(i) + region.x(i + 1));
            let cy = 0.5 * (region.y(j) + region.y(j + 1));
            field.w(cx, cy).map(|(w, b)| (i, j, w, b))
        })
        .collect::<Result<_, _>>()?;
    for (i, j, w, b) in centers {
        let (bottom, right, top, left) = (Vertex::H(i, j), Vertex::V(i + 1, j), Vertex::H(i, j + 1), Vertex::V(i, j));
        if w.abs() <= b {
            let c = Vertex::Center(i, j);
            for e in [bottom, right, top, left] {
                link(c, e);
            }
        } else if (w >= 0.0) == pos(i, j) {
            // bottom-left and top-right corners joined through the center
            link(bottom, right);
            link(top, left);
        } else {
            link(bottom, left);
            link(right, top);
        }
    }

    // refine every edge crossing
    let vertices: Vec<Vertex> = adjacency.keys().copied().collect();
    let coord_tol = |a: f64, b: f64| (1e-3 * refine_tol).max(8.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0));
    let placed: Vec<((f64, f64), bool)> = vertices
        .par_iter()
        .map(|&vx| -> Result<((f64, f64), bool), MapError> {
            match vx {
                Vertex::Center(i, j) => Ok((
                    (0.5 * (region.x(i) + region.x(i + 1)), 0.5 * (region.y(j) + region.y(j + 1))),
                    false,
                )),
                Vertex::H(i, j) => {
                    let (a, b, y) = (region.x(i), region.x(i + 1), region.y(j));
                    match refine_root(|x| Ok(field.w(x, y).map_err(to_line)?.0), (a, b), coord_tol(a, b)) {
                        Ok(x) => Ok(((x, y), false)),
                        Err(LineError::NoSignChange { .. }) => Ok(((0.5 * (a + b), y), true)),
                        Err(e) => Err(from_line(e)),
                    }
                }
                Vertex::V(i, j) => {
                    let (a, b, x) = (region.y(j), region.y(j + 1), region.x(i));
                    match refine_root(|y| Ok(field.w(x, y).map_err(to_line)?.0), (a, b), coord_tol(a, b)) {
                        Ok(y) => Ok(((x, y), false)),
                        Err(LineError::NoSignChange { .. }) => Ok(((x, 0.5 * (a + b)), true)),
                        Err(e) => Err(from_line(e)),
                    }
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let location: BTreeMap<Vertex, ((f64, f64), bool)> = vertices.iter().copied().zip(placed).collect();

    // split the graph into chains between vertices of degree != 2
    let mut chains: Vec<(usize, Vec<Vertex>)> = Vec::new();
    let mut component_of: BTreeMap<Vertex, usize> = BTreeMap::new();
    let mut n_components = 0;
    for &start in &vertices {
        if component_of.contains_key(&start) {
            continue;
        }
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            if component_of.insert(v, n_components).is_none() {
                stack.extend(adjacency[&v].iter().copied());
            }
        }
        n_components += 1;
    }
    let degree = |v: &Vertex| adjacency[v].len();
    let mut used: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    let edge_key = |a: Vertex, b: Vertex| if a <= b { (a, b) } else { (b, a) };
    let walk = |start: Vertex, next: Vertex, used: &mut BTreeSet<(Vertex, Vertex)>| -> Vec<Vertex> {
        let mut chain = vec![start];
        let (mut prev, mut cur) = (start, next);
        used.insert(edge_key(prev, cur));
        loop {
            chain.push(cur);
            if degree(&cur) != 2 || cur == start {
                break;
            }
            let Some(&nxt) = adjacency[&cur].iter().find(|&&n| n != prev && !used.contains(&edge_key(cur, n)))
            else {
                break;
            };
            used.insert(edge_key(cur, nxt));
            prev = cur;
            cur = nxt;
        }
        chain
    };
    // terminals ordered so chains start on the x = x_min edge when possible
    let mut terminals: Vec<Vertex> = vertices.iter().copied().filter(|v| degree(v) != 2).collect();
    terminals.sort_by(|a, b| {
        let (pa, pb) = (location[a].0, location[b].0);
        pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1)).then(a.cmp(b))
    });
    for &t in &terminals {
        for &n in &adjacency[&t] {
            if !used.contains(&edge_key(t, n)) {
                let chain = walk(t, n, &mut used);
                chains.push((component_of[&t], chain));
            }
        }
    }
    // closed loops
    for &v in &vertices {
        if let Some(&n) = adjacency[&v].iter().find(|&&n| !used.contains(&edge_key(v, n))) {
            let chain = walk(v, n, &mut used);
            chains.push((component_of[&v], chain));
        }
    }

    chains
        .par_iter()
        .map(|(component, chain)| {
            let points: Vec<(f64, f64)> = chain.iter().map(|v| location[v].0).collect();
            let flagged = chain.iter().any(|v| location[v].1);
            let junctions = chain
                .iter()
                .filter(|v| matches!(v, Vertex::Center(..)) || degree(v) > 2)
                .map(|v| location[v].0)
                .collect();
            let uv: Vec<(f64, f64)> = points
                .iter()
                .map(|&(x, y)| field.uv(x, y))
                .collect::<Result<_, _>>()?;
            let u_values: Vec<f64> = uv.iter().map(|p| p.0).collect();
            let v_values: Vec<f64> = uv.iter().map(|p| p.1).collect();
            let u_min_abs = u_values.iter().fold(f64::INFINITY, |m, u| m.min(u.abs()));
            let u_sign = if u_values.iter().all(|&u| u > 0.0) {
                1
            } else if u_values.iter().all(|&u| u < 0.0) {
                -1
            } else {
                0
            };
            Ok(Curve {
                v_residual_max: v_values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                points,
                u_values,
                v_values,
                u_min_abs,
                u_sign,
                start_anchor: None,
                component: *component,
                junctions,
                flagged,
            })
        })
        .collect()
}

fn to_line(e: MapError) -> LineError {
    match e {
        MapError::Line(l) => l,
        MapError::Node { source, .. } => LineError::Quadrature(source),
        other => LineError::Usage(other.to_string()),
    }
}

fn from_line(e: LineError) -> MapError {
    MapError::Line(e)
}

/// Traces the `v = 0` curves of a grid of `v`. Curves that start on the
/// `x = 0` edge get the nearest entry of `anchors` within one grid step.
pub fn trace_curves(
    grid: &SignGrid,
    refine_tol: f64,
    anchors: &[StationaryPoint],
    spec: &QuadratureSpec,
) -> Result<Vec<Curve>, MapError> {
    if grid.field != Field::V {
        return Err(MapError::WrongField);
    }
    let region = grid.region;
    let field = EtaField { spec };
    // axis limits of w are computed directly, interior nodes reuse the grid
    let node_w: Vec<Vec<f64>> = (0..region.ny)
        .into_par_iter()
        .map(|j| {
            let y = region.y(j);
            (0..region.nx)
                .map(|i| {
                    let x = region.x(i);
                    if x == 0.0 || y == 0.0 {
                        field.w(x, y).map(|w| w.0)
                    } else if grid.v[j][i].abs() <= grid.bounds[j][i] {
                        Ok(0.0)
                    } else {
                        Ok(grid.v[j][i] / (x * y))
                    }
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut curves = trace_field(&region, &node_w, &field, refine_tol)?;
    attach_anchors(&mut curves, anchors, region.dy());
    Ok(curves)
}

/// Sets `start_anchor` on curves whose first point lies on `x = 0`.
pub fn attach_anchors(curves: &mut [Curve], anchors: &[StationaryPoint], tolerance: f64) {
    for curve in curves.iter_mut() {
        let Some(&(x0, y0)) = curve.points.first() else { continue };
        if x0 != 0.0 {
            continue;
        }
        curve.start_anchor = anchors
            .iter()
            .filter(|a| (a.y_m - y0).abs() <= tolerance)
            .min_by(|a, b| (a.y_m - y0).abs().total_cmp(&(b.y_m - y0).abs()))
            .copied();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveAudit {
    pub u_sign: i8,
    pub u_sign_constant: bool,
    pub u_min_abs: f64,
    /// Signs of `du/dx` along the polyline between consecutive points with
    /// distinct `x`; counts of positive and negative steps.
    pub du_positive: usize,
    pub du_negative: usize,
    /// `u_sign` agrees with the anchor kind, when anchored.
    pub anchor_consistent: Option<bool>,
}

/// `u` profile along a traced curve.
pub fn curve_audit(curve: &Curve) -> CurveAudit {
    let mut du_positive = 0;
    let mut du_negative = 0;
    for k in 1..curve.points.len() {
        let dx = curve.points[k].0 - curve.points[k - 1].0;
        if dx == 0.0 {
            continue;
        }
        let slope = (curve.u_values[k] - curve.u_values[k - 1]) / dx;
        if slope > 0.0 {
            du_positive += 1;
        } else if slope < 0.0 {
            du_negative += 1;
        }
    }
    let anchor_consistent = curve.start_anchor.map(|a| {
        let expected = if a.u_value > 0.0 { 1 } else { -1 };
        curve.u_sign == expected
    });
    CurveAudit {
        u_sign: curve.u_sign,
        u_sign_constant: curve.u_sign != 0,
        u_min_abs: curve.u_min_abs,
        du_positive,
        du_negative,
        anchor_consistent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinModulus {
    pub min_mod: f64,
    pub argmin: (f64, f64),
    /// Error bound of `|η|` at the minimizing node.
    pub bound: f64,
}

/// Smallest `|η|` over grid nodes with `x > x_exclusion`.
pub fn min_modulus_of(grid: &SignGrid, x_exclusion: f64) -> Option<MinModulus> {
    let r = grid.region;
    let mut best: Option<MinModulus> = None;
    for j in 0..r.ny {
        for i in 0..r.nx {
            let x = r.x(i);
            if x <= x_exclusion {
                continue;
            }
            let m = grid.u[j][i].hypot(grid.v[j][i]);
            if best.is_none_or(|b| m < b.min_mod) {
                best = Some(MinModulus {
                    min_mod: m,
                    argmin: (x, r.y(j)),
                    bound: grid.bounds[j][i],
                });
            }
        }
    }
    best
}

pub fn off_line_min_modulus(
    region: &Region,
    x_exclusion: f64,
    spec: &QuadratureSpec,
) -> Result<Option<MinModulus>, MapError> {
    let grid = sign_grid(region, Field::V, spec)?;
    Ok(min_modulus_of(&grid, x_exclusion))
}

/// `min |v(x₁, y)|/x₁` over the first column right of `x = 0`, skipping
/// `y = 0`; a proxy for `|v_x(0, y)|` in the band next to the line.
pub fn epsilon_band_slope(grid: &SignGrid) -> Option<f64> {
    let r = grid.region;
    if r.x_min != 0.0 {
        return None;
    }
    let x1 = r.x(1);
    (0..r.ny)
        .filter(|&j| r.y(j) != 0.0)
        .map(|j| grid.v[j][1].abs() / x1)
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Join,
    Bifurcation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub x: f64,
    pub y: f64,
    /// Nearest grid node values.
    pub u: f64,
    pub v: f64,
    pub curves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnomalyReport {
    pub anomalies: Vec<Anomaly>,
}

impl AnomalyReport {
    pub fn count(&self, kind: AnomalyKind) -> usize {
        self.anomalies.iter().filter(|a| a.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.anomalies.is_empty()
    }
}

/// Flags points where curves of different components come within one cell
/// diagonal, and junctions where three or more curve branches meet.
pub fn anomaly_scan(curves: &[Curve], grid: &SignGrid) -> AnomalyReport {
    let r = grid.region;
    let nearest = |x: f64, y: f64| {
        let i = (((x - r.x_min) / r.dx()).round().max(0.0) as usize).min(r.nx - 1);
        let j = (((y - r.y_min) / r.dy()).round().max(0.0) as usize).min(r.ny - 1);
        (grid.u[j][i], grid.v[j][i])
    };
    let mut report = AnomalyReport::default();

    let mut junctions: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (k, c) in curves.iter().enumerate() {
        for &(x, y) in &c.junctions {
            junctions.entry((x.to_bits(), y.to_bits())).or_default().push(k);
        }
    }
    for ((xb, yb), members) in junctions {
        let (x, y) = (f64::from_bits(xb), f64::from_bits(yb));
        let (u, v) = nearest(x, y);
        report.anomalies.push(Anomaly {
            kind: AnomalyKind::Bifurcation,
            x,
            y,
            u,
            v,
            curves: members,
        });
    }

    let diag = r.cell_diagonal();
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            if curves[a].component == curves[b].component {
                continue;
            }
            let closest = curves[a]
                .points
                .iter()
                .flat_map(|p| curves[b].points.iter().map(move |q| (p, q)))
                .map(|(p, q)| ((p.0 - q.0).hypot(p.1 - q.1), *p, *q))
                .min_by(|l, m| l.0.total_cmp(&m.0));
            if let Some((d, p, q)) = closest {
                if d <= diag {
                    let (x, y) = (0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1));
                    let (u, v) = nearest(x, y);
                    report.anomalies.push(Anomaly {
                        kind: AnomalyKind::Join,
                        x,
                        y,
                        u,
                        v,
                        curves: vec![a, b],
                    });
                }
            }
        }
    }
    report
}

/// Grid CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub sign_u: i8,
    pub sign_v: i8,
}

pub fn grid_rows(grid: &SignGrid) -> Vec<GridRow> {
    let r = grid.region;
    let mut rows = Vec::with_capacity(r.nx * r.ny);
    for j in 0..r.ny {
        for i in 0..r.nx {
            rows.push(GridRow {
                x: r.x(i),
                y: r.y(j),
                u: grid.u[j][i],
                v: grid.v[j][i],
                sign_u: grid.sign_of(Field::U, i, j),
                sign_v: grid.sign_of(Field::V, i, j),
            });
        }
    }
    rows
}

/// Compact JSON form of a grid: axes and row-major sign matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSigns {
    pub region: Region,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sign_u: Vec<Vec<i8>>,
    pub sign_v: Vec<Vec<i8>>,
}

pub fn grid_signs(grid: &SignGrid) -> GridSigns {
    let r = grid.region;
    GridSigns {
        region: r,
        x: (0..r.nx).map(|i| r.x(i)).collect(),
        y: (0..r.ny).map(|j| r.y(j)).collect(),
        sign_u: (0..r.ny)
            .map(|j| (0..r.nx).map(|i| grid.sign_of(Field::U, i, j)).collect())
            .collect(),
        sign_v: (0..r.ny)
            .map(|j| (0..r.nx).map(|i| grid.sign_of(Field::V, i, j)).collect())
            .collect(),
    }
}

/// Curve polyline CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub curve_id: usize,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

pub fn curve_rows(curves: &[Curve]) -> Vec<CurveRow> {
    curves
        .iter()
        .enumerate()
        .flat_map(|(id, c)| {
            c.points.iter().zip(c.u_values.iter().zip(&c.v_values)).map(move |(&(x, y), (&u, &v))| CurveRow {
                curve_id: id,
                x,
                y,
                u,
                v,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Saddle {
        cx: f64,
        cy: f64,
    }

    impl TraceField for Saddle {
        fn w(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
            Ok(((x - self.cx) * (y - self.cy), 0.0))
        }
        fn uv(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
            Ok((1.0 + x, (x - self.cx) * (y - self.cy)))
        }
    }

    fn small_region(nx: usize, ny: usize) -> Region {
        Region {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
            nx,
            ny,
        }
    }

    fn sampled<F: TraceField>(r: &Region, f: &F) -> Vec<Vec<f64>> {
        (0..r.ny)
            .map(|j| (0..r.nx).map(|i| f.w(r.x(i), r.y(j)).unwrap().0).collect())
            .collect()
    }

    fn dummy_grid(r: Region) -> SignGrid {
        SignGrid {
            region: r,
            field: Field::V,
            signs: vec![vec![0; r.nx]; r.ny],
            u: vec![vec![1.0; r.nx]; r.ny],
            v: vec![vec![0.0; r.nx]; r.ny],
            bounds: vec![vec![0.0; r.nx]; r.ny],
            bound: 0.0,
        }
    }

    #[test]
    fn saddle_at_cell_center_is_one_bifurcation() {
        // the cell [0.4, 0.6]² has its center exactly on the crossing
        let r = small_region(6, 6);
        let f = Saddle { cx: 0.5, cy: 0.5 };
        let curves = trace_field(&r, &sampled(&r, &f), &f, 1e-12).unwrap();
        assert_eq!(curves.len(), 4);
        let report = anomaly_scan(&curves, &dummy_grid(r));
        assert_eq!(report.count(AnomalyKind::Bifurcation), 1);
        assert_eq!(report.count(AnomalyKind::Join), 0);
    }

    #[test]
    fn resolved_saddle_gives_two_curves() {
        let r = small_region(6, 6);
        let f = Saddle { cx: 0.52, cy: 0.47 };
        let mut w = sampled(&r, &f);
        // sample grid sees a symmetric saddle; the center value decides
        for row in w.iter_mut() {
            for v in row.iter_mut() {
                *v = v.signum();
            }
        }
        let curves = trace_field(&r, &w, &f, 1e-12).unwrap();
        assert!(curves.iter().all(|c| c.junctions.is_empty()));
        let report = anomaly_scan(&curves, &dummy_grid(r));
        assert_eq!(report.count(AnomalyKind::Bifurcation), 0);
    }

    #[test]
    fn straight_line_is_refined() {
        struct Line;
        impl TraceField for Line {
            fn w(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
                Ok((y - 0.3 - 0.1 * x, 0.0))
            }
            fn uv(&self, x: f64, y: f64) -> Result<(f64, f64), MapError> {
                Ok((-1.0, y - 0.3 - 0.1 * x))
            }
        }
        let r = small_region(9, 9);
        let curves = trace_field(&r, &sampled(&r, &Line), &Line, 1e-12).unwrap();
        assert_eq!(curves.len(), 1);
        let c = &curves[0];
        assert_eq!(c.points.first().unwrap().0, 0.0);
        assert_eq!(c.points.last().unwrap().0, 1.0);
        assert!(c.v_residual_max < 1e-12);
        assert_eq!(c.u_sign, -1);
        for w in c.points.windows(2) {
            assert!((w[1].0 - w[0].0).abs() <= r.dx() + 1e-12);
            assert!((w[1].1 - w[0].1).abs() <= r.dy() + 1e-12);
        }
    }

    #[test]
    fn empty_curve_list_has_no_anomalies() {
        let r = small_region(2, 2);
        assert!(anomaly_scan(&[], &dummy_grid(r)).is_empty());
    }

    #[test]
    fn region_validation() {
        assert!(Region::default().validate().is_ok());
        let bad = Region { nx: 1, ..Region::default() };
        assert!(bad.validate().is_err());
        let bad = Region { x_max: 2.5, ..Region::default() };
        assert!(bad.validate().is_err());
        let r = Region::parse_bounds("0:1:25:45", 16, 32).unwrap();
        assert_eq!((r.y_min, r.y_max, r.nx), (25.0, 45.0, 16));
        assert!(Region::parse_bounds("0:1:25", 16, 32).is_err());
    }

    #[test]
    fn small_grid_of_v() {
        let spec = QuadratureSpec::default();
        let r = Region {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 5.0,
            nx: 8,
            ny: 8,
        };
        let g = sign_grid(&r, Field::V, &spec).unwrap();
        for j in 0..r.ny {
            assert_eq!(g.v[j][0], 0.0);
            for i in 0..r.nx {
                assert!(g.signs[j][i] >= 0);
            }
        }
        assert!(g.v[0].iter().all(|&v| v == 0.0));
        let gu = sign_grid(&r, Field::U, &spec).unwrap();
        assert!(gu.signs[0].iter().all(|&s| s == 1));
        let m = min_modulus_of(&g, 0.0).unwrap();
        assert!(m.argmin.0 > 0.0);
    }

    #[test]
    fn tiny_grid_min_modulus() {
        let spec = QuadratureSpec::default();
        let r = Region {
            x_min: 0.2,
            x_max: 0.6,
            y_min: 3.0,
            y_max: 9.0,
            nx: 2,
            ny: 2,
        };
        let g = sign_grid(&r, Field::V, &spec).unwrap();
        let m = min_modulus_of(&g, 0.0).unwrap();
        let moduli: Vec<f64> = (0..2)
            .flat_map(|j| (0..2).map(move |i| (i, j)))
            .map(|(i, j)| g.u[j][i].hypot(g.v[j][i]))
            .collect();
        assert_eq!(m.min_mod, moduli.iter().copied().fold(f64::INFINITY, f64::min));
    }
}
