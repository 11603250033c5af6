//! Piecewise-linear critical point extraction on a grid sampled from a
//! spline model: the lower/upper-link test on a Freudenthal (consistent
//! diagonal) triangulation, for cross-validating the continuous extractor.
//!
//! A vertex is regular when both its lower and upper link are simply
//! connected, a minimum when the lower link is empty, a maximum when the
//! upper link is empty, and a saddle otherwise. Value ties are broken by
//! vertex index so the classification sees a total order.

use crate::error::{Error, Result};
use crate::extract::MorseType;
use crate::lattice::strides;
use crate::spline::TensorSplineModel;
use rayon::prelude::*;
use std::sync::OnceLock;

/// A uniform vertex lattice over `[0,1]^d` evaluated through a model.
#[derive(Debug, Clone)]
pub struct SampledGrid {
    dims: Vec<usize>,
    extents: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl SampledGrid {
    /// Wrap raw vertex values (row-major, last axis fastest).
    pub fn from_values(
        dims: Vec<usize>,
        extents: Vec<(f64, f64)>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dims.iter().any(|&m| m < 2) {
            return Err(Error::InvalidField(
                "every axis needs at least 2 vertices".into(),
            ));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidField("vertex count mismatch".into()));
        }
        Ok(SampledGrid {
            dims,
            extents,
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn param_coords(&self, vertex: &[usize]) -> Vec<f64> {
        vertex
            .iter()
            .zip(&self.dims)
            .map(|(&i, &m)| i as f64 / (m - 1) as f64)
            .collect()
    }
}

/// Evaluate the model on a uniform vertex lattice. Vertex values are exact
/// model evaluations, no interpolation happens at sampling time.
pub fn sample_grid(model: &TensorSplineModel, resolution: &[usize]) -> Result<SampledGrid> {
    if resolution.len() != model.dim() {
        return Err(Error::InvalidModel(format!(
            "{} resolutions for a {}-dimensional model",
            resolution.len(),
            model.dim()
        )));
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidField("resolution must be at least 2".into()));
    }
    let dims = resolution.to_vec();
    let grid_strides = strides(&dims);
    let count: usize = dims.iter().product();
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|flat| {
            let u: Vec<f64> = (0..dims.len())
                .map(|l| {
                    let i = flat / grid_strides[l] % dims[l];
                    i as f64 / (dims[l] - 1) as f64
                })
                .collect();
            model.evaluate(&u).unwrap()
        })
        .collect();
    SampledGrid::from_values(dims, model.extents().to_vec(), values)
}

/// A classified grid vertex.
#[derive(Debug, Clone)]
pub struct PlCriticalPoint {
    pub vertex: Vec<usize>,
    /// Parameter coordinates of the vertex.
    pub location: Vec<f64>,
    pub physical: Vec<f64>,
    pub value: f64,
    pub morse_type: MorseType,
    /// Set on domain-boundary vertices, which are never classified.
    pub boundary: bool,
}

/// Interior critical vertices of the sampled grid in vertex-index order.
/// Boundary vertices have partial links and are not classified.
pub fn pl_critical_points(grid: &SampledGrid) -> Result<Vec<PlCriticalPoint>> {
    match grid.dims.len() {
        2 => Ok(critical_points_2d(grid)),
        3 => Ok(critical_points_3d(grid)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Link vertices of an interior vertex in the 2-D Freudenthal triangulation
/// (diagonal towards (+1,+1)), in cyclic order.
pub(crate) const LINK2: [(i64, i64); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LinkClass {
    Regular,
    Minimum,
    Maximum,
    /// Saddle with multiplicity (number of lower-link components minus one
    /// in 2-D).
    Saddle(usize),
}

/// Classify from the 6 cyclic lower-link membership flags.
pub(crate) fn classify_link2(lower: &[bool; 6]) -> LinkClass {
    let n = lower.iter().filter(|&&b| b).count();
    if n == 0 {
        return LinkClass::Minimum;
    }
    if n == 6 {
        return LinkClass::Maximum;
    }
    // arcs of the lower set around the 6-cycle
    let arcs = (0..6)
        .filter(|&k| lower[k] && !lower[(k + 5) % 6])
        .count();
    if arcs == 1 {
        LinkClass::Regular
    } else {
        LinkClass::Saddle(arcs - 1)
    }
}

fn critical_points_2d(grid: &SampledGrid) -> Vec<PlCriticalPoint> {
    let (m0, m1) = (grid.dims[0], grid.dims[1]);
    let values = &grid.values;
    let rows: Vec<Vec<PlCriticalPoint>> = (1..m0 - 1)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 1..m1 - 1 {
                let flat = i * m1 + j;
                let v = (values[flat], flat);
                let mut lower = [false; 6];
                for (k, &(a, b)) in LINK2.iter().enumerate() {
                    let nf = (i as i64 + a) as usize * m1 + (j as i64 + b) as usize;
                    lower[k] = (values[nf], nf) < v;
                }
                let class = classify_link2(&lower);
                let morse_type = match class {
                    LinkClass::Regular => continue,
                    LinkClass::Minimum => MorseType::Minimum,
                    LinkClass::Maximum => MorseType::Maximum,
                    LinkClass::Saddle(_) => MorseType::Saddle(1),
                };
                out.push(make_point(grid, &[i, j], flat, morse_type));
            }
            out
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Combinatorial link of an interior vertex in the 3-D Freudenthal/Kuhn
/// triangulation (6 tetrahedra per cube): 14 vertices, 36 edges, 24
/// triangles, forming a 2-sphere.
pub(crate) struct Link3 {
    pub offsets: Vec<[i64; 3]>,
    pub edges: Vec<(usize, usize)>,
    pub triangles: Vec<[usize; 3]>,
}

pub(crate) fn link3() -> &'static Link3 {
    static LINK: OnceLock<Link3> = OnceLock::new();
    LINK.get_or_init(build_link3)
}

fn build_link3() -> Link3 {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut triangles: Vec<[[i64; 3]; 3]> = Vec::new();
    for cube in 0..8u32 {
        let base = [
            -((cube & 1) as i64),
            -(((cube >> 1) & 1) as i64),
            -(((cube >> 2) & 1) as i64),
        ];
        for perm in PERMS {
            let mut verts = [[0i64; 3]; 4];
            verts[0] = base;
            for s in 0..3 {
                verts[s + 1] = verts[s];
                verts[s + 1][perm[s]] += 1;
            }
            if let Some(pos) = verts.iter().position(|&v| v == [0, 0, 0]) {
                let mut tri: Vec<[i64; 3]> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != pos)
                    .map(|(_, &v)| v)
                    .collect();
                tri.sort();
                let tri = [tri[0], tri[1], tri[2]];
                if !triangles.contains(&tri) {
                    triangles.push(tri);
                }
            }
        }
    }
    let mut offsets: Vec<[i64; 3]> = triangles.iter().flatten().copied().collect();
    offsets.sort();
    offsets.dedup();
    let index_of = |v: &[i64; 3]| offsets.iter().position(|o| o == v).unwrap();
    let tri_idx: Vec<[usize; 3]> = triangles
        .iter()
        .map(|t| [index_of(&t[0]), index_of(&t[1]), index_of(&t[2])])
        .collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for t in &tri_idx {
        for (a, b) in [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])] {
            let e = (a.min(b), a.max(b));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    edges.sort();
    Link3 {
        offsets,
        edges,
        triangles: tri_idx,
    }
}

/// Connected components of the induced subcomplex on `members`, plus its
/// Euler characteristic V - E + T.
pub(crate) fn subcomplex_stats(link: &Link3, members: &[bool]) -> (usize, i64) {
    let n = link.offsets.len();
    let v = members.iter().filter(|&&m| m).count();
    if v == 0 {
        return (0, 0);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut e = 0i64;
    for &(a, b) in &link.edges {
        if members[a] && members[b] {
            adj[a].push(b);
            adj[b].push(a);
            e += 1;
        }
    }
    let t = link
        .triangles
        .iter()
        .filter(|t| members[t[0]] && members[t[1]] && members[t[2]])
        .count() as i64;
    let mut seen = vec![false; n];
    let mut components = 0;
    for s in 0..n {
        if !members[s] || seen[s] {
            continue;
        }
        components += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    (components, v as i64 - e + t)
}

pub(crate) fn classify_link3(link: &Link3, lower: &[bool]) -> LinkClass {
    let upper: Vec<bool> = lower.iter().map(|&b| !b).collect();
    let (cc_lo, chi_lo) = subcomplex_stats(link, lower);
    let (cc_up, chi_up) = subcomplex_stats(link, &upper);
    if cc_lo == 0 {
        return LinkClass::Minimum;
    }
    if cc_up == 0 {
        return LinkClass::Maximum;
    }
    if cc_lo == 1 && cc_up == 1 && chi_lo == 1 && chi_up == 1 {
        return LinkClass::Regular;
    }
    if cc_lo >= 2 {
        LinkClass::Saddle(1)
    } else {
        // split upper link, or a lower component carrying a cycle
        LinkClass::Saddle(2)
    }
}

fn critical_points_3d(grid: &SampledGrid) -> Vec<PlCriticalPoint> {
    let link = link3();
    let dims = &grid.dims;
    let st = strides(dims);
    let values = &grid.values;
    let slabs: Vec<Vec<PlCriticalPoint>> = (1..dims[0] - 1)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let mut lower = vec![false; link.offsets.len()];
            for j in 1..dims[1] - 1 {
                for k in 1..dims[2] - 1 {
                    let flat = i * st[0] + j * st[1] + k;
                    let v = (values[flat], flat);
                    for (idx, o) in link.offsets.iter().enumerate() {
                        let nf = (i as i64 + o[0]) as usize * st[0]
                            + (j as i64 + o[1]) as usize * st[1]
                            + (k as i64 + o[2]) as usize;
                        lower[idx] = (values[nf], nf) < v;
                    }
                    let class = classify_link3(link, &lower);
                    let morse_type = match class {
                        LinkClass::Regular => continue,
                        LinkClass::Minimum => MorseType::Minimum,
                        LinkClass::Maximum => MorseType::Maximum,
                        LinkClass::Saddle(kind) => MorseType::Saddle(kind),
                    };
                    out.push(make_point(grid, &[i, j, k], flat, morse_type));
                }
            }
            out
        })
        .collect();
    slabs.into_iter().flatten().collect()
}

fn make_point(
    grid: &SampledGrid,
    vertex: &[usize],
    flat: usize,
    morse_type: MorseType,
) -> PlCriticalPoint {
    let location = grid.param_coords(vertex);
    let physical = location
        .iter()
        .zip(&grid.extents)
        .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
        .collect();
    PlCriticalPoint {
        vertex: vertex.to_vec(),
        location,
        physical,
        value: grid.values[flat],
        morse_type,
        boundary: false,
    }
}
