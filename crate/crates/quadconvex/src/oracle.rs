//! Numerical convexity probing of ball images.
//!
//! The pipeline samples the image of a domain ball, rasterizes it onto a
//! 2-D occupancy grid (images in the plane only), walks segments between
//! occupied cells looking for midpoints that fall in a gap, and upgrades a
//! raster candidate to a reportable nonconvexity witness only after a
//! continuous multistart minimization fails to reach the image midpoint.
//!
//! Verdict vocabulary is deliberately cautious: sampling proves nothing, so
//! a clean raster yields `ConvexLikely` and a confirmed gap yields a witness
//! labeled numerical evidence. Both sides of the pipeline are deterministic
//! given the sampling scheme and seeds.


use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::bounds::NonconvexityWitness;
use crate::error::{Error, Result};
use crate::quadmap::{BallSpec, QuadraticMap};

/// Hard cap on the number of samples a scheme may produce.
pub const MAX_SAMPLES: usize = 10_000_000;

/// Cap on segment pairs examined by the raster walk.
pub const MAX_PAIRS: usize = 1_000_000;

/// How a ball is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleScheme {
    /// Uniform lattice of `resolution` points per axis over the bounding box
    /// of the ball, intersected with the ball.
    Grid { resolution: usize },
    /// `count` points drawn uniformly from the ball, deterministic in `seed`.
    Random { count: usize, seed: u64 },
}

/// Sampled image of a ball: domain points (rows of `xs`) and their images
/// (rows of `fs`), stored flat to keep multi-million-point clouds cheap.
#[derive(Debug, Clone)]
pub struct ImageCloud {
    n: usize,
    m: usize,
    len: usize,
    xs: Vec<f64>,
    fs: Vec<f64>,
    ball: BallSpec,
    scheme: SampleScheme,
}

impl ImageCloud {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain_dim(&self) -> usize {
        self.n
    }

    pub fn image_dim(&self) -> usize {
        self.m
    }

    pub fn ball(&self) -> &BallSpec {
        &self.ball
    }

    pub fn scheme(&self) -> SampleScheme {
        self.scheme
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.n..(i + 1) * self.n]
    }

    pub fn fx(&self, i: usize) -> &[f64] {
        &self.fs[i * self.m..(i + 1) * self.m]
    }

    /// Componentwise bounding box of the image points.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.m];
        let mut hi = vec![f64::NEG_INFINITY; self.m];
        for i in 0..self.len {
            let f = self.fx(i);
            for k in 0..self.m {
                lo[k] = lo[k].min(f[k]);
                hi[k] = hi[k].max(f[k]);
            }
        }
        (lo, hi)
    }

    /// Euclidean diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// CSV export: header `x1,..,xn,f1,..,fm`, one sample per row, full
    /// double precision.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut header = Vec::new();
        for i in 0..self.n {
            header.push(format!("x{}", i + 1));
        }
        for i in 0..self.m {
            header.push(format!("f{}", i + 1));
        }
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.len {
            line.clear();
            for (k, v) in self.x(i).iter().chain(self.fx(i)).enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Samples the image of `ball` under `map`.
pub fn sample_image(map: &QuadraticMap, ball: &BallSpec, scheme: SampleScheme) -> Result<ImageCloud> {
    let n = map.n();
    let m = map.m();
    if ball.dim() != n {
        return Err(Error::Dimension(format!(
            "ball center has length {}, map domain is {n}-dimensional",
            ball.dim()
        )));
    }
    let center = ball.center();
    let radius = ball.radius();
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    let mut fbuf = vec![0.0; m];
    let push = |x: &[f64], map: &QuadraticMap, fbuf: &mut Vec<f64>, xbuf: &mut Vec<f64>, tmp: &mut [f64]| {
        map.evaluate_into(x, tmp);
        xbuf.extend_from_slice(x);
        fbuf.extend_from_slice(tmp);
    };
    match scheme {
        SampleScheme::Grid { resolution } => {
            if resolution < 2 {
                return Err(Error::Validation(
                    "grid scheme needs at least 2 points per axis".into(),
                ));
            }
            let total = (resolution as f64).powi(n as i32);
            if total > MAX_SAMPLES as f64 {
                return Err(Error::Capacity(format!(
                    "grid of {resolution}^{n} = {total:.3e} samples exceeds the cap {MAX_SAMPLES}"
                )));
            }
            let mut idx = vec![0usize; n];
            let mut x = vec![0.0; n];
            let r2 = radius * radius;
            loop {
                let mut dist2 = 0.0;
                for k in 0..n {
                    let t = idx[k] as f64 / (resolution - 1) as f64;
                    let coord = center[k] - radius + 2.0 * radius * t;
                    x[k] = coord;
                    let d = coord - center[k];
                    dist2 += d * d;
                }
                if dist2 <= r2 * (1.0 + 1e-12) {
                    push(&x, map, &mut fs, &mut xs, &mut fbuf);
                }
                // odometer
                let mut k = 0;
                loop {
                    idx[k] += 1;
                    if idx[k] < resolution {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                    if k == n {
                        break;
                    }
                }
                if k == n {
                    break;
                }
            }
        }
        SampleScheme::Random { count, seed } => {
            if count > MAX_SAMPLES {
                return Err(Error::Capacity(format!(
                    "{count} samples exceed the cap {MAX_SAMPLES}"
                )));
            }
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0.0; n];
            for _ in 0..count {
                // direction via Box-Muller, radius via the u^(1/n) law
                loop {
                    let mut norm2 = 0.0;
                    for k in 0..n {
                        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        let u2: f64 = rng.gen();
                        x[k] = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                        norm2 += x[k] * x[k];
                    }
                    if norm2 > 1e-18 {
                        let u: f64 = rng.gen();
                        let scale = radius * u.powf(1.0 / n as f64) / norm2.sqrt();
                        for k in 0..n {
                            x[k] = center[k] + x[k] * scale;
                        }
                        break;
                    }
                }
                push(&x, map, &mut fs, &mut xs, &mut fbuf);
            }
        }
    }
    let len = xs.len() / n;
    Ok(ImageCloud {
        n,
        m,
        len,
        xs,
        fs,
        ball: ball.clone(),
        scheme,
    })
}

/// What to do with an empty cloud at rasterization time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptyCloudPolicy {
    Reject,
    EmptyGrid,
}

/// 2-D occupancy grid over the image bounding box (one-cell margin on every
/// side). Each occupied cell remembers the first sample that landed in it so
/// raster candidates can be mapped back to domain points.
#[derive(Debug, Clone)]
pub struct RasterGrid {
    min_f: [f64; 2],
    cell: f64,
    width: usize,
    height: usize,
    occupancy: Vec<bool>,
    rep: Vec<u32>,
    occupied: usize,
}

impl RasterGrid {
    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupied
    }

    pub fn bbox_min(&self) -> [f64; 2] {
        self.min_f
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.occupancy[i * self.height + j]
    }

    /// First sample index rasterized into the cell, if any.
    pub fn representative(&self, i: usize, j: usize) -> Option<usize> {
        let v = self.rep[i * self.height + j];
        (v != u32::MAX).then_some(v as usize)
    }

    pub fn cell_of(&self, f1: f64, f2: f64) -> Option<(usize, usize)> {
        let i = ((f1 - self.min_f[0]) / self.cell).floor();
        let j = ((f2 - self.min_f[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.min_f[0] + (i as f64 + 0.5) * self.cell,
            self.min_f[1] + (j as f64 + 0.5) * self.cell,
        )
    }

    /// Chessboard distance transform to the occupied set (two-pass).
    pub fn distance_transform(&self) -> Vec<u32> {
        const INF: u32 = u32::MAX / 4;
        let (w, h) = (self.width, self.height);
        let mut d = vec![INF; w * h];
        for (k, &occ) in self.occupancy.iter().enumerate() {
            if occ {
                d[k] = 0;
            }
        }
        let idx = |i: usize, j: usize| i * h + j;
        for i in 0..w {
            for j in 0..h {
                let mut best = d[idx(i, j)];
                if i > 0 {
                    best = best.min(d[idx(i - 1, j)] + 1);
                    if j > 0 {
                        best = best.min(d[idx(i - 1, j - 1)] + 1);
                    }
                    if j + 1 < h {
                        best = best.min(d[idx(i - 1, j + 1)] + 1);
                    }
                }
                if j > 0 {
                    best = best.min(d[idx(i, j - 1)] + 1);
                }
                d[idx(i, j)] = best;
            }
        }
        for i in (0..w).rev() {
            for j in (0..h).rev() {
                let mut best = d[idx(i, j)];
                if i + 1 < w {
                    best = best.min(d[idx(i + 1, j)] + 1);
                    if j > 0 {
                        best = best.min(d[idx(i + 1, j - 1)] + 1);
                    }
                    if j + 1 < h {
                        best = best.min(d[idx(i + 1, j + 1)] + 1);
                    }
                }
                if j + 1 < h {
                    best = best.min(d[idx(i, j + 1)] + 1);
                }
                d[idx(i, j)] = best;
            }
        }
        d
    }

    /// PGM (P2) occupancy image; `meta` receives the bounding box and cell
    /// size sidecar.
    pub fn write_pgm(&self, out: &mut impl Write, meta: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "1")?;
        for j in (0..self.height).rev() {
            let mut row = String::with_capacity(self.width * 2);
            for i in 0..self.width {
                row.push(if self.is_occupied(i, j) { '1' } else { '0' });
                if i + 1 < self.width {
                    row.push(' ');
                }
            }
            writeln!(out, "{row}")?;
        }
        writeln!(meta, "bbox_min {:.17e} {:.17e}", self.min_f[0], self.min_f[1])?;
        writeln!(
            meta,
            "bbox_max {:.17e} {:.17e}",
            self.min_f[0] + self.width as f64 * self.cell,
            self.min_f[1] + self.height as f64 * self.cell
        )?;
        writeln!(meta, "cell {:.17e}", self.cell)?;
        writeln!(meta, "grid {} {}", self.width, self.height)?;
        Ok(())
    }
}

/// Rasterizes a planar cloud onto `cells_per_axis` cells along the longer
/// image axis.
pub fn rasterize(cloud: &ImageCloud, cells_per_axis: usize) -> Result<RasterGrid> {
    rasterize_with(cloud, cells_per_axis, EmptyCloudPolicy::Reject)
}

pub fn rasterize_with(
    cloud: &ImageCloud,
    cells_per_axis: usize,
    empty: EmptyCloudPolicy,
) -> Result<RasterGrid> {
    if cloud.image_dim() != 2 {
        return Err(Error::Dimension(format!(
            "rasterization is planar only (m = 2), image has m = {}",
            cloud.image_dim()
        )));
    }
    if cells_per_axis < 16 {
        return Err(Error::Validation("cells_per_axis must be at least 16".into()));
    }
    if cloud.is_empty() {
        return match empty {
            EmptyCloudPolicy::Reject => Err(Error::Validation("empty cloud".into())),
            EmptyCloudPolicy::EmptyGrid => Ok(RasterGrid {
                min_f: [0.0, 0.0],
                cell: 1.0,
                width: 0,
                height: 0,
                occupancy: Vec::new(),
                rep: Vec::new(),
                occupied: 0,
            }),
        };
    }
    let (lo, hi) = cloud.bbox();
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let cell = if extent > 0.0 {
        extent / cells_per_axis as f64
    } else {
        1.0
    };
    let min_f = [lo[0] - cell, lo[1] - cell];
    let width = ((hi[0] - min_f[0]) / cell).floor() as usize + 2;
    let height = ((hi[1] - min_f[1]) / cell).floor() as usize + 2;
    let mut occupancy = vec![false; width * height];
    let mut rep = vec![u32::MAX; width * height];
    let mut occupied = 0;
    for s in 0..cloud.len() {
        let f = cloud.fx(s);
        let i = (((f[0] - min_f[0]) / cell).floor() as usize).min(width - 1);
        let j = (((f[1] - min_f[1]) / cell).floor() as usize).min(height - 1);
        let k = i * height + j;
        if !occupancy[k] {
            occupancy[k] = true;
            rep[k] = s as u32;
            occupied += 1;
        }
    }
    Ok(RasterGrid {
        min_f,
        cell,
        width,
        height,
        occupancy,
        rep,
        occupied,
    })
}

/// A pair of occupied cells whose connecting segment dips into a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidatePair {
    pub cell_a: (usize, usize),
    pub cell_b: (usize, usize),
    pub sample_a: usize,
    pub sample_b: usize,
    /// Chessboard depth of the deepest walk point inside the gap.
    pub gap_depth: u32,
}

#[derive(Debug, Clone)]
pub enum RasterVerdict {
    ConvexLikely,
    NonconvexCandidate(CandidatePair),
}

/// Walks the segment between two occupied cells at half-cell resolution.
/// If some step lands farther than `dilation` cells from every occupied
/// cell, returns a candidate re-bracketed around the deepest point of that
/// unoccupied run, so the pair midpoint lands near the gap core.
fn walk_segment(
    grid: &RasterGrid,
    dist: &[u32],
    a: (usize, usize),
    b: (usize, usize),
    dilation: u32,
) -> Option<CandidatePair> {
    let h = grid.height;
    let idx = |i: usize, j: usize| i * h + j;
    let dx = b.0 as f64 - a.0 as f64;
    let dy = b.1 as f64 - a.1 as f64;
    let cheb = dx.abs().max(dy.abs());
    if cheb < 2.0 {
        return None;
    }
    let steps = (2.0 * cheb).ceil() as usize;
    let cell_at = |t: usize| {
        let px = a.0 as f64 + dx * t as f64 / steps as f64;
        let py = a.1 as f64 + dy * t as f64 / steps as f64;
        (px.round() as usize, py.round() as usize)
    };
    let mut best: Option<CandidatePair> = None;
    let mut t = 1;
    while t < steps {
        let (ci, cj) = cell_at(t);
        if dist[idx(ci, cj)] > dilation {
            // deepest point of the whole unoccupied run through t
            let mut run_end = t;
            let mut deepest = (dist[idx(ci, cj)], t);
            while run_end + 1 < steps {
                let (qi, qj) = cell_at(run_end + 1);
                if grid.occupancy[idx(qi, qj)] {
                    break;
                }
                run_end += 1;
                if dist[idx(qi, qj)] > deepest.0 {
                    deepest = (dist[idx(qi, qj)], run_end);
                }
            }
            let bracket = |from: usize, dir: i64| -> (usize, usize) {
                let mut s = from as i64;
                loop {
                    s += dir;
                    if s <= 0 {
                        return a;
                    }
                    if s >= steps as i64 {
                        return b;
                    }
                    let (qi, qj) = cell_at(s as usize);
                    if grid.occupancy[idx(qi, qj)] {
                        return (qi, qj);
                    }
                }
            };
            let ca = bracket(deepest.1, -1);
            let cb = bracket(deepest.1, 1);
            if ca != cb && best.as_ref().map_or(true, |c| deepest.0 > c.gap_depth) {
                best = Some(CandidatePair {
                    cell_a: ca,
                    cell_b: cb,
                    sample_a: grid.representative(ca.0, ca.1).expect("occupied cell"),
                    sample_b: grid.representative(cb.0, cb.1).expect("occupied cell"),
                    gap_depth: deepest.0,
                });
            }
            t = run_end + 1;
        }
        t += 1;
    }
    best
}

/// Convex hull of integer cell coordinates (monotone chain), vertices in
/// counterclockwise order.
fn cell_hull(cells: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut pts: Vec<(i64, i64)> = cells.iter().map(|&(i, j)| (i as i64, j as i64)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|(i, j)| (i as usize, j as usize)).collect();
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower.into_iter().map(|(i, j)| (i as usize, j as usize)).collect()
}

/// Candidate discovery runs two deterministic passes and merges the results
/// deepest-first:
///
/// 1. hull bridging: every edge of the convex hull of the occupied cells is
///    walked. A gap between the image boundary and its hull (the signature
///    of a boundary notch, however shallow) always sits under one of these
///    edges, which random pair subsampling is likely to miss;
/// 2. segments between every pair of stride-subsampled occupied cells
///    (at most [`MAX_PAIRS`] pairs) are walked, which covers interior
///    holes and wide gaps.
pub fn raster_candidates(grid: &RasterGrid, dilation: u32, max_out: usize) -> Vec<CandidatePair> {
    let dist = grid.distance_transform();
    let h = grid.height;
    let idx = |i: usize, j: usize| i * h + j;
    let mut found: Vec<CandidatePair> = Vec::new();
    let push = |cand: CandidatePair, found: &mut Vec<CandidatePair>| {
        if !found
            .iter()
            .any(|c| c.cell_a == cand.cell_a && c.cell_b == cand.cell_b)
        {
            found.push(cand);
        }
    };

    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(grid.occupied);
    for i in 0..grid.width {
        for j in 0..h {
            if grid.occupancy[idx(i, j)] {
                cells.push((i, j));
            }
        }
    }
    if cells.len() < 2 {
        return found;
    }

    // Pass 1: hull edges.
    let hull = cell_hull(&cells);
    for e in 0..hull.len() {
        let a = hull[e];
        let b = hull[(e + 1) % hull.len()];
        if let Some(cand) = walk_segment(grid, &dist, a, b, dilation) {
            push(cand, &mut found);
        }
    }

    // Pass 2: subsampled pair walks.
    let k = cells.len();
    {
        let max_endpoints = {
            let mut lo = 2usize;
            let mut hi = k;
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if mid * (mid - 1) / 2 <= MAX_PAIRS {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            lo
        };
        let stride = k.div_ceil(max_endpoints);
        let sub: Vec<(usize, usize)> = cells.iter().copied().step_by(stride.max(1)).collect();
        for ai in 0..sub.len() {
            for bi in (ai + 1)..sub.len() {
                if let Some(cand) = walk_segment(grid, &dist, sub[ai], sub[bi], dilation) {
                    push(cand, &mut found);
                }
            }
        }
    }

    // deepest first; stable, so discovery order breaks ties
    found.sort_by(|x, y| y.gap_depth.cmp(&x.gap_depth));
    found.truncate(max_out);
    found
}

/// Single-candidate wrapper over [`raster_candidates`].
pub fn raster_convexity(grid: &RasterGrid, dilation: u32) -> RasterVerdict {
    match raster_candidates(grid, dilation, 1).into_iter().next() {
        Some(c) => RasterVerdict::NonconvexCandidate(c),
        None => RasterVerdict::ConvexLikely,
    }
}

/// Minimizes `||f(x) - y_mid||` over the ball by projected gradient descent
/// from `starts` seeded initial points (plus the candidate endpoints and
/// their midpoint). Returns a witness only when the best residual exceeds
/// `threshold` — numerical evidence, not proof, since the inner solver is
/// local.
#[allow(clippy::too_many_arguments)]
pub fn refine_witness(
    map: &QuadraticMap,
    ball: &BallSpec,
    x1: &[f64],
    x2: &[f64],
    threshold: f64,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<Option<NonconvexityWitness>> {
    let n = map.n();
    let m = map.m();
    if x1.len() != n || x2.len() != n {
        return Err(Error::Dimension("candidate points have the wrong length".into()));
    }
    let mut f1 = vec![0.0; m];
    let mut f2 = vec![0.0; m];
    map.evaluate_into(x1, &mut f1);
    map.evaluate_into(x2, &mut f2);
    let y_mid: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| 0.5 * (a + b)).collect();

    let center = ball.center();
    let radius = ball.radius();
    let project = |x: &mut [f64]| {
        let mut d2 = 0.0;
        for k in 0..n {
            let d = x[k] - center[k];
            d2 += d * d;
        }
        let dist = d2.sqrt();
        if dist > radius {
            let scale = radius / dist;
            for k in 0..n {
                x[k] = center[k] + (x[k] - center[k]) * scale;
            }
        }
    };

    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut initial: Vec<Vec<f64>> = vec![
        x1.to_vec(),
        x2.to_vec(),
        x1.iter().zip(x2).map(|(a, b)| 0.5 * (a + b)).collect(),
    ];
    while initial.len() < starts.max(3) {
        let mut x = vec![0.0; n];
        loop {
            let mut norm2 = 0.0;
            for k in 0..n {
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen();
                x[k] = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                norm2 += x[k] * x[k];
            }
            if norm2 > 1e-18 {
                let u: f64 = rng.gen();
                let scale = radius * u.powf(1.0 / n as f64) / norm2.sqrt();
                for k in 0..n {
                    x[k] = center[k] + x[k] * scale;
                }
                break;
            }
        }
        initial.push(x);
    }

    let mut fbuf = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut best = f64::INFINITY;
    for x0 in &initial {
        let mut x = x0.clone();
        project(&mut x);
        let mut h = map.midpoint_gradient_into(&x, &y_mid, &mut fbuf, &mut grad);
        for _ in 0..iters {
            let g = grad.clone();
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let mut cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
                project(&mut cand);
                let hc = map.midpoint_gradient_into(&cand, &y_mid, &mut fbuf, &mut grad);
                if hc < h * (1.0 - 1e-12) {
                    x = cand;
                    h = hc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                // restore the gradient of the accepted point
                map.midpoint_gradient_into(&x, &y_mid, &mut fbuf, &mut grad);
                break;
            }
        }
        best = best.min(h.sqrt());
        if best <= threshold {
            return Ok(None);
        }
    }
    Ok(Some(NonconvexityWitness {
        x1: x1.to_vec(),
        x2: x2.to_vec(),
        y_mid,
        best_residual: best,
        starts: initial.len(),
    }))
}

/// Knobs of the full probing pipeline.
#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub scheme: SampleScheme,
    pub cells_per_axis: usize,
    pub dilation: u32,
    pub refine_starts: usize,
    pub refine_iters: usize,
    /// Refutation threshold as a fraction of the image diameter.
    pub threshold_frac: f64,
    /// Seed for the refinement multistart.
    pub seed: u64,
    /// How many raster candidates to refine before giving up.
    pub max_candidates: usize,
}

impl ProbeConfig {
    /// Defaults: a 400x400 domain grid for planar domains, a million seeded
    /// ball samples otherwise; 256 raster cells with dilation 2.
    pub fn default_for(map: &QuadraticMap) -> Self {
        let scheme = if map.n() == 2 {
            SampleScheme::Grid { resolution: 400 }
        } else {
            SampleScheme::Random {
                count: 1_000_000,
                seed: 7,
            }
        };
        ProbeConfig {
            scheme,
            cells_per_axis: 256,
            dilation: 2,
            refine_starts: 64,
            refine_iters: 200,
            threshold_frac: 1e-3,
            seed: 11,
            max_candidates: 8,
        }
    }
}

/// Outcome of a probe: either nothing suspicious at raster level, raster
/// candidates that all refined away, or a confirmed witness.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub witness: Option<NonconvexityWitness>,
    pub candidates: usize,
    pub rejected: usize,
    pub threshold: f64,
    pub diameter: f64,
    pub occupied_cells: usize,
    pub samples: usize,
}

impl ProbeReport {
    pub fn refuted(&self) -> bool {
        self.witness.is_some()
    }
}

/// Full pipeline: sample, rasterize, scan for gap candidates, refine each
/// until one survives or all are rejected.
pub fn probe_convexity(map: &QuadraticMap, ball: &BallSpec, config: &ProbeConfig) -> Result<ProbeReport> {
    let cloud = sample_image(map, ball, config.scheme)?;
    let grid = rasterize(&cloud, config.cells_per_axis)?;
    let candidates = raster_candidates(&grid, config.dilation, config.max_candidates);
    let threshold = config.threshold_frac * cloud.diameter();
    let mut rejected = 0;
    let mut witness = None;
    for cand in &candidates {
        let got = refine_witness(
            map,
            ball,
            cloud.x(cand.sample_a),
            cloud.x(cand.sample_b),
            threshold,
            config.refine_starts,
            config.refine_iters,
            config.seed,
        )?;
        match got {
            Some(w) => {
                witness = Some(w);
                break;
            }
            None => rejected += 1,
        }
    }
    Ok(ProbeReport {
        witness,
        candidates: candidates.len(),
        rejected,
        threshold,
        diameter: cloud.diameter(),
        occupied_cells: grid.occupied_cells(),
        samples: cloud.len(),
    })
}

/// Checks that a witness midpoint falls in an unoccupied cell of a grid
/// rasterized at twice the given resolution (the gap is not a resolution
/// artifact).
pub fn witness_survives_finer_raster(
    cloud: &ImageCloud,
    witness: &NonconvexityWitness,
    cells_per_axis: usize,
) -> Result<bool> {
    let fine = rasterize(cloud, cells_per_axis * 2)?;
    Ok(match fine.cell_of(witness.y_mid[0], witness.y_mid[1]) {
        Some((i, j)) => !fine.is_occupied(i, j),
        None => true,
    })
}

/// Convenience for callers that need files on disk.
pub fn export_csv(cloud: &ImageCloud, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    cloud.write_csv(&mut f)?;
    Ok(())
}

pub fn export_pgm(grid: &RasterGrid, path: &Path) -> Result<()> {
    let mut img = std::io::BufWriter::new(std::fs::File::create(path)?);
    let meta_path = path.with_extension("meta.txt");
    let mut meta = std::io::BufWriter::new(std::fs::File::create(meta_path)?);
    grid.write_pgm(&mut img, &mut meta)?;
    Ok(())
}
