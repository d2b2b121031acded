//! Tensor-product mesh on the half plane [-L, L] x [0, H] with exact face
//! integration of the degenerate weight |xn|^{1-2s}.
//!
//! Nodes sit on xn = 0 exactly, so the trace, the reaction term, and the
//! interface live on actual degrees of freedom. The weight is never evaluated
//! pointwise at xn = 0: every coefficient is an exact integral of t^{1-2s},
//! finite for all s in (0, 1) because 2 - 2s > 0.

use crate::error::{Error, Result};
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

/// Exact integral of t^{1-2s} over [a, b]: (b^{2-2s} - a^{2-2s}) / (2-2s).
pub fn face_weight(s: f64, a: f64, b: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid_parameter(format!("face_weight: s = {s} outside (0,1)")));
    }
    if a < 0.0 || b <= a {
        return Err(Error::invalid_parameter(format!(
            "face_weight: need 0 <= a < b, got a = {a}, b = {b}"
        )));
    }
    let p = 2.0 - 2.0 * s;
    Ok((b.powf(p) - a.powf(p)) / p)
}

/// Uniform tensor-product grid with precomputed weight integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub s: f64,
    /// half width: x1 in [-l, l]
    pub l: f64,
    /// height: xn in [0, h]
    pub h: f64,
    pub nx: usize,
    pub nz: usize,
    pub hx: f64,
    pub hz: f64,
    /// weight integrated over the dual interval of node row j
    /// ([z_j - hz/2, z_j + hz/2] clipped to [0, h]); length nz
    pub wz_dual: Vec<f64>,
    /// weight integrated over [z_j, z_{j+1}]; length nz - 1
    pub wz_face: Vec<f64>,
}

impl Grid {
    pub fn new(s: f64, l: f64, h: f64, nx: usize, nz: usize) -> Result<Arc<Grid>> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid_parameter(format!("grid: s = {s} outside (0,1)")));
        }
        if !(l > 0.0) || !(h > 0.0) {
            return Err(Error::invalid_parameter(format!(
                "grid: degenerate dimensions l = {l}, h = {h}"
            )));
        }
        if nx < 3 || nz < 3 {
            return Err(Error::invalid_parameter(format!(
                "grid: need nx, nz >= 3, got {nx} x {nz}"
            )));
        }
        let hx = 2.0 * l / (nx - 1) as f64;
        let hz = h / (nz - 1) as f64;
        let z = |j: usize| j as f64 * hz;
        let mut wz_dual = Vec::with_capacity(nz);
        for j in 0..nz {
            let a = (z(j) - 0.5 * hz).max(0.0);
            let b = (z(j) + 0.5 * hz).min(h);
            wz_dual.push(face_weight(s, a, b)?);
        }
        let mut wz_face = Vec::with_capacity(nz - 1);
        for j in 0..nz - 1 {
            wz_face.push(face_weight(s, z(j), z(j + 1))?);
        }
        Ok(Arc::new(Grid { s, l, h, nx, nz, hx, hz, wz_dual, wz_face }))
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.hx
    }

    /// Bottom row is bit-exact zero at j = 0.
    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.hz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.nz
    }

    /// Mean vertical-face weight between rows j and j+1 (exact integral
    /// divided by the segment length).
    pub fn vertical_face_mean(&self, j: usize) -> f64 {
        self.wz_face[j] / self.hz
    }

    /// Dual-interval length of bottom node i inside [-l, l] (hx, halved at
    /// the end columns).
    pub fn thin_dual_len(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx
        } else {
            self.hx
        }
    }

    /// True when the other grid has identical layout parameters.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.s == other.s
            && self.l == other.l
            && self.h == other.h
            && self.nx == other.nx
            && self.nz == other.nz
    }
}

/// Nodal scalar values on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field { grid: grid.clone(), values: vec![0.0; grid.node_count()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Field {
        Field { grid: grid.clone(), values: vec![c; grid.node_count()] }
    }

    /// Sample a function of (x1, xn) at the nodes.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = vec![0.0; grid.node_count()];
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                values[grid.idx(i, j)] = f(grid.x(i), grid.z(j));
            }
        }
        Field { grid: grid.clone(), values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Values on the xn = 0 node row.
    pub fn trace(&self) -> ThinField {
        ThinField { values: self.values[0..self.grid.nx].to_vec() }
    }

    /// Bilinear interpolation; the point is clamped to the grid box.
    pub fn interp(&self, x: f64, z: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x + g.l) / g.hx).clamp(0.0, (g.nx - 1) as f64 - 1e-12);
        let fz = (z / g.hz).clamp(0.0, (g.nz - 1) as f64 - 1e-12);
        let i = fx as usize;
        let j = fz as usize;
        let ax = fx - i as f64;
        let az = fz - j as f64;
        self.at(i, j) * (1.0 - ax) * (1.0 - az)
            + self.at(i + 1, j) * ax * (1.0 - az)
            + self.at(i, j + 1) * (1.0 - ax) * az
            + self.at(i + 1, j + 1) * ax * az
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// CSV rows `x,xn,value` in row-major node order.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "x,xn,value")?;
        for j in 0..self.grid.nz {
            for i in 0..self.grid.nx {
                writeln!(
                    out,
                    "{},{},{}",
                    crate::grid::fmt_f64(self.grid.x(i)),
                    crate::grid::fmt_f64(self.grid.z(j)),
                    crate::grid::fmt_f64(self.at(i, j))
                )?;
            }
        }
        Ok(())
    }

    /// Raw block: one-line JSON header, then row-major little-endian f64.
    pub fn write_raw<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = serde_json::json!({
            "nx": self.grid.nx,
            "nz": self.grid.nz,
            "s": self.grid.s,
            "l": self.grid.l,
            "h": self.grid.h,
        });
        writeln!(out, "{header}")?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw<R: Read + BufRead>(input: &mut R) -> Result<Field> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let hdr: serde_json::Value = serde_json::from_str(line.trim())
            .map_err(|e| Error::Format(format!("bad raw field header: {e}")))?;
        let get = |k: &str| -> Result<f64> {
            hdr.get(k)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Format(format!("raw field header missing '{k}'")))
        };
        let nx = get("nx")? as usize;
        let nz = get("nz")? as usize;
        let grid = Grid::new(get("s")?, get("l")?, get("h")?, nx, nz)?;
        let mut values = vec![0.0; nx * nz];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            input.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Field { grid, values })
    }
}

/// Values on the thin row {xn = 0}.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinField {
    pub values: Vec<f64>,
}

impl ThinField {
    pub fn constant(nx: usize, c: f64) -> ThinField {
        ThinField { values: vec![c; nx] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> ThinField {
        ThinField { values: (0..grid.nx).map(|i| f(grid.x(i))).collect() }
    }

    /// Dual-averaged step `height * chi_{x > jump}`: each node carries the
    /// exact mass of its dual interval, so thin quadratures of the step are
    /// exact instead of half-cell quantized.
    pub fn step(grid: &Grid, jump: f64, height: f64) -> ThinField {
        let values = (0..grid.nx)
            .map(|i| {
                let a = (grid.x(i) - 0.5 * grid.hx).max(-grid.l);
                let b = (grid.x(i) + 0.5 * grid.hx).min(grid.l);
                height * ((b - jump.max(a)).max(0.0) / (b - a)).min(1.0)
            })
            .collect();
        ThinField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fixed 17-significant-digit float formatting used by every CSV emitter.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn face_weight_basic_values() {
        assert_relative_eq!(face_weight(0.5, 0.0, 1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            face_weight(0.25, 0.0, 1.0).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(face_weight(0.75, 0.0, 1.0).unwrap(), 2.0, max_relative = 1e-15);
        assert!(face_weight(0.5, -0.1, 1.0).is_err());
        assert!(face_weight(0.5, 1.0, 1.0).is_err());
        assert!(face_weight(0.5, 1.0, 0.5).is_err());
        assert!(face_weight(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn face_weight_midpoint_consistency() {
        // (b - a) a^{1-2s} approximates the integral when (b-a)/a is small
        for s in [0.2, 0.5, 0.8] {
            let a = 0.7;
            let d = a * 1e-3;
            let exact = face_weight(s, a, a + d).unwrap();
            let mid = d * a.powf(1.0 - 2.0 * s);
            assert!(
                (exact - mid).abs() / exact <= 1e-3,
                "s={s}: exact {exact} vs midpoint {mid}"
            );
        }
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(0.5, 1.0, 1.0, 3, 3).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.z(0), 0.0);
        assert_eq!(g.x(0), -1.0);
        assert_relative_eq!(g.x(2), 1.0, max_relative = 1e-15);
        // s = 1/2 weights reduce to plain lengths
        assert_relative_eq!(g.wz_dual[0], g.hz / 2.0, max_relative = 1e-14);
        assert_relative_eq!(g.wz_dual[1], g.hz, max_relative = 1e-14);
        assert_relative_eq!(g.wz_face[0], g.hz, max_relative = 1e-14);
        assert!(Grid::new(0.5, 0.0, 1.0, 3, 3).is_err());
        assert!(Grid::new(0.5, 1.0, 1.0, 2, 3).is_err());
    }

    #[test]
    fn first_interior_face_finite_for_singular_weight() {
        // s = 0.75: pointwise weight blows up at xn = 0 but the exact
        // integral is finite and matches face_weight
        let g = Grid::new(0.75, 1.0, 1.0, 9, 9).unwrap();
        let w0 = g.wz_dual[0];
        assert!(w0.is_finite() && w0 > 0.0);
        assert_relative_eq!(
            w0,
            face_weight(0.75, 0.0, g.hz / 2.0).unwrap(),
            max_relative = 1e-15
        );
        assert!(g.wz_face.iter().all(|w| w.is_finite() && *w > 0.0));
        assert!(g.wz_dual.iter().all(|w| w.is_finite() && *w > 0.0));
    }

    #[test]
    fn field_roundtrip_raw() {
        let g = Grid::new(0.3, 1.5, 0.8, 7, 5).unwrap();
        let f = Field::from_fn(&g, |x, z| x * x - 0.3 * z + 1.0);
        let mut buf = Vec::new();
        f.write_raw(&mut buf).unwrap();
        let f2 = Field::read_raw(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert!(f2.grid.compatible(&g));
        assert_eq!(f.values, f2.values);
    }

    #[test]
    fn trace_and_interp() {
        let g = Grid::new(0.5, 1.0, 1.0, 11, 6).unwrap();
        let f = Field::from_fn(&g, |x, z| 2.0 * x + z);
        let t = f.trace();
        assert_eq!(t.len(), 11);
        assert_relative_eq!(t.values[5], 0.0, epsilon = 1e-15);
        // bilinear interpolation is exact on bilinear functions
        assert_relative_eq!(f.interp(0.13, 0.57), 2.0 * 0.13 + 0.57, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn face_weight_additive(
            s in 0.05f64..0.95,
            a in 0.0f64..2.0,
            d1 in 1e-6f64..1.5,
            d2 in 1e-6f64..1.5,
        ) {
            let b = a + d1;
            let c = b + d2;
            let whole = face_weight(s, a, c).unwrap();
            let parts = face_weight(s, a, b).unwrap() + face_weight(s, b, c).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
        }
    }
}
