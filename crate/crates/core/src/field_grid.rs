//! Uniform periodic grids, quaternion-valued fields on them, central
//! finite-difference operators and Riemann-sum quadrature.

use std::io::Write;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercomplex::Quaternion;
use crate::Real;

pub const MIN_POINTS: usize = 8;

/// Accuracy order of the central-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StencilOrder {
    #[default]
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }
}

impl TryFrom<u8> for StencilOrder {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            other => Err(format!("stencil order must be 2 or 4, got {other}")),
        }
    }
}

impl From<StencilOrder> for u8 {
    fn from(o: StencilOrder) -> u8 {
        o.as_u8()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Box length per axis; its length sets the dimension.
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
    /// Coordinate of the first grid point per axis. Defaults to `-L/2`.
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn new_1d(extent: f64, points: usize) -> Self {
        GridSpec { extent: vec![extent], points: vec![points], origin: None }
    }

    pub fn cube(dim: usize, extent: f64, points: usize) -> Self {
        GridSpec { extent: vec![extent; dim], points: vec![points; dim], origin: None }
    }
}

/// Periodic grid in one to three dimensions. Unused axes have one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: [usize; 3],
    extent: [T; 3],
    dx: [T; 3],
    origin: [T; 3],
}

impl<T: Real> Grid<T> {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        let dim = spec.extent.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if spec.points.len() != dim {
            return Err(Error::Config(format!(
                "grid.points has {} entries but grid.extent has {dim}",
                spec.points.len()
            )));
        }
        if let Some(o) = &spec.origin {
            if o.len() != dim {
                return Err(Error::Config(format!("grid.origin has {} entries, expected {dim}", o.len())));
            }
        }
        let mut n = [1usize; 3];
        let mut extent = [T::one(); 3];
        let mut dx = [T::one(); 3];
        let mut origin = [T::zero(); 3];
        for a in 0..dim {
            let l = spec.extent[a];
            let np = spec.points[a];
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!("grid.extent[{a}] must be positive, got {l}")));
            }
            if np < MIN_POINTS {
                return Err(Error::Config(format!(
                    "grid.points[{a}] must be at least {MIN_POINTS}, got {np}"
                )));
            }
            n[a] = np;
            extent[a] = T::lit(l);
            dx[a] = T::lit(l / np as f64);
            origin[a] = T::lit(spec.origin.as_ref().map_or(-0.5 * l, |o| o[a]));
        }
        Ok(Grid { dim, n, extent, dx, origin })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> [usize; 3] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [T; 3] {
        self.dx
    }

    pub fn extent(&self) -> [T; 3] {
        self.extent
    }

    pub fn origin(&self) -> [T; 3] {
        self.origin
    }

    /// Largest spacing over the active axes.
    pub fn max_spacing(&self) -> T {
        (0..self.dim).map(|a| self.dx[a]).fold(T::zero(), T::max)
    }

    pub fn min_spacing(&self) -> T {
        (0..self.dim).map(|a| self.dx[a]).fold(T::infinity(), T::min)
    }

    /// Volume element `Π dx_a` over the active axes.
    pub fn cell_volume(&self) -> T {
        (0..self.dim).fold(T::one(), |v, a| v * self.dx[a])
    }

    pub fn volume(&self) -> T {
        (0..self.dim).fold(T::one(), |v, a| v * self.extent[a])
    }

    /// Memory stride of an axis in the flat layout (x fastest).
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.n[0],
            _ => self.n[0] * self.n[1],
        }
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.n[0] * (i[1] + self.n[1] * i[2])
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.n[0];
        let r = idx / self.n[0];
        [ix, r % self.n[1], r / self.n[1]]
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        if axis < self.dim {
            self.origin[axis] + self.dx[axis] * T::lit(i as f64)
        } else {
            T::zero()
        }
    }

    pub fn position(&self, idx: usize) -> [T; 3] {
        let m = self.multi_index(idx);
        [self.coord(0, m[0]), self.coord(1, m[1]), self.coord(2, m[2])]
    }

    pub fn positions(&self) -> impl Iterator<Item = [T; 3]> + '_ {
        (0..self.len()).map(move |i| self.position(i))
    }

    /// Wavenumber of lattice mode `m` along an axis (`2πm/L`).
    pub fn lattice_wavenumber(&self, axis: usize, m: i64) -> T {
        T::lit(2.0 * std::f64::consts::PI * m as f64) / self.extent[axis]
    }

    fn check_same(&self, other: &Grid<T>) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.n, other.n)));
        }
        Ok(())
    }

    /// Points at distance `layers` or less from any face of the box.
    pub fn is_edge_point(&self, idx: usize, layers: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|a| m[a] < layers || m[a] + layers >= self.n[a])
    }
}

/// Values that central differences can act on.
pub trait GridValue<T>: Copy + Add<Output = Self> + Sub<Output = Self> + Send + Sync {
    fn zero_value() -> Self;
    fn scaled(self, s: T) -> Self;
}

impl<T: Real> GridValue<T> for T {
    fn zero_value() -> Self {
        T::zero()
    }
    fn scaled(self, s: T) -> Self {
        self * s
    }
}

impl<T: Real> GridValue<T> for Quaternion<T> {
    fn zero_value() -> Self {
        Quaternion::zero()
    }
    fn scaled(self, s: T) -> Self {
        self.scale(s)
    }
}

/// First derivative along `axis` with periodic wrap.
pub fn partial_values<T: Real, V: GridValue<T>>(grid: &Grid<T>, values: &[V], axis: usize, order: StencilOrder) -> Vec<V> {
    if axis >= grid.dim() {
        return vec![V::zero_value(); values.len()];
    }
    let n = grid.n[axis];
    let stride = grid.stride(axis);
    let h = grid.dx[axis];
    let mut out = vec![V::zero_value(); values.len()];
    let (c1, c2) = match order {
        StencilOrder::Second => (T::lit(0.5) / h, T::zero()),
        StencilOrder::Fourth => (T::lit(8.0 / 12.0) / h, T::lit(-1.0 / 12.0) / h),
    };
    for_each_line(grid, axis, |base| {
        for i in 0..n {
            let at = |k: isize| values[base + ((i as isize + k).rem_euclid(n as isize) as usize) * stride];
            let mut d = (at(1) - at(-1)).scaled(c1);
            if order == StencilOrder::Fourth {
                d = d + (at(2) - at(-2)).scaled(c2);
            }
            out[base + i * stride] = d;
        }
    });
    out
}

/// Compact second derivative along `axis`.
pub fn second_partial_values<T: Real, V: GridValue<T>>(grid: &Grid<T>, values: &[V], axis: usize, order: StencilOrder) -> Vec<V> {
    if axis >= grid.dim() {
        return vec![V::zero_value(); values.len()];
    }
    let n = grid.n[axis];
    let stride = grid.stride(axis);
    let h2 = grid.dx[axis] * grid.dx[axis];
    let mut out = vec![V::zero_value(); values.len()];
    for_each_line(grid, axis, |base| {
        for i in 0..n {
            let at = |k: isize| values[base + ((i as isize + k).rem_euclid(n as isize) as usize) * stride];
            let d = match order {
                StencilOrder::Second => (at(1) + at(-1) - at(0).scaled(T::lit(2.0))).scaled(T::one() / h2),
                StencilOrder::Fourth => ((at(1) + at(-1)).scaled(T::lit(16.0))
                    - (at(2) + at(-2))
                    - at(0).scaled(T::lit(30.0)))
                .scaled(T::one() / (T::lit(12.0) * h2)),
            };
            out[base + i * stride] = d;
        }
    });
    out
}

/// Calls `f` with the flat index of the first point of every grid line
/// running along `axis`.
fn for_each_line<T: Real>(grid: &Grid<T>, axis: usize, mut f: impl FnMut(usize)) {
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    for j in 0..grid.n[others[1]] {
        for i in 0..grid.n[others[0]] {
            let mut m = [0usize; 3];
            m[others[0]] = i;
            m[others[1]] = j;
            f(grid.index(m));
        }
    }
}

/// Neumaier-compensated sum in index order.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c = c + ((sum - t) + v);
        } else {
            c = c + ((v - t) + sum);
        }
        sum = t;
    }
    sum + c
}

/// Quaternion-valued field.
#[derive(Debug, Clone, PartialEq)]
pub struct QField<T> {
    grid: Grid<T>,
    values: Vec<Quaternion<T>>,
}

impl<T: Real> QField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        QField { grid: *grid, values: vec![Quaternion::zero(); grid.len()] }
    }

    pub fn constant(grid: &Grid<T>, v: Quaternion<T>) -> Self {
        QField { grid: *grid, values: vec![v; grid.len()] }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<Quaternion<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(QField { grid: *grid, values })
    }

    /// Infallible pointwise construction; use [`QField::sample`] for
    /// user-supplied functions.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> Quaternion<T>) -> Self {
        QField { grid: *grid, values: grid.positions().map(f).collect() }
    }

    /// Samples `f` at every grid point, rejecting non-finite values.
    pub fn sample(grid: &Grid<T>, f: impl Fn([T; 3]) -> Quaternion<T>) -> Result<Self> {
        let field = Self::from_fn(grid, f);
        field.ensure_finite("sampled value")?;
        Ok(field)
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if let Some(idx) = self.values.iter().position(|v| !v.is_finite()) {
            let p = self.grid.position(idx);
            return Err(Error::NonFinite {
                what: what.to_string(),
                index: idx,
                position: p.map(|c| c.to_f64_lossy()),
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Quaternion<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Quaternion<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Quaternion<T>> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Quaternion<T>) -> Quaternion<T>) -> Self {
        QField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise map that also receives the point position.
    pub fn map_with_position(&self, f: impl Fn([T; 3], Quaternion<T>) -> Quaternion<T>) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.position(i), v)).collect();
        QField { grid: self.grid, values }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Quaternion<T>, Quaternion<T>) -> Quaternion<T>) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(QField { grid: self.grid, values })
    }

    /// Pointwise `coeff(x) · self(x)`.
    pub fn left_mul(&self, coeff: &Self) -> Result<Self> {
        coeff.zip_with(self, |c, v| c * v)
    }

    /// Pointwise `self(x) · coeff(x)`.
    pub fn right_mul(&self, coeff: &Self) -> Result<Self> {
        self.zip_with(coeff, |v, c| v * c)
    }

    pub fn left_mul_const(&self, c: Quaternion<T>) -> Self {
        self.map(|v| c * v)
    }

    pub fn right_mul_const(&self, c: Quaternion<T>) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v.scale(s))
    }

    pub fn conj(&self) -> Self {
        self.map(Quaternion::conj)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s·other` in place.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b.scale(s);
        }
        Ok(())
    }

    /// True when every value has vanishing `j, k` components.
    pub fn is_complex(&self) -> bool {
        self.values.iter().all(|v| v.is_complex())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Largest `|a - b|` over the grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(&a, &b)| (a - b).norm()).fold(T::zero(), T::max))
    }

    /// `√∫|f|²`.
    pub fn l2_norm(&self) -> T {
        (compensated_sum(self.values.iter().map(|v| v.norm_sqr())) * self.grid.cell_volume()).sqrt()
    }

    /// Pointwise `|f|²`.
    pub fn abs_sqr(&self) -> RealField<T> {
        RealField { grid: self.grid, values: self.values.iter().map(|v| v.norm_sqr()).collect() }
    }

    pub fn real_part(&self) -> RealField<T> {
        RealField { grid: self.grid, values: self.values.iter().map(|v| v.w).collect() }
    }

    pub fn partial(&self, axis: usize, order: StencilOrder) -> Self {
        QField { grid: self.grid, values: partial_values(&self.grid, &self.values, axis, order) }
    }

    pub fn gradient(&self, order: StencilOrder) -> QVecField<T> {
        QVecField { comps: [0, 1, 2].map(|a| self.partial(a, order)) }
    }

    pub fn laplacian(&self, order: StencilOrder) -> Self {
        let mut out = vec![Quaternion::zero(); self.values.len()];
        for a in 0..self.grid.dim() {
            for (o, d) in out.iter_mut().zip(second_partial_values(&self.grid, &self.values, a, order)) {
                *o += d;
            }
        }
        QField { grid: self.grid, values: out }
    }

    /// Riemann sum `Σ f(x_p) Π dx_a`.
    pub fn integrate(&self) -> Quaternion<T> {
        let dv = self.grid.cell_volume();
        Quaternion::new(
            compensated_sum(self.values.iter().map(|v| v.w)),
            compensated_sum(self.values.iter().map(|v| v.x)),
            compensated_sum(self.values.iter().map(|v| v.y)),
            compensated_sum(self.values.iter().map(|v| v.z)),
        )
        .scale(dv)
    }

    /// CSV dump: `index,w,x,y,z` per point with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "w", "x", "y", "z"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                i.to_string(),
                v.w.to_f64_lossy().to_string(),
                v.x.to_f64_lossy().to_string(),
                v.y.to_f64_lossy().to_string(),
                v.z.to_f64_lossy().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Flat binary dump: four little-endian `f64` (w, x, y, z) per point in
    /// index order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.values {
            for c in [v.w, v.x, v.y, v.z] {
                out.write_all(&c.to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Three quaternion fields on one grid; components beyond the grid
/// dimension are carried along (usually zero).
#[derive(Debug, Clone, PartialEq)]
pub struct QVecField<T> {
    pub comps: [QField<T>; 3],
}

impl<T: Real> QVecField<T> {
    pub fn new(comps: [QField<T>; 3]) -> Result<Self> {
        comps[0].grid.check_same(&comps[1].grid)?;
        comps[0].grid.check_same(&comps[2].grid)?;
        Ok(QVecField { comps })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        QVecField { comps: [QField::zeros(grid), QField::zeros(grid), QField::zeros(grid)] }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.comps[0].grid
    }

    pub fn divergence(&self, order: StencilOrder) -> QField<T> {
        let grid = *self.grid();
        let mut out = QField::zeros(&grid);
        for a in 0..grid.dim() {
            let d = self.comps[a].partial(a, order);
            for (o, v) in out.values.iter_mut().zip(d.values) {
                *o += v;
            }
        }
        out
    }

    pub fn curl(&self, order: StencilOrder) -> Result<Self> {
        if self.grid().dim() != 3 {
            return Err(Error::Unsupported(format!("curl needs a 3D grid, this one is {}D", self.grid().dim())));
        }
        let d = |c: usize, a: usize| self.comps[c].partial(a, order);
        Ok(QVecField {
            comps: [
                d(2, 1).sub(&d(1, 2))?,
                d(0, 2).sub(&d(2, 0))?,
                d(1, 0).sub(&d(0, 1))?,
            ],
        })
    }

    /// `Σ_a self_a · other_a` with `self` on the left.
    pub fn dot(&self, other: &Self) -> Result<QField<T>> {
        let mut out = QField::zeros(self.grid());
        for a in 0..3 {
            let p = self.comps[a].zip_with(&other.comps[a], |x, y| x * y)?;
            out.axpy(T::one(), &p)?;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> T {
        self.comps.iter().map(QField::max_abs).fold(T::zero(), T::max)
    }
}

/// Real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> RealField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        RealField { grid: *grid, values: vec![T::zero(); grid.len()] }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} points", values.len(), grid.len())));
        }
        Ok(RealField { grid: *grid, values })
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> T) -> Self {
        RealField { grid: *grid, values: grid.positions().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        RealField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(RealField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn to_qfield(&self) -> QField<T> {
        QField { grid: self.grid, values: self.values.iter().map(|&v| Quaternion::from_real(v)).collect() }
    }

    pub fn partial(&self, axis: usize, order: StencilOrder) -> Self {
        RealField { grid: self.grid, values: partial_values(&self.grid, &self.values, axis, order) }
    }

    pub fn laplacian(&self, order: StencilOrder) -> Self {
        let mut out = vec![T::zero(); self.values.len()];
        for a in 0..self.grid.dim() {
            for (o, d) in out.iter_mut().zip(second_partial_values(&self.grid, &self.values, a, order)) {
                *o = *o + d;
            }
        }
        RealField { grid: self.grid, values: out }
    }

    pub fn integrate(&self) -> T {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }

    /// `√(Σ v² Π dx)`.
    pub fn l2_norm(&self) -> T {
        (compensated_sum(self.values.iter().map(|&v| v * v)) * self.grid.cell_volume()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealVecField<T> {
    pub comps: [RealField<T>; 3],
}

impl<T: Real> RealVecField<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        RealVecField { comps: [RealField::zeros(grid), RealField::zeros(grid), RealField::zeros(grid)] }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.comps[0].grid
    }

    pub fn divergence(&self, order: StencilOrder) -> RealField<T> {
        let grid = *self.grid();
        let mut out = RealField::zeros(&grid);
        for a in 0..grid.dim() {
            let d = self.comps[a].partial(a, order);
            for (o, v) in out.values.iter_mut().zip(d.values) {
                *o = *o + v;
            }
        }
        out
    }

    /// Pointwise `Σ_a self_a other_a`.
    pub fn dot(&self, other: &Self) -> Result<RealField<T>> {
        let mut out = RealField::zeros(self.grid());
        for a in 0..3 {
            let p = self.comps[a].zip_with(&other.comps[a], |x, y| x * y)?;
            out = out.zip_with(&p, |x, y| x + y)?;
        }
        Ok(out)
    }
}
