//! Huygens kernels across the flat interface and the interface integrals
//! that make up the receive and transmit steering elements.
//!
//! The integrals over the (infinite) interface are evaluated by the
//! trapezoid rule on a truncated window. The outer `taper` fraction of each
//! side rolls off with a C-infinity step so truncation error decays faster
//! than any power of the window width.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{cdot_split, cdot_split_multi};
use crate::model::{ArrayGeometry, Point, TwoLayerMedium, C64};

fn checked_distance(a: &Point, b: &Point) -> Result<f64> {
    let d = a.distance(b);
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Singularity { distance: d })
    }
}

/// Water-layer Green's function `d^-1/2 exp(-j w d / c)`.
pub fn g1(omega: f64, element: Point, interface_point: Point, c: f64) -> Result<C64> {
    let d = checked_distance(&element, &interface_point)?;
    Ok(C64::from_polar(1.0 / d.sqrt(), -omega * d / c))
}

/// Solid-layer Green's function `d^-1/2 exp(-j w d / v)`.
pub fn g2(omega: f64, interface_point: Point, r: Point, v: f64) -> Result<C64> {
    let d = checked_distance(&interface_point, &r)?;
    Ok(C64::from_polar(1.0 / d.sqrt(), -omega * d / v))
}

/// Secondary-source weight for the path from the interface up to an element.
pub fn f21(omega: f64, element: Point, interface_point: Point, c: f64, interface_depth: f64) -> Result<C64> {
    let d = checked_distance(&element, &interface_point)?;
    Ok(C64::new(0.0, omega * (interface_depth - element.z).abs() / (4.0 * PI * c * d)))
}

/// Secondary-source weight for the path from the interface down to `r`.
pub fn f12(omega: f64, interface_point: Point, r: Point, v: f64, interface_depth: f64) -> Result<C64> {
    let d = checked_distance(&interface_point, &r)?;
    Ok(C64::new(0.0, omega * (r.z - interface_depth).abs() / (4.0 * PI * v * d)))
}

/// Discretisation of the interface integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Integration extent beyond each end of the array, in metres.
    pub half_width: f64,
    /// Upper bound on the node spacing, in metres.
    pub step: f64,
    /// Fraction of `half_width` (per side) over which the window rolls off.
    pub taper: f64,
}

pub const DEFAULT_TAPER: f64 = 0.5;

impl QuadratureSpec {
    /// Half-width `aperture + 2 * interface_depth`, step an eighth of the
    /// shortest water wavelength.
    pub fn default_for(geometry: &ArrayGeometry, medium: &TwoLayerMedium, f_max_hz: f64) -> Self {
        QuadratureSpec {
            half_width: geometry.aperture() + 2.0 * medium.interface_depth,
            step: medium.c / f_max_hz / 8.0,
            taper: DEFAULT_TAPER,
        }
    }

    pub fn validate(&self, geometry: &ArrayGeometry, medium: &TwoLayerMedium, omega: f64) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("quadrature.step", format!("must be positive, got {}", self.step)));
        }
        if !(self.half_width >= geometry.aperture() && self.half_width.is_finite()) {
            return Err(Error::config(
                "quadrature.half_width",
                format!("must be at least the aperture {} m, got {}", geometry.aperture(), self.half_width),
            ));
        }
        if !(0.0..1.0).contains(&self.taper) {
            return Err(Error::config("quadrature.taper", format!("must lie in [0, 1), got {}", self.taper)));
        }
        if omega > 0.0 {
            let lambda = 2.0 * PI * medium.c / omega;
            if self.step > lambda / 8.0 * (1.0 + 1e-12) {
                return Err(Error::config(
                    "quadrature.step",
                    format!("{} m exceeds an eighth of the wavelength {} m", self.step, lambda),
                ));
            }
        }
        Ok(())
    }

    /// Same spec with the step divided and the half-width multiplied.
    pub fn refined(&self, step_divisor: f64, width_factor: f64) -> Self {
        QuadratureSpec { half_width: self.half_width * width_factor, step: self.step / step_divisor, taper: self.taper }
    }
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / t - 1.0 / (1.0 - t)).exp())
    }
}

/// Interface abscissae and their weights (trapezoid weight times window).
#[derive(Debug, Clone)]
pub struct InterfaceNodes {
    pub x: Vec<f64>,
    pub weight: Vec<f64>,
    pub depth: f64,
}

impl InterfaceNodes {
    pub fn new(geometry: &ArrayGeometry, medium: &TwoLayerMedium, quad: &QuadratureSpec) -> Self {
        let first = geometry.element_x()[0];
        let last = geometry.element_x()[geometry.element_count() - 1];
        let start = first - quad.half_width;
        let end = last + quad.half_width;
        let n = ((end - start) / quad.step).ceil().max(1.0) as usize;
        let h = (end - start) / n as f64;
        let ramp = quad.taper * quad.half_width;
        let mut x = Vec::with_capacity(n + 1);
        let mut weight = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let xk = start + k as f64 * h;
            let edge = (xk - start).min(end - xk);
            let window = if ramp > 0.0 { smooth_step(edge / ramp) } else { 1.0 };
            let trap = if k == 0 || k == n { 0.5 * h } else { h };
            x.push(xk);
            weight.push(trap * window);
        }
        InterfaceNodes { x, weight, depth: medium.interface_depth }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn point(&self, k: usize) -> Point {
        Point::new(self.x[k], self.depth)
    }
}

/// Split-complex row over the interface nodes.
#[derive(Debug, Clone)]
struct SplitRow {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitRow {
    fn with_capacity(n: usize) -> Self {
        SplitRow { re: Vec::with_capacity(n), im: Vec::with_capacity(n) }
    }

    fn push(&mut self, z: C64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    fn dot(&self, other: &SplitRow) -> C64 {
        cdot_split(&self.re, &self.im, &other.re, &other.im)
    }
}

/// Element-side factors at one frequency: for receiver `m` the weighted
/// `f21 * g1`, for transmitter `p` the weighted `g1`.
struct ElementRows {
    rx: Vec<SplitRow>,
    tx: Vec<SplitRow>,
}

fn element_rx_row(omega: f64, element: Point, nodes: &InterfaceNodes, c: f64) -> Result<SplitRow> {
    let mut row = SplitRow::with_capacity(nodes.len());
    for k in 0..nodes.len() {
        let xh = nodes.point(k);
        row.push(f21(omega, element, xh, c, nodes.depth)? * g1(omega, element, xh, c)? * nodes.weight[k]);
    }
    Ok(row)
}

fn element_tx_row(omega: f64, element: Point, nodes: &InterfaceNodes, c: f64) -> Result<SplitRow> {
    let mut row = SplitRow::with_capacity(nodes.len());
    for k in 0..nodes.len() {
        row.push(g1(omega, element, nodes.point(k), c)? * nodes.weight[k]);
    }
    Ok(row)
}

/// Pixel-side factors: `g2` for reception and `f12 * g2` for transmission.
fn pixel_columns(omega: f64, r: Point, nodes: &InterfaceNodes, v: f64, with_tx: bool) -> Result<(SplitRow, Option<SplitRow>)> {
    let mut rx = SplitRow::with_capacity(nodes.len());
    let mut tx = if with_tx { Some(SplitRow::with_capacity(nodes.len())) } else { None };
    for k in 0..nodes.len() {
        let xh = nodes.point(k);
        let g = g2(omega, xh, r, v)?;
        rx.push(g);
        if let Some(t) = tx.as_mut() {
            t.push(f12(omega, xh, r, v, nodes.depth)? * g);
        }
    }
    Ok((rx, tx))
}

fn check_pixel(r: &Point, medium: &TwoLayerMedium) -> Result<()> {
    if r.z > medium.interface_depth && r.x.is_finite() {
        Ok(())
    } else {
        Err(Error::config("pixel", format!("point ({}, {}) is not below the interface", r.x, r.z)))
    }
}

fn check_element(index: usize, geometry: &ArrayGeometry) -> Result<()> {
    if index < geometry.element_count() {
        Ok(())
    } else {
        Err(Error::Index { index: index + 1, len: geometry.element_count() })
    }
}

/// Receive steering element: interface integral of `g2 * f21 * g1` for
/// receiver `m` (0-based) and point `r` in the solid.
pub fn steering_element_rx(
    omega: f64,
    m: usize,
    r: Point,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<C64> {
    quad.validate(geometry, medium, omega)?;
    check_element(m, geometry)?;
    check_pixel(&r, medium)?;
    let nodes = InterfaceNodes::new(geometry, medium, quad);
    let row = element_rx_row(omega, geometry.element(m), &nodes, medium.c)?;
    let (col, _) = pixel_columns(omega, r, &nodes, medium.v, false)?;
    Ok(row.dot(&col))
}

/// Transmit factor: interface integral of `g1 * f12 * g2` for transmitter
/// `p` (0-based).
pub fn transmit_integral(
    omega: f64,
    p: usize,
    r: Point,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<C64> {
    quad.validate(geometry, medium, omega)?;
    check_element(p, geometry)?;
    check_pixel(&r, medium)?;
    let nodes = InterfaceNodes::new(geometry, medium, quad);
    let row = element_tx_row(omega, geometry.element(p), &nodes, medium.c)?;
    let (_, col) = pixel_columns(omega, r, &nodes, medium.v, true)?;
    Ok(row.dot(&col.expect("transmit column requested")))
}

/// Full-matrix-capture steering element for receiver `m` and transmitter `p`.
pub fn steering_element_mimo(
    omega: f64,
    m: usize,
    p: usize,
    r: Point,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<C64> {
    Ok(steering_element_rx(omega, m, r, medium, geometry, quad)? * transmit_integral(omega, p, r, medium, geometry, quad)?)
}

const PIXEL_BLOCK: usize = 8;

/// Dot every element row with a block of pixel columns.
fn fill_block(rows: &[SplitRow], cols: &[&SplitRow], out: &mut DMatrix<C64>, start: usize) {
    for (m, row) in rows.iter().enumerate() {
        if cols.len() == PIXEL_BLOCK {
            let v = cdot_split_multi::<PIXEL_BLOCK>(
                &row.re,
                &row.im,
                std::array::from_fn(|b| cols[b].re.as_slice()),
                std::array::from_fn(|b| cols[b].im.as_slice()),
            );
            for (b, z) in v.iter().enumerate() {
                out[(m, start + b)] = *z;
            }
        } else {
            for (b, c) in cols.iter().enumerate() {
                out[(m, start + b)] = row.dot(c);
            }
        }
    }
}

/// Receive and (optionally) transmit integrals for every element and every
/// point at one frequency. Column `l` belongs to `points[l]`. Entries are
/// bit-identical to the scalar functions above.
#[derive(Debug, Clone)]
pub struct SteeringTables {
    pub omega: f64,
    pub velocity: f64,
    pub rx: DMatrix<C64>,
    pub tx: Option<DMatrix<C64>>,
}

impl SteeringTables {
    pub fn build(
        omega: f64,
        points: &[Point],
        medium: &TwoLayerMedium,
        geometry: &ArrayGeometry,
        quad: &QuadratureSpec,
        with_tx: bool,
    ) -> Result<Self> {
        quad.validate(geometry, medium, omega)?;
        for r in points {
            check_pixel(r, medium)?;
        }
        let nodes = InterfaceNodes::new(geometry, medium, quad);
        let m_count = geometry.element_count();
        let rows = ElementRows {
            rx: (0..m_count).map(|m| element_rx_row(omega, geometry.element(m), &nodes, medium.c)).collect::<Result<_>>()?,
            tx: if with_tx {
                (0..m_count).map(|m| element_tx_row(omega, geometry.element(m), &nodes, medium.c)).collect::<Result<_>>()?
            } else {
                Vec::new()
            },
        };
        let mut rx = DMatrix::zeros(m_count, points.len());
        let mut tx = if with_tx { Some(DMatrix::zeros(m_count, points.len())) } else { None };
        let mut start = 0;
        while start < points.len() {
            let end = (start + PIXEL_BLOCK).min(points.len());
            let cols = points[start..end]
                .iter()
                .map(|r| pixel_columns(omega, *r, &nodes, medium.v, with_tx))
                .collect::<Result<Vec<_>>>()?;
            let rx_cols: Vec<&SplitRow> = cols.iter().map(|c| &c.0).collect();
            fill_block(&rows.rx, &rx_cols, &mut rx, start);
            if let Some(t) = tx.as_mut() {
                let tx_cols: Vec<&SplitRow> = cols.iter().map(|c| c.1.as_ref().expect("transmit column")).collect();
                fill_block(&rows.tx, &tx_cols, t, start);
            }
            start = end;
        }
        Ok(SteeringTables { omega, velocity: medium.v, rx, tx })
    }

    pub fn tx(&self) -> Result<&DMatrix<C64>> {
        self.tx.as_ref().ok_or_else(|| Error::Parameter("transmit table was not built".into()))
    }
}
