#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;

use lsi_core::model::{ArrayGeometry, ImagingGrid, Point, Scatterer, ScattererSet, TwoLayerMedium, C64};
use lsi_core::propagation::QuadratureSpec;

pub const CENTER_HZ: f64 = 5e6;
pub const F_MAX_HZ: f64 = 7.5e6;
/// 0-based index of transmitter 30.
pub const SIMO_TX: usize = 29;

pub struct Reference {
    pub geometry: ArrayGeometry,
    pub medium: TwoLayerMedium,
    pub grid: ImagingGrid,
    pub quad: QuadratureSpec,
    pub scene: ScattererSet,
    pub truth: Vec<usize>,
    pub omega: f64,
}

/// 64 elements at 0.6 mm over water/steel, 40 x 40 grid at 0.5 mm, three
/// unit scatterers 14 mm apart laterally with the third 5 mm deeper.
pub fn reference() -> Reference {
    let geometry = ArrayGeometry::uniform(64, 0.6e-3).unwrap();
    let medium = TwoLayerMedium::new(1482.0, 6400.0, 0.03).unwrap();
    let grid = ImagingGrid::with_spacing(40, 40, 9e-3, 35e-3, 0.5e-3, &medium).unwrap();
    let quad = QuadratureSpec::default_for(&geometry, &medium, F_MAX_HZ);
    let points = [Point::new(12e-3, 40e-3), Point::new(26e-3, 40e-3), Point::new(19e-3, 45e-3)];
    let scene =
        ScattererSet::new(points.iter().map(|&position| Scatterer { position, reflectivity: 1.0 }).collect(), &medium).unwrap();
    let truth = points.iter().map(|&p| grid.nearest_pixel(p)).collect();
    Reference { geometry, medium, grid, quad, scene, truth, omega: 2.0 * PI * CENTER_HZ }
}

pub const REFERENCE_TOML: &str = r#"
[array]
elements = 64
pitch = 0.6e-3

[medium]
c = 1482.0
v = 6400.0
interface_depth = 0.03

[grid]
nx = 40
nz = 40
x_min = 9e-3
z_min = 35e-3
spacing = 0.5e-3

[frequency]
center = 5e6
bandwidth = 5e6
sampling = 100e6
samples = 2400

[scene]
scatterers = [[12e-3, 40e-3], [26e-3, 40e-3], [19e-3, 45e-3]]

[noise]
snr_db = 20.0
seed = 11

[method]
name = "bpdn-mimo"
transmitter = 30
policy = "relaxed"
"#;

/// Independent evaluation of the receive and transmit interface integrals on
/// a windowed trapezoid rule, accumulated as real matrix products over node
/// chunks. Returns (rx, tx), each M x N.
pub fn oracle_tables(
    omega: f64,
    points: &[Point],
    medium: &TwoLayerMedium,
    element_x: &[f64],
    half_width: f64,
    step: f64,
    taper: f64,
) -> (DMatrix<C64>, DMatrix<C64>) {
    const CHUNK: usize = 2048;
    let (c, v, zh) = (medium.c, medium.v, medium.interface_depth);
    let lo = element_x[0] - half_width;
    let hi = element_x[element_x.len() - 1] + half_width;
    let n = ((hi - lo) / step).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let ramp = taper * half_width;
    let window = |x: f64| {
        let t = (x - lo).min(hi - x) / ramp;
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            1.0 / (1.0 + (1.0 / t - 1.0 / (1.0 - t)).exp())
        }
    };
    let (mc, np) = (element_x.len(), points.len());
    let mut acc = [DMatrix::<f64>::zeros(mc, np), DMatrix::zeros(mc, np), DMatrix::zeros(mc, np), DMatrix::zeros(mc, np)];
    let mut start = 0;
    while start <= n {
        let end = (start + CHUNK).min(n + 1);
        let kk = end - start;
        // Element side: receive f21 g1 w and transmit g1 w.
        let (mut erx_r, mut erx_i, mut etx_r, mut etx_i) =
            (DMatrix::zeros(mc, kk), DMatrix::zeros(mc, kk), DMatrix::zeros(mc, kk), DMatrix::zeros(mc, kk));
        // Pixel side: receive g2 and transmit f12 g2.
        let (mut prx_r, mut prx_i, mut ptx_r, mut ptx_i) =
            (DMatrix::zeros(kk, np), DMatrix::zeros(kk, np), DMatrix::zeros(kk, np), DMatrix::zeros(kk, np));
        for j in 0..kk {
            let k = start + j;
            let x = lo + k as f64 * h;
            let trap = if k == 0 || k == n { 0.5 * h } else { h };
            let w = trap * if ramp > 0.0 { window(x) } else { 1.0 };
            for (m, &ex) in element_x.iter().enumerate() {
                let d1 = ((x - ex).powi(2) + zh * zh).sqrt();
                let g1 = C64::from_polar(d1.powf(-0.5), -omega * d1 / c) * w;
                let r = g1 * C64::new(0.0, omega * zh.abs() / (4.0 * PI * c * d1));
                erx_r[(m, j)] = r.re;
                erx_i[(m, j)] = r.im;
                etx_r[(m, j)] = g1.re;
                etx_i[(m, j)] = g1.im;
            }
            for (l, p) in points.iter().enumerate() {
                let d2 = ((p.x - x).powi(2) + (p.z - zh).powi(2)).sqrt();
                let g2 = C64::from_polar(d2.powf(-0.5), -omega * d2 / v);
                let t = g2 * C64::new(0.0, omega * (zh - p.z).abs() / (4.0 * PI * v * d2));
                prx_r[(j, l)] = g2.re;
                prx_i[(j, l)] = g2.im;
                ptx_r[(j, l)] = t.re;
                ptx_i[(j, l)] = t.im;
            }
        }
        acc[0] += &erx_r * &prx_r - &erx_i * &prx_i;
        acc[1] += &erx_r * &prx_i + &erx_i * &prx_r;
        acc[2] += &etx_r * &ptx_r - &etx_i * &ptx_i;
        acc[3] += &etx_r * &ptx_i + &etx_i * &ptx_r;
        start = end;
    }
    let join = |re: &DMatrix<f64>, im: &DMatrix<f64>| DMatrix::from_fn(mc, np, |i, j| C64::new(re[(i, j)], im[(i, j)]));
    (join(&acc[0], &acc[1]), join(&acc[2], &acc[3]))
}
