//! Network geometry, large-scale power model and Rayleigh channel sampling.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Angular span (degrees) in which a cell's coordinated users are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    pub center_deg: f64,
    pub width_deg: f64,
}

impl Wedge {
    pub const FULL: Wedge = Wedge {
        center_deg: 0.0,
        width_deg: 360.0,
    };
}

/// Where in a cell users are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// The coordination annulus, restricted to the cell's wedge.
    Annulus,
    /// The whole cell disk beyond the minimum coupling distance.
    FullCell,
}

/// Built-in layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    TwoCell,
    ThreeCell,
    TwentyoneCell,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellLayout {
    pub centers: Vec<Point>,
    pub radius: f64,
    /// Cells whose BSs share CSI, in coordination order.
    pub coordination_set: Vec<usize>,
    /// Cells whose BSs interfere without coordination.
    pub noncoord_set: Vec<usize>,
    /// `[d_min, d_max]` in meters.
    pub annulus: (f64, f64),
    /// One wedge per cell in `centers`.
    pub wedges: Vec<Wedge>,
    /// Inner radius for full-cell drops (keeps path loss finite).
    pub min_distance: f64,
}

impl CellLayout {
    pub fn new(
        centers: Vec<Point>,
        radius: f64,
        coordination_set: Vec<usize>,
        noncoord_set: Vec<usize>,
        annulus: (f64, f64),
    ) -> Result<Self> {
        let wedges = vec![Wedge::FULL; centers.len()];
        let layout = Self {
            centers,
            radius,
            coordination_set,
            noncoord_set,
            annulus,
            wedges,
            min_distance: 35.0,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::config("radius", "must be > 0"));
        }
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                if !(a.distance(b) > 0.0) {
                    return Err(Error::config("centers", "cell centers must be distinct"));
                }
            }
        }
        if self.coordination_set.is_empty() {
            return Err(Error::config("k", "at least one coordinated cell is required"));
        }
        let mut seen = vec![false; self.centers.len()];
        for &c in self.coordination_set.iter().chain(&self.noncoord_set) {
            if c >= self.centers.len() {
                return Err(Error::config("cells", format!("cell index {c} out of range")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::config("cells", format!("cell {c} listed twice")));
            }
        }
        let (lo, hi) = self.annulus;
        if !(lo >= 0.0 && lo < hi && hi <= self.radius) {
            return Err(Error::config(
                "annulus",
                format!("need 0 <= d_min < d_max <= R, got [{lo}, {hi}] with R = {}", self.radius),
            ));
        }
        if self.wedges.len() != self.centers.len() {
            return Err(Error::config("wedges", "one wedge per cell is required"));
        }
        if self.wedges.iter().any(|w| !(w.width_deg > 0.0 && w.width_deg <= 360.0)) {
            return Err(Error::config("wedges", "wedge width must lie in (0, 360]"));
        }
        if !(self.min_distance > 0.0 && self.min_distance < self.radius) {
            return Err(Error::config("min_distance", "must lie in (0, R)"));
        }
        Ok(())
    }

    /// One of the built-in layouts with `k` coordinated and `c`
    /// non-coordinated cells. Hexagonal cells of circumradius `radius`, so
    /// neighbouring sites are `√3 R` apart.
    pub fn preset(kind: LayoutKind, radius: f64, annulus: (f64, f64), k: usize, c: usize) -> Result<Self> {
        let isd = 3f64.sqrt() * radius;
        let hex = |q: f64, r: f64| Point::new(isd * (q + r / 2.0), isd * r * 3f64.sqrt() / 2.0);
        let (centers, coord_pool, noncoord_pool): (Vec<Point>, Vec<usize>, Vec<usize>) = match kind {
            LayoutKind::TwoCell => (vec![hex(0.0, 0.0), hex(1.0, 0.0)], vec![0, 1], vec![]),
            LayoutKind::ThreeCell => (
                vec![hex(0.0, 0.0), hex(1.0, 0.0), hex(0.0, 1.0)],
                vec![0, 1, 2],
                vec![2, 1],
            ),
            LayoutKind::TwentyoneCell => {
                // Three mutually adjacent cells surrounded by the 18 sites
                // nearest to their common corner.
                const RING: [(i32, i32); 18] = [
                    (-1, 1), (1, -1), (1, 1), (-1, 0), (-1, 2), (0, 2),
                    (0, -1), (2, -1), (2, 0), (-2, 1), (-2, 2), (1, -2),
                    (1, 2), (2, -2), (2, 1), (-1, -1), (-1, 3), (3, -1),
                ];
                let mut centers = vec![hex(0.0, 0.0), hex(1.0, 0.0), hex(0.0, 1.0)];
                centers.extend(RING.iter().map(|&(q, r)| hex(f64::from(q), f64::from(r))));
                (centers, vec![0, 1, 2], (3..21).collect())
            }
        };
        if k == 0 || k > coord_pool.len() {
            return Err(Error::config(
                "k",
                format!("{kind:?} supports 1..={} coordinated cells, got {k}", coord_pool.len()),
            ));
        }
        let coordination_set: Vec<usize> = coord_pool[..k].to_vec();
        let noncoord_set: Vec<usize> = noncoord_pool
            .iter()
            .copied()
            .filter(|i| !coordination_set.contains(i))
            .take(c)
            .collect();
        if noncoord_set.len() != c {
            return Err(Error::config(
                "c",
                format!("{kind:?} with K = {k} has room for {} non-coordinated cells, got {c}", noncoord_set.len()),
            ));
        }
        Self::new(centers, radius, coordination_set, noncoord_set, annulus)
    }

    pub fn with_wedges(mut self, wedges: Vec<Wedge>) -> Result<Self> {
        self.wedges = wedges;
        self.validate()?;
        Ok(self)
    }
}

/// Drops `count` users area-uniformly over `region` of cell `cell`.
pub fn drop_users<R: Rng + ?Sized>(
    layout: &CellLayout,
    cell: usize,
    count: usize,
    region: Region,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if count == 0 {
        return Err(Error::config("users_per_cell", "must be at least 1"));
    }
    let center = *layout
        .centers
        .get(cell)
        .ok_or_else(|| Error::config("cell", format!("cell index {cell} out of range")))?;
    let (d_min, d_max, wedge) = match region {
        Region::Annulus => (layout.annulus.0, layout.annulus.1, layout.wedges[cell]),
        Region::FullCell => (layout.min_distance, layout.radius, Wedge::FULL),
    };
    if !(d_min >= 0.0 && d_min < d_max) {
        return Err(Error::config(
            "annulus",
            format!("empty drop region [{d_min}, {d_max}]"),
        ));
    }
    let (lo2, hi2) = (d_min * d_min, d_max * d_max);
    let start = (wedge.center_deg - wedge.width_deg / 2.0).to_radians();
    let width = wedge.width_deg.to_radians();
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let r = (u * (hi2 - lo2) + lo2).sqrt();
            let theta = start + v * width;
            Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
        })
        .collect())
}

/// How the shadowing exponent `η` is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowDraw {
    /// `η ~ N(0, 1)`.
    #[default]
    RealNormal,
    /// `η ~ CN(0, 1)` taken literally; its real part (variance 1/2) sets
    /// the exponent.
    ComplexNormal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerModel {
    /// Received power at distance `R` without shadowing (linear).
    pub p0: f64,
    pub radius: f64,
    pub exponent: f64,
    pub shadow_db: f64,
    pub shadowing: bool,
    pub shadow_draw: ShadowDraw,
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0) {
            return Err(Error::config("p0", "must be > 0"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config("radius", "must be > 0"));
        }
        if !(self.exponent > 0.0) {
            return Err(Error::config("pathloss_exponent", "must be > 0"));
        }
        if !(self.shadow_db >= 0.0) {
            return Err(Error::config("shadowing_db", "must be >= 0"));
        }
        Ok(())
    }

    /// Draws one log-normal shadowing factor `z = 10^{η σ / 10}`.
    pub fn shadowing_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if !self.shadowing || self.shadow_db == 0.0 {
            return 1.0;
        }
        let eta: f64 = match self.shadow_draw {
            ShadowDraw::RealNormal => rng.sample(StandardNormal),
            ShadowDraw::ComplexNormal => {
                let re: f64 = rng.sample(StandardNormal);
                let _im: f64 = rng.sample(StandardNormal);
                re * std::f64::consts::FRAC_1_SQRT_2
            }
        };
        10f64.powf(eta * self.shadow_db / 10.0)
    }

    /// Deterministic part `P0 (R/d)^a`.
    pub fn path_gain(&self, distance: f64) -> Result<f64> {
        if !(distance > 0.0) {
            return Err(Error::domain(
                "received_power",
                format!("distance must be > 0, got {distance}"),
            ));
        }
        Ok(self.p0 * (self.radius / distance).powf(self.exponent))
    }
}

/// `P0 (R/d)^a z` with a fresh shadowing draw.
pub fn received_power<R: Rng + ?Sized>(model: &PowerModel, distance: f64, rng: &mut R) -> Result<f64> {
    let deterministic = model.path_gain(distance)?;
    Ok(deterministic * model.shadowing_factor(rng))
}

/// A `1 x M` channel row. Its direction is the CDI and its norm the CQI.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector(pub DVector<Complex64>);

impl ChannelVector {
    pub fn from_vec(v: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Unit-norm direction (CDI).
    pub fn direction(&self) -> Result<DVector<Complex64>> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::domain("direction", "zero channel vector"));
        }
        Ok(&self.0 / Complex64::new(n, 0.0))
    }

    /// `h · w` treating `self` as a row vector.
    pub fn dot_column(&self, w: &[Complex64]) -> Complex64 {
        self.0.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

impl Deref for ChannelVector {
    type Target = DVector<Complex64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws an i.i.d. `CN(0, 1)` channel of length `m`.
pub fn sample_channel<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ChannelVector> {
    if m == 0 {
        return Err(Error::config("m", "antenna count must be at least 1"));
    }
    Ok(ChannelVector(DVector::from_fn(m, |_, _| complex_normal(rng, 1.0))))
}

/// Links of one coordinated user.
#[derive(Clone, Debug)]
pub struct UserLinks {
    /// Position of the serving cell in the coordination set.
    pub cell: usize,
    /// Index within the cell.
    pub index: usize,
    pub position: Point,
    /// Received power from every BS: the `K` coordinated BSs in coordination
    /// order, then the non-coordinated interferers.
    pub powers: Vec<f64>,
    /// Channels in the same order as `powers`.
    pub channels: Vec<ChannelVector>,
}

/// A non-coordinated interferer with the users it serves.
#[derive(Clone, Debug)]
pub struct InterfererCell {
    /// Cell index in the layout.
    pub cell: usize,
    /// Received power of each own user from this BS.
    pub own_powers: Vec<f64>,
    /// Channels from this BS to its own users.
    pub own_channels: Vec<ChannelVector>,
}

/// One drop of the network.
#[derive(Clone, Debug)]
pub struct NetworkRealization {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    /// `K L` coordinated users, cell-major.
    pub users: Vec<UserLinks>,
    pub interferers: Vec<InterfererCell>,
}

impl NetworkRealization {
    pub fn user(&self, cell: usize, index: usize) -> &UserLinks {
        &self.users[cell * self.l + index]
    }

    /// Copy with every received power multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NetworkRealization {
        let mut out = self.clone();
        for u in &mut out.users {
            u.powers.iter_mut().for_each(|p| *p *= factor);
        }
        for i in &mut out.interferers {
            i.own_powers.iter_mut().for_each(|p| *p *= factor);
        }
        out
    }

    /// Number of BSs every coordinated user has a link to.
    pub fn bs_count(&self) -> usize {
        self.k + self.interferers.len()
    }
}

/// Stacks the channels from coordinated BS `bs` to all `K L` coordinated
/// users into a `KL x M` matrix, cell-major then user-major.
pub fn build_concatenated_channel(real: &NetworkRealization, bs: usize) -> Result<DMatrix<Complex64>> {
    let kl = real.k * real.l;
    if kl > real.m {
        return Err(Error::config(
            "k",
            format!("KL = {kl} exceeds M = {}", real.m),
        ));
    }
    if bs >= real.k {
        return Err(Error::config("bs", format!("BS {bs} is not coordinated")));
    }
    Ok(DMatrix::from_fn(kl, real.m, |r, c| real.users[r].channels[bs][c]))
}
