use serde::{Deserialize, Serialize};

use crate::analytics::M_MAX;
use crate::bits::{Rounding, EXHAUSTIVE_MAX_BITS, EXHAUSTIVE_MAX_LINKS};
use crate::cell::{CellLayout, LayoutKind, PowerModel, ShadowDraw, Wedge};
use crate::error::{Error, Result};
use crate::precoding::RegStrategy;
use crate::rvq::EXACT_MAX_BITS;

/// Precoding scheme run by the coordinated cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Each BS regularizes against all `KL` coordinated users.
    CoordRzf,
    /// Each BS inverts all `KL` coordinated channels.
    CoordZf,
    /// Each BS runs RZF over its own `L` users and ignores the rest.
    NoncoordRzf,
    /// Each cell alone, with no other BS transmitting.
    SingleCell,
}

impl Scheme {
    pub fn is_coordinated(self) -> bool {
        matches!(self, Scheme::CoordRzf | Scheme::CoordZf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CoordRzf => "coord_rzf",
            Scheme::CoordZf => "coord_zf",
            Scheme::NoncoordRzf => "noncoord_rzf",
            Scheme::SingleCell => "single_cell",
        }
    }
}

/// What the BSs learn about the channel directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Perfect,
    /// Exhaustive search over random codebooks.
    RvqExact,
    /// Gaussian error model with worst-case variance.
    RvqModel,
}

impl FeedbackMode {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackMode::Perfect => "perfect",
            FeedbackMode::RvqExact => "rvq_exact",
            FeedbackMode::RvqModel => "rvq_model",
        }
    }
}

/// How each user's feedback bits are split over its `K` coordinated links.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BitScheme {
    /// The same number of bits on every link.
    Fixed { per_link: u32 },
    /// Closed-form allocation using the RZF residual-interference model.
    Adaptive { total: u32 },
    /// Closed-form allocation ignoring residual interference (ZF model).
    ZfAdaptive { total: u32 },
    Uniform { total: u32 },
    /// Per-user best response maximizing the instantaneous rate.
    ExhaustiveInstSe { total: u32 },
    /// Per-user best response minimizing the instantaneous interference.
    ExhaustiveInstInt { total: u32 },
}

impl BitScheme {
    /// Largest number of bits any single link can receive.
    pub fn max_link_bits(self) -> u32 {
        match self {
            BitScheme::Fixed { per_link } => per_link,
            BitScheme::Adaptive { total }
            | BitScheme::ZfAdaptive { total }
            | BitScheme::Uniform { total }
            | BitScheme::ExhaustiveInstSe { total }
            | BitScheme::ExhaustiveInstInt { total } => total,
        }
    }

    pub fn is_exhaustive(self) -> bool {
        matches!(self, BitScheme::ExhaustiveInstSe { .. } | BitScheme::ExhaustiveInstInt { .. })
    }

    pub fn label(self) -> String {
        match self {
            BitScheme::Fixed { per_link } => format!("fixed:{per_link}"),
            BitScheme::Adaptive { total } => format!("adaptive:{total}"),
            BitScheme::ZfAdaptive { total } => format!("zf_adaptive:{total}"),
            BitScheme::Uniform { total } => format!("uniform:{total}"),
            BitScheme::ExhaustiveInstSe { total } => format!("exhaustive_inst_se:{total}"),
            BitScheme::ExhaustiveInstInt { total } => format!("exhaustive_inst_int:{total}"),
        }
    }
}

/// Everything needed to reproduce one curve family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub layout: LayoutKind,
    /// Coordinated cells.
    pub k: usize,
    /// Users per cell.
    pub l: usize,
    /// Antennas per BS.
    pub m: usize,
    /// Non-coordinated cells.
    pub c: usize,
    /// Co-located interferers per non-coordinated cell.
    pub sectors: usize,
    pub radius: f64,
    pub annulus: [f64; 2],
    /// Per-cell drop wedges; empty means the full annulus everywhere.
    pub wedges: Vec<Wedge>,
    pub min_distance: f64,
    pub pathloss_exponent: f64,
    pub shadowing: bool,
    pub shadowing_db: f64,
    pub shadow_draw: ShadowDraw,
    /// Cell-edge SNR points in dB; `P0` in dB equals `ρ₀`.
    pub rho0_db: Vec<f64>,
    pub scheme: Scheme,
    pub reg: RegStrategy,
    pub feedback: FeedbackMode,
    pub bits: BitScheme,
    pub rounding: Rounding,
    /// Also evaluate the closed-form expected SINR per trial.
    pub overlay: bool,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layout: LayoutKind::TwoCell,
            k: 2,
            l: 2,
            m: 4,
            c: 0,
            sectors: 1,
            radius: 500.0,
            annulus: [325.0, 500.0],
            wedges: Vec::new(),
            min_distance: 35.0,
            pathloss_exponent: 3.8,
            shadowing: true,
            shadowing_db: 8.0,
            shadow_draw: ShadowDraw::RealNormal,
            rho0_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            scheme: Scheme::CoordRzf,
            reg: RegStrategy::MulticellAvg,
            feedback: FeedbackMode::Perfect,
            bits: BitScheme::Fixed { per_link: 10 },
            rounding: Rounding::FloorRepair,
            overlay: false,
            trials: 20_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn kl(&self) -> usize {
        self.k * self.l
    }

    /// Non-coordinated interfering BSs.
    pub fn interferer_count(&self) -> usize {
        self.c * self.sectors
    }

    /// Whether feedback bits influence the precoders at all.
    pub fn uses_bits(&self) -> bool {
        self.feedback != FeedbackMode::Perfect
    }

    pub fn layout(&self) -> Result<CellLayout> {
        let layout = CellLayout::preset(
            self.layout,
            self.radius,
            (self.annulus[0], self.annulus[1]),
            self.k,
            self.c,
        )?;
        let mut layout = if self.wedges.is_empty() {
            layout
        } else {
            layout.with_wedges(self.wedges.clone())?
        };
        layout.min_distance = self.min_distance;
        layout.validate()?;
        Ok(layout)
    }

    /// Power model at unit reference power; powers are scaled per `ρ₀`.
    pub fn power_model(&self) -> PowerModel {
        PowerModel {
            p0: 1.0,
            radius: self.radius,
            exponent: self.pathloss_exponent,
            shadow_db: self.shadowing_db,
            shadowing: self.shadowing,
            shadow_draw: self.shadow_draw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.m == 0 {
            return Err(Error::config("k/l/m", "K, L and M must all be at least 1"));
        }
        if self.kl() > self.m {
            return Err(Error::config(
                "k",
                format!("KL = {} exceeds M = {}", self.kl(), self.m),
            ));
        }
        if self.sectors == 0 {
            return Err(Error::config("sectors", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "zero trials give no estimate"));
        }
        if self.rho0_db.is_empty() || self.rho0_db.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("rho0_db", "need at least one finite SNR point"));
        }
        self.layout()?;
        self.power_model().validate()?;
        self.reg.validate()?;

        if self.uses_bits() {
            let max_bits = self.bits.max_link_bits();
            if self.feedback == FeedbackMode::RvqExact && max_bits > EXACT_MAX_BITS {
                return Err(Error::config(
                    "bits",
                    format!("exact codebook search is limited to {EXACT_MAX_BITS} bits per link, got {max_bits}; use feedback = \"rvq_model\""),
                ));
            }
            if self.m < 2 {
                return Err(Error::config("m", "quantized feedback needs M >= 2"));
            }
            if !self.scheme.is_coordinated() && !matches!(self.bits, BitScheme::Fixed { .. }) {
                return Err(Error::config(
                    "bits",
                    format!("{} feeds back only the serving link; use a fixed bit scheme", self.scheme.name()),
                ));
            }
            if self.bits.is_exhaustive() && (self.k > EXHAUSTIVE_MAX_LINKS || max_bits > EXHAUSTIVE_MAX_BITS) {
                return Err(Error::config(
                    "bits",
                    format!("exhaustive allocation needs K <= {EXHAUSTIVE_MAX_LINKS} and B_total <= {EXHAUSTIVE_MAX_BITS}"),
                ));
            }
            if matches!(self.bits, BitScheme::Adaptive { .. }) && self.m > M_MAX {
                return Err(Error::config("m", format!("adaptive allocation needs M <= {M_MAX}")));
            }
        }

        if self.overlay {
            if self.scheme != Scheme::CoordRzf {
                return Err(Error::config("overlay", "closed forms exist for coord_rzf only"));
            }
            if self.kl() != self.m {
                return Err(Error::config(
                    "overlay",
                    format!("closed forms need KL = M, got KL = {}, M = {}", self.kl(), self.m),
                ));
            }
            if !(2..=M_MAX).contains(&self.m) {
                return Err(Error::config("overlay", format!("closed forms need 2 <= M <= {M_MAX}")));
            }
            if self.uses_bits() && self.bits.is_exhaustive() {
                return Err(Error::config("overlay", "no closed form for instantaneous bit schemes"));
            }
        }
        Ok(())
    }
}
