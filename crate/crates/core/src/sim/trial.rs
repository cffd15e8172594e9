use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{BitScheme, ExperimentConfig, FeedbackMode, Scheme};
use super::sinr::{instantaneous_sinr, SinrParts, Transmitter};
use crate::analytics::{expected_sinr_perfect, expected_sinr_rvq, AnalyticsContext, LinkBudget};
use crate::bits::{adaptive_bits, enumerate_splits, uniform_bits, AllocationInput};
use crate::cell::{
    drop_users, received_power, sample_channel, CellLayout, ChannelVector, InterfererCell, NetworkRealization, Point,
    Region, UserLinks,
};
use crate::error::{Error, Result};
use crate::oracle::context_with_fallback;
use crate::precoding::{grid_argmax, log_grid, mean_inverse_power, rzf_precoder, zf_precoder, PrecodeMatrix, RegStrategy};
use crate::rvq::{generate_codebook, model_quantize_with, nested_best_indices, quantize_from_nested, Codebook, QuantizedChannel};

const GEOMETRY: u64 = 1;
const FADING: u64 = 2;
const CODEBOOK: u64 = 3;
const MODEL_ERROR: u64 = 4;

/// Generator for one `(seed, purpose, trial)` triple. Trials map to
/// independent ChaCha streams, so a trial's randomness does not depend on
/// which worker runs it or in what order.
pub fn trial_rng(seed: u64, purpose: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial);
    rng
}

/// Draws user positions, shadowing and fading for one trial, with powers at
/// unit reference power (`P0 = 1`).
pub fn draw_network(cfg: &ExperimentConfig, layout: &CellLayout, trial: u64) -> Result<NetworkRealization> {
    let model = cfg.power_model();
    let mut geo = trial_rng(cfg.seed, GEOMETRY, trial);
    let mut fade = trial_rng(cfg.seed, FADING, trial);

    let mut sites: Vec<Point> = layout.coordination_set.iter().map(|&c| layout.centers[c]).collect();
    for &c in &layout.noncoord_set {
        sites.extend(std::iter::repeat_n(layout.centers[c], cfg.sectors));
    }

    let mut users = Vec::with_capacity(cfg.kl());
    for (pos, &cell) in layout.coordination_set.iter().enumerate() {
        for (index, position) in drop_users(layout, cell, cfg.l, Region::Annulus, &mut geo)?.into_iter().enumerate() {
            let powers = sites
                .iter()
                .map(|s| received_power(&model, position.distance(s), &mut geo))
                .collect::<Result<Vec<_>>>()?;
            users.push(UserLinks {
                cell: pos,
                index,
                position,
                powers,
                channels: Vec::new(),
            });
        }
    }
    let mut interferers = Vec::with_capacity(cfg.interferer_count());
    for &cell in &layout.noncoord_set {
        for _ in 0..cfg.sectors {
            let center = layout.centers[cell];
            let own_powers = drop_users(layout, cell, cfg.l, Region::FullCell, &mut geo)?
                .iter()
                .map(|p| received_power(&model, p.distance(&center), &mut geo))
                .collect::<Result<Vec<_>>>()?;
            interferers.push(InterfererCell {
                cell,
                own_powers,
                own_channels: Vec::new(),
            });
        }
    }

    for u in &mut users {
        u.channels = (0..sites.len()).map(|_| sample_channel(cfg.m, &mut fade)).collect::<Result<_>>()?;
    }
    for i in &mut interferers {
        i.own_channels = (0..cfg.l).map(|_| sample_channel(cfg.m, &mut fade)).collect::<Result<_>>()?;
    }
    Ok(NetworkRealization {
        k: cfg.k,
        l: cfg.l,
        m: cfg.m,
        users,
        interferers,
    })
}

/// Per-trial feedback randomness, shared by every SNR point and bit split.
enum FeedbackSource {
    Perfect,
    Exact(Vec<Vec<Option<(Codebook, Vec<usize>)>>>),
    Model(Vec<Vec<DVector<Complex64>>>),
}

fn is_fed_back(cfg: &ExperimentConfig, serving: usize, bs: usize) -> bool {
    cfg.scheme.is_coordinated() || serving == bs
}

impl FeedbackSource {
    fn prepare(cfg: &ExperimentConfig, real: &NetworkRealization, trial: u64) -> Result<Self> {
        match cfg.feedback {
            FeedbackMode::Perfect => Ok(Self::Perfect),
            FeedbackMode::RvqExact => {
                let mut rng = trial_rng(cfg.seed, CODEBOOK, trial);
                let bits = cfg.bits.max_link_bits();
                let mut out = Vec::with_capacity(real.users.len());
                for u in &real.users {
                    let mut per_bs = Vec::with_capacity(cfg.k);
                    for b in 0..cfg.k {
                        if is_fed_back(cfg, u.cell, b) {
                            let cb = generate_codebook(bits, cfg.m, &mut rng)?;
                            let nested = nested_best_indices(&u.channels[b], &cb)?;
                            per_bs.push(Some((cb, nested)));
                        } else {
                            per_bs.push(None);
                        }
                    }
                    out.push(per_bs);
                }
                Ok(Self::Exact(out))
            }
            FeedbackMode::RvqModel => {
                let mut rng = trial_rng(cfg.seed, MODEL_ERROR, trial);
                let out = real
                    .users
                    .iter()
                    .map(|_| (0..cfg.k).map(|_| sample_channel(cfg.m, &mut rng).map(|c| c.0)).collect())
                    .collect::<Result<Vec<Vec<_>>>>()?;
                Ok(Self::Model(out))
            }
        }
    }

    fn quantize(&self, cfg: &ExperimentConfig, user: usize, u: &UserLinks, bs: usize, bits: u32) -> Result<QuantizedChannel> {
        let h: &ChannelVector = &u.channels[bs];
        if !is_fed_back(cfg, u.cell, bs) {
            return Ok(QuantizedChannel::perfect(h));
        }
        match self {
            Self::Perfect => Ok(QuantizedChannel::perfect(h)),
            Self::Exact(books) => {
                let (cb, nested) = books[user][bs].as_ref().expect("codebook drawn for every fed-back link");
                quantize_from_nested(h, cb, nested, bits)
            }
            Self::Model(errors) => Ok(model_quantize_with(h, &errors[user][bs], bits)),
        }
    }
}

/// Bits of one user reordered from serving-first to BS order.
fn bits_by_bs(serving: usize, alloc: &[u32]) -> Vec<u32> {
    let k = alloc.len();
    let mut out = vec![0; k];
    out[serving] = alloc[0];
    let mut next = 1;
    for (b, slot) in out.iter_mut().enumerate() {
        if b != serving {
            *slot = alloc[next];
            next += 1;
        }
    }
    out
}

/// Everything measured for one SNR point of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub rho0_db: f64,
    /// Instantaneous SINR per coordinated user (linear), cell-major.
    pub sinr: Vec<f64>,
    /// `Σ_l log₂(1 + SINR)` per coordinated cell.
    pub cell_rates: Vec<f64>,
    /// Bits per user, serving link first.
    pub bits: Vec<Vec<u32>>,
    /// Regularization parameter per coordinated BS.
    pub alphas: Vec<f64>,
    /// Closed-form expected SINR per user, when overlays are requested.
    pub analytic_sinr: Option<Vec<f64>>,
}

impl TrialResult {
    pub fn mean_sinr(&self) -> f64 {
        self.sinr.iter().sum::<f64>() / self.sinr.len() as f64
    }

    pub fn mean_cell_rate(&self) -> f64 {
        self.cell_rates.iter().sum::<f64>() / self.cell_rates.len() as f64
    }
}

type Feedback = Vec<Vec<QuantizedChannel>>;

struct Point0<'a> {
    cfg: &'a ExperimentConfig,
    real: &'a NetworkRealization,
    source: &'a FeedbackSource,
}

impl Point0<'_> {
    fn power(&self, user: usize, bs: usize) -> f64 {
        self.real.users[user].powers[bs]
    }

    fn cell_users(&self, cell: usize) -> std::ops::Range<usize> {
        cell * self.cfg.l..(cell + 1) * self.cfg.l
    }

    /// Parameter from the configured strategy; the grid strategy starts from
    /// the multicell (coordinated) or own-cell average.
    fn base_alphas(&self) -> Result<Vec<f64>> {
        let kl = self.cfg.kl();
        (0..self.cfg.k)
            .map(|k| {
                let own: Vec<f64> = self.cell_users(k).map(|u| self.power(u, k)).collect();
                let all: Vec<f64> = (0..kl).map(|u| self.power(u, k)).collect();
                match self.cfg.reg {
                    RegStrategy::SingleCellAvg => mean_inverse_power(&own),
                    RegStrategy::MulticellAvg => mean_inverse_power(&all),
                    RegStrategy::Fixed { alpha } => Ok(alpha),
                    RegStrategy::GridOpt { .. } => {
                        if self.cfg.scheme.is_coordinated() {
                            mean_inverse_power(&all)
                        } else {
                            mean_inverse_power(&own)
                        }
                    }
                }
            })
            .collect()
    }

    fn interferer_txs(&self) -> Result<Vec<Transmitter>> {
        if self.cfg.scheme == Scheme::SingleCell {
            return Ok(Vec::new());
        }
        let l = self.cfg.l;
        self.real
            .interferers
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                let h = DMatrix::from_fn(l, self.cfg.m, |r, c| cell.own_channels[r][c]);
                let alpha = mean_inverse_power(&cell.own_powers)?;
                let raw = rzf_precoder(&h, alpha)?;
                let p = PrecodeMatrix::with_budget(raw.raw().clone(), l as f64)?;
                Ok(Transmitter::new(self.cfg.k + i, &p, (0..l).map(|c| (c, None)).collect()))
            })
            .collect()
    }

    fn feedback(&self, alloc: &[Vec<u32>]) -> Result<Feedback> {
        (0..self.real.users.len()).map(|i| self.user_feedback(i, &alloc[i])).collect()
    }

    fn user_feedback(&self, user: usize, alloc: &[u32]) -> Result<Vec<QuantizedChannel>> {
        let u = &self.real.users[user];
        let bits = bits_by_bs(u.cell, alloc);
        (0..self.cfg.k)
            .map(|b| self.source.quantize(self.cfg, user, u, b, bits[b]))
            .collect()
    }

    fn coordinated_tx(&self, fb: &Feedback, k: usize, alpha: f64) -> Result<Transmitter> {
        let (cfg, l) = (self.cfg, self.cfg.l);
        if cfg.scheme.is_coordinated() {
            let kl = cfg.kl();
            let h = DMatrix::from_fn(kl, cfg.m, |r, c| fb[r][k].row[c]);
            let p = match cfg.scheme {
                Scheme::CoordZf => zf_precoder(&h)?,
                _ => rzf_precoder(&h, alpha)?,
            };
            Ok(Transmitter::new(k, &p, self.cell_users(k).map(|u| (u, Some(u))).collect()))
        } else {
            let users = self.cell_users(k);
            let h = DMatrix::from_fn(l, cfg.m, |r, c| fb[users.start + r][k].row[c]);
            let p = rzf_precoder(&h, alpha)?;
            Ok(Transmitter::new(k, &p, users.enumerate().map(|(c, u)| (c, Some(u))).collect()))
        }
    }

    fn coordinated_txs(&self, fb: &Feedback, alphas: &[f64]) -> Result<Vec<Transmitter>> {
        (0..self.cfg.k).map(|k| self.coordinated_tx(fb, k, alphas[k])).collect()
    }

    fn user_parts(&self, user: usize, fb: &Feedback, coord: &[&Transmitter], inter: &[Transmitter]) -> Result<SinrParts> {
        let u = &self.real.users[user];
        let channels: Vec<&DVector<Complex64>> = (0..u.channels.len())
            .map(|b| if b < self.cfg.k { &fb[user][b].effective } else { &u.channels[b].0 })
            .collect();
        let txs: Vec<&Transmitter> = if self.cfg.scheme == Scheme::SingleCell {
            vec![coord[u.cell]]
        } else {
            coord.iter().copied().chain(inter.iter()).collect()
        };
        instantaneous_sinr(user, &u.powers, &channels, &txs)
    }

    fn contexts(&self, alphas: &[f64]) -> Result<Vec<AnalyticsContext>> {
        alphas.iter().map(|&a| context_with_fallback(self.cfg.m, a)).collect()
    }

    fn allocate(&self, base: &[f64], inter: &[Transmitter]) -> Result<Vec<Vec<u32>>> {
        let (cfg, kl, k) = (self.cfg, self.cfg.kl(), self.cfg.k);
        let weights_input = |user: usize, total: u32, deltas: &[f64]| {
            let serving = self.real.users[user].cell;
            let others: Vec<usize> = (0..k).filter(|&j| j != serving).collect();
            AllocationInput::from_powers(
                total,
                cfg.m,
                cfg.l,
                self.power(user, serving),
                deltas[serving],
                &others.iter().map(|&j| self.power(user, j)).collect::<Vec<_>>(),
                &others.iter().map(|&j| deltas[j]).collect::<Vec<_>>(),
            )
        };
        match cfg.bits {
            _ if !cfg.uses_bits() => Ok(vec![vec![0; k]; kl]),
            BitScheme::Fixed { per_link } => Ok(vec![vec![per_link; k]; kl]),
            BitScheme::Uniform { total } => Ok(vec![uniform_bits(total, k)?.bits; kl]),
            BitScheme::Adaptive { total } => {
                let deltas: Vec<f64> = self.contexts(base)?.iter().map(|c| c.big_delta).collect();
                (0..kl)
                    .map(|u| Ok(adaptive_bits(&weights_input(u, total, &deltas)?, cfg.rounding)?.bits))
                    .collect()
            }
            BitScheme::ZfAdaptive { total } => {
                let deltas = vec![0.0; k];
                (0..kl)
                    .map(|u| Ok(adaptive_bits(&weights_input(u, total, &deltas)?, cfg.rounding)?.bits))
                    .collect()
            }
            BitScheme::ExhaustiveInstSe { total } | BitScheme::ExhaustiveInstInt { total } => {
                let maximize_rate = matches!(cfg.bits, BitScheme::ExhaustiveInstSe { .. });
                let splits = enumerate_splits(total, k)?;
                let mut alloc = vec![uniform_bits(total, k)?.bits; kl];
                let mut fb = self.feedback(&alloc)?;
                for user in 0..kl {
                    let mut best: Option<(f64, Vec<u32>, Vec<QuantizedChannel>)> = None;
                    for split in &splits {
                        fb[user] = self.user_feedback(user, split)?;
                        let txs = self.coordinated_txs(&fb, base)?;
                        let refs: Vec<&Transmitter> = txs.iter().collect();
                        let parts = self.user_parts(user, &fb, &refs, inter)?;
                        let cost = if maximize_rate { -parts.sinr() } else { parts.interference };
                        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                            best = Some((cost, split.clone(), fb[user].clone()));
                        }
                    }
                    let (_, split, user_fb) = best.expect("at least one split");
                    alloc[user] = split;
                    fb[user] = user_fb;
                }
                Ok(alloc)
            }
        }
    }

    /// Per-cell maximizer of the cell's instantaneous sum rate with the other
    /// cells held at their base parameter. The base parameter itself is a
    /// candidate, so the result never does worse than it.
    fn grid_alphas(&self, fb: &Feedback, base: &[f64], inter: &[Transmitter], grid: &[f64]) -> Result<Vec<f64>> {
        let txs = self.coordinated_txs(fb, base)?;
        (0..self.cfg.k)
            .map(|k| {
                let mut candidates = grid.to_vec();
                candidates.push(base[k]);
                let (alpha, _) = grid_argmax(&candidates, |a| {
                    let tx_k = self.coordinated_tx(fb, k, a)?;
                    let refs: Vec<&Transmitter> =
                        txs.iter().enumerate().map(|(j, t)| if j == k { &tx_k } else { t }).collect();
                    self.cell_users(k)
                        .map(|u| Ok((1.0 + self.user_parts(u, fb, &refs, inter)?.sinr()).log2()))
                        .sum::<Result<f64>>()
                })?;
                Ok(alpha)
            })
            .collect()
    }

    fn overlay(&self, alphas: &[f64], alloc: &[Vec<u32>]) -> Result<Vec<f64>> {
        let ctxs = self.contexts(alphas)?;
        let k = self.cfg.k;
        (0..self.cfg.kl())
            .map(|user| {
                let u = &self.real.users[user];
                let others: Vec<usize> = (0..k).filter(|&j| j != u.cell).collect();
                let budget = LinkBudget {
                    p_serving: u.powers[u.cell],
                    p_interf: others.iter().map(|&j| u.powers[j]).collect(),
                    p_noncoord: u.powers[k..].to_vec(),
                    users_per_cell: self.cfg.l,
                };
                let interferers: Vec<&AnalyticsContext> = others.iter().map(|&j| &ctxs[j]).collect();
                if self.cfg.uses_bits() {
                    expected_sinr_rvq(&ctxs[u.cell], &interferers, &budget, &alloc[user])
                } else {
                    expected_sinr_perfect(&ctxs[u.cell], &interferers, &budget)
                }
            })
            .collect()
    }

    fn run(&self, rho0_db: f64) -> Result<TrialResult> {
        let cfg = self.cfg;
        let base = self.base_alphas()?;
        let inter = self.interferer_txs()?;
        let alloc = self.allocate(&base, &inter)?;
        let fb = self.feedback(&alloc)?;
        let alphas = match cfg.reg {
            RegStrategy::GridOpt { lo, hi, points } if cfg.scheme != Scheme::CoordZf => {
                self.grid_alphas(&fb, &base, &inter, &log_grid(lo, hi, points))?
            }
            _ => base,
        };
        let txs = self.coordinated_txs(&fb, &alphas)?;
        let refs: Vec<&Transmitter> = txs.iter().collect();
        let mut sinr = Vec::with_capacity(cfg.kl());
        for user in 0..cfg.kl() {
            let parts = self.user_parts(user, &fb, &refs, &inter)?;
            let s = parts.sinr();
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Invariant(format!("SINR {s} of user {user} is not a finite non-negative number")));
            }
            if cfg.scheme == Scheme::CoordZf && cfg.feedback == FeedbackMode::Perfect {
                let u = &self.real.users[user];
                let channels: Vec<&DVector<Complex64>> = u.channels.iter().map(|c| &c.0).collect();
                let own = instantaneous_sinr(user, &u.powers, &channels, &refs)?;
                if own.interference > 1e-10 * own.signal {
                    return Err(Error::Invariant(format!(
                        "coordinated ZF leaks {:.3e} of the signal power to user {user}",
                        own.interference / own.signal
                    )));
                }
            }
            sinr.push(s);
        }
        let cell_rates = (0..cfg.k)
            .map(|k| self.cell_users(k).map(|u| (1.0 + sinr[u]).log2()).sum())
            .collect();
        let analytic_sinr = if cfg.overlay { Some(self.overlay(&alphas, &alloc)?) } else { None };
        Ok(TrialResult {
            rho0_db,
            sinr,
            cell_rates,
            bits: alloc,
            alphas,
            analytic_sinr,
        })
    }
}

/// Runs every SNR point of one trial. Geometry, fading, codebooks and
/// model errors are drawn once and reused across the SNR sweep.
pub fn run_trial(cfg: &ExperimentConfig, layout: &CellLayout, trial: u64) -> Result<Vec<TrialResult>> {
    let unit = draw_network(cfg, layout, trial)?;
    let source = FeedbackSource::prepare(cfg, &unit, trial)?;
    cfg.rho0_db
        .iter()
        .map(|&rho| {
            let real = unit.scaled(10f64.powf(rho / 10.0));
            Point0 {
                cfg,
                real: &real,
                source: &source,
            }
            .run(rho)
        })
        .collect()
}
