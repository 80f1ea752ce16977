//! Correlated four-factor Hull-White simulation under the domestic
//! spot-martingale measure.
//!
//! The simulated state is `(c_dom, c_for, y, ln_fx)`:
//!
//! ```text
//! dc_dom = (θ_dom(t) - κ_dom c_dom) dt + σ_dom dW₁
//! dc_for = (θ_for(t) - ρ_{2,4} σ_for σ_x - κ_for c_for) dt + σ_for dW₂
//! dy     = (θ_y(t)   - κ_y y) dt + σ_y dW₃
//! dln fx = (c_dom - c_for + y - σ_x²/2) dt + σ_x dW₄
//! ```
//!
//! with a general correlation structure except that the spread factor is
//! independent of the others. The `-ρ_{2,4} σ_for σ_x` term is the quanto
//! drift of the foreign rate under the domestic measure.
//!
//! Discretization is an Euler scheme on a uniform grid with exact Gaussian
//! increments. Time integrals (`∫c`, `∫y`) are accumulated with the
//! trapezoidal rule, and the log-FX drift uses the same trapezoidal
//! averages, so the discounted-FX martingale identity holds exactly path
//! by path in the discretized model.
//!
//! The per-step drifts are fitted so that `E[exp(-∫₀^{t_k} x ds)]` equals
//! the input curve's discount factor at *every* grid date: the discretized
//! dynamics reprice the initial term structures exactly, not just up to
//! O(dt). Because the state stays jointly Gaussian, conditional bond prices
//! under the same discretization are exponential-affine with coefficients
//! given by a one-sweep backward recursion ([`bond_coefficients`]); those
//! coefficients are what the on-path revaluations use.
//!
//! Path generation is deterministic given the seed: paths are partitioned
//! into fixed-size blocks, each driven by its own counter-indexed ChaCha
//! substream, so results do not depend on how blocks are scheduled across
//! threads.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::market::{Factor, MarketModel, ModelError};
use crate::math;

/// Uniform simulation grid, `t_k = k / steps_per_year`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps_per_year: u32,
    n_steps: usize,
    dt: f64,
    times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    BadConfig(&'static str),
    /// Simulation horizon extends past the last pillar of a curve and flat
    /// extrapolation was not explicitly allowed.
    Extrapolation { factor: &'static str, covered_to: f64, horizon: f64 },
    /// A requested time does not lie on the simulation grid.
    OffGridTime { t: f64 },
    Model(ModelError),
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::Model(e)
    }
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::BadConfig(m) => write!(f, "bad simulation config: {m}"),
            SimError::Extrapolation { factor, covered_to, horizon } => write!(
                f,
                "{factor} curve covers {covered_to}y but horizon is {horizon}y; \
                 set allow_flat_extrapolation to accept flat extrapolation"
            ),
            SimError::OffGridTime { t } => {
                write!(f, "time {t} does not lie on the simulation grid")
            }
            SimError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, steps_per_year: u32) -> Result<Self, SimError> {
        if steps_per_year == 0 {
            return Err(SimError::BadConfig("steps_per_year must be >= 1"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SimError::BadConfig("horizon must be positive"));
        }
        let spy = steps_per_year as f64;
        let n_steps = libm::round(horizon * spy) as usize;
        if n_steps == 0 || math::abs(n_steps as f64 / spy - horizon) > 1e-9 {
            return Err(SimError::BadConfig("horizon must be a whole number of steps"));
        }
        let times = (0..=n_steps).map(|k| k as f64 / spy).collect();
        Ok(TimeGrid { steps_per_year, n_steps, dt: 1.0 / spy, times })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_per_year(&self) -> u32 {
        self.steps_per_year
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Grid index of `t`; errors if `t` is not a grid date.
    pub fn index_of(&self, t: f64) -> Result<usize, SimError> {
        let k = libm::round(t * self.steps_per_year as f64) as usize;
        if k > self.n_steps || math::abs(self.times[k] - t) > 1e-9 {
            return Err(SimError::OffGridTime { t });
        }
        Ok(k)
    }
}

/// Monte Carlo configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub steps_per_year: u32,
    /// Simulation horizon in years; must be a whole number of steps.
    pub horizon: f64,
    pub seed: u64,
    /// Opt-in to flat extrapolation of curves past their last pillar.
    pub allow_flat_extrapolation: bool,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, steps_per_year: u32, horizon: f64, seed: u64) -> Self {
        SimulationConfig { n_paths, steps_per_year, horizon, seed, allow_flat_extrapolation: false }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::BadConfig("n_paths must be >= 1"));
        }
        Ok(())
    }
}

/// One factor after drift fitting. `drift_step[k]` is the deterministic
/// drift increment (θ_k·dt) applied on step `k` under the factor's *own*
/// measure; the quanto shift is kept separate and only enters simulation.
#[derive(Debug, Clone)]
pub struct FittedFactor {
    pub kappa: f64,
    pub sigma: f64,
    /// AR(1) coefficient `1 - κ dt`.
    pub phi: f64,
    /// Initial state, the curve's instantaneous forward at 0.
    pub x0: f64,
    pub drift_step: Vec<f64>,
    /// Per-step quanto drift (0 for the domestic rate and the spread).
    pub quanto_step: f64,
    /// Mean of the accumulated trapezoidal integral at each grid date
    /// (own measure).
    pub i_mean: Vec<f64>,
    /// Variance of the accumulated integral at each grid date.
    pub i_var: Vec<f64>,
    /// Mean state path under the own measure (the σ=0 path).
    pub mean: Vec<f64>,
}

impl FittedFactor {
    /// Curve discount factor the fit reproduces at grid index `k`:
    /// `exp(v/2 - m)` equals the input curve's DF by construction.
    pub fn target_df(&self, k: usize) -> f64 {
        math::exp(0.5 * self.i_var[k] - self.i_mean[k])
    }
}

/// Fits the per-step drift of one factor so the discretized dynamics match
/// `target_log_df[k] = ln D(0,t_k)` at every grid date.
fn fit_factor(
    kappa: f64,
    sigma: f64,
    x0: f64,
    target_log_df: &[f64],
    grid: &TimeGrid,
    quanto_step: f64,
) -> FittedFactor {
    let n = grid.n_steps();
    let dt = grid.dt();
    let phi = 1.0 - kappa * dt;
    let a = 0.5 * dt * (1.0 + phi);
    let b = 0.5 * dt;
    let s2dt = sigma * sigma * dt;

    let mut drift_step = Vec::with_capacity(n);
    let mut i_mean = Vec::with_capacity(n + 1);
    let mut i_var = Vec::with_capacity(n + 1);
    let mut mean = Vec::with_capacity(n + 1);

    let mut mu = x0;
    let mut m = 0.0;
    let mut vcc = 0.0;
    let mut vic = 0.0;
    let mut vii = 0.0;
    i_mean.push(0.0);
    i_var.push(0.0);
    mean.push(mu);

    for k in 0..n {
        // I_{k+1} = I_k + a c_k + b (u_k + ε_k)
        let v_next = vii + a * a * vcc + 2.0 * a * vic + b * b * s2dt;
        let m_next = 0.5 * v_next - target_log_df[k + 1];
        let u = (m_next - m - a * mu) / b;

        mu = phi * mu + u;
        vic = phi * vic + a * phi * vcc + b * s2dt;
        vcc = phi * phi * vcc + s2dt;
        vii = v_next;
        m = m_next;

        drift_step.push(u);
        i_mean.push(m);
        i_var.push(vii);
        mean.push(mu);
    }

    FittedFactor { kappa, sigma, phi, x0, drift_step, quanto_step, i_mean, i_var, mean }
}

/// The market model after drift fitting, ready to simulate.
#[derive(Debug, Clone)]
pub struct FittedModel {
    grid: TimeGrid,
    pub dom: FittedFactor,
    pub foreign: FittedFactor,
    pub spread: FittedFactor,
    pub fx_vol: f64,
    pub ln_fx0: f64,
    chol: [[f64; 4]; 4],
}

impl FittedModel {
    /// Fits all factor drifts to the model's initial term structures on the
    /// configured grid.
    pub fn fit(model: &MarketModel, config: &SimulationConfig) -> Result<Self, SimError> {
        model.validate()?;
        config.validate()?;
        let grid = TimeGrid::new(config.horizon, config.steps_per_year)?;

        let dom_curve = model.collateral_curve(&model.domestic)?;
        let for_curve = model.collateral_curve(&model.foreign)?;
        let y_curve = model.simulated_spread_curve();
        if !config.allow_flat_extrapolation {
            for (label, covered) in [
                ("domestic collateral", dom_curve.covered_to()),
                ("foreign collateral", for_curve.covered_to()),
                ("funding spread", y_curve.covered_to()),
            ] {
                if covered < config.horizon - 1e-9 {
                    return Err(SimError::Extrapolation {
                        factor: label,
                        covered_to: covered,
                        horizon: config.horizon,
                    });
                }
            }
        }

        let dom_targets: Vec<f64> =
            grid.times().iter().map(|&t| -dom_curve.integral(0.0, t)).collect();
        let for_targets: Vec<f64> =
            grid.times().iter().map(|&t| -for_curve.integral(0.0, t)).collect();
        let y_targets: Vec<f64> =
            grid.times().iter().map(|&t| -y_curve.integral(0.0, t)).collect();

        let rho24 = model.correlation.get(Factor::ForeignRate, Factor::LogFx);
        let quanto = -rho24 * model.hw_foreign.sigma * model.fx_vol * grid.dt();

        let dom = fit_factor(
            model.hw_domestic.kappa,
            model.hw_domestic.sigma,
            dom_curve.forward(0.0),
            &dom_targets,
            &grid,
            0.0,
        );
        let foreign = fit_factor(
            model.hw_foreign.kappa,
            model.hw_foreign.sigma,
            for_curve.forward(0.0),
            &for_targets,
            &grid,
            quanto,
        );
        let spread = fit_factor(
            model.hw_spread.kappa,
            model.hw_spread.sigma,
            y_curve.forward(0.0),
            &y_targets,
            &grid,
            0.0,
        );

        Ok(FittedModel {
            grid,
            dom,
            foreign,
            spread,
            fx_vol: model.fx_vol,
            ln_fx0: math::ln(model.spot_fx),
            chol: *model.correlation.cholesky(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Lazily generated paths implementing [`Paths`]; nothing is stored.
    pub fn lazy_paths(&self, n_paths: usize, seed: u64) -> LazyPaths<'_> {
        LazyPaths { fitted: self, n_paths, seed }
    }

    fn fill_path(&self, normals: &mut Normals<ChaCha12Rng>, buf: &mut Vec<Node>) {
        let g = &self.grid;
        let dt = g.dt();
        let sdt = math::sqrt(dt);
        let half_fx_var = 0.5 * self.fx_vol * self.fx_vol * dt;
        let fx_sdt = self.fx_vol * sdt;

        buf.clear();
        let mut node = Node {
            t: 0.0,
            c_dom: self.dom.x0,
            c_for: self.foreign.x0,
            y: self.spread.x0,
            ln_fx: self.ln_fx0,
            i_c_dom: 0.0,
            i_c_for: 0.0,
            i_y: 0.0,
        };
        buf.push(node);

        for k in 0..g.n_steps() {
            let x = [normals.next(), normals.next(), normals.next(), normals.next()];
            let mut z = [0.0f64; 4];
            for (i, zi) in z.iter_mut().enumerate() {
                let mut s = 0.0;
                for (j, xj) in x.iter().enumerate().take(i + 1) {
                    s += self.chol[i][j] * xj;
                }
                *zi = s;
            }

            let c_dom =
                self.dom.phi * node.c_dom + self.dom.drift_step[k] + self.dom.sigma * sdt * z[0];
            let c_for = self.foreign.phi * node.c_for
                + self.foreign.drift_step[k]
                + self.foreign.quanto_step
                + self.foreign.sigma * sdt * z[1];
            let y =
                self.spread.phi * node.y + self.spread.drift_step[k] + self.spread.sigma * sdt * z[2];

            let d_icd = 0.5 * (node.c_dom + c_dom) * dt;
            let d_icf = 0.5 * (node.c_for + c_for) * dt;
            let d_iy = 0.5 * (node.y + y) * dt;
            // same trapezoidal increments as the accumulators, so
            // exp(-i_c_dom - i_y) * fx is an exact martingale pathwise
            let ln_fx = node.ln_fx + d_icd - d_icf + d_iy - half_fx_var + fx_sdt * z[3];

            node = Node {
                t: g.times()[k + 1],
                c_dom,
                c_for,
                y,
                ln_fx,
                i_c_dom: node.i_c_dom + d_icd,
                i_c_for: node.i_c_for + d_icf,
                i_y: node.i_y + d_iy,
            };
            buf.push(node);
        }
    }
}

/// Per-date simulated state and accumulated integrals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Node {
    pub t: f64,
    pub c_dom: f64,
    pub c_for: f64,
    pub y: f64,
    pub ln_fx: f64,
    /// Trapezoidal `∫₀ᵗ c_dom ds` along the path.
    pub i_c_dom: f64,
    pub i_c_for: f64,
    pub i_y: f64,
}

/// Paths per RNG block; the block is the unit of parallelism and of
/// substream indexing.
pub const PATH_BLOCK: usize = 256;

/// Access to simulated paths, either materialized or generated on the fly.
///
/// `visit_block(b, f)` calls `f(path_id, nodes)` for every path of block
/// `b`; blocks may be visited concurrently from different threads (the
/// generator is stateless), and results are independent of the visiting
/// order because each block has its own RNG substream.
pub trait Paths: Sync {
    fn grid(&self) -> &TimeGrid;
    fn n_paths(&self) -> usize;
    fn n_blocks(&self) -> usize {
        self.n_paths().div_ceil(PATH_BLOCK)
    }
    fn block_range(&self, block: usize) -> core::ops::Range<usize> {
        let lo = block * PATH_BLOCK;
        lo..(lo + PATH_BLOCK).min(self.n_paths())
    }
    fn visit_block(&self, block: usize, f: &mut dyn FnMut(usize, &[Node]));
}

/// On-the-fly path generation from a fitted model.
#[derive(Debug, Clone, Copy)]
pub struct LazyPaths<'a> {
    pub fitted: &'a FittedModel,
    pub n_paths: usize,
    pub seed: u64,
}

impl Paths for LazyPaths<'_> {
    fn grid(&self) -> &TimeGrid {
        self.fitted.grid()
    }

    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn visit_block(&self, block: usize, f: &mut dyn FnMut(usize, &[Node])) {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(block as u64);
        let mut normals = Normals::new(rng);
        let mut buf = Vec::with_capacity(self.grid().n_steps() + 1);
        for path_id in self.block_range(block) {
            self.fitted.fill_path(&mut normals, &mut buf);
            f(path_id, &buf);
        }
    }
}

/// Materialized joint trajectories with per-date accumulated integrals.
#[derive(Debug, Clone)]
pub struct PathSet {
    grid: TimeGrid,
    n_paths: usize,
    nodes: Vec<Node>,
}

impl PathSet {
    pub fn path(&self, p: usize) -> &[Node] {
        let w = self.grid.n_steps() + 1;
        &self.nodes[p * w..(p + 1) * w]
    }
}

impl Paths for PathSet {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn visit_block(&self, block: usize, f: &mut dyn FnMut(usize, &[Node])) {
        for p in self.block_range(block) {
            f(p, self.path(p));
        }
    }
}

/// Fits the model and materializes all paths.
///
/// Memory grows as `n_paths × (steps+1) × 64` bytes; for large runs prefer
/// [`FittedModel::lazy_paths`], which generates identical paths on demand.
pub fn simulate(model: &MarketModel, config: &SimulationConfig) -> Result<PathSet, SimError> {
    let fitted = FittedModel::fit(model, config)?;
    let lazy = fitted.lazy_paths(config.n_paths, config.seed);
    let w = fitted.grid().n_steps() + 1;
    let mut nodes = alloc::vec![Node::default(); config.n_paths * w];
    for b in 0..lazy.n_blocks() {
        lazy.visit_block(b, &mut |p, path| {
            nodes[p * w..(p + 1) * w].copy_from_slice(path);
        });
    }
    Ok(PathSet { grid: fitted.grid().clone(), n_paths: config.n_paths, nodes })
}

/// Marsaglia polar Gaussian sampler over an RNG stream.
struct Normals<R: Rng> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> Normals<R> {
    fn new(rng: R) -> Self {
        Normals { rng, spare: None }
    }

    #[inline]
    fn next(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s < 1.0 && s > 0.0 {
                let m = math::sqrt(-2.0 * math::ln(s) / s);
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential-affine coefficients of the discretized dynamics
// ---------------------------------------------------------------------------

/// Conditional zero-coupon coefficients for one maturity index `M`:
/// `E[exp(-∫_{t_k}^{t_M} x ds) | x_k] = exp(a[k] - b[k]·x_k)`,
/// exact for the discretized dynamics (trapezoidal integral, AR(1) state).
#[derive(Debug, Clone)]
pub struct BondCoeffs {
    pub maturity_index: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl BondCoeffs {
    #[inline]
    pub fn value(&self, k: usize, x: f64) -> f64 {
        math::exp(self.a[k] - self.b[k] * x)
    }

    /// Log-price pieces, handy when several factors multiply.
    #[inline]
    pub fn log_value(&self, k: usize, x: f64) -> f64 {
        self.a[k] - self.b[k] * x
    }
}

/// Backward recursion for [`BondCoeffs`]. Valid only for factors without a
/// quanto adjustment (the domestic rate and the spread), whose simulated
/// law coincides with the own-measure law the coefficients describe.
pub fn bond_coefficients(f: &FittedFactor, grid: &TimeGrid, maturity_index: usize) -> BondCoeffs {
    assert_eq!(f.quanto_step, 0.0, "bond coefficients require a quanto-free factor");
    assert!(maturity_index <= grid.n_steps());
    let dt = grid.dt();
    let s2dt = f.sigma * f.sigma * dt;
    let m = maturity_index;
    let mut a = alloc::vec![0.0; m + 1];
    let mut b = alloc::vec![0.0; m + 1];
    for k in (0..m).rev() {
        let lambda = b[k + 1] + 0.5 * dt;
        b[k] = 0.5 * dt + f.phi * lambda;
        a[k] = a[k + 1] - lambda * f.drift_step[k] + 0.5 * lambda * lambda * s2dt;
    }
    BondCoeffs { maturity_index, a, b }
}

/// Discounted-state coefficients for one maturity index `M`:
/// `E[exp(-∫_{t_k}^{t_M} x ds)·x_M | x_k] = (p[k] + q[k]·x_k)·exp(a[k] - b[k]·x_k)`.
///
/// Used for coupon streams paying the simulated spread itself.
#[derive(Debug, Clone)]
pub struct CouponCoeffs {
    pub maturity_index: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl CouponCoeffs {
    /// `E[e^{-∫x}(w·x_M + c) | x_k]` for coupon `w·x + c`.
    #[inline]
    pub fn value(&self, k: usize, x: f64, w: f64, c: f64) -> f64 {
        (w * (self.p[k] + self.q[k] * x) + c) * math::exp(self.a[k] - self.b[k] * x)
    }
}

pub fn coupon_coefficients(
    f: &FittedFactor,
    grid: &TimeGrid,
    maturity_index: usize,
) -> CouponCoeffs {
    assert_eq!(f.quanto_step, 0.0, "coupon coefficients require a quanto-free factor");
    assert!(maturity_index <= grid.n_steps());
    let dt = grid.dt();
    let s2dt = f.sigma * f.sigma * dt;
    let m = maturity_index;
    let mut a = alloc::vec![0.0; m + 1];
    let mut b = alloc::vec![0.0; m + 1];
    let mut p = alloc::vec![0.0; m + 1];
    let mut q = alloc::vec![0.0; m + 1];
    q[m] = 1.0;
    for k in (0..m).rev() {
        let lambda = b[k + 1] + 0.5 * dt;
        b[k] = 0.5 * dt + f.phi * lambda;
        a[k] = a[k + 1] - lambda * f.drift_step[k] + 0.5 * lambda * lambda * s2dt;
        p[k] = p[k + 1] + q[k + 1] * (f.drift_step[k] - lambda * s2dt);
        q[k] = q[k + 1] * f.phi;
    }
    CouponCoeffs { maturity_index, a, b, p, q }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Which factor a single-factor diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimFactor {
    DomesticRate,
    ForeignRate,
    Spread,
}

/// One row of the discount-reproduction check.
#[derive(Debug, Clone, Copy)]
pub struct ReproductionCheck {
    pub t: f64,
    /// Curve discount factor the fit targets.
    pub target: f64,
    /// Variance-reduced Monte Carlo estimate of `E[exp(-∫x)]`.
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo check that the simulated factor reprices its input curve.
///
/// Simulates the factor under its own measure (quanto off) with antithetic
/// pairs and regresses on the first two even moments of the exactly-Gaussian
/// accumulated integral, whose means are known in closed form. This keeps
/// the standard error of the estimate far below the raw Monte Carlo noise
/// of `exp(-∫x)` at long horizons.
pub fn discount_reproduction(
    fitted: &FittedModel,
    which: SimFactor,
    dates: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ReproductionCheck>, SimError> {
    let f = match which {
        SimFactor::DomesticRate => &fitted.dom,
        SimFactor::ForeignRate => &fitted.foreign,
        SimFactor::Spread => &fitted.spread,
    };
    let grid = fitted.grid();
    let mut idx: Vec<usize> = dates.iter().map(|&t| grid.index_of(t)).collect::<Result<_, _>>()?;
    idx.sort_unstable();
    let n_pairs = n_paths.div_ceil(2).max(2);
    let dt = grid.dt();
    let sdt = math::sqrt(dt);
    let n_steps = *idx.last().unwrap();

    // streaming second moments per date, plus batch sums for a batch-means
    // standard error of the control-adjusted estimator (the naive
    // regression-residual variance can cancel to zero at this accuracy)
    const BATCHES: usize = 64;
    #[derive(Clone, Default)]
    struct Acc {
        y: f64,
        c2: f64,
        c4: f64,
        yc2: f64,
        yc4: f64,
        c22: f64,
        c24: f64,
        c44: f64,
        batch_y: Vec<f64>,
        batch_c2: Vec<f64>,
        batch_c4: Vec<f64>,
        batch_n: Vec<usize>,
    }
    let mut acc = alloc::vec![Acc::default(); idx.len()];
    for a in acc.iter_mut() {
        a.batch_y = alloc::vec![0.0; BATCHES];
        a.batch_c2 = alloc::vec![0.0; BATCHES];
        a.batch_c4 = alloc::vec![0.0; BATCHES];
        a.batch_n = alloc::vec![0; BATCHES];
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // stream reserved away from pricing blocks
    let mut normals = Normals::new(rng);
    let mut shocks = alloc::vec![0.0f64; n_steps];
    let mut i_pos = alloc::vec![0.0f64; idx.len()];
    let mut i_neg = alloc::vec![0.0f64; idx.len()];

    for pair in 0..n_pairs {
        for s in shocks.iter_mut() {
            *s = normals.next();
        }
        for (sign, store) in [(1.0, &mut i_pos), (-1.0, &mut i_neg)] {
            let mut x = f.x0;
            let mut i = 0.0;
            let mut next = 0usize;
            for (k, &shock) in shocks.iter().enumerate() {
                while next < idx.len() && idx[next] == k {
                    store[next] = i;
                    next += 1;
                }
                let x2 = f.phi * x + f.drift_step[k] + f.sigma * sdt * sign * shock;
                i += 0.5 * (x + x2) * dt;
                x = x2;
            }
            while next < idx.len() {
                store[next] = i;
                next += 1;
            }
        }
        let batch = pair * BATCHES / n_pairs;
        for (d, a) in acc.iter_mut().enumerate() {
            let (m, v) = (f.i_mean[idx[d]], f.i_var[idx[d]]);
            let stats = |i: f64| {
                let e = i - m;
                (math::exp(-i), e * e - v, e * e * e * e - 3.0 * v * v)
            };
            let (ya, c2a, c4a) = stats(i_pos[d]);
            let (yb, c2b, c4b) = stats(i_neg[d]);
            let y = 0.5 * (ya + yb);
            let c2 = 0.5 * (c2a + c2b);
            let c4 = 0.5 * (c4a + c4b);
            a.y += y;
            a.c2 += c2;
            a.c4 += c4;
            a.yc2 += y * c2;
            a.yc4 += y * c4;
            a.c22 += c2 * c2;
            a.c24 += c2 * c4;
            a.c44 += c4 * c4;
            a.batch_y[batch] += y;
            a.batch_c2[batch] += c2;
            a.batch_c4[batch] += c4;
            a.batch_n[batch] += 1;
        }
    }

    let n = n_pairs as f64;
    let out = idx
        .iter()
        .enumerate()
        .map(|(d, &k)| {
            let a = &acc[d];
            let my = a.y / n;
            let m2 = a.c2 / n;
            let m4 = a.c4 / n;
            let cov_y2 = a.yc2 / n - my * m2;
            let cov_y4 = a.yc4 / n - my * m4;
            let v22 = a.c22 / n - m2 * m2;
            let v24 = a.c24 / n - m2 * m4;
            let v44 = a.c44 / n - m4 * m4;
            let det = v22 * v44 - v24 * v24;
            let (b2, b4) = if det > 1e-30 {
                ((cov_y2 * v44 - cov_y4 * v24) / det, (cov_y4 * v22 - cov_y2 * v24) / det)
            } else {
                (0.0, 0.0)
            };
            // control expectations vanish exactly under the model
            let est = my - b2 * m2 - b4 * m4;
            let mut nb = 0usize;
            let mut ss = 0.0;
            for b in 0..BATCHES {
                if a.batch_n[b] == 0 {
                    continue;
                }
                let cnt = a.batch_n[b] as f64;
                let z = (a.batch_y[b] - b2 * a.batch_c2[b] - b4 * a.batch_c4[b]) / cnt;
                ss += (z - est) * (z - est);
                nb += 1;
            }
            let stderr = if nb > 1 {
                math::sqrt(ss / (nb as f64 * (nb as f64 - 1.0)))
            } else {
                0.0
            };
            ReproductionCheck {
                t: grid.times()[k],
                target: f.target_df(k),
                estimate: est,
                stderr,
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::test_support::flat_model;
    use crate::market::{CorrelationMatrix, HullWhiteParams};
    use approx::assert_relative_eq;

    fn base_config() -> SimulationConfig {
        SimulationConfig::new(64, 52, 5.0, 42)
    }

    #[test]
    fn grid_rejects_fractional_steps() {
        assert!(TimeGrid::new(10.0, 52).is_ok());
        assert!(TimeGrid::new(10.003, 52).is_err());
        assert!(TimeGrid::new(-1.0, 52).is_err());
    }

    #[test]
    fn fit_reproduces_curve_at_every_grid_date() {
        let model = flat_model(0.02, 0.035, -0.003);
        let fitted = FittedModel::fit(&model, &base_config()).unwrap();
        for k in 0..=fitted.grid().n_steps() {
            let t = fitted.grid().times()[k];
            assert_relative_eq!(fitted.dom.target_df(k), math::exp(-0.02 * t), epsilon = 1e-12);
            assert_relative_eq!(fitted.spread.target_df(k), math::exp(0.003 * t), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_vol_collapses_to_deterministic_forwards() {
        let mut model = flat_model(0.02, 0.035, -0.003);
        model.hw_domestic = HullWhiteParams::new(0.015, 0.0).unwrap();
        model.hw_foreign = HullWhiteParams::new(0.015, 0.0).unwrap();
        model.hw_spread = HullWhiteParams::new(0.015, 0.0).unwrap();
        model.fx_vol = 0.0;
        let cfg = SimulationConfig::new(1, 52, 5.0, 7);
        let fitted = FittedModel::fit(&model, &cfg).unwrap();
        // flat curve: the deterministic state equals the forward pointwise
        for k in 0..=fitted.grid().n_steps() {
            assert_relative_eq!(fitted.dom.mean[k], 0.02, epsilon = 1e-12);
            assert_relative_eq!(fitted.spread.mean[k], -0.003, epsilon = 1e-12);
        }
        let paths = simulate(&model, &cfg).unwrap();
        for node in paths.path(0) {
            assert_relative_eq!(node.c_dom, 0.02, epsilon = 1e-12);
            assert_relative_eq!(node.y, -0.003, epsilon = 1e-12);
            // deterministic FX follows the forward drift
            let want = math::ln(90.0) + (0.02 - 0.035 - 0.003) * node.t;
            assert_relative_eq!(node.ln_fx, want, epsilon = 1e-10);
            assert_relative_eq!(node.i_c_dom, 0.02 * node.t, epsilon = 1e-12);
        }
    }

    #[test]
    fn seed_determinism() {
        let model = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(300, 26, 3.0, 123);
        let a = simulate(&model, &cfg).unwrap();
        let b = simulate(&model, &cfg).unwrap();
        for p in 0..cfg.n_paths {
            assert_eq!(a.path(p), b.path(p));
        }
        // lazy generation produces identical paths
        let fitted = FittedModel::fit(&model, &cfg).unwrap();
        let lazy = fitted.lazy_paths(cfg.n_paths, cfg.seed);
        lazy.visit_block(1, &mut |p, nodes| {
            assert_eq!(nodes, a.path(p));
        });
    }

    #[test]
    fn accumulated_integrals_are_grid_consistent() {
        let model = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(8, 52, 2.0, 5);
        let paths = simulate(&model, &cfg).unwrap();
        let dt = paths.grid().dt();
        for p in 0..8 {
            let path = paths.path(p);
            assert_eq!(path[0].i_c_dom, 0.0);
            let mut acc = 0.0;
            for k in 1..path.len() {
                acc += 0.5 * (path[k - 1].y + path[k].y) * dt;
                assert_relative_eq!(path[k].i_y, acc, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn extrapolation_requires_flag() {
        let jpy = crate::curves::Currency::new("JPY").unwrap();
        let mut model = flat_model(0.02, 0.035, -0.003);
        model
            .collateral
            .insert(jpy, crate::curves::TermStructure::new(&[(0.0, 0.02), (3.0, 0.02)]).unwrap());
        let cfg = SimulationConfig::new(4, 52, 5.0, 1);
        match FittedModel::fit(&model, &cfg) {
            Err(SimError::Extrapolation { factor, .. }) => {
                assert_eq!(factor, "domestic collateral")
            }
            other => panic!("expected extrapolation error, got {other:?}"),
        }
        let mut cfg2 = cfg;
        cfg2.allow_flat_extrapolation = true;
        assert!(FittedModel::fit(&model, &cfg2).is_ok());
    }

    #[test]
    fn quanto_drift_sign_flip() {
        // one Euler step: flipping rho_{2,4} flips the sign of the foreign
        // rate's drift adjustment, leaving the own-measure fit untouched
        let mk = |rho24: f64| {
            let mut rho = [[0.0; 4]; 4];
            for (i, row) in rho.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            rho[1][3] = rho24;
            rho[3][1] = rho24;
            let mut model = flat_model(0.02, 0.035, -0.003);
            model.correlation = CorrelationMatrix::new(rho).unwrap();
            FittedModel::fit(&model, &base_config()).unwrap()
        };
        let plus = mk(0.5);
        let minus = mk(-0.5);
        let dt = plus.grid().dt();
        assert_relative_eq!(plus.foreign.quanto_step, -0.5 * 0.01 * 0.12 * dt, epsilon = 1e-18);
        assert_relative_eq!(minus.foreign.quanto_step, -plus.foreign.quanto_step, epsilon = 1e-18);
        assert_eq!(plus.foreign.drift_step, minus.foreign.drift_step);
    }

    #[test]
    fn bond_coefficients_match_curve_at_time_zero() {
        let model = flat_model(0.02, 0.035, -0.003);
        let fitted = FittedModel::fit(&model, &base_config()).unwrap();
        let grid = fitted.grid();
        for m in [13usize, 52, 260] {
            let bc = bond_coefficients(&fitted.dom, grid, m);
            assert_relative_eq!(
                bc.value(0, fitted.dom.x0),
                fitted.dom.target_df(m),
                epsilon = 1e-12
            );
            let yc = bond_coefficients(&fitted.spread, grid, m);
            assert_relative_eq!(
                yc.value(0, fitted.spread.x0),
                fitted.spread.target_df(m),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn coupon_coefficients_match_bond_and_mean() {
        let model = flat_model(0.02, 0.035, -0.003);
        let fitted = FittedModel::fit(&model, &base_config()).unwrap();
        let grid = fitted.grid();
        let m = 104;
        let bc = bond_coefficients(&fitted.spread, grid, m);
        let cc = coupon_coefficients(&fitted.spread, grid, m);
        // w=0 reduces to the bond
        assert_relative_eq!(cc.value(17, -0.002, 0.0, 1.0), bc.value(17, -0.002), epsilon = 1e-14);
        // zero vol: E[e^{-I} x_M | x_k] = bond * mean-path value at M
        let mut model0 = flat_model(0.02, 0.035, -0.003);
        model0.hw_spread = HullWhiteParams::new(0.015, 0.0).unwrap();
        let f0 = FittedModel::fit(&model0, &base_config()).unwrap();
        let cc0 = coupon_coefficients(&f0.spread, grid, m);
        let bc0 = bond_coefficients(&f0.spread, grid, m);
        let k = 26;
        let x = f0.spread.mean[k];
        assert_relative_eq!(
            cc0.value(k, x, 1.0, 0.0),
            bc0.value(k, x) * f0.spread.mean[m],
            epsilon = 1e-12
        );
    }

    #[test]
    fn bond_coefficients_tower_property_mc() {
        // E[e^{-I_k} * exp(a_k - b_k x_k)] must equal D(0, t_M)
        let model = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(4000, 26, 3.0, 99);
        let fitted = FittedModel::fit(&model, &cfg).unwrap();
        let paths = simulate(&model, &cfg).unwrap();
        let m = fitted.grid().index_of(3.0).unwrap();
        let k = fitted.grid().index_of(1.0).unwrap();
        let bc = bond_coefficients(&fitted.dom, fitted.grid(), m);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for p in 0..cfg.n_paths {
            let node = paths.path(p)[k];
            let v = math::exp(-node.i_c_dom) * bc.value(k, node.c_dom);
            sum += v;
            sumsq += v * v;
        }
        let n = cfg.n_paths as f64;
        let mean = sum / n;
        let se = math::sqrt((sumsq / n - mean * mean) / n);
        let target = fitted.dom.target_df(m);
        assert!(math::abs(mean - target) < 3.0 * se, "mean {mean} target {target} se {se}");
    }

    #[test]
    fn discount_reproduction_small_run() {
        let model = flat_model(0.02, 0.035, -0.003);
        let cfg = SimulationConfig::new(20_000, 26, 5.0, 11);
        let fitted = FittedModel::fit(&model, &cfg).unwrap();
        for which in [SimFactor::DomesticRate, SimFactor::Spread] {
            let rows = discount_reproduction(&fitted, which, &[1.0, 5.0], cfg.n_paths, 17).unwrap();
            for r in rows {
                assert!(
                    math::abs(r.estimate - r.target) < 3.0 * r.stderr.max(1e-12),
                    "t={} est={} target={} se={}",
                    r.t,
                    r.estimate,
                    r.target,
                    r.stderr
                );
            }
        }
    }

    #[test]
    fn spread_factor_reprices_spread_curve_mc() {
        // flat y = -30bp over 10y: E[exp(-∫y)] = e^{0.03}
        let model = flat_model(0.02, 0.035, -0.003);
        let mut cfg = SimulationConfig::new(40_000, 26, 10.0, 3);
        cfg.allow_flat_extrapolation = true;
        let fitted = FittedModel::fit(&model, &cfg).unwrap();
        let rows = discount_reproduction(&fitted, SimFactor::Spread, &[10.0], 40_000, 5).unwrap();
        assert_relative_eq!(rows[0].target, math::exp(0.03), epsilon = 1e-12);
        assert_relative_eq!(rows[0].target, 1.0304545, epsilon = 1e-7);
        assert!(math::abs(rows[0].estimate - rows[0].target) < 3.0 * rows[0].stderr);
    }

    #[test]
    fn correlation_realized_by_draws() {
        let mut rho = [[0.0; 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rho[0][1] = 0.4;
        rho[1][0] = 0.4;
        rho[0][3] = -0.2;
        rho[3][0] = -0.2;
        rho[1][3] = 0.3;
        rho[3][1] = 0.3;
        let corr = CorrelationMatrix::new(rho).unwrap();
        let chol = corr.cholesky();
        let mut normals = Normals::new(ChaCha12Rng::seed_from_u64(2024));
        let n = 500_000;
        let mut sums = [[0.0f64; 4]; 4];
        for _ in 0..n {
            let x = [normals.next(), normals.next(), normals.next(), normals.next()];
            let mut z = [0.0f64; 4];
            for i in 0..4 {
                for j in 0..=i {
                    z[i] += chol[i][j] * x[j];
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    sums[i][j] += z[i] * z[j];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let got = sums[i][j] / n as f64;
                assert!(
                    math::abs(got - rho[i][j]) < 0.02,
                    "corr[{i}][{j}] = {got}, want {}",
                    rho[i][j]
                );
            }
        }
    }
}
