//! Synthetic data from the jump-augmented premium process, the misspecified
//! filter run against it, and the CARA market-clearing equilibrium.
//!
//! Every routine takes its seed explicitly. Replication `r` of an
//! experiment seeded with `s` draws from ChaCha8 stream `r` of seed `s`, so
//! replications can be farmed out in any order and still aggregate to the
//! same numbers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::math::{mean, sample_sd, spearman};
use crate::mixture::MixtureLrConfig;
use crate::stable::{kalman_filter, steady_state_gain, KalmanOutput, StableParams, StatePrior};

/// RNG for replication `replication` of an experiment seeded with `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueProcessConfig {
    pub a: f64,
    pub sigma_eta: f64,
    pub sigma_u: f64,
    pub p: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub t: usize,
    pub seed: u64,
    /// State before the first simulated period.
    pub lambda0: f64,
    /// Jumps imposed at the given positions instead of the random draw.
    pub forced_jumps: BTreeMap<usize, f64>,
}

impl Default for TrueProcessConfig {
    fn default() -> Self {
        Self {
            a: 0.9,
            sigma_eta: 0.01,
            sigma_u: 0.04,
            p: 0.02,
            mu_j: 0.0,
            sigma_j: 0.05,
            t: 600,
            seed: 1,
            lambda0: 0.0,
            forced_jumps: BTreeMap::new(),
        }
    }
}

impl TrueProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < 1.0) {
            return Err(invalid("a", "persistence must satisfy |a| < 1"));
        }
        for (name, v) in [
            ("sigma_eta", self.sigma_eta),
            ("sigma_u", self.sigma_u),
            ("sigma_j", self.sigma_j),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "standard deviation must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", "jump probability must lie in [0, 1]"));
        }
        if !self.mu_j.is_finite() || !self.lambda0.is_finite() {
            return Err(invalid("mu_j", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub lambda: Vec<f64>,
    pub f: Vec<f64>,
    /// Observation noise draws, `f[t] - lambda[t]`.
    pub noise: Vec<f64>,
    /// Positions (into `lambda`) at which a nonzero jump entered the state.
    pub jump_times: Vec<usize>,
    pub jump_sizes: BTreeMap<usize, f64>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }
}

/// Simulates `λ_t = A λ_{t-1} + η_t + J_t`, `f_t = λ_t + u_t` for `t = 0..T`.
pub fn simulate_true_process(cfg: &TrueProcessConfig) -> Result<SimPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_true_process_with(cfg, &mut rng)
}

/// As [`simulate_true_process`], drawing from a caller-supplied generator.
pub fn simulate_true_process_with(cfg: &TrueProcessConfig, rng: &mut ChaCha8Rng) -> Result<SimPath> {
    cfg.validate()?;
    if cfg.t == 0 {
        return Err(Error::EmptyPath);
    }
    let mut path = SimPath {
        lambda: Vec::with_capacity(cfg.t),
        f: Vec::with_capacity(cfg.t),
        noise: Vec::with_capacity(cfg.t),
        jump_times: Vec::new(),
        jump_sizes: BTreeMap::new(),
    };
    let mut lambda = cfg.lambda0;
    for t in 0..cfg.t {
        let eta = normal(rng, cfg.sigma_eta);
        let hit = rng.random::<f64>() < cfg.p;
        let size = cfg.mu_j + normal(rng, cfg.sigma_j);
        let u = normal(rng, cfg.sigma_u);
        let jump = match cfg.forced_jumps.get(&t) {
            Some(j) => *j,
            None if hit => size,
            None => 0.0,
        };
        if jump != 0.0 {
            path.jump_times.push(t);
            path.jump_sizes.insert(t, jump);
        }
        lambda = cfg.a * lambda + eta + jump;
        path.lambda.push(lambda);
        path.f.push(lambda + u);
        path.noise.push(u);
    }
    Ok(path)
}

/// The investor's believed stable model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BelievedModel {
    pub a: f64,
    pub sigma_u: f64,
    pub sigma_eta: f64,
}

impl BelievedModel {
    pub fn params(&self) -> Result<StableParams> {
        StableParams::new(self.a, self.sigma_u, self.sigma_eta)
    }

    /// Prior centred at `mean` with the steady-state filtered variance, so
    /// the gain is at its fixed point from the first period.
    pub fn steady_prior(&self, mean: f64) -> Result<StatePrior> {
        let ss = steady_state_gain(self.a, self.sigma_eta, self.sigma_u)?;
        Ok(StatePrior {
            mean,
            variance: ss.filt_var,
        })
    }
}

/// Kalman filter of `path.f` under the believed model.
pub fn run_misspecified_filter(path: &SimPath, believed: &BelievedModel, prior: StatePrior) -> Result<KalmanOutput> {
    if !(believed.sigma_eta >= 0.0) {
        return Err(invalid("believed_sigma_eta", "must be >= 0"));
    }
    kalman_filter(&path.f, &believed.params()?, prior)
}

/// Realized errors `e_{t*+h} = λ̂_{t*+h} - λ_{t*+h}` for `h = 0..=h_max`.
pub fn post_break_error_path(path: &SimPath, filter: &KalmanOutput, t_star: usize, h_max: usize) -> Result<Vec<f64>> {
    if !path.jump_sizes.contains_key(&t_star) {
        return Err(Error::Precondition(alloc::format!("no jump at position {t_star}")));
    }
    let end = t_star + h_max;
    if end >= path.len() || filter.steps.len() != path.len() {
        return Err(Error::Precondition(alloc::format!(
            "window {t_star}..={end} exceeds the path"
        )));
    }
    if path.jump_times.iter().any(|&t| t > t_star && t <= end) {
        return Err(Error::Precondition(alloc::format!(
            "additional jump inside {t_star}..={end}"
        )));
    }
    Ok((t_star..=end)
        .map(|t| filter.steps[t].filt_mean - path.lambda[t])
        .collect())
}

/// `((1-K)A)^{h+1} e_prev - ((1-K)A)^h (1-K) J`.
pub fn prop1_closed_form(a: f64, gain: f64, e_prev: f64, jump: f64, h: usize) -> f64 {
    let phi = (1.0 - gain) * a;
    phi.powi(h as i32 + 1) * e_prev - phi.powi(h as i32) * (1.0 - gain) * jump
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Config {
    pub a: f64,
    /// True state noise.
    pub sigma_eta: f64,
    pub believed_sigma_eta: f64,
    pub sigma_u: f64,
    /// Background jump probability; paths with a second jump are resampled.
    pub p: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub jump: f64,
    pub h_max: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Prop1Config {
    fn process(&self, seed: u64) -> TrueProcessConfig {
        let mut forced_jumps = BTreeMap::new();
        forced_jumps.insert(0, self.jump);
        TrueProcessConfig {
            a: self.a,
            sigma_eta: self.sigma_eta,
            sigma_u: self.sigma_u,
            p: self.p,
            mu_j: self.mu_j,
            sigma_j: self.sigma_j,
            t: self.h_max + 1,
            seed,
            lambda0: 0.0,
            forced_jumps,
        }
    }

    fn believed(&self) -> BelievedModel {
        BelievedModel {
            a: self.a,
            sigma_u: self.sigma_u,
            sigma_eta: self.believed_sigma_eta,
        }
    }
}

/// One conditioned replication: error path after a jump at position 0 with
/// `e_{-1} = 0`, plus the number of rejected draws.
pub fn prop1_replicate(cfg: &Prop1Config, replication: u64) -> Result<(Vec<f64>, usize)> {
    if cfg.jump == 0.0 {
        return Err(invalid("jump", "the conditioning break must be nonzero"));
    }
    let process = cfg.process(cfg.seed);
    let believed = cfg.believed();
    let prior = believed.steady_prior(0.0)?;
    let mut rng = replication_rng(cfg.seed, replication);
    let mut rejected = 0;
    loop {
        let path = simulate_true_process_with(&process, &mut rng)?;
        if path.jump_times.len() > 1 {
            rejected += 1;
            if rejected > 1_000_000 {
                return Err(Error::Degenerate("rejection sampling never accepted a path".into()));
            }
            continue;
        }
        let out = run_misspecified_filter(&path, &believed, prior)?;
        return Ok((post_break_error_path(&path, &out, 0, cfg.h_max)?, rejected));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonCheck {
    pub h: usize,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub closed_form: f64,
    pub z: f64,
}

impl HorizonCheck {
    pub fn within(&self, n_se: f64) -> bool {
        (self.mc_mean - self.closed_form).abs() <= n_se * self.mc_se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    pub gain: f64,
    pub decay: f64,
    pub paths: usize,
    pub rejected: usize,
    pub horizons: Vec<HorizonCheck>,
}

/// Aggregates replications into Monte Carlo means against the closed form.
pub fn prop1_summarize(cfg: &Prop1Config, replications: &[(Vec<f64>, usize)]) -> Result<Prop1Report> {
    if replications.is_empty() {
        return Err(Error::EmptySample);
    }
    let ss = steady_state_gain(cfg.a, cfg.believed_sigma_eta, cfg.sigma_u)?;
    let n = replications.len();
    let mut horizons = Vec::with_capacity(cfg.h_max + 1);
    let mut column = Vec::with_capacity(n);
    for h in 0..=cfg.h_max {
        column.clear();
        column.extend(replications.iter().map(|(e, _)| e[h]));
        let m = mean(&column);
        let se = if n > 1 { sample_sd(&column) / (n as f64).sqrt() } else { f64::NAN };
        let closed = prop1_closed_form(cfg.a, ss.gain, 0.0, cfg.jump, h);
        horizons.push(HorizonCheck {
            h,
            mc_mean: m,
            mc_se: se,
            closed_form: closed,
            z: (m - closed) / se,
        });
    }
    Ok(Prop1Report {
        gain: ss.gain,
        decay: ((1.0 - ss.gain) * cfg.a).abs(),
        paths: n,
        rejected: replications.iter().map(|(_, r)| r).sum(),
        horizons,
    })
}

/// Sequential Monte Carlo over `cfg.paths` replications.
pub fn prop1_monte_carlo(cfg: &Prop1Config) -> Result<Prop1Report> {
    let reps = (0..cfg.paths as u64)
        .map(|r| prop1_replicate(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    prop1_summarize(cfg, &reps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub sigma_eta: Vec<f64>,
    pub gains: Vec<f64>,
    /// `|(1-K)A|` per grid point.
    pub decay: Vec<f64>,
    pub gains_increasing: bool,
    pub decay_decreasing: bool,
}

/// Steady-state gains over a strictly increasing grid of believed state
/// noise levels.
pub fn gain_monotonicity_check(grid: &[f64], a: f64, sigma_u: f64) -> Result<GainReport> {
    if grid.is_empty() {
        return Err(Error::EmptySample);
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("grid", "must be nonnegative and strictly increasing"));
    }
    let mut gains = Vec::with_capacity(grid.len());
    for &s in grid {
        gains.push(steady_state_gain(a, s, sigma_u)?.gain);
    }
    let decay: Vec<f64> = gains.iter().map(|k| ((1.0 - k) * a).abs()).collect();
    Ok(GainReport {
        sigma_eta: grid.to_vec(),
        gains_increasing: gains.windows(2).all(|w| w[1] > w[0]),
        decay_decreasing: decay.windows(2).all(|w| w[1] < w[0]),
        gains,
        decay,
    })
}

/// `-½ ln(2π e s∞)`: per-period entropy rate of the correctly specified
/// stationary model, with `s∞` its steady-state predictive variance.
pub fn gaussian_entropy_rate(a: f64, sigma_eta: f64, sigma_u: f64) -> Result<f64> {
    let ss = steady_state_gain(a, sigma_eta, sigma_u)?;
    let s = ss.pred_var + sigma_u * sigma_u;
    Ok(-0.5 * (crate::math::LN_2PI + s.ln() + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumConfig {
    pub gamma: f64,
    pub sigma_u: f64,
    pub s_bar: f64,
    /// Standard deviation of the transitory supply shock `ν_t`.
    pub nu_sd: f64,
    /// Permanent supply shifts by position.
    pub shifts: BTreeMap<usize, f64>,
    /// Persistence and innovation noise of the latent premium.
    pub a: f64,
    pub sigma_eta: f64,
    pub lambda0: f64,
    pub t: usize,
    pub seed: u64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            sigma_u: 0.2,
            s_bar: 1.0,
            nu_sd: 0.0,
            shifts: BTreeMap::new(),
            a: 0.9,
            sigma_eta: 0.02,
            lambda0: 0.0,
            t: 240,
            seed: 7,
        }
    }
}

impl EquilibriumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "risk aversion must be > 0"));
        }
        if !(self.sigma_u > 0.0) {
            return Err(invalid("sigma_u", "return noise must be > 0"));
        }
        if !(self.nu_sd >= 0.0) || !(self.sigma_eta >= 0.0) {
            return Err(invalid("nu_sd", "standard deviations must be >= 0"));
        }
        if !(self.a.abs() < 1.0) {
            return Err(invalid("a", "persistence must satisfy |a| < 1"));
        }
        if self.t == 0 {
            return Err(Error::EmptyPath);
        }
        Ok(())
    }

    /// `γ σ_u²`.
    pub fn price_of_risk(&self) -> f64 {
        self.gamma * self.sigma_u * self.sigma_u
    }
}

/// How the investor forms beliefs about the latent premium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beliefs {
    /// The investor observes `λ_t`; the wedge is identically zero.
    Perfect,
    /// Stable-model filtering with the given believed state noise, started
    /// at the steady-state variance.
    Filter { believed_sigma_eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPath {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    pub m_s: Vec<f64>,
    pub m_t: Vec<f64>,
    pub wedge: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    /// Noisy premium signal the investor filters.
    pub signal: Vec<f64>,
    /// Stable-model predictive mean and variance of each signal (empty
    /// under perfect beliefs).
    pub stable_predictive: Vec<(f64, f64)>,
    /// Realized `f_{t+1}`, stored at position `t`.
    pub realized: Vec<f64>,
    pub price_of_risk: f64,
}

impl EquilibriumPath {
    /// Largest deviation from the market-clearing premium, the
    /// expected-return decomposition and the demand identity.
    pub fn max_identity_errors(&self) -> (f64, f64, f64) {
        let mut e = (0.0f64, 0.0f64, 0.0f64);
        for t in 0..self.supply.len() {
            let clearing = self.price_of_risk * self.supply[t];
            e.0 = e.0.max((self.m_s[t] - clearing).abs());
            e.1 = e.1.max((self.m_t[t] - (clearing + self.wedge[t])).abs());
            e.2 = e.2.max((self.demand[t] - self.supply[t]).abs());
        }
        e
    }
}

/// Market-clearing equilibrium. Supply `S_t = S̄ + ν_t + Σ shifts` fixes the
/// subjective premium `m^S_t = γσ_u²S_t`; each permanent supply shift moves
/// the latent premium by `γσ_u² ΔS`, which the investor learns only through
/// the filter. The wedge is `w_t = A(λ_t - λ̂_t)` and `m^T_t = m^S_t + w_t`.
pub fn simulate_equilibrium(cfg: &EquilibriumConfig, beliefs: Beliefs) -> Result<EquilibriumPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_equilibrium_with(cfg, beliefs, &mut rng)
}

/// As [`simulate_equilibrium`], drawing from a caller-supplied generator.
pub fn simulate_equilibrium_with(
    cfg: &EquilibriumConfig,
    beliefs: Beliefs,
    rng: &mut ChaCha8Rng,
) -> Result<EquilibriumPath> {
    cfg.validate()?;
    let k = cfg.price_of_risk();
    let mut forced = BTreeMap::new();
    for (&t, &ds) in &cfg.shifts {
        forced.insert(t, k * ds);
    }
    let process = TrueProcessConfig {
        a: cfg.a,
        sigma_eta: cfg.sigma_eta,
        sigma_u: cfg.sigma_u,
        p: 0.0,
        mu_j: 0.0,
        sigma_j: 0.0,
        t: cfg.t,
        seed: cfg.seed,
        lambda0: cfg.lambda0,
        forced_jumps: forced,
    };
    let path = simulate_true_process_with(&process, rng)?;
    let mut stable_predictive = Vec::new();
    let lambda_hat = match beliefs {
        Beliefs::Perfect => path.lambda.clone(),
        Beliefs::Filter { believed_sigma_eta } => {
            let believed = BelievedModel {
                a: cfg.a,
                sigma_u: cfg.sigma_u,
                sigma_eta: believed_sigma_eta,
            };
            let prior = believed.steady_prior(cfg.lambda0)?;
            let out = run_misspecified_filter(&path, &believed, prior)?;
            stable_predictive = out.steps.iter().map(|s| (s.pred_mean, s.pred_obs_var)).collect();
            out.steps.iter().map(|s| s.filt_mean).collect()
        }
    };
    let mut out = EquilibriumPath {
        supply: Vec::with_capacity(cfg.t),
        demand: Vec::with_capacity(cfg.t),
        m_s: Vec::with_capacity(cfg.t),
        m_t: Vec::with_capacity(cfg.t),
        wedge: Vec::with_capacity(cfg.t),
        lambda: path.lambda.clone(),
        lambda_hat: lambda_hat.clone(),
        signal: path.f.clone(),
        stable_predictive,
        realized: Vec::with_capacity(cfg.t),
        price_of_risk: k,
    };
    let mut level = cfg.s_bar;
    for t in 0..cfg.t {
        if let Some(ds) = cfg.shifts.get(&t) {
            level += ds;
        }
        let s = level + normal(rng, cfg.nu_sd);
        let m_s = k * s;
        let w = cfg.a * (path.lambda[t] - lambda_hat[t]);
        let m_t = m_s + w;
        out.supply.push(s);
        out.demand.push(m_s / k);
        out.m_s.push(m_s);
        out.wedge.push(w);
        out.m_t.push(m_t);
        out.realized.push(m_t + normal(rng, cfg.sigma_u));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corollary1Config {
    pub a: f64,
    pub sigma_eta: f64,
    pub believed_sigma_eta: f64,
    pub sigma_u: f64,
    pub gamma: f64,
    pub s_bar: f64,
    /// Jump sizes in units of `sigma_u`.
    pub sizes: Vec<f64>,
    pub h: usize,
    pub replications: usize,
    pub burn_in: usize,
    /// Break-aware benchmark used to score the onset observation.
    pub benchmark_p: f64,
    pub benchmark_sigma_j: f64,
    pub seed: u64,
}

impl Default for Corollary1Config {
    fn default() -> Self {
        Self {
            a: 0.9,
            sigma_eta: 0.02,
            believed_sigma_eta: 0.02,
            sigma_u: 0.2,
            gamma: 2.0,
            s_bar: 1.0,
            sizes: alloc::vec![0.5, 1.0, 2.0],
            h: 12,
            replications: 10_000,
            burn_in: 60,
            benchmark_p: 0.05,
            benchmark_sigma_j: 0.4,
            seed: 11,
        }
    }
}

/// Onset mislearning and the realized `h`-period cumulative return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary1Draw {
    pub size: f64,
    pub delta: f64,
    pub cumret: f64,
}

/// One replication: a latent jump of `size · σ_u` (a permanent supply
/// shift) at the end of the burn-in, scored by the break-aware benchmark.
pub fn corollary1_replicate(cfg: &Corollary1Config, size_index: usize, replication: u64) -> Result<Corollary1Draw> {
    let size = *cfg
        .sizes
        .get(size_index)
        .ok_or_else(|| invalid("size_index", "out of range"))?;
    if cfg.h == 0 {
        return Err(invalid("h", "horizon must be >= 1"));
    }
    let onset = cfg.burn_in;
    let k = cfg.gamma * cfg.sigma_u * cfg.sigma_u;
    let mut shifts = BTreeMap::new();
    if size != 0.0 {
        shifts.insert(onset, size * cfg.sigma_u / k);
    }
    let eq = EquilibriumConfig {
        gamma: cfg.gamma,
        sigma_u: cfg.sigma_u,
        s_bar: cfg.s_bar,
        nu_sd: 0.0,
        shifts,
        a: cfg.a,
        sigma_eta: cfg.sigma_eta,
        lambda0: 0.0,
        t: onset + cfg.h,
        seed: cfg.seed,
    };
    let mut rng = replication_rng(cfg.seed, ((size_index as u64) << 40) | replication);
    let path = simulate_equilibrium_with(
        &eq,
        Beliefs::Filter {
            believed_sigma_eta: cfg.believed_sigma_eta,
        },
        &mut rng,
    )?;
    let (m, s2) = path.stable_predictive[onset];
    let lr = MixtureLrConfig {
        m,
        s_s2: s2,
        sigma_j2: cfg.benchmark_sigma_j * cfg.benchmark_sigma_j,
        mu_j: 0.0,
        p: cfg.benchmark_p,
    };
    lr.validate()?;
    let delta = lr.delta_from_g(lr.g(path.signal[onset]));
    let cumret = path.realized[onset..onset + cfg.h].iter().sum();
    Ok(Corollary1Draw { size, delta, cumret })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corollary1Report {
    pub n: usize,
    pub rank_correlation: f64,
    /// Fisher-z statistic of the rank correlation.
    pub z: f64,
    /// `(size, mean cumulative return, mean Sharpe)` per jump size; the
    /// Sharpe column is descriptive only.
    pub by_size: Vec<(f64, f64, f64)>,
    pub mean_increasing: bool,
    pub insufficient_sample: bool,
}

/// Minimum number of draws for the rank-correlation verdict.
pub const COROLLARY1_MIN_DRAWS: usize = 10;

/// Rank correlation between onset mislearning and the subsequent cumulative
/// return, and the mean cumulative return per jump size.
pub fn corollary1_check(draws: &[Corollary1Draw], h: usize) -> Corollary1Report {
    let n = draws.len();
    let deltas: Vec<f64> = draws.iter().map(|d| d.delta).collect();
    let cum: Vec<f64> = draws.iter().map(|d| d.cumret).collect();
    let insufficient = n < COROLLARY1_MIN_DRAWS;
    let rho = if n >= 2 { spearman(&deltas, &cum) } else { f64::NAN };
    let rho = if rho.is_nan() { 0.0 } else { rho };
    let z = if n > 3 {
        rho.clamp(-0.999_999, 0.999_999).atanh() * ((n - 3) as f64).sqrt()
    } else {
        f64::NAN
    };
    let mut sizes: Vec<f64> = draws.iter().map(|d| d.size).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    let by_size: Vec<(f64, f64, f64)> = sizes
        .iter()
        .map(|&s| {
            let c: Vec<f64> = draws.iter().filter(|d| d.size == s).map(|d| d.cumret).collect();
            let m = mean(&c);
            let sd = sample_sd(&c);
            let per_period = m / h.max(1) as f64;
            (s, m, if sd > 0.0 { per_period / (sd / (h.max(1) as f64).sqrt()) } else { f64::NAN })
        })
        .collect();
    Corollary1Report {
        n,
        rank_correlation: rho,
        z,
        mean_increasing: by_size.windows(2).all(|w| w[1].1 > w[0].1),
        by_size,
        insufficient_sample: insufficient,
    }
}

/// Runs every (size, replication) pair sequentially.
pub fn corollary1_monte_carlo(cfg: &Corollary1Config) -> Result<Corollary1Report> {
    let mut draws = Vec::with_capacity(cfg.sizes.len() * cfg.replications);
    for i in 0..cfg.sizes.len() {
        for r in 0..cfg.replications as u64 {
            draws.push(corollary1_replicate(cfg, i, r)?);
        }
    }
    Ok(corollary1_check(&draws, cfg.h))
}

/// Average one-step log predictive density of `path.f` under `believed`,
/// discarding the first `burn_in` periods, with its standard error.
pub fn average_log_score(path: &SimPath, believed: &BelievedModel, burn_in: usize) -> Result<(f64, f64)> {
    let prior = believed.steady_prior(0.0)?;
    let out = run_misspecified_filter(path, believed, prior)?;
    let ld: Vec<f64> = out.steps.iter().skip(burn_in).map(|s| s.log_density).collect();
    if ld.len() < 2 {
        return Err(Error::InsufficientData {
            needed: burn_in + 2,
            got: path.len(),
        });
    }
    Ok((mean(&ld), sample_sd(&ld) / (ld.len() as f64).sqrt()))
}

/// Lag-1 autocorrelation of standardized innovations.
pub fn innovation_autocorrelation(path: &SimPath, filter: &KalmanOutput) -> f64 {
    let z: Vec<f64> = path
        .f
        .iter()
        .zip(&filter.steps)
        .map(|(f, s)| (f - s.pred_mean) / s.pred_obs_var.sqrt())
        .collect();
    if z.len() < 3 {
        return f64::NAN;
    }
    crate::math::pearson(&z[..z.len() - 1], &z[1..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrueProcessConfig {
        TrueProcessConfig {
            a: 0.0,
            sigma_eta: 0.0,
            sigma_u: 1.0,
            p: 0.0,
            mu_j: 0.0,
            sigma_j: 0.0,
            t: 50,
            seed: 3,
            lambda0: 0.0,
            forced_jumps: BTreeMap::new(),
        }
    }

    #[test]
    fn degenerate_process_is_pure_noise() {
        let p = simulate_true_process(&cfg()).unwrap();
        assert!(p.lambda.iter().all(|l| *l == 0.0));
        assert!(p.f.iter().zip(&p.noise).all(|(f, u)| f == u));
        assert!(p.jump_times.is_empty());
    }

    #[test]
    fn certain_jumps_add_exactly() {
        let c = TrueProcessConfig {
            a: 0.5,
            p: 1.0,
            mu_j: 10.0,
            ..cfg()
        };
        let p = simulate_true_process(&c).unwrap();
        assert_eq!(p.jump_times.len(), 50);
        let mut prev = 0.0;
        for l in &p.lambda {
            assert_eq!(*l, 0.5 * prev + 10.0);
            prev = *l;
        }
    }

    #[test]
    fn empty_path_is_rejected() {
        assert_eq!(simulate_true_process(&TrueProcessConfig { t: 0, ..cfg() }), Err(Error::EmptyPath));
        assert!(simulate_true_process(&TrueProcessConfig { a: 1.0, ..cfg() }).is_err());
    }

    #[test]
    fn jump_frequency_matches_binomial() {
        let c = TrueProcessConfig {
            p: 0.05,
            sigma_j: 1.0,
            t: 10_000,
            ..cfg()
        };
        let p = simulate_true_process(&c).unwrap();
        let freq = p.jump_times.len() as f64 / 10_000.0;
        let se = (0.05f64 * 0.95 / 10_000.0).sqrt();
        assert!((freq - 0.05).abs() < 3.0 * se, "{freq}");
    }

    #[test]
    fn seeded_runs_repeat_bit_for_bit() {
        let c = TrueProcessConfig::default();
        assert_eq!(simulate_true_process(&c).unwrap(), simulate_true_process(&c).unwrap());
    }

    #[test]
    fn closed_form_special_cases() {
        assert_eq!(prop1_closed_form(0.0, 0.3, 0.0, 1.0, 1), 0.0);
        assert!((prop1_closed_form(0.9, 0.2, 0.0, 1.0, 0) + 0.8).abs() < 1e-15);
        assert!((prop1_closed_form(0.9, 0.2, 0.0, 1.0, 5) + 0.72f64.powi(5) * 0.8).abs() < 1e-15);
        assert!((prop1_closed_form(0.9, 0.2, 1.0, 0.0, 2) - 0.72f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn error_path_requires_a_jump() {
        let p = simulate_true_process(&cfg()).unwrap();
        let b = BelievedModel {
            a: 0.0,
            sigma_u: 1.0,
            sigma_eta: 0.5,
        };
        let out = run_misspecified_filter(&p, &b, b.steady_prior(0.0).unwrap()).unwrap();
        assert!(matches!(post_break_error_path(&p, &out, 3, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn gain_grid_is_monotone() {
        let r = gain_monotonicity_check(&[0.001, 0.01, 0.1], 0.5, 1.0).unwrap();
        assert!(r.gains_increasing && r.decay_decreasing);
        let zero = gain_monotonicity_check(&[0.0, 0.1], 0.5, 1.0).unwrap();
        assert_eq!(zero.gains[0], 0.0);
        assert!(gain_monotonicity_check(&[0.1, 0.1], 0.5, 1.0).is_err());
    }

    #[test]
    fn noiseless_observation_gives_unit_gain() {
        let r = gain_monotonicity_check(&[0.01, 1.0], 0.5, 0.0).unwrap();
        assert!(r.gains.iter().all(|k| (*k - 1.0).abs() < 1e-12));
    }

    #[test]
    fn equilibrium_identities_and_zero_wedge() {
        let c = EquilibriumConfig {
            nu_sd: 0.3,
            ..EquilibriumConfig::default()
        };
        let path = simulate_equilibrium(&c, Beliefs::Perfect).unwrap();
        assert!(path.wedge.iter().all(|w| *w == 0.0));
        let (a, b, d) = path.max_identity_errors();
        assert!(a <= 1e-12 && b <= 1e-12 && d <= 1e-12);
        for t in 0..c.t {
            assert_eq!(path.m_t[t], path.price_of_risk * path.supply[t]);
        }
    }

    #[test]
    fn supply_shift_moves_subjective_premium() {
        let mut shifts = BTreeMap::new();
        shifts.insert(100, 1.0);
        let c = EquilibriumConfig {
            gamma: 2.0,
            sigma_u: 0.2,
            sigma_eta: 0.0,
            shifts,
            ..EquilibriumConfig::default()
        };
        let path = simulate_equilibrium(&c, Beliefs::Filter { believed_sigma_eta: 0.02 }).unwrap();
        assert!((path.m_s[100] - path.m_s[99] - 0.08).abs() < 1e-12);
        assert!(path.wedge[100] > path.wedge[99]);
        assert!(gamma_rejected());
    }

    fn gamma_rejected() -> bool {
        let c = EquilibriumConfig {
            gamma: 0.0,
            ..EquilibriumConfig::default()
        };
        simulate_equilibrium(&c, Beliefs::Perfect).is_err()
    }

    #[test]
    fn single_replication_is_flagged() {
        let d = [Corollary1Draw {
            size: 1.0,
            delta: 0.3,
            cumret: 0.1,
        }];
        assert!(corollary1_check(&d, 12).insufficient_sample);
    }
}
