//! Transmit Wiener-filter precoders for the three topologies.
//!
//! The FD precoder is closed form. The hybrid precoder optimizes the phase
//! matrix Θ by gradient descent on the reduced objective (the digital part
//! is closed form for every Q). The DMA precoder optimizes the element
//! susceptances Y_s^im the same way. All solvers tighten the supplied-power
//! constraint exactly: (Y_g/2)·tr(BᴴB) = P_g^max at the optimum.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, lu_with_rcond, real_trace_product, solve_right_symmetric, CMat};
use crate::topology::{self, PhaseNetwork};

/// Gradient-descent knobs shared by the hybrid and DMA solvers.
#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    /// Hard iteration cap (accepted steps).
    pub max_iterations: usize,
    /// Stop when the gradient infinity-norm falls below this.
    pub gradient_tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    /// Number of random restarts; the best run is kept.
    pub restarts: usize,
    /// Seed for the analog-state initialization.
    pub seed: u64,
    /// Optional early stop: relative objective decrease per accepted step
    /// below this counts as converged. Zero disables it.
    pub stagnation_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-7,
            sufficient_decrease: 1e-4,
            shrink: 0.5,
            restarts: 1,
            seed: 0,
            stagnation_tolerance: 0.0,
        }
    }
}

/// Analog state attached to a precoder solution.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalogState {
    /// Fully digital: no analog stage.
    None,
    /// Hybrid: one phase per antenna.
    Phases(Vec<f64>),
    /// DMA: one susceptance per element.
    Loads(Vec<f64>),
}

/// A solved precoder for one channel draw.
#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    /// Digital precoder B: N × M (FD) or N_t × M (hybrid, DMA).
    pub precoder: CMat,
    /// Receive scaling weight β > 0.
    pub beta: f64,
    /// Topology-specific analog state.
    pub analog: AnalogState,
    /// Achieved MSE of the Wiener objective.
    pub mse: f64,
    /// Accepted gradient steps (0 for the closed-form FD solution).
    pub iterations: usize,
    /// Whether the analog optimization met its stopping tolerance.
    pub converged: bool,
}

impl PrecoderSolution {
    /// Supplied power of this solution, accounting for the phase network in
    /// the hybrid case.
    pub fn supplied_power(&self, y_g: f64) -> f64 {
        match &self.analog {
            AnalogState::Phases(angles) => {
                let expansion = angles.len() / self.precoder.nrows();
                topology::supplied_power_hybrid(&self.precoder, y_g, expansion)
            }
            _ => topology::supplied_power(&self.precoder, y_g),
        }
    }
}

/// Regularized Gram matrix A = HᴴH + (Mσ_n²/(2P_g^max))·Y_g·I.
///
/// The regularizer keeps A Hermitian positive definite for any channel.
pub fn regularized_gram(h: &CMat, noise_variance: f64, p_max: f64, y_g: f64) -> CMat {
    let n = h.ncols();
    let delta = regularizer(h.nrows(), noise_variance, p_max, y_g);
    let mut a = h.adjoint() * h;
    for k in 0..n {
        a[(k, k)] += Complex64::new(delta, 0.0);
    }
    a
}

fn regularizer(m: usize, noise_variance: f64, p_max: f64, y_g: f64) -> f64 {
    m as f64 * noise_variance * y_g / (2.0 * p_max)
}

/// Shared closed form B = β·A⁻¹·Hᴴ with β tightening the power budget.
/// Returns (B, β, mse).
fn wiener_closed_form(h: &CMat, noise_variance: f64, p_max: f64, y_g: f64) -> Result<(CMat, f64, f64)> {
    if fro_norm(h) == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let m = h.nrows();
    let a = regularized_gram(h, noise_variance, p_max, y_g);
    let chol = nalgebra::Cholesky::new(a)
        .expect("regularized Gram matrix must be positive definite");
    let x = chol.solve(&h.adjoint());
    let denom = x.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let beta = (2.0 * p_max / (y_g * denom)).sqrt();
    let mse = m as f64 - real_trace_product(h, &x);
    Ok((x * Complex64::new(beta, 0.0), beta, mse))
}

/// Closed-form transmit Wiener filter for the fully-digital array.
pub fn wf_fd(h_a: &CMat, noise_variance: f64, p_max: f64, y_g: f64) -> Result<PrecoderSolution> {
    let (b, beta, mse) = wiener_closed_form(h_a, noise_variance, p_max, y_g)?;
    Ok(PrecoderSolution {
        precoder: b,
        beta,
        analog: AnalogState::None,
        mse,
        iterations: 0,
        converged: true,
    })
}

/// The Wiener objective E‖x − β⁻¹(HBx + n)‖² in closed form:
/// ‖I − β⁻¹HB‖_F² + M·σ_n²/β².
pub fn mse_direct(h: &CMat, b: &CMat, beta: f64, noise_variance: f64) -> f64 {
    let m = h.nrows();
    let mut e = h * b * Complex64::new(-1.0 / beta, 0.0);
    for k in 0..m {
        e[(k, k)] += Complex64::new(1.0, 0.0);
    }
    e.iter().map(|v| v.norm_sqr()).sum::<f64>() + m as f64 * noise_variance / (beta * beta)
}

/// Pieces reused between the hybrid MSE, gradient, and solution assembly.
struct HybridEval {
    /// Cholesky of W = JᴴJ + δ·(N/N_t)·I, J = H·Q.
    w: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    /// X̃ = W⁻¹Jᴴ (N_t × M).
    x: CMat,
    mse: f64,
}

fn hybrid_eval(h: &CMat, feeds: &[usize], n_t: usize, angles: &[f64], delta: f64) -> HybridEval {
    let m = h.nrows();
    let n = h.ncols();
    let phases: Vec<Complex64> = angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    // J = H·Q via the one-nonzero-per-row structure of Q.
    let mut j = CMat::zeros(m, n_t);
    for nn in 0..n {
        let t = feeds[nn];
        let p = phases[nn];
        for mm in 0..m {
            j[(mm, t)] += h[(mm, nn)] * p;
        }
    }
    let expansion = (n / n_t) as f64;
    let mut w = j.adjoint() * &j;
    for k in 0..n_t {
        w[(k, k)] += Complex64::new(delta * expansion, 0.0);
    }
    let w = nalgebra::Cholesky::new(w)
        .expect("QᴴAQ must be positive definite for a full-column-rank Q");
    let x = w.solve(&j.adjoint());
    let mse = m as f64 - real_trace_product(&j, &x);
    HybridEval { w, x, mse }
}

/// MSE of the hybrid topology for a fixed phase network (the digital stage
/// is already optimal): tr{I_M − H·Q·(QᴴAQ)⁻¹·Qᴴ·Hᴴ}.
pub fn mse_hybrid(
    h_a: &CMat,
    network: &PhaseNetwork,
    noise_variance: f64,
    p_max: f64,
    y_g: f64,
) -> f64 {
    let delta = regularizer(h_a.nrows(), noise_variance, p_max, y_g);
    hybrid_eval(h_a, network.feeds(), network.n_transmitters(), network.angles(), delta).mse
}

/// ∂MSE_h/∂θ_n for every antenna, at the network's current angles.
///
/// Evaluates 2·Im{(C_h·HᴴH·[I − Q·C_h·A])ᵀ ∘ Q} without forming any N × N
/// product, using C_h·HᴴH = (W⁻¹Jᴴ)·H and C_h·A = C_h·HᴴH + δ·C_h.
fn hybrid_gradient(
    h: &CMat,
    feeds: &[usize],
    n_t: usize,
    angles: &[f64],
    delta: f64,
    eval: &HybridEval,
) -> Vec<f64> {
    let n = h.ncols();
    // C = W⁻¹Qᴴ.
    let mut qh = CMat::zeros(n_t, n);
    for nn in 0..n {
        qh[(feeds[nn], nn)] = Complex64::from_polar(1.0, -angles[nn]);
    }
    let c = eval.w.solve(&qh);
    let cf = &eval.x * h;
    let ca = &cf + &c * Complex64::new(delta, 0.0);
    // M1 = C·F − (C·F·Q)·(C·A).
    let mut cfq = CMat::zeros(n_t, n_t);
    for nn in 0..n {
        let t = feeds[nn];
        let p = Complex64::from_polar(1.0, angles[nn]);
        for r in 0..n_t {
            cfq[(r, t)] += cf[(r, nn)] * p;
        }
    }
    let m1 = &cf - cfq * ca;
    (0..n)
        .map(|nn| {
            let t = feeds[nn];
            2.0 * (m1[(t, nn)] * Complex64::from_polar(1.0, angles[nn])).im
        })
        .collect()
}

/// ∂MSE_h/∂θ for a phase network, one entry per antenna (the active entries
/// of the N × N_t gradient matrix).
pub fn hybrid_phase_gradient(
    h_a: &CMat,
    network: &PhaseNetwork,
    noise_variance: f64,
    p_max: f64,
    y_g: f64,
) -> Vec<f64> {
    let delta = regularizer(h_a.nrows(), noise_variance, p_max, y_g);
    let feeds = network.feeds();
    let n_t = network.n_transmitters();
    let angles = network.angles();
    let eval = hybrid_eval(h_a, feeds, n_t, angles, delta);
    hybrid_gradient(h_a, feeds, n_t, angles, delta, &eval)
}

/// Closed-form digital stage for a fixed phase network (Eq. (15)-style):
/// B_h = β·(QᴴAQ)⁻¹·Qᴴ·Hᴴ with β tightening the power budget.
pub fn hybrid_solution_for_network(
    h_a: &CMat,
    network: &PhaseNetwork,
    noise_variance: f64,
    p_max: f64,
    y_g: f64,
) -> Result<PrecoderSolution> {
    hybrid_solution_inner(h_a, network, noise_variance, p_max, y_g, 0, true)
}

fn hybrid_solution_inner(
    h_a: &CMat,
    network: &PhaseNetwork,
    noise_variance: f64,
    p_max: f64,
    y_g: f64,
    iterations: usize,
    converged: bool,
) -> Result<PrecoderSolution> {
    if fro_norm(h_a) == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let delta = regularizer(h_a.nrows(), noise_variance, p_max, y_g);
    let eval = hybrid_eval(
        h_a,
        network.feeds(),
        network.n_transmitters(),
        network.angles(),
        delta,
    );
    let denom = eval.x.iter().map(|v| v.norm_sqr()).sum::<f64>() * network.expansion() as f64;
    let beta = (2.0 * p_max / (y_g * denom)).sqrt();
    Ok(PrecoderSolution {
        precoder: &eval.x * Complex64::new(beta, 0.0),
        beta,
        analog: AnalogState::Phases(network.angles().to_vec()),
        mse: eval.mse,
        iterations,
        converged,
    })
}

/// Transmit Wiener filter for the partially-connected hybrid array:
/// gradient descent on the phases, closed-form digital stage at the end.
pub fn wf_hybrid(
    h_a: &CMat,
    network: &PhaseNetwork,
    noise_variance: f64,
    p_max: f64,
    y_g: f64,
    settings: &OptimizerSettings,
) -> Result<PrecoderSolution> {
    if fro_norm(h_a) == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let n = network.n_antennas();
    let n_t = network.n_transmitters();
    let feeds = network.feeds().to_vec();
    let delta = regularizer(h_a.nrows(), noise_variance, p_max, y_g);

    let mut best: Option<DescentOutcome> = None;
    for restart in 0..settings.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(
            settings.seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let theta0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        let outcome = minimize(
            theta0,
            |th| Ok(hybrid_eval(h_a, &feeds, n_t, th, delta).mse),
            |th| {
                let eval = hybrid_eval(h_a, &feeds, n_t, th, delta);
                Ok(hybrid_gradient(h_a, &feeds, n_t, th, delta, &eval))
            },
            settings,
        )?;
        if best.as_ref().map_or(true, |b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart");
    let tuned = network.clone().with_angles(best.x)?;
    hybrid_solution_inner(
        h_a,
        &tuned,
        noise_variance,
        p_max,
        y_g,
        best.iterations,
        best.converged,
    )
}

/// DMA MSE for a fixed effective channel: tr{G⁻¹} with
/// G = I_M + (2P_g^max/(Mσ_n²Y_g))·H_d·H_dᴴ.
pub fn mse_dma(h_d: &CMat, noise_variance: f64, p_max: f64, y_g: f64) -> f64 {
    let m = h_d.nrows();
    let g = dma_gram(h_d, noise_variance, p_max, y_g);
    let chol = nalgebra::Cholesky::new(g).expect("G = I + cHHᴴ must be positive definite");
    let ginv = chol.solve(&CMat::identity(m, m));
    ginv.trace().re
}

fn dma_gram(h_d: &CMat, noise_variance: f64, p_max: f64, y_g: f64) -> CMat {
    let m = h_d.nrows();
    let c = 2.0 * p_max / (m as f64 * noise_variance * y_g);
    let mut g = h_d * h_d.adjoint() * Complex64::new(c, 0.0);
    for k in 0..m {
        g[(k, k)] += Complex64::new(1.0, 0.0);
    }
    g
}

/// One DMA precoding instance: fixed circuit blocks, one channel draw, and
/// the knobs of the Wiener problem. The element susceptances are the free
/// variables.
pub struct DmaProblem<'a> {
    /// Element coupling Y_ss (N × N).
    pub y_ss: &'a CMat,
    /// Feed coupling Y_st (N × N_t).
    pub y_st: &'a CMat,
    /// Transmitter block Y_tt (N_t × N_t).
    pub y_tt: &'a CMat,
    /// Element loss term of Y_s.
    pub r_s: f64,
    /// Generator admittance.
    pub y_g: f64,
    /// Receive scaling α̃_r.
    pub receive_scaling: f64,
    /// Wireless channel draw Y_rs (M × N).
    pub y_rs: &'a CMat,
    pub noise_variance: f64,
    pub p_max: f64,
}

/// Factor cache for one susceptance state.
struct DmaEval {
    /// Z⁻¹·Y_st with Z = Y_s + Y_ss.
    t1: CMat,
    z_lu: crate::linalg::CLu,
    v_lu: crate::linalg::CLu,
    /// Effective channel H_d (M × N_t).
    h: CMat,
    mse: f64,
}

impl<'a> DmaProblem<'a> {
    fn n(&self) -> usize {
        self.y_ss.nrows()
    }

    fn assemble(&self, y_im: &[f64]) -> Result<DmaEval> {
        let n = self.n();
        debug_assert_eq!(y_im.len(), n);
        let mut z = self.y_ss.clone();
        for (k, &y) in y_im.iter().enumerate() {
            z[(k, k)] += Complex64::new(self.r_s, y);
        }
        let (z_lu, _) = lu_with_rcond(z, "Y_s + Y_ss")?;
        let t1 = z_lu.solve(self.y_st).ok_or(Error::SingularMatrix {
            context: "Y_s + Y_ss",
            rcond: 0.0,
        })?;
        let nt = self.y_tt.nrows();
        let mut v = self.y_tt - self.y_st.transpose() * &t1;
        for k in 0..nt {
            v[(k, k)] += Complex64::new(self.y_g, 0.0);
        }
        let (v_lu, _) = lu_with_rcond(v, "Y_g I + Y_p")?;
        let p1 = self.y_rs * &t1;
        let h = solve_right_symmetric(&v_lu, &p1, "Y_g I + Y_p")?
            * Complex64::new(self.receive_scaling * self.y_g, 0.0);
        let mse = mse_dma(&h, self.noise_variance, self.p_max, self.y_g);
        Ok(DmaEval { t1, z_lu, v_lu, h, mse })
    }

    /// MSE of the Wiener-optimal digital stage at these susceptances.
    pub fn mse(&self, y_im: &[f64]) -> Result<f64> {
        Ok(self.assemble(y_im)?.mse)
    }

    /// Effective channel H_d at these susceptances.
    pub fn effective_channel(&self, y_im: &[f64]) -> Result<CMat> {
        Ok(self.assemble(y_im)?.h)
    }

    /// ∂MSE_d/∂y_im: the diagonal of
    /// −(4P·α̃_r/(Mσ²))·Im{Z⁻¹Y_st·V⁻¹·Hᴴ·G⁻²·[Y_rs + (Y_g·α̃_r)⁻¹·H·Y_stᵀ]·Z⁻¹}
    /// with V = Y_p + Y_g·I, evaluated through thin factors only.
    pub fn gradient(&self, y_im: &[f64]) -> Result<Vec<f64>> {
        let eval = self.assemble(y_im)?;
        self.gradient_at(&eval)
    }

    fn gradient_at(&self, eval: &DmaEval) -> Result<Vec<f64>> {
        let m = self.y_rs.nrows();
        let g = dma_gram(&eval.h, self.noise_variance, self.p_max, self.y_g);
        let chol = nalgebra::Cholesky::new(g).expect("G must be positive definite");
        let ginv = chol.solve(&CMat::identity(m, m));
        let g2inv = &ginv * &ginv;
        // Left = Z⁻¹Y_st·V⁻¹·Hᴴ·G⁻² (N × M).
        let u = eval
            .v_lu
            .solve(&(eval.h.adjoint() * g2inv))
            .ok_or(Error::SingularMatrix { context: "Y_g I + Y_p", rcond: 0.0 })?;
        let left = &eval.t1 * u;
        // Right = [Y_rs + (Y_g·α̃_r)⁻¹·H·Y_stᵀ]·Z⁻¹ (M × N).
        let bracket = self.y_rs
            + &eval.h * self.y_st.transpose()
                * Complex64::new(1.0 / (self.y_g * self.receive_scaling), 0.0);
        let right = solve_right_symmetric(&eval.z_lu, &bracket, "Y_s + Y_ss")?;
        let coeff = -4.0 * self.p_max * self.receive_scaling
            / (m as f64 * self.noise_variance);
        Ok((0..self.n())
            .map(|k| {
                let mut dot = Complex64::new(0.0, 0.0);
                for mm in 0..m {
                    dot += left[(k, mm)] * right[(mm, k)];
                }
                coeff * dot.im
            })
            .collect())
    }

    /// Closed-form digital stage for frozen susceptances.
    pub fn solution_for_loads(&self, y_im: &[f64]) -> Result<PrecoderSolution> {
        self.solution_inner(y_im, 0, true)
    }

    fn solution_inner(
        &self,
        y_im: &[f64],
        iterations: usize,
        converged: bool,
    ) -> Result<PrecoderSolution> {
        let eval = self.assemble(y_im)?;
        let (b, beta, mse) =
            wiener_closed_form(&eval.h, self.noise_variance, self.p_max, self.y_g)?;
        Ok(PrecoderSolution {
            precoder: b,
            beta,
            analog: AnalogState::Loads(y_im.to_vec()),
            mse,
            iterations,
            converged,
        })
    }
}

/// Transmit Wiener filter for the DMA: gradient descent on the element
/// susceptances, closed-form digital stage at the end.
pub fn wf_dma(problem: &DmaProblem, settings: &OptimizerSettings) -> Result<PrecoderSolution> {
    let n = problem.n();
    let mut best: Option<DescentOutcome> = None;
    for restart in 0..settings.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(
            settings.seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let y0: Vec<f64> = (0..n)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * problem.y_g)
            .collect();
        let outcome = minimize(
            y0,
            |y| problem.mse(y),
            |y| problem.gradient(y),
            settings,
        )?;
        if best.as_ref().map_or(true, |b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart");
    problem.solution_inner(&best.x, best.iterations, best.converged)
}

struct DescentOutcome {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
    /// Objective at the start plus after every accepted step.
    trace: Vec<f64>,
}

/// Monotone gradient descent with Armijo backtracking. The initial trial
/// step of each iteration is the safeguarded Barzilai–Borwein step, so the
/// backtracking loop usually accepts immediately; accepted objective values
/// are non-increasing by construction.
fn minimize(
    x0: Vec<f64>,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    mut grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    settings: &OptimizerSettings,
) -> Result<DescentOutcome> {
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut trace = vec![fx];
    if settings.max_iterations == 0 {
        return Ok(DescentOutcome { x, f: fx, iterations: 0, converged: false, trace });
    }
    let mut g = grad(&x)?;
    let mut step = 0.0_f64;
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..settings.max_iterations {
        let gnorm_inf = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gnorm_inf <= settings.gradient_tolerance {
            converged = true;
            break;
        }
        let gnorm_sq: f64 = g.iter().map(|v| v * v).sum();
        if step == 0.0 {
            let xscale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            step = 0.1 * xscale / gnorm_inf;
        }

        // Backtracking line search.
        let mut t = step;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            match f(&trial) {
                Ok(ft) if ft <= fx - settings.sufficient_decrease * t * gnorm_sq => {
                    accepted = Some((trial, ft));
                    break;
                }
                // Singular trial points are rejected like insufficient
                // decrease; the step shrinks away from them.
                _ => {}
            }
            t *= settings.shrink;
            if t * gnorm_inf < 1e-16 {
                break;
            }
        }
        let Some((x_new, f_new)) = accepted else {
            break; // line search stalled at numerical stationarity
        };
        iterations += 1;
        trace.push(f_new);

        let g_new = grad(&x_new)?;
        // Safeguarded Barzilai–Borwein step for the next iteration.
        let mut s_dot_y = 0.0;
        let mut s_dot_s = 0.0;
        for i in 0..x.len() {
            let s = x_new[i] - x[i];
            let y = g_new[i] - g[i];
            s_dot_y += s * y;
            s_dot_s += s * s;
        }
        step = if s_dot_y > 0.0 {
            (s_dot_s / s_dot_y).clamp(1e-12, 1e12)
        } else {
            2.0 * t
        };

        let decrease = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if settings.stagnation_tolerance > 0.0
            && decrease <= settings.stagnation_tolerance * fx.abs().max(1.0)
        {
            converged = true;
            break;
        }
    }
    Ok(DescentOutcome { x, f: fx, iterations, converged, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayLayout;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn gram_of_zero_channel_is_scaled_identity() {
        let h = CMat::zeros(2, 3);
        let a = regularized_gram(&h, 0.02, 1.0, 2.0);
        let delta = 2.0 * 0.02 * 2.0 / 2.0;
        assert!(fro_norm(&(a - CMat::from_diagonal_element(3, 3, Complex64::new(delta, 0.0)))) < 1e-15);
    }

    #[test]
    fn gram_scalar_case() {
        let h = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let a = regularized_gram(&h, 0.02, 1.0, 2.0);
        assert_relative_eq!(a[(0, 0)].re, 1.02, max_relative = 1e-14);
        assert_eq!(a[(0, 0)].im, 0.0);
    }

    #[test]
    fn gram_is_hermitian_pd_with_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_cmat(&mut rng, 4, 6);
        let a = regularized_gram(&h, 0.05, 2.0, 12.0);
        assert!(fro_norm(&(a.adjoint() - &a)) < 1e-12);
        let delta = 4.0 * 0.05 * 12.0 / (2.0 * 2.0);
        let eig = nalgebra::SymmetricEigen::new(a).eigenvalues;
        for ev in eig.iter() {
            assert!(*ev >= delta - 1e-10);
        }
    }

    #[test]
    fn wf_fd_scalar_example() {
        // Frozen scalar closed form: H = 1, M = 1, σ² = 0.02, P = 1, Y_g = 2.
        let h = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let sol = wf_fd(&h, 0.02, 1.0, 2.0).unwrap();
        assert_relative_eq!(sol.precoder[(0, 0)].re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(sol.beta, 1.02, max_relative = 1e-12);
        assert_relative_eq!(sol.mse, 1.0 - 1.0 / 1.02, max_relative = 1e-12);
        assert_relative_eq!(sol.supplied_power(2.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn wf_fd_noiseless_orthonormal_rows() {
        // Orthonormal rows, σ² → 0: MSE → 0.
        let mut h = CMat::zeros(2, 4);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        h[(1, 1)] = Complex64::new(1.0, 0.0);
        let sol = wf_fd(&h, 1e-12, 1.0, 12.0).unwrap();
        assert!(sol.mse < 1e-9, "mse {}", sol.mse);
    }

    #[test]
    fn wf_fd_rejects_zero_channel() {
        let h = CMat::zeros(2, 4);
        assert!(matches!(wf_fd(&h, 0.02, 1.0, 12.0), Err(Error::DegenerateChannel)));
    }

    #[test]
    fn mse_direct_trivials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // B = β·H⁻¹ for square invertible H → M·σ²/β².
        let h = random_cmat(&mut rng, 3, 3);
        let beta = 1.7;
        let b = h.clone().try_inverse().unwrap() * Complex64::new(beta, 0.0);
        let got = mse_direct(&h, &b, beta, 0.02);
        assert_relative_eq!(got, 3.0 * 0.02 / (beta * beta), max_relative = 1e-9);
        // B = 0 → M + M·σ²/β².
        let b0 = CMat::zeros(3, 3);
        assert_relative_eq!(
            mse_direct(&h, &b0, beta, 0.02),
            3.0 + 3.0 * 0.02 / (beta * beta),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mse_direct_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = random_cmat(&mut rng, 2, 3);
        let b = random_cmat(&mut rng, 3, 2);
        let beta = 0.9;
        let sigma2 = 0.05;
        let closed = mse_direct(&h, &b, beta, sigma2);
        let trials = 200_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..trials {
            let x = CMat::from_fn(2, 1, |_, _| {
                Complex64::new(half * rand_normal(&mut rng), half * rand_normal(&mut rng))
            });
            let noise = CMat::from_fn(2, 1, |_, _| {
                Complex64::new(
                    half * sigma2.sqrt() * rand_normal(&mut rng),
                    half * sigma2.sqrt() * rand_normal(&mut rng),
                )
            });
            let err = &x - (&h * &b * &x + noise) * Complex64::new(1.0 / beta, 0.0);
            let e = err.iter().map(|v| v.norm_sqr()).sum::<f64>();
            acc += e;
            acc2 += e * e;
        }
        let mean = acc / trials as f64;
        let var = (acc2 / trials as f64 - mean * mean).max(0.0);
        let sigma_mean = (var / trials as f64).sqrt();
        assert!(
            (mean - closed).abs() < 3.0 * sigma_mean + 1e-9,
            "MC {mean} vs closed {closed} (3σ = {})",
            3.0 * sigma_mean
        );
    }

    fn rand_normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(rand_distr::StandardNormal)
    }

    #[test]
    fn hybrid_reduces_to_fd_when_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_cmat(&mut rng, 3, 5);
        let layout = ArrayLayout::grid(5, 1, 0.01, 0.01).unwrap();
        let network = PhaseNetwork::from_layout(&layout);
        let fd = wf_fd(&h, 0.02, 1.0, 12.0).unwrap();
        let hy = mse_hybrid(&h, &network, 0.02, 1.0, 12.0);
        assert_relative_eq!(fd.mse, hy, max_relative = 1e-12);
    }

    #[test]
    fn hybrid_mse_of_zero_channel_is_m() {
        let h = CMat::zeros(3, 4);
        let layout = ArrayLayout::grid(2, 2, 0.01, 0.01).unwrap();
        let network = PhaseNetwork::from_layout(&layout);
        assert_relative_eq!(mse_hybrid(&h, &network, 0.02, 1.0, 12.0), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn hybrid_consistent_with_direct_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = random_cmat(&mut rng, 2, 6);
        let layout = ArrayLayout::grid(3, 2, 0.01, 0.01).unwrap();
        let angles: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        let network = PhaseNetwork::from_layout(&layout).with_angles(angles).unwrap();
        let sol = hybrid_solution_for_network(&h, &network, 0.02, 1.0, 12.0).unwrap();
        let hq = &h * network.q();
        let direct = mse_direct(&hq, &sol.precoder, sol.beta, 0.02);
        assert_relative_eq!(sol.mse, direct, max_relative = 1e-10);
        assert_relative_eq!(sol.supplied_power(12.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn hybrid_angles_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = random_cmat(&mut rng, 2, 4);
        let layout = ArrayLayout::grid(2, 2, 0.01, 0.01).unwrap();
        let angles: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        let shifted: Vec<f64> = angles.iter().map(|a| a + std::f64::consts::TAU).collect();
        let n1 = PhaseNetwork::from_layout(&layout).with_angles(angles).unwrap();
        let n2 = PhaseNetwork::from_layout(&layout).with_angles(shifted).unwrap();
        let m1 = mse_hybrid(&h, &n1, 0.02, 1.0, 12.0);
        let m2 = mse_hybrid(&h, &n2, 0.02, 1.0, 12.0);
        assert_relative_eq!(m1, m2, max_relative = 1e-12);
    }

    #[test]
    fn dma_mse_trivials() {
        let h = CMat::zeros(3, 4);
        assert_relative_eq!(mse_dma(&h, 0.02, 1.0, 35.33), 3.0, max_relative = 1e-12);
        // Orthogonal rows with common gain g: M/(1 + c·g²).
        let gain = 0.7;
        let mut h = CMat::zeros(2, 4);
        h[(0, 0)] = Complex64::new(gain, 0.0);
        h[(1, 1)] = Complex64::new(0.0, gain);
        let c = 2.0 * 1.0 / (2.0 * 0.02 * 35.33);
        let expect = 2.0 / (1.0 + c * gain * gain);
        assert_relative_eq!(mse_dma(&h, 0.02, 1.0, 35.33), expect, max_relative = 1e-12);
    }

    #[test]
    fn dma_lemma_identity() {
        // tr{G⁻¹} = tr{I − H·Ã⁻¹·Hᴴ} with Ã the regularized Gram.
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..10 {
            let m = rng.gen_range(1..=4);
            let n = rng.gen_range(m..=12);
            let h = random_cmat(&mut rng, m, n);
            let lemma = mse_dma(&h, 0.02, 1.0, 35.33);
            let a = regularized_gram(&h, 0.02, 1.0, 35.33);
            let x = nalgebra::Cholesky::new(a).unwrap().solve(&h.adjoint());
            let direct = m as f64 - real_trace_product(&h, &x);
            assert!((lemma - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn minimize_quadratic_converges() {
        // f(x) = ½‖x − c‖² has gradient x − c.
        let c = [3.0, -1.0, 0.5];
        let settings = OptimizerSettings {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            ..OptimizerSettings::default()
        };
        let out = minimize(
            vec![0.0; 3],
            |x| Ok(0.5 * x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
            |x| Ok(x.iter().zip(&c).map(|(a, b)| a - b).collect()),
            &settings,
        )
        .unwrap();
        assert!(out.converged);
        for (xi, ci) in out.x.iter().zip(&c) {
            assert_relative_eq!(*xi, *ci, epsilon = 1e-8);
        }
    }

    #[test]
    fn dma_descent_trace_is_non_increasing() {
        let consts = crate::geometry::PhysicalConstants::new(10e9).unwrap();
        let lam = consts.wavelength;
        let layout = ArrayLayout::grid(2, 2, 0.5 * lam, 0.75 * lam).unwrap();
        let wg = crate::geometry::WaveguideSpec::baseline(&consts)
            .unwrap()
            .with_min_length(2.0 * lam);
        let set = crate::admittance::dma_admittances(
            &layout,
            &wg,
            &consts,
            crate::admittance::DmaLoadState::neutral(4, 0.1).unwrap(),
            &crate::admittance::MatchedLineModel::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y_rs = random_cmat(&mut rng, 2, 4);
        let prob = DmaProblem {
            y_ss: &set.y_ss,
            y_st: &set.y_st,
            y_tt: &set.y_tt,
            r_s: 0.1,
            y_g: 35.33,
            receive_scaling: consts.receive_scaling(),
            y_rs: &y_rs,
            noise_variance: 0.02,
            p_max: 1.0,
        };
        let settings = OptimizerSettings { max_iterations: 60, ..OptimizerSettings::default() };
        let out = minimize(
            vec![5.0, -10.0, 20.0, -1.0],
            |y| prob.mse(y),
            |y| prob.gradient(y),
            &settings,
        )
        .unwrap();
        assert!(out.trace.len() >= 2, "descent should accept at least one step");
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "accepted MSE increased: {} -> {}", w[0], w[1]);
        }
        assert!(out.f < out.trace[0]);
    }

    #[test]
    fn minimize_zero_iterations_returns_start() {
        let settings = OptimizerSettings { max_iterations: 0, ..OptimizerSettings::default() };
        let out = minimize(
            vec![2.0],
            |x| Ok(x[0] * x[0]),
            |x| Ok(vec![2.0 * x[0]]),
            &settings,
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![2.0]);
        assert!(!out.converged);
    }
}
