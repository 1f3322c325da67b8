//! Power-consumption model and evaluation metrics.
//!
//! Total consumption is P_bb + N_t·(2·P_dac + P_rf) + P_a + N_ps·P_ps +
//! N_var·P_var, with the amplifier stage P_a following either the linear
//! model P_g/η_a or the non-linear model Σ_n √(P_out,n·P_sat)/η_a.

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::topology::TopologyKind;

/// Amplifier consumption model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplifierModel {
    /// P_a = P_g/η_a.
    Linear,
    /// P_a = Σ_n √(P_out,n·P_sat)/η_a.
    Nonlinear,
}

/// Component consumption parameters.
#[derive(Debug, Clone)]
pub struct ConsumptionParams {
    /// Base-band unit consumption (W).
    pub p_bb: f64,
    /// Per-RF-chain consumption (W).
    pub p_rf: f64,
    /// Per-phase-shifter consumption (W).
    pub p_ps: f64,
    /// Per-varactor consumption (W); negligible in practice.
    pub p_var: f64,
    /// DAC resolution bits b.
    pub dac_bits: u32,
    /// DAC sampling rate F_s (Hz).
    pub dac_rate: f64,
    /// Amplifier efficiency η_a ∈ (0, 1].
    pub amplifier_efficiency: f64,
    /// Amplifier consumption model.
    pub amplifier_model: AmplifierModel,
    /// Saturation output power per amplifier (W); used by the non-linear
    /// model.
    pub p_sat: f64,
}

impl Default for ConsumptionParams {
    /// Baseline values: P_bb = 40 mW, P_rf = 40 mW, P_ps = 21.8 mW,
    /// P_var = 0, b = 8, F_s = 100 MHz, η_a = 0.3, non-linear amplifiers.
    fn default() -> Self {
        Self {
            p_bb: 0.040,
            p_rf: 0.040,
            p_ps: 0.0218,
            p_var: 0.0,
            dac_bits: 8,
            dac_rate: 100e6,
            amplifier_efficiency: 0.3,
            amplifier_model: AmplifierModel::Nonlinear,
            p_sat: 1.0,
        }
    }
}

impl ConsumptionParams {
    pub fn validate(&self) -> Result<()> {
        if [self.p_bb, self.p_rf, self.p_ps, self.p_var].iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidArgument("component powers must be >= 0".into()));
        }
        if !(self.amplifier_efficiency > 0.0 && self.amplifier_efficiency <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "amplifier efficiency must lie in (0, 1], got {}",
                self.amplifier_efficiency
            )));
        }
        if self.dac_bits < 1 {
            return Err(Error::InvalidArgument("DAC needs at least 1 bit".into()));
        }
        Ok(())
    }
}

/// DAC consumption P_dac = 1.5e-5·2^b + 9e-12·b·F_s (W).
pub fn dac_power(bits: u32, rate: f64) -> f64 {
    1.5e-5 * (2.0_f64).powi(bits as i32) + 9e-12 * bits as f64 * rate
}

/// Amplifier stage consumption for the selected model.
///
/// The non-linear model fails if any P_out,n exceeds P_sat; the harness
/// calibrates P_sat so this does not happen in a well-formed scenario.
pub fn amplifier_power(p_out: &[f64], params: &ConsumptionParams) -> Result<f64> {
    let eta = params.amplifier_efficiency;
    match params.amplifier_model {
        AmplifierModel::Linear => Ok(p_out.iter().sum::<f64>() / eta),
        AmplifierModel::Nonlinear => {
            if !(params.p_sat > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "non-linear amplifier model needs P_sat > 0, got {}",
                    params.p_sat
                )));
            }
            let mut total = 0.0;
            for (n, &p) in p_out.iter().enumerate() {
                if p < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "amplifier output {n} is negative: {p}"
                    )));
                }
                if p > params.p_sat {
                    return Err(Error::SaturationViolation {
                        index: n,
                        p_out: p,
                        p_sat: params.p_sat,
                    });
                }
                total += (p * params.p_sat).sqrt();
            }
            Ok(total / eta)
        }
    }
}

/// Componentwise consumption of one transmitter chain configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBreakdown {
    pub p_bb: f64,
    pub p_dac_total: f64,
    pub p_rf_total: f64,
    pub p_amplifier: f64,
    pub p_ps_total: f64,
    pub p_var_total: f64,
    /// Exact sum of the components above.
    pub p_total: f64,
}

/// Assembles the total consumption for `n_t` transmitter chains plus the
/// topology-specific analog devices.
pub fn total_power(
    topology: TopologyKind,
    n_t: usize,
    n_ps: usize,
    n_var: usize,
    p_amplifier: f64,
    params: &ConsumptionParams,
) -> Result<PowerBreakdown> {
    params.validate()?;
    if p_amplifier < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "amplifier power must be >= 0, got {p_amplifier}"
        )));
    }
    match topology {
        TopologyKind::FullyDigital | TopologyKind::Dma if n_ps != 0 => {
            return Err(Error::InvalidArgument(
                "phase shifters only exist in the hybrid topology".into(),
            ));
        }
        TopologyKind::FullyDigital | TopologyKind::Hybrid if n_var != 0 => {
            return Err(Error::InvalidArgument(
                "varactors only exist in the DMA topology".into(),
            ));
        }
        _ => {}
    }
    let p_dac_total = n_t as f64 * 2.0 * dac_power(params.dac_bits, params.dac_rate);
    let p_rf_total = n_t as f64 * params.p_rf;
    let p_ps_total = n_ps as f64 * params.p_ps;
    let p_var_total = n_var as f64 * params.p_var;
    let p_total = params.p_bb + p_dac_total + p_rf_total + p_amplifier + p_ps_total + p_var_total;
    Ok(PowerBreakdown {
        p_bb: params.p_bb,
        p_dac_total,
        p_rf_total,
        p_amplifier,
        p_ps_total,
        p_var_total,
        p_total,
    })
}

/// Per-user SINRs, sum spectral efficiency Σ log2(1 + SINR_m), and energy
/// efficiency sum_rate/P_total for an effective channel and precoder.
pub fn sum_rate_and_ee(
    h_eq: &CMat,
    b: &CMat,
    noise_variance: f64,
    p_total: f64,
) -> Result<(f64, f64)> {
    if !(p_total > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total power must be positive, got {p_total}"
        )));
    }
    let hb = h_eq * b;
    let m = hb.nrows();
    let mut sum_rate = 0.0;
    for user in 0..m {
        let signal = hb[(user, user)].norm_sqr();
        let interference: f64 = (0..hb.ncols())
            .filter(|&s| s != user)
            .map(|s| hb[(user, s)].norm_sqr())
            .sum();
        let sinr = signal / (interference + noise_variance);
        sum_rate += (1.0 + sinr).log2();
    }
    Ok((sum_rate, sum_rate / p_total))
}

/// One Monte Carlo trial result for one topology.
#[derive(Debug, Clone)]
pub struct EvaluationRecord {
    pub topology: TopologyKind,
    /// Achieved Wiener MSE.
    pub mse: f64,
    /// Supplied power (W).
    pub p_g: f64,
    pub power: PowerBreakdown,
    /// Sum spectral efficiency (bits/s/Hz).
    pub sum_rate: f64,
    /// sum_rate / P_total (bits/s/Hz per W).
    pub energy_efficiency: f64,
}
