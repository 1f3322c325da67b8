//! Effective channels, the phase-shifting network, and supplied-power
//! accounting for the three transmitter topologies.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::admittance::DmaAdmittances;
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, PhysicalConstants};
use crate::linalg::{lu_with_rcond, solve_right_symmetric, CLu, CMat};

/// The three transmitter architectures under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    /// One transmitter per antenna.
    FullyDigital,
    /// N_t transmitters, each feeding N/N_t antennas through phase shifters.
    Hybrid,
    /// N_t waveguides with varactor-tuned radiating elements.
    Dma,
}

impl TopologyKind {
    pub fn label(&self) -> &'static str {
        match self {
            TopologyKind::FullyDigital => "fd",
            TopologyKind::Hybrid => "hybrid",
            TopologyKind::Dma => "dma",
        }
    }
}

/// Maps channel draws Y_ra to the array effective channel
/// H_a = −α̃_r·Y_g·Y_ra·(Y_g·I + Y_aa)⁻¹.
///
/// The resolvent factorization is computed once and shared across draws.
pub struct ArrayChannelMap {
    lu: CLu,
    scale: f64,
    n: usize,
}

/// Builds the factory for one array instance.
pub fn effective_channel_array(
    y_aa: &CMat,
    y_g: f64,
    consts: &PhysicalConstants,
) -> Result<ArrayChannelMap> {
    if !(y_g > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "generator admittance must be positive, got {y_g}"
        )));
    }
    let n = y_aa.nrows();
    let resolvent = y_aa + CMat::from_diagonal_element(n, n, Complex64::new(y_g, 0.0));
    let (lu, _) = lu_with_rcond(resolvent, "Y_g I + Y_aa")?;
    Ok(ArrayChannelMap {
        lu,
        scale: consts.receive_scaling() * y_g,
        n,
    })
}

impl ArrayChannelMap {
    /// H_a for one draw of the wireless channel.
    pub fn apply(&self, y_ra: &CMat) -> Result<CMat> {
        debug_assert_eq!(y_ra.ncols(), self.n);
        // (Y_g I + Y_aa) is complex symmetric, so right-division reuses the LU.
        let h = solve_right_symmetric(&self.lu, y_ra, "Y_g I + Y_aa")?;
        Ok(h * Complex64::new(-self.scale, 0.0))
    }
}

/// Maps channel draws Y_rs to the DMA effective channel
/// H_d = α̃_r·Y_g·Y_rs·(Y_s + Y_ss)⁻¹·Y_st·(Y_g·I + Y_p)⁻¹.
///
/// The draw-independent tail (Y_s + Y_ss)⁻¹·Y_st·(Y_g·I + Y_p)⁻¹ is
/// precomputed, so each draw costs a single thin product.
pub struct DmaChannelMap {
    tail: CMat,
    scale: f64,
}

/// Builds the factory for one DMA instance (fixed load state).
pub fn effective_channel_dma(
    set: &DmaAdmittances,
    y_g: f64,
    consts: &PhysicalConstants,
) -> Result<DmaChannelMap> {
    if !(y_g > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "generator admittance must be positive, got {y_g}"
        )));
    }
    let z = set.loaded_coupling();
    let (z_lu, _) = lu_with_rcond(z, "Y_s + Y_ss")?;
    let t1 = z_lu.solve(&set.y_st).ok_or(Error::SingularMatrix {
        context: "Y_s + Y_ss",
        rcond: 0.0,
    })?;
    let nt = set.y_tt.nrows();
    let v = &set.y_p + CMat::from_diagonal_element(nt, nt, Complex64::new(y_g, 0.0));
    let (v_lu, _) = lu_with_rcond(v, "Y_g I + Y_p")?;
    let tail = solve_right_symmetric(&v_lu, &t1, "Y_g I + Y_p")?;
    Ok(DmaChannelMap {
        tail,
        scale: consts.receive_scaling() * y_g,
    })
}

impl DmaChannelMap {
    /// H_d for one draw of the wireless channel.
    pub fn apply(&self, y_rs: &CMat) -> Result<CMat> {
        Ok(y_rs * &self.tail * Complex64::new(self.scale, 0.0))
    }
}

/// Partially-connected phase-shifting network: one shifter per antenna,
/// each antenna wired to exactly one transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNetwork {
    /// feeds\[n\] = transmitter column of the single non-zero in row n of S.
    feeds: Vec<usize>,
    n_transmitters: usize,
    /// One angle per antenna (the active entries of Θ).
    angles: Vec<f64>,
}

impl PhaseNetwork {
    /// Zero-phase network wired per the layout's feed map.
    pub fn from_layout(layout: &ArrayLayout) -> Self {
        Self {
            feeds: layout.feed_map.clone(),
            n_transmitters: layout.n_transmitters,
            angles: vec![0.0; layout.n_antennas()],
        }
    }

    /// Replaces the per-antenna angles.
    pub fn with_angles(mut self, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != self.feeds.len() {
            return Err(Error::InvalidArgument(format!(
                "{} angles for {} antennas",
                angles.len(),
                self.feeds.len()
            )));
        }
        self.angles = angles;
        Ok(self)
    }

    pub fn n_antennas(&self) -> usize {
        self.feeds.len()
    }

    pub fn n_transmitters(&self) -> usize {
        self.n_transmitters
    }

    /// Antennas driven per transmitter, N/N_t.
    pub fn expansion(&self) -> usize {
        self.feeds.len() / self.n_transmitters
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn feeds(&self) -> &[usize] {
        &self.feeds
    }

    /// Dense Q = exp(iΘ)∘S (N × N_t).
    pub fn q(&self) -> CMat {
        let mut q = CMat::zeros(self.feeds.len(), self.n_transmitters);
        for (n, (&t, &th)) in self.feeds.iter().zip(&self.angles).enumerate() {
            q[(n, t)] = Complex64::from_polar(1.0, th);
        }
        q
    }

    /// Dense selection mask S (N × N_t).
    pub fn selection_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.feeds.len(), self.n_transmitters);
        for (n, &t) in self.feeds.iter().enumerate() {
            s[(n, t)] = 1.0;
        }
        s
    }

    /// Dense Θ (N × N_t); zero outside the selection support.
    pub fn theta_matrix(&self) -> DMatrix<f64> {
        let mut th = DMatrix::zeros(self.feeds.len(), self.n_transmitters);
        for (n, (&t, &a)) in self.feeds.iter().zip(&self.angles).enumerate() {
            th[(n, t)] = a;
        }
        th
    }
}

/// Supplied power P_g = (Y_g/2)·tr(Bᴴ·B) for a digital precoder driving the
/// generators directly (FD and DMA).
pub fn supplied_power(b: &CMat, y_g: f64) -> f64 {
    0.5 * y_g * b.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// Supplied power of the hybrid topology with B = Q·B_h: since
/// QᴴQ = (N/N_t)·I, the trace collapses to (Y_g/2)·(N/N_t)·tr(B_hᴴB_h).
pub fn supplied_power_hybrid(b_h: &CMat, y_g: f64, expansion: usize) -> f64 {
    supplied_power(b_h, y_g) * expansion as f64
}

/// Per-amplifier output power, (Y_g/2)·(B·Bᴴ)_{nn} per row (FD and DMA).
pub fn per_amplifier_output(b: &CMat, y_g: f64) -> Vec<f64> {
    (0..b.nrows())
        .map(|n| 0.5 * y_g * b.row(n).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .collect()
}

/// Per-amplifier output power of the hybrid topology,
/// (Y_g/2)·(N/N_t)·(B_h·B_hᴴ)_{nn}.
pub fn per_amplifier_output_hybrid(b_h: &CMat, y_g: f64, expansion: usize) -> Vec<f64> {
    per_amplifier_output(b_h, y_g)
        .into_iter()
        .map(|p| p * expansion as f64)
        .collect()
}
