//! Coupling and admittance matrices for arrays and DMAs.
//!
//! Arrays are described by the single coupling matrix `Y_aa`; a DMA by the
//! block set `{Y_tt, Y_st, Y_ss, Y_s}` together with the effective port
//! admittance `Y_p = Y_tt − Y_stᵀ(Y_s + Y_ss)⁻¹Y_st` seen by the
//! transmitters. All structures are reciprocal, so every matrix built here
//! is complex symmetric (not Hermitian).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, PhysicalConstants, WaveguideSpec};
use crate::linalg::{lu_with_rcond, CMat};

/// Tunable element loads: Y_s = R_s·I + i·diag(y_im).
#[derive(Debug, Clone, PartialEq)]
pub struct DmaLoadState {
    /// Varactor-controlled susceptances, one per element (S).
    pub y_im: Vec<f64>,
    /// Loss term R_s > 0 shared by all elements (S).
    pub r_s: f64,
}

impl DmaLoadState {
    pub fn new(y_im: Vec<f64>, r_s: f64) -> Result<Self> {
        if !(r_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "element loss R_s must be positive, got {r_s}"
            )));
        }
        if y_im.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite element susceptance".into()));
        }
        Ok(Self { y_im, r_s })
    }

    /// Uniform zero-susceptance state for `n` elements.
    pub fn neutral(n: usize, r_s: f64) -> Result<Self> {
        Self::new(vec![0.0; n], r_s)
    }
}

/// Free-space coupling between two z-oriented magnetic dipoles over a
/// conducting plane, normalized so that i·2ωε·G_a(d→0) → kωε/(3π).
///
/// `kd` is the electrical distance and `cos_theta` the angle of the
/// displacement vector from the dipole (z) axis.
fn dipole_coupling(kd: f64, cos_theta: f64, consts: &PhysicalConstants) -> Complex64 {
    // (Y)_{n,n'} = -i (ωεk/2π) (e^{ix}/x) [a + b cos²θ], x = kd, with
    // a = 1 + (ix-1)/x², b = (3 - 3ix - x²)/x².
    let x = kd;
    let x2 = x * x;
    let i = Complex64::new(0.0, 1.0);
    let a = Complex64::new(1.0, 0.0) + (i * x - 1.0) / x2;
    let b = (Complex64::new(3.0, 0.0) - i * (3.0 * x) - x2) / x2;
    let phase = Complex64::new(0.0, x).exp() / x;
    let scale = consts.angular_frequency * consts.permittivity * consts.wavenumber
        / (2.0 * std::f64::consts::PI);
    -i * scale * phase * (a + b * cos_theta * cos_theta)
}

/// Mutual-coupling matrix Y_aa of a conventional array.
///
/// Diagonal entries are pinned to kωε/(3π) exactly; off-diagonal entries use
/// the dipole coupling above.
pub fn mutual_admittance_array(layout: &ArrayLayout, consts: &PhysicalConstants) -> Result<CMat> {
    let n = layout.n_antennas();
    let self_adm = Complex64::new(consts.element_self_admittance(), 0.0);
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for a in 0..n {
        y[(a, a)] = self_adm;
        for b in (a + 1)..n {
            let pa = layout.positions[a];
            let pb = layout.positions[b];
            let dx = pa[0] - pb[0];
            let dy = pa[1] - pb[1];
            let dz = pa[2] - pb[2];
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            if d == 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "antennas {a} and {b} coincide"
                )));
            }
            let v = dipole_coupling(consts.wavenumber * d, dz / d, consts);
            y[(a, b)] = v;
            y[(b, a)] = v;
        }
    }
    Ok(y)
}

/// Strategy for the DMA waveguide blocks Y_tt, Y_st, and the intra-waveguide
/// part of Y_ss. Lets the transmission-line stand-in below be swapped for
/// tabulated closed forms without touching the rest of the pipeline.
pub trait WaveguideCouplingModel: Send + Sync {
    /// Strategy name used in configuration files.
    fn name(&self) -> &'static str;

    /// Transmitter self-admittance block Y_tt (N_t × N_t).
    fn transmitter_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat;

    /// Transmitter-to-element coupling Y_st (N × N_t). Must be block-sparse:
    /// element n couples only to the transmitter feeding its waveguide.
    fn feed_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat;

    /// Intra-waveguide element-to-element coupling (N × N), added on top of
    /// the radiative coupling of `mutual_admittance_array`.
    fn element_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat;
}

/// Matched-termination transmission-line model of the waveguides.
///
/// Each waveguide is a lossless TE10 line with propagation constant k_x and
/// characteristic admittance Y0, fed at the row origin and matched at the far
/// end, with each element tapping the line with a dimensionless coupling
/// strength κ:
///
/// * Y_tt = Y0·I
/// * (Y_st)_{n,t} = κ·Y0·e^{i k_x x̃_n} for elements n on waveguide t
/// * intra-waveguide (Y_ss)_{n,n'} += κ²·(Y0/2)·e^{i k_x |x̃_n − x̃_n'|}
///
/// where x̃_n is the tap position along its waveguide.
#[derive(Debug, Clone, Copy)]
pub struct MatchedLineModel {
    /// Tap coupling strength κ.
    pub coupling: f64,
}

/// Default tap coupling strength of the matched-line model.
pub const DEFAULT_COUPLING: f64 = 0.3;

impl Default for MatchedLineModel {
    fn default() -> Self {
        Self {
            coupling: DEFAULT_COUPLING,
        }
    }
}

/// Tap position of each element along its own waveguide (x offset from the
/// first element of the row).
fn tap_positions(layout: &ArrayLayout) -> Vec<f64> {
    let mut row_origin = vec![f64::INFINITY; layout.n_transmitters];
    for (n, p) in layout.positions.iter().enumerate() {
        let t = layout.feed_map[n];
        row_origin[t] = row_origin[t].min(p[0]);
    }
    layout
        .positions
        .iter()
        .enumerate()
        .map(|(n, p)| p[0] - row_origin[layout.feed_map[n]])
        .collect()
}

impl WaveguideCouplingModel for MatchedLineModel {
    fn name(&self) -> &'static str {
        "default-line"
    }

    fn transmitter_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat {
        let y0 = Complex64::new(wg.characteristic_admittance, 0.0);
        CMat::from_diagonal_element(layout.n_transmitters, layout.n_transmitters, y0)
    }

    fn feed_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat {
        let n = layout.n_antennas();
        let taps = tap_positions(layout);
        let amp = self.coupling * wg.characteristic_admittance;
        let mut y = CMat::zeros(n, layout.n_transmitters);
        for a in 0..n {
            let phase = wg.guided_wavenumber * taps[a];
            y[(a, layout.feed_map[a])] = Complex64::from_polar(amp, phase);
        }
        y
    }

    fn element_block(&self, layout: &ArrayLayout, wg: &WaveguideSpec) -> CMat {
        let n = layout.n_antennas();
        let taps = tap_positions(layout);
        let amp = self.coupling * self.coupling * wg.characteristic_admittance / 2.0;
        let mut y = CMat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                if layout.feed_map[a] != layout.feed_map[b] {
                    continue;
                }
                let phase = wg.guided_wavenumber * (taps[a] - taps[b]).abs();
                let v = Complex64::from_polar(amp, phase);
                y[(a, b)] = v;
                y[(b, a)] = v;
            }
        }
        y
    }
}

/// Looks up a coupling strategy by its configuration name.
pub fn coupling_model_by_name(
    name: &str,
    coupling: f64,
) -> Result<Box<dyn WaveguideCouplingModel>> {
    match name {
        "default-line" => Ok(Box::new(MatchedLineModel { coupling })),
        other => Err(Error::InvalidArgument(format!(
            "unknown waveguide coupling model '{other}' (available: default-line)"
        ))),
    }
}

/// The complete admittance description of one DMA instance.
#[derive(Debug, Clone)]
pub struct DmaAdmittances {
    /// Transmitter block Y_tt (N_t × N_t).
    pub y_tt: CMat,
    /// Transmitter-to-element block Y_st (N × N_t).
    pub y_st: CMat,
    /// Element coupling Y_ss (N × N), radiative + intra-waveguide.
    pub y_ss: CMat,
    /// Tunable loads.
    pub load: DmaLoadState,
    /// Effective port admittance Y_p = Y_tt − Y_stᵀ(Y_s + Y_ss)⁻¹Y_st.
    pub y_p: CMat,
}

impl DmaAdmittances {
    /// Y_s + Y_ss for the stored load state.
    pub fn loaded_coupling(&self) -> CMat {
        loaded_coupling(&self.y_ss, &self.load)
    }

    /// The cached effective port admittance.
    pub fn effective_port_admittance(&self) -> &CMat {
        &self.y_p
    }

    /// Rebuilds the set for a new load state (Y_ss, Y_st, Y_tt unchanged).
    pub fn with_load(&self, load: DmaLoadState) -> Result<Self> {
        build_dma_set(self.y_tt.clone(), self.y_st.clone(), self.y_ss.clone(), load)
    }
}

/// Y_s + Y_ss with Y_s = R_s·I + i·diag(y_im).
pub fn loaded_coupling(y_ss: &CMat, load: &DmaLoadState) -> CMat {
    let mut z = y_ss.clone();
    for (n, &y) in load.y_im.iter().enumerate() {
        z[(n, n)] += Complex64::new(load.r_s, y);
    }
    z
}

fn build_dma_set(y_tt: CMat, y_st: CMat, y_ss: CMat, load: DmaLoadState) -> Result<DmaAdmittances> {
    let z = loaded_coupling(&y_ss, &load);
    let (lu, _rcond) = lu_with_rcond(z, "Y_s + Y_ss")?;
    let zinv_yst = lu
        .solve(&y_st)
        .ok_or(Error::SingularMatrix {
            context: "Y_s + Y_ss",
            rcond: 0.0,
        })?;
    let y_p = &y_tt - y_st.transpose() * zinv_yst;
    Ok(DmaAdmittances {
        y_tt,
        y_st,
        y_ss,
        load,
        y_p,
    })
}

/// Builds the full DMA admittance set for a layout, waveguide, and load
/// state, including the cached port admittance Y_p.
pub fn dma_admittances(
    layout: &ArrayLayout,
    wg: &WaveguideSpec,
    consts: &PhysicalConstants,
    load: DmaLoadState,
    model: &dyn WaveguideCouplingModel,
) -> Result<DmaAdmittances> {
    let n = layout.n_antennas();
    if load.y_im.len() != n {
        return Err(Error::InvalidArgument(format!(
            "load state has {} susceptances for {n} elements",
            load.y_im.len()
        )));
    }
    let taps = tap_positions(layout);
    let max_tap = taps.iter().fold(0.0_f64, |m, &t| m.max(t));
    if max_tap > wg.length {
        return Err(Error::InvalidGeometry(format!(
            "row extent {max_tap} m exceeds waveguide length {} m",
            wg.length
        )));
    }
    let y_tt = model.transmitter_block(layout, wg);
    let y_st = model.feed_block(layout, wg);
    let y_ss = mutual_admittance_array(layout, consts)? + model.element_block(layout, wg);
    build_dma_set(y_tt, y_st, y_ss, load)
}
