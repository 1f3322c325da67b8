//! Physical constants, element placement, and transmitter wiring.
//!
//! All three transmitter topologies share the same element grid: every
//! transmitter (or waveguide) owns a row of antennas along the x axis, rows
//! are stacked along z, and the whole structure lives in the xz-plane.

use crate::error::{Error, Result};

/// Speed of light used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854e-12;

/// Characteristic admittance of the baseline waveguide (S). This is also the
/// generator admittance used for the DMA topology.
pub const WAVEGUIDE_ADMITTANCE: f64 = 35.33;

/// Derived electromagnetic constants for one carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Carrier frequency (Hz).
    pub frequency: f64,
    /// Wavelength λ = c/f (m).
    pub wavelength: f64,
    /// Wavenumber k = 2π/λ (rad/m).
    pub wavenumber: f64,
    /// Angular frequency ω = 2πf (rad/s).
    pub angular_frequency: f64,
    /// Electrical permittivity ε (F/m).
    pub permittivity: f64,
}

impl PhysicalConstants {
    /// Builds the constant set for a carrier frequency in vacuum.
    pub fn new(frequency: f64) -> Result<Self> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency must be positive and finite, got {frequency}"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / frequency;
        Ok(Self {
            frequency,
            wavelength,
            wavenumber: 2.0 * std::f64::consts::PI / wavelength,
            angular_frequency: 2.0 * std::f64::consts::PI * frequency,
            permittivity: VACUUM_PERMITTIVITY,
        })
    }

    /// Radiation self-admittance of a single element, kωε/(3π) (S).
    ///
    /// Also the generator admittance that matches an uncoupled array.
    pub fn element_self_admittance(&self) -> f64 {
        self.wavenumber * self.angular_frequency * self.permittivity / (3.0 * std::f64::consts::PI)
    }

    /// Receive-side scaling α̃_r = √(3π/(kωε)).
    pub fn receive_scaling(&self) -> f64 {
        self.element_self_admittance().recip().sqrt()
    }
}

/// Element positions plus the antenna→transmitter assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    /// Element positions r_n = (x, y, z), all with y = 0 (m).
    pub positions: Vec<[f64; 3]>,
    /// Number of transmitters N_t.
    pub n_transmitters: usize,
    /// feed_map\[n\] = index of the transmitter driving antenna n.
    pub feed_map: Vec<usize>,
    /// Element pitch along x within a row (m).
    pub spacing_x: f64,
    /// Row separation along z (m).
    pub spacing_z: f64,
}

impl ArrayLayout {
    /// Builds the uniform grid: transmitter t owns `n_per_tx` antennas in a
    /// row along x at height z = t·spacing_z. N = n_t·n_per_tx.
    pub fn grid(n_t: usize, n_per_tx: usize, spacing_x: f64, spacing_z: f64) -> Result<Self> {
        if n_t == 0 || n_per_tx == 0 {
            return Err(Error::InvalidArgument(
                "transmitter and per-transmitter antenna counts must be >= 1".into(),
            ));
        }
        if !(spacing_x > 0.0) || !(spacing_z > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spacings must be positive, got ({spacing_x}, {spacing_z})"
            )));
        }
        let mut positions = Vec::with_capacity(n_t * n_per_tx);
        let mut feed_map = Vec::with_capacity(n_t * n_per_tx);
        for t in 0..n_t {
            for j in 0..n_per_tx {
                positions.push([j as f64 * spacing_x, 0.0, t as f64 * spacing_z]);
                feed_map.push(t);
            }
        }
        Ok(Self {
            positions,
            n_transmitters: n_t,
            feed_map,
            spacing_x,
            spacing_z,
        })
    }

    /// Fixed-aperture grid: `n_per_tx` antennas per row squeezed into a row
    /// extent of `aperture_x`, so densifying leaves the aperture unchanged.
    pub fn grid_fixed_aperture(
        n_t: usize,
        n_per_tx: usize,
        aperture_x: f64,
        spacing_z: f64,
    ) -> Result<Self> {
        if n_per_tx < 2 {
            return Err(Error::InvalidArgument(
                "fixed-aperture mode needs at least 2 antennas per transmitter".into(),
            ));
        }
        if !(aperture_x > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "aperture must be positive, got {aperture_x}"
            )));
        }
        Self::grid(n_t, n_per_tx, aperture_x / (n_per_tx - 1) as f64, spacing_z)
    }

    /// Total number of antennas N.
    pub fn n_antennas(&self) -> usize {
        self.positions.len()
    }

    /// Antennas per transmitter N/N_t.
    pub fn n_per_transmitter(&self) -> usize {
        self.positions.len() / self.n_transmitters
    }

    /// Indices of the antennas driven by transmitter `t`.
    pub fn antennas_of(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.feed_map
            .iter()
            .enumerate()
            .filter(move |(_, &ft)| ft == t)
            .map(|(n, _)| n)
    }

    /// Largest x extent over the rows (the physical aperture along x).
    pub fn x_extent(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.min(p[0]);
            hi = hi.max(p[0]);
        }
        hi - lo
    }
}

/// Rectangular waveguide carrying the fundamental TE10 mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideSpec {
    /// Width a along the z axis (m); single-mode operation needs λ/2 < a < λ.
    pub width: f64,
    /// Height b along the y axis (m).
    pub height: f64,
    /// Length L_w along the x axis (m).
    pub length: f64,
    /// Guided wavenumber k_x = √(k² − (π/a)²) (rad/m).
    pub guided_wavenumber: f64,
    /// Characteristic admittance Y0 (S).
    pub characteristic_admittance: f64,
}

impl WaveguideSpec {
    /// Builds a waveguide from explicit dimensions.
    pub fn new(width: f64, height: f64, length: f64, consts: &PhysicalConstants) -> Result<Self> {
        let lambda = consts.wavelength;
        if !(width > 0.5 * lambda && width < lambda) {
            return Err(Error::InvalidArgument(format!(
                "waveguide width {width} must lie in (λ/2, λ) = ({}, {}) for single-mode TE10",
                0.5 * lambda,
                lambda
            )));
        }
        if !(height > 0.0) || !(length > 0.0) {
            return Err(Error::InvalidArgument(
                "waveguide height and length must be positive".into(),
            ));
        }
        let k = consts.wavenumber;
        let kc = std::f64::consts::PI / width;
        let guided_wavenumber = (k * k - kc * kc).sqrt();
        Ok(Self {
            width,
            height,
            length,
            guided_wavenumber,
            characteristic_admittance: WAVEGUIDE_ADMITTANCE,
        })
    }

    /// Baseline waveguide: a = 0.73λ, b = 0.17λ, and L_w chosen so that
    /// k_x·L_w = 3π/4.
    pub fn baseline(consts: &PhysicalConstants) -> Result<Self> {
        let lambda = consts.wavelength;
        let width = 0.73 * lambda;
        let k = consts.wavenumber;
        let kc = std::f64::consts::PI / width;
        let kx = (k * k - kc * kc).sqrt();
        Self::new(width, 0.17 * lambda, 0.75 * std::f64::consts::PI / kx, consts)
    }

    /// Same waveguide stretched to at least `length` (m). Used when a row of
    /// elements is longer than the baseline normalization length.
    pub fn with_min_length(mut self, length: f64) -> Self {
        if length > self.length {
            self.length = length;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_at_10_ghz() {
        let c = PhysicalConstants::new(10e9).unwrap();
        assert_relative_eq!(c.wavelength, 0.02998, max_relative = 1e-12);
        assert_relative_eq!(
            c.wavenumber,
            2.0 * std::f64::consts::PI / 0.02998,
            max_relative = 1e-12
        );
        assert_relative_eq!(c.angular_frequency, 2.0 * std::f64::consts::PI * 10e9);
        // Frozen from kωε/(3π) with ε = 8.854e-12 F/m.
        assert_relative_eq!(c.element_self_admittance(), 12.370763333281754, max_relative = 1e-12);
    }

    #[test]
    fn wavelength_one_metre_gives_k_two_pi() {
        let c = PhysicalConstants::new(SPEED_OF_LIGHT).unwrap();
        assert_relative_eq!(c.wavelength, 1.0);
        assert_relative_eq!(c.wavenumber, 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(PhysicalConstants::new(0.0).is_err());
        assert!(PhysicalConstants::new(-1.0).is_err());
    }

    #[test]
    fn receive_scaling_inverts_self_admittance() {
        let c = PhysicalConstants::new(10e9).unwrap();
        let expect = (3.0 * std::f64::consts::PI
            / (c.wavenumber * c.angular_frequency * c.permittivity))
            .sqrt();
        assert_relative_eq!(c.receive_scaling(), expect, max_relative = 1e-12);
        assert_relative_eq!(c.receive_scaling(), 0.28431629479730147, max_relative = 1e-12);
    }

    #[test]
    fn grid_identity_feed_for_fd() {
        let lam = 0.02998;
        let l = ArrayLayout::grid(8, 1, lam / 2.0, lam).unwrap();
        assert_eq!(l.n_antennas(), 8);
        assert_eq!(l.feed_map, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn grid_positions_two_by_three() {
        let lam = 1.0;
        let l = ArrayLayout::grid(2, 3, lam / 2.0, lam).unwrap();
        let expect = [
            [0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.0, 1.0],
            [1.0, 0.0, 1.0],
        ];
        assert_eq!(l.positions, expect);
        assert_eq!(l.feed_map, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn grid_positions_unique() {
        let l = ArrayLayout::grid(6, 20, 0.2 * 0.02998, 0.75 * 0.02998).unwrap();
        assert_eq!(l.n_antennas(), 120);
        for i in 0..l.n_antennas() {
            for j in (i + 1)..l.n_antennas() {
                let d: f64 = (0..3)
                    .map(|a| (l.positions[i][a] - l.positions[j][a]).powi(2))
                    .sum();
                assert!(d.sqrt() > 0.0, "positions {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn fixed_aperture_extent_constant() {
        let aperture = 3.8 * 0.02998;
        let mut extents = Vec::new();
        for n in [5, 10, 20] {
            let l = ArrayLayout::grid_fixed_aperture(6, n, aperture, 0.75 * 0.02998).unwrap();
            extents.push(l.x_extent());
        }
        for e in &extents {
            assert_relative_eq!(*e, aperture, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(ArrayLayout::grid(0, 3, 0.1, 0.1).is_err());
        assert!(ArrayLayout::grid(3, 0, 0.1, 0.1).is_err());
    }

    #[test]
    fn baseline_waveguide_matches_table() {
        let c = PhysicalConstants::new(10e9).unwrap();
        let wg = WaveguideSpec::baseline(&c).unwrap();
        assert_relative_eq!(wg.width, 0.73 * c.wavelength);
        assert_relative_eq!(wg.height, 0.17 * c.wavelength);
        assert_relative_eq!(
            wg.guided_wavenumber * wg.length,
            0.75 * std::f64::consts::PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(wg.characteristic_admittance, 35.33);
        // k_x real and below k: single propagating mode.
        assert!(wg.guided_wavenumber > 0.0 && wg.guided_wavenumber < c.wavenumber);
    }

    #[test]
    fn waveguide_rejects_multimode_width() {
        let c = PhysicalConstants::new(10e9).unwrap();
        assert!(WaveguideSpec::new(1.2 * c.wavelength, 0.1 * c.wavelength, 0.01, &c).is_err());
        assert!(WaveguideSpec::new(0.4 * c.wavelength, 0.1 * c.wavelength, 0.01, &c).is_err());
    }
}
