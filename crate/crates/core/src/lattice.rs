//! Uniform periodic 1-D lattices and the unitary position/momentum transform.
//!
//! Units are dimensionless with `hbar = 1`. A grid of `N` points and extent
//! `L` samples positions `x_j = -L/2 + j dx` and momenta `k_m = 2 pi m / L`
//! for `m` in `[-N/2, N/2)`. Both sample sets are stored in increasing order.
//!
//! The transform pair is the symmetric continuum convention sampled on the
//! lattice:
//!
//! ```text
//! psi~(k) = dx / sqrt(2 pi) * sum_j psi(x_j) exp(-i k x_j)
//! psi(x)  = dk / sqrt(2 pi) * sum_m psi~(k_m) exp(+i k_m x)
//! ```
//!
//! so that `sum |psi|^2 dx == sum |psi~|^2 dk` exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlannerScalar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted lattice.
pub const MIN_POINTS: usize = 8;

/// Kernels narrower than this many lattice spacings alias in momentum space.
pub const MIN_WIDTH_IN_CELLS: f64 = 0.8;

/// Relative amplitude allowed at the periodic seam before a factor counts as
/// wrapped.
pub const SEAM_TOLERANCE: f64 = 1e-6;

/// Representation of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rep {
    Position,
    Momentum,
}

impl Rep {
    pub fn as_str(self) -> &'static str {
        match self {
            Rep::Position => "position",
            Rep::Momentum => "momentum",
        }
    }

    pub fn conjugate(self) -> Rep {
        match self {
            Rep::Position => Rep::Momentum,
            Rep::Momentum => Rep::Position,
        }
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "position" | "x" => Ok(Rep::Position),
            "momentum" | "k" => Ok(Rep::Momentum),
            other => Err(Error::param(
                "rep",
                format!("unknown representation `{other}`"),
            )),
        }
    }
}

/// A uniform periodic lattice with matched position and momentum samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
    spacing: f64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
}

/// Builds a grid of `n_points` samples over extent `length`.
///
/// `n_points` must be even (the momentum set is `[-N/2, N/2)`) and at least
/// [`MIN_POINTS`].
pub fn make_grid(n_points: usize, length: f64) -> Result<Grid1D> {
    if n_points < MIN_POINTS {
        return Err(Error::InvalidGrid(format!(
            "n_points = {n_points} is below the minimum of {MIN_POINTS}"
        )));
    }
    if !n_points.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "n_points = {n_points} must be even"
        )));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "length = {length} must be positive"
        )));
    }
    let spacing = length / n_points as f64;
    let half = (n_points / 2) as i64;
    let positions = (0..n_points)
        .map(|j| -0.5 * length + j as f64 * spacing)
        .collect();
    let momenta = (-half..half)
        .map(|m| 2.0 * PI * m as f64 / length)
        .collect();
    Ok(Grid1D {
        n_points,
        length,
        spacing,
        positions,
        momenta,
    })
}

impl Grid1D {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Position spacing `dx = L / N`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Momentum spacing `dk = 2 pi / L`.
    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Largest momentum magnitude on the lattice, `pi N / L`.
    pub fn k_max(&self) -> f64 {
        PI * self.n_points as f64 / self.length
    }

    pub fn coords(&self, rep: Rep) -> &[f64] {
        match rep {
            Rep::Position => &self.positions,
            Rep::Momentum => &self.momenta,
        }
    }

    /// Cell measure of one sample in the given representation.
    pub fn cell(&self, rep: Rep) -> f64 {
        match rep {
            Rep::Position => self.spacing,
            Rep::Momentum => self.momentum_spacing(),
        }
    }

    /// Period of the coordinate axis in the given representation.
    pub fn period(&self, rep: Rep) -> f64 {
        self.cell(rep) * self.n_points as f64
    }

    /// Maps a displacement onto its minimal periodic image in `[-P/2, P/2)`.
    pub fn wrap(&self, rep: Rep, delta: f64) -> f64 {
        let period = self.period(rep);
        let r = delta - period * (delta / period).round();
        if r >= 0.5 * period {
            r - period
        } else {
            r
        }
    }

    /// Snaps a coordinate to the nearest lattice sample.
    ///
    /// Values outside the half-open lattice range (widened by half a cell)
    /// are rejected.
    pub fn snap(&self, rep: Rep, value: f64) -> Result<Snap> {
        let coords = self.coords(rep);
        let cell = self.cell(rep);
        let lo = coords[0] - 0.5 * cell;
        let hi = coords[self.n_points - 1] + 0.5 * cell;
        if !value.is_finite() || value < lo || value >= hi {
            return Err(Error::param(
                "value",
                format!("{value} lies outside the {rep} lattice range [{lo}, {hi})"),
            ));
        }
        let index = (((value - coords[0]) / cell).round() as usize).min(self.n_points - 1);
        Ok(Snap {
            index,
            requested: value,
            snapped: coords[index],
        })
    }

    /// Relative amplitude a Gaussian kernel of `width` leaves at the periodic
    /// seam, i.e. at distance `L/2` from its centre.
    pub fn seam_amplitude(&self, width: f64) -> f64 {
        let half = 0.5 * self.length;
        (-(half * half) / (4.0 * width * width)).exp()
    }

    pub(crate) fn check_width(&self, name: &'static str, width: f64) -> Result<()> {
        if !(width.is_finite() && width >= MIN_WIDTH_IN_CELLS * self.spacing) {
            return Err(Error::param(
                name,
                format!(
                    "width {width} is below {MIN_WIDTH_IN_CELLS} lattice spacings ({}); the kernel would alias",
                    MIN_WIDTH_IN_CELLS * self.spacing
                ),
            ));
        }
        Ok(())
    }
}

/// Outcome of snapping a requested coordinate to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snap {
    pub index: usize,
    pub requested: f64,
    pub snapped: f64,
}

impl Snap {
    pub fn distance(&self) -> f64 {
        self.snapped - self.requested
    }
}

/// Sampled single-axis wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
    pub rep: Rep,
}

impl ComplexVector {
    pub fn new(grid: Grid1D, values: Vec<Complex64>, rep: Rep) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Mismatch(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(ComplexVector { grid, values, rep })
    }

    /// `sum |psi|^2 * cell` in the current representation.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell(self.rep)
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Unnormalized periodic Gaussian amplitude `exp(-wrap(x - c)^2 / (4 w^2))`.
pub(crate) fn gaussian_profile(grid: &Grid1D, center: f64, width: f64) -> Vec<f64> {
    let inv = 1.0 / (4.0 * width * width);
    grid.positions()
        .iter()
        .map(|&x| {
            let u = grid.wrap(Rep::Position, x - center);
            (-u * u * inv).exp()
        })
        .collect()
}

/// Regularized delta: a normalized Gaussian amplitude whose density has
/// standard deviation `width`, centred at `center`.
pub fn gaussian_kernel(grid: &Grid1D, center: f64, width: f64) -> Result<ComplexVector> {
    grid.check_width("width", width)?;
    let lo = -0.5 * grid.length();
    if !(center.is_finite() && center >= lo && center < -lo) {
        return Err(Error::param(
            "center",
            format!("{center} lies outside the grid [{lo}, {})", -lo),
        ));
    }
    let profile = gaussian_profile(grid, center, width);
    let norm = (profile.iter().map(|v| v * v).sum::<f64>() * grid.spacing()).sqrt();
    let values = profile
        .into_iter()
        .map(|v| Complex64::new(v / norm, 0.0))
        .collect();
    Ok(ComplexVector {
        grid: grid.clone(),
        values,
        rep: Rep::Position,
    })
}

/// Plane wave `exp(i k0 x) / sqrt(L)` in the position representation.
pub fn plane_wave(grid: &Grid1D, k0: f64) -> ComplexVector {
    let amp = 1.0 / grid.length().sqrt();
    let values = grid
        .positions()
        .iter()
        .map(|&x| Complex64::from_polar(amp, k0 * x))
        .collect();
    ComplexVector {
        grid: grid.clone(),
        values,
        rep: Rep::Position,
    }
}

/// FFT plans for one grid, reusable across many lanes.
#[derive(Clone)]
pub(crate) struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    forward_scale: f64,
    inverse_scale: f64,
}

impl Fourier {
    pub(crate) fn new(grid: &Grid1D) -> Self {
        // The scalar planner avoids runtime SIMD dispatch so that output
        // bytes do not depend on the host CPU.
        let mut planner = FftPlannerScalar::new();
        let n = grid.n_points();
        let root = (2.0 * PI).sqrt();
        Fourier {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            forward_scale: grid.spacing() / root,
            inverse_scale: grid.momentum_spacing() / root,
        }
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Transforms `buf` (length `N`) from `from` to `to` in place.
    pub(crate) fn apply(
        &self,
        buf: &mut [Complex64],
        from: Rep,
        to: Rep,
        scratch: &mut [Complex64],
    ) {
        if from == to {
            return;
        }
        let n = self.n;
        let half = n / 2;
        // (-1)^m with m = idx - N/2; N is even so (-1)^(N/2) is a fixed sign.
        let sign = |idx: usize| -> f64 {
            if (idx + half).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        };
        match to {
            Rep::Momentum => {
                self.forward.process_with_scratch(buf, scratch);
                // lattice index idx holds m = idx - N/2, stored in FFT bin (idx + N/2) mod N
                buf.rotate_left(half);
                for (idx, v) in buf.iter_mut().enumerate() {
                    *v *= sign(idx) * self.forward_scale;
                }
            }
            Rep::Position => {
                for (idx, v) in buf.iter_mut().enumerate() {
                    *v *= sign(idx);
                }
                buf.rotate_right(half);
                self.inverse.process_with_scratch(buf, scratch);
                for v in buf.iter_mut() {
                    *v *= self.inverse_scale;
                }
            }
        }
    }
}

/// Unitary change of representation of a single-axis wavefunction.
pub fn transform_1d(vec: &ComplexVector, target: Rep) -> ComplexVector {
    if vec.rep == target {
        return vec.clone();
    }
    let fourier = Fourier::new(&vec.grid);
    let mut values = vec.values.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fourier.scratch_len()];
    fourier.apply(&mut values, vec.rep, target, &mut scratch);
    ComplexVector {
        grid: vec.grid.clone(),
        values,
        rep: target,
    }
}
