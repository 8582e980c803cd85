//! Dense multi-particle states and the two preparation procedures.
//!
//! The EPR pair is a ridge in the relative coordinate `x1 - x2` with uniform
//! centre-of-mass weight over the periodic grid. The diaphragm state couples
//! two particles to a third, movable subsystem through two regularized deltas
//! and carries the diaphragm's initial momentum as a phase `exp(i K0 a)`.
//!
//! All differences of coordinates are taken on the periodic lattice (minimal
//! image), which keeps both constructions exactly covariant under a common
//! lattice translation.

use std::f64::consts::SQRT_2;

use ndarray::{ArrayD, Axis, IxDyn, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{gaussian_profile, ComplexVector, Fourier, Grid1D, Rep, SEAM_TOLERANCE};

pub const PARTICLE1: &str = "particle1";
pub const PARTICLE2: &str = "particle2";
pub const DIAPHRAGM: &str = "diaphragm";

/// Largest supported number of subsystems.
pub const MAX_AXES: usize = 3;

/// Normalized complex amplitudes over one grid axis per subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor {
    grid: Grid1D,
    amplitudes: ArrayD<Complex64>,
    reps: Vec<Rep>,
    labels: Vec<String>,
}

impl StateTensor {
    /// Wraps raw amplitudes without normalizing them.
    pub fn new(
        grid: Grid1D,
        amplitudes: ArrayD<Complex64>,
        reps: Vec<Rep>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n_axes = amplitudes.ndim();
        if n_axes == 0 || n_axes > MAX_AXES {
            return Err(Error::Mismatch(format!(
                "{n_axes} axes; between 1 and {MAX_AXES} are supported"
            )));
        }
        if amplitudes.shape().iter().any(|&s| s != grid.n_points()) {
            return Err(Error::Mismatch(format!(
                "tensor shape {:?} does not match a {}-point grid",
                amplitudes.shape(),
                grid.n_points()
            )));
        }
        if reps.len() != n_axes || labels.len() != n_axes {
            return Err(Error::Mismatch(format!(
                "{n_axes} axes but {} reps and {} labels",
                reps.len(),
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Mismatch(format!("duplicate axis label `{l}`")));
            }
        }
        Ok(StateTensor {
            grid,
            amplitudes,
            reps,
            labels,
        })
    }

    /// Single-axis state from a sampled wavefunction.
    pub fn from_vector(vec: &ComplexVector, label: &str) -> Result<Self> {
        let amps = ArrayD::from_shape_vec(IxDyn(&[vec.grid.n_points()]), vec.values.clone())
            .map_err(|e| Error::Mismatch(e.to_string()))?;
        StateTensor::new(
            vec.grid.clone(),
            amps,
            vec![vec.rep],
            vec![label.to_string()],
        )
    }

    /// Tensor product of single-axis factors, in order.
    pub fn product(factors: &[(&str, &ComplexVector)]) -> Result<Self> {
        let (_, first) = factors
            .first()
            .ok_or_else(|| Error::Mismatch("empty product".into()))?;
        let grid = first.grid.clone();
        let n = grid.n_points();
        let shape = vec![n; factors.len()];
        let amps = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            factors
                .iter()
                .enumerate()
                .map(|(ax, (_, f))| f.values[idx[ax]])
                .product::<Complex64>()
        });
        let reps = factors.iter().map(|(_, f)| f.rep).collect();
        let labels = factors.iter().map(|(l, _)| l.to_string()).collect();
        StateTensor::new(grid, amps, reps, labels)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &ArrayD<Complex64> {
        &self.amplitudes
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_axes(&self) -> usize {
        self.labels.len()
    }

    pub fn axis_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownAxis(label.to_string()))
    }

    /// Volume of one tensor cell in the current mixed measure.
    pub fn cell_volume(&self) -> f64 {
        self.reps.iter().map(|&r| self.grid.cell(r)).product()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn scaled(&self, factor: Complex64) -> StateTensor {
        let mut out = self.clone();
        out.amplitudes.mapv_inplace(|a| a * factor);
        out
    }

    /// Reorders axes; `order[i]` names the old axis that becomes axis `i`.
    pub fn permuted_axes(&self, order: &[usize]) -> Result<StateTensor> {
        let mut seen = vec![false; self.n_axes()];
        if order.len() != self.n_axes()
            || order
                .iter()
                .any(|&o| o >= seen.len() || std::mem::replace(&mut seen[o], true))
        {
            return Err(Error::Mismatch(format!(
                "{order:?} is not a permutation of the axes"
            )));
        }
        let amplitudes = self
            .amplitudes
            .clone()
            .permuted_axes(IxDyn(order))
            .as_standard_layout()
            .into_owned();
        Ok(StateTensor {
            grid: self.grid.clone(),
            amplitudes,
            reps: order.iter().map(|&o| self.reps[o]).collect(),
            labels: order.iter().map(|&o| self.labels[o].clone()).collect(),
        })
    }

    pub(crate) fn into_parts(self) -> (Grid1D, ArrayD<Complex64>, Vec<Rep>, Vec<String>) {
        (self.grid, self.amplitudes, self.reps, self.labels)
    }
}

/// Rescales to unit norm in the current mixed measure.
pub fn normalize(state: &StateTensor) -> Result<StateTensor> {
    let norm = state.norm_sqr();
    if !(norm.is_finite() && norm > f64::MIN_POSITIVE) {
        return Err(Error::ZeroNorm);
    }
    Ok(state.scaled(Complex64::new(1.0 / norm.sqrt(), 0.0)))
}

/// Applies the 1-D transform along the named axis only.
pub fn transform_axis(state: &StateTensor, axis: &str, target: Rep) -> Result<StateTensor> {
    let ax = state.axis_index(axis)?;
    Ok(transform_axis_index(state, ax, target))
}

pub(crate) fn transform_axis_index(state: &StateTensor, ax: usize, target: Rep) -> StateTensor {
    let from = state.reps[ax];
    if from == target {
        return state.clone();
    }
    let fourier = Fourier::new(&state.grid);
    let mut out = state.clone();
    let n = state.grid.n_points();
    let scratch_len = fourier.scratch_len();
    Zip::from(out.amplitudes.lanes_mut(Axis(ax))).par_for_each(|mut lane| {
        let mut buf: Vec<Complex64> = lane.iter().copied().collect();
        debug_assert_eq!(buf.len(), n);
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        fourier.apply(&mut buf, from, target, &mut scratch);
        for (dst, src) in lane.iter_mut().zip(buf) {
            *dst = src;
        }
    });
    out.reps[ax] = target;
    out
}

/// Transforms every axis whose representation differs from `targets`.
pub fn transform_all(state: &StateTensor, targets: &[Rep]) -> Result<StateTensor> {
    if targets.len() != state.n_axes() {
        return Err(Error::Mismatch(format!(
            "{} target reps for {} axes",
            targets.len(),
            state.n_axes()
        )));
    }
    let mut out = state.clone();
    for (ax, &rep) in targets.iter().enumerate() {
        out = transform_axis_index(&out, ax, rep);
    }
    Ok(out)
}

/// Marginal probability density of one axis in its current representation.
pub(crate) fn axis_marginal(state: &StateTensor, ax: usize) -> Vec<f64> {
    let others: f64 = state
        .reps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ax)
        .map(|(_, &r)| state.grid.cell(r))
        .product();
    state
        .amplitudes
        .lanes(Axis(ax))
        .into_iter()
        .fold(vec![0.0; state.grid.n_points()], |mut acc, lane| {
            for (a, v) in acc.iter_mut().zip(lane.iter()) {
                *a += v.norm_sqr();
            }
            acc
        })
        .into_iter()
        .map(|v| v * others)
        .collect()
}

/// `E[value^moment]` of one axis, measured in the `observable` basis.
pub fn expectation(state: &StateTensor, axis: &str, observable: Rep, moment: u32) -> Result<f64> {
    let ax = state.axis_index(axis)?;
    let st = transform_axis_index(state, ax, observable);
    let marginal = axis_marginal(&st, ax);
    let cell = st.grid.cell(observable);
    Ok(st
        .grid
        .coords(observable)
        .iter()
        .zip(&marginal)
        .map(|(&v, &p)| v.powi(moment as i32) * p * cell)
        .sum())
}

/// `E[(x_a - x_b)^moment]` with the difference taken as the minimal periodic
/// image; both axes are measured in position.
pub fn difference_moment(
    state: &StateTensor,
    axis_a: &str,
    axis_b: &str,
    moment: u32,
) -> Result<f64> {
    let a = state.axis_index(axis_a)?;
    let b = state.axis_index(axis_b)?;
    if a == b {
        return Err(Error::Mismatch("difference of an axis with itself".into()));
    }
    let st = transform_axis_index(
        &transform_axis_index(state, a, Rep::Position),
        b,
        Rep::Position,
    );
    let grid = &st.grid;
    let xs = grid.positions();
    let cell = st.cell_volume();
    let total = st
        .amplitudes
        .indexed_iter()
        .map(|(idx, v)| {
            let r = grid.wrap(Rep::Position, xs[idx[a]] - xs[idx[b]]);
            r.powi(moment as i32) * v.norm_sqr()
        })
        .sum::<f64>();
    Ok(total * cell)
}

/// Transverse profile of an incident particle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Envelope {
    /// Constant profile over the whole periodic grid.
    #[default]
    Unit,
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl Envelope {
    fn profile(&self, grid: &Grid1D) -> Vec<f64> {
        match *self {
            Envelope::Unit => vec![1.0; grid.n_points()],
            Envelope::Gaussian { center, width } => gaussian_profile(grid, center, width),
        }
    }

    fn validate(&self, grid: &Grid1D, notes: &mut Vec<String>, which: usize) -> Result<()> {
        if let Envelope::Gaussian { center, width } = *self {
            grid.check_width("envelope.width", width)?;
            if !center.is_finite() {
                return Err(Error::param("envelope.center", "must be finite"));
            }
            let edge = grid
                .wrap(Rep::Position, -0.5 * grid.length() - center)
                .abs();
            let leak = (-(edge * edge) / (4.0 * width * width)).exp();
            if leak > SEAM_TOLERANCE {
                notes.push(format!(
                    "wrapped: envelope {which} (gaussian, centre {center}, width {width}) has relative amplitude {leak:.3e} at the grid edge"
                ));
            }
        }
        Ok(())
    }
}

fn default_d() -> f64 {
    3.0
}

fn default_sigma() -> f64 {
    0.15
}

/// Parameters shared by both preparations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreparationParams {
    /// Slit separation.
    #[serde(default = "default_d")]
    pub d: f64,
    /// Width of the regularized deltas.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Initial diaphragm momentum; snapped to the lattice.
    #[serde(default, rename = "K0", alias = "k0")]
    pub k0: f64,
    #[serde(default)]
    pub envelopes: [Envelope; 2],
}

impl Default for PreparationParams {
    fn default() -> Self {
        PreparationParams {
            d: default_d(),
            sigma: default_sigma(),
            k0: 0.0,
            envelopes: [Envelope::Unit; 2],
        }
    }
}

/// Parameters after lattice snapping, with any warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParams {
    pub params: PreparationParams,
    pub notes: Vec<String>,
}

impl PreparationParams {
    /// Standard deviation of `x1 - x2` once two deltas are composed.
    pub fn ridge_width(&self) -> f64 {
        SQRT_2 * self.sigma
    }

    /// Validates against `grid` and snaps `K0` to the momentum lattice.
    pub fn resolve(&self, grid: &Grid1D) -> Result<ResolvedParams> {
        let mut notes = Vec::new();
        grid.check_width("sigma", self.sigma)?;
        if !self.d.is_finite() {
            return Err(Error::param("d", "must be finite"));
        }
        let half = 0.5 * grid.length();
        // distance from the ridge centre to the seam of the relative coordinate
        let clearance = half - self.d.abs();
        let w = self.ridge_width();
        if clearance <= 0.0 || (-(clearance * clearance) / (4.0 * w * w)).exp() > SEAM_TOLERANCE {
            return Err(Error::Wrapped(format!(
                "|d| = {} leaves {clearance} before the periodic seam at L/2 = {half}",
                self.d.abs()
            )));
        }
        let snap = grid.snap(Rep::Momentum, self.k0)?;
        if snap.distance() != 0.0 {
            notes.push(format!(
                "snapped K0 from {} to lattice momentum {} (distance {:e})",
                snap.requested,
                snap.snapped,
                snap.distance()
            ));
        }
        for (i, env) in self.envelopes.iter().enumerate() {
            env.validate(grid, &mut notes, i + 1)?;
        }
        Ok(ResolvedParams {
            params: PreparationParams {
                k0: snap.snapped,
                ..*self
            },
            notes,
        })
    }
}

/// Periodic Gaussian amplitude evaluated on a wrapped displacement.
fn ridge(grid: &Grid1D, delta: f64, width: f64) -> f64 {
    let u = grid.wrap(Rep::Position, delta);
    (-u * u / (4.0 * width * width)).exp()
}

/// EPR pair: amplitude `delta(x1 - x2 - d) Phi1(x1) Phi2(x2)` with the delta
/// regularized to the composed ridge width, both axes in position.
pub fn build_epr_state(grid: &Grid1D, params: &PreparationParams) -> Result<StateTensor> {
    let p = params.resolve(grid)?.params;
    let xs = grid.positions();
    let env1 = p.envelopes[0].profile(grid);
    let env2 = p.envelopes[1].profile(grid);
    let width = p.ridge_width();
    let n = grid.n_points();
    let amps = ArrayD::from_shape_fn(IxDyn(&[n, n]), |idx| {
        let (i, j) = (idx[0], idx[1]);
        Complex64::new(
            ridge(grid, xs[i] - xs[j] - p.d, width) * env1[i] * env2[j],
            0.0,
        )
    });
    let state = StateTensor::new(
        grid.clone(),
        amps,
        vec![Rep::Position; 2],
        vec![PARTICLE1.into(), PARTICLE2.into()],
    )?;
    normalize(&state)
}

/// Particle-particle-diaphragm state
/// `delta(x1 - a) delta(x2 + d - a) Phi1(x1) Phi2(x2) exp(i K0 a)`.
pub fn build_bohr_state(grid: &Grid1D, params: &PreparationParams) -> Result<StateTensor> {
    let p = params.resolve(grid)?.params;
    let xs = grid.positions();
    let n = grid.n_points();
    let env1 = p.envelopes[0].profile(grid);
    let env2 = p.envelopes[1].profile(grid);
    // first[i][a] = delta(x1_i - a), second[j][a] = delta(x2_j + d - a)
    let table = |shift: f64, env: &[f64]| -> Vec<f64> {
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for a in 0..n {
                t[i * n + a] = ridge(grid, xs[i] + shift - xs[a], p.sigma) * env[i];
            }
        }
        t
    };
    let first = table(0.0, &env1);
    let second = table(p.d, &env2);
    let phase: Vec<Complex64> = xs
        .iter()
        .map(|&a| Complex64::from_polar(1.0, p.k0 * a))
        .collect();
    let amps = ArrayD::from_shape_fn(IxDyn(&[n, n, n]), |idx| {
        let (i, j, a) = (idx[0], idx[1], idx[2]);
        phase[a] * (first[i * n + a] * second[j * n + a])
    });
    let state = StateTensor::new(
        grid.clone(),
        amps,
        vec![Rep::Position; 3],
        vec![PARTICLE1.into(), PARTICLE2.into(), DIAPHRAGM.into()],
    )?;
    normalize(&state)
}
