//! Postselection, probability densities and the scalar metrics built on them.

use std::f64::consts::PI;

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Grid1D, Rep, Snap};
use crate::states::{self, StateTensor};

/// Outcomes rarer than this cannot be conditioned on.
pub const NULL_PROBABILITY: f64 = 1e-14;

/// Diaphragm (or any axis) pointer outcome to postselect on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSpec {
    pub axis: String,
    pub basis: Rep,
    /// Requested outcome; snapped to the lattice of `basis`.
    #[serde(default)]
    pub value: f64,
    /// Standard deviation of a Gaussian pointer; `0` selects a sharp slice.
    #[serde(default)]
    pub smearing: f64,
}

impl PointerSpec {
    pub fn sharp(axis: &str, basis: Rep, value: f64) -> Self {
        PointerSpec {
            axis: axis.to_string(),
            basis,
            value,
            smearing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostselectionResult {
    /// Normalized conditional state on the surviving axes.
    pub state: StateTensor,
    /// Probability of the recorded outcome (density times cell for a sharp
    /// pointer, overlap probability for a smeared one).
    pub probability: f64,
    pub snap: Snap,
}

/// Projects `pointer.axis` onto the pointer outcome and renormalizes.
pub fn postselect(state: &StateTensor, pointer: &PointerSpec) -> Result<PostselectionResult> {
    let ax = state.axis_index(&pointer.axis)?;
    if state.n_axes() < 2 {
        return Err(Error::Mismatch(
            "cannot postselect the only axis of a state".into(),
        ));
    }
    let grid = state.grid().clone();
    let basis = pointer.basis;
    let cell = grid.cell(basis);
    if !(pointer.smearing == 0.0 || pointer.smearing >= cell) {
        return Err(Error::param(
            "smearing",
            format!(
                "{} must be 0 or at least one lattice cell ({cell})",
                pointer.smearing
            ),
        ));
    }
    let snap = grid.snap(basis, pointer.value)?;
    let st = states::transform_axis_index(state, ax, basis);
    let (grid, amps, mut reps, mut labels) = st.into_parts();

    let reduced = if pointer.smearing == 0.0 {
        amps.index_axis(Axis(ax), snap.index).to_owned()
    } else {
        let coords = grid.coords(basis);
        let inv = 1.0 / (4.0 * pointer.smearing * pointer.smearing);
        let profile: Vec<f64> = coords
            .iter()
            .map(|&v| {
                let u = grid.wrap(basis, v - snap.snapped);
                (-u * u * inv).exp()
            })
            .collect();
        let norm = (profile.iter().map(|p| p * p).sum::<f64>() * cell).sqrt();
        let weights: Vec<f64> = profile.iter().map(|p| p / norm * cell).collect();
        let mut out = amps.index_axis(Axis(ax), 0).mapv(|a| a * weights[0]);
        for (v, &w) in weights.iter().enumerate().skip(1) {
            out.zip_mut_with(&amps.index_axis(Axis(ax), v), |o, &a| *o += a * w);
        }
        out
    };
    reps.remove(ax);
    labels.remove(ax);
    let rest: f64 = reps.iter().map(|&r| grid.cell(r)).product();
    let mut probability = reduced.iter().map(|a| a.norm_sqr()).sum::<f64>() * rest;
    if pointer.smearing == 0.0 {
        probability *= cell;
    }
    if !(probability >= NULL_PROBABILITY) {
        return Err(Error::NullPostselection { probability });
    }
    let reduced = StateTensor::new(grid, reduced, reps, labels)?;
    Ok(PostselectionResult {
        state: states::normalize(&reduced)?,
        probability,
        snap,
    })
}

/// Real nonnegative probability density over named axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid1D,
    axes: Vec<String>,
    reps: Vec<Rep>,
    values: ArrayD<f64>,
}

impl Density {
    pub fn new(
        grid: Grid1D,
        axes: Vec<String>,
        reps: Vec<Rep>,
        values: ArrayD<f64>,
    ) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Mismatch("density without axes".into()));
        }
        if axes.len() != reps.len() || values.ndim() != axes.len() {
            return Err(Error::Mismatch(format!(
                "{} axes, {} reps, {}-d values",
                axes.len(),
                reps.len(),
                values.ndim()
            )));
        }
        if values.shape().iter().any(|&s| s != grid.n_points()) {
            return Err(Error::Mismatch(format!(
                "shape {:?} off the grid",
                values.shape()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Mismatch(
                "density entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Density {
            grid,
            axes,
            reps,
            values,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    /// Measure of one cell.
    pub fn cell(&self) -> f64 {
        self.reps.iter().map(|&r| self.grid.cell(r)).product()
    }

    /// `sum values * cell`.
    pub fn total(&self) -> f64 {
        self.values.sum() * self.cell()
    }

    pub fn axis_index(&self, label: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownAxis(label.to_string()))
    }

    pub fn coords(&self, ax: usize) -> &[f64] {
        self.grid.coords(self.reps[ax])
    }

    /// Expectation of `f` evaluated on the coordinate tuple of every cell.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut point = vec![0.0; self.axes.len()];
        let sum: f64 = self
            .values
            .indexed_iter()
            .map(|(idx, &p)| {
                for (ax, c) in point.iter_mut().enumerate() {
                    *c = self.coords(ax)[idx[ax]];
                }
                f(&point) * p
            })
            .sum();
        sum * self.cell()
    }

    /// Coordinates of the most probable cell.
    pub fn argmax(&self) -> Vec<f64> {
        let (idx, _) = self.values.indexed_iter().fold(
            (IxDyn(&vec![0; self.axes.len()]), f64::NEG_INFINITY),
            |best, (idx, &v)| {
                if v > best.1 {
                    (idx, v)
                } else {
                    best
                }
            },
        );
        (0..self.axes.len())
            .map(|ax| self.coords(ax)[idx[ax]])
            .collect()
    }

    fn same_support(&self, other: &Density) -> bool {
        self.axes == other.axes && self.reps == other.reps && self.grid == other.grid
    }

    fn renormalized(mut self) -> Self {
        let t = self.total();
        if t > 0.0 {
            self.values.mapv_inplace(|v| v / t);
        }
        self
    }
}

/// `|amplitudes|^2` after moving each axis to `targets`.
pub fn joint_density(state: &StateTensor, targets: &[Rep]) -> Result<Density> {
    let st = states::transform_all(state, targets)?;
    Density::new(
        st.grid().clone(),
        st.labels().to_vec(),
        st.reps().to_vec(),
        st.amplitudes().mapv(|a: Complex64| a.norm_sqr()),
    )
}

/// Sums out every axis not in `keep`; kept axes retain their order.
pub fn marginal(density: &Density, keep: &[&str]) -> Result<Density> {
    if keep.is_empty() {
        return Err(Error::Mismatch(
            "marginal must keep at least one axis".into(),
        ));
    }
    for k in keep {
        density.axis_index(k)?;
    }
    if keep.len() == density.axes.len() {
        return Ok(density.clone());
    }
    let mut values = density.values.clone();
    let mut axes = density.axes.clone();
    let mut reps = density.reps.clone();
    for ax in (0..density.axes.len()).rev() {
        if !keep.contains(&density.axes[ax].as_str()) {
            let cell = density.grid.cell(reps[ax]);
            values = values.sum_axis(Axis(ax)) * cell;
            axes.remove(ax);
            reps.remove(ax);
        }
    }
    Ok(Density::new(density.grid.clone(), axes, reps, values)?.renormalized())
}

/// Density of the remaining axes given `axis = value` (snapped to the lattice).
pub fn conditional(density: &Density, axis: &str, value: f64) -> Result<Density> {
    let ax = density.axis_index(axis)?;
    if density.axes.len() < 2 {
        return Err(Error::Mismatch(
            "conditioning needs at least two axes".into(),
        ));
    }
    let snap = density.grid.snap(density.reps[ax], value)?;
    let slice = density.values.index_axis(Axis(ax), snap.index).to_owned();
    let mut axes = density.axes.clone();
    let mut reps = density.reps.clone();
    axes.remove(ax);
    let given_rep = reps.remove(ax);
    let rest: f64 = reps.iter().map(|&r| density.grid.cell(r)).product();
    let mass = slice.sum() * rest;
    if !(mass * density.grid.cell(given_rep) >= NULL_PROBABILITY) {
        return Err(Error::NullPostselection {
            probability: mass * density.grid.cell(given_rep),
        });
    }
    Density::new(density.grid.clone(), axes, reps, slice / mass)
}

/// `1/2 sum |d1 - d2| * cell`.
pub fn total_variation(d1: &Density, d2: &Density) -> Result<f64> {
    if !d1.same_support(d2) {
        return Err(Error::Mismatch(format!(
            "densities over {:?}/{:?} and {:?}/{:?}",
            d1.axes, d1.reps, d2.axes, d2.reps
        )));
    }
    let sum: f64 = d1
        .values
        .iter()
        .zip(d2.values.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * sum * d1.cell())
}

/// Total variation distance from the uniform density on the same support.
pub fn flatness_tv(density: &Density) -> f64 {
    let cells = density.values.len() as f64;
    let cell = density.cell();
    0.5 * density
        .values
        .iter()
        .map(|&p| (p * cell - 1.0 / cells).abs())
        .sum::<f64>()
}

/// Marginal density of one axis in the requested basis.
pub fn pointer_spectrum(state: &StateTensor, axis: &str, basis: Rep) -> Result<Density> {
    let ax = state.axis_index(axis)?;
    let st = states::transform_axis_index(state, ax, basis);
    let values = states::axis_marginal(&st, ax);
    let n = values.len();
    Density::new(
        st.grid().clone(),
        vec![axis.to_string()],
        vec![basis],
        ArrayD::from_shape_vec(IxDyn(&[n]), values).map_err(|e| Error::Mismatch(e.to_string()))?,
    )
}

/// Summary of a two-axis joint density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Slope of axis 0 against axis 1.
    pub ridge_slope: f64,
    /// Value of the ridge line at axis 1 = 0, reduced to the central period.
    pub ridge_offset: f64,
    pub pearson: f64,
    pub flatness_tv: f64,
}

/// Columns whose weight falls below this fraction of the heaviest one are
/// left out of the line fit.
const COLUMN_FLOOR: f64 = 1e-12;

/// Fits the line `axis0 = slope * axis1 + offset` through the conditional
/// means of axis 0.
///
/// Both axes are periodic, so conditional means are circular means; they are
/// unwrapped outward from the heaviest column and each column is weighted by
/// its mass times its resultant length. A density with no concentrated
/// column (e.g. uniform) gets slope 0 and its plain mean as offset. The
/// correlation coefficient is computed after unwrapping every cell onto the
/// fitted line's sheet.
pub fn ridge_fit(density: &Density) -> Result<CorrelationReport> {
    if density.axes.len() != 2 {
        return Err(Error::Mismatch(format!(
            "ridge fit needs 2 axes, got {}",
            density.axes.len()
        )));
    }
    let grid = &density.grid;
    let (rep_y, rep_u) = (density.reps[0], density.reps[1]);
    let ys = grid.coords(rep_y);
    let us = grid.coords(rep_u);
    let period = grid.period(rep_y);
    let p = &density.values;
    let n = grid.n_points();

    let occupied = p.iter().filter(|&&v| v > 0.0).count();
    let weights: Vec<f64> = (0..n).map(|j| p.index_axis(Axis(1), j).sum()).collect();
    if occupied <= 1 || weights.iter().filter(|&&w| w > 0.0).count() < 2 {
        return Err(Error::Degenerate(
            "support spans fewer than two cells/columns".into(),
        ));
    }

    let phases: Vec<Complex64> = ys
        .iter()
        .map(|&y| Complex64::from_polar(1.0, 2.0 * PI * (y - ys[0]) / period))
        .collect();
    let mut means = vec![0.0; n];
    let mut q = vec![0.0; n];
    for j in 0..n {
        if weights[j] <= 0.0 {
            continue;
        }
        let z: Complex64 = p
            .index_axis(Axis(1), j)
            .iter()
            .zip(&phases)
            .map(|(&v, &e)| e * v)
            .sum();
        means[j] = ys[0] + z.arg() * period / (2.0 * PI);
        q[j] = z.norm();
    }
    let q_max = q.iter().cloned().fold(0.0, f64::max);
    let total_w: f64 = weights.iter().sum();
    let included: Vec<bool> = q
        .iter()
        .map(|&v| v > COLUMN_FLOOR * q_max && v > 0.0)
        .collect();
    let concentrated =
        q.iter().sum::<f64>() > 1e-9 * total_w && included.iter().filter(|&&b| b).count() >= 2;

    let (slope, offset) = if concentrated {
        let start = (0..n).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
        let mut unwrap_from = |range: &mut dyn Iterator<Item = usize>| {
            let mut prev = means[start];
            for j in range {
                if included[j] {
                    means[j] += period * ((prev - means[j]) / period).round();
                    prev = means[j];
                }
            }
        };
        unwrap_from(&mut (start + 1..n));
        unwrap_from(&mut (0..start).rev());
        let sw: f64 = (0..n).filter(|&j| included[j]).map(|j| q[j]).sum();
        let mu = (0..n)
            .filter(|&j| included[j])
            .map(|j| q[j] * us[j])
            .sum::<f64>()
            / sw;
        let my = (0..n)
            .filter(|&j| included[j])
            .map(|j| q[j] * means[j])
            .sum::<f64>()
            / sw;
        let (mut suu, mut suy) = (0.0, 0.0);
        for j in (0..n).filter(|&j| included[j]) {
            suu += q[j] * (us[j] - mu) * (us[j] - mu);
            suy += q[j] * (us[j] - mu) * (means[j] - my);
        }
        let slope = if suu > 0.0 { suy / suu } else { 0.0 };
        (slope, grid.wrap(rep_y, my - slope * mu))
    } else {
        let mean = density.expect(|c| c[0]);
        (0.0, mean)
    };

    // weighted Pearson on line-unwrapped coordinates
    let (mut sw, mut su, mut sy) = (0.0, 0.0, 0.0);
    let mut cells = Vec::with_capacity(occupied);
    for ((i, j), &w) in p.indexed_iter().map(|(idx, v)| ((idx[0], idx[1]), v)) {
        if w <= 0.0 {
            continue;
        }
        let line = offset + slope * us[j];
        let y = line + grid.wrap(rep_y, ys[i] - line);
        cells.push((w, us[j], y));
        sw += w;
        su += w * us[j];
        sy += w * y;
    }
    let (mu, my) = (su / sw, sy / sw);
    let (mut cuu, mut cyy, mut cuy) = (0.0, 0.0, 0.0);
    for &(w, u, y) in &cells {
        cuu += w * (u - mu) * (u - mu);
        cyy += w * (y - my) * (y - my);
        cuy += w * (u - mu) * (y - my);
    }
    let pearson = if cuu > 0.0 && cyy > 0.0 {
        (cuy / (cuu * cyy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    Ok(CorrelationReport {
        ridge_slope: slope,
        ridge_offset: offset,
        pearson,
        flatness_tv: flatness_tv(density),
    })
}
