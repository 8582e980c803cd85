//! Scripted scenarios: the ideal pair, the diaphragm postselected on
//! momentum or on position, their comparison on Bob's side, and the table of
//! counterfactual predictions.
//!
//! Alice always measures particle 1 and Bob particle 2. "Measuring in a
//! basis" means reading the marginal or conditional density in that basis;
//! there is no optical model of the instruments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{make_grid, Grid1D, Rep};
use crate::measurement::{
    conditional, flatness_tv, joint_density, marginal, pointer_spectrum, postselect, ridge_fit,
    total_variation, CorrelationReport, Density, PointerSpec, NULL_PROBABILITY,
};
use crate::states::{
    build_bohr_state, build_epr_state, Envelope, PreparationParams, StateTensor, DIAPHRAGM,
    PARTICLE1, PARTICLE2,
};

/// Conditional mass at or above which a prediction counts as certain.
pub const REALITY_THRESHOLD: f64 = 0.9;

/// Envelope width used when the disturbance run is not given envelopes.
pub const DISTURBANCE_ENVELOPE_WIDTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    EprIdeal,
    BohrCorrected,
    BohrFlawed,
    Disturbance,
    Counterfactual,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::EprIdeal,
        Scenario::BohrCorrected,
        Scenario::BohrFlawed,
        Scenario::Disturbance,
        Scenario::Counterfactual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::EprIdeal => "epr_ideal",
            Scenario::BohrCorrected => "bohr_corrected",
            Scenario::BohrFlawed => "bohr_flawed",
            Scenario::Disturbance => "disturbance",
            Scenario::Counterfactual => "counterfactual",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_points")]
    pub n_points: usize,
    #[serde(default = "GridSpec::default_length")]
    pub length: f64,
}

impl GridSpec {
    fn default_points() -> usize {
        128
    }

    fn default_length() -> f64 {
        20.0
    }

    pub fn build(&self) -> Result<Grid1D> {
        make_grid(self.n_points, self.length)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_points: Self::default_points(),
            length: Self::default_length(),
        }
    }
}

/// Everything a scenario needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub grid: GridSpec,
    pub preparation: PreparationParams,
    /// Diaphragm pointer of the scenario. `None` picks `K = K0` for the
    /// momentum run and `X = 0` for the position run.
    pub pointer: Option<PointerSpec>,
    /// Position pointer of the second run in the disturbance comparison.
    pub compare_pointer: Option<PointerSpec>,
    pub alice_basis: Rep,
    pub bob_basis: Rep,
    /// Densities or correlations to keep in the report; empty keeps all.
    pub outputs: Vec<String>,
    /// Scenario whose densities feed the counterfactual table.
    pub counterfactual_source: Scenario,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            grid: GridSpec::default(),
            preparation: PreparationParams::default(),
            pointer: None,
            compare_pointer: None,
            alice_basis: Rep::Position,
            bob_basis: Rep::Momentum,
            outputs: Vec::new(),
            counterfactual_source: Scenario::EprIdeal,
        }
    }
}

/// Gaussian envelopes centred on the two slits' images of a diaphragm at 0.
pub fn disturbance_envelopes(d: f64) -> [Envelope; 2] {
    [
        Envelope::Gaussian {
            center: 0.0,
            width: DISTURBANCE_ENVELOPE_WIDTH,
        },
        Envelope::Gaussian {
            center: -d,
            width: DISTURBANCE_ENVELOPE_WIDTH,
        },
    ]
}

impl ProtocolConfig {
    /// Pointer used by the run postselecting the diaphragm in `basis`.
    pub fn pointer_for(&self, basis: Rep) -> Result<PointerSpec> {
        let configured = match basis {
            Rep::Momentum => self.pointer.as_ref(),
            Rep::Position => match (&self.compare_pointer, &self.pointer) {
                (Some(p), _) => Some(p),
                (None, Some(p)) if p.basis == Rep::Position => Some(p),
                _ => None,
            },
        };
        match configured {
            Some(p) if p.basis != basis => Err(Error::param(
                "pointer.basis",
                format!("this run postselects in {basis}, pointer is in {}", p.basis),
            )),
            Some(p) if p.axis != DIAPHRAGM => Err(Error::UnknownAxis(format!(
                "{} (only the {DIAPHRAGM} carries a pointer)",
                p.axis
            ))),
            Some(p) => Ok(p.clone()),
            None => Ok(PointerSpec::sharp(
                DIAPHRAGM,
                basis,
                match basis {
                    Rep::Momentum => self.preparation.k0,
                    Rep::Position => 0.0,
                },
            )),
        }
    }
}

/// One line of the prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRow {
    pub basis: Rep,
    /// Alice's (snapped) outcome for particle 1.
    pub alice_outcome: f64,
    /// Bob's value inferred from Alice's outcome.
    pub predicted_bob: f64,
    /// Most probable Bob value given Alice's outcome.
    pub bob_peak: Option<f64>,
    /// Conditional probability of Bob landing in the window around the
    /// prediction; `None` when Alice's outcome never occurs.
    pub conditional_mass: Option<f64>,
    /// Mass the same window would hold under a uniform density.
    pub uniform_baseline: f64,
    pub element_of_reality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolReport {
    pub scenario: Scenario,
    #[serde(skip)]
    pub densities: BTreeMap<String, Density>,
    pub correlations: BTreeMap<String, CorrelationReport>,
    pub postselection_probability: f64,
    pub disturbance: Option<f64>,
    pub scalars: BTreeMap<String, f64>,
    pub counterfactuals: Vec<CounterfactualRow>,
    pub notes: Vec<String>,
}

impl ProtocolReport {
    fn new(scenario: Scenario) -> Self {
        ProtocolReport {
            scenario,
            densities: BTreeMap::new(),
            correlations: BTreeMap::new(),
            postselection_probability: 1.0,
            disturbance: None,
            scalars: BTreeMap::new(),
            counterfactuals: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn density(&self, name: &str) -> Result<&Density> {
        self.densities
            .get(name)
            .ok_or_else(|| Error::Config(format!("report has no density `{name}`")))
    }

    pub fn correlation(&self, name: &str) -> Result<&CorrelationReport> {
        self.correlations
            .get(name)
            .ok_or_else(|| Error::Config(format!("report has no correlation `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("report has no scalar `{name}`")))
    }

    /// Drops everything not listed in `outputs`; errors on names never produced.
    fn restrict(mut self, outputs: &[String]) -> Result<Self> {
        if outputs.is_empty() {
            return Ok(self);
        }
        for name in outputs {
            if !self.densities.contains_key(name)
                && !self.correlations.contains_key(name)
                && !self.scalars.contains_key(name)
            {
                return Err(Error::Config(format!(
                    "output `{name}` is not produced by {}",
                    self.scenario
                )));
            }
        }
        self.densities.retain(|k, _| outputs.contains(k));
        self.correlations.retain(|k, _| outputs.contains(k));
        self.scalars.retain(|k, _| outputs.contains(k));
        Ok(self)
    }
}

struct Prepared {
    grid: Grid1D,
    params: PreparationParams,
    notes: Vec<String>,
}

fn prepare(config: &ProtocolConfig) -> Result<Prepared> {
    let grid = config.grid.build()?;
    let resolved = config.preparation.resolve(&grid)?;
    Ok(Prepared {
        grid,
        params: resolved.params,
        notes: resolved.notes,
    })
}

/// Position and momentum joint densities of a two-particle state, with
/// their ridge fits.
fn add_joint_densities(report: &mut ProtocolReport, pair: &StateTensor) -> Result<()> {
    for (name, rep) in [("position", Rep::Position), ("momentum", Rep::Momentum)] {
        let d = joint_density(pair, &[rep, rep])?;
        report.correlations.insert(name.into(), ridge_fit(&d)?);
        report.densities.insert(name.into(), d);
    }
    Ok(())
}

/// Five lattice outcomes evenly spread over the central half of the support.
pub fn sampled_outcomes(grid: &Grid1D, rep: Rep) -> Result<Vec<f64>> {
    let q = grid.period(rep) / 4.0;
    [-q, -q / 2.0, 0.0, q / 2.0, q]
        .iter()
        .map(|&v| grid.snap(rep, v).map(|s| s.snapped))
        .collect()
}

/// Half-width of the prediction window in `rep`.
fn window(grid: &Grid1D, params: &PreparationParams, rep: Rep) -> f64 {
    match rep {
        Rep::Position => 2.0 * params.ridge_width(),
        Rep::Momentum => 2.0 * grid.momentum_spacing(),
    }
}

/// Probability of a 1-axis density inside `[center - half, center + half]`
/// on the circle, each cell counted by its fractional overlap.
fn window_mass(density: &Density, center: f64, half: f64) -> f64 {
    let rep = density.reps()[0];
    let grid = density.grid();
    let h = grid.cell(rep);
    density
        .coords(0)
        .iter()
        .zip(density.values().iter())
        .map(|(&c, &p)| {
            let u = grid.wrap(rep, c - center);
            let overlap = ((u + 0.5 * h).min(half) - (u - 0.5 * h).max(-half)).max(0.0);
            p * overlap
        })
        .sum()
}

/// Prediction table built from the joint densities of `report`.
///
/// `momentum_offset` is the predicted `k1 + k2`.
fn counterfactual_rows(
    report: &ProtocolReport,
    params: &PreparationParams,
    momentum_offset: f64,
) -> Result<Vec<CounterfactualRow>> {
    let mut rows = Vec::new();
    for (name, rep) in [("position", Rep::Position), ("momentum", Rep::Momentum)] {
        let joint = report.density(name)?;
        let grid = joint.grid();
        let alice = marginal(joint, &[PARTICLE1])?;
        let half = window(grid, params, rep);
        let uniform_baseline = 2.0 * half / grid.period(rep);
        for outcome in sampled_outcomes(grid, rep)? {
            let predicted = match rep {
                Rep::Position => grid.wrap(rep, outcome - params.d),
                Rep::Momentum => grid.wrap(rep, momentum_offset - outcome),
            };
            let idx = grid.snap(rep, outcome)?.index;
            let p_alice = alice.values()[[idx].as_slice()] * grid.cell(rep);
            let (bob_peak, mass) = if p_alice >= NULL_PROBABILITY {
                let bob = conditional(joint, PARTICLE1, outcome)?;
                (
                    Some(bob.argmax()[0]),
                    Some(window_mass(&bob, predicted, half)),
                )
            } else {
                (None, None)
            };
            rows.push(CounterfactualRow {
                basis: rep,
                alice_outcome: outcome,
                predicted_bob: predicted,
                bob_peak,
                conditional_mass: mass,
                uniform_baseline,
                element_of_reality: mass.is_some_and(|m| m >= REALITY_THRESHOLD),
            });
        }
    }
    Ok(rows)
}

/// EPR pair: ridges in both bases and the prediction table for sampled
/// Alice outcomes.
pub fn run_epr_ideal(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let prep = prepare(config)?;
    let state = build_epr_state(&prep.grid, &prep.params)?;
    let mut report = ProtocolReport::new(Scenario::EprIdeal);
    report.notes = prep.notes;
    add_joint_densities(&mut report, &state)?;
    report.counterfactuals = counterfactual_rows(&report, &prep.params, 0.0)?;
    report.restrict(&config.outputs)
}

struct Postselected {
    pair: StateTensor,
    probability: f64,
    pointer_value: f64,
}

fn postselect_bohr(
    state: &StateTensor,
    config: &ProtocolConfig,
    basis: Rep,
    notes: &mut Vec<String>,
) -> Result<Postselected> {
    let pointer = config.pointer_for(basis)?;
    let post = postselect(state, &pointer)?;
    if post.snap.distance() != 0.0 {
        notes.push(format!(
            "snapped {basis} pointer from {} to {} (distance {:e})",
            post.snap.requested,
            post.snap.snapped,
            post.snap.distance()
        ));
    }
    Ok(Postselected {
        pair: post.state,
        probability: post.probability,
        pointer_value: post.snap.snapped,
    })
}

/// Mass-weighted mean flatness of `x1` given each `k2` column of the mixed
/// density.
fn mixed_flatness(mixed: &Density) -> Result<f64> {
    let bob = marginal(mixed, &[PARTICLE2])?;
    let cell = bob.cell();
    let mut acc = 0.0;
    let mut weight = 0.0;
    for (&k, &p) in bob.coords(0).iter().zip(bob.values().iter()) {
        let w = p * cell;
        if w < NULL_PROBABILITY {
            continue;
        }
        acc += w * flatness_tv(&conditional(mixed, PARTICLE2, k)?);
        weight += w;
    }
    Ok(acc / weight)
}

/// Diaphragm postselected on momentum `K`, then Alice and Bob measure
/// independently.
pub fn run_bohr_corrected(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let prep = prepare(config)?;
    let state = build_bohr_state(&prep.grid, &prep.params)?;
    let mut report = ProtocolReport::new(Scenario::BohrCorrected);
    report.notes = prep.notes;
    let post = postselect_bohr(&state, config, Rep::Momentum, &mut report.notes)?;
    report.postselection_probability = post.probability;
    add_joint_densities(&mut report, &post.pair)?;

    let k_sum = report.density("momentum")?.expect(|k| k[0] + k[1]);
    report
        .scalars
        .insert("pointer_value".into(), post.pointer_value);
    report.scalars.insert("momentum_sum_mean".into(), k_sum);
    report.scalars.insert(
        "momentum_sum_expected".into(),
        prep.params.k0 - post.pointer_value,
    );

    let mixed = joint_density(&post.pair, &[config.alice_basis, config.bob_basis])?;
    report
        .scalars
        .insert("mixed_alice_flatness".into(), mixed_flatness(&mixed)?);
    report.densities.insert("mixed".into(), mixed);
    report.restrict(&config.outputs)
}

/// Peak location and standard deviation (about the peak, minimal image) of
/// one axis.
fn peak_and_spread(density: &Density) -> (f64, f64) {
    let peak = density.argmax()[0];
    let rep = density.reps()[0];
    let grid = density.grid().clone();
    let var = density.expect(|c| {
        let u = grid.wrap(rep, c[0] - peak);
        u * u
    });
    (peak, var.sqrt())
}

/// Diaphragm postselected on position `X`.
pub fn run_bohr_flawed(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let prep = prepare(config)?;
    let state = build_bohr_state(&prep.grid, &prep.params)?;
    let mut report = ProtocolReport::new(Scenario::BohrFlawed);
    report.notes = prep.notes;
    let post = postselect_bohr(&state, config, Rep::Position, &mut report.notes)?;
    report.postselection_probability = post.probability;
    add_joint_densities(&mut report, &post.pair)?;

    report
        .scalars
        .insert("pointer_value".into(), post.pointer_value);
    let position = report.density("position")?.clone();
    for (axis, tag) in [(PARTICLE1, "x1"), (PARTICLE2, "x2")] {
        let (peak, spread) = peak_and_spread(&marginal(&position, &[axis])?);
        report.scalars.insert(format!("{tag}_peak"), peak);
        report.scalars.insert(format!("{tag}_spread"), spread);
    }
    report.restrict(&config.outputs)
}

/// Bob's marginal of particle 2 in `basis` after postselecting `pointer`.
fn bob_marginal(state: &StateTensor, pointer: &PointerSpec, basis: Rep) -> Result<(Density, f64)> {
    let post = postselect(state, pointer)?;
    Ok((
        pointer_spectrum(&post.state, PARTICLE2, basis)?,
        post.probability,
    ))
}

/// Total variation between Bob's marginals after two different diaphragm
/// pointers on the same preparation.
pub fn disturbance_between(
    state: &StateTensor,
    first: &PointerSpec,
    second: &PointerSpec,
    bob_basis: Rep,
) -> Result<f64> {
    let (a, _) = bob_marginal(state, first, bob_basis)?;
    let (b, _) = bob_marginal(state, second, bob_basis)?;
    total_variation(&a, &b)
}

/// Bob's marginal after the momentum run against the one after the
/// position run.
pub fn run_disturbance_comparison(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let prep = prepare(config)?;
    let state = build_bohr_state(&prep.grid, &prep.params)?;
    let mut report = ProtocolReport::new(Scenario::Disturbance);
    report.notes = prep.notes;
    let k_pointer = config.pointer_for(Rep::Momentum)?;
    let x_pointer = config.pointer_for(Rep::Position)?;
    let (k_run, p_k) = bob_marginal(&state, &k_pointer, config.bob_basis)?;
    let (x_run, p_x) = bob_marginal(&state, &x_pointer, config.bob_basis)?;
    let tv = total_variation(&k_run, &x_run)?;

    report.notes.push(match prep.params.envelopes {
        [Envelope::Unit, Envelope::Unit] => "regime: unit envelopes; both Bob marginals are set by the \
             regularization width alone, so the comparison probes the delta widths rather than the slits"
            .to_string(),
        _ => "regime: finite envelopes; the position run keeps the envelope-limited momentum spread \
              while the momentum run inherits the ridge width"
            .to_string(),
    });
    report.postselection_probability = p_k;
    report.scalars.insert("k_run_probability".into(), p_k);
    report.scalars.insert("x_run_probability".into(), p_x);
    report.scalars.insert("disturbance_tv".into(), tv);
    report.disturbance = Some(tv);
    report.densities.insert("bob_marginal_k_run".into(), k_run);
    report.densities.insert("bob_marginal_x_run".into(), x_run);
    report.restrict(&config.outputs)
}

/// Prediction table for the densities of `config.counterfactual_source`.
pub fn run_counterfactual_table(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let prep = prepare(config)?;
    let unrestricted = ProtocolConfig {
        outputs: Vec::new(),
        ..config.clone()
    };
    let (mut report, offset) = match config.counterfactual_source {
        Scenario::EprIdeal => (run_epr_ideal(&unrestricted)?, 0.0),
        Scenario::BohrCorrected => {
            let r = run_bohr_corrected(&unrestricted)?;
            let offset = r.scalar("momentum_sum_expected")?;
            (r, offset)
        }
        Scenario::BohrFlawed => (run_bohr_flawed(&unrestricted)?, 0.0),
        other => {
            return Err(Error::Config(format!(
            "counterfactual_source must be epr_ideal, bohr_corrected or bohr_flawed, not {other}"
        )))
        }
    };
    report.scenario = Scenario::Counterfactual;
    report.counterfactuals = counterfactual_rows(&report, &prep.params, offset)?;
    report.notes.push(format!(
        "counterfactual source: {}",
        config.counterfactual_source
    ));
    report.restrict(&config.outputs)
}

pub fn run_scenario(scenario: Scenario, config: &ProtocolConfig) -> Result<ProtocolReport> {
    match scenario {
        Scenario::EprIdeal => run_epr_ideal(config),
        Scenario::BohrCorrected => run_bohr_corrected(config),
        Scenario::BohrFlawed => run_bohr_flawed(config),
        Scenario::Disturbance => run_disturbance_comparison(config),
        Scenario::Counterfactual => run_counterfactual_table(config),
    }
}
