//! Compensators, loop closure by state augmentation, and root-locus sweeps.
//!
//! Every loop actuates the de-spin motor voltage. With compensator
//! `H(s) = K prod(s - z) / prod(s - p)` sensing state `y`, the actuation is
//! `delta_e = H(s) (delta_e_ref - y)`; the sign of the loop lives entirely in
//! `K`. Several loops may share the actuator, in which case their outputs add.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PlantMatrices, INPUT_DIM, P, R, STATE_DIM, THETA_S};
use crate::{Error, Result};

/// A real, proper rational transfer function in zero-pole-gain form.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalCompensator {
    gain: f64,
    zeros: Vec<f64>,
    poles: Vec<f64>,
}

impl RationalCompensator {
    pub fn new(gain: f64, zeros: Vec<f64>, poles: Vec<f64>) -> Result<Self> {
        if zeros.len() > poles.len() {
            return Err(Error::ImproperCompensator {
                zeros: zeros.len(),
                poles: poles.len(),
            });
        }
        if !gain.is_finite() || zeros.iter().chain(&poles).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "compensator",
                reason: "gain, zeros and poles must be finite".into(),
            });
        }
        Ok(Self { gain, zeros, poles })
    }

    pub fn static_gain(gain: f64) -> Result<Self> {
        Self::new(gain, Vec::new(), Vec::new())
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    /// Number of compensator states.
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn with_gain(&self, gain: f64) -> Self {
        Self {
            gain,
            ..self.clone()
        }
    }

    /// Direct evaluation of `K prod(s - z) / prod(s - p)`.
    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        let num: Complex64 = self.zeros.iter().map(|z| s - z).product();
        let den: Complex64 = self.poles.iter().map(|p| s - p).product();
        self.gain * num / den
    }
}

impl fmt::Display for RationalCompensator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let factor = |r: &f64| {
            if *r <= 0.0 {
                format!("(s+{})", -r)
            } else {
                format!("(s-{r})")
            }
        };
        write!(f, "{}", self.gain)?;
        if !self.zeros.is_empty() || !self.poles.is_empty() {
            let num: String = self.zeros.iter().map(factor).collect();
            let den: String = self.poles.iter().map(factor).collect();
            write!(
                f,
                " * {}/{}",
                if num.is_empty() { "1".into() } else { num },
                if den.is_empty() { "1".into() } else { den }
            )?;
        }
        Ok(())
    }
}

/// Single-input single-output state-space block `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceBlock {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpaceBlock {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI - A)^-1 B + D`, or `None` when `s` is an eigenvalue of `A`.
    pub fn transfer(&self, s: Complex64) -> Option<Complex64> {
        let m = self.order();
        if m == 0 {
            return Some(Complex64::new(self.d, 0.0));
        }
        let shifted = DMatrix::<Complex64>::from_fn(m, m, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let x = shifted.lu().solve(&rhs)?;
        let cx: Complex64 = self.c.iter().zip(x.iter()).map(|(c, x)| *c * x).sum();
        Some(cx + self.d)
    }

    pub fn dc_gain(&self) -> Option<f64> {
        self.transfer(Complex64::new(0.0, 0.0)).map(|v| v.re)
    }
}

/// Monic polynomial with the given roots, coefficients in ascending powers.
fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for &root in roots {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= root * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Controllable canonical realization of a compensator.
pub fn realize_compensator(comp: &RationalCompensator) -> StateSpaceBlock {
    let m = comp.order();
    let den = poly_from_roots(&comp.poles);
    let mut num: Vec<f64> = poly_from_roots(&comp.zeros)
        .into_iter()
        .map(|c| comp.gain * c)
        .collect();
    num.resize(m + 1, 0.0);

    let d = num[m];
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    let mut c = RowDVector::zeros(m);
    if m > 0 {
        for i in 0..m - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..m {
            a[(m - 1, j)] = -den[j];
            c[j] = num[j] - d * den[j];
        }
        b[m - 1] = 1.0;
    }
    StateSpaceBlock { a, b, c, d }
}

/// Which plant state a loop feeds back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensedOutput {
    #[serde(rename = "theta_s")]
    ThetaS,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "r")]
    R,
}

impl SensedOutput {
    pub fn state_index(self) -> usize {
        match self {
            SensedOutput::ThetaS => THETA_S,
            SensedOutput::P => P,
            SensedOutput::R => R,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensedOutput::ThetaS => "theta_s",
            SensedOutput::P => "p",
            SensedOutput::R => "r",
        }
    }
}

impl FromStr for SensedOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta_s" => Ok(SensedOutput::ThetaS),
            "p" => Ok(SensedOutput::P),
            "r" => Ok(SensedOutput::R),
            other => Err(Error::Selector(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLoop {
    pub sensed: SensedOutput,
    pub compensator: RationalCompensator,
}

impl FeedbackLoop {
    pub fn new(sensed: SensedOutput, compensator: RationalCompensator) -> Self {
        Self {
            sensed,
            compensator,
        }
    }

    pub fn with_gain(&self, gain: f64) -> Self {
        Self {
            sensed: self.sensed,
            compensator: self.compensator.with_gain(gain),
        }
    }
}

/// Controller block of a config file:
/// `{"loop": "theta_s"|"p"|"r", "K": number, "zeros": [...], "poles": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    #[serde(rename = "loop")]
    pub sensed: String,
    #[serde(rename = "K")]
    pub gain: f64,
    #[serde(default)]
    pub zeros: Vec<f64>,
    #[serde(default)]
    pub poles: Vec<f64>,
}

impl ControllerConfig {
    pub fn to_loop(&self) -> Result<FeedbackLoop> {
        Ok(FeedbackLoop::new(
            self.sensed.parse()?,
            RationalCompensator::new(self.gain, self.zeros.clone(), self.poles.clone())?,
        ))
    }
}

impl From<&FeedbackLoop> for ControllerConfig {
    fn from(fl: &FeedbackLoop) -> Self {
        Self {
            sensed: fl.sensed.name().to_string(),
            gain: fl.compensator.gain(),
            zeros: fl.compensator.zeros().to_vec(),
            poles: fl.compensator.poles().to_vec(),
        }
    }
}

/// A loop reference in a scenario: a named preset or an explicit controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoopConfig {
    Preset { preset: String },
    Explicit(ControllerConfig),
}

impl LoopConfig {
    pub fn resolve(&self) -> Result<FeedbackLoop> {
        match self {
            LoopConfig::Preset { preset } => crate::presets::loop_preset(preset),
            LoopConfig::Explicit(cfg) => cfg.to_loop(),
        }
    }
}

/// Where one loop's compensator lives inside the augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTap {
    pub sensed: SensedOutput,
    /// Index of the first compensator state.
    pub offset: usize,
    pub block: StateSpaceBlock,
}

/// Plant plus compensator states, ordered plant first.
///
/// Input columns are `[delta_e_ref, delta_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub taps: Vec<LoopTap>,
    /// Loop that receives `delta_e_ref`.
    pub reference_loop: usize,
    /// `a` minus the embedded plant matrix; constant in time.
    feedback: DMatrix<f64>,
}

impl ClosedLoopSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Total compensator order.
    pub fn compensator_order(&self) -> usize {
        self.dim() - STATE_DIM
    }

    /// Closed-loop matrix for a different plant `A` (same loops).
    pub fn assemble(&self, plant_a: &crate::dynamics::StateMatrix) -> DMatrix<f64> {
        let mut a = self.feedback.clone();
        let mut block = a.view_mut((0, 0), (STATE_DIM, STATE_DIM));
        block += plant_a;
        a
    }

    /// Motor voltage commanded by all loops in state `x` with reference `reference`.
    pub fn actuation(&self, x: &DVector<f64>, reference: f64) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, tap)| {
                let r = if i == self.reference_loop { reference } else { 0.0 };
                let err = r - x[tap.sensed.state_index()];
                let xc = x.rows(tap.offset, tap.block.order());
                tap.block.d * err + (&tap.block.c * xc)[0]
            })
            .sum()
    }
}

pub fn close_loop(plant: &PlantMatrices, fl: &FeedbackLoop) -> Result<ClosedLoopSystem> {
    close_loops(plant, std::slice::from_ref(fl), 0)
}

/// Close several loops on the shared motor-voltage input.
pub fn close_loops(
    plant: &PlantMatrices,
    loops: &[FeedbackLoop],
    reference_loop: usize,
) -> Result<ClosedLoopSystem> {
    if !loops.is_empty() && reference_loop >= loops.len() {
        return Err(Error::Input(format!(
            "reference loop {reference_loop} out of range for {} loops",
            loops.len()
        )));
    }
    let blocks: Vec<StateSpaceBlock> = loops
        .iter()
        .map(|l| realize_compensator(&l.compensator))
        .collect();
    let m: usize = blocks.iter().map(StateSpaceBlock::order).sum();
    let n = STATE_DIM + m;
    let b1 = plant.b.column(0).into_owned();

    let mut feedback = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, INPUT_DIM);
    for i in 0..STATE_DIM {
        b[(i, 1)] = plant.b[(i, 1)];
    }

    let mut taps = Vec::with_capacity(loops.len());
    let mut offset = STATE_DIM;
    for (idx, (fl, block)) in loops.iter().zip(blocks).enumerate() {
        let y = fl.sensed.state_index();
        let k = block.order();
        for i in 0..STATE_DIM {
            feedback[(i, y)] -= b1[i] * block.d;
            for j in 0..k {
                feedback[(i, offset + j)] += b1[i] * block.c[j];
            }
        }
        for i in 0..k {
            feedback[(offset + i, y)] -= block.b[i];
            for j in 0..k {
                feedback[(offset + i, offset + j)] = block.a[(i, j)];
            }
        }
        if idx == reference_loop {
            for i in 0..STATE_DIM {
                b[(i, 0)] = b1[i] * block.d;
            }
            for i in 0..k {
                b[(offset + i, 0)] = block.b[i];
            }
        }
        taps.push(LoopTap {
            sensed: fl.sensed,
            offset,
            block,
        });
        offset += k;
    }
    if loops.is_empty() {
        for i in 0..STATE_DIM {
            b[(i, 0)] = b1[i];
        }
    }

    let mut sys = ClosedLoopSystem {
        a: DMatrix::zeros(n, n),
        b,
        taps,
        reference_loop,
        feedback,
    };
    sys.a = sys.assemble(&plant.a);
    Ok(sys)
}

/// Eigenvalues of a real square matrix, sorted by real then imaginary part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eig)
}

/// Absolute imaginary part below which an eigenvalue counts as real.
pub const OSCILLATORY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalue: Complex64,
    pub damping_ratio: f64,
    pub natural_frequency: f64,
}

impl Mode {
    pub fn from_eigenvalue(lambda: Complex64) -> Self {
        let wn = lambda.norm();
        let zeta = if lambda.im.abs() > OSCILLATORY_TOL {
            -lambda.re / wn
        } else if lambda.re < 0.0 {
            1.0
        } else if lambda.re > 0.0 {
            -1.0
        } else {
            // marginal pole at the origin
            0.0
        };
        Self {
            eigenvalue: lambda,
            damping_ratio: zeta,
            natural_frequency: wn,
        }
    }

    pub fn is_oscillatory(&self) -> bool {
        self.eigenvalue.im.abs() > OSCILLATORY_TOL
    }
}

fn ser_complex<S: serde::Serializer>(v: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&v.re)?;
    t.serialize_element(&v.im)?;
    t.end()
}

/// Eigenvalues with damping ratio and natural frequency.
///
/// Real eigenvalues carry `zeta = +1` (stable) or `-1` (unstable); a zero
/// eigenvalue carries `zeta = 0`.
pub fn eigen_modes(a: &DMatrix<f64>) -> Result<Vec<Mode>> {
    Ok(eigenvalues(a)?.into_iter().map(Mode::from_eigenvalue).collect())
}

/// Closed-loop matrix as an affine function of the loop gain, `A0 + K A1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPencil {
    pub base: DMatrix<f64>,
    pub direction: DMatrix<f64>,
}

impl GainPencil {
    pub fn new(base: DMatrix<f64>, direction: DMatrix<f64>) -> Result<Self> {
        if base.shape() != direction.shape() || base.nrows() != base.ncols() {
            return Err(Error::Shape("pencil matrices must be square and equal in size".into()));
        }
        Ok(Self { base, direction })
    }

    /// Pencil of a loop shape closed on `plant`; the shape's own gain is ignored.
    pub fn from_loop(plant: &PlantMatrices, shape: &FeedbackLoop) -> Result<Self> {
        let base = close_loop(plant, &shape.with_gain(0.0))?.a;
        let unit = close_loop(plant, &shape.with_gain(1.0))?.a;
        Self::new(base.clone(), unit - base)
    }

    pub fn at(&self, gain: f64) -> DMatrix<f64> {
        &self.base + &self.direction * gain
    }
}

/// Root-locus sweep: closed-loop eigenvalues per gain, paired into branches.
#[derive(Debug, Clone)]
pub struct LocusData {
    pub gains: Vec<f64>,
    /// `slices[k][j]` is branch `j` at `gains[k]`.
    pub slices: Vec<Vec<Complex64>>,
    pencil: GainPencil,
}

/// Gain grid `0, s*k_min, ..., s*k_max` logarithmic in `|K|`.
pub fn log_gain_grid(sign: f64, k_min: f64, k_max: f64, per_decade: usize, include_zero: bool) -> Vec<f64> {
    let sign = if sign < 0.0 { -1.0 } else { 1.0 };
    let mut grid = Vec::new();
    if include_zero {
        grid.push(0.0);
    }
    if k_min > 0.0 && k_max >= k_min && per_decade > 0 {
        let decades = (k_max / k_min).log10();
        let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
        for i in 0..=n {
            grid.push(sign * k_min * 10f64.powf(decades * i as f64 / n as f64));
        }
    }
    grid
}

pub fn root_locus(plant: &PlantMatrices, shape: &FeedbackLoop, gains: &[f64]) -> Result<LocusData> {
    root_locus_pencil(GainPencil::from_loop(plant, shape)?, gains)
}

pub fn root_locus_pencil(pencil: GainPencil, gains: &[f64]) -> Result<LocusData> {
    if gains.is_empty() {
        return Err(Error::Input("gain grid is empty".into()));
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(Error::Input("gain grid contains non-finite values".into()));
    }
    let increasing = gains.windows(2).all(|w| w[0] < w[1]);
    let decreasing = gains.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::Input("gain grid must be strictly monotone".into()));
    }

    let mut slices: Vec<Vec<Complex64>> = Vec::with_capacity(gains.len());
    for &k in gains {
        let eig = eigenvalues(&pencil.at(k))
            .map_err(|e| Error::Numeric(format!("eigen-solver failed at K = {k}: {e}")))?;
        let paired = match slices.last() {
            Some(prev) => pair_nearest(prev, eig),
            None => eig,
        };
        slices.push(paired);
    }
    Ok(LocusData {
        gains: gains.to_vec(),
        slices,
        pencil,
    })
}

/// Reorder `next` so that entry `j` continues branch `prev[j]`
/// (greedy nearest-neighbour over all pairs).
fn pair_nearest(prev: &[Complex64], next: Vec<Complex64>) -> Vec<Complex64> {
    let n = prev.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            candidates.push(((p - q).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; n];
    let mut used = vec![false; n];
    for (_, i, j) in candidates {
        if out[i].is_none() && !used[j] {
            out[i] = Some(next[j]);
            used[j] = true;
        }
    }
    out.into_iter().map(|v| v.expect("square assignment")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalGain {
    pub gain: f64,
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalue: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoalescenceKind {
    /// Two real branches meet and leave the real axis.
    Breakaway,
    /// A complex pair lands on the real axis and splits.
    BreakIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coalescence {
    pub gain: f64,
    /// Real-axis location of the double root.
    pub location: f64,
    pub kind: CoalescenceKind,
}

/// Real parts smaller than this are treated as sitting on the imaginary axis.
const AXIS_BAND: f64 = 1e-10;
const CROSSING_TOL: f64 = 1e-9;

impl LocusData {
    pub fn pencil(&self) -> &GainPencil {
        &self.pencil
    }

    pub fn branch_count(&self) -> usize {
        self.slices.first().map_or(0, Vec::len)
    }

    /// Gains where a branch crosses the imaginary axis, refined by bisection.
    pub fn find_critical_gains(&self) -> Result<Vec<CriticalGain>> {
        let mut out = Vec::new();
        for j in 0..self.branch_count() {
            // last slice where the branch was clearly off the axis
            let mut last: Option<usize> = None;
            for k in 0..self.gains.len() {
                let b = self.slices[k][j];
                if b.re.abs() <= AXIS_BAND {
                    continue;
                }
                if let Some(i) = last {
                    let a = self.slices[i][j];
                    // conjugate partner reports the same crossing
                    if a.re.signum() != b.re.signum() && a.im + b.im >= 0.0 {
                        out.push(self.refine_crossing(self.gains[i], self.gains[k], a, b)?);
                    }
                }
                last = Some(k);
            }
        }
        out.sort_by(|x, y| x.gain.abs().total_cmp(&y.gain.abs()));
        Ok(out)
    }

    fn refine_crossing(
        &self,
        mut k_lo: f64,
        mut k_hi: f64,
        mut lam_lo: Complex64,
        mut lam_hi: Complex64,
    ) -> Result<CriticalGain> {
        let lo_sign = lam_lo.re.signum();
        let mut best = CriticalGain {
            gain: k_lo,
            eigenvalue: lam_lo,
        };
        for _ in 0..200 {
            let mid = 0.5 * (k_lo + k_hi);
            let guess = 0.5 * (lam_lo + lam_hi);
            let eig = eigenvalues(&self.pencil.at(mid))?;
            let lam = nearest(&eig, guess);
            best = CriticalGain {
                gain: mid,
                eigenvalue: lam,
            };
            if lam.re.abs() < CROSSING_TOL || k_lo == mid || k_hi == mid {
                break;
            }
            if lam.re.signum() == lo_sign {
                k_lo = mid;
                lam_lo = lam;
            } else {
                k_hi = mid;
                lam_hi = lam;
            }
        }
        Ok(best)
    }

    /// Real-axis coalescence points, refined by bisection on the gain.
    pub fn find_breakaway(&self) -> Result<Vec<Coalescence>> {
        let mut out = Vec::new();
        for k in 0..self.gains.len().saturating_sub(1) {
            let before = count_real(&self.slices[k]);
            let after = count_real(&self.slices[k + 1]);
            if before == after {
                continue;
            }
            let kind = if before > after {
                CoalescenceKind::Breakaway
            } else {
                CoalescenceKind::BreakIn
            };
            let (mut k_real, mut k_cplx) = match kind {
                CoalescenceKind::Breakaway => (self.gains[k], self.gains[k + 1]),
                CoalescenceKind::BreakIn => (self.gains[k + 1], self.gains[k]),
            };
            let real_count = before.max(after);
            for _ in 0..200 {
                let mid = 0.5 * (k_real + k_cplx);
                if mid == k_real || mid == k_cplx {
                    break;
                }
                if count_real(&eigenvalues(&self.pencil.at(mid))?) >= real_count {
                    k_real = mid;
                } else {
                    k_cplx = mid;
                }
            }
            let eig = eigenvalues(&self.pencil.at(k_cplx))?;
            let location = eig
                .iter()
                .filter(|l| l.im > 0.0 && !is_real(l))
                .min_by(|a, b| a.im.total_cmp(&b.im))
                .map(|l| l.re)
                .unwrap_or(f64::NAN);
            out.push(Coalescence {
                gain: 0.5 * (k_real + k_cplx),
                location,
                kind,
            });
        }
        Ok(out)
    }

    /// `gain,re_1,im_1,...,re_n,im_n` in branch order.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut header = String::from("gain");
        for j in 1..=self.branch_count() {
            header.push_str(&format!(",re_{j},im_{j}"));
        }
        writeln!(out, "{header}")?;
        for (g, slice) in self.gains.iter().zip(&self.slices) {
            let mut line = format!("{g:?}");
            for l in slice {
                line.push_str(&format!(",{:?},{:?}", l.re, l.im));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn nearest(eig: &[Complex64], target: Complex64) -> Complex64 {
    *eig
        .iter()
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .expect("non-empty spectrum")
}

fn is_real(l: &Complex64) -> bool {
    l.im.abs() <= 1e-7 * l.norm().max(1.0)
}

fn count_real(slice: &[Complex64]) -> usize {
    slice.iter().filter(|l| is_real(l)).count()
}

/// Sidecar JSON for a locus sweep.
#[derive(Debug, Clone, Serialize)]
pub struct LocusAnnotations {
    pub critical_gains: Vec<CriticalGain>,
    pub breakaway: Vec<Coalescence>,
}
