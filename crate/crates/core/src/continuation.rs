//! Equilibrium-branch tracing via the `gamma(I)` parametrization, locators
//! for the five bifurcation points in `gamma`, cycle-branch tracing, and
//! regime classification.
//!
//! The branch is parametrised by `I` rather than `gamma` because `gamma(I)`
//! is single-valued while `I(gamma)` is double-valued on the backward branch.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    basic_reproduction_number, classify_pq, endemic_equilibria, endemic_s,
    jacobian_reduced, pq_values, transcritical_direction, BifurcationDirection, StabilityClass,
};
use crate::model::{rhs_reduced_raw, ModelParams};
use crate::solver::{
    detect_limit_cycle, dopri5, fmt_sig, CycleOptions, IntegrateOptions, StepControl,
    TimeDirection,
};
use crate::{Error, Result};

/// Tolerance for deciding that `gamma` sits exactly on a bifurcation value.
const GAMMA_EQ_TOL: f64 = 1e-9;

/// One point of the endemic-equilibrium branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    #[serde(rename = "I")]
    pub i: f64,
    pub gamma: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub stability: StabilityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationKind {
    #[serde(rename = "TR")]
    Transcritical,
    #[serde(rename = "SN")]
    SaddleNode,
    #[serde(rename = "HB")]
    Hopf,
    #[serde(rename = "HM")]
    Homoclinic,
    #[serde(rename = "FLC")]
    CycleFold,
}

impl std::fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BifurcationKind::Transcritical => "TR",
            BifurcationKind::SaddleNode => "SN",
            BifurcationKind::Hopf => "HB",
            BifurcationKind::Homoclinic => "HM",
            BifurcationKind::CycleFold => "FLC",
        })
    }
}

/// A located bifurcation in the `gamma` direction.
///
/// `i` is the bifurcating equilibrium's infected coordinate; for the cycle
/// bifurcations (HM, FLC) it carries the associated orbit's section `I`
/// (or the saddle's `I` for HM) when one could be measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    pub gamma: f64,
    #[serde(rename = "I")]
    pub i: Option<f64>,
    #[serde(rename = "R0")]
    pub r0: f64,
}

/// One grid point of the period-vs-`gamma` cycle branch. Absent detections
/// leave the optional fields empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleBranchPoint {
    pub gamma: f64,
    pub period: Option<f64>,
    pub stable: Option<bool>,
    #[serde(rename = "max_I")]
    pub max_i: Option<f64>,
}

/// The ten qualitative regimes over `gamma` (Table-4-style classification).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeCase {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
}

impl std::fmt::Display for RegimeCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeCase::I => "I",
            RegimeCase::II => "II",
            RegimeCase::III => "III",
            RegimeCase::IV => "IV",
            RegimeCase::V => "V",
            RegimeCase::VI => "VI",
            RegimeCase::VII => "VII",
            RegimeCase::VIII => "VIII",
            RegimeCase::IX => "IX",
            RegimeCase::X => "X",
        })
    }
}

/// Equilibrium and cycle counts attached to a regime case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeCounts {
    pub endemic_equilibria: usize,
    pub stable_endemic: usize,
    pub stable_cycles: usize,
    pub unstable_cycles: usize,
    pub semistable_cycles: usize,
    pub homoclinic_orbit: bool,
}

impl RegimeCase {
    pub fn counts(&self) -> RegimeCounts {
        let c = |e, se, sc, uc, ss, hm| RegimeCounts {
            endemic_equilibria: e,
            stable_endemic: se,
            stable_cycles: sc,
            unstable_cycles: uc,
            semistable_cycles: ss,
            homoclinic_orbit: hm,
        };
        match self {
            RegimeCase::I | RegimeCase::II => c(1, 1, 0, 0, 0, false),
            RegimeCase::III => c(2, 1, 0, 0, 0, false),
            RegimeCase::IV => c(2, 0, 1, 0, 0, false),
            RegimeCase::V => c(2, 0, 1, 0, 0, true),
            RegimeCase::VI => c(2, 0, 1, 1, 0, false),
            RegimeCase::VII => c(2, 0, 0, 0, 1, false),
            RegimeCase::VIII => c(2, 0, 0, 0, 0, false),
            RegimeCase::IX => c(1, 0, 0, 0, 0, false),
            RegimeCase::X => c(0, 0, 0, 0, 0, false),
        }
    }
}

/// Supremum of admissible endemic `I` values: the larger root of the
/// `S_n` numerator (where the susceptible coordinate hits zero).
pub fn admissible_i_sup(p: &ModelParams) -> f64 {
    let a = -(p.mu + p.mu_prime) * p.rho;
    let b = p.lambda * p.rho - p.alpha - p.mu - p.mu_prime;
    let c = p.lambda;
    if a == 0.0 {
        return -c / b; // rho = 0: linear, b < 0
    }
    let disc = b * b - 4.0 * a * c;
    let sq = disc.sqrt();
    ((-b + sq) / (2.0 * a)).max((-b - sq) / (2.0 * a))
}

/// The unique `gamma` making `I` an endemic-equilibrium ordinate.
///
/// Solves the equilibrium condition, affine in `gamma`, along
/// `S = S_n(I)`. The result may fall outside `[0, 1]`.
#[allow(non_snake_case)]
pub fn gamma_of_I(p: &ModelParams, i: f64) -> Result<f64> {
    if !(i > 0.0) || !i.is_finite() {
        return Err(Error::InvalidInput(format!("I must be positive and finite, got {i}")));
    }
    let i_sup = admissible_i_sup(p);
    if i >= i_sup {
        return Err(Error::Singularity(format!(
            "I = {i} at or beyond the admissibility singularity I_s = {i_sup}"
        )));
    }
    let s = endemic_s(p, i);
    let den = s * (p.lambda - p.mu * s);
    let scale = (p.beta * s * i).abs().max(p.lambda).max(1.0);
    if den.abs() < 1e-14 * scale {
        return Err(Error::Degenerate(format!(
            "affine coefficient of gamma vanishes at I = {i}"
        )));
    }
    Ok((p.beta * s * i - (p.lambda - p.mu * s)) / den)
}

/// `(gamma, S, P, Q)` along the branch at ordinate `i`. The trailing pair
/// comes from the linearisation at the (possibly out-of-range-`gamma`)
/// equilibrium.
fn branch_data(p: &ModelParams, i: f64) -> Result<(f64, f64, f64, f64)> {
    let gamma = gamma_of_I(p, i)?;
    let s = endemic_s(p, i);
    let pg = ModelParams { gamma, ..*p };
    let (pn, qn) = pq_values(&pg, s, i);
    Ok((gamma, s, pn, qn))
}

/// Endemic branch on a uniform `I` grid over `[i_min, i_max]`.
pub fn equilibrium_branch(
    p: &ModelParams,
    i_min: f64,
    i_max: f64,
    steps: usize,
) -> Result<Vec<BranchPoint>> {
    let i_sup = admissible_i_sup(p);
    if !(0.0 < i_min && i_min < i_max && i_max < i_sup) {
        return Err(Error::InvalidInput(format!(
            "need 0 < i_min < i_max < I_s = {i_sup}, got [{i_min}, {i_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidInput(format!("steps must be >= 2, got {steps}")));
    }
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let i = i_min + (i_max - i_min) * k as f64 / (steps - 1) as f64;
        let (gamma, s, pn, qn) = branch_data(p, i)?;
        out.push(BranchPoint { i, gamma, s, stability: classify_pq(pn, qn) });
    }
    Ok(out)
}

/// CSV with header `I,gamma,S,stability`, 17 significant digits.
pub fn branch_to_csv(points: &[BranchPoint]) -> String {
    let mut out = String::from("I,gamma,S,stability\n");
    for b in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_sig(b.i, 17),
            fmt_sig(b.gamma, 17),
            fmt_sig(b.s, 17),
            b.stability
        );
    }
    out
}

/// CSV with header `gamma,period,stable,max_I`; absent detections leave
/// empty fields.
pub fn cycles_to_csv(points: &[CycleBranchPoint]) -> String {
    let mut out = String::from("gamma,period,stable,max_I\n");
    for c in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_sig(c.gamma, 17),
            c.period.map(|v| fmt_sig(v, 17)).unwrap_or_default(),
            c.stable.map(|v| v.to_string()).unwrap_or_default(),
            c.max_i.map(|v| fmt_sig(v, 17)).unwrap_or_default(),
        );
    }
    out
}

fn point(p: &ModelParams, kind: BifurcationKind, gamma: f64, i: Option<f64>) -> BifurcationPoint {
    let pg = ModelParams { gamma, ..*p };
    BifurcationPoint { kind, gamma, i, r0: basic_reproduction_number(&pg) }
}

/// The transcritical point `R0(gamma) = 1`, in closed form.
pub fn locate_transcritical(p: &ModelParams) -> Result<BifurcationPoint> {
    let gamma = (p.beta * p.lambda / (p.mu + p.mu_prime + p.alpha) - p.mu) / p.lambda;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!(
            "R0 = 1 requires gamma = {gamma}, outside [0, 1]"
        )));
    }
    Ok(point(p, BifurcationKind::Transcritical, gamma, Some(0.0)))
}

/// The saddle-node point: the maximum of `gamma(I)` over the branch,
/// golden-section search then a secant polish on the finite-difference
/// derivative (the flat maximum limits direct search to ~1e-6 in `I`).
pub fn locate_saddle_node(p: &ModelParams) -> Result<BifurcationPoint> {
    match transcritical_direction(p)?.direction {
        BifurcationDirection::Backward => {}
        BifurcationDirection::Forward => {
            return Err(Error::Structure(
                "forward regime: gamma(I) has no interior maximum".into(),
            ));
        }
    }
    let i_sup = admissible_i_sup(p);
    let (mut lo, mut hi) = (1e-6 * i_sup, i_sup * (1.0 - 1e-6));
    let g = |i: f64| gamma_of_I(p, i);
    // golden-section to ~1e-4, enough to seed the derivative solve
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    while hi - lo > 1e-4 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = g(x1)?;
        }
    }
    if lo <= 2e-6 * i_sup || hi >= i_sup * (1.0 - 2e-6) {
        return Err(Error::Structure("no interior maximum of gamma(I)".into()));
    }
    // secant iteration on d(I) = gamma'(I) (central difference)
    let h = 1e-4;
    let d = |i: f64| -> Result<f64> { Ok((g(i + h)? - g(i - h)?) / (2.0 * h)) };
    let (mut x0, mut x1) = (lo, hi);
    let (mut d0, mut d1) = (d(x0)?, d(x1)?);
    for _ in 0..60 {
        if (x1 - x0).abs() < 1e-10 || d1 == d0 {
            break;
        }
        let x2 = x1 - d1 * (x1 - x0) / (d1 - d0);
        x0 = x1;
        d0 = d1;
        x1 = x2;
        d1 = d(x1)?;
    }
    let i_sn = x1;
    Ok(point(p, BifurcationKind::SaddleNode, g(i_sn)?, Some(i_sn)))
}

/// `P` along the branch as a function of `I` (`None` where the branch is
/// inadmissible).
fn branch_p(p: &ModelParams, i: f64) -> Option<(f64, f64)> {
    branch_data(p, i).ok().map(|(_, _, pn, qn)| (pn, qn))
}

/// The Hopf point: the root of `P(I) = 0` along the branch with `Q > 0`,
/// refined by bisection; verifies the transversal crossing of the
/// eigenvalue real part in `gamma`.
pub fn locate_hopf(p: &ModelParams) -> Result<BifurcationPoint> {
    let i_sup = admissible_i_sup(p);
    let (lo, hi) = (1e-3 * i_sup, i_sup * (1.0 - 1e-6));
    let n = 2000;
    let mut prev: Option<(f64, f64, f64)> = None; // (i, P, Q)
    let mut bracket = None;
    for k in 0..=n {
        let i = lo + (hi - lo) * k as f64 / n as f64;
        if let Some((pn, qn)) = branch_p(p, i) {
            if let Some((ip, pp, qp)) = prev {
                if pp * pn < 0.0 && qp > 0.0 && qn > 0.0 {
                    bracket = Some((ip, i));
                    break;
                }
            }
            prev = Some((i, pn, qn));
        } else {
            prev = None;
        }
    }
    let (mut a, mut b) = bracket
        .ok_or_else(|| Error::AbsentHopf("no sign change of P along the branch".into()))?;
    let pa = branch_p(p, a).unwrap().0;
    for _ in 0..200 {
        if b - a <= 1e-10 {
            break;
        }
        let m = 0.5 * (a + b);
        let pm = branch_p(p, m)
            .ok_or_else(|| Error::AbsentHopf("branch became inadmissible during refinement".into()))?
            .0;
        if (pm > 0.0) == (pa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let i_hb = 0.5 * (a + b);
    let (gamma, _, _, q) = branch_data(p, i_hb)?;
    if q <= 0.0 {
        return Err(Error::AbsentHopf(format!("Q = {q} <= 0 at the P root")));
    }
    // transversality: growth rate -P/2 must increase through zero in gamma
    let h = 1e-4;
    let dp_di = (branch_p(p, i_hb + h).unwrap().0 - branch_p(p, i_hb - h).unwrap().0) / (2.0 * h);
    let dg_di = (gamma_of_I(p, i_hb + h)? - gamma_of_I(p, i_hb - h)?) / (2.0 * h);
    if dg_di == 0.0 || -(dp_di / dg_di) / 2.0 <= 0.0 {
        return Err(Error::Structure(format!(
            "Hopf transversality failed: dP/dI = {dp_di}, dgamma/dI = {dg_di}"
        )));
    }
    Ok(point(p, BifurcationKind::Hopf, gamma, Some(i_hb)))
}

/// True when the orbit leaving the saddle `e2` along its unstable
/// eigenvector (the increasing-`I` side) reaches `I < 1e-3` within `t_max`.
fn saddle_shot_escapes(p: &ModelParams, gamma: f64, t_max: f64) -> Result<bool> {
    let pg = p.with_gamma(gamma)?;
    let eqs = endemic_equilibria(&pg)?;
    if eqs.len() < 2 {
        return Err(Error::Detection(format!(
            "need two endemic equilibria for manifold shooting, found {} at gamma = {gamma}",
            eqs.len()
        )));
    }
    let e2 = &eqs[0];
    let j = jacobian_reduced(&pg, e2.s, e2.i);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 || det >= 0.0 {
        return Err(Error::Detection(format!("e2 is not a saddle at gamma = {gamma}")));
    }
    let lam = 0.5 * (tr + disc.sqrt()); // positive eigenvalue
    let mut v = [j[0][1], lam - j[0][0]];
    if v[0].abs().max(v[1].abs()) < 1e-300 {
        v = [lam - j[1][1], j[1][0]];
    }
    let norm = v[0].hypot(v[1]);
    let mut v = [v[0] / norm, v[1] / norm];
    if v[1] < 0.0 {
        v = [-v[0], -v[1]];
    }
    let start = [e2.s + 1e-6 * v[0], e2.i + 1e-6 * v[1], 0.0];
    orbit_escapes(&pg, start, t_max)
}

/// True when the forward orbit reaches `I < 1e-3` within `t_max`.
fn orbit_escapes(p: &ModelParams, start: [f64; 3], t_max: f64) -> Result<bool> {
    let mut escaped = false;
    dopri5(
        |_, y| {
            let (ds, di) = rhs_reduced_raw(p, y[0], y[1]);
            [ds, di, 0.0]
        },
        0.0,
        t_max,
        start,
        &IntegrateOptions::default(),
        |rec| {
            if rec.y1[1] < 1e-3 {
                escaped = true;
                return StepControl::Stop;
            }
            StepControl::Continue
        },
    )?;
    Ok(escaped)
}

fn locate_homoclinic_with(
    p: &ModelParams,
    gamma_hb: f64,
    gamma_sn: f64,
) -> Result<BifurcationPoint> {
    let (mut lo, mut hi) = (gamma_hb + 1e-4, gamma_sn - 1e-3);
    if !(lo < hi) {
        return Err(Error::Detection(format!(
            "degenerate homoclinic bracket [{lo}, {hi}]"
        )));
    }
    let t_max = 2e4;
    if saddle_shot_escapes(p, lo, t_max)? {
        return Err(Error::Detection(format!(
            "saddle shot already escapes at the lower bracket gamma = {lo}"
        )));
    }
    if !saddle_shot_escapes(p, hi, t_max)? {
        return Err(Error::Detection(format!(
            "saddle shot still trapped at the upper bracket gamma = {hi}"
        )));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if saddle_shot_escapes(p, mid, t_max)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    // the homoclinic loop is anchored at the saddle; report its I
    let i = endemic_equilibria(&p.with_gamma(gamma)?)?.first().map(|e| e.i);
    Ok(point(p, BifurcationKind::Homoclinic, gamma, i))
}

/// The homoclinic point, by bisection on the saddle-manifold shooting
/// predicate (spiral into the cycle region vs escape to the disease-free
/// equilibrium).
pub fn locate_homoclinic(p: &ModelParams) -> Result<BifurcationPoint> {
    let hb = locate_hopf(p)?;
    let sn = locate_saddle_node(p)?;
    locate_homoclinic_with(p, hb.gamma, sn.gamma)
}

fn locate_cycle_fold_with(
    p: &ModelParams,
    gamma_hm: f64,
    gamma_sn: f64,
) -> Result<BifurcationPoint> {
    let (mut lo, mut hi) = (gamma_hm + 1e-5, gamma_sn - 1e-3);
    if !(lo < hi) {
        return Err(Error::Detection(format!("degenerate fold bracket [{lo}, {hi}]")));
    }
    let t_max = 6e4;
    let trapped = |gamma: f64| -> Result<bool> {
        let pg = p.with_gamma(gamma)?;
        let e1 = endemic_equilibria(&pg)?
            .pop()
            .ok_or_else(|| Error::Detection(format!("no equilibrium at gamma = {gamma}")))?;
        Ok(!orbit_escapes(&pg, [e1.s, e1.i + 1.0, 0.0], t_max)?)
    };
    if !trapped(lo)? {
        return Err(Error::Detection(format!(
            "orbit already escapes at the lower bracket gamma = {lo}"
        )));
    }
    if trapped(hi)? {
        return Err(Error::Detection(format!(
            "orbit still trapped at the upper bracket gamma = {hi}"
        )));
    }
    while hi - lo > 2e-6 {
        let mid = 0.5 * (lo + hi);
        if trapped(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    // section I measured on the stable cycle midway through the two-cycle window
    let probe = 0.5 * (gamma_hm + gamma);
    let i = (|| -> Result<f64> {
        let pg = p.with_gamma(probe)?;
        let e1 = endemic_equilibria(&pg)?
            .pop()
            .ok_or_else(|| Error::Detection("no equilibrium".into()))?;
        Ok(detect_limit_cycle(
            &pg,
            (e1.s, e1.i + 1.0),
            TimeDirection::Forward,
            &IntegrateOptions::default(),
            &CycleOptions::default(),
        )?
        .section_i)
    })()
    .ok();
    Ok(point(p, BifurcationKind::CycleFold, gamma, i))
}

/// The fold (coalescence) of the stable/unstable limit-cycle pair, by
/// bisection on the "forward orbit from near `e1` stays trapped" predicate.
pub fn locate_cycle_fold(p: &ModelParams) -> Result<BifurcationPoint> {
    let hm = locate_homoclinic(p)?;
    let sn = locate_saddle_node(p)?;
    locate_cycle_fold_with(p, hm.gamma, sn.gamma)
}

/// All five bifurcation points of the `gamma` direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationSet {
    pub transcritical: BifurcationPoint,
    pub hopf: BifurcationPoint,
    pub homoclinic: BifurcationPoint,
    pub cycle_fold: BifurcationPoint,
    pub saddle_node: BifurcationPoint,
}

impl BifurcationSet {
    /// Locates all five points, reusing intermediate results.
    pub fn locate_all(p: &ModelParams) -> Result<Self> {
        let transcritical = locate_transcritical(p)?;
        let saddle_node = locate_saddle_node(p)?;
        let hopf = locate_hopf(p)?;
        let homoclinic = locate_homoclinic_with(p, hopf.gamma, saddle_node.gamma)?;
        let cycle_fold = locate_cycle_fold_with(p, homoclinic.gamma, saddle_node.gamma)?;
        Ok(Self { transcritical, hopf, homoclinic, cycle_fold, saddle_node })
    }

    pub fn points(&self) -> [BifurcationPoint; 5] {
        [self.transcritical, self.hopf, self.homoclinic, self.cycle_fold, self.saddle_node]
    }

    /// The regime case whose `gamma`-interval contains the input.
    pub fn classify(&self, gamma: f64) -> Result<RegimeCase> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} outside [0, 1]")));
        }
        let (tr, hb, hm, flc, sn) = (
            self.transcritical.gamma,
            self.hopf.gamma,
            self.homoclinic.gamma,
            self.cycle_fold.gamma,
            self.saddle_node.gamma,
        );
        let t = GAMMA_EQ_TOL;
        Ok(if gamma < tr - t {
            RegimeCase::I
        } else if gamma <= tr + t {
            RegimeCase::II
        } else if gamma <= hb + t {
            RegimeCase::III
        } else if (gamma - hm).abs() <= t {
            RegimeCase::V
        } else if gamma < hm {
            RegimeCase::IV
        } else if (gamma - flc).abs() <= t {
            RegimeCase::VII
        } else if gamma < flc {
            RegimeCase::VI
        } else if gamma < sn - t {
            RegimeCase::VIII
        } else if gamma <= sn + t {
            RegimeCase::IX
        } else {
            RegimeCase::X
        })
    }
}

/// Classifies `gamma` into a regime case, computing only the bifurcation
/// values the decision needs (the shooting locators are expensive).
pub fn classify_regime(p: &ModelParams, gamma: f64) -> Result<RegimeCase> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma = {gamma} outside [0, 1]")));
    }
    let t = GAMMA_EQ_TOL;
    let tr = locate_transcritical(p)?.gamma;
    if gamma < tr - t {
        return Ok(RegimeCase::I);
    }
    if gamma <= tr + t {
        return Ok(RegimeCase::II);
    }
    let sn = locate_saddle_node(p)?.gamma;
    if gamma > sn + t {
        return Ok(RegimeCase::X);
    }
    if gamma >= sn - t {
        return Ok(RegimeCase::IX);
    }
    let hb = locate_hopf(p)?.gamma;
    if gamma <= hb + t {
        return Ok(RegimeCase::III);
    }
    let hm = locate_homoclinic_with(p, hb, sn)?.gamma;
    if (gamma - hm).abs() <= t {
        return Ok(RegimeCase::V);
    }
    if gamma < hm {
        return Ok(RegimeCase::IV);
    }
    let flc = locate_cycle_fold_with(p, hm, sn)?.gamma;
    Ok(if (gamma - flc).abs() <= t {
        RegimeCase::VII
    } else if gamma < flc {
        RegimeCase::VI
    } else {
        RegimeCase::VIII
    })
}

/// Detects the stable and (where present) unstable limit cycles on a uniform
/// `gamma` grid. Failed detections are recorded as absent rows, never errors.
pub fn trace_cycle_branch(
    p: &ModelParams,
    gamma_lo: f64,
    gamma_hi: f64,
    steps: usize,
) -> Result<Vec<CycleBranchPoint>> {
    if !(0.0 <= gamma_lo && gamma_lo < gamma_hi && gamma_hi <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 <= gamma_lo < gamma_hi <= 1, got [{gamma_lo}, {gamma_hi}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidInput(format!("steps must be >= 2, got {steps}")));
    }
    let opts = IntegrateOptions::default();
    let copts = CycleOptions::default();
    let mut out = Vec::new();
    for k in 0..steps {
        let gamma = gamma_lo + (gamma_hi - gamma_lo) * k as f64 / (steps - 1) as f64;
        let pg = p.with_gamma(gamma)?;
        let e1 = match endemic_equilibria(&pg)?.pop() {
            Some(e) => e,
            None => {
                out.push(CycleBranchPoint { gamma, period: None, stable: None, max_i: None });
                continue;
            }
        };
        match detect_limit_cycle(&pg, (e1.s, e1.i + 1.0), TimeDirection::Forward, &opts, &copts) {
            Ok(sc) => {
                out.push(CycleBranchPoint {
                    gamma,
                    period: Some(sc.period),
                    stable: Some(true),
                    max_i: Some(sc.max_i),
                });
                if let Ok(uc) = detect_limit_cycle(
                    &pg,
                    (e1.s, sc.upper_i + 2.0),
                    TimeDirection::Backward,
                    &opts,
                    &copts,
                ) {
                    out.push(CycleBranchPoint {
                        gamma,
                        period: Some(uc.period),
                        stable: Some(false),
                        max_i: Some(uc.max_i),
                    });
                }
            }
            Err(_) => {
                out.push(CycleBranchPoint { gamma, period: None, stable: None, max_i: None });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{cubic_coefficients, EquilibriumKind};

    fn paper() -> ModelParams {
        ModelParams::reference(0.1).unwrap()
    }

    #[test]
    fn admissible_sup_matches_quadratic_root() {
        // -(mu+mu')rho I^2 + (lambda rho - alpha - mu - mu') I + lambda = 0,
        // larger root 345/11 + (5/11) sqrt(9161) at the paper parameters
        let i_sup = admissible_i_sup(&paper());
        let expect = 345.0 / 11.0 + 5.0 / 11.0 * 9161f64.sqrt();
        assert!((i_sup - expect).abs() < 1e-10);
    }

    #[test]
    fn gamma_of_i_limits_and_round_trip() {
        let p = paper();
        // I -> 0+ recovers the transcritical gamma
        assert!((gamma_of_I(&p, 1e-9).unwrap() - 4969.0 / 31000.0).abs() < 1e-6);
        // round trip through the cubic at I = 30
        let g = gamma_of_I(&p, 30.0).unwrap();
        let pg = p.with_gamma(g).unwrap();
        let eqs = endemic_equilibria(&pg).unwrap();
        assert!(eqs.iter().any(|e| (e.i - 30.0).abs() < 1e-8), "{eqs:?}");
        // substituting back into the cubic gives a tiny residual
        for i in [5.0, 30.0, 60.0, 74.0] {
            let g = gamma_of_I(&p, i).unwrap();
            let c = cubic_coefficients(&ModelParams { gamma: g, ..p });
            let res = ((c.a * i + c.b) * i + c.c) * i + c.d;
            assert!(res.abs() < 1e-10, "residual {res} at I = {i}");
        }
    }

    #[test]
    fn gamma_of_i_rejects_bad_ordinates() {
        let p = paper();
        assert!(matches!(gamma_of_I(&p, 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(gamma_of_I(&p, -3.0), Err(Error::InvalidInput(_))));
        let i_sup = admissible_i_sup(&p);
        assert!(matches!(gamma_of_I(&p, i_sup), Err(Error::Singularity(_))));
        assert!(matches!(gamma_of_I(&p, i_sup + 1.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn branch_matches_direct_equilibria_and_flips_stability() {
        let p = paper();
        let branch = equilibrium_branch(&p, 1.0, 74.5, 300).unwrap();
        assert_eq!(branch.len(), 300);
        // round trip a few interior points through endemic_equilibria
        for b in branch.iter().step_by(60).filter(|b| (0.0..=1.0).contains(&b.gamma)) {
            let pg = p.with_gamma(b.gamma).unwrap();
            let eqs = endemic_equilibria(&pg).unwrap();
            assert!(
                eqs.iter()
                    .any(|e| (e.i - b.i).abs() <= 1e-6 * b.i && (e.s - b.s).abs() <= 1e-6 * b.s.max(1.0)),
                "no match for {b:?}"
            );
        }
        // stability flips across I_HB ~ 70.72
        let below = branch.iter().filter(|b| b.i < 70.0).last().unwrap();
        let above = branch.iter().find(|b| b.i > 71.5).unwrap();
        assert!(below.stability.is_unstable() != above.stability.is_unstable());
    }

    #[test]
    fn branch_rejects_bad_grids() {
        let p = paper();
        assert!(equilibrium_branch(&p, 1.0, 74.0, 1).is_err());
        assert!(equilibrium_branch(&p, 5.0, 5.0, 10).is_err());
        assert!(equilibrium_branch(&p, 0.0, 74.0, 10).is_err());
        assert!(equilibrium_branch(&p, 1.0, 100.0, 10).is_err());
    }

    #[test]
    fn transcritical_point_closed_form() {
        let p = paper();
        let tr = locate_transcritical(&p).unwrap();
        assert_eq!(tr.gamma, (0.05 * 10.0 / 0.31 - 0.01) / 10.0);
        assert!((tr.gamma - 4969.0 / 31000.0).abs() < 1e-15);
        assert!((tr.r0 - 1.0).abs() < 1e-14);
        assert_eq!(tr.i, Some(0.0));
        // beta small enough that R0(0) < 1: no solution in [0,1]
        let weak = ModelParams::new(1e-4, 10.0, 0.01, 0.1, 0.2, 0.1, 0.0).unwrap();
        assert!(matches!(locate_transcritical(&weak), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn saddle_node_point_and_optimality() {
        let p = paper();
        let sn = locate_saddle_node(&p).unwrap();
        assert!((sn.gamma - 0.3569024925).abs() < 1e-8, "gamma = {}", sn.gamma);
        assert!((sn.i.unwrap() - 65.1955050073).abs() < 1e-8, "I = {:?}", sn.i);
        assert!((sn.r0 - 0.4506543710).abs() < 1e-8, "R0 = {}", sn.r0);
        let h = 1e-4;
        let d = (gamma_of_I(&p, sn.i.unwrap() + h).unwrap()
            - gamma_of_I(&p, sn.i.unwrap() - h).unwrap())
            / (2.0 * h);
        assert!(d.abs() < 1e-9, "dgamma/dI = {d}");
        // forward regime: no interior maximum
        let mut fwd = p;
        fwd.rho = 0.0001;
        assert!(matches!(locate_saddle_node(&fwd), Err(Error::Structure(_))));
    }

    #[test]
    fn hopf_point_and_branch_derivatives() {
        let p = paper();
        let hb = locate_hopf(&p).unwrap();
        assert!((hb.gamma - 0.3496375754).abs() < 2e-5, "gamma = {}", hb.gamma);
        assert!((hb.i.unwrap() - 70.7209428218).abs() < 1e-3, "I = {:?}", hb.i);
        let h = 1e-4;
        let i_hb = hb.i.unwrap();
        let dp = (branch_p(&p, i_hb + h).unwrap().0 - branch_p(&p, i_hb - h).unwrap().0)
            / (2.0 * h);
        assert!((dp - 0.0059945065).abs() < 1e-6, "dP/dI = {dp}");
        let dg = (gamma_of_I(&p, i_hb + h).unwrap() - gamma_of_I(&p, i_hb - h).unwrap())
            / (2.0 * h);
        assert!((dg - (-0.0043073268)).abs() < 1e-6, "dgamma/dI = {dg}");
    }

    #[test]
    fn backward_bifurcation_witness() {
        let p = paper();
        let tr = locate_transcritical(&p).unwrap();
        let pg = p.with_gamma(tr.gamma + 1e-3).unwrap();
        assert!(basic_reproduction_number(&pg) < 1.0);
        let eqs = endemic_equilibria(&pg).unwrap();
        assert_eq!(eqs.len(), 2);
        assert_eq!(eqs[0].stability, StabilityClass::Saddle);
        assert!(eqs[1].stability.is_stable());
        assert!(eqs.iter().all(|e| e.kind == EquilibriumKind::Endemic));
    }

    #[test]
    fn full_set_ordering_and_classification() {
        let p = paper();
        let set = BifurcationSet::locate_all(&p).unwrap();
        let g: Vec<f64> = set.points().iter().map(|b| b.gamma).collect();
        assert!(g.windows(2).all(|w| w[0] < w[1]), "ordering violated: {g:?}");
        assert!((set.homoclinic.gamma - 0.3498971211).abs() < 5e-4);
        assert!((set.cycle_fold.gamma - 0.3500585184).abs() < 2e-4);
        let cases: Vec<RegimeCase> = [0.1, set.transcritical.gamma, 0.3, 0.3497, 0.35, 0.353,
            set.saddle_node.gamma, 0.36]
            .iter()
            .map(|&g| set.classify(g).unwrap())
            .collect();
        assert_eq!(
            cases,
            vec![
                RegimeCase::I,
                RegimeCase::II,
                RegimeCase::III,
                RegimeCase::IV,
                RegimeCase::VI,
                RegimeCase::VIII,
                RegimeCase::IX,
                RegimeCase::X
            ]
        );
        assert_eq!(set.classify(set.homoclinic.gamma).unwrap(), RegimeCase::V);
        assert_eq!(set.classify(set.cycle_fold.gamma).unwrap(), RegimeCase::VII);
        assert!(set.classify(1.5).is_err());
        // counts for the cases attached to the table
        assert_eq!(RegimeCase::III.counts().endemic_equilibria, 2);
        assert_eq!(RegimeCase::VI.counts().unstable_cycles, 1);
        assert_eq!(RegimeCase::X.counts().endemic_equilibria, 0);
    }

    #[test]
    fn lazy_classifier_agrees_on_cheap_cases() {
        let p = paper();
        assert_eq!(classify_regime(&p, 0.1).unwrap(), RegimeCase::I);
        assert_eq!(classify_regime(&p, 0.3).unwrap(), RegimeCase::III);
        assert_eq!(classify_regime(&p, 0.36).unwrap(), RegimeCase::X);
        assert!(classify_regime(&p, -0.1).is_err());
    }

    #[test]
    fn cycle_branch_stable_and_unstable_rows() {
        let p = paper();
        let rows = trace_cycle_branch(&p, 0.3497, 0.35, 2).unwrap();
        let at = |g: f64| -> Vec<&CycleBranchPoint> {
            rows.iter().filter(|r| (r.gamma - g).abs() < 1e-12).collect()
        };
        let low = at(0.3497);
        assert_eq!(low.len(), 1);
        assert_eq!(low[0].stable, Some(true));
        assert!(low[0].period.unwrap() > 0.0);
        let high = at(0.35);
        assert_eq!(high.len(), 2, "{high:?}");
        assert_eq!(high[0].stable, Some(true));
        assert_eq!(high[1].stable, Some(false));
        assert!(high[1].period.unwrap() != high[0].period.unwrap());
        assert!(high[1].max_i.unwrap() > high[0].max_i.unwrap());
        // absent rows above the fold
        let none = trace_cycle_branch(&p, 0.353, 0.355, 2).unwrap();
        assert!(none.iter().all(|r| r.period.is_none()));
        assert!(trace_cycle_branch(&p, 0.35, 0.34, 5).is_err());
    }

    #[test]
    fn csv_exports() {
        let p = paper();
        let branch = equilibrium_branch(&p, 10.0, 70.0, 4).unwrap();
        let csv = branch_to_csv(&branch);
        assert!(csv.starts_with("I,gamma,S,stability\n"));
        assert_eq!(csv.lines().count(), 5);
        let rows = vec![
            CycleBranchPoint { gamma: 0.35, period: Some(236.0), stable: Some(true), max_i: Some(76.0) },
            CycleBranchPoint { gamma: 0.353, period: None, stable: None, max_i: None },
        ];
        let csv = cycles_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "gamma,period,stable,max_I");
        assert!(lines.next().unwrap().contains(",true,"));
        let absent = lines.next().unwrap();
        assert!(absent.ends_with(",,,"));
    }
}
