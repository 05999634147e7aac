//! Closed-form results for the reduced planar system: basic reproduction
//! number, equilibria via the cubic in `I`, Descartes sign counting,
//! Jacobians and stability classification, bifurcation direction, the Dulac
//! curve, and sensitivity indices.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::{rhs_reduced, ModelParams};
use crate::{Error, Result};

/// Residual bound (scaled by `max(1, lambda/mu)`) below which a point is
/// accepted as an equilibrium of the reduced system.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-8;

/// Magnitudes of `P`, `Q` (and of eigenvalue real parts) below this scaled
/// threshold are treated as exact zeros by the stability classifier.
const ZERO_TOL: f64 = 1e-9;

/// Roots closer than this relative distance are merged and reported once.
const ROOT_MERGE_TOL: f64 = 1e-7;

/// An eigenvalue of the reduced Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// Trace–determinant stability classes of a planar equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Saddle,
    UnstableNode,
    UnstableFocus,
    DegenerateUnstableNode,
    StableNode,
    StableFocus,
    DegenerateStableNode,
    Semistable,
    Nonhyperbolic,
}

impl StabilityClass {
    /// Asymptotically stable classes.
    pub fn is_stable(&self) -> bool {
        matches!(
            self,
            StabilityClass::StableNode
                | StabilityClass::StableFocus
                | StabilityClass::DegenerateStableNode
        )
    }

    pub fn is_unstable(&self) -> bool {
        matches!(
            self,
            StabilityClass::Saddle
                | StabilityClass::UnstableNode
                | StabilityClass::UnstableFocus
                | StabilityClass::DegenerateUnstableNode
        )
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StabilityClass::Saddle => "saddle",
            StabilityClass::UnstableNode => "unstable_node",
            StabilityClass::UnstableFocus => "unstable_focus",
            StabilityClass::DegenerateUnstableNode => "degenerate_unstable_node",
            StabilityClass::StableNode => "stable_node",
            StabilityClass::StableFocus => "stable_focus",
            StabilityClass::DegenerateStableNode => "degenerate_stable_node",
            StabilityClass::Semistable => "semistable",
            StabilityClass::Nonhyperbolic => "nonhyperbolic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

/// An equilibrium point together with its linearisation data.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// Trace negation `P = -tr(J)`; endemic points only.
    #[serde(rename = "P")]
    pub p: Option<f64>,
    /// Determinant `Q = det(J)`; endemic points only.
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    pub eigenvalues: [Eigenvalue; 2],
    pub stability: StabilityClass,
    /// Set when two near-identical roots were merged (saddle-node coalescence).
    pub coalesced: bool,
}

/// Coefficients of the endemic-equilibrium cubic `a I^3 + b I^2 + c I + d = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Coefficients of the Dulac curve `a I^2 + b S I + c S + d I + e = 0`,
/// the zero set of the weighted divergence with weight `(1+gamma S)(1+rho I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DulacCurve {
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub d_t: f64,
    pub e_t: f64,
}

/// Elasticities of the basic reproduction number with respect to each
/// parameter it depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityIndices {
    pub upsilon_beta: f64,
    pub upsilon_lambda: f64,
    pub upsilon_gamma: f64,
    pub upsilon_mu: f64,
    pub upsilon_mu_prime: f64,
    pub upsilon_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationDirection {
    Forward,
    Backward,
}

/// Direction of the transcritical bifurcation at `R0 = 1`, with the branch
/// slope `dI/dR0` at `(1, 0)` and the incidence-coefficient threshold
/// separating the two directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriticalDirection {
    pub direction: BifurcationDirection,
    pub slope: f64,
    pub threshold: f64,
}

/// Basic reproduction number `beta*lambda / ((mu + gamma*lambda)(mu + mu' + alpha))`.
///
/// Strictly decreasing in `gamma`, independent of `rho`.
pub fn basic_reproduction_number(p: &ModelParams) -> f64 {
    p.beta * p.lambda / ((p.mu + p.gamma * p.lambda) * (p.mu + p.mu_prime + p.alpha))
}

/// The disease-free equilibrium `(lambda/mu, 0, 0)` with its eigenvalues and
/// stability class: stable for `R0 < 1`, semistable at `R0 = 1`, a saddle for
/// `R0 > 1`.
pub fn disease_free_equilibrium(p: &ModelParams) -> EquilibriumReport {
    let r0 = basic_reproduction_number(p);
    let e1 = -p.mu;
    let e2 = (p.beta * p.lambda - (p.mu + p.gamma * p.lambda) * (p.mu + p.mu_prime + p.alpha))
        / (p.mu + p.gamma * p.lambda);
    let stability = if (r0 - 1.0).abs() <= ZERO_TOL {
        StabilityClass::Semistable
    } else if r0 < 1.0 {
        StabilityClass::StableNode
    } else {
        StabilityClass::Saddle
    };
    EquilibriumReport {
        kind: EquilibriumKind::DiseaseFree,
        s: p.population_cap(),
        i: 0.0,
        r: 0.0,
        p: None,
        q: None,
        eigenvalues: [Eigenvalue { re: e1, im: 0.0 }, Eigenvalue { re: e2, im: 0.0 }],
        stability,
        coalesced: false,
    }
}

/// Coefficients of the cubic whose positive roots are the endemic `I` values.
pub fn cubic_coefficients(p: &ModelParams) -> CubicCoeffs {
    let r0 = basic_reproduction_number(p);
    let m = p.mu + p.gamma * p.lambda;
    let k = p.mu + p.mu_prime + p.alpha;
    let g = (p.mu + p.mu_prime) * p.gamma - p.beta;
    let a = p.rho * p.rho * (p.mu + p.mu_prime) * g;
    let b = p.rho * p.rho * m * (k * (r0 - 1.0) + p.alpha)
        + p.rho * p.alpha * p.beta
        + 2.0 * p.rho * k * g;
    let c = 2.0 * p.rho * m * k * (r0 - 1.0) + k * g + p.gamma * p.alpha * k + p.rho * p.alpha * m;
    let d = m * k * (r0 - 1.0);
    CubicCoeffs { a, b, c, d }
}

/// Possible positive-root counts of the cubic by Descartes' rule of signs:
/// the sign-change count of the non-zero coefficient sequence, descending by
/// steps of two.
pub fn descartes_possible_counts(c: &CubicCoeffs) -> BTreeSet<usize> {
    let signs: Vec<f64> = [c.a, c.b, c.c, c.d].into_iter().filter(|v| *v != 0.0).collect();
    let changes = signs.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    (0..=changes).filter(|n| (changes - n) % 2 == 0).collect()
}

/// True when `b` or `c` vanishes, i.e. the sign pattern falls outside the
/// tabulated cases (the raw Descartes rule still applies).
pub fn descartes_degenerate(c: &CubicCoeffs) -> bool {
    c.b == 0.0 || c.c == 0.0
}

fn eval_cubic(c: &CubicCoeffs, x: f64) -> f64 {
    ((c.a * x + c.b) * x + c.c) * x + c.d
}

fn eval_cubic_deriv(c: &CubicCoeffs, x: f64) -> f64 {
    (3.0 * c.a * x + 2.0 * c.b) * x + c.c
}

fn newton_polish(c: &CubicCoeffs, mut x: f64) -> f64 {
    for _ in 0..50 {
        let f = eval_cubic(c, x);
        let df = eval_cubic_deriv(c, x);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        let next = x - step;
        let scale =
            (c.a * x * x * x).abs() + (c.b * x * x).abs() + (c.c * x).abs() + c.d.abs();
        if f.abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return next;
        }
        if !next.is_finite() || (next - x).abs() <= 1e-16 * x.abs() {
            return next.is_finite().then_some(next).unwrap_or(x);
        }
        x = next;
    }
    x
}

/// All real positive roots of the cubic, counted with multiplicity.
///
/// Roots are extracted as eigenvalues of the companion matrix and polished by
/// Newton iteration; closed-form cubic formulas lose accuracy near the
/// saddle-node coalescence. A near-degenerate leading coefficient
/// (`|a| < 1e-14 * max(|b|,|c|,|d|)`) falls back to the quadratic.
pub fn positive_cubic_roots(c: &CubicCoeffs) -> Vec<f64> {
    let scale = c.b.abs().max(c.c.abs()).max(c.d.abs());
    let mut roots = Vec::new();
    if c.a.abs() < 1e-14 * scale {
        if c.b.abs() < 1e-14 * c.c.abs().max(c.d.abs()) {
            if c.c != 0.0 {
                roots.push(-c.d / c.c);
            }
        } else {
            // bx^2 + cx + d = 0, numerically stable form
            let disc = c.c * c.c - 4.0 * c.b * c.d;
            if disc >= 0.0 {
                let q = -0.5 * (c.c + c.c.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / c.b);
                    roots.push(c.d / q);
                } else {
                    roots.push(0.0);
                    roots.push(0.0);
                }
            }
        }
    } else {
        let companion = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -c.d / c.a, 1.0, 0.0, -c.c / c.a, 0.0, 1.0, -c.b / c.a],
        );
        let eig = companion.complex_eigenvalues();
        for ev in eig.iter() {
            if ev.im.abs() <= 1e-8 * ev.re.abs().max(1.0) {
                roots.push(newton_polish(c, ev.re));
            }
        }
    }
    let mut pos: Vec<f64> = roots.into_iter().filter(|r| r.is_finite() && *r > 1e-12).collect();
    pos.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pos
}

/// Susceptible coordinate of an endemic equilibrium with infected count `i`.
pub fn endemic_s(p: &ModelParams, i: f64) -> f64 {
    p.lambda / p.mu
        - i * (p.alpha / (p.mu * (1.0 + p.rho * i)) + (p.mu + p.mu_prime) / p.mu)
}

/// Recovered coordinate from `dR/dt = 0`.
pub fn endemic_r(p: &ModelParams, i: f64) -> f64 {
    p.alpha * i / (p.mu * (1.0 + p.rho * i))
}

/// `P` and `Q` (trace negation and determinant of the reduced Jacobian)
/// through the closed-form expressions, as opposed to evaluating the
/// Jacobian matrix itself.
pub fn pq_values(p: &ModelParams, s: f64, i: f64) -> (f64, f64) {
    let gs = 1.0 + p.gamma * s;
    let ri = 1.0 + p.rho * i;
    let pn = 2.0 * p.mu + p.mu_prime + p.alpha / (ri * ri) + p.beta * i / (gs * gs)
        - p.beta * s / gs;
    let qn = p.mu * p.mu
        + p.mu * p.mu_prime
        + p.mu * p.alpha / (ri * ri)
        + (p.mu + p.mu_prime) * p.beta * i / (gs * gs)
        + p.beta * p.alpha * i / (gs * gs * ri * ri)
        - p.mu * p.beta * s / gs;
    (pn, qn)
}

/// Jacobian of the reduced system at `(s, i)`.
pub fn jacobian_reduced(p: &ModelParams, s: f64, i: f64) -> [[f64; 2]; 2] {
    let gs = 1.0 + p.gamma * s;
    let ri = 1.0 + p.rho * i;
    [
        [-p.mu - p.beta * i / (gs * gs), -p.beta * s / gs],
        [
            p.beta * i / (gs * gs),
            -(p.mu + p.mu_prime) + p.beta * s / gs - p.alpha / (ri * ri),
        ],
    ]
}

fn eigenvalues_2x2(j: &[[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        [
            Eigenvalue { re: 0.5 * (tr - sq), im: 0.0 },
            Eigenvalue { re: 0.5 * (tr + sq), im: 0.0 },
        ]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Eigenvalue { re: 0.5 * tr, im: -im }, Eigenvalue { re: 0.5 * tr, im }]
    }
}

pub(crate) fn classify_pq(pn: f64, qn: f64) -> StabilityClass {
    let tol_q = ZERO_TOL * qn.abs().sqrt().max(pn.abs()).max(1.0);
    let tol_p = tol_q;
    if qn < -tol_q {
        return StabilityClass::Saddle;
    }
    if qn.abs() <= tol_q {
        // Q = 0: L-stable or unstable per the sign of P; the hyperbolic
        // reduction does not apply, so report nonhyperbolic.
        return StabilityClass::Nonhyperbolic;
    }
    if pn.abs() <= tol_p {
        return StabilityClass::Nonhyperbolic;
    }
    let disc = pn * pn - 4.0 * qn;
    let tol_d = ZERO_TOL * (pn * pn).max(4.0 * qn.abs()).max(1.0);
    if pn > 0.0 {
        if disc > tol_d {
            StabilityClass::StableNode
        } else if disc < -tol_d {
            StabilityClass::StableFocus
        } else {
            StabilityClass::DegenerateStableNode
        }
    } else if disc > tol_d {
        StabilityClass::UnstableNode
    } else if disc < -tol_d {
        StabilityClass::UnstableFocus
    } else {
        StabilityClass::DegenerateUnstableNode
    }
}

/// Stability class of an equilibrium `(s, i)` of the reduced system.
///
/// Errors if the point is not an equilibrium (residual above
/// [`EQUILIBRIUM_RESIDUAL_TOL`] scaled by `max(1, lambda/mu)`).
pub fn classify_equilibrium(p: &ModelParams, s: f64, i: f64) -> Result<StabilityClass> {
    let (ds, di) = rhs_reduced(p, s, i)?;
    let scale = p.population_cap().max(1.0);
    if ds.hypot(di) > EQUILIBRIUM_RESIDUAL_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "({s}, {i}) is not an equilibrium: residual {:.3e}",
            ds.hypot(di)
        )));
    }
    let (pn, qn) = pq_values(p, s, i);
    Ok(classify_pq(pn, qn))
}

fn endemic_report(p: &ModelParams, i: f64, coalesced: bool) -> Result<EquilibriumReport> {
    let s = endemic_s(p, i);
    let r = endemic_r(p, i);
    let stability = classify_equilibrium(p, s, i)?;
    let (pn, qn) = pq_values(p, s, i);
    let j = jacobian_reduced(p, s, i);
    Ok(EquilibriumReport {
        kind: EquilibriumKind::Endemic,
        s,
        i,
        r,
        p: Some(pn),
        q: Some(qn),
        eigenvalues: eigenvalues_2x2(&j),
        stability,
        coalesced,
    })
}

/// All admissible endemic equilibria, sorted by `I` ascending.
///
/// Positive cubic roots yield an equilibrium only when the susceptible
/// coordinate from the conservation relation is positive. Roots closer
/// than `1e-7` relative are merged and flagged as coalesced.
pub fn endemic_equilibria(p: &ModelParams) -> Result<Vec<EquilibriumReport>> {
    let coeffs = cubic_coefficients(p);
    let roots = positive_cubic_roots(&coeffs);
    let mut merged: Vec<(f64, bool)> = Vec::new();
    for r in roots {
        match merged.last_mut() {
            Some((prev, co)) if (r - *prev).abs() <= ROOT_MERGE_TOL * r.abs() => *co = true,
            _ => merged.push((r, false)),
        }
    }
    let mut out = Vec::new();
    for (i, coalesced) in merged {
        if endemic_s(p, i) > 1e-10 {
            out.push(endemic_report(p, i, coalesced)?);
        }
    }
    Ok(out)
}

/// Direction of the transcritical bifurcation at `R0 = 1`.
///
/// Backward iff `beta` exceeds `mu (mu + mu' + alpha)^3 / (alpha lambda^2 rho)`.
/// The `gamma` field of the parameters plays no role.
pub fn transcritical_direction(p: &ModelParams) -> Result<TranscriticalDirection> {
    let k = p.mu + p.mu_prime + p.alpha;
    let threshold = p.mu * k * k * k / (p.alpha * p.lambda * p.lambda * p.rho);
    if (p.beta - threshold).abs() <= 1e-14 * threshold {
        return Err(Error::Degenerate(
            "beta equals the forward/backward threshold".into(),
        ));
    }
    let denom = p.mu * k * k * k - p.alpha * p.beta * p.lambda * p.lambda * p.rho;
    let slope = p.beta * p.lambda * p.lambda * k / denom;
    let direction = if p.beta > threshold {
        BifurcationDirection::Backward
    } else {
        BifurcationDirection::Forward
    };
    Ok(TranscriticalDirection { direction, slope, threshold })
}

/// Closed-form elasticities of `R0`; each equals `(p / R0) * dR0/dp`.
pub fn sensitivity_indices(p: &ModelParams) -> SensitivityIndices {
    let m = p.mu + p.gamma * p.lambda;
    let k = p.mu + p.mu_prime + p.alpha;
    SensitivityIndices {
        upsilon_beta: 1.0,
        upsilon_lambda: p.mu / m,
        upsilon_gamma: -p.gamma * p.lambda / m,
        upsilon_mu: -p.mu * (2.0 * p.mu + p.mu_prime + p.alpha + p.gamma * p.lambda) / (k * m),
        upsilon_mu_prime: -p.mu_prime / k,
        upsilon_alpha: -p.alpha / k,
    }
}

/// Coefficients of the curve every periodic orbit must intersect.
pub fn dulac_curve(p: &ModelParams) -> DulacCurve {
    DulacCurve {
        a_t: -p.beta * p.rho,
        b_t: -4.0 * p.gamma * p.mu * p.rho - 2.0 * p.gamma * p.mu_prime * p.rho
            + 2.0 * p.beta * p.rho,
        c_t: -p.alpha * p.gamma - 3.0 * p.gamma * p.mu - p.gamma * p.mu_prime + p.beta,
        d_t: p.gamma * p.lambda * p.rho - 3.0 * p.mu * p.rho - 2.0 * p.mu_prime * p.rho - p.beta,
        e_t: p.gamma * p.lambda - p.alpha - 2.0 * p.mu - p.mu_prime,
    }
}

/// Left-hand side of the Dulac curve equation at `(s, i)`.
pub fn dulac_value(c: &DulacCurve, s: f64, i: f64) -> f64 {
    c.a_t * i * i + c.b_t * s * i + c.c_t * s + c.d_t * i + c.e_t
}
