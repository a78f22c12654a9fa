//! Executable inequality checks: each stability / continuous-dependence
//! estimate becomes a report with measured left side, a right side assembled
//! from constants computed out of recorded run data plus the discrete
//! Gagliardo-Nirenberg constant, and the resulting slack. No free tuning
//! parameters anywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{
    check_aronson_serrin_range, check_divb_admissible, Exponent, ExponentPair,
};
use crate::fields::{ClassTag, DriftSpec, Hamiltonian, LinearizedDrift, SampledDrift, SampledScalar};
use crate::gn::GnConstant;
use crate::grid::{trapezoid, GridRef, ScalarField, Trajectory};
use crate::solvers::AdjointPair;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("drift is missing the required class tag: {0}")]
    MissingTag(String),
    #[error("initial data has negative part {min} beyond tolerance")]
    NegativeInitialData { min: f64 },
    #[error("linearized drift unbounded: max speed {max} exceeds {limit}")]
    UnboundedDrift { max: f64, limit: f64 },
    #[error("exponents not admissible for this check: {0}")]
    Inadmissible(String),
    #[error("series and times length mismatch")]
    SeriesMismatch,
    #[error("Grönwall integrand is not finite (singular quadrature)")]
    DivergentIntegrand,
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
}

/// Which statement a report refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    ThmStabilityL2,
    ThmStabilityGrad,
    ThmMain2Lp,
    CorDivLrLqDual,
    ThmOneSidedLinf,
    ThmHjlipCd,
    ThmSemiconcaveCd,
    ThmSuperquadraticCd,
    CorGradientCd,
    ThmL1Cd,
    ThmIiLpCd,
    ThmIiiAsCd,
}

impl TheoremId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::ThmStabilityL2 => "thm_stability_L2",
            TheoremId::ThmStabilityGrad => "thm_stability_grad",
            TheoremId::ThmMain2Lp => "thm_main2_Lp",
            TheoremId::CorDivLrLqDual => "cor_divLrLq_dual",
            TheoremId::ThmOneSidedLinf => "thm_one_sided_Linf",
            TheoremId::ThmHjlipCd => "thm_hjlip_cd",
            TheoremId::ThmSemiconcaveCd => "thm_semiconcave_cd",
            TheoremId::ThmSuperquadraticCd => "thm_superquadratic_cd",
            TheoremId::CorGradientCd => "cor_gradient_cd",
            TheoremId::ThmL1Cd => "thm_L1_cd",
            TheoremId::ThmIiLpCd => "thm_ii_Lp_cd",
            TheoremId::ThmIiiAsCd => "thm_iii_AS_cd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    EstimateFailed,
    /// The run violated a hypothesis of the theorem; the estimate itself was
    /// not judged.
    HypothesisFailed,
}

/// JSON mapping for quantities that may be non-finite (hypothesis failures
/// carry NaN sides): `null` on the wire, NaN in memory.
pub mod json_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One verified inequality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: String,
    pub theorem: TheoremId,
    /// Sub-case label (exponent, ε, variant).
    pub label: String,
    #[serde(with = "json_f64")]
    pub lhs: f64,
    #[serde(with = "json_f64")]
    pub rhs: f64,
    #[serde(with = "json_f64")]
    pub slack: f64,
    #[serde(with = "json_f64")]
    pub tol: f64,
    pub status: CheckStatus,
    pub passed: bool,
    pub constants: BTreeMap<String, f64>,
    pub epsilon: Option<f64>,
    pub run_ref: String,
    pub notes: Vec<String>,
    /// Set on negative controls whose hypothesis failure is the point.
    #[serde(default)]
    pub expected_hypothesis_failure: bool,
}

impl EstimateReport {
    /// Builds a report; `passed ⇔ slack >= -tol` with
    /// `tol = 1e-6·max(|lhs|, |rhs|, 1)`.
    pub fn evaluate(
        theorem: TheoremId,
        label: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constants: BTreeMap<String, f64>,
        run_ref: impl Into<String>,
    ) -> EstimateReport {
        let slack = rhs - lhs;
        let tol = 1e-6 * lhs.abs().max(rhs.abs()).max(1.0);
        let passed = slack >= -tol;
        EstimateReport {
            schema: "estimate-report/v1".into(),
            theorem,
            label: label.into(),
            lhs,
            rhs,
            slack,
            tol,
            status: if passed {
                CheckStatus::Passed
            } else {
                CheckStatus::EstimateFailed
            },
            passed,
            constants,
            epsilon: None,
            run_ref: run_ref.into(),
            notes: Vec::new(),
            expected_hypothesis_failure: false,
        }
    }

    pub fn hypothesis_failure(
        theorem: TheoremId,
        label: impl Into<String>,
        constants: BTreeMap<String, f64>,
        run_ref: impl Into<String>,
        note: impl Into<String>,
    ) -> EstimateReport {
        EstimateReport {
            schema: "estimate-report/v1".into(),
            theorem,
            label: label.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            tol: f64::NAN,
            status: CheckStatus::HypothesisFailed,
            passed: false,
            constants,
            epsilon: None,
            run_ref: run_ref.into(),
            notes: vec![note.into()],
            expected_hypothesis_failure: false,
        }
    }

    pub fn expecting_hypothesis_failure(mut self) -> Self {
        self.expected_hypothesis_failure = true;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// One-line CSV row: `theorem,label,status,lhs,rhs,slack,epsilon,run`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{},{},{},{},{}",
            self.theorem.as_str(),
            self.label,
            self.status,
            self.lhs,
            self.rhs,
            self.slack,
            self.epsilon.map_or(String::from(""), |e| e.to_string()),
            self.run_ref
        )
    }

    pub const CSV_HEADER: &'static str = "theorem,label,status,lhs,rhs,slack,epsilon,run";
}

/// True when all right-hand sides agree bit for bit (the ε-independence
/// contract: only measured left sides may vary with viscosity).
pub fn rhs_bit_identical(reports: &[&EstimateReport]) -> bool {
    match reports.split_first() {
        None => true,
        Some((first, rest)) => rest
            .iter()
            .all(|r| r.rhs.to_bits() == first.rhs.to_bits()),
    }
}

/// Grönwall integrand of the L² chain:
/// `G(t) = (1-θ)·C_S·m(t)^{1/(1-θ)} + C_S·m(t)` with `m(t) = ‖div b(t)‖_q`.
fn gronwall_integrand_l2(m: f64, c_s: f64, theta: f64) -> f64 {
    (1.0 - theta) * c_s * m.powf(1.0 / (1.0 - theta)) + c_s * m
}

/// Grönwall integrand of the Lᵖ chain (no `(1-θ)C_S` on the first term).
fn gronwall_integrand_lp(m: f64, c_s: f64, theta: f64) -> f64 {
    m.powf(1.0 / (1.0 - theta)) + c_s * m
}

/// The explicit constants of the L² stability estimate:
/// `C₁ = exp(½ ∫ G)` and `C₂ = (1 + (∫ G)·C₁²)/(1-θ)`, with the integral
/// taken by trapezoid over the recorded instants. The additive 1 carries the
/// data-energy term of the integrated inequality, so the gradient bound
/// remains nontrivial for divergence-free drifts.
pub fn gronwall_constant_l2(
    times: &[f64],
    divb_qnorm: &[f64],
    c_s: f64,
    theta: f64,
) -> Result<(f64, f64), VerifyError> {
    if times.len() != divb_qnorm.len() {
        return Err(VerifyError::SeriesMismatch);
    }
    let g: Vec<f64> = divb_qnorm
        .iter()
        .map(|&m| gronwall_integrand_l2(m, c_s, theta))
        .collect();
    let integral = trapezoid(times, &g);
    if !integral.is_finite() {
        return Err(VerifyError::DivergentIntegrand);
    }
    let c1 = (0.5 * integral).exp();
    let c2 = (1.0 + integral * c1 * c1) / (1.0 - theta);
    Ok((c1, c2))
}

/// `exp(∫ G_p / (2p))`: the growth factor of the `‖ρ‖_{2p}` chain.
pub fn main2_constant(
    times: &[f64],
    divb_qnorm: &[f64],
    c_s: f64,
    theta: f64,
    p: f64,
) -> Result<f64, VerifyError> {
    if times.len() != divb_qnorm.len() {
        return Err(VerifyError::SeriesMismatch);
    }
    let g: Vec<f64> = divb_qnorm
        .iter()
        .map(|&m| gronwall_integrand_lp(m, c_s, theta))
        .collect();
    let integral = trapezoid(times, &g);
    if !integral.is_finite() {
        return Err(VerifyError::DivergentIntegrand);
    }
    Ok((integral / (2.0 * p)).exp())
}

/// Dual-side constant at exponent `p'`: the `‖ρ‖_{p'}` growth factor for a
/// probability-normalized dual density. Direct chain for `p' >= 2`,
/// interpolation against `‖ρ‖₁ = 1` for `p' ∈ (1, 2)`.
pub fn dual_constant(
    times: &[f64],
    divb_qnorm: &[f64],
    c_s: f64,
    theta: f64,
    p_prime: f64,
) -> Result<(f64, String), VerifyError> {
    if p_prime >= 2.0 {
        // ‖ρ‖_{p'} with p' = 2p̃: factor exp(∫G/(2p̃)) = exp(∫G/p').
        let c = main2_constant(times, divb_qnorm, c_s, theta, p_prime / 2.0)?;
        Ok((c, format!("direct chain at 2p = {p_prime}")))
    } else {
        // ‖ρ‖_{p'} <= ‖ρ‖₁^{1-λ} ‖ρ‖₂^λ with 1/p' = (1-λ) + λ/2.
        let lambda = 2.0 * (1.0 - 1.0 / p_prime);
        let c2 = main2_constant(times, divb_qnorm, c_s, theta, 1.0)?;
        Ok((
            c2.powf(lambda),
            format!("interpolated with lambda = {lambda} against the L1 normalization"),
        ))
    }
}

fn require_tag(want: &str, ok: bool) -> Result<(), VerifyError> {
    if ok {
        Ok(())
    } else {
        Err(VerifyError::MissingTag(want.into()))
    }
}

/// L² stability and gradient-energy checks for a Fokker-Planck run with an
/// admissible drift; returns the pair of reports.
pub fn check_thm_stability(
    spec: &DriftSpec,
    drift: &SampledDrift,
    traj: &Trajectory,
    q: Exponent,
    gn: &GnConstant,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    require_tag(
        "divb_LrLq or divergence_free",
        spec.has_tag(|t| matches!(t, ClassTag::DivbLrLq { .. } | ClassTag::DivergenceFree)),
    )?;
    let theta = gn.theta;
    let c_s = gn.c_hat;
    let times = traj.times();
    let m_series = drift.div_norm_series(times, q);
    let (c1, c2) = gronwall_constant_l2(times, &m_series, c_s, theta)?;

    let rho0_l2 = traj.first().lp_norm(Exponent::int(2))?;
    let mut max_l2 = 0.0f64;
    let mut grad_sq_series = Vec::with_capacity(times.len());
    let mut gn_violations = 0usize;
    for (_, f) in traj.iter() {
        max_l2 = max_l2.max(f.lp_norm(Exponent::int(2))?);
        let gsq: f64 = f
            .gradient()
            .iter()
            .map(|g| {
                let v = g.lp_norm(Exponent::int(2)).expect("l2");
                v * v
            })
            .sum();
        grad_sq_series.push(gsq);
        if !gn.holds_for(f) {
            gn_violations += 1;
        }
    }
    let grad_energy = trapezoid(times, &grad_sq_series);

    let mut consts = BTreeMap::new();
    consts.insert("C1".into(), c1);
    consts.insert("C_S".into(), c_s);
    consts.insert("theta".into(), theta);
    consts.insert("rho0_l2".into(), rho0_l2);
    consts.insert("gn_violations".into(), gn_violations as f64);
    let mut r1 = EstimateReport::evaluate(
        TheoremId::ThmStabilityL2,
        format!("q={q}"),
        max_l2,
        c1 * rho0_l2,
        consts.clone(),
        run_ref,
    );
    if gn_violations > 0 {
        r1 = r1.with_note(format!(
            "discrete GN inequality violated on {gn_violations} snapshots"
        ));
        r1.status = CheckStatus::EstimateFailed;
        r1.passed = false;
    }

    let mut consts2 = consts.clone();
    consts2.insert("C2".into(), c2);
    consts2.insert("rhs_unsquared_variant".into(), c2 * rho0_l2);
    let r2 = EstimateReport::evaluate(
        TheoremId::ThmStabilityGrad,
        format!("q={q}"),
        grad_energy,
        c2 * rho0_l2 * rho0_l2,
        consts2,
        run_ref,
    )
    .with_note("right side uses the squared data norm; the unsquared variant is recorded");
    Ok(vec![r1, r2])
}

/// Contraction form of the uniqueness corollary: two runs of the same
/// equation with data `δ` apart stay `C₁·δ` apart in L².
pub fn check_uniqueness_contraction(
    traj1: &Trajectory,
    traj2: &Trajectory,
    c1: f64,
    run_ref: &str,
) -> Result<EstimateReport, VerifyError> {
    let delta0 = traj1.first().sub(traj2.first()).lp_norm(Exponent::int(2))?;
    let mut worst = 0.0f64;
    for (a, b) in traj1.fields().iter().zip(traj2.fields()) {
        worst = worst.max(a.sub(b).lp_norm(Exponent::int(2))?);
    }
    let mut consts = BTreeMap::new();
    consts.insert("C1".into(), c1);
    consts.insert("delta0".into(), delta0);
    Ok(EstimateReport::evaluate(
        TheoremId::ThmStabilityL2,
        "uniqueness-contraction",
        worst,
        c1 * delta0,
        consts,
        run_ref,
    ))
}

/// `‖ρ(t)‖_p <= C ‖ρ₀‖_p` for nonnegative solutions. `p` is the norm
/// exponent: `p >= 2` uses the direct chain, `p = 1` is exact mass
/// conservation, `p ∈ (1,2)` interpolates against the unit-mass
/// normalization.
pub fn check_thm_main2(
    spec: &DriftSpec,
    drift: &SampledDrift,
    traj: &Trajectory,
    q: Exponent,
    gn: &GnConstant,
    p: f64,
    run_ref: &str,
) -> Result<EstimateReport, VerifyError> {
    require_tag(
        "divb_LrLq or divergence_free",
        spec.has_tag(|t| matches!(t, ClassTag::DivbLrLq { .. } | ClassTag::DivergenceFree)),
    )?;
    let min0 = traj.first().min();
    if min0 < -1e-6 {
        return Err(VerifyError::NegativeInitialData { min: min0 });
    }
    let times = traj.times();
    let m_series = drift.div_norm_series(times, q);
    let mass0 = traj.first().lp_norm(Exponent::int(1))?;

    if p == 1.0 {
        // Conservative scheme: the L¹ norm of a nonnegative solution is the
        // conserved mass.
        let mut dev = 0.0f64;
        for (_, f) in traj.iter() {
            dev = dev.max((f.lp_norm(Exponent::int(1))? - mass0).abs());
        }
        let mut consts = BTreeMap::new();
        consts.insert("mass0".into(), mass0);
        return Ok(EstimateReport::evaluate(
            TheoremId::ThmMain2Lp,
            "p=1 mass",
            dev,
            1e-12,
            consts,
            run_ref,
        ));
    }

    let pexp = Exponent::from_f64(p);
    let mut max_lp = 0.0f64;
    let mut gn_violations = 0usize;
    for (_, f) in traj.iter() {
        max_lp = max_lp.max(f.lp_norm(pexp)?);
        if !gn.holds_for(f) {
            gn_violations += 1;
        }
    }
    let p0 = traj.first().lp_norm(pexp)?;

    let (c, rhs, note) = if p >= 2.0 {
        let c = main2_constant(times, &m_series, gn.c_hat, gn.theta, p / 2.0)?;
        (c, c * p0, String::new())
    } else {
        let lambda = 2.0 * (1.0 - 1.0 / p);
        let c = main2_constant(times, &m_series, gn.c_hat, gn.theta, 1.0)?.powf(lambda);
        let l2_0 = traj.first().lp_norm(Exponent::int(2))?;
        (
            c,
            c * l2_0.powf(lambda) * mass0.powf(1.0 - lambda),
            format!("interpolated between L1 mass and the L2 chain, lambda = {lambda}"),
        )
    };
    let mut consts = BTreeMap::new();
    consts.insert("C".into(), c);
    consts.insert("C_S".into(), gn.c_hat);
    consts.insert("theta".into(), gn.theta);
    consts.insert("mass0".into(), mass0);
    consts.insert("p".into(), p);
    consts.insert("gn_violations".into(), gn_violations as f64);
    let mut report = EstimateReport::evaluate(
        TheoremId::ThmMain2Lp,
        format!("p={p}"),
        max_lp,
        rhs,
        consts,
        run_ref,
    );
    if !note.is_empty() {
        report = report.with_note(note);
    }
    if gn_violations > 0 {
        report = report.with_note(format!(
            "discrete GN inequality violated on {gn_violations} snapshots"
        ));
        report.status = CheckStatus::EstimateFailed;
        report.passed = false;
    }
    Ok(report)
}

/// Dual estimate for the backward transport-diffusion run:
/// `‖v(t)‖_p <= C (‖v_T‖_p + ∫_t^T ‖f(s)‖_p ds)` with `C` the dual constant
/// at the conjugate exponent. Checked at every recorded time.
#[allow(clippy::too_many_arguments)]
pub fn check_cor_dual(
    spec: &DriftSpec,
    drift: &SampledDrift,
    v_traj: &Trajectory,
    source_p_norm: impl Fn(f64) -> f64,
    q: Exponent,
    gn: &GnConstant,
    p: f64,
    run_ref: &str,
) -> Result<EstimateReport, VerifyError> {
    require_tag(
        "divb_LrLq or divergence_free",
        spec.has_tag(|t| matches!(t, ClassTag::DivbLrLq { .. } | ClassTag::DivergenceFree)),
    )?;
    let times = v_traj.times();
    let m_series = drift.div_norm_series(times, q);
    let p_prime = p / (p - 1.0);
    let (c, how) = dual_constant(times, &m_series, gn.c_hat, gn.theta, p_prime)?;

    let pexp = Exponent::from_f64(p);
    let v_terminal = v_traj.last().lp_norm(pexp)?;
    let f_norms: Vec<f64> = times.iter().map(|&t| source_p_norm(t)).collect();

    // Worst slack over recorded times; ∫_t^T via trapezoid tail sums.
    let n = times.len();
    let mut tail = vec![0.0f64; n];
    for i in (0..n - 1).rev() {
        tail[i] = tail[i + 1]
            + 0.5 * (f_norms[i] + f_norms[i + 1]) * (times[i + 1] - times[i]);
    }
    let mut worst: Option<(f64, f64, f64)> = None;
    for (i, (t, f)) in v_traj.iter().enumerate() {
        let lhs = f.lp_norm(pexp)?;
        let rhs = c * (v_terminal + tail[i]);
        let slack = rhs - lhs;
        if worst.is_none_or(|(s, _, _)| slack < s) {
            worst = Some((slack, lhs, rhs));
            let _ = t;
        }
    }
    let (_, lhs, rhs) = worst.expect("nonempty trajectory");
    let mut consts = BTreeMap::new();
    consts.insert("C_dual".into(), c);
    consts.insert("p".into(), p);
    consts.insert("p_prime".into(), p_prime);
    consts.insert("v_terminal_p".into(), v_terminal);
    Ok(EstimateReport::evaluate(
        TheoremId::CorDivLrLqDual,
        format!("p={p}"),
        lhs,
        rhs,
        consts,
        run_ref,
    )
    .with_note(how))
}

/// Inputs shared by the one-sided (singular drift) checks: two forward
/// transport runs of the same equation.
pub struct OneSidedRuns<'a> {
    pub u1: &'a Trajectory,
    pub u2: &'a Trajectory,
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    /// `∫ ‖(f₁-f₂)(t)‖_∞ dt` over the run window (0 when the sources agree).
    pub fdiff_linf_integral: f64,
}

/// Sup-norm stability under the one-sided `c1/t + c2` divergence bound,
/// the intermediate p-norm displays, and the p → ∞ monotone chain.
pub fn check_thm_one_sided(
    runs: &OneSidedRuns<'_>,
    p_display: &[u32],
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    if runs.sigma <= 0.0 {
        return Err(VerifyError::Inadmissible(
            "one-sided check needs sigma > 0".into(),
        ));
    }
    let g_diff = runs.u1.first().sub(runs.u2.first());
    let g_linf = g_diff.lp_norm(Exponent::Infinity)?;
    let tau = *runs.u1.times().last().expect("nonempty");
    let horizon = tau;

    let mut reports = Vec::new();

    // Final sup-norm display.
    let mut lhs = 0.0f64;
    for (a, b) in runs.u1.fields().iter().zip(runs.u2.fields()) {
        lhs = lhs.max(a.sub(b).lp_norm(Exponent::Infinity)?);
    }
    let (rhs, label) = if runs.fdiff_linf_integral > 0.0 {
        (
            runs.fdiff_linf_integral.exp() * (g_linf + 1.0),
            "sup-norm, distinct sources",
        )
    } else {
        (g_linf, "sup-norm contraction")
    };
    let mut consts = BTreeMap::new();
    consts.insert("c1".into(), runs.c1);
    consts.insert("c2".into(), runs.c2);
    consts.insert("sigma".into(), runs.sigma);
    consts.insert("g_diff_linf".into(), g_linf);
    consts.insert("fdiff_integral".into(), runs.fdiff_linf_integral);
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmOneSidedLinf,
        label,
        lhs,
        rhs,
        consts.clone(),
        run_ref,
    ));

    // Intermediate p-norm display at the final time:
    // ‖w(τ)‖_p <= (τ/σ)^{c1/p} e^{c2(τ-σ)/p} e^{(p-1)I/p} (‖w(σ)‖_p + (2I)^{1/p}).
    let w_sigma = g_diff.clone();
    let w_tau = runs.u1.last().sub(runs.u2.last());
    for &p in p_display {
        let pf = p as f64;
        let pexp = Exponent::int(p as i64);
        let lhs_p = w_tau.lp_norm(pexp)?;
        let factor = (tau / runs.sigma).powf(runs.c1 / pf)
            * ((runs.c2 * (tau - runs.sigma)).max(0.0) / pf).exp()
            * ((pf - 1.0) * runs.fdiff_linf_integral / pf).exp();
        let extra = if runs.fdiff_linf_integral > 0.0 {
            (2.0 * runs.fdiff_linf_integral).powf(1.0 / pf)
        } else {
            0.0
        };
        let rhs_p = factor * (w_sigma.lp_norm(pexp)? + extra);
        let mut c = consts.clone();
        c.insert("p".into(), pf);
        c.insert("gronwall_factor".into(), factor);
        reports.push(EstimateReport::evaluate(
            TheoremId::ThmOneSidedLinf,
            format!("p-display p={p}"),
            lhs_p,
            rhs_p,
            c,
            run_ref,
        ));
        let _ = horizon;
    }

    // p → ∞ realized as a monotone norm chain at the final time.
    let ps = [2i64, 4, 8, 16, 32];
    let mut prev = 0.0f64;
    let mut monotone = true;
    let mut worst_gap = f64::INFINITY;
    let sup = w_tau.lp_norm(Exponent::Infinity)?;
    for &p in &ps {
        let v = w_tau.lp_norm(Exponent::int(p))?;
        if v + 1e-12 < prev {
            monotone = false;
        }
        worst_gap = worst_gap.min(sup + 1e-8 - v);
        prev = v;
    }
    let mut c = consts.clone();
    c.insert("sup_norm".into(), sup);
    let mut rep = EstimateReport::evaluate(
        TheoremId::ThmOneSidedLinf,
        "p-monotone chain",
        if monotone { 0.0 } else { 1.0 },
        0.0,
        c,
        run_ref,
    )
    .with_note("lhs is 0 when the p-norm sequence is nondecreasing and below the sup norm");
    if worst_gap < 0.0 {
        rep.lhs = -worst_gap;
        rep.slack = rep.rhs - rep.lhs;
        rep.passed = false;
        rep.status = CheckStatus::EstimateFailed;
    }
    reports.push(rep);
    Ok(reports)
}

/// Continuous dependence through the duality pairing: sup-norm bound,
/// conservation of the dual mass, and the discrete pairing identity.
pub fn check_thm_hjlip(
    pair: &AdjointPair,
    fdiff_linf_integral: f64,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    let speed_limit = 1e3;
    if pair.max_drift_speed > speed_limit {
        return Err(VerifyError::UnboundedDrift {
            max: pair.max_drift_speed,
            limit: speed_limit,
        });
    }
    let g_linf = pair.w.last().lp_norm(Exponent::Infinity)?;
    let mut lhs = 0.0f64;
    for (_, w) in pair.w.iter() {
        lhs = lhs.max(w.lp_norm(Exponent::Infinity)?);
    }
    let rhs = g_linf + fdiff_linf_integral;
    let mut consts = BTreeMap::new();
    consts.insert("g_diff_linf".into(), g_linf);
    consts.insert("fdiff_integral".into(), fdiff_linf_integral);
    consts.insert("max_drift_speed".into(), pair.max_drift_speed);
    let mut reports = vec![EstimateReport::evaluate(
        TheoremId::ThmHjlipCd,
        "sup-norm continuous dependence",
        lhs,
        rhs,
        consts.clone(),
        run_ref,
    )];

    // Dual mass conservation.
    let mass_dev = pair
        .mass_series
        .iter()
        .fold(0.0f64, |m, &v| m.max((v - pair.mass_series[0]).abs()));
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmHjlipCd,
        "dual mass conservation",
        mass_dev,
        1e-10,
        consts.clone(),
        run_ref,
    ));

    // The discrete pairing identity, judged relative to the stable
    // Cauchy-Schwarz magnitude of the paired terms.
    let scale = pair.pairing_scale.max(1e-12);
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmHjlipCd,
        "duality identity",
        pair.duality_residual.abs(),
        1e-5 * scale,
        consts,
        run_ref,
    ));
    Ok(reports)
}

/// Largest eigenvalue of the spectral Hessian of `u`, maximized over the grid.
fn hessian_max_eigenvalue(u: &ScalarField) -> f64 {
    let grid = u.grid().clone();
    match grid.dim() {
        1 => u.derivative(0).derivative(0).max(),
        _ => {
            let uxx = u.derivative(0).derivative(0);
            let uxy = u.derivative(0).derivative(1);
            let uyy = u.derivative(1).derivative(1);
            let mut m = f64::NEG_INFINITY;
            for i in 0..grid.len() {
                let (a, b, c) = (uxx.values()[i], uxy.values()[i], uyy.values()[i]);
                let tr = 0.5 * (a + c);
                let det = (0.5 * (a - c)).powi(2) + b * b;
                m = m.max(tr + det.sqrt());
            }
            m
        }
    }
}

/// Semiconcavity-type continuous dependence: the one-sided Hessian bound
/// `D²u <= (c1/t + c2)·I` is verified a posteriori from the runs; violating
/// runs are routed to hypothesis failure. On passing runs the divergence of
/// the linearized drift obeys `-div b <= Λ·n·(c1/t + c2)⁺` and the sup-norm
/// conclusion is checked.
pub fn check_thm_semiconcave(
    pair: &AdjointPair,
    hamiltonian: &Hamiltonian,
    c1: f64,
    c2: f64,
    fdiff_linf_integral: f64,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    let times = pair.u1.times();
    let sigma = times[0].max(1e-12);

    // A posteriori hypothesis: max eig D²u_i(·,t) <= c1/t + c2.
    let mut worst_excess = f64::NEG_INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    for traj in [&pair.u1, &pair.u2] {
        for (t, u) in traj.iter() {
            let e = hessian_max_eigenvalue(u);
            eig_max = eig_max.max(e);
            worst_excess = worst_excess.max(e - (c1 / t.max(sigma) + c2));
        }
    }
    let mut consts = BTreeMap::new();
    consts.insert("c1".into(), c1);
    consts.insert("c2".into(), c2);
    consts.insert("hessian_eig_max".into(), eig_max);
    consts.insert("hessian_excess".into(), worst_excess);

    if worst_excess > 1e-9 {
        return Ok(vec![EstimateReport::hypothesis_failure(
            TheoremId::ThmSemiconcaveCd,
            "semiconcavity hypothesis",
            consts,
            run_ref,
            format!(
                "measured max Hessian eigenvalue exceeds c1/t + c2 by {worst_excess:.3e}"
            ),
        )]);
    }

    // Ellipticity upper bound Λ of D²H over the gradients seen in the run.
    let mut lambda_up = 0.0f64;
    let grid = pair.w.grid().clone();
    let dim = grid.dim();
    for traj in [&pair.u1, &pair.u2] {
        for (_, u) in traj.iter() {
            let g = u.gradient();
            for i in 0..grid.len() {
                let p = [
                    g[0].values()[i],
                    if dim == 2 { g[1].values()[i] } else { 0.0 },
                ];
                let h = hamiltonian.hessian(p)?;
                let tr = 0.5 * (h[0][0] + h[1][1]);
                let det = (0.5 * (h[0][0] - h[1][1])).powi(2) + h[0][1] * h[1][0];
                lambda_up = lambda_up.max(tr + det.sqrt().max(0.0));
            }
        }
    }
    consts.insert("Lambda".into(), lambda_up);

    // Divergence bound inherited through the Hessian trace.
    let ld = LinearizedDrift::new(&pair.u1, &pair.u2, hamiltonian.clone());
    let mut div_excess = f64::NEG_INFINITY;
    for &t in times {
        let neg_div = ld.divergence(t)?.map(|v| -v).max();
        let bound = lambda_up * dim as f64 * (c1 / t.max(sigma) + c2).max(0.0);
        div_excess = div_excess.max(neg_div - bound);
    }
    let mut reports = vec![EstimateReport::evaluate(
        TheoremId::ThmSemiconcaveCd,
        "-div b <= Λ·n·(c1/t + c2)",
        div_excess.max(0.0),
        0.0,
        consts.clone(),
        run_ref,
    )
    .with_note("lhs is the worst pointwise excess over the recorded times")];

    // Conclusion: the sup-norm bound with the one-sided machinery.
    let g_linf = pair.w.last().lp_norm(Exponent::Infinity)?;
    let mut lhs = 0.0f64;
    for (_, w) in pair.w.iter() {
        lhs = lhs.max(w.lp_norm(Exponent::Infinity)?);
    }
    let rhs = if fdiff_linf_integral > 0.0 {
        fdiff_linf_integral.exp() * (g_linf + 1.0)
    } else {
        g_linf
    };
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmSemiconcaveCd,
        "sup-norm conclusion",
        lhs,
        rhs,
        consts,
        run_ref,
    ));
    Ok(reports)
}

/// Superquadratic continuous dependence: verifies the pointwise divergence
/// bound `-div b <= K`, with `K` assembled from the Lipschitz regime for
/// `γ > 2` and the unit-prefactor regime for `γ ∈ (1, 2]`, then the
/// conclusion with `c1 = 0, c2 = K`. Runs violating the declared `Δu <= C`
/// hypothesis are routed to hypothesis-failure status.
pub fn check_thm_superquadratic(
    pair: &AdjointPair,
    hamiltonian: &Hamiltonian,
    gamma: f64,
    declared_delta_u_bound: f64,
    fdiff_linf_integral: f64,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    // Measure the hypothesis quantities from the run.
    let mut c_meas = f64::NEG_INFINITY;
    let mut lip = 0.0f64;
    for traj in [&pair.u1, &pair.u2] {
        for (_, u) in traj.iter() {
            c_meas = c_meas.max(u.laplacian().max());
            for g in u.gradient() {
                lip = lip.max(g.max_abs());
            }
        }
    }
    let mut consts = BTreeMap::new();
    consts.insert("gamma".into(), gamma);
    consts.insert("delta_u_measured".into(), c_meas);
    consts.insert("delta_u_declared".into(), declared_delta_u_bound);
    consts.insert("lipschitz".into(), lip);

    if c_meas > declared_delta_u_bound * (1.0 + 1e-9) + 1e-12 {
        return Ok(vec![EstimateReport::hypothesis_failure(
            TheoremId::ThmSuperquadraticCd,
            format!("gamma={gamma}"),
            consts,
            run_ref,
            format!(
                "semi-superharmonicity hypothesis violated: measured max Δu = {c_meas} \
                 exceeds declared bound {declared_delta_u_bound}"
            ),
        )]);
    }

    // K from the two growth regimes of the Hessian trace.
    let c_plus = c_meas.max(0.0);
    let k = if gamma <= 2.0 {
        gamma * c_plus
    } else {
        let s = 1.0 + lip * lip;
        gamma * (gamma - 2.0) * s.powf(gamma / 2.0 - 2.0) * lip * lip
            + gamma * s.powf(gamma / 2.0 - 1.0) * c_plus
    };
    consts.insert("K".into(), k);

    // (a) pointwise -div b <= K at the recorded times.
    let ld = LinearizedDrift::new(&pair.u1, &pair.u2, hamiltonian.clone());
    let mut neg_div_max = f64::NEG_INFINITY;
    for &t in pair.u1.times() {
        let div = ld.divergence(t)?;
        neg_div_max = neg_div_max.max(div.map(|v| -v).max());
    }
    let mut reports = vec![EstimateReport::evaluate(
        TheoremId::ThmSuperquadraticCd,
        format!("pointwise -div b <= K, gamma={gamma}"),
        neg_div_max,
        k,
        consts.clone(),
        run_ref,
    )];

    // (b) the conclusion with c1 = 0, c2 = K.
    let g_linf = pair.w.last().lp_norm(Exponent::Infinity)?;
    let mut lhs = 0.0f64;
    for (_, w) in pair.w.iter() {
        lhs = lhs.max(w.lp_norm(Exponent::Infinity)?);
    }
    let rhs = if fdiff_linf_integral > 0.0 {
        fdiff_linf_integral.exp() * (g_linf + 1.0)
    } else {
        g_linf
    };
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmSuperquadraticCd,
        format!("conclusion, gamma={gamma}"),
        lhs,
        rhs,
        consts,
        run_ref,
    ));
    Ok(reports)
}

/// Gradient continuous dependence: the exact integration-by-parts identity
/// and the corollary inequality, plus the per-time Hölder step.
pub fn check_cor_gradient(
    pair: &AdjointPair,
    fdiff_linf_integral: f64,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    let times = pair.w.times();
    let g_linf = pair.w.last().lp_norm(Exponent::Infinity)?;
    let data_rhs = g_linf + fdiff_linf_integral;

    let mut identity_dev = 0.0f64;
    let mut identity_scale = 0.0f64;
    let mut lap_l1_series = Vec::with_capacity(times.len());
    let mut grad_sq = Vec::with_capacity(times.len());
    let mut holder_worst: Option<(f64, f64, f64)> = None;
    let mut bound_worst: Option<(f64, f64, f64)> = None;
    for (_, w) in pair.w.iter() {
        let lap = w.laplacian();
        let gsq: f64 = w
            .gradient()
            .iter()
            .map(|g| {
                let v = g.lp_norm(Exponent::int(2)).expect("l2");
                v * v
            })
            .sum();
        let minus_w_lap = -w.inner(&lap);
        identity_dev = identity_dev.max((gsq - minus_w_lap).abs());
        identity_scale = identity_scale.max(gsq.abs());
        let lap_l1 = lap.lp_norm(Exponent::int(1))?;
        lap_l1_series.push(lap_l1);
        grad_sq.push(gsq);
        // Hölder step: ∫|Dw|² <= ‖w‖_∞ ‖Δw‖₁ at each time.
        let hrhs = w.lp_norm(Exponent::Infinity)? * lap_l1;
        let slack = hrhs - gsq;
        if holder_worst.is_none_or(|(s, _, _)| slack < s) {
            holder_worst = Some((slack, gsq, hrhs));
        }
        // Corollary bound, per time as the chain produces it:
        // ∫|Dw(t)|² <= ‖Δw(t)‖₁ · (‖g₁-g₂‖_∞ + ∫‖f₁-f₂‖_∞).
        let brhs = lap_l1 * data_rhs;
        let bslack = brhs - gsq;
        if bound_worst.is_none_or(|(s, _, _)| bslack < s) {
            bound_worst = Some((bslack, gsq, brhs));
        }
    }
    let lap_l1_qt = trapezoid(times, &lap_l1_series);

    let mut consts = BTreeMap::new();
    consts.insert("lap_l1_qt".into(), lap_l1_qt);
    consts.insert("data_rhs".into(), data_rhs);
    consts.insert(
        "rhs_qt_integrated_variant".into(),
        lap_l1_qt * data_rhs,
    );

    let mut reports = vec![EstimateReport::evaluate(
        TheoremId::CorGradientCd,
        "integration by parts identity",
        identity_dev,
        1e-10 * identity_scale.max(1.0),
        consts.clone(),
        run_ref,
    )];
    let (_, blhs, brhs) = bound_worst.expect("nonempty");
    reports.push(
        EstimateReport::evaluate(
            TheoremId::CorGradientCd,
            "gradient bound",
            blhs,
            brhs,
            consts.clone(),
            run_ref,
        )
        .with_note(
            "right side uses the per-time ‖Δw(t)‖₁ the chain produces; the \
             space-time-integrated variant is recorded in the constants",
        ),
    );
    let (_, hl, hr) = holder_worst.expect("nonempty");
    reports.push(EstimateReport::evaluate(
        TheoremId::CorGradientCd,
        "pointwise-in-time Hölder step",
        hl,
        hr,
        consts,
        run_ref,
    ));
    Ok(reports)
}

/// Smoothed sign `w/√(w² + δ²)`, the dual datum of the L¹ estimate.
pub fn smoothed_sign(w: &ScalarField, delta: f64) -> ScalarField {
    w.map(move |v| v / (v * v + delta * delta).sqrt())
}

/// `‖sgn_δ(w) - sgn(w)‖₁`: the recorded smoothing error of the dual datum.
///
/// The sign transition layer has width `O(δ / |Dw|)`, far below the solver
/// grid spacing, so the quadrature runs on a trigonometric refinement of `w`
/// fine enough to resolve it (capped in 2D, where the recorded value is an
/// estimate).
pub fn smoothing_error(w: &ScalarField, delta: f64) -> f64 {
    let grid = w.grid();
    let slope = w
        .gradient()
        .iter()
        .map(|g| g.max_abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let wanted = (8.0 * slope / delta).ceil() as usize;
    let cap = if grid.dim() == 1 { 1 << 16 } else { 1 << 10 };
    let n_fine = wanted
        .next_power_of_two()
        .clamp(grid.points_per_axis(), cap);
    let fine = w.refine(n_fine);
    let mut acc = 0.0;
    for &v in fine.values() {
        let sgn = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        acc += (v / (v * v + delta * delta).sqrt() - sgn).abs();
    }
    acc * fine.grid().quadrature_weight()
}

/// L¹ continuous dependence with the smoothed-sign dual datum: the main
/// bound, the dual maximum-principle step, and the recorded δ-error.
#[allow(clippy::too_many_arguments)]
pub fn check_thm_l1(
    pair: &AdjointPair,
    hamiltonian: &Hamiltonian,
    delta: f64,
    fdiff_l1_integral: f64,
    run_ref: &str,
) -> Result<Vec<EstimateReport>, VerifyError> {
    let times = pair.w.times();
    // K(t) = max_x [-div b]⁺ measured from the run.
    let ld = LinearizedDrift::new(&pair.u1, &pair.u2, hamiltonian.clone());
    let mut k_series = Vec::with_capacity(times.len());
    for &t in times {
        let div = ld.divergence(t)?;
        k_series.push(div.map(|v| -v).max().max(0.0));
    }
    let k_integral = trapezoid(times, &k_series);

    let g_l1 = pair.w.last().lp_norm(Exponent::int(1))?;
    let mut lhs = 0.0f64;
    for (_, w) in pair.w.iter() {
        lhs = lhs.max(w.lp_norm(Exponent::int(1))?);
    }
    let rhs = k_integral.exp() * (g_l1 + fdiff_l1_integral);

    let delta_err = smoothing_error(pair.w.first(), delta);
    let mut consts = BTreeMap::new();
    consts.insert("K_integral".into(), k_integral);
    consts.insert("delta".into(), delta);
    consts.insert("delta_error_l1".into(), delta_err);
    consts.insert("g_diff_l1".into(), g_l1);

    let mut reports = vec![EstimateReport::evaluate(
        TheoremId::ThmL1Cd,
        "L1 continuous dependence",
        lhs,
        rhs,
        consts.clone(),
        run_ref,
    )
    .with_note(format!("smoothing error of the sign datum: {delta_err:.3e}"))];

    // Dual sup bound: ‖ρ(t)‖_∞ <= exp(∫K)·‖ρ_τ‖_∞.
    let rho_tau_linf = pair.rho.first().lp_norm(Exponent::Infinity)?;
    let mut rho_max = 0.0f64;
    for (_, r) in pair.rho.iter() {
        rho_max = rho_max.max(r.lp_norm(Exponent::Infinity)?);
    }
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmL1Cd,
        "dual maximum principle",
        rho_max,
        k_integral.exp() * rho_tau_linf,
        consts.clone(),
        run_ref,
    ));

    // Recorded δ-error stays below 1% of the measured left side.
    reports.push(EstimateReport::evaluate(
        TheoremId::ThmL1Cd,
        "delta error below 1%",
        delta_err,
        0.01 * lhs.max(1e-300),
        consts,
        run_ref,
    ));
    Ok(reports)
}

/// Young-inequality constant: `x·y <= eps·x^u + C·y^{u'}` with
/// `C = (1/u')·(u·eps)^{-u'/u}`.
pub fn young_constant(u: f64, eps: f64) -> f64 {
    let u_conj = u / (u - 1.0);
    (1.0 / u_conj) * (u * eps).powf(-u_conj / u)
}

/// Which reduction the `L^p` continuous dependence check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IiMode {
    /// `[div(D_pH(Du_θ))]⁺ ∈ L^r_t L^q_x` with `n/(2q) + 1/r <= 1`.
    DivLrLq,
    /// `D_pH(Du_θ) ∈ L^R_t L^Q_x` with `n/(2Q) + 1/R <= 1/2`, `R >= 2`, `Q > n`.
    AsLRLQ,
}

/// `L^p` continuous dependence for the Hamilton-Jacobi pair through the
/// drift-divergence (mode ii) or Aronson-Serrin (mode iii) reduction.
#[allow(clippy::too_many_arguments)]
pub fn check_thm_ii_and_iii(
    pair: &AdjointPair,
    hamiltonian: &Hamiltonian,
    mode: IiMode,
    p: f64,
    q: Exponent,
    r: Exponent,
    gn: &GnConstant,
    fdiff_p_integral: f64,
    run_ref: &str,
) -> Result<EstimateReport, VerifyError> {
    let grid = pair.w.grid().clone();
    let n = grid.dim() as u32;
    let times = pair.w.times();
    let ld = LinearizedDrift::new(&pair.u1, &pair.u2, hamiltonian.clone());
    let p_prime = p / (p - 1.0);

    let (c, theorem, how) = match mode {
        IiMode::DivLrLq => {
            let verdict = check_divb_admissible(&ExponentPair::new(n, q, r));
            if !verdict.admissible {
                return Err(VerifyError::Inadmissible(verdict.to_string()));
            }
            // Jensen majorant: θ-average of the positive part of
            // div D_pH(Du_θ), measured in L^q at the recorded times.
            let mut series = Vec::with_capacity(times.len());
            for &t in times {
                let s = ld.divergence_positive_part_avg(t)?;
                series.push(s.lp_norm(q)?);
            }
            let (c, how) = dual_constant(times, &series, gn.c_hat, gn.theta, p_prime)?;
            (c, TheoremId::ThmIiLpCd, how)
        }
        IiMode::AsLRLQ => {
            if !check_aronson_serrin_range(n, q, r) {
                return Err(VerifyError::Inadmissible(format!(
                    "(n={n}, Q={q}, R={r}) outside the Aronson-Serrin range"
                )));
            }
            // ‖ |b(t)| ‖_Q series, absorbed through GN at q̃ = Q/2 and Young.
            let mut series = Vec::with_capacity(times.len());
            for &t in times {
                let b = ld.eval(t)?;
                let mag = magnitude(&b);
                series.push(mag.lp_norm(q)?);
            }
            let theta_tilde = n as f64 / q.as_f64();
            let u = 2.0 / (1.0 + theta_tilde);
            let cy = young_constant(u, 0.25);
            let g3: Vec<f64> = series
                .iter()
                .map(|&mb| {
                    2.0 * (cy * (gn.c_hat.sqrt() * mb).powf(2.0 / (1.0 - theta_tilde))
                        + gn.c_hat * mb * mb)
                })
                .collect();
            let integral = trapezoid(times, &g3);
            if !integral.is_finite() {
                return Err(VerifyError::DivergentIntegrand);
            }
            let c2_chain = (integral / 2.0).exp();
            let c = if p_prime >= 2.0 {
                c2_chain.powf(2.0 / p_prime)
            } else {
                let lambda = 2.0 * (1.0 - 1.0 / p_prime);
                c2_chain.powf(lambda)
            };
            (
                c,
                TheoremId::ThmIiiAsCd,
                format!("energy chain with Young constant {cy:.4}"),
            )
        }
    };

    let pexp = Exponent::from_f64(p);
    let g_p = pair.w.last().lp_norm(pexp)?;
    let mut lhs = 0.0f64;
    for (_, w) in pair.w.iter() {
        lhs = lhs.max(w.lp_norm(pexp)?);
    }
    let rhs = c * (g_p + fdiff_p_integral);
    let mut consts = BTreeMap::new();
    consts.insert("C".into(), c);
    consts.insert("p".into(), p);
    consts.insert("g_diff_p".into(), g_p);
    Ok(EstimateReport::evaluate(
        theorem,
        format!("p={p}"),
        lhs,
        rhs,
        consts,
        run_ref,
    )
    .with_note(how))
}

fn magnitude(v: &[ScalarField]) -> ScalarField {
    let grid = v[0].grid().clone();
    let mut vals = vec![0.0; grid.len()];
    for (idx, val) in vals.iter_mut().enumerate() {
        let s: f64 = v.iter().map(|c| c.values()[idx] * c.values()[idx]).sum();
        *val = s.sqrt();
    }
    ScalarField::from_values(&grid, vals)
}

impl<'a> LinearizedDrift<'a> {
    /// θ-average of `[div D_pH(Du_θ)]⁺` (positive part inside the average):
    /// the Jensen majorant of `[div b]⁻` used by the mode-ii reduction.
    pub fn divergence_positive_part_avg(
        &self,
        t: f64,
    ) -> Result<ScalarField, crate::fields::FieldError> {
        let i1 = self
            .u1
            .index_at(t, 1e-9)
            .ok_or(crate::fields::FieldError::TimeOutOfRange { t })?;
        let i2 = self
            .u2
            .index_at(t, 1e-9)
            .ok_or(crate::fields::FieldError::TimeOutOfRange { t })?;
        let u1 = self.u1.field(i1);
        let u2 = self.u2.field(i2);
        let grid = u1.grid().clone();
        let dim = grid.dim();
        let g1 = u1.gradient();
        let g2 = u2.gradient();
        let hess = |u: &ScalarField| -> Vec<ScalarField> {
            let mut out = Vec::new();
            for a in 0..dim {
                for b in a..dim {
                    out.push(u.derivative(a).derivative(b));
                }
            }
            out
        };
        let h1 = hess(u1);
        let h2 = hess(u2);
        let entry = |a: usize, b: usize| -> usize {
            match (dim, a, b) {
                (1, 0, 0) => 0,
                (2, 0, 0) => 0,
                (2, 0, 1) | (2, 1, 0) => 1,
                (2, 1, 1) => 2,
                _ => unreachable!(),
            }
        };
        let len = grid.len();
        let mut vals = vec![0.0; len];
        for idx in 0..len {
            let mut acc = 0.0;
            for &(theta, w) in &self.theta_quadrature {
                let p = [
                    theta * g1[0].values()[idx] + (1.0 - theta) * g2[0].values()[idx],
                    if dim == 2 {
                        theta * g1[1].values()[idx] + (1.0 - theta) * g2[1].values()[idx]
                    } else {
                        0.0
                    },
                ];
                let hm = self.hamiltonian.hessian(p)?;
                let mut tr = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        let mix = theta * h1[entry(a, b)].values()[idx]
                            + (1.0 - theta) * h2[entry(a, b)].values()[idx];
                        tr += hm[a][b] * mix;
                    }
                }
                acc += w * tr.max(0.0);
            }
            vals[idx] = acc;
        }
        Ok(ScalarField::from_values(&grid, vals))
    }
}

/// Independent reference for the quadratic-Hamiltonian problem with source
/// zero: `u = -2ε·log φ` where `φ(t)` is the exact spectral heat evolution
/// of `exp(-g/(2ε))` backward from the horizon. Never touches the IMEX path.
pub fn cole_hopf_reference(
    g_terminal: &ScalarField,
    eps: f64,
    horizon: f64,
    times: &[f64],
) -> Trajectory {
    assert!(eps > 0.0);
    let grid = g_terminal.grid().clone();
    let phi_t = g_terminal.map(|v| (-v / (2.0 * eps)).exp());
    let spec_t = phi_t.to_spectrum();
    let mut traj = Trajectory::new();
    for &t in times {
        let mut spec = spec_t.clone();
        grid.spectral()
            .heat_multiplier_spec(&mut spec, eps * (horizon - t));
        let phi = ScalarField::from_spectrum(&grid, &spec);
        let u = phi.map(|v| -2.0 * eps * v.ln());
        traj.push(t, u).expect("increasing times");
    }
    traj
}

/// The classical nonuniqueness demonstration for the first-order equation
/// `-∂_t u + u_x² = 0` on a periodized window, with the exact solutions
/// `u₁ = 0`, `u₂ = |x| + t`, `u₃ = (t - |x|)⁺` (distance taken on the torus).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BentonReport {
    /// sup |u₃ - u₁| at t = 0.5 (expected 0.5: the two share datum 0).
    pub separation_at_half: f64,
    /// Max |−∂_t u + u_x²| of each solution off the kink set (exact zeros).
    pub residual_u1: f64,
    pub residual_u2: f64,
    pub residual_u3: f64,
    /// Fitted log-log slope of `max_x (Δ_h u₃)⁺` against `h`.
    pub kink_slope: f64,
    /// Per-grid `(h, max_x (Δ_h u₃)⁺)` samples behind the fit.
    pub kink_samples: Vec<(f64, f64)>,
    /// max Δu₁ (identically zero: u₁ satisfies every one-sided bound).
    pub u1_laplacian_max: f64,
}

impl BentonReport {
    pub fn passes(&self) -> bool {
        self.separation_at_half >= 0.4
            && self.residual_u1 == 0.0
            && self.residual_u2 == 0.0
            && self.residual_u3 == 0.0
            && self.kink_slope >= -1.1
            && self.kink_slope <= -0.9
            && self.u1_laplacian_max <= 1e-12
    }
}

fn torus_distance(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    y.min(1.0 - y)
}

/// Runs the nonuniqueness demonstration at desk scale.
pub fn benton_demo() -> BentonReport {
    let u1 = |_x: f64, _t: f64| 0.0f64;
    let u2 = |x: f64, t: f64| torus_distance(x) + t;
    let u3 = |x: f64, t: f64| (t - torus_distance(x)).max(0.0);

    // Exact a.e. residual of -∂_t u + u_x² off the kink sets.
    let residual = |u: &dyn Fn(f64, f64) -> f64, x: f64, t: f64| -> f64 {
        let eps = 1e-6;
        let dt = (u(x, t + eps) - u(x, t - eps)) / (2.0 * eps);
        let dx = (u(x + eps, t) - u(x - eps, t)) / (2.0 * eps);
        -dt + dx * dx
    };
    let t_probe = 0.3;
    let off_kink = |x: f64| {
        let d = torus_distance(x);
        (d - t_probe).abs() > 1e-3 && d > 1e-3 && (0.5 - d) > 1e-3
    };
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    let mut r3 = 0.0f64;
    for i in 0..997 {
        let x = i as f64 / 997.0;
        if !off_kink(x) {
            continue;
        }
        r1 = r1.max(residual(&|x, t| u1(x, t), x, t_probe).abs());
        r2 = r2.max(residual(&|x, t| u2(x, t), x, t_probe).abs());
        r3 = r3.max(residual(&|x, t| u3(x, t), x, t_probe).abs());
    }
    // The centered differences of the piecewise-linear formulas are exact in
    // f64 away from kinks; snap round-off to true zero.
    let snap = |v: f64| if v < 1e-9 { 0.0 } else { v };

    // Separation of u₃ from u₁ at t = 0.5 despite identical data at t = 0.
    let mut sep = 0.0f64;
    for i in 0..1024 {
        let x = i as f64 / 1024.0;
        sep = sep.max((u3(x, 0.5) - u1(x, 0.5)).abs());
    }

    // Discrete Laplacian at the kink grows like 1/h; t = 1/3 keeps the kink
    // offset pattern identical across the dyadic grids.
    let t_kink = 1.0 / 3.0;
    let mut samples = Vec::new();
    for n in [64usize, 128, 256, 512] {
        let h = 1.0 / n as f64;
        let mut m = 0.0f64;
        for i in 0..n {
            let x = i as f64 * h;
            let lap = (u3(x + h, t_kink) - 2.0 * u3(x, t_kink) + u3(x - h, t_kink)) / (h * h);
            m = m.max(lap);
        }
        samples.push((h, m));
    }
    let slope = {
        let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };

    BentonReport {
        separation_at_half: sep,
        residual_u1: snap(r1),
        residual_u2: snap(r2),
        residual_u3: snap(r3),
        kink_slope: slope,
        kink_samples: samples,
        u1_laplacian_max: 0.0,
    }
}

/// Convenience: `∫ ‖(f₁-f₂)(t)‖_p dt` along given times by trapezoid.
pub fn source_diff_norm_integral(
    grid: &GridRef,
    f1: Option<&SampledScalar>,
    f2: Option<&SampledScalar>,
    times: &[f64],
    p: Exponent,
) -> f64 {
    let series: Vec<f64> = times
        .iter()
        .map(|&t| {
            let mut d = match f1 {
                Some(f) => f.at(t),
                None => ScalarField::zeros(grid),
            };
            if let Some(f) = f2 {
                d.axpy(-1.0, &f.at(t));
            }
            d.lp_norm(p).expect("valid p")
        })
        .collect();
    trapezoid(times, &series)
}

/// A second, quadrature-based route to the mixed norm of a sampled field
/// magnitude, used by a few checks that need `L^p` norms of the drift itself.
pub fn velocity_magnitude_norm(
    drift_velocity: &[ScalarField],
    p: Exponent,
) -> Result<f64, VerifyError> {
    Ok(magnitude(drift_velocity).lp_norm(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn gronwall_constants_without_divergence() {
        // Empty integrand: C₁ = 1 and C₂ reduces to the bare data-energy
        // factor 1/(1-θ).
        let times = [0.0, 0.5, 1.0];
        let series = [0.0, 0.0, 0.0];
        let (c1, c2) = gronwall_constant_l2(&times, &series, 1.05, 0.5).unwrap();
        assert_eq!(c1, 1.0);
        assert_eq!(c2, 2.0);
    }

    #[test]
    fn gronwall_constant_matches_closed_form_for_constant_series() {
        // m(t) ≡ m on [0,T]: C₁ = exp(½·T·[(1-θ)C_S m^{1/(1-θ)} + C_S m]).
        let (c_s, theta, m, t_end) = (1.05, 0.5, 2.0, 0.7);
        let times: Vec<f64> = (0..=100).map(|i| t_end * i as f64 / 100.0).collect();
        let series = vec![m; times.len()];
        let (c1, _) = gronwall_constant_l2(&times, &series, c_s, theta).unwrap();
        let expect =
            (0.5 * t_end * ((1.0 - theta) * c_s * m.powf(2.0) + c_s * m)).exp();
        assert!((c1 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn gronwall_constant_monotone_in_series() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let series: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
        let doubled: Vec<f64> = series.iter().map(|m| 2.0 * m).collect();
        let (c1a, _) = gronwall_constant_l2(&times, &series, 1.05, 0.5).unwrap();
        let (c1b, _) = gronwall_constant_l2(&times, &doubled, 1.05, 0.5).unwrap();
        assert!(c1b > c1a);
    }

    #[test]
    fn report_pass_fail_threshold() {
        let r = EstimateReport::evaluate(
            TheoremId::ThmStabilityL2,
            "t",
            1.0,
            1.0,
            BTreeMap::new(),
            "run",
        );
        assert!(r.passed);
        let r = EstimateReport::evaluate(
            TheoremId::ThmStabilityL2,
            "t",
            1.0 + 1e-7,
            1.0,
            BTreeMap::new(),
            "run",
        );
        assert!(r.passed, "within report tolerance");
        let r = EstimateReport::evaluate(
            TheoremId::ThmStabilityL2,
            "t",
            1.01,
            1.0,
            BTreeMap::new(),
            "run",
        );
        assert!(!r.passed);
        assert_eq!(r.status, CheckStatus::EstimateFailed);
    }

    #[test]
    fn young_constant_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let u: f64 = rng.random_range(1.1..4.0);
            let eps: f64 = rng.random_range(0.05..2.0);
            let c = young_constant(u, eps);
            let u_conj = u / (u - 1.0);
            let x: f64 = rng.random_range(0.0..10.0);
            let y: f64 = rng.random_range(0.0..10.0);
            assert!(
                x * y <= eps * x.powf(u) + c * y.powf(u_conj) + 1e-9,
                "u={u} eps={eps} x={x} y={y}"
            );
        }
    }

    #[test]
    fn benton_demo_report() {
        let rep = benton_demo();
        assert!(rep.passes(), "{rep:?}");
        assert!((rep.separation_at_half - 0.5).abs() < 1e-12);
        // Max positive straddle-node amplitude is (2/3)/h for t = 1/3.
        for &(h, m) in &rep.kink_samples {
            assert!((m * h - 2.0 / 3.0).abs() < 1e-6, "h={h} m={m}");
        }
    }

    #[test]
    fn smoothed_sign_limits() {
        let g = Grid::new(1, 64);
        let w = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let delta = 1e-3;
        let s = smoothed_sign(&w, delta);
        assert!(s.max_abs() <= 1.0 + 1e-12);
        // Away from the zero set the smoothed sign is within O(δ²) of ±1.
        let idx = 16; // x = 0.25, sin = 1
        assert!((s.values()[idx] - 1.0).abs() < delta * delta);
        // The L¹ smoothing error scales linearly in δ.
        let e1 = smoothing_error(&w, delta);
        let e2 = smoothing_error(&w, delta / 2.0);
        let ratio = e1 / e2;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn cole_hopf_reference_solves_the_pde() {
        // Finite differences of the reference satisfy
        // -∂_t u - εΔu + |Du|²/2 ≈ 0 in the interior.
        let g = Grid::new(1, 64);
        let eps = 0.1;
        let horizon = 0.2;
        let gdat = ScalarField::from_fn(&g, |x, _| 0.1 * (2.0 * PI * x).cos());
        let times: Vec<f64> = (0..=80).map(|i| horizon * i as f64 / 80.0).collect();
        let traj = cole_hopf_reference(&gdat, eps, horizon, &times);
        let mut worst = 0.0f64;
        for i in 1..times.len() - 1 {
            let dt2 = times[i + 1] - times[i - 1];
            let mut dudt = traj.field(i + 1).sub(traj.field(i - 1));
            dudt.scale(1.0 / dt2);
            let u = traj.field(i);
            let lap = u.laplacian();
            let grad = u.gradient();
            for idx in 0..g.len() {
                let r = -dudt.values()[idx] - eps * lap.values()[idx]
                    + 0.5 * grad[0].values()[idx] * grad[0].values()[idx];
                worst = worst.max(r.abs());
            }
        }
        assert!(worst < 2e-4, "residual {worst}");
    }

    #[test]
    fn rhs_bit_identity_helper() {
        let a = EstimateReport::evaluate(
            TheoremId::ThmHjlipCd,
            "a",
            0.5,
            1.0,
            BTreeMap::new(),
            "r",
        );
        let b = EstimateReport::evaluate(
            TheoremId::ThmHjlipCd,
            "b",
            0.7,
            1.0,
            BTreeMap::new(),
            "r",
        );
        assert!(rhs_bit_identical(&[&a, &b]));
        let c = EstimateReport::evaluate(
            TheoremId::ThmHjlipCd,
            "c",
            0.7,
            1.0 + 1e-12,
            BTreeMap::new(),
            "r",
        );
        assert!(!rhs_bit_identical(&[&a, &c]));
    }
}
