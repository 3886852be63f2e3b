//! Batch front end: system files, fixture generators and JSON reports.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    d_infinity_with_trace, decompose, e_infinity_from, flat_product, multiplicative_core,
    peripheral_oracle, pythagoras_residual, structure_report, Block, ConditionalExpectation,
    FlatElement, SubAlgebra,
};
use crate::dynamics::{
    cesaro_consistency, cesaro_table, classify_with, evolve, z_mean, Classification, Direction,
};
use crate::error::{Error, Result};
use crate::fixtures::{self, SystemSpec};
use crate::gns::{limit_pairing_residual, nagy_foias, NagyFoias};
use crate::numerics::{
    c, identity, matrix_unit, op_norm, pauli_x, pauli_y, pauli_z, CMat, Tolerance,
};
use crate::qds::{Channel, Qds};

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Complex numbers as `[re, im]`, matrices as row-major nested arrays.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::Schema("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Schema(format!(
            "ragged matrix: row of length {} in a {n}x{m} matrix",
            bad.len()
        )));
    }
    Ok(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelFile {
    Kraus(Vec<JsonMatrix>),
    /// `d² × d²` column-stacking superoperator of the Heisenberg map.
    Superop(JsonMatrix),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iter_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_tol: Option<f64>,
}

impl ToleranceOverride {
    pub fn apply(&self, mut base: Tolerance) -> Tolerance {
        if let Some(x) = self.eq_tol {
            base.eq_tol = x;
        }
        if let Some(x) = self.rank_gap {
            base.rank_gap = x;
        }
        if let Some(x) = self.iter_max {
            base.iter_max = x;
        }
        if let Some(x) = self.conv_tol {
            base.conv_tol = x;
        }
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub dim: usize,
    pub channel: ChannelFile,
    pub rho: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceOverride>,
}

impl SystemFile {
    pub fn from_spec(spec: &SystemSpec) -> Self {
        let channel = match spec.channel.kraus() {
            Some(k) => ChannelFile::Kraus(k.iter().map(matrix_to_json).collect()),
            None => ChannelFile::Superop(matrix_to_json(spec.channel.superop())),
        };
        SystemFile {
            dim: spec.rho.nrows(),
            channel,
            rho: matrix_to_json(&spec.rho),
            tolerance: None,
        }
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        let d = self.dim;
        let rho = matrix_from_json(&self.rho)?;
        if rho.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        let channel = match &self.channel {
            ChannelFile::Kraus(ks) => {
                let ks = ks.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
                if let Some(k) = ks.iter().find(|k| k.shape() != (d, d)) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: k.nrows(),
                    });
                }
                Channel::from_kraus(ks)?
            }
            ChannelFile::Superop(s) => {
                let s = matrix_from_json(s)?;
                if s.shape() != (d * d, d * d) {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        found: s.nrows(),
                    });
                }
                Channel::from_superop(s)?
            }
        };
        Ok(SystemSpec { channel, rho })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system file serializes");
        s.push('\n');
        s
    }

    /// Validated system; `base` is overridden by the file's own tolerances.
    pub fn system(&self, base: Tolerance) -> Result<Qds> {
        let tol = self.tolerance.clone().unwrap_or_default().apply(base);
        self.to_spec()?.validate(tol)
    }
}

/// A numeric claim together with the tolerance it was tested at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checked {
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Checked {
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Checked {
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    pub fn at_least(value: f64, tolerance: f64) -> Self {
        Checked {
            value,
            tolerance,
            passed: value >= -tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub stage: &'static str,
    pub kind: &'static str,
    pub message: String,
}

impl Diagnostic {
    fn from_error(stage: &'static str, e: &Error) -> Self {
        Diagnostic {
            stage,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSection {
    pub passed: bool,
    /// Name of the rejected hypothesis.
    pub hypothesis: Option<&'static str>,
    pub invariant: Option<bool>,
    pub modular_commuting: Option<bool>,
    pub unital: Option<Checked>,
    pub choi_min_eigenvalue: Option<Checked>,
    pub schwarz_min_eigenvalue: Option<Checked>,
    pub invariance: Option<Checked>,
    pub modular_commutation: Option<Checked>,
    pub sharp_choi_min_eigenvalue: Option<Checked>,
    pub pairing: Option<Checked>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DomainDim {
    pub k: i64,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EInfinitySection {
    pub superop: JsonMatrix,
    pub idempotence: Checked,
    pub unital: Checked,
    pub choi_min_eigenvalue: Checked,
    pub state_preservation: Checked,
    pub module_property: Checked,
    pub commutation: Checked,
    pub perp_invariance: Checked,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatChecks {
    pub samples: usize,
    pub reconstruction: Checked,
    pub orthogonality: Checked,
    pub pythagoras: Checked,
    pub associativity: Checked,
    pub homomorphism: Checked,
    /// `max ‖a × b‖ / (‖a‖ ‖b‖)` in operator norm.
    pub submultiplicativity_ratio: Checked,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgebraSection {
    /// `dim D_{Φ_k}` for `0 < |k| ≤ k_reported`.
    pub domains: Vec<DomainDim>,
    pub k_reported: usize,
    /// Largest `|k|` used to compute `D∞`.
    pub computation_range: usize,
    pub dim_d_infinity_plus: usize,
    pub dim_multiplicative_core: usize,
    pub dim_d_infinity: usize,
    pub core_distance: Checked,
    pub oracle_distance: Checked,
    pub automorphism: Checked,
    pub blocks: Vec<Block>,
    pub e_infinity: Option<EInfinitySection>,
    pub flat_checks: Option<FlatChecks>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitInfo {
    pub iterations: usize,
    pub residual: Checked,
}

#[derive(Debug, Clone, Serialize)]
pub struct GnsSection {
    pub dim_h0: usize,
    pub dim_h1: usize,
    pub h0_agreement: Checked,
    pub unitary_residual: Checked,
    pub reducing_residual: Checked,
    pub cnu_spectral_radius: f64,
    pub common_isometric_eigenvectors: usize,
    pub v_plus: LimitInfo,
    pub v_minus: LimitInfo,
    pub limit_pairing: Checked,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CesaroRow {
    pub n: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsSection {
    pub classification: Classification,
    pub cesaro_k: i64,
    pub cesaro: Vec<CesaroRow>,
    pub cesaro_consistency: Checked,
    pub z_mean_n: usize,
    pub z_mean_to_limit: f64,
    pub z_limit_vs_e_infinity: Checked,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: &'static str,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub dim: usize,
    pub validation: ValidationSection,
    pub algebra: Option<AlgebraSection>,
    pub gns: Option<GnsSection>,
    pub dynamics: Option<DynamicsSection>,
    pub diagnostics: Vec<Diagnostic>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const K_REPORT_CAP: usize = 6;
const CESARO_ROWS: usize = 20;
const Z_MEAN_N: usize = 50;
const PAIRING_HORIZON: usize = 200;
const FLAT_SAMPLES: usize = 20;

fn validation_section(q: &Qds) -> ValidationSection {
    let t = q.tol().eq_tol;
    let r = q.residuals();
    let flags = q.flags();
    ValidationSection {
        passed: true,
        hypothesis: None,
        invariant: Some(flags.invariant),
        modular_commuting: Some(flags.modular_commuting),
        unital: Some(Checked::at_most(r.unital, t)),
        choi_min_eigenvalue: Some(Checked::at_least(r.choi_min_eigenvalue, t)),
        schwarz_min_eigenvalue: r.schwarz_min_eigenvalue.map(|x| Checked::at_least(x, t)),
        invariance: Some(Checked::at_most(r.invariance, t)),
        modular_commutation: Some(Checked::at_most(r.modular_commutation, t)),
        sharp_choi_min_eigenvalue: Some(Checked::at_least(r.sharp_choi_min_eigenvalue, t)),
        pairing: Some(Checked::at_most(r.pairing, t)),
    }
}

fn rejected_section(e: &Error) -> ValidationSection {
    ValidationSection {
        passed: false,
        hypothesis: Some(e.kind()),
        invariant: None,
        modular_commuting: None,
        unital: None,
        choi_min_eigenvalue: None,
        schwarz_min_eigenvalue: None,
        invariance: None,
        modular_commutation: None,
        sharp_choi_min_eigenvalue: None,
        pairing: None,
    }
}

fn random_matrix(rng: &mut impl Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn flat_checks(q: &Qds, e: &ConditionalExpectation, seed: u64, samples: usize) -> Result<FlatChecks> {
    let tol = q.tol();
    let d = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut recon, mut orth, mut pyth, mut assoc, mut hom, mut ratio) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let phi_map = |x: &FlatElement| decompose(&q.channel().apply(&x.value()), e);
    for _ in 0..samples {
        let (a, b, cc) = (
            random_matrix(&mut rng, d),
            random_matrix(&mut rng, d),
            random_matrix(&mut rng, d),
        );
        let (xa, xb, xc) = (decompose(&a, e), decompose(&b, e), decompose(&cc, e));
        let scale = op_norm(&a).max(1.0);
        recon = recon.max(op_norm(&(xa.value() - &a)) / scale);
        orth = orth.max(q.state().inner(&xa.par, &xa.perp).norm() / (scale * scale));
        pyth = pyth.max(pythagoras_residual(&xa, q) / (scale * scale));
        let ab = flat_product(&xa, &xb, e, tol)?;
        let left = flat_product(&ab, &xc, e, tol)?;
        let right = flat_product(&xa, &flat_product(&xb, &xc, e, tol)?, e, tol)?;
        assoc = assoc.max(op_norm(&(left.value() - right.value())));
        let phi_ab = phi_map(&ab);
        let prod = flat_product(&phi_map(&xa), &phi_map(&xb), e, tol)?;
        hom = hom.max(op_norm(&(phi_ab.value() - prod.value())));
        ratio = ratio.max(op_norm(&ab.value()) / (op_norm(&a) * op_norm(&b)));
    }
    Ok(FlatChecks {
        samples,
        reconstruction: Checked::at_most(recon, tol.eq_tol),
        orthogonality: Checked::at_most(orth, tol.eq_tol),
        pythagoras: Checked::at_most(pyth, tol.eq_tol),
        associativity: Checked::at_most(assoc, tol.eq_tol),
        homomorphism: Checked::at_most(hom, 10.0 * tol.eq_tol),
        submultiplicativity_ratio: Checked::at_most(ratio, 1.0 + tol.eq_tol),
    })
}

fn gns_section(q: &Qds, nf: &NagyFoias) -> GnsSection {
    let tol = q.tol();
    let l = &nf.limits;
    GnsSection {
        dim_h0: nf.h0.dim(),
        dim_h1: nf.h1.dim(),
        h0_agreement: Checked::at_most(nf.h0_distance, tol.eq_tol),
        unitary_residual: Checked::at_most(nf.unitary_residual, tol.eq_tol),
        reducing_residual: Checked::at_most(nf.reducing_residual, tol.eq_tol),
        cnu_spectral_radius: nf.cnu_spectral_radius,
        common_isometric_eigenvectors: nf.common_isometric_eigenvectors,
        v_plus: LimitInfo {
            iterations: l.iterations_plus,
            residual: Checked::at_most(l.residual_plus, l.accepted_plus),
        },
        v_minus: LimitInfo {
            iterations: l.iterations_minus,
            residual: Checked::at_most(l.residual_minus, l.accepted_minus),
        },
        limit_pairing: Checked::at_most(
            limit_pairing_residual(q, &l.v_minus, PAIRING_HORIZON),
            1e2 * tol.eq_tol,
        ),
    }
}

/// Runs validation, the algebra suite, the GNS suite and the dynamics suite.
/// Failures after validation are collected as diagnostics.
pub fn analyze(file: &SystemFile, base: Tolerance, seed: u64) -> AnalysisReport {
    let tol = file.tolerance.clone().unwrap_or_default().apply(base);
    let mut report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        seed,
        tolerance: tol,
        dim: file.dim,
        validation: rejected_section(&Error::InvalidParams(String::new())),
        algebra: None,
        gns: None,
        dynamics: None,
        diagnostics: Vec::new(),
    };
    let q = match file.to_spec().and_then(|s| s.validate(tol)) {
        Ok(q) => q,
        Err(e) => {
            report.validation = rejected_section(&e);
            report.diagnostics.push(Diagnostic::from_error("validate", &e));
            return report;
        }
    };
    report.validation = validation_section(&q);

    let mut diag = |stage, e: Error| report.diagnostics.push(Diagnostic::from_error(stage, &e));
    let (algebra, d_inf, e_inf) = match algebra_suite(&q, seed) {
        Ok((section, d_inf, e_inf, errors)) => {
            for e in errors {
                diag("algebra", e);
            }
            (Some(section), Some(d_inf), e_inf)
        }
        Err(e) => {
            diag("algebra", e);
            (None, None, None)
        }
    };
    let gns = match nagy_foias(&q) {
        Ok(nf) => Some(gns_section(&q, &nf)),
        Err(e) => {
            diag("gns", e);
            None
        }
    };
    let dynamics = match (&d_inf, &e_inf) {
        (Some(d), Some(e)) => match dynamics_suite(&q, d, e) {
            Ok(s) => Some(s),
            Err(e) => {
                diag("dynamics", e);
                None
            }
        },
        _ => None,
    };
    report.algebra = algebra;
    report.gns = gns;
    report.dynamics = dynamics;
    report
}

type AlgebraOutcome = (AlgebraSection, SubAlgebra, Option<ConditionalExpectation>, Vec<Error>);

fn algebra_suite(q: &Qds, seed: u64) -> Result<AlgebraOutcome> {
    let tol = q.tol();
    let (d_inf, trace) = d_infinity_with_trace(q)?;
    let core = multiplicative_core(q)?;
    let oracle = peripheral_oracle(q)?;
    let plus = crate::algebra::d_infinity_plus(q)?;
    let k_reported = (trace.stabilized_at + 1).min(K_REPORT_CAP);
    let mut domains: Vec<DomainDim> = Vec::new();
    for k in 1..=k_reported as i64 {
        for kk in [k, -k] {
            let dim = match trace.domain_dims.iter().find(|(j, _)| *j == kk) {
                Some(&(_, dim)) => dim,
                None => crate::algebra::multiplicative_domain(q, kk)?.dim(),
            };
            domains.push(DomainDim { k: kk, dim });
        }
    }
    let mut errors = Vec::new();
    let blocks = structure_report(&d_inf, seed, tol).unwrap_or_else(|e| {
        errors.push(e);
        Vec::new()
    });
    let (e_section, flat, e_inf) = match e_infinity_from(q, &d_inf) {
        Ok((e, ec)) => {
            let ch = e.checks(q);
            let t = tol.eq_tol;
            let section = EInfinitySection {
                superop: matrix_to_json(e.matrix()),
                idempotence: Checked::at_most(ch.idempotence, t),
                unital: Checked::at_most(ch.unital, t),
                choi_min_eigenvalue: Checked::at_least(ch.choi_min_eigenvalue, t),
                state_preservation: Checked::at_most(ch.state_preservation, t),
                module_property: Checked::at_most(ch.module_property, t),
                commutation: Checked::at_most(ec.commutation, 10.0 * t),
                perp_invariance: Checked::at_most(ec.perp_invariance, 10.0 * t),
            };
            let flat = match flat_checks(q, &e, seed, FLAT_SAMPLES) {
                Ok(f) => Some(f),
                Err(err) => {
                    errors.push(err);
                    None
                }
            };
            (Some(section), flat, Some(e))
        }
        Err(err) => {
            errors.push(err);
            (None, None, None)
        }
    };
    let section = AlgebraSection {
        domains,
        k_reported,
        computation_range: trace.stabilized_at,
        dim_d_infinity_plus: plus.dim(),
        dim_multiplicative_core: core.dim(),
        dim_d_infinity: d_inf.dim(),
        core_distance: Checked::at_most(trace.core_distance, tol.eq_tol),
        oracle_distance: Checked::at_most(d_inf.distance(&oracle), 10.0 * tol.eq_tol),
        automorphism: Checked::at_most(trace.certificate.worst(), tol.eq_tol),
        blocks,
        e_infinity: e_section,
        flat_checks: flat,
    };
    Ok((section, d_inf, e_inf, errors))
}

fn dynamics_suite(q: &Qds, d_inf: &SubAlgebra, e_inf: &ConditionalExpectation) -> Result<DynamicsSection> {
    let tol = q.tol();
    let classification = classify_with(q, d_inf)?;
    let cesaro = cesaro_table(q, 1, CESARO_ROWS)?
        .into_iter()
        .map(|(n, residual)| CesaroRow { n, residual })
        .collect();
    let consistency = cesaro_consistency(q, 3)?;
    let z = z_mean(q, Z_MEAN_N, e_inf)?;
    Ok(DynamicsSection {
        classification,
        cesaro_k: 1,
        cesaro,
        cesaro_consistency: Checked::at_most(consistency, 10.0 * tol.eq_tol),
        z_mean_n: Z_MEAN_N,
        z_mean_to_limit: z.residual_to_limit,
        z_limit_vs_e_infinity: Checked::at_most(z.limit_vs_e_infinity, 1e2 * tol.eq_tol),
    })
}

/// `E<i><j>` (single digits), `E<i>,<j>`, `I`, `sx`, `sy`, `sz`, or an
/// inline JSON matrix.
pub fn parse_operator(text: &str, d: usize) -> Result<CMat> {
    let t = text.trim();
    if t.starts_with('[') {
        let rows: JsonMatrix = serde_json::from_str(t)?;
        let m = matrix_from_json(&rows)?;
        if m.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
        return Ok(m);
    }
    let unknown = || Error::InvalidParams(format!("unknown basis element {t:?}"));
    let pauli = |m: CMat| if d == 2 { Ok(m) } else { Err(unknown()) };
    match t {
        "I" => return Ok(identity(d)),
        "sx" => return pauli(pauli_x()),
        "sy" => return pauli(pauli_y()),
        "sz" => return pauli(pauli_z()),
        _ => {}
    }
    let rest = t.strip_prefix('E').ok_or_else(unknown)?;
    let (i, j) = match rest.split_once(',') {
        Some((a, b)) => (a.parse::<usize>(), b.parse::<usize>()),
        None if rest.len() == 2 => (rest[..1].parse::<usize>(), rest[1..].parse::<usize>()),
        None => return Err(unknown()),
    };
    match (i, j) {
        (Ok(i), Ok(j)) if i < d && j < d => Ok(matrix_unit(d, i, j)),
        _ => Err(unknown()),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParams(format!("not a number: {x:?}")))
        })
        .collect()
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(parse_list).collect()
}

#[derive(Debug, Parser)]
#[command(name = "revpart", version, about = "Reversible part of quantum dynamical systems")]
pub struct Cli {
    /// Equality tolerance override.
    #[arg(long, global = true, env = "REVPART_TOL")]
    pub tol: Option<f64>,
    /// Seed for sampled checks and random draws.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Per-step CSV tables instead of JSON (evolve, cesaro).
    #[arg(long, global = true)]
    pub csv: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Dephasing,
    Unitary,
    Classical,
    ShiftDephase,
    RandomCovariant,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub family: Family,
    /// Hilbert space dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Dephasing strength in [0, 1].
    #[arg(long)]
    pub p: Option<f64>,
    /// Diagonal of ρ, comma separated.
    #[arg(long)]
    pub rho: Option<String>,
    /// Phases, comma separated; `d − 1` values get a leading 0.
    #[arg(long)]
    pub phase: Option<String>,
    /// Stochastic matrix, rows separated by `;`.
    #[arg(long = "P")]
    pub transition: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full analysis report.
    Analyze { input: PathBuf },
    /// Emit a system file for a fixture family.
    Gen(GenArgs),
    /// `a = E∞(a) + a⊥`.
    Decompose { input: PathBuf, operator: String },
    /// Trajectory `Φⁿ(a)` or `(Φ♯)ⁿ(a)`.
    Evolve {
        input: PathBuf,
        /// `Eij`, `Ei,j`, `I`, `sx`, `sy`, `sz` or an inline JSON matrix.
        operator: String,
        steps: usize,
        /// Iterate `Φ♯` instead of `Φ`.
        #[arg(long)]
        adjoint: bool,
    },
    /// Sz.-Nagy–Foias splitting of the GNS contraction.
    Nagyfoias { input: PathBuf },
    /// Cesàro residual table for `τ_k`.
    Cesaro {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: i64,
        /// Largest `N` in the table.
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
}

pub fn generate(args: &GenArgs, seed: u64) -> Result<SystemFile> {
    let d = args.d;
    let rho = args.rho.as_deref().map(parse_list).transpose()?;
    let need_rho = |d: usize| -> Result<Vec<f64>> {
        Ok(rho.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]))
    };
    let spec = match args.family {
        Family::Dephasing => {
            let p = args
                .p
                .ok_or_else(|| Error::InvalidParams("dephasing needs --p".into()))?;
            let r = need_rho(d.unwrap_or(2))?;
            check_dim(d, r.len())?;
            fixtures::dephasing_spec(p, &r)?
        }
        Family::Unitary => {
            let mut phases = args.phase.as_deref().map(parse_list).transpose()?.unwrap_or_default();
            let dim = d.unwrap_or(phases.len().max(1));
            if phases.len() + 1 == dim {
                phases.insert(0, 0.0);
            }
            let r = need_rho(dim)?;
            check_dim(Some(dim), phases.len())?;
            check_dim(Some(dim), r.len())?;
            fixtures::unitary_spec(&phases, &r)?
        }
        Family::Classical => {
            let p = args
                .transition
                .as_deref()
                .ok_or_else(|| Error::InvalidParams("classical needs --P".into()))
                .and_then(parse_rows)?;
            check_dim(d, p.len())?;
            fixtures::classical_spec(&p)?
        }
        Family::ShiftDephase => fixtures::shift_dephase_spec(d.unwrap_or(3))?,
        Family::RandomCovariant => fixtures::random_covariant_spec(d.unwrap_or(2), seed)?,
    };
    Ok(SystemFile::from_spec(&spec))
}

fn check_dim(d: Option<usize>, found: usize) -> Result<()> {
    match d {
        Some(d) if d != found => Err(Error::InvalidParams(format!(
            "--d {d} does not match {found} supplied values"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct DecomposeOut {
    schema_version: &'static str,
    operator: JsonMatrix,
    par: JsonMatrix,
    perp: JsonMatrix,
    pythagoras: Checked,
}

#[derive(Debug, Serialize)]
struct EvolveRow {
    step: usize,
    norm: f64,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct EvolveOut {
    schema_version: &'static str,
    direction: Direction,
    steps: Vec<EvolveRow>,
    states: Vec<JsonMatrix>,
    decay: Option<crate::dynamics::DecayReport>,
}

#[derive(Debug, Serialize)]
struct NagyFoiasOut {
    schema_version: &'static str,
    #[serde(flatten)]
    section: GnsSection,
}

#[derive(Debug, Serialize)]
struct CesaroOut {
    schema_version: &'static str,
    k: i64,
    rows: Vec<CesaroRow>,
}

/// Exit status plus the text to emit.
pub struct Outcome {
    pub code: i32,
    pub output: Option<String>,
    pub message: Option<String>,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        1
    }
}

fn failure(e: Error) -> Outcome {
    Outcome {
        code: exit_code(&e),
        output: None,
        message: Some(e.to_string()),
    }
}

fn base_tolerance(cli: &Cli) -> Result<Tolerance> {
    let mut tol = Tolerance::default();
    if let Some(t) = cli.tol {
        tol.eq_tol = t;
    }
    tol.validate()?;
    Ok(tol)
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn csv_table(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

pub fn execute(cli: &Cli) -> Outcome {
    let tol = match base_tolerance(cli) {
        Ok(t) => t,
        Err(e) => return failure(e),
    };
    let result: Result<(i32, String)> = (|| {
        let load = |p: &Path| SystemFile::load(p);
        match &cli.command {
            Command::Analyze { input } => {
                let file = load(input)?;
                let report = analyze(&file, tol, cli.seed);
                let code = if !report.validation.passed {
                    2
                } else if report.diagnostics.is_empty() {
                    0
                } else {
                    1
                };
                Ok((code, report.to_json()))
            }
            Command::Gen(args) => {
                let file = generate(args, cli.seed)?;
                file.system(tol)?;
                Ok((0, file.to_json()))
            }
            Command::Decompose { input, operator } => {
                let q = load(input)?.system(tol)?;
                let a = parse_operator(operator, q.dim())?;
                let e = crate::algebra::e_infinity(&q)?;
                let x = decompose(&a, &e);
                let out = DecomposeOut {
                    schema_version: SCHEMA_VERSION,
                    operator: matrix_to_json(&a),
                    par: matrix_to_json(&x.par),
                    perp: matrix_to_json(&x.perp),
                    pythagoras: Checked::at_most(pythagoras_residual(&x, &q), q.tol().eq_tol),
                };
                Ok((0, to_pretty(&out)))
            }
            Command::Evolve {
                input,
                operator,
                steps,
                adjoint,
            } => {
                let q = load(input)?.system(tol)?;
                let a = parse_operator(operator, q.dim())?;
                let d_inf = crate::algebra::d_infinity(&q)?;
                let direction = if *adjoint {
                    Direction::Adjoint
                } else {
                    Direction::Forward
                };
                let t = evolve(&q, &a, *steps, direction, d_inf.dim());
                let rows: Vec<EvolveRow> = (0..t.states.len())
                    .map(|j| EvolveRow {
                        step: j,
                        norm: t.norms[j],
                        residual: t.equilibrium_distance[j],
                    })
                    .collect();
                if cli.csv {
                    return Ok((
                        0,
                        csv_table(
                            "step,norm,residual",
                            rows.iter().map(|r| format!("{},{},{}", r.step, r.norm, r.residual)),
                        ),
                    ));
                }
                let out = EvolveOut {
                    schema_version: SCHEMA_VERSION,
                    direction,
                    steps: rows,
                    states: t.states.iter().map(matrix_to_json).collect(),
                    decay: t.decay,
                };
                Ok((0, to_pretty(&out)))
            }
            Command::Nagyfoias { input } => {
                let q = load(input)?.system(tol)?;
                let nf = nagy_foias(&q)?;
                let out = NagyFoiasOut {
                    schema_version: SCHEMA_VERSION,
                    section: gns_section(&q, &nf),
                };
                Ok((0, to_pretty(&out)))
            }
            Command::Cesaro { input, k, n } => {
                let q = load(input)?.system(tol)?;
                let rows: Vec<CesaroRow> = cesaro_table(&q, *k, *n)?
                    .into_iter()
                    .map(|(n, residual)| CesaroRow { n, residual })
                    .collect();
                if cli.csv {
                    return Ok((
                        0,
                        csv_table(
                            "step,residual",
                            rows.iter().map(|r| format!("{},{}", r.n, r.residual)),
                        ),
                    ));
                }
                let out = CesaroOut {
                    schema_version: SCHEMA_VERSION,
                    k: *k,
                    rows,
                };
                Ok((0, to_pretty(&out)))
            }
        }
    })();
    match result {
        Ok((code, text)) => Outcome {
            code,
            output: Some(text),
            message: None,
        },
        Err(e) => failure(e),
    }
}

/// Parses arguments, runs the command and writes its output. Returns the
/// process exit code: 0 success, 1 I/O, schema or analysis failure, 2
/// validation rejection.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = execute(&cli);
    if let Some(text) = &outcome.output {
        let written = match &cli.out {
            Some(path) => std::fs::write(path, text).map_err(Error::from),
            None => stdout.write_all(text.as_bytes()).map_err(Error::from),
        };
        if let Err(e) = written {
            let _ = writeln!(stderr, "{e}");
            return 1;
        }
    }
    if let Some(msg) = &outcome.message {
        let _ = writeln!(stderr, "{msg}");
    }
    outcome.code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_names() {
        assert_eq!(parse_operator("E01", 2).unwrap(), matrix_unit(2, 0, 1));
        assert_eq!(parse_operator("E2,1", 3).unwrap(), matrix_unit(3, 2, 1));
        assert_eq!(parse_operator("sx", 2).unwrap(), pauli_x());
        assert!(parse_operator("E22", 2).is_err());
        assert!(parse_operator("sx", 3).is_err());
        assert!(parse_operator("foo", 2).is_err());
        let m = parse_operator("[[[1,0],[0,0]],[[0,0],[1,0]]]", 2).unwrap();
        assert_eq!(m, identity(2));
    }

    #[test]
    fn system_file_round_trip() {
        let spec = fixtures::dephasing_spec(0.5, &[0.6, 0.4]).unwrap();
        let file = SystemFile::from_spec(&spec);
        let again = SystemFile::parse(&file.to_json()).unwrap();
        assert_eq!(file, again);
        let q = again.system(Tolerance::default()).unwrap();
        assert_eq!(q.dim(), 2);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let rows = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0]]];
        assert!(matches!(matrix_from_json(&rows), Err(Error::Schema(_))));
    }

    #[test]
    fn superop_file_validates() {
        let spec = fixtures::classical_spec(&fixtures::CLASSICAL_P).unwrap();
        let file = SystemFile {
            dim: 2,
            channel: ChannelFile::Superop(matrix_to_json(spec.channel.superop())),
            rho: matrix_to_json(&spec.rho),
            tolerance: Some(ToleranceOverride {
                eq_tol: Some(1e-10),
                ..Default::default()
            }),
        };
        let q = file.system(Tolerance::default()).unwrap();
        assert_eq!(q.tol().eq_tol, 1e-10);
    }
}
