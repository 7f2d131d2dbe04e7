//! JSON interchange: problem files in, report files out.
//!
//! A problem file is `{"schema_version": "1", "kind": ..., "payload": ...,
//! "tolerance": {...}}`. Reports carry named verdicts with margins, optional
//! witnesses that are re-checked whenever a report is loaded, named values,
//! and timings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cpmap::CpMap;
use crate::error::{Error, Result};
use crate::extension::{ModuleMap, SemiPhiWitness};
use crate::modules::{validate_module, ConcreteModule};
use crate::numerics::{hermitian_eigen, CVector, Tolerance};
use crate::paulsen::PositivityWitness;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

impl ToleranceOverride {
    pub fn apply(&self, base: Tolerance) -> Result<Tolerance> {
        Tolerance::new(
            self.abs_tol.unwrap_or(base.abs_tol),
            self.rel_tol.unwrap_or(base.rel_tol),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpMapPayload {
    pub phi: CpMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPayload {
    pub map: ModuleMap,
    pub phi: CpMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionPayload {
    pub phi: CpMap,
    pub f: ConcreteModule,
    pub e: ConcreteModule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionPayload {
    /// The map on the submodule `F`; its domain is `F`.
    pub map: ModuleMap,
    pub e: ConcreteModule,
    pub phi: CpMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonPayload {
    pub map: ModuleMap,
    pub e: ConcreteModule,
    pub phi: CpMap,
    pub gamma: ModuleMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemMapPayload {
    pub map: ModuleMap,
    pub phi: CpMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codomain: Option<ConcreteModule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum Problem {
    CpMap(CpMapPayload),
    Pair(PairPayload),
    Obstruction(ObstructionPayload),
    Extension(ExtensionPayload),
    Comparison(ComparisonPayload),
    SystemMap(SystemMapPayload),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::CpMap(_) => "cp-map",
            Problem::Pair(_) => "pair",
            Problem::Obstruction(_) => "obstruction",
            Problem::Extension(_) => "extension",
            Problem::Comparison(_) => "comparison",
            Problem::SystemMap(_) => "system-map",
        }
    }

    pub fn phi(&self) -> &CpMap {
        match self {
            Problem::CpMap(p) => &p.phi,
            Problem::Pair(p) => &p.phi,
            Problem::Obstruction(p) => &p.phi,
            Problem::Extension(p) => &p.phi,
            Problem::Comparison(p) => &p.phi,
            Problem::SystemMap(p) => &p.phi,
        }
    }

    /// The module map, for kinds that carry one.
    pub fn map(&self) -> Option<&ModuleMap> {
        match self {
            Problem::CpMap(_) | Problem::Obstruction(_) => None,
            Problem::Pair(p) => Some(&p.map),
            Problem::Extension(p) => Some(&p.map),
            Problem::Comparison(p) => Some(&p.map),
            Problem::SystemMap(p) => Some(&p.map),
        }
    }

    fn modules(&self) -> Vec<(&'static str, &ConcreteModule)> {
        let mut out = Vec::new();
        if let Some(map) = self.map() {
            out.push(("map domain", map.domain()));
        }
        match self {
            Problem::Obstruction(p) => {
                out.push(("f", &p.f));
                out.push(("e", &p.e));
            }
            Problem::Extension(p) => out.push(("e", &p.e)),
            Problem::Comparison(p) => out.push(("e", &p.e)),
            Problem::SystemMap(p) => {
                if let Some(c) = &p.codomain {
                    out.push(("codomain", c));
                }
            }
            _ => {}
        }
        out
    }

    /// Checks that every module in the payload is closed under the action
    /// and its inner products lie in the algebra.
    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        for (name, module) in self.modules() {
            let report = validate_module(module, tol);
            if !report.is_valid() {
                return Err(Error::ModuleIntegrity(format!(
                    "{name}: {}",
                    serde_json::to_string(&report).unwrap_or_default()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema_version: String,
    #[serde(flatten)]
    pub problem: Problem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceOverride>,
}

/// Parse failure with the position reported by the JSON reader, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        let located = err.line() > 0;
        let text = err.to_string();
        // The reader appends "at line L column C"; the position is kept separately.
        let message = match text.rfind(" at line ") {
            Some(i) if located => text[..i].to_string(),
            _ => text,
        };
        Self {
            message,
            line: located.then(|| err.line()),
            column: located.then(|| err.column()),
        }
    }
}

fn unlocated(message: String) -> ParseError {
    ParseError {
        message,
        line: None,
        column: None,
    }
}

fn check_version(version: Option<&Value>) -> std::result::Result<(), ParseError> {
    match version {
        Some(Value::String(v)) if v == SCHEMA_VERSION => Ok(()),
        Some(v) => Err(unlocated(format!(
            "unsupported schema_version {v}; expected \"{SCHEMA_VERSION}\""
        ))),
        None => Err(unlocated("missing schema_version".into())),
    }
}

impl ProblemFile {
    pub fn new(problem: Problem) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            problem,
            tolerance: None,
        }
    }

    /// Parses and shape-checks a problem file. Syntax errors keep their
    /// line and column.
    pub fn parse(text: &str) -> std::result::Result<Self, ParseError> {
        let value: Value = serde_json::from_str(text)?;
        check_version(value.get("schema_version"))?;
        let file: ProblemFile = serde_json::from_value(value)
            .map_err(|e| unlocated(format!("payload does not match its kind: {e}")))?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn tolerance(&self, base: Tolerance) -> Result<Tolerance> {
        match &self.tolerance {
            Some(o) => o.apply(base),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub margin: f64,
}

/// Certificate attached to a refuted property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Witness {
    /// `v* C v < 0` for the Choi matrix `C` of `phi`.
    Choi {
        phi: CpMap,
        #[serde(with = "crate::wire::vectors")]
        vector: Vec<CVector>,
        value: f64,
    },
    /// A family `(x_k, h_k)` violating the semi-φ inequality.
    SemiPhi {
        map: ModuleMap,
        phi: CpMap,
        witness: SemiPhiWitness,
    },
    /// Positive input of an amplified system map with a non-positive image.
    Positivity { witness: PositivityWitness },
}

fn min_eigenvalue(m: &crate::numerics::CMatrix) -> f64 {
    let h = (m + m.adjoint()) * crate::numerics::c64(0.5, 0.0);
    hermitian_eigen(&h).values.first().copied().unwrap_or(0.0)
}

impl Witness {
    /// Recomputes the certificate from its own data; the recomputed value
    /// must match the stored one and still refute the property.
    pub fn revalidate(&self, tol: &Tolerance) -> Result<()> {
        let agree = |stored: f64, fresh: f64| {
            let scale = stored.abs().max(fresh.abs()).max(1.0);
            (stored - fresh).abs() <= 1e-8 * scale
        };
        match self {
            Witness::Choi { phi, vector, value } => {
                let v = vector
                    .first()
                    .ok_or_else(|| Error::InvalidInput("empty Choi witness".into()))?;
                let choi = phi.choi(tol)?;
                if v.len() != choi.nrows() {
                    return Err(Error::ShapeMismatch("Choi witness has the wrong length".into()));
                }
                let fresh = v.dotc(&(&choi * v)).re / v.norm_squared();
                if fresh >= 0.0 || !agree(*value, fresh) {
                    return Err(Error::Certification(format!(
                        "Choi witness does not reproduce: stored {value:.3e}, got {fresh:.3e}"
                    )));
                }
            }
            Witness::SemiPhi { map, phi, witness } => {
                let fresh = witness.reevaluate_gap(map, phi)?;
                if fresh <= 0.0 || !agree(witness.gap, fresh) {
                    return Err(Error::Certification(format!(
                        "semi-phi witness does not reproduce: stored {:.3e}, got {fresh:.3e}",
                        witness.gap
                    )));
                }
            }
            Witness::Positivity { witness } => {
                let input = min_eigenvalue(&witness.input);
                let image = min_eigenvalue(&witness.image);
                let scale = crate::numerics::spectral_norm(&witness.input).max(1.0);
                if input < -tol.threshold(scale) || image >= 0.0 || !agree(witness.image_min_eigenvalue, image) {
                    return Err(Error::Certification(format!(
                        "positivity witness does not reproduce: input λ_min {input:.3e}, image λ_min {image:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: String,
    pub command: String,
    pub verdicts: BTreeMap<String, Verdict>,
    #[serde(default)]
    pub values: BTreeMap<String, Value>,
    #[serde(default)]
    pub witnesses: Vec<Witness>,
    #[serde(default)]
    pub messages: Vec<String>,
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl ReportFile {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            verdicts: BTreeMap::new(),
            values: BTreeMap::new(),
            witnesses: Vec::new(),
            messages: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn verdict(&mut self, name: impl Into<String>, holds: bool, margin: f64) {
        self.verdicts.insert(name.into(), Verdict { holds, margin });
    }

    pub fn value(&mut self, name: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.values.insert(name.into(), v);
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.messages.push(message.into());
    }

    pub fn all_hold(&self) -> bool {
        self.verdicts.values().all(|v| v.holds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Parses a report and re-validates every witness in it.
    pub fn load(text: &str, tol: &Tolerance) -> std::result::Result<Self, ParseError> {
        let value: Value = serde_json::from_str(text)?;
        check_version(value.get("schema_version"))?;
        let report: ReportFile = serde_json::from_value(value)
            .map_err(|e| unlocated(format!("malformed report: {e}")))?;
        for (i, w) in report.witnesses.iter().enumerate() {
            w.revalidate(tol)
                .map_err(|e| unlocated(format!("witness {i} fails re-validation: {e}")))?;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::extension::semiphi_witness;
    use crate::fixtures::{example_2_1, scalar_multiplication};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn extension_problem_round_trips() {
        let ex = example_2_1(2);
        let file = ProblemFile::new(Problem::Extension(ExtensionPayload {
            map: ex.map.clone(),
            e: ex.e.clone(),
            phi: ex.phi.clone(),
        }));
        let back = ProblemFile::parse(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.problem.kind(), "extension");
    }

    #[test]
    fn tolerance_override_applies() {
        let mut file = ProblemFile::new(Problem::CpMap(CpMapPayload {
            phi: CpMap::transpose(2),
        }));
        file.tolerance = Some(ToleranceOverride {
            abs_tol: Some(1e-6),
            rel_tol: None,
        });
        let back = ProblemFile::parse(&file.to_json()).unwrap();
        let t = back.tolerance(tol()).unwrap();
        assert_eq!(t.abs_tol, 1e-6);
        assert_eq!(t.rel_tol, 1e-9);
    }

    #[test]
    fn syntax_errors_are_located() {
        let err = ProblemFile::parse("{\n  \"schema_version\": \"1\",\n  oops\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let err = ProblemFile::parse(r#"{"schema_version":"2","kind":"cp-map","payload":{}}"#)
            .unwrap_err();
        assert!(err.message.contains("schema_version"));
    }

    #[test]
    fn payload_must_match_kind() {
        let phi = serde_json::to_value(CpMap::identity(BlockAlgebra::full(1))).unwrap();
        let text = serde_json::json!({
            "schema_version": "1",
            "kind": "pair",
            "payload": {"phi": phi}
        })
        .to_string();
        let err = ProblemFile::parse(&text).unwrap_err();
        assert!(err.message.contains("payload"));
    }

    #[test]
    fn invalid_module_fails_validation() {
        // Span of a single rank-one matrix is not closed under M_2.
        let mut x = crate::numerics::CMatrix::zeros(1, 2);
        x[(0, 0)] = crate::numerics::c64(1.0, 0.0);
        let e = ConcreteModule::new(BlockAlgebra::full(2), 1, vec![x]).unwrap();
        let problem = Problem::Pair(PairPayload {
            map: ModuleMap::zero(e, 2, 1),
            phi: CpMap::identity(BlockAlgebra::full(2)),
        });
        assert!(matches!(
            problem.validate(&tol()),
            Err(Error::ModuleIntegrity(_))
        ));
    }

    #[test]
    fn report_with_witness_round_trips_and_revalidates() {
        let (map, phi) = scalar_multiplication(2.0);
        let witness = semiphi_witness(&map, &phi, &tol()).unwrap();
        let mut report = ReportFile::new("witness");
        report.verdict("completely_semi_phi", false, -3.0);
        report.witnesses.push(Witness::SemiPhi { map, phi, witness });
        let back = ReportFile::load(&report.to_json(), &tol()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn tampered_witness_is_rejected() {
        let (map, phi) = scalar_multiplication(2.0);
        let mut witness = semiphi_witness(&map, &phi, &tol()).unwrap();
        witness.gap = 10.0;
        let mut report = ReportFile::new("witness");
        report.witnesses.push(Witness::SemiPhi { map, phi, witness });
        assert!(ReportFile::load(&report.to_json(), &tol()).is_err());
    }

    #[test]
    fn choi_witness_revalidates() {
        let phi = CpMap::transpose(2);
        let choi = phi.choi(&tol()).unwrap();
        let spec = hermitian_eigen(&choi);
        let v = spec.vectors.column(0).into_owned();
        let w = Witness::Choi {
            phi,
            vector: vec![v],
            value: spec.values[0],
        };
        w.revalidate(&tol()).unwrap();
        assert!((spec.values[0] + 1.0).abs() < 1e-9);
    }
}
