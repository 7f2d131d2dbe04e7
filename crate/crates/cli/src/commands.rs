use semiphi::extension::{
    compare_extensions, extend_semi_phi, is_completely_semi_phi, is_phi_map,
    phi_extension_obstruction, semiphi_witness,
};
use semiphi::numerics::hermitian_eigen;
use semiphi::paulsen::{block_map, is_cp_system_map};
use semiphi::problem::{Problem, ProblemFile, ReportFile, Witness};
use semiphi::wire::to_rows;
use semiphi::{ConcreteModule, CpMap, Error, ModuleMap, Tolerance};

use crate::{fail, Failure, Outcome};

fn need_map<'a>(command: &str, problem: &'a Problem) -> Result<&'a ModuleMap, Failure> {
    problem.map().ok_or_else(|| {
        Failure::input(format!(
            "{command} needs a problem with a module map, got kind {}",
            problem.kind()
        ))
    })
}

fn values_as_rows(map: &ModuleMap) -> Vec<Vec<Vec<[f64; 2]>>> {
    map.values().iter().map(to_rows).collect()
}

/// Adds the Choi verdict; on failure attaches the eigenvector of the
/// smallest Choi eigenvalue as a witness.
fn choi_verdict(report: &mut ReportFile, phi: &CpMap, tol: &Tolerance) -> Result<bool, Error> {
    let cp = phi.is_completely_positive(tol)?;
    report.verdict("completely_positive", cp.completely_positive, cp.margin);
    report.value("choi_min_eigenvalue", cp.margin);
    report.value("threshold", cp.threshold);
    if !cp.completely_positive {
        let spec = hermitian_eigen(&phi.choi(tol)?);
        report.witnesses.push(Witness::Choi {
            phi: phi.clone(),
            vector: vec![spec.vectors.column(0).into_owned()],
            value: spec.values[0],
        });
    }
    Ok(cp.completely_positive)
}

pub fn check_cp(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let mut report = ReportFile::new("check-cp");
    choi_verdict(&mut report, file.problem.phi(), tol).map_err(|e| fail("check-cp", e))?;
    Ok(report)
}

pub fn stinespring(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let phi = file.problem.phi();
    let mut report = ReportFile::new("stinespring");
    let cp = choi_verdict(&mut report, phi, tol).map_err(|e| fail("stinespring", e))?;
    if !cp {
        report.note("phi is not completely positive; no Stinespring dilation exists");
        return Ok(report);
    }
    let dilation = phi.stinespring(tol).map_err(|e| fail("stinespring", e))?;
    let error = phi.reconstruction_error(|u| dilation.compress(u));
    report.value("rank", dilation.rank);
    report.value("reconstruction_error", error);
    report.value("kraus", dilation.kraus.iter().map(to_rows).collect::<Vec<_>>());
    report.value("v", to_rows(&dilation.v));
    Ok(report)
}

pub fn check_phi(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let map = need_map("check-phi", &file.problem)?;
    let check = is_phi_map(map, file.problem.phi(), tol).map_err(|e| fail("check-phi", e))?;
    let mut report = ReportFile::new("check-phi");
    let deviation = check.worst.map_or(0.0, |w| w.deviation);
    report.verdict("phi_map", check.holds, 0.0 - deviation);
    report.value("worst_pair", check.worst);
    report.value("first_failure", check.first_failure);
    Ok(report)
}

/// Semi-φ verdict, with a witness attached on failure.
fn semi_phi_verdict(
    command: &str,
    report: &mut ReportFile,
    map: &ModuleMap,
    phi: &CpMap,
    tol: &Tolerance,
) -> Result<bool, Failure> {
    let semi = is_completely_semi_phi(map, phi, tol).map_err(|e| fail(command, e))?;
    report.verdict("completely_semi_phi", semi.holds, semi.margin);
    report.value("semi_phi_threshold", semi.threshold);
    if !semi.holds {
        let witness = semiphi_witness(map, phi, tol).map_err(|e| fail(command, e))?;
        report.value("witness_gap", witness.gap);
        report.witnesses.push(Witness::SemiPhi {
            map: map.clone(),
            phi: phi.clone(),
            witness,
        });
    }
    Ok(semi.holds)
}

pub fn check_semiphi(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let map = need_map("check-semiphi", &file.problem)?;
    let mut report = ReportFile::new("check-semiphi");
    semi_phi_verdict("check-semiphi", &mut report, map, file.problem.phi(), tol)?;
    Ok(report)
}

pub fn witness(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let map = need_map("witness", &file.problem)?;
    let mut report = ReportFile::new("witness");
    let holds = semi_phi_verdict("witness", &mut report, map, file.problem.phi(), tol)?;
    if holds {
        report.note("no witness: the pair satisfies the completely semi-phi inequality");
    }
    Ok(report)
}

fn submodule_and_module(problem: &Problem) -> Result<(&ConcreteModule, &ConcreteModule), Failure> {
    match problem {
        Problem::Obstruction(p) => Ok((&p.f, &p.e)),
        Problem::Extension(p) => Ok((p.map.domain(), &p.e)),
        Problem::Comparison(p) => Ok((p.map.domain(), &p.e)),
        other => Err(Failure::input(format!(
            "obstruction needs a submodule and a module, got kind {}",
            other.kind()
        ))),
    }
}

pub fn obstruction(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let (f, e) = submodule_and_module(&file.problem)?;
    let obs = phi_extension_obstruction(file.problem.phi(), f, e, tol)
        .map_err(|e| fail("obstruction", e))?;
    let mut report = ReportFile::new("obstruction");
    report.verdict("obstruction_vanishes", obs.vanishes, obs.threshold - obs.norm);
    report.value("norm", obs.norm);
    report.value("threshold", obs.threshold);
    report.value("worst_pair", obs.worst_pair);
    report.value("complement_dim", obs.complement.dim());
    if !obs.vanishes {
        report.note(format!(
            "phi does not vanish on <F-perp, E> (norm {:.3e}): a non-degenerate phi-map on F has no phi-map extension to E",
            obs.norm
        ));
    }
    Ok(report)
}

fn extension_parts(problem: &Problem) -> Result<(&ModuleMap, &ConcreteModule, &CpMap), Failure> {
    match problem {
        Problem::Extension(p) => Ok((&p.map, &p.e, &p.phi)),
        Problem::Comparison(p) => Ok((&p.map, &p.e, &p.phi)),
        other => Err(Failure::input(format!(
            "expected an extension or comparison problem, got kind {}",
            other.kind()
        ))),
    }
}

pub fn extend(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let (map, e, phi) = extension_parts(&file.problem)?;
    let mut report = ReportFile::new("extend");
    if !semi_phi_verdict("extend", &mut report, map, phi, tol)? {
        report.note("the input is not completely semi-phi; no extension is attempted");
        return Ok(report);
    }
    let result = extend_semi_phi(map, e, phi, tol).map_err(|err| fail("extend", err))?;
    let r = &result.report;
    report.verdict("extension_semi_phi", r.semi_phi_holds, r.semi_phi_margin);
    report.value("phi_prime", &result.phi_prime);
    report.value("phi_prime_values", values_as_rows(&result.phi_prime));
    report.value("restriction_error", r.restriction_error);
    report.value("s0_norm", r.s0_norm);
    report.value("input_is_phi_map", r.input_is_phi_map);
    report.value("obstruction_norm", r.obstruction_norm);
    report.value("obstruction_vanishes", r.obstruction_vanishes);
    report.value("complement_image_norm", r.complement_image_norm);
    report.value("phi_identity_defect", r.phi_identity_defect);
    report.value("ksgns_dim", result.subspace_onb.nrows());
    if r.input_is_phi_map && !r.obstruction_vanishes {
        report.note("the input is a phi-map but the obstruction is nonzero; the extension is semi-phi only");
    }
    Ok(report)
}

pub fn compare(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let Problem::Comparison(p) = &file.problem else {
        return Err(Failure::input(format!(
            "compare needs a comparison problem, got kind {}",
            file.problem.kind()
        )));
    };
    let result = extend_semi_phi(&p.map, &p.e, &p.phi, tol).map_err(|e| fail("compare", e))?;
    let agrees = compare_extensions(&p.gamma, &result, &p.phi, tol).map_err(|e| fail("compare", e))?;
    let distance = p
        .gamma
        .max_distance(&result.phi_prime)
        .map_err(|e| fail("compare", e))?;
    let mut report = ReportFile::new("compare");
    report.verdict("agrees_with_engine", agrees, 0.0 - distance);
    report.value("distance", distance);
    report.value("phi_prime_values", values_as_rows(&result.phi_prime));
    Ok(report)
}

pub fn paulsen(file: &ProblemFile, tol: &Tolerance) -> Outcome {
    let map = need_map("paulsen", &file.problem)?;
    let codomain = match &file.problem {
        Problem::SystemMap(p) => p.codomain.as_ref(),
        _ => None,
    };
    let phi = file.problem.phi();
    let sm = block_map(map, phi, codomain, tol).map_err(|e| fail("paulsen", e))?;
    let cp = is_cp_system_map(&sm, tol).map_err(|e| fail("paulsen", e))?;
    let corners = sm.corner_report(tol).map_err(|e| fail("paulsen", e))?;
    let mut report = ReportFile::new("paulsen");
    report.verdict("completely_positive", cp.completely_positive, cp.semi_phi.margin);
    report.verdict(
        "corner_preserving",
        corners.preserving,
        0.0 - corners.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max),
    );
    report.value("unital", sm.is_unital());
    report.value("domain_dim", sm.domain().dim());
    report.value("codomain_dim", sm.codomain().dim());
    report.value("sampled", cp.sampling.samples);
    report.value("worst_relative_eigenvalue", cp.sampling.worst_relative_eigenvalue);
    if let Some(witness) = cp.witness {
        report.witnesses.push(Witness::Positivity { witness });
    }
    Ok(report)
}
