use semiphi::extension::{
    canonical_compacts_extension, compare_extensions, extend_semi_phi, is_phi_map,
    phi_extension_obstruction,
};
use semiphi::fixtures::{example_2_1, fixture_rng, random_injectivity_fixture, split_block_fixture};
use semiphi::paulsen::{example_3_4_map, injectivity_demo};
use semiphi::problem::ReportFile;
use semiphi::{Error, Tolerance};

use crate::{fail, DemoName, Failure, Outcome};

/// Agreement required between independently built maps.
const AGREEMENT: f64 = 1e-8;

struct Checks {
    report: ReportFile,
    failed: Vec<String>,
}

impl Checks {
    fn new(command: &str) -> Self {
        Self {
            report: ReportFile::new(command),
            failed: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, holds: bool, margin: f64, expected: &str) {
        self.report.verdict(name, holds, margin);
        if !holds {
            self.failed
                .push(format!("{name}: expected {expected}, margin {margin:.3e}"));
        }
    }

    fn finish(self) -> Outcome {
        if self.failed.is_empty() {
            Ok(self.report)
        } else {
            Err(Failure {
                code: 1,
                message: format!("demo conclusions fail:\n  {}", self.failed.join("\n  ")),
                report: Some(Box::new(self.report)),
            })
        }
    }
}

pub fn run(name: DemoName, n: usize, seed: u64, tol: &Tolerance) -> Outcome {
    let command = match name {
        DemoName::Example21 => "demo example-2-1",
        DemoName::Example34 => "demo example-3-4",
        DemoName::Example39 => "demo example-3-9",
        DemoName::Compacts26 => "demo compacts-2-6",
    };
    let mut checks = Checks::new(command);
    checks.report.value("n", n);
    let result = match name {
        DemoName::Example21 => example_2_1_demo(&mut checks, n, tol),
        DemoName::Example34 => example_3_4_demo(&mut checks, n, tol),
        DemoName::Example39 => {
            checks.report.value("seed", seed);
            example_3_9_demo(&mut checks, n, seed, tol)
        }
        DemoName::Compacts26 => compacts_demo(&mut checks, n, tol),
    };
    result.map_err(|e| fail(command, e))?;
    checks.finish()
}

fn example_2_1_demo(checks: &mut Checks, n: usize, tol: &Tolerance) -> Result<(), Error> {
    let ex = example_2_1(n);
    let on_f = is_phi_map(&ex.map, &ex.phi, tol)?;
    let deviation = on_f.worst.map_or(0.0, |w| w.deviation);
    checks.check("phi_map_on_f", on_f.holds, 0.0 - deviation, "Φ([T; 0]) = T to be a phi-map on F");

    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, tol)?;
    let distance = result.phi_prime.max_distance(&ex.map_on_e)?;
    checks.check(
        "extension_is_phi_plus_zero",
        distance <= AGREEMENT,
        AGREEMENT - distance,
        "the engine to return Φ ⊕ 0",
    );
    checks.report.value("distance_to_phi_plus_zero", distance);

    let on_e = is_phi_map(&result.phi_prime, &ex.phi, tol)?;
    let failing = on_e.first_failure.map_or(0.0, |w| w.deviation);
    checks.check(
        "extension_not_phi_map",
        !on_e.holds,
        failing,
        "Φ' to fail the phi-map identity on E",
    );
    checks.report.value("failing_pair", on_e.first_failure);

    let obstruction = phi_extension_obstruction(&ex.phi, &ex.f, &ex.e, tol)?;
    checks.check(
        "obstruction_nonzero",
        !obstruction.vanishes,
        obstruction.norm - obstruction.threshold,
        "phi(<F-perp, E>) != 0",
    );
    checks.report.value("obstruction_norm", obstruction.norm);

    let refused = matches!(
        compare_extensions(&ex.map_on_e, &result, &ex.phi, tol),
        Err(Error::Precondition(_))
    ) && matches!(
        canonical_compacts_extension(&ex.map, &ex.e, &ex.phi, tol),
        Err(Error::ObstructionNonzero(_))
    );
    checks.check(
        "uniqueness_precondition_refused",
        refused,
        obstruction.norm,
        "the uniqueness statement to refuse this pair",
    );
    checks
        .report
        .note("Φ([T; 0]) = T has no phi-map extension to {[T; S]}; the engine's extension is only semi-phi");
    Ok(())
}

fn example_3_4_demo(checks: &mut Checks, h: usize, tol: &Tolerance) -> Result<(), Error> {
    let ex = example_3_4_map(h, tol)?;
    checks.check(
        "unital",
        ex.unital_defect <= 1e-12,
        1e-12 - ex.unital_defect,
        "φ(I) = I",
    );
    checks.check(
        "completely_positive",
        ex.cp.completely_positive,
        ex.cp.margin,
        "a positive semidefinite Choi matrix",
    );
    let worst = ex.corners.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max);
    checks.check(
        "not_corner_preserving",
        !ex.corners.preserving,
        worst,
        "a corner violation",
    );
    let positions: Vec<(usize, usize)> = ex
        .corners
        .violations
        .iter()
        .map(|v| v.block_position(h))
        .collect();
    checks.check(
        "violation_at_1_4",
        positions.contains(&(1, 4)),
        worst,
        "the corner entry to land at block (1, 4)",
    );
    checks.report.value("violation_blocks", positions);
    checks.report.value("choi_min_eigenvalue", ex.cp.margin);
    Ok(())
}

fn example_3_9_demo(checks: &mut Checks, n: usize, seed: u64, tol: &Tolerance) -> Result<(), Error> {
    let mut rng = fixture_rng(seed, 0);
    let fx = random_injectivity_fixture(&mut rng, n, tol);
    let ext = injectivity_demo(&fx.g, &fx.f, &fx.embedding, &fx.map, &fx.phi, tol)?;
    checks.check(
        "restriction_agrees",
        ext.restriction_error <= AGREEMENT,
        AGREEMENT - ext.restriction_error,
        "Ψ to restrict to Φ on G",
    );
    checks.check(
        "psi_extends_phi",
        ext.psi_extension_error <= AGREEMENT,
        AGREEMENT - ext.psi_extension_error,
        "ψ to restrict to φ on C",
    );
    checks.check(
        "extension_semi_psi",
        ext.semi_psi_margin >= -AGREEMENT,
        ext.semi_psi_margin,
        "Ψ to be completely semi-ψ",
    );
    checks.report.value("g_dim", fx.g.dim());
    checks.report.value("f_dim", fx.f.dim());
    checks.report.value("small_blocks", fx.g.algebra().blocks());
    checks.report.value("big_blocks", fx.f.algebra().blocks());
    Ok(())
}

fn compacts_demo(checks: &mut Checks, n: usize, tol: &Tolerance) -> Result<(), Error> {
    let ex = split_block_fixture(n);
    let obstruction = phi_extension_obstruction(&ex.phi, &ex.f, &ex.e, tol)?;
    checks.check(
        "obstruction_vanishes",
        obstruction.vanishes,
        obstruction.threshold - obstruction.norm,
        "phi(<F-perp, E>) = 0",
    );
    let canonical = canonical_compacts_extension(&ex.map, &ex.e, &ex.phi, tol)?;
    let check = is_phi_map(&canonical, &ex.phi, tol)?;
    checks.check(
        "phi_plus_zero_is_phi_map",
        check.holds,
        0.0 - check.worst.map_or(0.0, |w| w.deviation),
        "Φ ⊕ 0 to be a phi-map",
    );
    let hand = canonical.max_distance(&ex.map_on_e)?;
    checks.check(
        "matches_hand_computation",
        hand <= AGREEMENT,
        AGREEMENT - hand,
        "diag(T, S) ↦ T",
    );
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, tol)?;
    let engine = canonical.max_distance(&result.phi_prime)?;
    checks.check(
        "equals_engine_output",
        engine <= AGREEMENT && compare_extensions(&canonical, &result, &ex.phi, tol)?,
        AGREEMENT - engine,
        "Φ ⊕ 0 to coincide with the engine's extension",
    );
    checks.report.value("engine_distance", engine);
    Ok(())
}
