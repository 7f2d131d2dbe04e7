use semiphi::fixtures::{
    example_2_1, fixture_rng, random_extension_fixture, random_semi_phi_pair,
    scalar_multiplication, split_block_fixture,
};
use semiphi::problem::{CpMapPayload, ExtensionPayload, PairPayload, Problem, ProblemFile};
use semiphi::{CpMap, Tolerance};

use crate::{Failure, FixtureName};

pub fn build(name: FixtureName, n: usize, seed: u64, tol: &Tolerance) -> Result<ProblemFile, Failure> {
    let problem = match name {
        FixtureName::Example21 | FixtureName::SplitBlocks => {
            let ex = match name {
                FixtureName::Example21 => example_2_1(n),
                _ => split_block_fixture(n),
            };
            Problem::Extension(ExtensionPayload {
                map: ex.map,
                e: ex.e,
                phi: ex.phi,
            })
        }
        FixtureName::Transpose => Problem::CpMap(CpMapPayload {
            phi: CpMap::transpose(n),
        }),
        FixtureName::Scalar => {
            let (map, phi) = scalar_multiplication(n as f64);
            Problem::Pair(PairPayload { map, phi })
        }
        FixtureName::RandomExtension => {
            let fx = random_extension_fixture(&mut fixture_rng(seed, 0), tol);
            Problem::Extension(ExtensionPayload {
                map: fx.map,
                e: fx.e,
                phi: fx.phi,
            })
        }
        FixtureName::RandomPair => {
            let (map, phi) = random_semi_phi_pair(&mut fixture_rng(seed, 0), tol);
            Problem::Pair(PairPayload { map, phi })
        }
    };
    Ok(ProblemFile::new(problem))
}
