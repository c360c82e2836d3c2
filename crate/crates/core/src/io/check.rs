//! Cross-validation of the constrained least-squares routes on random
//! problems: the KKT solve, alr regressions for every reference part, and
//! the penalty oracle.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::compositions::validate_composition;
use crate::design::{build_design, response_vector, Dataset, ModelSpec, ModeratorKind, Observation};
use crate::error::Result;
use crate::freq::{fit_alr_ols, fit_constrained_ols};
use crate::oracle::oracle_constrained_ls;

/// Agreement required between routes, in absolute coefficient units.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

/// A random log-contrast problem: `D ∈ {3, 5, 8}`, no/binary/numeric
/// moderator, total on even seeds, `n` rows, unit-variance noise.
pub fn random_instance(seed: u64, n: usize) -> Result<(Dataset, ModelSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = [3, 5, 8][seed as usize % 3];
    let moderator = [ModeratorKind::None, ModeratorKind::Binary, ModeratorKind::Numeric][(seed / 3) as usize % 3];
    let spec = ModelSpec {
        include_total: seed.is_multiple_of(2),
        moderator,
        ..ModelSpec::log_contrast((0..d).map(|j| format!("p{j}")).collect())
    };
    let rows = (0..n)
        .map(|_| {
            let parts = (0..d)
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * 0.8 + 1.0).exp())
                .collect();
            let mut o = Observation::new(validate_composition(parts)?, 0.0);
            o.moderator = Some(match moderator {
                ModeratorKind::Binary => rng.random_bool(0.2) as u8 as f64,
                _ => rng.sample(StandardNormal),
            });
            Ok(o)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::new(rows)?;
    let x = build_design(&data, &spec)?;
    let beta = DVector::from_fn(x.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let eta = &x.values * beta;
    for (row, e) in data.rows.iter_mut().zip(eta.iter()) {
        row.response = e + rng.sample::<f64, _>(StandardNormal);
    }
    Ok((data, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    pub seed: u64,
    pub parts: usize,
    /// Largest |KKT − alr| over coefficients and reference parts.
    pub kkt_vs_alr: f64,
    pub kkt_vs_oracle: f64,
}

pub fn check_instance(seed: u64, n: usize) -> Result<Agreement> {
    let (data, spec) = random_instance(seed, n)?;
    let x = build_design(&data, &spec)?;
    let y = response_vector(&data, &spec)?;
    let kkt = fit_constrained_ols(&x, &y)?;
    let mut kkt_vs_alr: f64 = 0.0;
    for r in 0..spec.parts() {
        let alr = fit_alr_ols(&data, &spec, r)?;
        kkt_vs_alr = kkt_vs_alr.max((&kkt.coefficients - &alr.coefficients).amax());
    }
    let oracle = oracle_constrained_ls(&x.values, &y, &x.constraint_blocks)?;
    Ok(Agreement {
        seed,
        parts: spec.parts(),
        kkt_vs_alr,
        kkt_vs_oracle: (&kkt.coefficients - &oracle).amax(),
    })
}

/// Runs `instances` problems starting at `seed`; returns per-instance
/// results in seed order.
pub fn run_equivalence(seed: u64, instances: usize, n: usize) -> Result<Vec<Agreement>> {
    (0..instances as u64)
        .into_par_iter()
        .map(|i| check_instance(seed + i, n))
        .collect()
}

/// Text summary and overall verdict.
pub fn summarize(results: &[Agreement]) -> (String, bool) {
    let worst_alr = results.iter().map(|a| a.kkt_vs_alr).fold(0.0, f64::max);
    let worst_oracle = results.iter().map(|a| a.kkt_vs_oracle).fold(0.0, f64::max);
    let pass_alr = worst_alr < EQUIVALENCE_TOL;
    let pass_oracle = worst_oracle < EQUIVALENCE_TOL;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} kkt vs alr (all reference parts): max |diff| = {worst_alr:.3e} over {} instances (tol {EQUIVALENCE_TOL:e})",
        verdict(pass_alr),
        results.len()
    );
    let _ = writeln!(
        out,
        "{} kkt vs penalty oracle: max |diff| = {worst_oracle:.3e} over {} instances (tol {EQUIVALENCE_TOL:e})",
        verdict(pass_oracle),
        results.len()
    );
    (out, pass_alr && pass_oracle)
}
