//! Flow commutator defects `F2_t(F1_s x) - F1_s(F2_t x)`.

use rayon::prelude::*;

use crate::field::{FieldPair, SingularSet, VectorField};
use crate::flow::{flow_map, FlowMethod, FlowOutcome};
use crate::linalg;
use crate::measure::{sample_reference_measure, Source};
use crate::{Error, Result, Scalar};

/// Default threshold above which a defect counts as non-commuting.
pub const DEFAULT_DEFECT_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorDefectSample<T> {
    pub x: Vec<T>,
    pub s: T,
    pub t: T,
    /// `F2_t(F1_s(x))`.
    pub forward: Vec<T>,
    /// `F1_s(F2_t(x))`.
    pub reverse: Vec<T>,
    pub defect: Vec<T>,
    pub crossed: bool,
}

impl<T: Scalar> CommutatorDefectSample<T> {
    pub fn magnitude(&self) -> T {
        linalg::norm(&self.defect)
    }
}

/// One flow leg; failures are tagged with the leg's name.
pub(crate) fn leg<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    duration: T,
    method: FlowMethod<T>,
    name: &str,
) -> Result<FlowOutcome<T>> {
    if duration == T::zero() {
        return Ok(FlowOutcome::uncrossed(x.to_vec()));
    }
    flow_map(field, x, duration, method).map_err(|e| match e {
        Error::DimensionMismatch { .. } => e,
        Error::FlowUndefined { reason, .. } => Error::FlowUndefined {
            leg: name.to_string(),
            reason,
        },
        other => Error::FlowUndefined {
            leg: name.to_string(),
            reason: other.to_string(),
        },
    })
}

pub fn commutator_defect<T: Scalar>(
    pair: &FieldPair<T>,
    x: &[T],
    s: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<CommutatorDefectSample<T>> {
    if x.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: x.len(),
        });
    }
    let a = leg(&pair.first, x, s, method, "F1_s(x)")?;
    let forward = leg(&pair.second, &a.point, t, method, "F2_t(F1_s(x))")?;
    let b = leg(&pair.second, x, t, method, "F2_t(x)")?;
    let reverse = leg(&pair.first, &b.point, s, method, "F1_s(F2_t(x))")?;
    let defect = linalg::sub(&forward.point, &reverse.point);
    Ok(CommutatorDefectSample {
        x: x.to_vec(),
        s,
        t,
        crossed: a.crossed || forward.crossed || b.crossed || reverse.crossed,
        forward: forward.point,
        reverse: reverse.point,
        defect,
    })
}

/// Union of both fields' singular sets, with the larger exclusion radius.
pub fn pair_singular_set<T: Scalar>(pair: &FieldPair<T>) -> SingularSet<T> {
    let (a, b) = (pair.first.singular_set(), pair.second.singular_set());
    let mut components = a.components.clone();
    for c in &b.components {
        if !components.contains(c) {
            components.push(c.clone());
        }
    }
    SingularSet::new(components).with_exclusion(a.exclusion.max(b.exclusion))
}

/// Monte-Carlo statistics at one `(s, t)` node.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectRow<T> {
    pub s: T,
    pub t: T,
    /// Fraction of evaluated samples with `|defect| > threshold`.
    pub fraction_above: T,
    pub mean: T,
    pub max: T,
    /// Mean of `|defect_k|` for each coordinate.
    pub mean_abs: Vec<T>,
    pub crossed_fraction: T,
    pub evaluated: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectStatsSpec<T> {
    pub region: Source<T>,
    pub s_grid: Vec<T>,
    pub t_grid: Vec<T>,
    pub samples: usize,
    pub seed: u64,
    pub threshold: T,
    pub method: FlowMethod<T>,
}

/// Defect table over `s_grid x t_grid` (row-major in `s`). Starting points
/// avoid the exclusion tubes of both fields; failed flows are counted and
/// left out of the statistics.
pub fn defect_statistics<T: Scalar>(
    pair: &FieldPair<T>,
    spec: &DefectStatsSpec<T>,
) -> Result<Vec<DefectRow<T>>> {
    let sing = pair_singular_set(pair);
    let exclude = (!sing.is_empty()).then_some(&sing);
    let ens = sample_reference_measure(&spec.region, spec.samples, spec.seed, exclude)?;
    let d = pair.dim();
    let mut rows = Vec::with_capacity(spec.s_grid.len() * spec.t_grid.len());
    for &s in &spec.s_grid {
        for &t in &spec.t_grid {
            let samples: Vec<Option<CommutatorDefectSample<T>>> = (0..ens.len())
                .into_par_iter()
                .map(|i| commutator_defect(pair, ens.point(i), s, t, spec.method).ok())
                .collect();
            let mut row = DefectRow {
                s,
                t,
                fraction_above: T::zero(),
                mean: T::zero(),
                max: T::zero(),
                mean_abs: vec![T::zero(); d],
                crossed_fraction: T::zero(),
                evaluated: 0,
                failed: 0,
            };
            let mut above = 0usize;
            let mut crossed = 0usize;
            for sample in &samples {
                let Some(sample) = sample else {
                    row.failed += 1;
                    continue;
                };
                let m = sample.magnitude();
                row.evaluated += 1;
                row.mean += m;
                row.max = row.max.max(m);
                for (acc, v) in row.mean_abs.iter_mut().zip(&sample.defect) {
                    *acc += v.abs();
                }
                above += usize::from(m > spec.threshold);
                crossed += usize::from(sample.crossed);
            }
            if row.evaluated > 0 {
                let n = T::from_count(row.evaluated);
                row.mean /= n;
                row.mean_abs.iter_mut().for_each(|v| *v /= n);
                row.fraction_above = T::from_count(above) / n;
                row.crossed_fraction = T::from_count(crossed) / n;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{catalog, ScalarFn};
    use std::f64::consts::PI;

    #[test]
    fn helix_defect_is_two_pi() {
        let pair = catalog::helix_pair::<f64>();
        let d = commutator_defect(
            &pair,
            &[-1.0, -1.0, 0.0],
            2.0,
            2.0,
            FlowMethod::AnalyticOracle,
        )
        .unwrap();
        assert!(d.defect[0].abs() < 1e-12 && d.defect[1].abs() < 1e-12);
        assert!(
            (d.defect[2].abs() - 2.0 * PI).abs() < 1e-6,
            "{:?}",
            d.defect
        );
        assert!(d.crossed);
        let n = commutator_defect(
            &pair,
            &[-1.0, -1.0, 0.0],
            2.0,
            2.0,
            FlowMethod::Numeric(1e-8),
        )
        .unwrap();
        assert!(linalg::dist(&n.defect, &d.defect) < 1e-3);
    }

    #[test]
    fn zero_time_means_zero_defect() {
        for pair in catalog::builtin_catalog::<f64>() {
            let d = commutator_defect(
                &pair,
                &[-0.4, 0.7, 0.2],
                0.0,
                1.3,
                FlowMethod::AnalyticOracle,
            )
            .unwrap();
            assert!(d.defect.iter().all(|&v| v == 0.0), "{}", pair.name);
        }
    }

    #[test]
    fn graph_foliation_commutes() {
        let pair = catalog::graph_foliation_pair(ScalarFn::<f64>::sin_cos()).unwrap();
        let d = commutator_defect(
            &pair,
            &[0.3, 0.4, 0.0],
            1.0,
            1.0,
            FlowMethod::AnalyticOracle,
        )
        .unwrap();
        assert!(d.magnitude() < 1e-6);
    }

    #[test]
    fn failing_leg_is_named() {
        let pair = catalog::helix_pair::<f64>();
        match commutator_defect(
            &pair,
            &[0.0, -1.0, 0.0],
            1.0,
            1.0,
            FlowMethod::AnalyticOracle,
        ) {
            Err(Error::FlowUndefined { leg, .. }) => assert_eq!(leg, "F1_s(x)"),
            other => panic!("{other:?}"),
        }
    }

    fn stats(pair: &FieldPair<f64>, lo: Vec<f64>, hi: Vec<f64>, st: f64) -> DefectRow<f64> {
        let spec = DefectStatsSpec {
            region: Source::uniform_box(lo, hi),
            s_grid: vec![st],
            t_grid: vec![st],
            samples: 400,
            seed: 3,
            threshold: DEFAULT_DEFECT_THRESHOLD,
            method: FlowMethod::AnalyticOracle,
        };
        defect_statistics(pair, &spec).unwrap().remove(0)
    }

    #[test]
    fn helix_statistics() {
        let pair = catalog::helix_pair::<f64>();
        let big = stats(&pair, vec![-2.0, -2.0, -1.0], vec![-0.2, -0.2, 1.0], 3.0);
        assert_eq!(big.failed, 0);
        assert_eq!(big.fraction_above, 1.0);
        assert!((big.mean - 2.0 * PI).abs() < 1e-6);
        let small = stats(&pair, vec![-2.0, -2.0, -1.0], vec![-1.0, -1.0, 1.0], 0.5);
        assert_eq!(small.fraction_above, 0.0);
    }

    #[test]
    fn commuting_linear_statistics() {
        let pair = catalog::commuting_linear_pair::<f64>();
        let r = stats(&pair, vec![-1.0; 3], vec![1.0; 3], 1.0);
        assert_eq!(r.fraction_above, 0.0);
        assert!(r.max < 1e-12);
    }

    #[test]
    fn union_of_singular_sets() {
        let set = pair_singular_set(&catalog::helix_pair::<f64>());
        assert_eq!(
            set.components.len(),
            catalog::helix_singular_set::<f64>().components.len()
        );
    }
}
