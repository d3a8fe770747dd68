use serde::{Deserialize, Serialize};

use super::defects::DefectMeasurement;
use super::AnalyzeError;
use crate::dataio::GroundTruthDefect;

/// Largest centroid distance at which a measurement may match a truth defect.
pub const MATCH_GATE_MM: f64 = 500.0;

/// Mean relative errors in percent, plus matching bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MreReport {
    pub mre_depth: f64,
    pub mre_width: f64,
    pub mre_length: f64,
    /// `(truth index, measurement index)`.
    pub matched: Vec<(usize, usize)>,
    /// Truth defects with no measurement inside the gate.
    pub misses: Vec<usize>,
    /// Measurements not matched to any truth defect.
    pub false_positives: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub r2: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub mre_depth: Option<f64>,
    pub mre_width: Option<f64>,
    pub mre_length: Option<f64>,
}

impl EvalStats {
    pub fn with_fit(mut self, fit: &LinearFit) -> Self {
        self.r2 = Some(fit.r2);
        self.slope = Some(fit.slope);
        self.intercept = Some(fit.intercept);
        self
    }

    pub fn with_mre(mut self, mre: &MreReport) -> Self {
        self.mre_depth = Some(mre.mre_depth);
        self.mre_width = Some(mre.mre_width);
        self.mre_length = Some(mre.mre_length);
        self
    }
}

/// One-to-one nearest-centroid matching, closest pairs first.
/// Both lists must be in the same road coordinates.
pub fn match_defects(measured: &[DefectMeasurement], truth: &[GroundTruthDefect]) -> Vec<(usize, usize)> {
    let mut cands = Vec::new();
    for (t, g) in truth.iter().enumerate() {
        for (m, d) in measured.iter().enumerate() {
            let dist = 1000.0 * (g.station_m - d.station_m).hypot(g.offset_m - d.offset_m);
            if dist <= MATCH_GATE_MM {
                cands.push((dist, t, m));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_m = vec![false; measured.len()];
    let mut pairs = Vec::new();
    for (_, t, m) in cands {
        if !used_t[t] && !used_m[m] {
            used_t[t] = true;
            used_m[m] = true;
            pairs.push((t, m));
        }
    }
    pairs.sort_unstable();
    pairs
}

pub fn defect_mre(measured: &[DefectMeasurement], truth: &[GroundTruthDefect]) -> Result<MreReport, AnalyzeError> {
    let matched = match_defects(measured, truth);
    if matched.is_empty() {
        return Err(AnalyzeError::NoMatchedPairs);
    }
    let rel = |m: f64, t: f64| (m - t).abs() / t * 100.0;
    let n = matched.len() as f64;
    let (mut d, mut w, mut l) = (0.0, 0.0, 0.0);
    for &(t, m) in &matched {
        d += rel(measured[m].depth_mm, truth[t].depth_mm);
        w += rel(measured[m].width_mm, truth[t].width_mm);
        l += rel(measured[m].length_mm, truth[t].length_mm);
    }
    Ok(MreReport {
        mre_depth: d / n,
        mre_width: w / n,
        mre_length: l / n,
        misses: (0..truth.len()).filter(|t| !matched.iter().any(|p| p.0 == *t)).collect(),
        false_positives: (0..measured.len()).filter(|m| !matched.iter().any(|p| p.1 == *m)).collect(),
        matched,
    })
}

/// Ordinary least squares of estimated on truth, pairs given as
/// `(estimated, truth)`.
pub fn linear_fit_r2(pairs: &[(f64, f64)]) -> Result<LinearFit, AnalyzeError> {
    if pairs.len() < 3 {
        return Err(AnalyzeError::TooFewPairs { got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let my = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(y, x) in pairs {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(AnalyzeError::DegenerateVariance);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pairs.iter().map(|&(y, x)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::DefectKind;
    use nalgebra::{Matrix2, Vector2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth(depth: f64, width: f64, length: f64, station: f64, offset: f64) -> GroundTruthDefect {
        GroundTruthDefect {
            kind: DefectKind::Pothole,
            depth_mm: depth,
            width_mm: width,
            length_mm: length,
            station_m: station,
            offset_m: offset,
        }
    }

    fn measured(g: &GroundTruthDefect) -> DefectMeasurement {
        DefectMeasurement {
            kind: g.kind,
            depth_mm: g.depth_mm,
            width_mm: g.width_mm,
            length_mm: g.length_mm,
            station_m: g.station_m,
            offset_m: g.offset_m,
            area_mm2: g.width_mm * g.length_mm,
            pixel_count: 1,
        }
    }

    #[test]
    fn exact_is_zero() {
        let t = [truth(50.0, 300.0, 400.0, 1.0, 0.5), truth(30.0, 200.0, 200.0, 3.0, 1.0)];
        let m: Vec<_> = t.iter().map(measured).collect();
        let r = defect_mre(&m, &t).unwrap();
        assert_eq!((r.mre_depth, r.mre_width, r.mre_length), (0.0, 0.0, 0.0));
        assert!(r.misses.is_empty() && r.false_positives.is_empty());
    }

    #[test]
    fn reported_depth_error() {
        let t = [truth(100.0, 300.0, 400.0, 1.0, 0.5)];
        let mut m = measured(&t[0]);
        m.depth_mm = 103.93;
        let r = defect_mre(&[m], &t).unwrap();
        assert!((r.mre_depth - 3.93).abs() < 1e-9);
    }

    #[test]
    fn reported_width_and_length_errors() {
        let t = [truth(100.0, 200.0, 500.0, 1.0, 0.5), truth(100.0, 300.0, 400.0, 3.0, 0.5)];
        let mut a = measured(&t[0]);
        a.width_mm = 204.6;
        a.length_mm = 536.1;
        let mut b = measured(&t[1]);
        b.width_mm = 306.9;
        b.length_mm = 428.88;
        let r = defect_mre(&[a, b], &t).unwrap();
        assert_eq!(r.mre_depth, 0.0);
        assert!((r.mre_width - 2.3).abs() < 1e-9);
        assert!((r.mre_length - 7.22).abs() < 1e-9);
    }

    #[test]
    fn empty_measured() {
        let t = [truth(100.0, 300.0, 400.0, 1.0, 0.5)];
        assert_eq!(defect_mre(&[], &t).unwrap_err(), AnalyzeError::NoMatchedPairs);
    }

    #[test]
    fn gate_and_bookkeeping() {
        let t = [truth(50.0, 300.0, 400.0, 1.0, 0.5), truth(50.0, 300.0, 400.0, 5.0, 0.5)];
        let mut near = measured(&t[0]);
        near.station_m += 0.1;
        let mut far = measured(&t[1]);
        far.station_m += 0.6;
        let r = defect_mre(&[far, near], &t).unwrap();
        assert_eq!(r.matched, vec![(0, 1)]);
        assert_eq!(r.misses, vec![1]);
        assert_eq!(r.false_positives, vec![0]);
    }

    #[test]
    fn one_to_one() {
        // two truths competing for one measurement: the closer wins
        let t = [truth(50.0, 300.0, 400.0, 1.0, 0.5), truth(50.0, 300.0, 400.0, 1.3, 0.5)];
        let mut m = measured(&t[1]);
        m.station_m = 1.2;
        let r = defect_mre(&[m], &t).unwrap();
        assert_eq!(r.matched, vec![(1, 0)]);
        assert_eq!(r.misses, vec![0]);
    }

    #[test]
    fn perfect_line() {
        let pairs: Vec<_> = (0..10).map(|i| (i as f64, i as f64)).collect();
        let f = linear_fit_r2(&pairs).unwrap();
        assert_eq!((f.slope, f.intercept, f.r2), (1.0, 0.0, 1.0));
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            linear_fit_r2(&[(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)]).unwrap_err(),
            AnalyzeError::DegenerateVariance
        );
        assert_eq!(
            linear_fit_r2(&[(1.0, 1.0), (2.0, 2.0)]).unwrap_err(),
            AnalyzeError::TooFewPairs { got: 2 }
        );
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<(f64, f64)> = (0..50)
            .map(|_| {
                let x = rng.random_range(600.0..1200.0);
                (1.02 * x - 4.0 + rng.random_range(-5.0..5.0), x)
            })
            .collect();
        let f = linear_fit_r2(&pairs).unwrap();
        // [n, sum x; sum x, sum x^2] [b; a] = [sum y; sum xy]
        let n = pairs.len() as f64;
        let (sx, sxx) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.1, b + p.1 * p.1));
        let (sy, sxy) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1 * p.0));
        let sol = Matrix2::new(n, sx, sx, sxx).lu().solve(&Vector2::new(sy, sxy)).unwrap();
        let (b, a) = (sol[0], sol[1]);
        let mean_y = sy / n;
        let ss_tot: f64 = pairs.iter().map(|p| (p.0 - mean_y).powi(2)).sum();
        let ss_res: f64 = pairs.iter().map(|p| (p.0 - a * p.1 - b).powi(2)).sum();
        assert!((f.slope - a).abs() < 1e-9);
        assert!((f.intercept - b).abs() < 1e-9 * b.abs().max(1.0) * 100.0, "{} vs {b}", f.intercept);
        assert!((f.r2 - (1.0 - ss_res / ss_tot)).abs() < 1e-9);
    }

    #[test]
    fn orientation_is_estimated_on_truth() {
        let pairs = [(2.0, 1.0), (3.0, 2.0), (7.0, 3.0), (8.0, 4.0)];
        let f = linear_fit_r2(&pairs).unwrap();
        let swapped: Vec<_> = pairs.iter().map(|&(y, x)| (x, y)).collect();
        let g = linear_fit_r2(&swapped).unwrap();
        assert!((f.slope - 2.2).abs() < 1e-12);
        assert!((f.slope - 1.0 / g.slope).abs() > 0.1);
    }

    proptest! {
        #[test]
        fn mre_symmetric_under_reordering(
            errs in proptest::collection::vec((0.5f64..1.5, 0.5f64..1.5, 0.5f64..1.5), 1..6),
            rot in 0usize..6,
        ) {
            let t: Vec<_> = (0..errs.len()).map(|i| truth(40.0, 300.0, 350.0, i as f64 * 2.0, 0.5)).collect();
            let m: Vec<_> = t.iter().zip(&errs).map(|(g, e)| {
                let mut d = measured(g);
                d.depth_mm *= e.0;
                d.width_mm *= e.1;
                d.length_mm *= e.2;
                d
            }).collect();
            let a = defect_mre(&m, &t).unwrap();
            let mut m2 = m.clone();
            m2.rotate_left(rot % m.len());
            let b = defect_mre(&m2, &t).unwrap();
            prop_assert!((a.mre_depth - b.mre_depth).abs() < 1e-9);
            prop_assert!((a.mre_width - b.mre_width).abs() < 1e-9);
            prop_assert!((a.mre_length - b.mre_length).abs() < 1e-9);
            prop_assert!(a.mre_depth >= 0.0 && a.mre_width >= 0.0 && a.mre_length >= 0.0);
        }

        #[test]
        fn r2_at_most_one(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..30)) {
            if let Ok(f) = linear_fit_r2(&pairs) {
                prop_assert!(f.r2 <= 1.0 + 1e-12);
            }
        }
    }
}
