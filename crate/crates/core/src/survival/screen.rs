use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CovariateKind, SurvivalData, SurvivalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZscoreReport {
    pub threshold: f64,
    /// Rows removed because of each covariate (a row can be counted under
    /// several covariates).
    pub removed_by: BTreeMap<String, usize>,
    pub rows_before: usize,
    pub rows_after: usize,
}

/// Drops rows where any numeric covariate lies more than `threshold`
/// population standard deviations from its mean. Categorical covariates and
/// constant columns never remove rows.
pub fn zscore_filter(data: &SurvivalData, threshold: f64) -> Result<(SurvivalData, ZscoreReport), SurvivalError> {
    if data.rows().is_empty() {
        return Err(SurvivalError::Empty);
    }
    if !(threshold > 0.0) {
        return Err(SurvivalError::Threshold(format!("z-score threshold must be positive, got {threshold}")));
    }
    let n = data.rows().len() as f64;
    let mut flagged = vec![false; data.rows().len()];
    let mut removed_by = BTreeMap::new();
    for (j, name) in data.names().iter().enumerate() {
        if data.kinds()[j] == CovariateKind::Categorical {
            continue;
        }
        let mean = data.rows().iter().map(|r| r.x[j]).sum::<f64>() / n;
        let sd = (data.rows().iter().map(|r| (r.x[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd == 0.0 {
            continue;
        }
        let mut count = 0;
        for (i, r) in data.rows().iter().enumerate() {
            if ((r.x[j] - mean) / sd).abs() > threshold {
                flagged[i] = true;
                count += 1;
            }
        }
        if count > 0 {
            removed_by.insert(name.clone(), count);
        }
    }
    let mut it = flagged.iter();
    let kept = data.retain_rows(|_| !*it.next().unwrap());
    let report = ZscoreReport { threshold, removed_by, rows_before: data.rows().len(), rows_after: kept.rows().len() };
    Ok((kept, report))
}

/// VIF of each column: 1 / (1 - R^2) from the least-squares regression of
/// that column on the others plus an intercept. Perfect fits and constant
/// columns give infinity.
pub fn vifs(data: &SurvivalData) -> Vec<f64> {
    let n = data.rows().len();
    let p = data.n_covariates();
    let x = DMatrix::from_fn(n, p, |i, j| data.rows()[i].x[j]);
    (0..p)
        .map(|j| {
            let y = x.column(j).into_owned();
            let mean = y.mean();
            let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            if tss <= 0.0 {
                return f64::INFINITY;
            }
            let mut design = DMatrix::from_element(n, p, 1.0);
            for (c, k) in (0..p).filter(|&k| k != j).enumerate() {
                design.set_column(c + 1, &x.column(k));
            }
            let design = design.columns(0, p).into_owned();
            let svd = design.clone().svd(true, true);
            let coef: DVector<f64> = svd.solve(&y, 1e-12).expect("svd with vectors");
            let rss: f64 = (&y - design * coef).iter().map(|r| r * r).sum();
            if rss <= 1e-12 * tss {
                f64::INFINITY
            } else {
                tss / rss
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub threshold: f64,
    pub kept: Vec<String>,
    /// Final VIF of each kept covariate.
    pub vif: BTreeMap<String, f64>,
    /// Dropped covariates with their VIF at the time of dropping, in order.
    pub dropped: Vec<(String, f64)>,
}

/// Repeatedly drops the covariate with the largest VIF above `threshold`
/// (on ties, the later column) until every VIF passes.
pub fn vif_screen(data: &SurvivalData, threshold: f64) -> Result<(SurvivalData, VifReport), SurvivalError> {
    if !(threshold > 1.0) {
        return Err(SurvivalError::Threshold(format!("VIF threshold must exceed 1, got {threshold}")));
    }
    if data.n_covariates() < 2 {
        return Err(SurvivalError::Threshold("VIF screening needs at least two covariates".into()));
    }
    if data.rows().is_empty() {
        return Err(SurvivalError::Empty);
    }
    let mut current = data.clone();
    let mut dropped = Vec::new();
    loop {
        let v = vifs(&current);
        let worst = (0..v.len())
            .filter(|&j| v[j] > threshold)
            .fold(None::<usize>, |best, j| match best {
                Some(b) if v[b] > v[j] => Some(b),
                _ => Some(j),
            });
        match worst {
            Some(j) if current.n_covariates() > 1 => {
                dropped.push((current.names()[j].clone(), v[j]));
                let keep: Vec<usize> = (0..current.n_covariates()).filter(|&k| k != j).collect();
                current = current.select(&keep);
            }
            Some(_) => return Err(SurvivalError::CollinearDesign(current.names().to_vec())),
            None => {
                let report = VifReport {
                    threshold,
                    kept: current.names().to_vec(),
                    vif: current.names().iter().cloned().zip(v).collect(),
                    dropped,
                };
                return Ok((current, report));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::SurvRow;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(cols: &[Vec<f64>]) -> SurvivalData {
        let n = cols[0].len();
        let names: Vec<String> = (0..cols.len()).map(|j| format!("x{}", j + 1)).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows = (0..n)
            .map(|i| SurvRow { id: format!("r{i:03}"), start: 0.0, stop: 1.0 + i as f64, event: i % 2 == 0, x: cols.iter().map(|c| c[i]).collect() })
            .collect();
        SurvivalData::numeric(&refs, rows).unwrap()
    }

    #[test]
    fn zscore_rules() {
        let mut col = vec![0.0; 20];
        col.push(100.0);
        let d = data(&[col, vec![1.0; 21]]);
        let (kept, report) = zscore_filter(&d, 3.0).unwrap();
        assert_eq!(kept.rows().len(), 20);
        assert_eq!(report.removed_by.get("x1"), Some(&1));
        assert!(kept.rows().iter().all(|r| r.x[0] == 0.0));
        let (same, _) = zscore_filter(&d, f64::INFINITY).unwrap();
        assert_eq!(same, d);
        assert!(zscore_filter(&d, 0.0).is_err());
    }

    #[test]
    fn categorical_columns_are_not_filtered() {
        let mut col = vec![0.0; 20];
        col.push(1.0);
        let d = data(&[col]);
        let d = SurvivalData::new(d.names().to_vec(), vec![CovariateKind::Categorical], d.rows().to_vec()).unwrap();
        assert_eq!(zscore_filter(&d, 3.0).unwrap().0.rows().len(), 21);
    }

    #[test]
    fn orthogonal_columns_have_unit_vif() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        for v in vifs(&data(&[a, b])) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_column_dropped() {
        let a: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let c: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).cos()).collect();
        let d = data(&[a.clone(), c, a]);
        assert!(vifs(&d)[0].is_infinite());
        let (kept, report) = vif_screen(&d, 5.0).unwrap();
        assert_eq!(report.kept, vec!["x1", "x2"]);
        assert_eq!(report.dropped[0].0, "x3");
        assert_eq!(kept.n_covariates(), 2);
        assert!(vif_screen(&d, 1.0).is_err());
    }

    #[test]
    fn near_collinear_matches_direct_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x1: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x3: Vec<f64> = (0..50).map(|i| x1[i] + x2[i] + rng.random_range(-0.05..0.05)).collect();
        let v = vifs(&data(&[x1.clone(), x2.clone(), x3.clone()]));
        // normal equations for x3 ~ 1 + x1 + x2, solved by Cramer's rule
        let n = 50.0;
        let s = |a: &[f64]| a.iter().sum::<f64>();
        let sp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let m = [[n, s(&x1), s(&x2)], [s(&x1), sp(&x1, &x1), sp(&x1, &x2)], [s(&x2), sp(&x1, &x2), sp(&x2, &x2)]];
        let rhs = [s(&x3), sp(&x1, &x3), sp(&x2, &x3)];
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let det = det3(m);
        let coef: Vec<f64> = (0..3)
            .map(|c| {
                let mut mc = m;
                for r in 0..3 {
                    mc[r][c] = rhs[r];
                }
                det3(mc) / det
            })
            .collect();
        let mean = s(&x3) / n;
        let tss: f64 = x3.iter().map(|v| (v - mean).powi(2)).sum();
        let rss: f64 = (0..50).map(|i| (x3[i] - coef[0] - coef[1] * x1[i] - coef[2] * x2[i]).powi(2)).sum();
        let oracle = 1.0 / (1.0 - (1.0 - rss / tss));
        assert!((v[2] - oracle).abs() / oracle < 1e-9, "{} vs {oracle}", v[2]);
        assert!(v[2] > 100.0);
    }
}
