//! Ranking scores that turn mechanism outputs into reals.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::DistAuditError;
use crate::value::Value;

const RIDGE: f64 = 1e-6;
const NEWTON_STEPS: usize = 50;

/// Scores two sample lists with one shared ranking function:
/// raw value for scalars, empirical log-likelihood ratio for categorical
/// indices, a logistic-regression score for vectors.
pub fn score_samples(sp: &[Value], sq: &[Value]) -> Result<(Vec<f64>, Vec<f64>), DistAuditError> {
    let all = || sp.iter().chain(sq);
    if all().all(|v| matches!(v, Value::Index(_))) {
        return Ok(index_llr(sp, sq));
    }
    let flat = |v: &Value| v.leaves();
    let fp: Vec<Vec<f64>> = sp.iter().map(flat).collect();
    let fq: Vec<Vec<f64>> = sq.iter().map(flat).collect();
    let dim = fp.first().or(fq.first()).map_or(0, Vec::len);
    if dim == 0 || fp.iter().chain(&fq).any(|x| x.len() != dim) {
        return Err(DistAuditError::Scoring("samples differ in shape or carry no numbers".into()));
    }
    if fp.iter().chain(&fq).flatten().any(|x| !x.is_finite()) {
        return Err(DistAuditError::Scoring("non-finite sample".into()));
    }
    if dim == 1 {
        return Ok((fp.iter().map(|x| x[0]).collect(), fq.iter().map(|x| x[0]).collect()));
    }
    let w = logistic_direction(&fp, &fq);
    let project = |x: &Vec<f64>| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    Ok((fp.iter().map(project).collect(), fq.iter().map(project).collect()))
}

fn index_llr(sp: &[Value], sq: &[Value]) -> (Vec<f64>, Vec<f64>) {
    let mut counts: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for v in sp {
        counts.entry(v.as_index().expect("checked")).or_default().0 += 1.0;
    }
    for v in sq {
        counts.entry(v.as_index().expect("checked")).or_default().1 += 1.0;
    }
    let (np, nq) = (sp.len() as f64, sq.len() as f64);
    let llr: BTreeMap<usize, f64> =
        counts.iter().map(|(&k, &(cp, cq))| (k, ((cq + 0.5) / nq).ln() - ((cp + 0.5) / np).ln())).collect();
    let score = |v: &Value| llr[&v.as_index().expect("checked")];
    (sp.iter().map(score).collect(), sq.iter().map(score).collect())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weight vector (in raw feature coordinates) of a ridge-regularised
/// logistic regression separating `q` samples (label 1) from `p` samples.
pub fn logistic_direction(p: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<f64> {
    let dim = p[0].len();
    let n = p.len() + q.len();
    let rows = || p.iter().chain(q);
    let mean: Vec<f64> = (0..dim).map(|j| rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let sd: Vec<f64> = (0..dim)
        .map(|j| {
            let v = rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 { v.sqrt() } else { 1.0 }
        })
        .collect();
    let x = DMatrix::from_fn(n, dim + 1, |i, j| {
        if j == dim {
            1.0
        } else {
            let r = if i < p.len() { &p[i] } else { &q[i - p.len()] };
            (r[j] - mean[j]) / sd[j]
        }
    });
    let y = DVector::from_fn(n, |i, _| if i < p.len() { 0.0 } else { 1.0 });
    let mut w = DVector::zeros(dim + 1);
    for _ in 0..NEWTON_STEPS {
        let mu = (&x * &w).map(sigmoid);
        let weights = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let grad = x.transpose() * (&mu - &y) + &w * (RIDGE * n as f64);
        let xw = DMatrix::from_fn(n, dim + 1, |i, j| x[(i, j)] * weights[i]);
        let hess = x.transpose() * xw + DMatrix::identity(dim + 1, dim + 1) * (RIDGE * n as f64);
        let Some(step) = hess.cholesky().map(|c| c.solve(&grad)) else { break };
        w -= &step;
        if step.norm() < 1e-10 {
            break;
        }
    }
    (0..dim).map(|j| w[j] / sd[j]).collect()
}
