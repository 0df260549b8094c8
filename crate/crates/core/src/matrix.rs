//! Count and probability matrices, the base (accuracy + pull) construction,
//! the sensitivity / relative false-positive decomposition, and the
//! constant-odds diagnostic that characterises base-model matrices.
//!
//! All matrices are square over an ordered [`CauseSet`]: row `i` is the
//! gold-standard cause, column `j` the cause predicted by the classifier.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on row sums for a matrix to count as row-stochastic.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Ordered, duplicate-free list of cause labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CauseSet {
    labels: Vec<String>,
}

impl CauseSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::CauseSet(format!(
                "need at least 2 causes, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::CauseSet(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// `cause1`, `cause2`, ... for synthetic data.
    pub fn numbered(c: usize) -> Result<Self> {
        Self::new((1..=c).map(|i| format!("cause{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Paired (gold, predicted) counts for one country.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    causes: CauseSet,
    counts: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(causes: CauseSet) -> Self {
        let c = causes.len();
        Self {
            causes,
            counts: vec![0; c * c],
        }
    }

    /// Row-major `C x C` counts.
    pub fn new(causes: CauseSet, counts: Vec<u64>) -> Result<Self> {
        let c = causes.len();
        if counts.len() != c * c {
            return Err(Error::Dimension {
                expected: c * c,
                found: counts.len(),
            });
        }
        Ok(Self { causes, counts })
    }

    pub fn from_rows(causes: CauseSet, rows: &[Vec<u64>]) -> Result<Self> {
        let c = causes.len();
        if rows.len() != c {
            return Err(Error::Dimension {
                expected: c,
                found: rows.len(),
            });
        }
        let mut counts = Vec::with_capacity(c * c);
        for r in rows {
            if r.len() != c {
                return Err(Error::Dimension {
                    expected: c,
                    found: r.len(),
                });
            }
            counts.extend_from_slice(r);
        }
        Ok(Self { causes, counts })
    }

    pub fn causes(&self) -> &CauseSet {
        &self.causes
    }

    pub fn dim(&self) -> usize {
        self.causes.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u64) {
        let c = self.dim();
        self.counts[i * c + j] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: u64) {
        let c = self.dim();
        self.counts[i * c + j] += value;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let c = self.dim();
        &self.counts[i * c..(i + 1) * c]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.row(i).iter().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.dim()).map(|i| self.row_total(i)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Empirical row proportions `t_ij / n_i`; `None` for rows with `n_i = 0`.
    pub fn proportions(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.dim())
            .map(|i| {
                let n = self.row_total(i);
                (n > 0).then(|| self.row(i).iter().map(|&t| t as f64 / n as f64).collect())
            })
            .collect()
    }
}

/// Elementwise sum of per-country count matrices.
pub fn pool(counts: &[CountMatrix]) -> Result<CountMatrix> {
    let first = counts
        .first()
        .ok_or_else(|| Error::Spec("cannot pool an empty list of count matrices".into()))?;
    let mut out = CountMatrix::zeros(first.causes.clone());
    for m in counts {
        if m.causes != first.causes {
            if m.dim() != first.dim() {
                return Err(Error::Dimension {
                    expected: first.dim(),
                    found: m.dim(),
                });
            }
            return Err(Error::LabelMismatch);
        }
        for (o, &v) in out.counts.iter_mut().zip(&m.counts) {
            *o += v;
        }
    }
    Ok(out)
}

/// Row-stochastic `C x C` matrix of classification probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassMatrix {
    dim: usize,
    probs: Vec<f64>,
}

impl MisclassMatrix {
    /// Row-major probabilities; every row must sum to one within [`ROW_SUM_TOL`].
    pub fn new(dim: usize, probs: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::CauseSet(format!("need at least 2 causes, got {dim}")));
        }
        if probs.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: probs.len(),
            });
        }
        for (i, row) in probs.chunks(dim).enumerate() {
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("entry {bad} outside [0, 1]"),
                });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("sums to {s}"),
                });
            }
        }
        Ok(Self { dim, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut probs = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: r.len(),
                });
            }
            probs.extend_from_slice(r);
        }
        Self::new(dim, probs)
    }

    pub fn identity(dim: usize) -> Self {
        let mut probs = vec![0.0; dim * dim];
        for i in 0..dim {
            probs[i * dim + i] = 1.0;
        }
        Self { dim, probs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Intrinsic accuracies and pull of the base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    accuracy: Vec<f64>,
    pull: Vec<f64>,
}

impl BaseParams {
    pub fn new(accuracy: Vec<f64>, pull: Vec<f64>) -> Result<Self> {
        if accuracy.len() != pull.len() {
            return Err(Error::Dimension {
                expected: accuracy.len(),
                found: pull.len(),
            });
        }
        if accuracy.len() < 2 {
            return Err(Error::CauseSet(format!(
                "need at least 2 causes, got {}",
                accuracy.len()
            )));
        }
        if let Some(a) = accuracy.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidParameter {
                name: "accuracy",
                reason: format!("{a} outside [0, 1]"),
            });
        }
        check_simplex("pull", &pull)?;
        Ok(Self { accuracy, pull })
    }

    pub fn dim(&self) -> usize {
        self.accuracy.len()
    }

    pub fn accuracy(&self) -> &[f64] {
        &self.accuracy
    }

    pub fn pull(&self) -> &[f64] {
        &self.pull
    }
}

pub(crate) fn check_simplex(name: &'static str, p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("entry {x} outside [0, 1]"),
        });
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("sums to {s}"),
        });
    }
    Ok(())
}

/// `phi_ii = a_i + (1 - a_i) alpha_i`, `phi_ij = (1 - a_i) alpha_j`.
pub fn build_base_matrix(params: &BaseParams) -> MisclassMatrix {
    let c = params.dim();
    let mut probs = vec![0.0; c * c];
    for i in 0..c {
        let miss = 1.0 - params.accuracy[i];
        for j in 0..c {
            probs[i * c + j] = miss * params.pull[j];
        }
        probs[i * c + i] += params.accuracy[i];
    }
    MisclassMatrix { dim: c, probs }
}

/// Sensitivities and relative false positives.
///
/// `rel_fp[i]` holds `q_ij` for `j != i` in cause order, or `None` when
/// `phi_ii = 1` leaves the false-positive distribution undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensRelFp {
    pub sensitivity: Vec<f64>,
    pub rel_fp: Vec<Option<Vec<f64>>>,
}

impl SensRelFp {
    pub fn dim(&self) -> usize {
        self.sensitivity.len()
    }

    /// `q_ij` with the full column index `j` (`j != i`).
    pub fn q(&self, i: usize, j: usize) -> Option<f64> {
        debug_assert_ne!(i, j);
        let k = if j < i { j } else { j - 1 };
        self.rel_fp[i].as_ref().map(|r| r[k])
    }
}

pub fn decompose(m: &MisclassMatrix) -> SensRelFp {
    let c = m.dim();
    let mut sensitivity = Vec::with_capacity(c);
    let mut rel_fp = Vec::with_capacity(c);
    for i in 0..c {
        let s = m.get(i, i);
        sensitivity.push(s);
        let miss = 1.0 - s;
        if miss <= 0.0 {
            rel_fp.push(None);
            continue;
        }
        let row: Vec<f64> = (0..c).filter(|&j| j != i).map(|j| m.get(i, j) / miss).collect();
        rel_fp.push(Some(row));
    }
    SensRelFp {
        sensitivity,
        rel_fp,
    }
}

pub fn recompose(d: &SensRelFp) -> Result<MisclassMatrix> {
    let c = d.dim();
    if d.rel_fp.len() != c {
        return Err(Error::Dimension {
            expected: c,
            found: d.rel_fp.len(),
        });
    }
    let mut probs = vec![0.0; c * c];
    for i in 0..c {
        let s = d.sensitivity[i];
        probs[i * c + i] = s;
        match &d.rel_fp[i] {
            Some(q) => {
                if q.len() != c - 1 {
                    return Err(Error::Dimension {
                        expected: c - 1,
                        found: q.len(),
                    });
                }
                let others = (0..c).filter(|&j| j != i);
                for (j, &qj) in others.zip(q) {
                    probs[i * c + j] = (1.0 - s) * qj;
                }
            }
            None if s == 1.0 => {}
            None => {
                return Err(Error::MissingRelFp {
                    row: i,
                    sensitivity: s,
                })
            }
        }
    }
    MisclassMatrix::new(c, probs)
}

/// `alpha*_ij = alpha_j / (1 - alpha_i)` over `j != i`, one row per cause.
pub fn base_rel_fp(pull: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_simplex("pull", pull)?;
    let c = pull.len();
    (0..c)
        .map(|i| {
            let rest = 1.0 - pull[i];
            if rest <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "pull",
                    reason: format!("alpha_{i} = 1 leaves no false-positive mass"),
                });
            }
            Ok((0..c).filter(|&j| j != i).map(|j| pull[j] / rest).collect())
        })
        .collect()
}

/// Log-odds `log(phi_ij / phi_ik)` over gold causes `i != j, k` for one
/// predicted-cause pair `j < k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsPair {
    pub j: usize,
    pub k: usize,
    /// `(i, log-odds)`; `None` when either probability is zero or row `i`
    /// has no data.
    pub entries: Vec<(usize, Option<f64>)>,
    /// `max - min` over finite entries; `None` when no entry is finite.
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsTable {
    pub dim: usize,
    pub pairs: Vec<OddsPair>,
}

impl OddsTable {
    pub fn from_probs(m: &MisclassMatrix) -> Self {
        let rows: Vec<Option<Vec<f64>>> = (0..m.dim()).map(|i| Some(m.row(i).to_vec())).collect();
        Self::from_rows(m.dim(), &rows)
    }

    /// Uses raw proportions `t_ij / n_i`; zero cells show up as missing entries.
    pub fn from_counts(t: &CountMatrix) -> Self {
        Self::from_rows(t.dim(), &t.proportions())
    }

    fn from_rows(c: usize, rows: &[Option<Vec<f64>>]) -> Self {
        let mut pairs = Vec::new();
        for j in 0..c {
            for k in (j + 1)..c {
                let entries: Vec<(usize, Option<f64>)> = (0..c)
                    .filter(|&i| i != j && i != k)
                    .map(|i| {
                        let v = rows[i].as_ref().and_then(|r| {
                            (r[j] > 0.0 && r[k] > 0.0).then(|| (r[j] / r[k]).ln())
                        });
                        (i, v)
                    })
                    .collect();
                let finite: Vec<f64> = entries.iter().filter_map(|e| e.1).collect();
                let spread = (!finite.is_empty()).then(|| {
                    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
                    hi - lo
                });
                pairs.push(OddsPair {
                    j,
                    k,
                    entries,
                    spread,
                });
            }
        }
        Self { dim: c, pairs }
    }

    pub fn pair(&self, j: usize, k: usize) -> Option<&OddsPair> {
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        self.pairs.iter().find(|p| p.j == j && p.k == k)
    }

    /// Largest spread over all pairs with at least one finite entry.
    pub fn max_spread(&self) -> Option<f64> {
        self.pairs
            .iter()
            .filter_map(|p| p.spread)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
    }

    /// `eta_jk`, the common odds of predicting `j` over `k`, as the mean of the
    /// finite log-odds entries. Diagonal is 1; `None` where nothing is finite.
    pub fn common_odds(&self) -> Vec<Vec<Option<f64>>> {
        let c = self.dim;
        let mut eta = vec![vec![None; c]; c];
        for (j, row) in eta.iter_mut().enumerate() {
            row[j] = Some(1.0);
        }
        for p in &self.pairs {
            let finite: Vec<f64> = p.entries.iter().filter_map(|e| e.1).collect();
            if finite.is_empty() {
                continue;
            }
            let mean = finite.iter().sum::<f64>() / finite.len() as f64;
            eta[p.j][p.k] = Some(mean.exp());
            eta[p.k][p.j] = Some((-mean).exp());
        }
        eta
    }
}

/// Recovers base-model parameters from a matrix with constant misclassification
/// odds. Pull comes from normalised odds against the last cause; accuracies then
/// follow from the diagonal.
pub fn recover_base_params(m: &MisclassMatrix) -> Result<BaseParams> {
    let c = m.dim();
    if c < 3 {
        return Err(Error::CauseSet(
            "odds-based recovery needs at least 3 causes".into(),
        ));
    }
    let eta = OddsTable::from_probs(m).common_odds();
    let last = c - 1;
    let theta: Vec<f64> = (0..c)
        .map(|j| {
            eta[j][last].ok_or(Error::InvalidParameter {
                name: "odds",
                reason: format!("no finite odds between causes {j} and {last}"),
            })
        })
        .collect::<Result<_>>()?;
    let total: f64 = theta.iter().sum();
    let pull: Vec<f64> = theta.iter().map(|t| t / total).collect();
    let accuracy = (0..c)
        .map(|i| {
            let a = 1.0 - (1.0 - m.get(i, i)) / (1.0 - pull[i]);
            if (-1e-9..=1.0 + 1e-9).contains(&a) {
                Ok(a.clamp(0.0, 1.0))
            } else {
                Err(Error::InvalidParameter {
                    name: "accuracy",
                    reason: format!("recovered a_{i} = {a} outside [0, 1]"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BaseParams::new(accuracy, pull)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn base_matrix_hand_values() {
        let p = BaseParams::new(vec![0.6, 0.5], vec![0.2, 0.8]).unwrap();
        let m = build_base_matrix(&p);
        let want = [0.68, 0.32, 0.10, 0.90];
        for (g, w) in m.as_slice().iter().zip(want) {
            assert!(close(*g, w, 1e-15), "{g} vs {w}");
        }
    }

    #[test]
    fn perfect_accuracy_is_identity() {
        let p = BaseParams::new(vec![1.0; 4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(build_base_matrix(&p), MisclassMatrix::identity(4));
    }

    #[test]
    fn zero_accuracy_rows_equal_pull() {
        let pull = vec![0.1, 0.2, 0.3, 0.4];
        let m = build_base_matrix(&BaseParams::new(vec![0.0; 4], pull.clone()).unwrap());
        for i in 0..4 {
            assert_eq!(m.row(i), pull.as_slice());
        }
    }

    #[test]
    fn base_params_reject_bad_pull() {
        assert!(BaseParams::new(vec![0.5, 0.5], vec![0.5, 0.6]).is_err());
        assert!(matches!(
            BaseParams::new(vec![0.5, 0.5, 0.5], vec![0.5, 0.5]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn decompose_rows_equal_to_pull() {
        let pull = [0.5, 0.3, 0.2];
        let rows: Vec<Vec<f64>> = (0..3).map(|_| pull.to_vec()).collect();
        let m = MisclassMatrix::from_rows(&rows).unwrap();
        let d = decompose(&m);
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                assert!(close(d.q(i, j).unwrap(), pull[j] / (1.0 - pull[i]), 1e-15));
            }
        }
    }

    #[test]
    fn decompose_identity_is_degenerate() {
        let d = decompose(&MisclassMatrix::identity(3));
        assert!(d.rel_fp.iter().all(Option::is_none));
        assert_eq!(recompose(&d).unwrap(), MisclassMatrix::identity(3));
    }

    #[test]
    fn rel_fp_of_base_matrix_ignores_accuracy() {
        let pull = vec![0.1, 0.2, 0.3, 0.4];
        let star = base_rel_fp(&pull).unwrap();
        for acc in [vec![0.1, 0.5, 0.7, 0.9], vec![0.3; 4]] {
            let d = decompose(&build_base_matrix(&BaseParams::new(acc, pull.clone()).unwrap()));
            for i in 0..4 {
                for (g, w) in d.rel_fp[i].as_ref().unwrap().iter().zip(&star[i]) {
                    assert!(close(*g, *w, 1e-14));
                }
            }
        }
    }

    #[test]
    fn recompose_hand_value() {
        let d = SensRelFp {
            sensitivity: vec![0.68, 0.9],
            rel_fp: vec![Some(vec![1.0]), Some(vec![1.0])],
        };
        let m = recompose(&d).unwrap();
        assert!(close(m.get(0, 0), 0.68, 1e-15));
        assert!(close(m.get(0, 1), 0.32, 1e-15));
    }

    #[test]
    fn recompose_rejects_missing_row() {
        let d = SensRelFp {
            sensitivity: vec![0.5, 1.0],
            rel_fp: vec![None, None],
        };
        assert!(matches!(recompose(&d), Err(Error::MissingRelFp { row: 0, .. })));
    }

    #[test]
    fn base_rel_fp_values() {
        let r = base_rel_fp(&[0.5, 0.3, 0.2]).unwrap();
        assert!(close(r[0][0], 0.6, 1e-15) && close(r[0][1], 0.4, 1e-15));
        let u = base_rel_fp(&[0.2; 5]).unwrap();
        assert!(u.iter().flatten().all(|&x| close(x, 0.25, 1e-15)));
        let t = base_rel_fp(&[0.25; 4]).unwrap();
        assert!(t.iter().flatten().all(|&x| close(x, 1.0 / 3.0, 1e-15)));
        assert!(base_rel_fp(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn odds_spread_zero_on_base_matrix() {
        let p = BaseParams::new(vec![0.2, 0.5, 0.7, 0.4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = OddsTable::from_probs(&build_base_matrix(&p));
        assert_eq!(t.pairs.len(), 6);
        for pair in &t.pairs {
            assert_eq!(pair.entries.len(), 2);
            assert!(pair.spread.unwrap() < 1e-12);
        }
    }

    #[test]
    fn odds_spread_detects_perturbation() {
        let p = BaseParams::new(vec![0.2, 0.5, 0.7, 0.4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let base = build_base_matrix(&p);
        let mut rows: Vec<Vec<f64>> = (0..4).map(|i| base.row(i).to_vec()).collect();
        rows[0][1] *= 1.5;
        let s: f64 = rows[0].iter().sum();
        rows[0].iter_mut().for_each(|x| *x /= s);
        let t = OddsTable::from_probs(&MisclassMatrix::from_rows(&rows).unwrap());
        assert!(t.pair(1, 2).unwrap().spread.unwrap() > 0.1);
        assert!(t.pair(1, 3).unwrap().spread.unwrap() > 0.1);
        // pairs not involving column 1 are untouched
        assert!(t.pair(2, 3).unwrap().spread.unwrap() < 1e-12);
    }

    #[test]
    fn odds_from_counts_flags_zero_column() {
        let causes = CauseSet::numbered(4).unwrap();
        let t = CountMatrix::from_rows(
            causes,
            &[
                vec![3, 0, 2, 1],
                vec![2, 0, 4, 1],
                vec![1, 0, 2, 5],
                vec![4, 0, 1, 1],
            ],
        )
        .unwrap();
        let table = OddsTable::from_counts(&t);
        for pair in table.pairs.iter().filter(|p| p.j == 1 || p.k == 1) {
            assert!(pair.entries.iter().all(|e| e.1.is_none()));
            assert_eq!(pair.spread, None);
        }
        for pair in table.pairs.iter().filter(|p| p.j != 1 && p.k != 1) {
            assert!(pair.entries.iter().all(|e| e.1.map_or(false, f64::is_finite)));
        }
    }

    #[test]
    fn odds_empty_for_two_causes() {
        let t = OddsTable::from_probs(&MisclassMatrix::identity(2));
        assert_eq!(t.pairs.len(), 1);
        assert!(t.pairs[0].entries.is_empty());
        assert_eq!(t.max_spread(), None);
    }

    #[test]
    fn pool_sums_and_checks_labels() {
        let causes = CauseSet::numbered(2).unwrap();
        let a = CountMatrix::from_rows(causes.clone(), &[vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(pool(std::slice::from_ref(&a)).unwrap(), a);
        let z = CountMatrix::zeros(causes.clone());
        assert_eq!(pool(&[z.clone(), z.clone()]).unwrap(), z);
        let other = CountMatrix::zeros(CauseSet::new(["x", "y"]).unwrap());
        assert_eq!(pool(&[a.clone(), other]), Err(Error::LabelMismatch));
        let big = CountMatrix::zeros(CauseSet::numbered(3).unwrap());
        assert!(matches!(pool(&[a, big]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn pooled_total_over_six_countries() {
        let causes = CauseSet::numbered(5).unwrap();
        let totals = [120u64, 80, 95, 110, 75, 90];
        let mats: Vec<CountMatrix> = totals
            .iter()
            .map(|&n| {
                let mut m = CountMatrix::zeros(causes.clone());
                m.set(0, 0, n / 2);
                m.set(3, 1, n - n / 2);
                m
            })
            .collect();
        assert_eq!(pool(&mats).unwrap().total(), 570);
    }

    #[test]
    fn cause_set_validation() {
        assert!(CauseSet::new(["a"]).is_err());
        assert!(CauseSet::new(["a", "b", "a"]).is_err());
        assert_eq!(CauseSet::new(["a", "b"]).unwrap().index_of("b"), Some(1));
    }

    #[test]
    fn misclass_matrix_validation() {
        assert!(MisclassMatrix::new(2, vec![0.5, 0.5, 0.5, 0.6]).is_err());
        assert!(MisclassMatrix::new(2, vec![1.5, -0.5, 0.5, 0.5]).is_err());
        assert!(MisclassMatrix::new(2, vec![0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn recovery_on_known_params() {
        let p = BaseParams::new(vec![0.2, 0.5, 0.7, 0.4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = recover_base_params(&build_base_matrix(&p)).unwrap();
        for (a, b) in r.accuracy().iter().zip(p.accuracy()) {
            assert!(close(*a, *b, 1e-12));
        }
        for (a, b) in r.pull().iter().zip(p.pull()) {
            assert!(close(*a, *b, 1e-12));
        }
    }
}
