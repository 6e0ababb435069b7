//! Continuous-time Markov chains on a finite state list.
//!
//! Generators are column-oriented: `Q[(k, j)]` is the rate of `j → k` and
//! every column sums to zero, so a distribution evolves by `dp/dt = Q p`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Largest condition number accepted for an eigenvector basis.
pub const MAX_EIGEN_CONDITION: f64 = 1e8;
/// Negative entries above this are rounding noise and clip to zero.
pub const CLIP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    labels: Vec<String>,
    q: DMatrix<f64>,
}

impl RateMatrix {
    /// Generator over `labels` from directed edges `(from, to, rate)`.
    /// Repeated edges add up.
    pub fn new(labels: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = labels.len();
        let mut q = DMatrix::zeros(n, n);
        for &(from, to, rate) in edges {
            if from >= n || to >= n {
                return Err(Error::invalid(
                    "chain",
                    format!("edge {from}->{to} references a state outside 0..{n}"),
                ));
            }
            if from == to {
                return Err(Error::invalid("chain", format!("self-loop on state {}", labels[from])));
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::invalid(
                    "chain",
                    format!("rate {} -> {} must be non-negative, got {rate}", labels[from], labels[to]),
                ));
            }
            q[(to, from)] += rate;
            q[(from, from)] -= rate;
        }
        Ok(RateMatrix { labels, q })
    }

    /// Generator from labelled edges.
    pub fn from_named(labels: Vec<String>, edges: &[(String, String, f64)]) -> Result<Self> {
        let index = |s: &str| {
            labels
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| Error::invalid("chain", format!("unknown state {s:?}")))
        };
        let numeric = edges
            .iter()
            .map(|(f, t, r)| Ok((index(f)?, index(t)?, *r)))
            .collect::<Result<Vec<_>>>()?;
        RateMatrix::new(labels, &numeric)
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

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Rate of `from → to` (off-diagonal).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[(to, from)]
    }

    /// Directed edges with positive rate, column-major.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        for j in 0..n {
            for k in 0..n {
                if j != k && self.q[(k, j)] > 0.0 {
                    out.push((j, k, self.q[(k, j)]));
                }
            }
        }
        out
    }

    pub fn to_doc(&self) -> ChainDoc {
        ChainDoc {
            states: self.labels.clone(),
            edges: self
                .edges()
                .into_iter()
                .map(|(f, t, rate)| EdgeDoc {
                    from: self.labels[f].clone(),
                    to: self.labels[t].clone(),
                    rate,
                })
                .collect(),
            marks: None,
        }
    }

    pub fn from_doc(doc: &ChainDoc) -> Result<Self> {
        let edges: Vec<(String, String, f64)> = doc
            .edges
            .iter()
            .map(|e| (e.from.clone(), e.to.clone(), e.rate))
            .collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = doc.states.iter().find(|s| !seen.insert(*s)) {
            return Err(Error::invalid("chain", format!("duplicate state {dup:?}")));
        }
        RateMatrix::from_named(doc.states.clone(), &edges)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub rate: f64,
}

/// Chain definition file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDoc {
    pub states: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<Vec<String>>,
}

fn check_distribution(p0: &[f64], n: usize) -> Result<()> {
    if p0.len() != n {
        return Err(Error::pre(format!("initial distribution has {} entries, chain has {n}", p0.len())));
    }
    if p0.iter().any(|p| !p.is_finite() || *p < -CLIP_TOL) {
        return Err(Error::pre("initial distribution has a negative entry"));
    }
    let s: f64 = p0.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::pre(format!("initial distribution sums to {s}")));
    }
    Ok(())
}

/// Clips rounding noise and renormalizes; `None` when an entry is more
/// negative than [`CLIP_TOL`].
fn clean(mut p: Vec<f64>) -> Option<Vec<f64>> {
    if p.iter().any(|v| !v.is_finite() || *v < -CLIP_TOL) {
        return None;
    }
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    Some(p.into_iter().map(|v| v / s).collect())
}

/// Eigenvalues of `Q`, sorted by descending real part.
pub fn eigenvalues(q: &DMatrix<f64>) -> Vec<C64> {
    let mut ev: Vec<C64> = q.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Eigen-decomposition `Q = V Λ V⁻¹`, or `None` when `Q` is defective or
/// the basis is ill-conditioned.
pub struct EigenBasis {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
}

pub fn eigen_basis(q: &DMatrix<f64>) -> Option<EigenBasis> {
    let n = q.nrows();
    if n == 0 {
        return None;
    }
    let scale = q.abs().max().max(1.0);
    let tol = 1e-6 * scale;
    let ev = eigenvalues(q);
    // group eigenvalues that agree to within rounding
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for v in ev {
        match clusters.iter_mut().find(|c| (c[0] - v).norm() <= tol) {
            Some(c) => c.push(v),
            None => clusters.push(vec![v]),
        }
    }
    let qc: DMatrix<C64> = q.map(|x| C64::new(x, 0.0));
    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);
    for c in &clusters {
        let mu = c.iter().sum::<C64>() / c.len() as f64;
        let shifted = &qc - DMatrix::<C64>::identity(n, n) * mu;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
        for &i in order.iter().take(c.len()) {
            columns.push(v_t.row(i).adjoint().into_owned());
            values.push(mu);
        }
    }
    if columns.len() != n {
        return None;
    }
    let vectors = DMatrix::from_columns(&columns);
    let sv = vectors.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > MAX_EIGEN_CONDITION {
        return None;
    }
    let lambda = DMatrix::from_diagonal(&DVector::from_vec(values.clone()));
    let residual = (&qc * &vectors - &vectors * lambda).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > 1e-8 * scale {
        return None;
    }
    Some(EigenBasis { values, vectors })
}

fn solve_by_eigen(q: &DMatrix<f64>, p0: &[f64], t: f64) -> Option<Vec<f64>> {
    let basis = eigen_basis(q)?;
    let p0c = DVector::from_iterator(p0.len(), p0.iter().map(|x| C64::new(*x, 0.0)));
    let coeffs = basis.vectors.clone().lu().solve(&p0c)?;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(&basis.values).map(|(c, l)| c * (l * t).exp()),
    );
    let p = &basis.vectors * scaled;
    Some(p.iter().map(|z| z.re).collect())
}

fn solve_by_expm(q: &DMatrix<f64>, p0: &[f64], t: f64) -> Vec<f64> {
    let e = (q * t).exp();
    (e * DVector::from_column_slice(p0)).iter().copied().collect()
}

/// `exp(Q t) p0`, by eigen-decomposition when the basis is well
/// conditioned and by scaling-and-squaring otherwise.
pub fn solve_ctmc(chain: &RateMatrix, p0: &[f64], t: f64) -> Result<Vec<f64>> {
    check_distribution(p0, chain.len())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::pre(format!("time must be a non-negative number, got {t}")));
    }
    if t == 0.0 {
        return Ok(p0.to_vec());
    }
    let q = chain.q();
    if let Some(p) = solve_by_eigen(q, p0, t).and_then(clean) {
        return Ok(p);
    }
    clean(solve_by_expm(q, p0, t))
        .ok_or_else(|| Error::Numerical(format!("solution at t={t} has negative mass")))
}

/// [`solve_ctmc`] at every time of `times`.
pub fn trajectory(chain: &RateMatrix, p0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times.iter().map(|t| solve_ctmc(chain, p0, *t)).collect()
}

/// Communicating classes with no outgoing edge.
pub fn closed_classes(chain: &RateMatrix) -> Vec<Vec<usize>> {
    let n = chain.len();
    let mut reach = vec![vec![false; n]; n];
    for (s, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![s];
        row[s] = true;
        while let Some(j) = stack.pop() {
            for k in 0..n {
                if k != j && chain.rate(j, k) > 0.0 && !row[k] {
                    row[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&k| reach[s][k] && reach[k][s]).collect();
        for &k in &class {
            seen[k] = true;
        }
        // closed iff everything reachable from s is in the class
        if (0..n).all(|k| !reach[s][k] || reach[k][s]) {
            out.push(class);
        }
    }
    out
}

/// The stationary distribution, supported on the single closed class.
pub fn stationary(chain: &RateMatrix) -> Result<Vec<f64>> {
    let n = chain.len();
    if n == 0 {
        return Err(Error::pre("chain has no states"));
    }
    let classes = closed_classes(chain);
    if classes.len() != 1 {
        return Err(Error::pre(format!(
            "chain has {} closed classes; the stationary measure is not unique",
            classes.len()
        )));
    }
    let class = &classes[0];
    let m = class.len();
    let mut a = DMatrix::zeros(m, m);
    for (r, &k) in class.iter().enumerate() {
        for (c, &j) in class.iter().enumerate() {
            a[(r, c)] = chain.q()[(k, j)];
        }
    }
    // one balance equation is redundant; replace it with Σπ = 1
    let mut b = DVector::zeros(m);
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    b[m - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular balance system".into()))?;
    let mut pi = vec![0.0; n];
    for (r, &k) in class.iter().enumerate() {
        pi[k] = x[r];
    }
    let pi = clean(pi).ok_or_else(|| Error::Numerical("stationary vector has negative mass".into()))?;
    let residual = (chain.q() * DVector::from_column_slice(&pi)).abs().max();
    if residual > 1e-9 * chain.q().abs().max().max(1.0) {
        return Err(Error::Numerical(format!("stationary residual {residual:e}")));
    }
    Ok(pi)
}

/// Coefficients of `det(λI − Q)` from the leading term down, by
/// Faddeev–LeVerrier.
pub fn characteristic_polynomial(q: &DMatrix<f64>) -> Vec<f64> {
    let n = q.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = q * &m + &id * coeffs[k - 1];
        coeffs[k] = -(q * &m).trace() / k as f64;
    }
    coeffs
}
