//! Restarted GMRES with modified Gram-Schmidt, instrumented to count the
//! absolute errors a single bit flip could cause in each orthogonalization
//! dot product. Instrumentation only reads the vectors; it never changes the
//! iteration.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dot_fault::{dot_unchecked, extract_interval, ClassifiedTable, ErrorClassTally, ErrorLookupTable, ExponentInterval};
use crate::error::{Error, Result};
use crate::sparse::{self, CsrMatrix, EquilibrationScaling, Norms};

pub const BREAKDOWN_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    /// `b = A * ones`, so the exact solution is all ones.
    OnesSolution,
    /// Entries uniform in `[-1, 1)` from a ChaCha8 stream.
    Random(u64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_total_iterations: usize,
    pub rtol: f64,
    pub rhs: RhsMode,
    /// Also tally the self dot product behind `||w||` on each iteration.
    pub instrument_norm: bool,
    pub log_intervals: bool,
    /// Record `max |Q^T Q - I|` for each restart cycle.
    pub check_orthogonality: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            restart: 25,
            max_total_iterations: 1000,
            rtol: 1e-8,
            rhs: RhsMode::OnesSolution,
            instrument_norm: true,
            log_intervals: false,
            check_orthogonality: false,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidConfig("restart must be at least 1".into()));
        }
        if self.max_total_iterations == 0 {
            return Err(Error::InvalidConfig("max_total_iterations must be at least 1".into()));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::InvalidConfig(format!("rtol must be in (0, 1), got {}", self.rtol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    HappyBreakdown,
    IterationLimit,
}

/// Which instrumented dot product an interval log entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DotSite {
    /// `h_ij = q_i . w`
    Projection { i: usize },
    /// `w . w` behind `h_{j+1,j}`
    Norm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalLogEntry {
    pub iteration: usize,
    pub site: DotSite,
    pub q_interval: ExponentInterval,
    pub v_interval: ExponentInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresReport {
    pub initial_residual: f64,
    /// Least-squares residual norm after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub restarts: usize,
    pub instrumented_dots: u64,
    pub tally: Option<ErrorClassTally>,
    pub threshold: Option<f64>,
    pub interval_log: Option<Vec<IntervalLogEntry>>,
    pub orthogonality_loss: Vec<f64>,
    /// Largest `| ||q_i|| - 1 |` over basis vectors handed to the instrumentation.
    pub max_basis_norm_deviation: f64,
    pub x: Vec<f64>,
}

/// Build the right-hand side selected by `mode`.
pub fn build_rhs(a: &CsrMatrix, mode: &RhsMode) -> Result<Vec<f64>> {
    match mode {
        RhsMode::OnesSolution => a.spmv(&vec![1.0; a.n_cols()]),
        RhsMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..a.n_rows()).map(|_| rng.random_range(-1.0..1.0)).collect())
        }
        RhsMode::File(path) => {
            let b = crate::io::read_vector(path)?;
            if b.len() != a.n_rows() {
                return Err(Error::LengthMismatch { left: a.n_rows(), right: b.len() });
            }
            Ok(b)
        }
    }
}

/// Dot product `q . v` plus the tally of every error a single flip could
/// cause in it. `q` is a unit basis vector, so its exponent interval is
/// fixed to `(0, 1]`. The returned value is the plain unperturbed dot.
pub fn instrument_dot(q: &[f64], v: &[f64], table: &ClassifiedTable) -> Result<(f64, ErrorClassTally, ExponentInterval)> {
    let iv = extract_interval(v)?;
    let tally = table.classify(&ExponentInterval::unit_vector(), &iv);
    Ok((crate::dot_fault::dot_product(q, v)?, tally, iv))
}

/// Incremental least-squares solve of `min || H y - beta e1 ||` for an
/// upper-Hessenberg `H`, one column at a time, by Givens rotations.
#[derive(Clone, Debug)]
pub struct GivensLsq {
    r: Vec<Vec<f64>>,
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
}

impl GivensLsq {
    pub fn new(beta: f64) -> Self {
        GivensLsq { r: Vec::new(), cs: Vec::new(), sn: Vec::new(), g: vec![beta] }
    }

    pub fn columns(&self) -> usize {
        self.r.len()
    }

    /// Append column `k` (entries `h_0k ..= h_{k+1,k}`); returns the updated
    /// residual norm.
    pub fn push_column(&mut self, h: &[f64]) -> f64 {
        let k = self.r.len();
        assert_eq!(h.len(), k + 2, "Hessenberg column {k} needs {} entries", k + 2);
        let mut col = h.to_vec();
        for i in 0..k {
            let (c, s) = (self.cs[i], self.sn[i]);
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s * a + c * b;
        }
        let (a, b) = (col[k], col[k + 1]);
        let rho = a.hypot(b);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
        col[k] = rho;
        col.truncate(k + 1);
        self.cs.push(c);
        self.sn.push(s);
        let gk = self.g[k];
        self.g[k] = c * gk;
        self.g.push(-s * gk);
        self.r.push(col);
        self.g[k + 1].abs()
    }

    pub fn residual(&self) -> f64 {
        self.g.last().unwrap().abs()
    }

    /// Back substitution using the first `k` columns.
    pub fn solve(&self, k: usize) -> Vec<f64> {
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.g[i];
            for j in i + 1..k {
                s -= self.r[j][i] * y[j];
            }
            y[i] = s / self.r[i][i];
        }
        y
    }
}

/// Solve `min || H y - beta e1 ||` for a dense `(j+1) x j` upper-Hessenberg
/// `H` given by rows. Returns `(y, residual_norm)`.
pub fn hessenberg_lsq(h: &[Vec<f64>], beta: f64) -> Result<(Vec<f64>, f64)> {
    let j = h.first().map_or(0, Vec::len);
    if j == 0 || h.len() != j + 1 || h.iter().any(|row| row.len() != j) {
        return Err(Error::InvalidConfig("H must be (j+1) x j with j >= 1".into()));
    }
    let mut lsq = GivensLsq::new(beta);
    for k in 0..j {
        let col: Vec<f64> = (0..k + 2).map(|i| h[i][k]).collect();
        lsq.push_column(&col);
    }
    Ok((lsq.solve(j), lsq.residual()))
}

fn norm2(v: &[f64]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

fn finite_or(v: f64, what: &str, iteration: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} is {v} at iteration {iteration}")))
    }
}

fn orthogonality_loss(q: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q.len() {
        for j in i..q.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot_unchecked(&q[i], &q[j]) - target).abs());
        }
    }
    worst
}

struct Instrument<'a> {
    table: &'a ClassifiedTable,
    tally: ErrorClassTally,
    dots: u64,
    log: Option<Vec<IntervalLogEntry>>,
}

impl Instrument<'_> {
    fn record(&mut self, iteration: usize, site: DotSite, q: Option<&[f64]>, v: &[f64]) -> Result<()> {
        let iv = extract_interval(v)?;
        let qv = match q {
            Some(_) => ExponentInterval::unit_vector(),
            None => iv,
        };
        self.tally += &self.table.classify(&qv, &iv);
        self.dots += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(IntervalLogEntry { iteration, site, q_interval: qv, v_interval: iv });
        }
        Ok(())
    }
}

/// Restarted GMRES from `x0 = 0`. When `table` is given, every MGS
/// projection `q_i . w` (and, if configured, the norm `w . w`) is tallied
/// against it; the threshold is the one the table was resolved with.
pub fn gmres_solve(a: &CsrMatrix, b: &[f64], cfg: &GmresConfig, table: Option<&ClassifiedTable>) -> Result<GmresReport> {
    cfg.validate()?;
    if !a.is_square() {
        return Err(Error::InvalidMatrix(format!("GMRES needs a square matrix, got {}x{}", a.n_rows(), a.n_cols())));
    }
    if b.len() != a.n_rows() {
        return Err(Error::LengthMismatch { left: a.n_rows(), right: b.len() });
    }
    if let Some(&v) = b.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(v));
    }
    let fro = norm2(a.values());
    if fro == 0.0 {
        return Err(Error::InvalidMatrix("matrix is zero".into()));
    }
    let n = a.n_rows();
    let breakdown_tol = BREAKDOWN_RTOL * fro;
    let bnorm = norm2(b);
    let target = cfg.rtol * bnorm;

    let mut inst = table.map(|t| Instrument {
        table: t,
        tally: ErrorClassTally::new(t.threshold()),
        dots: 0,
        log: cfg.log_intervals.then(Vec::new),
    });

    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut orth = Vec::new();
    let mut max_dev = 0.0f64;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut initial_residual = None;
    let mut w = vec![0.0; n];

    let stop_reason = 'outer: loop {
        let ax = a.spmv(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = finite_or(norm2(&r), "residual norm", iterations)?;
        initial_residual.get_or_insert(beta);
        if beta <= target {
            break StopReason::Converged;
        }
        if iterations == cfg.max_total_iterations {
            break StopReason::IterationLimit;
        }
        if restarts > 0 || iterations > 0 {
            restarts += 1;
        }

        let mut q: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut lsq = GivensLsq::new(beta);
        let mut cycle_stop = None;

        for j in 0..cfg.restart {
            if iterations == cfg.max_total_iterations {
                break;
            }
            a.spmv_into(&q[j], &mut w);
            let mut h = vec![0.0; j + 2];
            for i in 0..=j {
                if let Some(inst) = inst.as_mut() {
                    max_dev = max_dev.max((norm2(&q[i]) - 1.0).abs());
                    inst.record(iterations, DotSite::Projection { i }, Some(&q[i]), &w)?;
                }
                let hij = finite_or(dot_unchecked(&q[i], &w), "h_ij", iterations)?;
                h[i] = hij;
                for (wk, qk) in w.iter_mut().zip(&q[i]) {
                    *wk -= hij * qk;
                }
            }
            if let Some(inst) = inst.as_mut().filter(|_| cfg.instrument_norm) {
                inst.record(iterations, DotSite::Norm, None, &w)?;
            }
            let hnext = finite_or(norm2(&w), "h_{j+1,j}", iterations)?;
            h[j + 1] = hnext;
            iterations += 1;
            let res = lsq.push_column(&h);
            history.push(res);

            if hnext <= breakdown_tol {
                cycle_stop = Some(StopReason::HappyBreakdown);
                break;
            }
            if res <= target {
                cycle_stop = Some(StopReason::Converged);
                break;
            }
            q.push(w.iter().map(|v| v / hnext).collect());
        }

        let k = lsq.columns();
        if cfg.check_orthogonality {
            orth.push(orthogonality_loss(&q[..k.min(q.len())]));
        }
        // A zero pivot means the last column added nothing; drop it.
        let k_used = if k > 0 && lsq.r[k - 1][k - 1] == 0.0 { k - 1 } else { k };
        let y = lsq.solve(k_used);
        for (yi, qi) in y.iter().zip(&q) {
            for (xk, qk) in x.iter_mut().zip(qi) {
                *xk += yi * qk;
            }
        }
        if let Some(&v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("solution update produced {v}")));
        }
        match cycle_stop {
            Some(reason) => break 'outer reason,
            None if iterations == cfg.max_total_iterations => break 'outer StopReason::IterationLimit,
            None => {}
        }
    };

    let (tally, threshold, dots, log) = match inst {
        Some(i) => (Some(i.tally), Some(i.table.threshold()), i.dots, i.log),
        None => (None, None, 0, None),
    };
    Ok(GmresReport {
        initial_residual: initial_residual.unwrap_or(bnorm),
        residual_history: history,
        converged: stop_reason != StopReason::IterationLimit,
        stop_reason,
        iterations,
        restarts,
        instrumented_dots: dots,
        tally,
        threshold,
        interval_log: log,
        orthogonality_loss: orth,
        max_basis_norm_deviation: max_dev,
        x,
    })
}

/// Outcome of [`analyze`]: the solve of `A x = b` (optionally equilibrated)
/// with its instrumentation tally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub equilibrated: bool,
    /// Norms of the matrix actually handed to GMRES.
    pub norms: Norms,
    pub threshold: f64,
    pub report: GmresReport,
    pub scaling: Option<EquilibrationScaling>,
    /// Solution of the original system (unscaled when equilibrated).
    pub solution: Vec<f64>,
}

/// Build `b` from `A`, optionally equilibrate (`b <- R b`, `x <- C x`),
/// classify the table against `||A||_2` of the solved matrix (at least 1) and
/// run the instrumented solve.
pub fn analyze(a: &CsrMatrix, cfg: &GmresConfig, equilibrate: bool, table: &ErrorLookupTable) -> Result<Analysis> {
    let b = build_rhs(a, &cfg.rhs)?;
    let (matrix, rhs, scaling) = if equilibrate {
        let (m, sc) = sparse::equilibrate(a)?;
        let rhs = sparse::apply_scaling_to_rhs(&b, &sc)?;
        (m, rhs, Some(sc))
    } else {
        (a.clone(), b, None)
    };
    let norms = sparse::norms(&matrix)?;
    let threshold = norms.two_norm_estimate.max(1.0);
    let classified = ClassifiedTable::new(table, threshold)?;
    let report = gmres_solve(&matrix, &rhs, cfg, Some(&classified))?;
    let solution = match &scaling {
        Some(sc) => sparse::unscale_solution(&report.x, sc)?,
        None => report.x.clone(),
    };
    Ok(Analysis { equilibrated: equilibrate, norms, threshold, report, scaling, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::gen_poisson;

    fn dense_lsq(h: &[Vec<f64>], beta: f64) -> Vec<f64> {
        // normal equations H^T H y = H^T (beta e1)
        let j = h[0].len();
        let mut m = vec![vec![0.0; j + 1]; j];
        for r in 0..j {
            for c in 0..j {
                m[r][c] = (0..=j).map(|k| h[k][r] * h[k][c]).sum();
            }
            m[r][j] = h[0][r] * beta;
        }
        for p in 0..j {
            let piv = (p..j).max_by(|&a, &b| m[a][p].abs().total_cmp(&m[b][p].abs())).unwrap();
            m.swap(p, piv);
            for r in 0..j {
                if r != p {
                    let f = m[r][p] / m[p][p];
                    for c in p..=j {
                        m[r][c] -= f * m[p][c];
                    }
                }
            }
        }
        (0..j).map(|r| m[r][j] / m[r][r]).collect()
    }

    #[test]
    fn lsq_trivial() {
        let (y, res) = hessenberg_lsq(&[vec![2.0], vec![0.0]], 4.0).unwrap();
        assert_eq!(y, vec![2.0]);
        assert_eq!(res, 0.0);
    }

    #[test]
    fn lsq_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = 5;
        let h: Vec<Vec<f64>> = (0..=j)
            .map(|r| (0..j).map(|c| if r <= c + 1 { rng.random_range(-1.0..1.0) } else { 0.0 }).collect())
            .collect();
        let (y, res) = hessenberg_lsq(&h, 1.5).unwrap();
        let yd = dense_lsq(&h, 1.5);
        for (a, b) in y.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let resid: f64 = (0..=j)
            .map(|r| {
                let hy: f64 = (0..j).map(|c| h[r][c] * y[c]).sum();
                let e = if r == 0 { 1.5 } else { 0.0 };
                (hy - e).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!((res - resid).abs() < 1e-12);
        assert!(hessenberg_lsq(&[vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn identity_one_iteration() {
        let a = CsrMatrix::identity(7).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5, 0.0, 4.0, -1.0];
        let rep = gmres_solve(&a, &b, &GmresConfig::default(), None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.stop_reason, StopReason::HappyBreakdown);
        assert_eq!(rep.residual_history, vec![0.0]);
        for (x, b) in rep.x.iter().zip(&b) {
            assert!((x - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invariant_subspace_breakdown() {
        // b is an eigenvector of a diagonal matrix
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 5.0)]).unwrap();
        let rep = gmres_solve(&a, &[0.0, 6.0, 0.0], &GmresConfig::default(), None).unwrap();
        assert_eq!(rep.stop_reason, StopReason::HappyBreakdown);
        assert_eq!(rep.x, vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_rhs_needs_no_iterations() {
        let a = gen_poisson(3).unwrap();
        let rep = gmres_solve(&a, &[0.0; 9], &GmresConfig::default(), None).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn poisson_small_converges_and_is_monotone() {
        let a = gen_poisson(10).unwrap();
        let b = build_rhs(&a, &RhsMode::OnesSolution).unwrap();
        let cfg = GmresConfig { restart: 10, check_orthogonality: true, ..Default::default() };
        let rep = gmres_solve(&a, &b, &cfg, None).unwrap();
        assert!(rep.converged);
        assert!(rep.x.iter().all(|v| (v - 1.0).abs() < 1e-6));
        for cycle in rep.residual_history.chunks(cfg.restart) {
            assert!(cycle.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
        assert!(rep.orthogonality_loss.iter().all(|&l| l <= 1e-8), "{:?}", rep.orthogonality_loss);
        // rotated residual equals the true residual at the end
        let ax = a.spmv(&rep.x).unwrap();
        let true_res = norm2(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>());
        let last = *rep.residual_history.last().unwrap();
        assert!((true_res - last).abs() <= 1e-8 * norm2(&b), "{true_res} vs {last}");
    }

    #[test]
    fn iteration_cap() {
        let a = gen_poisson(10).unwrap();
        let b = build_rhs(&a, &RhsMode::Random(1)).unwrap();
        let cfg = GmresConfig { restart: 5, max_total_iterations: 12, ..Default::default() };
        let rep = gmres_solve(&a, &b, &cfg, None).unwrap();
        assert_eq!(rep.iterations, 12);
        assert_eq!(rep.residual_history.len(), 12);
        assert_eq!(rep.stop_reason, StopReason::IterationLimit);
        assert!(!rep.converged);
        assert_eq!(rep.restarts, 2);
    }

    #[test]
    fn config_and_input_errors() {
        let a = gen_poisson(2).unwrap();
        let bad = [
            GmresConfig { restart: 0, ..Default::default() },
            GmresConfig { max_total_iterations: 0, ..Default::default() },
            GmresConfig { rtol: 1.0, ..Default::default() },
            GmresConfig { rtol: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(gmres_solve(&a, &[1.0; 4], &cfg, None).is_err());
        }
        assert!(gmres_solve(&a, &[1.0; 3], &GmresConfig::default(), None).is_err());
        assert!(gmres_solve(&a, &[f64::NAN, 1.0, 1.0, 1.0], &GmresConfig::default(), None).is_err());
        let rect = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(gmres_solve(&rect, &[1.0; 2], &GmresConfig::default(), None).is_err());
    }
}
