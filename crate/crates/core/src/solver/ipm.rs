//! Primal-dual interior-point iteration for
//!
//! ```text
//! min f(x)  s.t.  h(x) = 0,  g(x) - s = 0,  s >= 0
//! ```
//!
//! Newton steps on the barrier KKT conditions are computed from the reduced
//! system `[[W + Jgᵀ Σ Jg + δw I, Jhᵀ], [Jh, -δc I]]` with `Σ = Z S⁻¹`, whose
//! inertia is corrected to `(n, m_eq, 0)`. Steps are globalized by a
//! fraction-to-boundary rule and a backtracking filter line search on
//! (constraint violation, barrier objective), with a second-order correction
//! and a Levenberg–Marquardt feasibility restoration.

use log::{debug, trace};

use super::options::SolverOptions;
use super::Status;
use crate::linalg::{dot, norm1, norm_inf, DenseMatrix, Inertia, Ldlt, ScaledLdlt};
use crate::nlp::AssembledProblem;

/// Simple bound `x[var] >= value` (or `<=` when `upper`) appended as an inequality row.
#[derive(Debug, Clone)]
pub(crate) struct Bound {
    pub var: usize,
    pub upper: bool,
    pub value: f64,
}

/// Problem rows plus simple bounds, with dense derivative evaluation.
pub(crate) struct Model<'a> {
    pub problem: &'a AssembledProblem,
    pub bounds: Vec<Bound>,
}

impl<'a> Model<'a> {
    pub fn new(problem: &'a AssembledProblem) -> Self {
        let mut bounds = Vec::new();
        for i in 0..problem.n() {
            if problem.lower[i].is_finite() {
                bounds.push(Bound {
                    var: i,
                    upper: false,
                    value: problem.lower[i],
                });
            }
            if problem.upper[i].is_finite() {
                bounds.push(Bound {
                    var: i,
                    upper: true,
                    value: problem.upper[i],
                });
            }
        }
        Model { problem, bounds }
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn me(&self) -> usize {
        self.problem.n_eq()
    }

    pub fn mi(&self) -> usize {
        self.problem.n_ineq() + self.bounds.len()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }

    pub fn h(&self, x: &[f64]) -> Vec<f64> {
        self.problem.equality_residuals(x)
    }

    /// Inequality rows, each problem row relaxed by [`RELAX`].
    pub fn g(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.problem.inequality_residuals(x);
        for v in &mut g {
            *v += RELAX;
        }
        g.extend(self.bounds.iter().map(|b| {
            if b.upper {
                b.value - x[b.var]
            } else {
                x[b.var] - b.value
            }
        }));
        g
    }

    fn jh(&self, x: &[f64]) -> DenseMatrix {
        self.problem.equality_jacobian(x).to_dense()
    }

    fn jg(&self, x: &[f64]) -> DenseMatrix {
        let base = self.problem.inequality_jacobian(x);
        let mut m = DenseMatrix::zeros(self.mi(), self.n());
        for &(r, c, v) in &base.entries {
            m[(r, c)] += v;
        }
        let offset = self.problem.n_ineq();
        for (k, b) in self.bounds.iter().enumerate() {
            m[(offset + k, b.var)] = if b.upper { -1.0 } else { 1.0 };
        }
        m
    }

    fn hessian(&self, x: &[f64], lam: &[f64], z: &[f64]) -> DenseMatrix {
        let ni = self.problem.n_ineq();
        self.problem
            .lagrangian_hessian(x, self.problem.obj_scale, lam, &z[..ni])
            .to_dense()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub lam: Vec<f64>,
    pub z: Vec<f64>,
}

pub(crate) struct Start {
    pub x: Vec<f64>,
    pub lam: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub mu: f64,
    /// Lower floor for the initial slacks.
    pub slack_floor: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub status: Status,
    pub iterate: Iterate,
    pub iterations: usize,
    pub stationarity: f64,
    pub feasibility: f64,
}

/// Relaxation of problem inequality rows, so that coinciding bounds such as
/// `gamma_min = gamma_max` keep a nonempty interior.
pub(crate) const RELAX: f64 = 1e-9;
const SMAX: f64 = 100.0;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const MAX_SOC: usize = 4;
const MAX_RESTORATIONS: usize = 8;

struct Errors {
    stationarity: f64,
    feasibility: f64,
    compl0: f64,
    e0: f64,
    e_mu: f64,
}

fn errors(
    grad_l: &[f64],
    h: &[f64],
    g: &[f64],
    it: &Iterate,
    mu: f64,
) -> Errors {
    let me = it.lam.len();
    let mi = it.z.len();
    let sd = ((norm1(&it.lam) + norm1(&it.z)) / ((me + mi).max(1) as f64)).max(SMAX) / SMAX;
    let sc = (norm1(&it.z) / (mi.max(1) as f64)).max(SMAX) / SMAX;
    let stationarity = norm_inf(grad_l);
    let gs = g
        .iter()
        .zip(&it.s)
        .fold(0.0_f64, |m, (gi, si)| m.max((gi - si).abs()));
    let feasibility = norm_inf(h).max(gs);
    let compl0 = it
        .s
        .iter()
        .zip(&it.z)
        .fold(0.0_f64, |m, (s, z)| m.max((s * z).abs()));
    let compl_mu = it
        .s
        .iter()
        .zip(&it.z)
        .fold(0.0_f64, |m, (s, z)| m.max((s * z - mu).abs()));
    Errors {
        stationarity,
        feasibility,
        compl0,
        e0: (stationarity / sd).max(feasibility).max(compl0 / sc),
        e_mu: (stationarity / sd).max(feasibility).max(compl_mu / sc),
    }
}

fn fraction_to_boundary(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (&vi, &di) in v.iter().zip(dv) {
        if di < 0.0 {
            alpha = alpha.min(-tau * vi / di);
        }
    }
    alpha
}

/// `‖h‖₁ + ‖g - s‖₁`
fn violation(h: &[f64], g: &[f64], s: &[f64]) -> f64 {
    norm1(h) + g.iter().zip(s).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

struct Kkt {
    factor: ScaledLdlt,
    n: usize,
}

impl Kkt {
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = r1.to_vec();
        rhs.extend_from_slice(r2);
        let sol = self.factor.solve(&rhs);
        (sol[..self.n].to_vec(), sol[self.n..].to_vec())
    }
}

fn build_kkt(w: &DenseMatrix, jh: &DenseMatrix, dw: f64, dc: f64) -> DenseMatrix {
    let n = w.nrows;
    let me = jh.nrows;
    let mut k = DenseMatrix::zeros(n + me, n + me);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = w[(i, j)];
        }
        k[(i, i)] += dw;
    }
    for r in 0..me {
        for c in 0..n {
            let v = jh[(r, c)];
            k[(n + r, c)] = v;
            k[(c, n + r)] = v;
        }
        k[(n + r, n + r)] = -dc;
    }
    k
}

/// Condensed Hessian block `W + Jgᵀ Σ Jg`.
fn condensed(w: &DenseMatrix, jg: &DenseMatrix, sigma: &[f64]) -> DenseMatrix {
    let n = w.nrows;
    let mut out = w.clone();
    for (r, &sr) in sigma.iter().enumerate() {
        let row = jg.row(r);
        let nz: Vec<usize> = (0..n).filter(|&c| row[c] != 0.0).collect();
        for &a in &nz {
            let va = sr * row[a];
            for &b in &nz {
                out[(a, b)] += va * row[b];
            }
        }
    }
    out
}

pub(crate) fn run(model: &Model, start: Start, opts: &SolverOptions) -> Outcome {
    let (n, me, mi) = (model.n(), model.me(), model.mi());
    let mut mu = start.mu;
    let x = start.x;
    let g0 = model.g(&x);
    let s: Vec<f64> = g0.iter().map(|&gi| gi.max(start.slack_floor)).collect();
    let z: Vec<f64> = match start.z {
        Some(z) => z
            .iter()
            .zip(&s)
            .map(|(&zi, &si)| zi.max(mu / si).min(KAPPA_SIGMA * mu / si))
            .collect(),
        None => s.iter().map(|&si| mu / si).collect(),
    };
    let lam = start.lam.unwrap_or_else(|| vec![0.0; me]);
    let mut it = Iterate { x, s, lam, z };

    let mut filter: Vec<(f64, f64)> = Vec::new();
    let (mut theta_max, mut theta_min) = (f64::NAN, f64::NAN);
    let mut dw_last: f64 = 0.0;
    let mut restorations = 0;
    let mut last = (f64::INFINITY, f64::INFINITY);

    for iter in 0..=opts.max_iterations {
        let f = model.f(&it.x);
        let grad = model.problem.objective_gradient(&it.x);
        let h = model.h(&it.x);
        let g = model.g(&it.x);
        if !f.is_finite() || h.iter().chain(&g).any(|v| !v.is_finite()) {
            return finish(Status::NumericalFailure, it, iter, last);
        }
        let jh = model.jh(&it.x);
        let jg = model.jg(&it.x);
        let mut grad_l = grad.clone();
        for (a, b) in grad_l.iter_mut().zip(jh.tr_mul_vec(&it.lam)) {
            *a += b;
        }
        for (a, b) in grad_l.iter_mut().zip(jg.tr_mul_vec(&it.z)) {
            *a -= b;
        }

        let mut err = errors(&grad_l, &h, &g, &it, mu);
        last = (err.stationarity, err.feasibility);
        debug!(
            "iter {iter:4} f {f:+.10e} mu {mu:.2e} stat {:.2e} feas {:.2e} compl {:.2e}",
            err.stationarity, err.feasibility, err.compl0
        );
        if err.e0 <= opts.kkt_tolerance
            && err.stationarity <= opts.kkt_tolerance
            && err.feasibility <= opts.feasibility_tolerance
            && mu <= opts.mu_min * (1.0 + 1e-12)
        {
            return finish(Status::Optimal, it, iter, last);
        }
        while mu > opts.mu_min && err.e_mu <= 10.0 * mu {
            mu = (opts.mu_reduction * mu).min(mu.powf(1.5)).max(opts.mu_min);
            err = errors(&grad_l, &h, &g, &it, mu);
            filter.clear();
        }
        if iter == opts.max_iterations {
            return finish(Status::MaxIterations, it, iter, last);
        }

        let sigma: Vec<f64> = it.z.iter().zip(&it.s).map(|(z, s)| z / s).collect();
        let w = model.hessian(&it.x, &it.lam, &it.z);
        let wc = condensed(&w, &jg, &sigma);

        // inertia correction
        let want = Inertia {
            positive: n,
            negative: me,
            zero: 0,
        };
        let (mut dw, mut dc): (f64, f64) = (0.0, 0.0);
        let kkt = loop {
            let k = build_kkt(&wc, &jh, dw, dc);
            let factor = ScaledLdlt::factor(&k, 1e-14);
            let inertia = factor.inertia();
            if inertia == want {
                break Kkt { factor, n };
            }
            trace!("inertia {inertia:?} with dw {dw:.1e} dc {dc:.1e}");
            if inertia.zero > 0 && me > 0 && dc == 0.0 {
                dc = 1e-8 * mu.powf(0.25);
                continue;
            }
            dw = if dw == 0.0 {
                if dw_last == 0.0 {
                    opts.delta_init
                } else {
                    (dw_last / 3.0).max(1e-20)
                }
            } else if dw_last == 0.0 {
                dw * 100.0
            } else {
                dw * 8.0
            };
            if dw > 1e40 {
                return finish(Status::NumericalFailure, it, iter, last);
            }
        };
        if dw > 0.0 {
            dw_last = dw;
        }

        // search direction
        let gs: Vec<f64> = g.iter().zip(&it.s).map(|(a, b)| a - b).collect();
        let direction = |hres: &[f64], gsres: &[f64]| {
            let corr: Vec<f64> = (0..mi)
                .map(|i| mu / it.s[i] - sigma[i] * gsres[i])
                .collect();
            let jgc = jg.tr_mul_vec(&corr);
            let jhl = jh.tr_mul_vec(&it.lam);
            let r1: Vec<f64> = (0..n).map(|i| -grad[i] - jhl[i] + jgc[i]).collect();
            let r2: Vec<f64> = hres.iter().map(|v| -v).collect();
            let (dx, dl) = kkt.solve(&r1, &r2);
            let jdx = jg.mul_vec(&dx);
            let ds: Vec<f64> = (0..mi).map(|i| jdx[i] + gsres[i]).collect();
            (dx, dl, ds)
        };
        let (dx, dl, ds) = direction(&h, &gs);
        let dz: Vec<f64> = (0..mi)
            .map(|i| mu / it.s[i] - it.z[i] - sigma[i] * ds[i])
            .collect();

        let tau = opts.tau.max(1.0 - mu);
        let alpha_p_max = fraction_to_boundary(&it.s, &ds, tau);
        let alpha_d = fraction_to_boundary(&it.z, &dz, tau);

        // filter line search on (violation, barrier objective)
        let theta = violation(&h, &g, &it.s);
        if theta_max.is_nan() {
            theta_max = 1e4 * theta.max(1.0);
            theta_min = 1e-4 * theta.max(1.0);
        }
        let barrier = |x: &[f64], s: &[f64]| {
            if s.iter().any(|&v| v <= 0.0) {
                return f64::INFINITY;
            }
            let val = model.f(x) - mu * s.iter().map(|v| v.ln()).sum::<f64>();
            if val.is_finite() {
                val
            } else {
                f64::INFINITY
            }
        };
        let phi0 = barrier(&it.x, &it.s);
        let dphi = dot(&grad, &dx) - (0..mi).map(|i| mu * ds[i] / it.s[i]).sum::<f64>();
        let alpha_min = if dphi < 0.0 {
            GAMMA_ALPHA
                * GAMMA_THETA
                    .min(GAMMA_PHI * theta / -dphi)
                    .min(theta.powf(S_THETA) / (-dphi).powf(S_PHI))
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        };
        let switching = |alpha: f64| {
            dphi < 0.0 && alpha * (-dphi).powf(S_PHI) > theta.powf(S_THETA)
        };
        let acceptable = |alpha: f64, theta_t: f64, phi_t: f64, filter: &[(f64, f64)]| {
            if !phi_t.is_finite() || theta_t >= theta_max {
                return None;
            }
            if filter.iter().any(|&(ft, fp)| theta_t >= ft && phi_t >= fp) {
                return None;
            }
            if theta <= theta_min && switching(alpha) {
                (phi_t <= phi0 + ARMIJO * alpha * dphi).then_some(false)
            } else {
                (theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi0 - GAMMA_PHI * theta)
                    .then_some(true)
            }
        };

        let tiny = (0..n).all(|i| dx[i].abs() <= 1e-14 * (1.0 + it.x[i].abs()));
        let mut accepted: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
        let mut augment = false;
        if tiny {
            let xt: Vec<f64> = (0..n).map(|i| it.x[i] + alpha_p_max * dx[i]).collect();
            let st: Vec<f64> = (0..mi).map(|i| it.s[i] + alpha_p_max * ds[i]).collect();
            accepted = Some((alpha_p_max, xt, st, dl.clone()));
        } else {
            let mut alpha = alpha_p_max;
            let mut first = true;
            while alpha >= alpha_min {
                let xt: Vec<f64> = (0..n).map(|i| it.x[i] + alpha * dx[i]).collect();
                let st: Vec<f64> = (0..mi).map(|i| it.s[i] + alpha * ds[i]).collect();
                let ht = model.h(&xt);
                let gt = model.g(&xt);
                let theta_t = violation(&ht, &gt, &st);
                let phi_t = barrier(&xt, &st);
                if let Some(aug) = acceptable(alpha, theta_t, phi_t, &filter) {
                    accepted = Some((alpha, xt, st, dl.clone()));
                    augment = aug;
                    break;
                }
                if first && theta_t >= theta {
                    // second-order corrections on the full trial step
                    let (mut hs, mut gss) = (
                        (0..me).map(|i| alpha * h[i] + ht[i]).collect::<Vec<_>>(),
                        (0..mi).map(|i| alpha * gs[i] + gt[i] - st[i]).collect::<Vec<_>>(),
                    );
                    let mut theta_prev = theta_t;
                    for _ in 0..MAX_SOC {
                        let (cx, cl, cs) = direction(&hs, &gss);
                        let a_soc = fraction_to_boundary(&it.s, &cs, tau);
                        let xc: Vec<f64> = (0..n).map(|i| it.x[i] + a_soc * cx[i]).collect();
                        let sc: Vec<f64> = (0..mi).map(|i| it.s[i] + a_soc * cs[i]).collect();
                        let hc = model.h(&xc);
                        let gc = model.g(&xc);
                        let theta_c = violation(&hc, &gc, &sc);
                        let phi_c = barrier(&xc, &sc);
                        if let Some(aug) = acceptable(alpha, theta_c, phi_c, &filter) {
                            trace!("second-order correction accepted");
                            accepted = Some((a_soc, xc, sc, cl));
                            augment = aug;
                            break;
                        }
                        if theta_c > 0.99 * theta_prev {
                            break;
                        }
                        theta_prev = theta_c;
                        for i in 0..me {
                            hs[i] = a_soc * hs[i] + hc[i];
                        }
                        for i in 0..mi {
                            gss[i] = a_soc * gss[i] + gc[i] - sc[i];
                        }
                    }
                    if accepted.is_some() {
                        break;
                    }
                }
                first = false;
                alpha *= 0.5;
            }
        }
        if accepted.is_some() && augment {
            filter.push(((1.0 - GAMMA_THETA) * theta, phi0 - GAMMA_PHI * theta));
        }

        match accepted {
            Some((alpha, xt, st, dlam)) => {
                trace!("step alpha_p {alpha:.3e} alpha_d {alpha_d:.3e}");
                it.x = xt;
                it.s = st;
                for (l, d) in it.lam.iter_mut().zip(&dlam) {
                    *l += alpha * d;
                }
                for i in 0..mi {
                    let zi = it.z[i] + alpha_d * dz[i];
                    let lo = mu / (KAPPA_SIGMA * it.s[i]);
                    let hi = KAPPA_SIGMA * mu / it.s[i];
                    it.z[i] = zi.clamp(lo, hi);
                }
            }
            None => {
                restorations += 1;
                debug!("line search failed, restoration {restorations}");
                if restorations > MAX_RESTORATIONS {
                    let status = if theta > opts.feasibility_tolerance.max(1e-8) {
                        Status::Infeasible
                    } else {
                        Status::NumericalFailure
                    };
                    return finish(status, it, iter, last);
                }
                match restore(model, &it, opts) {
                    Some((x, s)) => {
                        it.x = x;
                        it.s = s;
                        it.z = it.s.iter().map(|&si| mu / si).collect();
                        it.lam = vec![0.0; me];
                        filter.clear();
                    }
                    None => return finish(Status::Infeasible, it, iter, last),
                }
            }
        }
    }
    unreachable!("loop returns at max_iterations")
}

fn finish(status: Status, iterate: Iterate, iterations: usize, last: (f64, f64)) -> Outcome {
    Outcome {
        status,
        iterate,
        iterations,
        stationarity: last.0,
        feasibility: last.1,
    }
}

/// Levenberg–Marquardt reduction of `‖(h(x), g(x) - s)‖²` over `(x, s)`, `s > 0`.
/// Returns `None` when the violation cannot be reduced, signalling local infeasibility.
fn restore(model: &Model, it: &Iterate, opts: &SolverOptions) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, me, mi) = (model.n(), model.me(), model.mi());
    let nv = n + mi;
    let mut x = it.x.clone();
    let mut s = it.s.clone();
    let residual = |x: &[f64], s: &[f64]| {
        let mut c = model.h(x);
        c.extend(model.g(x).iter().zip(s).map(|(g, s)| g - s));
        c
    };
    let mut c = residual(&x, &s);
    let start = dot(&c, &c);
    let mut cost = start;
    let mut lm = 1e-6;
    for _ in 0..200 {
        if cost <= (0.01 * start).max(opts.feasibility_tolerance.powi(2)) {
            return Some((x, s));
        }
        let jh = model.jh(&x);
        let jg = model.jg(&x);
        // J = [[Jh, 0], [Jg, -I]]
        let mut jac = DenseMatrix::zeros(me + mi, nv);
        for r in 0..me {
            for col in 0..n {
                jac[(r, col)] = jh[(r, col)];
            }
        }
        for r in 0..mi {
            for col in 0..n {
                jac[(me + r, col)] = jg[(r, col)];
            }
            jac[(me + r, n + r)] = -1.0;
        }
        let jtc = jac.tr_mul_vec(&c);
        let mut normal = DenseMatrix::zeros(nv, nv);
        for r in 0..me + mi {
            let row = jac.row(r);
            let nz: Vec<usize> = (0..nv).filter(|&k| row[k] != 0.0).collect();
            for &a in &nz {
                for &b in &nz {
                    normal[(a, b)] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while lm < 1e12 {
            let mut m = normal.clone();
            for k in 0..nv {
                m[(k, k)] += lm;
            }
            let d = Ldlt::factor(&m, 1e-18).solve(&jtc.iter().map(|v| -v).collect::<Vec<_>>());
            let alpha = fraction_to_boundary(&s, &d[n..], 0.99);
            let xt: Vec<f64> = (0..n).map(|k| x[k] + alpha * d[k]).collect();
            let st: Vec<f64> = (0..mi).map(|k| s[k] + alpha * d[n + k]).collect();
            let ct = residual(&xt, &st);
            let cost_t = dot(&ct, &ct);
            if cost_t.is_finite() && cost_t < cost * (1.0 - 1e-4 * alpha) {
                x = xt;
                s = st;
                c = ct;
                cost = cost_t;
                lm = (lm / 10.0).max(1e-12);
                improved = true;
                break;
            }
            lm *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if cost <= 0.81 * start {
        Some((x, s))
    } else {
        None
    }
}
