//! No-U-Turn transitions with multinomial trajectory sampling, a diagonal
//! Euclidean metric, and the usual warmup machinery: dual-averaging step size
//! plus windowed variance estimation for the metric.

use rand::Rng;

use crate::rng::{self, StreamRng};

/// An unnormalised log density with gradient on an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Returns `log p(x)` and writes its gradient into `grad`.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for crate::model::Model {
    fn dim(&self) -> usize {
        crate::model::Model::dim(self)
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        crate::model::Model::log_density_grad(self, x, grad)
    }
}

/// Phase-space point.
#[derive(Debug, Clone)]
pub struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub lp: f64,
}

pub struct Hamiltonian<'a, D: ?Sized> {
    target: &'a D,
    inv_metric: Vec<f64>,
}

impl<'a, D: LogDensity + ?Sized> Hamiltonian<'a, D> {
    pub fn new(target: &'a D, inv_metric: Vec<f64>) -> Self {
        Self { target, inv_metric }
    }

    pub fn inv_metric(&self) -> &[f64] {
        &self.inv_metric
    }

    pub fn set_inv_metric(&mut self, inv_metric: Vec<f64>) {
        self.inv_metric = inv_metric;
    }

    /// A point at `q` with zero momentum.
    pub fn point(&self, q: Vec<f64>) -> Point {
        let mut grad = vec![0.0; q.len()];
        let lp = self.target.log_density_grad(&q, &mut grad);
        Point {
            p: vec![0.0; q.len()],
            q,
            grad,
            lp,
        }
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_metric)
            .map(|(p, m)| p * p * m)
            .sum::<f64>()
    }

    /// Total energy; NaN maps to `+inf`.
    pub fn energy(&self, z: &Point) -> f64 {
        let h = -z.lp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    pub fn sample_momentum(&self, z: &mut Point, rng: &mut StreamRng) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            *p = rng::standard_normal(rng) / m.sqrt();
        }
    }

    /// One leapfrog step of signed size `eps`.
    pub fn leapfrog(&self, z: &mut Point, eps: f64) {
        let half = 0.5 * eps;
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub n_leapfrog: usize,
    pub depth: usize,
    pub divergent: bool,
    pub energy: f64,
}

const MAX_DELTA_H: f64 = 1000.0;

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct Trajectory<'h, 'a, D: ?Sized> {
    ham: &'h Hamiltonian<'a, D>,
    rng: &'h mut StreamRng,
    z: Point,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<D: LogDensity + ?Sized> Trajectory<'_, '_, D> {
    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        eps: f64,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.ham.leapfrog(&mut self.z, eps);
            self.n_leapfrog += 1;
            let h = self.ham.energy(&self.z);
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 {
                1.0
            } else {
                (self.h0 - h).exp()
            };
            z_propose.clone_from(&self.z);
            *p_sharp_beg = self.ham.p_sharp(&self.z.p);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&self.z.p) {
                *r += p;
            }
            p_beg.clone_from(&self.z.p);
            p_end.clone_from(p_beg);
            return !self.divergent;
        }

        let d = rho.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; d];
        let mut p_sharp_init_end = vec![0.0; d];
        let mut rho_init = vec![0.0; d];
        let valid_init = self.build_tree(
            depth - 1,
            eps,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            &mut log_sum_weight_init,
        );
        if !valid_init {
            return false;
        }

        let mut z_propose_final = self.z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; d];
        let mut p_sharp_final_beg = vec![0.0; d];
        let mut rho_final = vec![0.0; d];
        let valid_final = self.build_tree(
            depth - 1,
            eps,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            &mut log_sum_weight_final,
        );
        if !valid_final {
            return false;
        }

        let log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree
            || rng::uniform(self.rng) < (log_sum_weight_final - log_sum_weight_subtree).exp()
        {
            *z_propose = z_propose_final;
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_extended = add(&rho_init, &p_final_beg);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &rho_extended);
        let rho_extended = add(&rho_final, &p_init_end);
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &rho_extended);
        persist
    }
}

/// One NUTS transition from `start` with step size `eps`.
pub fn transition<D: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, D>,
    start: &Point,
    eps: f64,
    max_depth: usize,
    rng: &mut StreamRng,
) -> (Point, TransitionStats) {
    let mut z = start.clone();
    ham.sample_momentum(&mut z, rng);
    let h0 = ham.energy(&z);
    let d = z.q.len();

    let mut z_fwd = z.clone();
    let mut z_bck = z.clone();
    let mut z_sample = z.clone();
    let mut z_propose = z.clone();

    let p_sharp = ham.p_sharp(&z.p);
    let mut p_sharp_fwd_bck = p_sharp.clone();
    let mut p_sharp_fwd_fwd = p_sharp.clone();
    let mut p_sharp_bck_fwd = p_sharp.clone();
    let mut p_sharp_bck_bck = p_sharp;
    let mut p_fwd_bck = z.p.clone();
    let mut p_fwd_fwd = z.p.clone();
    let mut p_bck_fwd = z.p.clone();
    let mut p_bck_bck = z.p.clone();
    let mut rho = z.p.clone();
    let mut log_sum_weight = 0.0;

    let mut traj = Trajectory {
        ham,
        rng,
        z,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };
    let mut depth = 0;
    while depth < max_depth {
        let mut rho_fwd = vec![0.0; d];
        let mut rho_bck = vec![0.0; d];
        let mut log_sum_weight_subtree = f64::NEG_INFINITY;
        let valid_subtree = if rng::uniform(traj.rng) > 0.5 {
            traj.z.clone_from(&z_fwd);
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_bck);
            p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
            let ok = traj.build_tree(
                depth,
                ham_eps(eps, 1.0),
                &mut z_propose,
                &mut p_sharp_fwd_bck,
                &mut p_sharp_fwd_fwd,
                &mut rho_fwd,
                &mut p_fwd_bck,
                &mut p_fwd_fwd,
                &mut log_sum_weight_subtree,
            );
            z_fwd.clone_from(&traj.z);
            ok
        } else {
            traj.z.clone_from(&z_bck);
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_fwd);
            p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
            let ok = traj.build_tree(
                depth,
                ham_eps(eps, -1.0),
                &mut z_propose,
                &mut p_sharp_bck_fwd,
                &mut p_sharp_bck_bck,
                &mut rho_bck,
                &mut p_bck_fwd,
                &mut p_bck_bck,
                &mut log_sum_weight_subtree,
            );
            z_bck.clone_from(&traj.z);
            ok
        };
        if !valid_subtree {
            break;
        }
        depth += 1;

        if log_sum_weight_subtree > log_sum_weight
            || rng::uniform(traj.rng) < (log_sum_weight_subtree - log_sum_weight).exp()
        {
            z_sample.clone_from(&z_propose);
        }
        log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        let rho_extended = add(&rho_bck, &p_fwd_bck);
        persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_extended);
        let rho_extended = add(&rho_fwd, &p_bck_fwd);
        persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_extended);
        if !persist {
            break;
        }
    }

    let stats = TransitionStats {
        accept_stat: if traj.n_leapfrog > 0 {
            traj.sum_metro_prob / traj.n_leapfrog as f64
        } else {
            0.0
        },
        n_leapfrog: traj.n_leapfrog,
        depth,
        divergent: traj.divergent,
        energy: ham.energy(&z_sample),
    };
    (z_sample, stats)
}

#[inline]
fn ham_eps(eps: f64, sign: f64) -> f64 {
    sign * eps
}

/// Finds a step size where one leapfrog step has acceptance near 0.8,
/// doubling or halving from `eps`.
pub fn init_step_size<D: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, D>,
    z: &Point,
    mut eps: f64,
    rng: &mut StreamRng,
) -> f64 {
    let trial = |eps: f64, rng: &mut StreamRng| {
        let mut w = z.clone();
        ham.sample_momentum(&mut w, rng);
        let h0 = ham.energy(&w);
        ham.leapfrog(&mut w, eps);
        h0 - ham.energy(&w)
    };
    let log_target = 0.8f64.ln();
    let direction = if trial(eps, rng) > log_target { 1 } else { -1 };
    loop {
        let delta_h = trial(eps, rng);
        if direction == 1 && !(delta_h > log_target) {
            break;
        }
        if direction == -1 && !(delta_h < log_target) {
            break;
        }
        eps = if direction == 1 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-12..=1e7).contains(&eps) {
            eps = eps.clamp(1e-12, 1e7);
            break;
        }
    }
    eps
}

/// Dual-averaging step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const KAPPA: f64 = 0.75;
    const T0: f64 = 10.0;

    pub fn new(target: f64, eps: f64) -> Self {
        Self {
            target,
            mu: (10.0 * eps).ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, eps: f64) {
        *self = Self::new(self.target, eps);
    }

    /// Updates from one transition's acceptance statistic; returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Warmup schedule: an initial fast buffer, doubling slow windows in which
/// the metric variance is estimated, and a terminal fast buffer.
#[derive(Debug, Clone)]
pub struct MetricWindows {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MetricWindows {
    pub fn new(num_warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        if init + term + base > num_warmup {
            init = (0.15 * num_warmup as f64) as usize;
            term = (0.1 * num_warmup as f64) as usize;
            base = num_warmup - (init + term);
        }
        Self {
            num_warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: init + base - 1,
            counter: 0,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn window_ends(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.num_warmup - self.term_buffer {
                self.next_window = last;
            }
        }
    }

    /// Feeds one warmup position; returns a new inverse metric when a slow
    /// window closes.
    pub fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if self.in_window() {
            self.n += 1;
            let n = self.n as f64;
            for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
                let delta = x - *m;
                *m += delta / n;
                *s += delta * (x - *m);
            }
        }
        let out = if self.window_ends() {
            self.compute_next_window();
            let n = self.n as f64;
            let var = self
                .m2
                .iter()
                .map(|s| {
                    let v = if n > 1.0 { s / (n - 1.0) } else { 1.0 };
                    (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0))
                })
                .collect();
            self.n = 0;
            self.mean.iter_mut().for_each(|m| *m = 0.0);
            self.m2.iter_mut().for_each(|m| *m = 0.0);
            Some(var)
        } else {
            None
        };
        self.counter += 1;
        out
    }
}

/// Per-chain output on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: Vec<Vec<f64>>,
    pub lp: Vec<f64>,
    pub stats: Vec<TransitionStats>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

/// Uniform draws on `[-2, 2]` per coordinate until the density and its
/// gradient are finite.
pub fn initialize<D: LogDensity + ?Sized>(
    target: &D,
    rng: &mut StreamRng,
    attempts: usize,
) -> Option<Vec<f64>> {
    let d = target.dim();
    let mut grad = vec![0.0; d];
    for _ in 0..attempts {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lp = target.log_density_grad(&x, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Some(x);
        }
    }
    None
}

/// Warmup followed by `draws` retained transitions, starting from `init`.
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    init: Vec<f64>,
    warmup: usize,
    draws: usize,
    target_accept: f64,
    max_depth: usize,
    rng: &mut StreamRng,
) -> ChainRun {
    let d = target.dim();
    let mut ham = Hamiltonian::new(target, vec![1.0; d]);
    let mut z = ham.point(init);
    let mut eps = init_step_size(&ham, &z, 1.0, rng);
    let mut dual = DualAveraging::new(target_accept, eps);
    let mut windows = MetricWindows::new(warmup, d);

    for _ in 0..warmup {
        let (next, stats) = transition(&ham, &z, eps, max_depth, rng);
        z = next;
        eps = dual.learn(stats.accept_stat);
        if let Some(var) = windows.learn(&z.q) {
            ham.set_inv_metric(var);
            z = ham.point(z.q);
            eps = init_step_size(&ham, &z, eps, rng);
            dual.restart(eps);
        }
    }
    if warmup > 0 {
        eps = dual.final_step_size();
    }

    let mut out = ChainRun {
        draws: Vec::with_capacity(draws),
        lp: Vec::with_capacity(draws),
        stats: Vec::with_capacity(draws),
        step_size: eps,
        inv_metric: ham.inv_metric().to_vec(),
    };
    for _ in 0..draws {
        let (next, stats) = transition(&ham, &z, eps, max_depth, rng);
        z = next;
        out.draws.push(z.q.clone());
        out.lp.push(z.lp);
        out.stats.push(stats);
    }
    out
}
