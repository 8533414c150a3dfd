//! Latent relational graphs over node grids: per-edge posterior/prior
//! inference, the Gaussian proxy of the degenerate Binomial edge law,
//! reparameterized sampling of summary and task-specific graphs, and the
//! edge-weighted sum of node-pair embeddings.

use crate::featuremap::{FeatureMap, NodeGrid};
use crate::numerics::mlp::{Activation, Mlp, MlpVars};
use crate::numerics::tape::{Tape, Var};
use crate::numerics::{RngStream, Scalar};
use crate::{Error, Result};

/// Guard distance below 1/2 for the posterior mean head.
pub const MU_GUARD: f64 = 1e-3;
/// Additive floor for predicted variances.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Node pairs (i, j) with i < j in lexicographic order. This fixed order
/// defines the layout of every edge vector in the crate, including exports.
pub fn edge_pairs(node_count: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(edge_count(node_count));
    for i in 0..node_count {
        for j in (i + 1)..node_count {
            pairs.push((i, j));
        }
    }
    pairs
}

pub fn edge_count(node_count: usize) -> usize {
    node_count * (node_count - 1) / 2
}

/// Mean of the Gaussian proxy N(m, m(1-m)) for a degenerate Binomial,
/// derived from a Gaussian with mean `mu` (< 1/2) and variance `sigma_sq`.
///
/// m = (1 + c - sqrt(1 + c^2)) / 2 with c = 2 sigma_sq / (1 - 2 mu), which
/// solves c (1 - 2m) = 2 m (1 - m) and lies in [0, 1/2).
pub fn gaussian_proxy_m<F: Scalar>(mu: F, sigma_sq: F) -> Result<F> {
    let one = F::one();
    let two = F::from_f64_c(2.0);
    let half = F::from_f64_c(0.5);
    if mu > F::from_f64_c(0.5 - MU_GUARD) {
        return Err(Error::Domain(format!(
            "gaussian_proxy_m: mu = {mu} too close to 1/2 (guard {MU_GUARD})"
        )));
    }
    if sigma_sq < F::zero() {
        return Err(Error::Domain(format!(
            "gaussian_proxy_m: negative variance {sigma_sq}"
        )));
    }
    let c = (sigma_sq * two) / (mu * (-two) + one);
    Ok((c + one - (c * c + one).sqrt()) * half)
}

/// Residual of the quadratic that defines the proxy mean: c(1-2m) - 2m(1-m).
pub fn proxy_residual<F: Scalar>(mu: F, sigma_sq: F, m: F) -> F {
    let one = F::one();
    let two = F::from_f64_c(2.0);
    let c = (sigma_sq * two) / (mu * (-two) + one);
    c * (one - two * m) - two * m * (one - m)
}

/// Per-edge posterior parameters for one time step's graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePosterior<F> {
    pub node_count: usize,
    pub mu_tilde: Vec<F>,
    pub sigma_tilde_sq: Vec<F>,
    /// Proxy means derived from (mu_tilde, sigma_tilde_sq).
    pub m: Vec<F>,
    pub mu: Vec<F>,
    pub sigma_sq: Vec<F>,
}

impl<F: Scalar> EdgePosterior<F> {
    pub fn new(
        node_count: usize,
        mu_tilde: Vec<F>,
        sigma_tilde_sq: Vec<F>,
        mu: Vec<F>,
        sigma_sq: Vec<F>,
    ) -> Result<Self> {
        let e = edge_count(node_count);
        for (name, v) in [
            ("mu_tilde", &mu_tilde),
            ("sigma_tilde_sq", &sigma_tilde_sq),
            ("mu", &mu),
            ("sigma_sq", &sigma_sq),
        ] {
            if v.len() != e {
                return Err(Error::shape(format!("EdgePosterior {name}"), e, v.len()));
            }
        }
        let half = F::from_f64_c(0.5);
        for (&mt, &st) in mu_tilde.iter().zip(&sigma_tilde_sq) {
            if mt >= half {
                return Err(Error::Domain(format!(
                    "mu_tilde {mt} not strictly below 1/2"
                )));
            }
            if st <= F::zero() {
                return Err(Error::Domain(format!("sigma_tilde_sq {st} not positive")));
            }
        }
        let m = mu_tilde
            .iter()
            .zip(&sigma_tilde_sq)
            .map(|(&mt, &st)| gaussian_proxy_m(mt, st))
            .collect::<Result<Vec<F>>>()?;
        Ok(EdgePosterior {
            node_count,
            mu_tilde,
            sigma_tilde_sq,
            m,
            mu,
            sigma_sq,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.m.len()
    }
}

/// Per-edge prior parameters, same edge ordering as [`EdgePosterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePrior<F> {
    pub node_count: usize,
    pub m0: Vec<F>,
    pub mu0: Vec<F>,
    pub sigma0_sq: Vec<F>,
}

impl<F: Scalar> EdgePrior<F> {
    pub fn new(node_count: usize, m0: Vec<F>, mu0: Vec<F>, sigma0_sq: Vec<F>) -> Result<Self> {
        let e = edge_count(node_count);
        for (name, v) in [("m0", &m0), ("mu0", &mu0), ("sigma0_sq", &sigma0_sq)] {
            if v.len() != e {
                return Err(Error::shape(format!("EdgePrior {name}"), e, v.len()));
            }
        }
        Ok(EdgePrior {
            node_count,
            m0,
            mu0,
            sigma0_sq,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.m0.len()
    }
}

/// Frozen standard-normal draws for one graph: one `gamma` per edge for the
/// summary weights and one independent `gamma_prime` per edge for the
/// transformation variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNoise<F> {
    pub gamma: Vec<F>,
    pub gamma_prime: Vec<F>,
}

impl<F: Scalar> GraphNoise<F> {
    pub fn sample(edge_count: usize, rng: &mut RngStream) -> Self {
        GraphNoise {
            gamma: rng.normals(edge_count),
            gamma_prime: rng.normals(edge_count),
        }
    }

    /// Mean-mode noise: all draws zero (deterministic inference).
    pub fn zeros(edge_count: usize) -> Self {
        GraphNoise {
            gamma: vec![F::zero(); edge_count],
            gamma_prime: vec![F::zero(); edge_count],
        }
    }
}

/// One sampled summary-edge weight: the raw reparameterized draw and its
/// value clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryDraw<F> {
    pub raw: F,
    pub clamped: F,
}

/// alpha_tilde = m + sqrt(m (1 - m)) gamma, clamped to [0, 1].
pub fn sample_summary_edge<F: Scalar>(m: F, gamma: F) -> SummaryDraw<F> {
    let raw = m + (m * (F::one() - m)).sqrt() * gamma;
    SummaryDraw {
        raw,
        clamped: raw.max(F::zero()).min(F::one()),
    }
}

/// s = alpha_tilde mu + sqrt(alpha_tilde sigma_sq) gamma_prime, with
/// `alpha_tilde` already clamped to [0, 1].
pub fn sample_transformation<F: Scalar>(alpha_tilde: F, mu: F, sigma_sq: F, gamma_prime: F) -> F {
    alpha_tilde * mu + (alpha_tilde * sigma_sq).sqrt() * gamma_prime
}

/// A sampled task-specific graph for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph<F> {
    pub node_count: usize,
    pub alpha_tilde_raw: Vec<F>,
    pub alpha_tilde: Vec<F>,
    pub s: Vec<F>,
    /// Task-specific weights alpha_bar = s . alpha_tilde, in edge order.
    pub alpha_bar: Vec<F>,
}

impl<F: Scalar> TaskGraph<F> {
    pub fn edge_count(&self) -> usize {
        self.alpha_bar.len()
    }

    /// The flattened edge vector (length u(u-1)/2).
    pub fn edge_vector(&self) -> &[F] {
        &self.alpha_bar
    }
}

/// Sample a task graph from a posterior with explicit noise.
pub fn build_task_graph_with_noise<F: Scalar>(
    posterior: &EdgePosterior<F>,
    noise: &GraphNoise<F>,
) -> TaskGraph<F> {
    let e = posterior.edge_count();
    debug_assert_eq!(noise.gamma.len(), e);
    let mut raw = Vec::with_capacity(e);
    let mut clamped = Vec::with_capacity(e);
    let mut s = Vec::with_capacity(e);
    let mut bar = Vec::with_capacity(e);
    for k in 0..e {
        let draw = sample_summary_edge(posterior.m[k], noise.gamma[k]);
        let sk = sample_transformation(
            draw.clamped,
            posterior.mu[k],
            posterior.sigma_sq[k],
            noise.gamma_prime[k],
        );
        raw.push(draw.raw);
        clamped.push(draw.clamped);
        s.push(sk);
        bar.push(sk * draw.clamped);
    }
    TaskGraph {
        node_count: posterior.node_count,
        alpha_tilde_raw: raw,
        alpha_tilde: clamped,
        s,
        alpha_bar: bar,
    }
}

/// Sample a task graph, drawing fresh noise from `rng` (all gammas first,
/// then all gamma-primes, in edge order).
pub fn build_task_graph<F: Scalar>(
    posterior: &EdgePosterior<F>,
    rng: &mut RngStream,
) -> TaskGraph<F> {
    let noise = GraphNoise::sample(posterior.edge_count(), rng);
    build_task_graph_with_noise(posterior, &noise)
}

/// r = sum over edges (i, j) of alpha_bar_ij * embedder([node_i; node_j]).
pub fn graph_embed<F: Scalar>(
    grid: &NodeGrid<F>,
    graph: &TaskGraph<F>,
    embedder: &Mlp<F>,
) -> Result<Vec<F>> {
    if grid.node_count() != graph.node_count {
        return Err(Error::shape(
            "graph_embed node count",
            graph.node_count,
            grid.node_count(),
        ));
    }
    let pairs = edge_pairs(graph.node_count);
    let mut r = vec![F::zero(); embedder.output_dim()];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let mut input = Vec::with_capacity(2 * grid.node_dim());
        input.extend_from_slice(grid.node_features(i));
        input.extend_from_slice(grid.node_features(j));
        let emb = embedder.forward(&input)?;
        let w = graph.alpha_bar[k];
        for (acc, v) in r.iter_mut().zip(&emb) {
            *acc += w * *v;
        }
    }
    Ok(r)
}

/// Per-graph min-max rescaling into [0, 1]; constant vectors map to zeros.
pub fn min_max_normalize<F: Scalar>(values: &[F]) -> Vec<F> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().cloned().fold(F::infinity(), F::min);
    let max = values.iter().cloned().fold(F::neg_infinity(), F::max);
    if max == min {
        return vec![F::zero(); values.len()];
    }
    let span = max - min;
    values.iter().map(|&x| (x - min) / span).collect()
}

/// Edge vector for export, optionally min-max normalized. Normalization is
/// an export concern only; the training path always uses the raw weights.
pub fn export_edge_vector<F: Scalar>(graph: &TaskGraph<F>, normalize: bool) -> Vec<F> {
    if !normalize {
        return graph.alpha_bar.clone();
    }
    min_max_normalize(&graph.alpha_bar)
}

// ---------------------------------------------------------------------
// Edge networks
// ---------------------------------------------------------------------

/// The seven inference networks: posterior heads for the summary-edge
/// Gaussian (mu_tilde, sigma_tilde) and the transformation Gaussian
/// (mu, sigma), plus prior heads (m0, mu0, sigma0). Each consumes the
/// flattened raw feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNets<F> {
    pub post_mu_tilde: Mlp<F>,
    pub post_sigma_tilde: Mlp<F>,
    pub post_mu: Mlp<F>,
    pub post_sigma: Mlp<F>,
    pub prior_m0: Mlp<F>,
    pub prior_mu0: Mlp<F>,
    pub prior_sigma0: Mlp<F>,
}

/// Tape registration of all seven networks.
pub struct EdgeNetVars {
    pub post_mu_tilde: MlpVars,
    pub post_sigma_tilde: MlpVars,
    pub post_mu: MlpVars,
    pub post_sigma: MlpVars,
    pub prior_m0: MlpVars,
    pub prior_mu0: MlpVars,
    pub prior_sigma0: MlpVars,
}

/// Edge-distribution parameters as tape nodes (training path).
pub struct EdgeDistVars {
    pub mu_tilde: Var,
    pub sigma_tilde_sq: Var,
    pub m: Var,
    pub mu: Var,
    pub sigma_sq: Var,
    pub m0: Var,
    pub mu0: Var,
    pub sigma0_sq: Var,
}

impl<F: Scalar> EdgeNets<F> {
    pub fn new(input_dim: usize, hidden: usize, edge_count: usize, rng: &mut RngStream) -> Self {
        let dims = [input_dim, hidden, edge_count];
        EdgeNets {
            post_mu_tilde: Mlp::new(&dims, Activation::Tanh, rng),
            post_sigma_tilde: Mlp::new(&dims, Activation::Tanh, rng),
            post_mu: Mlp::new(&dims, Activation::Tanh, rng),
            post_sigma: Mlp::new(&dims, Activation::Tanh, rng),
            prior_m0: Mlp::new(&dims, Activation::Tanh, rng),
            prior_mu0: Mlp::new(&dims, Activation::Tanh, rng),
            prior_sigma0: Mlp::new(&dims, Activation::Tanh, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize, edge_count: usize) -> Self {
        let dims = [input_dim, hidden, edge_count];
        EdgeNets {
            post_mu_tilde: Mlp::zeros(&dims, Activation::Tanh),
            post_sigma_tilde: Mlp::zeros(&dims, Activation::Tanh),
            post_mu: Mlp::zeros(&dims, Activation::Tanh),
            post_sigma: Mlp::zeros(&dims, Activation::Tanh),
            prior_m0: Mlp::zeros(&dims, Activation::Tanh),
            prior_mu0: Mlp::zeros(&dims, Activation::Tanh),
            prior_sigma0: Mlp::zeros(&dims, Activation::Tanh),
        }
    }

    pub fn nets(&self) -> [&Mlp<F>; 7] {
        [
            &self.post_mu_tilde,
            &self.post_sigma_tilde,
            &self.post_mu,
            &self.post_sigma,
            &self.prior_m0,
            &self.prior_mu0,
            &self.prior_sigma0,
        ]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp<F>; 7] {
        [
            &mut self.post_mu_tilde,
            &mut self.post_sigma_tilde,
            &mut self.post_mu,
            &mut self.post_sigma,
            &mut self.prior_m0,
            &mut self.prior_mu0,
            &mut self.prior_sigma0,
        ]
    }

    pub fn edge_count(&self) -> usize {
        self.post_mu_tilde.output_dim()
    }

    pub fn register(&self, tape: &mut Tape<F>) -> EdgeNetVars {
        EdgeNetVars {
            post_mu_tilde: self.post_mu_tilde.register(tape),
            post_sigma_tilde: self.post_sigma_tilde.register(tape),
            post_mu: self.post_mu.register(tape),
            post_sigma: self.post_sigma.register(tape),
            prior_m0: self.prior_m0.register(tape),
            prior_mu0: self.prior_mu0.register(tape),
            prior_sigma0: self.prior_sigma0.register(tape),
        }
    }

    /// Differentiable inference of every edge-distribution parameter from
    /// the flattened feature map. Head transforms keep each parameter in
    /// its legal range:
    /// - mu_tilde = 1/2 - softplus(x) - MU_GUARD  (strictly below 1/2)
    /// - variances = softplus(x) + SIGMA_FLOOR    (strictly positive)
    /// - m0 = sigmoid(x) / 2                      (in (0, 1/2))
    pub fn infer_on(
        &self,
        tape: &mut Tape<F>,
        vars: &EdgeNetVars,
        input: Var,
    ) -> Result<EdgeDistVars> {
        let raw_mu_tilde = self
            .post_mu_tilde
            .forward_on(tape, &vars.post_mu_tilde, input)?;
        let sp = tape.softplus(raw_mu_tilde);
        let neg = tape.neg(sp);
        let mu_tilde = tape.add_scalar(neg, F::from_f64_c(0.5 - MU_GUARD));

        let raw_st = self
            .post_sigma_tilde
            .forward_on(tape, &vars.post_sigma_tilde, input)?;
        let sigma_tilde_sq = variance_head(tape, raw_st);

        let m = proxy_m_on(tape, mu_tilde, sigma_tilde_sq);

        let mu = self.post_mu.forward_on(tape, &vars.post_mu, input)?;
        let raw_s = self.post_sigma.forward_on(tape, &vars.post_sigma, input)?;
        let sigma_sq = variance_head(tape, raw_s);

        let raw_m0 = self.prior_m0.forward_on(tape, &vars.prior_m0, input)?;
        let sg = tape.sigmoid(raw_m0);
        let m0 = tape.mul_scalar(sg, F::from_f64_c(0.5));

        let mu0 = self.prior_mu0.forward_on(tape, &vars.prior_mu0, input)?;
        let raw_s0 = self
            .prior_sigma0
            .forward_on(tape, &vars.prior_sigma0, input)?;
        let sigma0_sq = variance_head(tape, raw_s0);

        Ok(EdgeDistVars {
            mu_tilde,
            sigma_tilde_sq,
            m,
            mu,
            sigma_sq,
            m0,
            mu0,
            sigma0_sq,
        })
    }

    /// Value-level inference: runs the same wiring on a throwaway tape.
    pub fn infer(&self, map: &FeatureMap<F>) -> Result<(EdgePosterior<F>, EdgePrior<F>)> {
        let node_count = node_count_for_edges(self.edge_count())?;
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let input = tape.constant(map.flat().to_vec());
        let dist = self.infer_on(&mut tape, &vars, input)?;
        let posterior = EdgePosterior::new(
            node_count,
            tape.values(dist.mu_tilde).to_vec(),
            tape.values(dist.sigma_tilde_sq).to_vec(),
            tape.values(dist.mu).to_vec(),
            tape.values(dist.sigma_sq).to_vec(),
        )?;
        let prior = EdgePrior::new(
            node_count,
            tape.values(dist.m0).to_vec(),
            tape.values(dist.mu0).to_vec(),
            tape.values(dist.sigma0_sq).to_vec(),
        )?;
        Ok((posterior, prior))
    }
}

fn node_count_for_edges(edges: usize) -> Result<usize> {
    let mut u = 1;
    while edge_count(u) < edges {
        u += 1;
    }
    if edge_count(u) != edges {
        return Err(Error::Config(format!(
            "{edges} outputs do not correspond to any complete node pair set"
        )));
    }
    Ok(u)
}

fn variance_head<F: Scalar>(tape: &mut Tape<F>, raw: Var) -> Var {
    let sp = tape.softplus(raw);
    tape.add_scalar(sp, F::from_f64_c(SIGMA_FLOOR))
}

/// Tape version of [`gaussian_proxy_m`], identical operation sequence.
pub fn proxy_m_on<F: Scalar>(tape: &mut Tape<F>, mu: Var, sigma_sq: Var) -> Var {
    let two = F::from_f64_c(2.0);
    let s2 = tape.mul_scalar(sigma_sq, two);
    let mneg = tape.mul_scalar(mu, -two);
    let den = tape.add_scalar(mneg, F::one());
    let c = tape.div(s2, den);
    let csq = tape.mul(c, c);
    let arg = tape.add_scalar(csq, F::one());
    let root = tape.sqrt(arg);
    let t1 = tape.add_scalar(c, F::one());
    let t2 = tape.sub(t1, root);
    tape.mul_scalar(t2, F::from_f64_c(0.5))
}

/// Tape version of the summary-edge sampler. Returns (raw, clamped).
pub fn sample_summary_on<F: Scalar>(tape: &mut Tape<F>, m: Var, gamma: &[F]) -> (Var, Var) {
    let one_minus = {
        let neg = tape.neg(m);
        tape.add_scalar(neg, F::one())
    };
    let var = tape.mul(m, one_minus);
    let scale = tape.sqrt(var);
    let g = tape.constant(gamma.to_vec());
    let noise = tape.mul(scale, g);
    let raw = tape.add(m, noise);
    let clamped = tape.clamp01(raw);
    (raw, clamped)
}

/// Tape version of the transformation sampler.
pub fn sample_transformation_on<F: Scalar>(
    tape: &mut Tape<F>,
    alpha_tilde: Var,
    mu: Var,
    sigma_sq: Var,
    gamma_prime: &[F],
) -> Var {
    let mean = tape.mul(alpha_tilde, mu);
    let var = tape.mul(alpha_tilde, sigma_sq);
    let scale = tape.sqrt(var);
    let g = tape.constant(gamma_prime.to_vec());
    let noise = tape.mul(scale, g);
    tape.add(mean, noise)
}

/// Tape version of the graph embedding: r = sum alpha_bar_k * f(pair_k).
pub fn graph_embed_on<F: Scalar>(
    tape: &mut Tape<F>,
    node_vars: &[Var],
    alpha_bar: Var,
    embedder: &Mlp<F>,
    embedder_vars: &MlpVars,
) -> Result<Var> {
    let pairs = edge_pairs(node_vars.len());
    let mut terms = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let input = tape.concat(&[node_vars[i], node_vars[j]]);
        let emb = embedder.forward_on(tape, embedder_vars, input)?;
        let weight = tape.gather(alpha_bar, vec![k]);
        terms.push(tape.scale_by_scalar(emb, weight));
    }
    Ok(tape.add_many(&terms))
}
