//! The Gibbs cycle: latent probit draw, marginalized spike-and-slab updates
//! per covariate, variance and inclusion-rate hyperparameters, and the joint
//! intercept/treatment block.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::bases::EIG_FLOOR;
use crate::data::{Dataset, RngStream, VarKind};
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, chol_lt_solve, chol_solve, cholesky};
use crate::samplers::design::{CovariateRep, ModelDesign};
use crate::samplers::truncnorm::latent_draw;
use crate::samplers::{
    McmcConfig, ModelState, PosteriorDraws, PriorFamily, PriorSpec, Role, SavedDraw, TreatBasis,
};

pub struct GibbsSampler<'a> {
    design: &'a ModelDesign,
    prior: PriorSpec,
    role: Role,
    response: Array1<f64>,
    response_kind: VarKind,
    treat_basis: TreatBasis,
    /// n x k intercept/treatment design.
    z: Array2<f64>,
    /// k x k Gram matrix of `z`, row-major.
    ztz: Vec<f64>,

    gamma: Vec<bool>,
    effects: Vec<Vec<f64>>,
    /// GP only: eigenbasis coordinates of each active f_j.
    eig_coords: Vec<Vec<f64>>,
    /// GP only: cached quadratic forms f_j' Sigma_j^-1 f_j.
    quad: Vec<f64>,
    /// GP only: number of leading eigendirections carrying slab mass.
    k_eff: Vec<usize>,
    tau2: Vec<f64>,
    theta: f64,
    sigma2: f64,
    sigma_beta2: f64,
    treat_coefs: Vec<f64>,
    latent: Array1<f64>,
    cov_fit: Array1<f64>,

    rng: ChaCha8Rng,
    resid: Vec<f64>,
    contrib_old: Vec<f64>,
    contrib_new: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        design: &'a ModelDesign,
        data: &'a Dataset,
        role: Role,
        prior: &PriorSpec,
        stream: &RngStream,
    ) -> Result<Self> {
        if design.family != prior.family {
            return Err(Error::InvalidConfig(
                "design family does not match prior family".into(),
            ));
        }
        let n = data.n();
        let p = design.p();
        let (response, response_kind) = match role {
            Role::Outcome => (data.y().clone(), data.y_kind()),
            Role::Treatment => (data.t().clone(), data.t_kind()),
        };
        if response_kind == VarKind::Binary {
            let ones = response.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == n {
                return Err(Error::DegenerateResponse);
            }
        }
        let treat_basis = match role {
            Role::Treatment => TreatBasis::InterceptOnly,
            Role::Outcome => match data.t_kind() {
                VarKind::Binary => TreatBasis::Binary,
                VarKind::Continuous => {
                    let t = data.t();
                    let mean = t.sum() / n as f64;
                    let sd =
                        (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0))
                            .sqrt();
                    if sd <= 0.0 {
                        return Err(Error::Data("treatment is constant".into()));
                    }
                    TreatBasis::Poly {
                        mean,
                        sd,
                        degree: prior.t_degree,
                    }
                }
            },
        };
        let k = treat_basis.len();
        let mut z = Array2::zeros((n, k));
        let mut row = vec![0.0; k];
        for i in 0..n {
            treat_basis.fill(data.t()[i], &mut row);
            for c in 0..k {
                z[[i, c]] = row[c];
            }
        }
        let mut ztz = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                ztz[a * k + b] = z.column(a).dot(&z.column(b));
            }
        }

        let effects = design
            .reps
            .iter()
            .map(|r| vec![0.0; r.effect_len(n)])
            .collect();
        let k_eff: Vec<usize> = design
            .reps
            .iter()
            .map(|r| match r {
                CovariateRep::Gp { kernel } => {
                    let cutoff = prior.eig_rel * kernel.eigvals()[0];
                    kernel
                        .eigvals()
                        .iter()
                        .filter(|&&b| b >= cutoff && b > 0.0)
                        .count()
                        .max(1)
                }
                _ => 0,
            })
            .collect();
        // deterministic latent init; binary responses start at the
        // truncated-normal mean around a zero predictor
        let latent = match response_kind {
            VarKind::Continuous => response.clone(),
            VarKind::Binary => response.mapv(|v| {
                let m = (2.0 / std::f64::consts::PI).sqrt();
                if v == 1.0 {
                    m
                } else {
                    -m
                }
            }),
        };

        Ok(GibbsSampler {
            design,
            prior: prior.clone(),
            role,
            response,
            response_kind,
            treat_basis,
            z,
            ztz,
            gamma: vec![false; p],
            effects,
            eig_coords: vec![Vec::new(); p],
            quad: vec![0.0; p],
            k_eff,
            tau2: vec![1.0; p],
            theta: prior.a_theta / (prior.a_theta + prior.b_theta),
            sigma2: 1.0,
            sigma_beta2: 1.0,
            treat_coefs: vec![0.0; k],
            latent,
            cov_fit: Array1::zeros(n),
            rng: stream.rng(),
            resid: vec![0.0; n],
            contrib_old: vec![0.0; n],
            contrib_new: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma_beta2(&self) -> f64 {
        self.sigma_beta2
    }

    pub fn gamma(&self) -> &[bool] {
        &self.gamma
    }

    pub fn effect(&self, j: usize) -> &[f64] {
        &self.effects[j]
    }

    pub fn treat_coefs(&self) -> &[f64] {
        &self.treat_coefs
    }

    pub fn treat_basis(&self) -> &TreatBasis {
        &self.treat_basis
    }

    pub fn set_theta(&mut self, v: f64) {
        self.theta = v;
    }

    pub fn set_sigma2(&mut self, v: f64) {
        self.sigma2 = v;
    }

    pub fn set_sigma_beta2(&mut self, v: f64) {
        self.sigma_beta2 = v;
    }

    /// Replace the response vector (used by joint prior-vs-Gibbs validation,
    /// which resimulates data between scans).
    pub fn set_response(&mut self, y: Array1<f64>) {
        assert_eq!(y.len(), self.n());
        if self.response_kind == VarKind::Continuous {
            self.latent = y.clone();
        }
        self.response = y;
    }

    /// Linear predictor on each observed row.
    pub fn fitted_values(&self) -> Array1<f64> {
        let n = self.n();
        let k = self.treat_basis.len();
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let mut eta = self.cov_fit[i];
            for c in 0..k {
                eta += self.z[[i, c]] * self.treat_coefs[c];
            }
            out[i] = eta;
        }
        out
    }

    pub fn snapshot(&self) -> ModelState {
        ModelState {
            gamma: self.gamma.clone(),
            effects: self.effects.clone(),
            tau2: self.tau2.clone(),
            theta: self.theta,
            sigma2: self.sigma2,
            sigma_beta2: self.sigma_beta2,
            treat_coefs: self.treat_coefs.clone(),
            latent: match self.response_kind {
                VarKind::Binary => Some(self.latent.to_vec()),
                VarKind::Continuous => None,
            },
        }
    }

    /// Restore a full state, recomputing the fitted-sum and quadratic-form
    /// caches from the effects.
    pub fn restore(&mut self, state: &ModelState) {
        self.gamma = state.gamma.clone();
        self.effects = state.effects.clone();
        self.tau2 = state.tau2.clone();
        self.theta = state.theta;
        self.sigma2 = state.sigma2;
        self.sigma_beta2 = state.sigma_beta2;
        self.treat_coefs = state.treat_coefs.clone();
        if let Some(l) = &state.latent {
            self.latent = Array1::from_vec(l.clone());
        }
        self.recompute_cov_fit();
        for j in 0..self.p() {
            if let CovariateRep::Gp { kernel } = &self.design.reps[j] {
                if self.gamma[j] {
                    let k = self.k_eff[j];
                    let f = Array1::from_vec(self.effects[j].clone());
                    let a_k = kernel.eigvecs().slice(s![.., ..k]);
                    let v = a_k.t().dot(&f.view());
                    self.quad[j] = v
                        .iter()
                        .zip(&kernel.eigvals()[..k])
                        .map(|(vi, &b)| vi * vi / b.max(EIG_FLOOR))
                        .sum();
                    self.eig_coords[j] = v.to_vec();
                } else {
                    self.quad[j] = 0.0;
                    self.eig_coords[j].clear();
                }
            }
        }
    }

    fn recompute_cov_fit(&mut self) {
        let n = self.n();
        let mut acc = vec![0.0; n];
        for j in 0..self.p() {
            if !self.gamma[j] {
                continue;
            }
            match &self.design.reps[j] {
                CovariateRep::Linear { x, .. } => {
                    let b = self.effects[j][0];
                    for i in 0..n {
                        acc[i] += x[i] * b;
                    }
                }
                CovariateRep::Spline { basis, .. } => {
                    let beta = &self.effects[j];
                    for i in 0..n {
                        let mut s = 0.0;
                        for (c, bc) in beta.iter().enumerate() {
                            s += basis[[i, c]] * bc;
                        }
                        acc[i] += s;
                    }
                }
                CovariateRep::Gp { .. } => {
                    for i in 0..n {
                        acc[i] += self.effects[j][i];
                    }
                }
            }
        }
        self.cov_fit = Array1::from_vec(acc);
    }

    /// Probit augmentation: redraw the latent response. No-op for continuous
    /// responses.
    pub fn step_latent(&mut self) {
        if self.response_kind != VarKind::Binary {
            return;
        }
        let k = self.treat_basis.len();
        for i in 0..self.n() {
            let mut mu = self.cov_fit[i];
            for c in 0..k {
                mu += self.z[[i, c]] * self.treat_coefs[c];
            }
            self.latent[i] = latent_draw(&mut self.rng, mu, self.response[i] == 1.0);
        }
    }

    /// Beta full-conditional parameters for theta.
    pub fn theta_posterior(&self) -> (f64, f64) {
        let active = self.gamma.iter().filter(|&&g| g).count() as f64;
        let p = self.p() as f64;
        (self.prior.a_theta + active, self.prior.b_theta + p - active)
    }

    pub fn step_theta(&mut self) {
        let (a, b) = self.theta_posterior();
        self.theta = Beta::new(a, b).unwrap().sample(&mut self.rng);
    }

    /// Inverse-gamma full-conditional parameters (a*, b*) for sigma^2; only
    /// meaningful for continuous responses.
    pub fn sigma2_posterior(&self) -> (f64, f64) {
        let n = self.n() as f64;
        let mut ssr = 0.0;
        let k = self.treat_basis.len();
        for i in 0..self.n() {
            let mut eta = self.cov_fit[i];
            for c in 0..k {
                eta += self.z[[i, c]] * self.treat_coefs[c];
            }
            let r = self.latent[i] - eta;
            ssr += r * r;
        }
        match self.design.family {
            PriorFamily::Linear | PriorFamily::Spline { .. } => {
                let active = self.gamma.iter().filter(|&&g| g).count() as f64;
                let d = self.effect_dim() as f64;
                let beta_sq: f64 = self
                    .effects
                    .iter()
                    .flat_map(|e| e.iter())
                    .map(|b| b * b)
                    .sum();
                (
                    self.prior.a_sigma2 + 0.5 * n + 0.5 * d * active,
                    self.prior.b_sigma2 + 0.5 * ssr + beta_sq / (2.0 * self.sigma_beta2),
                )
            }
            PriorFamily::Gp { .. } => {
                let quad_term: f64 = (0..self.p())
                    .filter(|&j| self.gamma[j])
                    .map(|j| self.quad[j] / (2.0 * self.tau2[j]))
                    .sum();
                // each active slab contributes its rank (n when eig_mass = 1)
                let rank_term: f64 = (0..self.p())
                    .filter(|&j| self.gamma[j])
                    .map(|j| self.k_eff[j] as f64)
                    .sum();
                (
                    self.prior.a_sigma2 + 0.5 * (n + rank_term),
                    self.prior.b_sigma2 + 0.5 * ssr + quad_term,
                )
            }
        }
    }

    pub fn step_sigma2(&mut self) {
        if self.response_kind == VarKind::Binary {
            self.sigma2 = 1.0;
            return;
        }
        let (a, b) = self.sigma2_posterior();
        self.sigma2 = draw_inv_gamma(&mut self.rng, a, b);
    }

    /// Inverse-gamma full conditional for the shared slab variance
    /// (linear/spline families).
    pub fn sigma_beta2_posterior(&self) -> (f64, f64) {
        let active = self.gamma.iter().filter(|&&g| g).count() as f64;
        let d = self.effect_dim() as f64;
        let beta_sq: f64 = self
            .effects
            .iter()
            .flat_map(|e| e.iter())
            .map(|b| b * b)
            .sum();
        (
            self.prior.a_sigma_beta2 + 0.5 * d * active,
            self.prior.b_sigma_beta2 + beta_sq / (2.0 * self.sigma2),
        )
    }

    pub fn step_sigma_beta2(&mut self) {
        let (a, b) = self.sigma_beta2_posterior();
        self.sigma_beta2 = draw_inv_gamma(&mut self.rng, a, b);
    }

    /// tau_j^2 update: None means "draw from the Gamma(1/2, 1/2) prior"
    /// (excluded covariate), otherwise the inverse-gamma parameters. The
    /// shape is (k+1)/2 with k the slab rank, which is (n+1)/2 for the
    /// full-rank slab.
    pub fn tau2_posterior(&self, j: usize) -> Option<(f64, f64)> {
        if !self.gamma[j] {
            return None;
        }
        let k = self.k_eff[j] as f64;
        Some((0.5 * (k + 1.0), 0.5 + self.quad[j] / (2.0 * self.sigma2)))
    }

    pub fn step_tau2(&mut self, j: usize) {
        self.tau2[j] = match self.tau2_posterior(j) {
            None => Gamma::new(0.5, 2.0).unwrap().sample(&mut self.rng),
            Some((a, b)) => draw_inv_gamma(&mut self.rng, a, b),
        };
    }

    /// Posterior mean and covariance (row-major) of the intercept/treatment
    /// block.
    pub fn intercept_posterior(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.treat_basis.len();
        let mut prec = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                prec[a * k + b] = self.ztz[a * k + b] / self.sigma2;
            }
            prec[a * k + a] += 1.0 / self.prior.k_treat;
        }
        let mut zty = vec![0.0; k];
        for i in 0..self.n() {
            let r = self.latent[i] - self.cov_fit[i];
            for c in 0..k {
                zty[c] += self.z[[i, c]] * r;
            }
        }
        let mut l = prec.clone();
        cholesky(&mut l, k).expect("treatment block precision is PD");
        let mut mean = zty.iter().map(|v| v / self.sigma2).collect::<Vec<_>>();
        chol_solve(&l, k, &mut mean);
        // covariance = precision inverse, column by column
        let mut cov = vec![0.0; k * k];
        for c in 0..k {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            chol_solve(&l, k, &mut e);
            for r in 0..k {
                cov[r * k + c] = e[r];
            }
        }
        (mean, cov)
    }

    /// Joint MVN draw of (beta_0, treatment coefficients).
    pub fn step_intercept_treatment(&mut self) {
        let k = self.treat_basis.len();
        let mut prec = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                prec[a * k + b] = self.ztz[a * k + b] / self.sigma2;
            }
            prec[a * k + a] += 1.0 / self.prior.k_treat;
        }
        let mut zty = vec![0.0; k];
        for i in 0..self.n() {
            let r = self.latent[i] - self.cov_fit[i];
            for c in 0..k {
                zty[c] += self.z[[i, c]] * r;
            }
        }
        let mut l = prec;
        cholesky(&mut l, k).expect("treatment block precision is PD");
        let mut mean = zty.iter().map(|v| v / self.sigma2).collect::<Vec<_>>();
        chol_solve(&l, k, &mut mean);
        let mut noise: Vec<f64> = (0..k).map(|_| self.rng.sample(StandardNormal)).collect();
        chol_lt_solve(&l, k, &mut noise);
        for c in 0..k {
            self.treat_coefs[c] = mean[c] + noise[c];
        }
    }

    /// Marginalized spike-and-slab update of (gamma_j, effect_j). Returns
    /// the inclusion probability that was used.
    pub fn step_gamma_beta(&mut self, j: usize) -> f64 {
        self.update_covariate(j, None)
    }

    /// Draw effect_j from its slab full conditional with gamma_j pinned to 1.
    pub fn step_effect_included(&mut self, j: usize) {
        self.update_covariate(j, Some(true));
    }

    /// P(gamma_j = 1 | everything else), without drawing.
    pub fn inclusion_probability(&mut self, j: usize) -> f64 {
        self.partial_residual(j);
        self.inclusion_probability_from_resid(j)
    }

    fn effect_dim(&self) -> usize {
        match self.design.family {
            PriorFamily::Linear => 1,
            PriorFamily::Spline { df } => df,
            PriorFamily::Gp { .. } => self.n(),
        }
    }

    /// Fill `self.resid` with the partial residual excluding covariate j and
    /// `self.contrib_old` with covariate j's current contribution.
    fn partial_residual(&mut self, j: usize) {
        let n = self.n();
        let k = self.treat_basis.len();
        match &self.design.reps[j] {
            CovariateRep::Linear { x, .. } => {
                let b = self.effects[j][0];
                for i in 0..n {
                    self.contrib_old[i] = x[i] * b;
                }
            }
            CovariateRep::Spline { basis, .. } => {
                let beta = &self.effects[j];
                for i in 0..n {
                    let mut s = 0.0;
                    for (c, bc) in beta.iter().enumerate() {
                        s += basis[[i, c]] * bc;
                    }
                    self.contrib_old[i] = s;
                }
            }
            CovariateRep::Gp { .. } => {
                self.contrib_old.copy_from_slice(&self.effects[j]);
            }
        }
        for i in 0..n {
            let mut eta = 0.0;
            for c in 0..k {
                eta += self.z[[i, c]] * self.treat_coefs[c];
            }
            self.resid[i] = self.latent[i] - eta - self.cov_fit[i] + self.contrib_old[i];
        }
    }

    fn inclusion_probability_from_resid(&self, j: usize) -> f64 {
        if self.theta <= 0.0 {
            return 0.0;
        }
        if self.theta >= 1.0 {
            return 1.0;
        }
        let log_odds = self.spike_log_odds(j);
        1.0 / (1.0 + (-log_odds).exp())
    }

    /// log w1 - log w0 where w1 = theta * slab-density ratio at zero and
    /// w0 = 1 - theta, evaluated in log space from the conjugate algebra.
    fn spike_log_odds(&self, j: usize) -> f64 {
        let log_w0 = (1.0 - self.theta).ln();
        let log_w1 = self.theta.ln()
            + match &self.design.reps[j] {
                CovariateRep::Linear { x, xtx } => {
                    let bty: f64 = x
                        .iter()
                        .zip(self.resid.iter())
                        .map(|(xv, rv)| xv * rv)
                        .sum();
                    let prec = xtx + 1.0 / self.sigma_beta2;
                    let m = bty / prec;
                    -0.5 * self.sigma_beta2.ln() - 0.5 * prec.ln()
                        + bty * m / (2.0 * self.sigma2)
                }
                CovariateRep::Spline { basis, gram } => {
                    let d = basis.ncols();
                    let mut bty = vec![0.0; d];
                    for c in 0..d {
                        bty[c] = basis
                            .column(c)
                            .iter()
                            .zip(self.resid.iter())
                            .map(|(bv, rv)| bv * rv)
                            .sum();
                    }
                    let mut l = vec![0.0; d * d];
                    for a in 0..d {
                        for b in 0..d {
                            l[a * d + b] = gram[[a, b]];
                        }
                        l[a * d + a] += 1.0 / self.sigma_beta2;
                    }
                    cholesky(&mut l, d).expect("spline precision is PD");
                    let mut m = bty.clone();
                    chol_solve(&l, d, &mut m);
                    let bm: f64 = bty.iter().zip(&m).map(|(a, b)| a * b).sum();
                    -0.5 * d as f64 * self.sigma_beta2.ln() - 0.5 * chol_logdet(&l, d)
                        + bm / (2.0 * self.sigma2)
                }
                CovariateRep::Gp { kernel } => {
                    let k = self.k_eff[j];
                    let a_k = kernel.eigvecs().slice(s![.., ..k]);
                    let r = ndarray::ArrayView1::from_shape(self.n(), &self.resid).unwrap();
                    let u = a_k.t().dot(&r);
                    let tau2 = self.tau2[j];
                    let mut logdet1p = 0.0;
                    let mut quad = 0.0;
                    for (ui, &b) in u.iter().zip(&kernel.eigvals()[..k]) {
                        let bf = b.max(EIG_FLOOR);
                        logdet1p += (1.0 + tau2 * b).ln();
                        let dcoef = tau2 * bf / (tau2 * bf + 1.0);
                        quad += dcoef * ui * ui;
                    }
                    -0.5 * logdet1p + quad / (2.0 * self.sigma2)
                }
            };
        log_w1 - log_w0
    }

    fn update_covariate(&mut self, j: usize, force: Option<bool>) -> f64 {
        self.partial_residual(j);
        let prob = self.inclusion_probability_from_resid(j);
        let include = force.unwrap_or_else(|| self.rng.random::<f64>() < prob);
        let n = self.n();
        if include {
            self.gamma[j] = true;
            let sigma = self.sigma2.sqrt();
            match &self.design.reps[j] {
                CovariateRep::Linear { x, xtx } => {
                    let bty: f64 = x
                        .iter()
                        .zip(self.resid.iter())
                        .map(|(xv, rv)| xv * rv)
                        .sum();
                    let prec = xtx + 1.0 / self.sigma_beta2;
                    let noise: f64 = self.rng.sample(StandardNormal);
                    let beta = bty / prec + sigma * noise / prec.sqrt();
                    self.effects[j][0] = beta;
                    for i in 0..n {
                        self.contrib_new[i] = x[i] * beta;
                    }
                }
                CovariateRep::Spline { basis, gram } => {
                    let d = basis.ncols();
                    let mut bty = vec![0.0; d];
                    for c in 0..d {
                        bty[c] = basis
                            .column(c)
                            .iter()
                            .zip(self.resid.iter())
                            .map(|(bv, rv)| bv * rv)
                            .sum();
                    }
                    let mut l = vec![0.0; d * d];
                    for a in 0..d {
                        for b in 0..d {
                            l[a * d + b] = gram[[a, b]];
                        }
                        l[a * d + a] += 1.0 / self.sigma_beta2;
                    }
                    cholesky(&mut l, d).expect("spline precision is PD");
                    let mut m = bty;
                    chol_solve(&l, d, &mut m);
                    let mut noise: Vec<f64> =
                        (0..d).map(|_| self.rng.sample(StandardNormal)).collect();
                    chol_lt_solve(&l, d, &mut noise);
                    for c in 0..d {
                        self.effects[j][c] = m[c] + sigma * noise[c];
                    }
                    let beta = &self.effects[j];
                    for i in 0..n {
                        let mut s = 0.0;
                        for (c, bc) in beta.iter().enumerate() {
                            s += basis[[i, c]] * bc;
                        }
                        self.contrib_new[i] = s;
                    }
                }
                CovariateRep::Gp { kernel } => {
                    let k = self.k_eff[j];
                    let a_k = kernel.eigvecs().slice(s![.., ..k]);
                    let r = ndarray::ArrayView1::from_shape(n, &self.resid).unwrap();
                    let u = a_k.t().dot(&r);
                    let tau2 = self.tau2[j];
                    let mut v = Array1::zeros(k);
                    let mut quad = 0.0;
                    for i in 0..k {
                        let bf = kernel.eigvals()[i].max(EIG_FLOOR);
                        let dcoef = tau2 * bf / (tau2 * bf + 1.0);
                        let noise: f64 = self.rng.sample(StandardNormal);
                        let vi = dcoef * u[i] + sigma * dcoef.sqrt() * noise;
                        v[i] = vi;
                        quad += vi * vi / bf;
                    }
                    let f = a_k.dot(&v.view());
                    self.quad[j] = quad;
                    self.eig_coords[j] = v.to_vec();
                    for i in 0..n {
                        self.effects[j][i] = f[i];
                        self.contrib_new[i] = f[i];
                    }
                }
            }
        } else {
            self.gamma[j] = false;
            self.effects[j].iter_mut().for_each(|v| *v = 0.0);
            self.contrib_new[..n].iter_mut().for_each(|v| *v = 0.0);
            if matches!(self.design.family, PriorFamily::Gp { .. }) {
                self.quad[j] = 0.0;
                self.eig_coords[j].clear();
            }
        }
        for i in 0..n {
            self.cov_fit[i] += self.contrib_new[i] - self.contrib_old[i];
        }
        prob
    }

    /// One full Gibbs cycle, in the fixed update order: latent, covariate
    /// sweep, tau^2 or sigma_beta^2, theta, sigma^2, intercept/treatment.
    pub fn scan(&mut self) {
        self.step_latent();
        for j in 0..self.p() {
            self.step_gamma_beta(j);
        }
        match self.design.family {
            PriorFamily::Gp { .. } => {
                for j in 0..self.p() {
                    self.step_tau2(j);
                }
            }
            _ => self.step_sigma_beta2(),
        }
        self.step_theta();
        self.step_sigma2();
        self.step_intercept_treatment();
    }

    /// Run the full chain and collect thinned post-burn-in draws.
    pub fn run(&mut self, cfg: &McmcConfig) -> PosteriorDraws {
        let n = self.n();
        let p = self.p();
        let b_total = cfg.b();
        let mut draws = Vec::with_capacity(b_total);
        let mut fitted = Array2::zeros((b_total, n));
        let mut inclusion = vec![0.0; p];
        for iter in 0..cfg.n_iter {
            self.scan();
            if iter >= cfg.burn_in && (iter - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                let idx = draws.len();
                if idx == b_total {
                    break;
                }
                // re-sum the active effects so excluded models give exact zeros
                self.recompute_cov_fit();
                for (j, &g) in self.gamma.iter().enumerate() {
                    if g {
                        inclusion[j] += 1.0;
                    }
                }
                let eta = self.fitted_values();
                for i in 0..n {
                    fitted[[idx, i]] = eta[i];
                }
                draws.push(SavedDraw {
                    gamma: self.gamma.clone(),
                    treat_coefs: self.treat_coefs.clone(),
                    cov_fit: self.cov_fit.to_vec(),
                    sigma2: self.sigma2,
                });
            }
        }
        let b = draws.len() as f64;
        inclusion.iter_mut().for_each(|v| *v /= b);
        PosteriorDraws::new(
            self.role,
            self.response_kind,
            self.design.family,
            self.treat_basis.clone(),
            draws,
            fitted,
            inclusion,
        )
    }
}

fn draw_inv_gamma(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    // if g ~ Gamma(a, scale 1/b) then 1/g ~ InvGamma(a, b)
    let g = Gamma::new(a, 1.0 / b).unwrap().sample(rng);
    1.0 / g
}
