use serde::Serialize;

use crate::numkit::{cholesky, gram_schmidt, solve_spd, Matrix, SeededRng};

use super::SimError;

/// Retries allowed when the noise covariance fails the Cholesky check.
pub const PD_RETRIES: usize = 20;

/// Denominators of model (v) closer to zero than this are redrawn.
pub const DENOMINATOR_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OutcomeModel {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
    #[serde(rename = "iii")]
    III,
    #[serde(rename = "iv")]
    IV,
    #[serde(rename = "v")]
    V,
}

impl OutcomeModel {
    pub const ALL: [OutcomeModel; 5] = [Self::I, Self::II, Self::III, Self::IV, Self::V];

    /// Number of indices the outcome depends on.
    pub fn dimension(self) -> usize {
        match self {
            Self::I | Self::II | Self::III => 1,
            Self::IV | Self::V => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::I => "i",
            Self::II => "ii",
            Self::III => "iii",
            Self::IV => "iv",
            Self::V => "v",
        }
    }
}

impl std::fmt::Display for OutcomeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for OutcomeModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Self::I),
            "ii" | "2" => Ok(Self::II),
            "iii" | "3" => Ok(Self::III),
            "iv" | "4" => Ok(Self::IV),
            "v" | "5" => Ok(Self::V),
            other => Err(format!("unknown outcome model `{other}` (expected i, ii, iii, iv or v)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentKind {
    Normal,
    Bernoulli,
}

impl InstrumentKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Bernoulli => "bernoulli",
        }
    }

    /// Per-entry instrument variance.
    pub fn variance(self) -> f64 {
        match self {
            Self::Normal => 1.0,
            Self::Bernoulli => 0.25,
        }
    }
}

impl std::fmt::Display for InstrumentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for InstrumentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "continuous" | "cont" => Ok(Self::Normal),
            "bernoulli" | "binary" => Ok(Self::Bernoulli),
            other => Err(format!("unknown instrument kind `{other}` (expected normal or bernoulli)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub model: OutcomeModel,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Nonzero rows of `B`.
    pub s: usize,
    /// Nonzero instruments per covariate.
    pub r: usize,
    pub z_kind: InstrumentKind,
    /// `(a, b)` for `Γ` entries drawn from `U([-b,-a] ∪ [a,b])`.
    pub gamma_range: (f64, f64),
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(model: OutcomeModel, n: usize, p: usize, q: usize) -> Self {
        Self {
            model,
            n,
            p,
            q,
            s: 5,
            r: 5,
            z_kind: InstrumentKind::Normal,
            gamma_range: (0.75, 1.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::InvalidConfig(what.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.s == 0 || self.s > self.p {
            return bad("s must lie in 1..=p");
        }
        if self.r == 0 || self.r > self.q {
            return bad("r must lie in 1..=q");
        }
        if self.model.dimension() > self.s {
            return bad("s must be at least the model dimension");
        }
        if self.p < self.s + 5 {
            return bad("p must exceed s by at least 5 (extra endogeneity entries)");
        }
        let (a, b) = self.gamma_range;
        if !(a >= 0.0 && b >= a && b.is_finite()) {
            return bad("gamma_range must satisfy 0 <= a <= b");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `p × d`.
    pub b: Matrix,
    /// `q × p`.
    pub gamma: Matrix,
    /// `(p+1) × (p+1)` covariance of `(U, ε)`.
    pub sigma: Matrix,
    /// Lower Cholesky factor of `sigma`.
    pub sigma_chol: Matrix,
    /// True support, sorted.
    pub support: Vec<usize>,
    /// Non-support positions holding the 0.3 entries.
    pub extra_positions: Vec<usize>,
    /// Draws needed before `sigma` passed the Cholesky check.
    pub attempts: usize,
}

impl GroundTruth {
    pub fn p(&self) -> usize {
        self.b.rows()
    }

    pub fn d(&self) -> usize {
        self.b.cols()
    }

    /// `Σ_X = ΓᵀΣ_ZΓ + Σ_U`.
    pub fn sigma_x(&self, z_kind: InstrumentKind) -> Matrix {
        let p = self.p();
        let mut sx = self.gamma.tr_matmul(&self.gamma);
        sx.scale_in_place(z_kind.variance());
        for j in 0..p {
            for i in 0..p {
                sx[(i, j)] += self.sigma[(i, j)];
            }
        }
        sx
    }

    /// `Σ_{X,ε} = Σ_{U,ε}`.
    pub fn sigma_x_eps(&self) -> Vec<f64> {
        let p = self.p();
        (0..p).map(|i| self.sigma[(i, p)]).collect()
    }

    /// Angle (radians) between `Σ_X⁻¹Σ_{X,ε}` and `col(B)`.
    pub fn endogeneity_angle(&self, z_kind: InstrumentKind) -> Result<f64, SimError> {
        let w = solve_spd(&self.sigma_x(z_kind), &self.sigma_x_eps())?;
        let proj = crate::numkit::projection_matrix(&self.b)?;
        let pw = proj.mul_vec(&w);
        let norm_w = crate::numkit::norm2(&w);
        if norm_w == 0.0 {
            return Ok(0.0);
        }
        let cos = (crate::numkit::norm2(&pw) / norm_w).clamp(0.0, 1.0);
        Ok(cos.acos())
    }
}

/// Draws `B`, `Γ` and the noise covariance.
pub fn make_truth(config: &SimulationConfig, rng: &mut SeededRng) -> Result<GroundTruth, SimError> {
    config.validate()?;
    let (p, q, s, d) = (config.p, config.q, config.s, config.model.dimension());

    let support = rng.sample_without_replacement(p, s);
    let mut b = Matrix::zeros(p, d);
    for k in 0..d {
        for &i in &support {
            b[(i, k)] = rng.symmetric_band(0.5, 1.0);
        }
    }
    if d > 1 {
        b = gram_schmidt(&b)?;
    }

    let (ga, gb) = config.gamma_range;
    let mut gamma = Matrix::zeros(q, p);
    for j in 0..p {
        for i in rng.sample_without_replacement(q, config.r) {
            gamma[(i, j)] = rng.symmetric_band(ga, gb);
        }
    }

    let mut sigma_u = Matrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            sigma_u[(i, j)] = 0.2_f64.powi((i as i32 - j as i32).abs());
        }
    }
    // Σ_{S,p+1} = −Σ_{S,S} β_{1S}
    let mut cov_ue = vec![0.0; p];
    for &i in &support {
        cov_ue[i] = -support.iter().map(|&k| sigma_u[(i, k)] * b[(k, 0)]).sum::<f64>();
    }
    let inflation = rng.uniform_range(0.0, 0.2);
    let outside: Vec<usize> = (0..p).filter(|i| !support.contains(i)).collect();

    for attempt in 1..=PD_RETRIES {
        let mut extra: Vec<usize> = rng
            .sample_without_replacement(outside.len(), 5)
            .into_iter()
            .map(|k| outside[k])
            .collect();
        extra.sort_unstable();
        let mut c = cov_ue.clone();
        for &i in &extra {
            c[i] = 0.3;
        }
        let quad = match solve_spd(&sigma_u, &c) {
            Ok(w) => crate::numkit::dot(&w, &c),
            Err(_) => continue,
        };
        let mut sigma = Matrix::zeros(p + 1, p + 1);
        for j in 0..p {
            for i in 0..p {
                sigma[(i, j)] = sigma_u[(i, j)];
            }
            sigma[(j, p)] = c[j];
            sigma[(p, j)] = c[j];
        }
        sigma[(p, p)] = quad + inflation;
        if let Ok(l) = cholesky(&sigma) {
            return Ok(GroundTruth {
                b,
                gamma,
                sigma,
                sigma_chol: l,
                support,
                extra_positions: extra,
                attempts: attempt,
            });
        }
    }
    Err(SimError::CannotAchievePD {
        attempts: PD_RETRIES,
    })
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    /// `n × p`, centered.
    pub x: Matrix,
    /// `n × q`, centered.
    pub z: Matrix,
    pub truth: Option<GroundTruth>,
    /// Model (v) observations redrawn for a vanishing denominator.
    pub resampled: usize,
}

fn draw_row(
    config: &SimulationConfig,
    truth: &GroundTruth,
    rng: &mut SeededRng,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let (p, q) = (config.p, config.q);
    let z: Vec<f64> = (0..q)
        .map(|_| match config.z_kind {
            InstrumentKind::Normal => rng.normal(),
            InstrumentKind::Bernoulli => f64::from(u8::from(rng.bernoulli(0.5))),
        })
        .collect();
    let e: Vec<f64> = (0..=p).map(|_| rng.normal()).collect();
    let l = &truth.sigma_chol;
    let mut noise = vec![0.0; p + 1];
    for j in 0..=p {
        let ej = e[j];
        if ej != 0.0 {
            for (ni, lij) in noise[j..].iter_mut().zip(&l.col(j)[j..]) {
                *ni += lij * ej;
            }
        }
    }
    let eps = noise[p];
    let mut x = noise[..p].to_vec();
    for (zi, &zv) in z.iter().enumerate() {
        if zv != 0.0 {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += truth.gamma[(zi, j)] * zv;
            }
        }
    }
    (z, noise[..p].to_vec(), x, eps)
}

/// Index values `Xβ_k` for one row.
fn indices(x: &[f64], b: &Matrix) -> Vec<f64> {
    b.columns().map(|c| crate::numkit::dot(x, c)).collect()
}

/// Response of `model` given the index values and the error.
pub fn outcome(model: OutcomeModel, index: &[f64], eps: f64) -> f64 {
    match model {
        OutcomeModel::I => index[0] + eps,
        OutcomeModel::II => (index[0] + eps).exp(),
        OutcomeModel::III => (index[0] + eps).sinh(),
        OutcomeModel::IV => index[1] * (index[0] + eps).exp(),
        OutcomeModel::V => (index[0] + eps).exp() / (1.5 + index[1] + eps),
    }
}

/// Samples one data set; `X`, `Z` and `y` are centered afterwards.
pub fn generate(
    config: &SimulationConfig,
    truth: &GroundTruth,
    rng: &mut SeededRng,
) -> Result<Dataset, SimError> {
    config.validate()?;
    if truth.p() != config.p || truth.gamma.rows() != config.q || truth.d() != config.model.dimension() {
        return Err(SimError::InvalidConfig(
            "ground truth does not match the configuration".into(),
        ));
    }
    let n = config.n;
    let mut z_rows = Vec::with_capacity(n);
    let mut x_rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut resampled = 0;
    while y.len() < n {
        let (z, _u, x, eps) = draw_row(config, truth, rng);
        let idx = indices(&x, &truth.b);
        if config.model == OutcomeModel::V && (1.5 + idx[1] + eps).abs() < DENOMINATOR_GUARD {
            resampled += 1;
            if resampled > 100 * n {
                return Err(SimError::NonFinite);
            }
            continue;
        }
        let v = outcome(config.model, &idx, eps);
        if !v.is_finite() {
            return Err(SimError::NonFinite);
        }
        y.push(v);
        z_rows.push(z);
        x_rows.push(x);
    }
    let mut x = Matrix::from_rows(&x_rows);
    let mut z = Matrix::from_rows(&z_rows);
    x.center_columns();
    z.center_columns();
    crate::numkit::center(&mut y);
    Ok(Dataset {
        y,
        x,
        z,
        truth: Some(truth.clone()),
        resampled,
    })
}

/// Truth and data for replicate `index` of a configuration: the truth
/// comes from one child stream and the data from another, so models of
/// equal dimension share truths and noise draws.
pub fn replicate(config: &SimulationConfig, index: u64) -> Result<Dataset, SimError> {
    let base = SeededRng::new(config.seed).child(index);
    let mut truth_rng = base.child(0);
    let mut data_rng = base.child(1);
    let truth = make_truth(config, &mut truth_rng)?;
    generate(config, &truth, &mut data_rng)
}
