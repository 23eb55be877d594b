//! Parameter storage, initialization and gradients.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::C64;
use crate::config::ModelConfig;
use crate::quantum::angle_count;

/// Every trainable tensor, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    Embeddings,
    WE,
    ThetaBias,
    B,
    C,
    Phi,
    W1,
    B1,
    W2,
    B2,
    Attn,
}

impl ParamId {
    pub const ALL: [ParamId; 11] = [
        ParamId::Embeddings,
        ParamId::WE,
        ParamId::ThetaBias,
        ParamId::B,
        ParamId::C,
        ParamId::Phi,
        ParamId::W1,
        ParamId::B1,
        ParamId::W2,
        ParamId::B2,
        ParamId::Attn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Embeddings => "embeddings",
            ParamId::WE => "w_e",
            ParamId::ThetaBias => "theta_bias",
            ParamId::B => "b",
            ParamId::C => "c",
            ParamId::Phi => "phi",
            ParamId::W1 => "head.w1",
            ParamId::B1 => "head.b1",
            ParamId::W2 => "head.w2",
            ParamId::B2 => "head.b2",
            ParamId::Attn => "attn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Only the LCU and polynomial coefficients carry imaginary parts.
    pub fn is_complex(self) -> bool {
        matches!(self, ParamId::B | ParamId::C)
    }

    /// AdamW leaves `b` undecayed.
    pub fn decays(self) -> bool {
        self != ParamId::B
    }

    pub fn group(self) -> ParamGroup {
        match self {
            ParamId::Embeddings => ParamGroup::Embeddings,
            ParamId::WE => ParamGroup::WE,
            ParamId::ThetaBias => ParamGroup::ThetaAnsatz,
            ParamId::B => ParamGroup::B,
            ParamId::C => ParamGroup::C,
            ParamId::Phi => ParamGroup::Phi,
            ParamId::W1 | ParamId::B1 | ParamId::W2 | ParamId::B2 => ParamGroup::Head,
            ParamId::Attn => ParamGroup::Attention,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Reporting groups for gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamGroup {
    WE,
    Embeddings,
    ThetaAnsatz,
    B,
    C,
    Phi,
    Head,
    Attention,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 8] = [
        ParamGroup::WE,
        ParamGroup::Embeddings,
        ParamGroup::ThetaAnsatz,
        ParamGroup::B,
        ParamGroup::C,
        ParamGroup::Phi,
        ParamGroup::Head,
        ParamGroup::Attention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::WE => "W_E",
            ParamGroup::Embeddings => "embeddings",
            ParamGroup::ThetaAnsatz => "θ-ansatz",
            ParamGroup::B => "b",
            ParamGroup::C => "c",
            ParamGroup::Phi => "φ",
            ParamGroup::Head => "head",
            ParamGroup::Attention => "attention",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let key = match name {
            "w_e" => "W_E",
            "theta" | "theta-ansatz" | "theta_ansatz" => "θ-ansatz",
            "phi" => "φ",
            other => other,
        };
        Self::ALL.into_iter().find(|g| g.name() == key)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<C64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![C64::new(0.0, 0.0); shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// All model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        ParamId::ALL.into_iter().zip(&self.tensors)
    }

    /// Assembles parameters from tensors in [`ParamId::ALL`] order.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Self {
        assert_eq!(tensors.len(), ParamId::ALL.len());
        Self { tensors }
    }

    pub fn embedding_row(&self, token: usize) -> &[C64] {
        let t = self.get(ParamId::Embeddings);
        let d = t.shape[1];
        &t.data[token * d..(token + 1) * d]
    }

    pub fn vocab_size(&self) -> usize {
        self.get(ParamId::Embeddings).shape[0]
    }

    /// Shapes every tensor must have for `config` and a vocabulary of `vocab` ids.
    pub fn expected_shapes(config: &ModelConfig, vocab: usize) -> Vec<Vec<usize>> {
        let a = angle_count(config.qubits, config.layers);
        let f = config.features();
        ParamId::ALL
            .into_iter()
            .map(|id| match id {
                ParamId::Embeddings => vec![vocab, config.embed_dim],
                ParamId::WE => vec![a, config.embed_dim],
                ParamId::ThetaBias => vec![a],
                ParamId::B => vec![config.window],
                ParamId::C => vec![config.degree + 1],
                ParamId::Phi => vec![angle_count(config.qubits, config.ff_layers)],
                ParamId::W1 => vec![config.hidden, f],
                ParamId::B1 => vec![config.hidden],
                ParamId::W2 => vec![config.classes, config.hidden],
                ParamId::B2 => vec![config.classes],
                ParamId::Attn => vec![1, f],
            })
            .collect()
    }

    /// Number of real scalars, counting complex entries twice.
    pub fn real_count(&self) -> usize {
        self.iter()
            .map(|(id, t)| if id.is_complex() { 2 * t.len() } else { t.len() })
            .sum()
    }
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor {
        shape: vec![rows, cols],
        data: (0..rows * cols)
            .map(|_| C64::new(rng.random_range(-bound..=bound), 0.0))
            .collect(),
    }
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Tensor {
    Tensor {
        shape: vec![len],
        data: (0..len).map(|_| C64::new(rng.random_range(-bound..=bound), 0.0)).collect(),
    }
}

/// Complex number with modulus at most `radius`.
fn disc(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Seeded initialization.
///
/// Projections and the head are Xavier-uniform, circuit angles are
/// `U(−0.01, 0.01)`, `b_j = 1/n` and `c = (0, 1, 0, …)` up to complex noise of
/// modulus `0.01/n` and `0.01` (scaled by `init_noise`), and the attention
/// scores start at zero.
pub fn init_params(config: &ModelConfig, vocab: usize, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = Params::expected_shapes(config, vocab);
    let noise = config.init_noise;
    let n = config.window as f64;
    let tensors = ParamId::ALL
        .into_iter()
        .zip(&shapes)
        .map(|(id, shape)| match id {
            ParamId::Embeddings | ParamId::WE | ParamId::W1 | ParamId::W2 => xavier(&mut rng, shape[0], shape[1]),
            ParamId::ThetaBias | ParamId::Phi => uniform(&mut rng, shape[0], 0.01),
            ParamId::B => Tensor {
                shape: shape.clone(),
                data: (0..shape[0]).map(|_| C64::new(1.0 / n, 0.0) + disc(&mut rng, noise * 0.01 / n)).collect(),
            },
            ParamId::C => Tensor {
                shape: shape.clone(),
                data: (0..shape[0])
                    .map(|k| C64::new(if k == 1 { 1.0 } else { 0.0 }, 0.0) + disc(&mut rng, noise * 0.01))
                    .collect(),
            },
            ParamId::B1 | ParamId::B2 | ParamId::Attn => Tensor::zeros(shape),
        })
        .collect();
    Params { tensors }
}

/// Gradients with the same layout as [`Params`]; embedding rows are sparse.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Grads {
    pub dense: BTreeMap<ParamId, Vec<C64>>,
    pub rows: BTreeMap<usize, Vec<C64>>,
}

impl Grads {
    fn add_into(dst: &mut Vec<C64>, src: &[C64]) {
        if dst.is_empty() {
            dst.extend_from_slice(src);
        } else {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn add_dense(&mut self, id: ParamId, g: &[C64]) {
        Self::add_into(self.dense.entry(id).or_default(), g);
    }

    pub fn add_row(&mut self, token: usize, g: &[C64]) {
        Self::add_into(self.rows.entry(token).or_default(), g);
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (&id, g) in &other.dense {
            self.add_dense(id, g);
        }
        for (&tok, g) in &other.rows {
            self.add_row(tok, g);
        }
    }

    /// Gradient entry for a flat index of `id`, zero if untouched.
    pub fn entry(&self, id: ParamId, flat: usize, embed_dim: usize) -> C64 {
        let zero = C64::new(0.0, 0.0);
        if id == ParamId::Embeddings {
            self.rows
                .get(&(flat / embed_dim))
                .map_or(zero, |r| r[flat % embed_dim])
        } else {
            self.dense.get(&id).map_or(zero, |g| g[flat])
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .values()
            .chain(self.rows.values())
            .all(|g| g.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            qubits: 4,
            window: 8,
            layers: 2,
            ff_layers: 1,
            degree: 3,
            embed_dim: 8,
            hidden: 8,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn shapes_match_config() {
        let cfg = small();
        let p = init_params(&cfg, 12, 0);
        for ((_, t), shape) in p.iter().zip(Params::expected_shapes(&cfg, 12)) {
            assert_eq!(t.shape, shape);
            assert_eq!(t.len(), shape.iter().product::<usize>());
        }
        assert_eq!(p.get(ParamId::WE).shape, vec![32, 8]);
        assert_eq!(p.get(ParamId::Phi).len(), 16);
    }

    #[test]
    fn lcu_mass_near_one() {
        for seed in 0..20 {
            let p = init_params(&small(), 5, seed);
            let mass: f64 = p.get(ParamId::B).data.iter().map(|z| z.norm()).sum();
            assert!((0.98..=1.02).contains(&mass), "seed {seed}: {mass}");
        }
    }

    #[test]
    fn noise_free_init_is_exact() {
        let cfg = ModelConfig {
            init_noise: 0.0,
            ..small()
        };
        let p = init_params(&cfg, 5, 3);
        let c = &p.get(ParamId::C).data;
        assert_eq!(c[1], C64::new(1.0, 0.0));
        assert!(c.iter().enumerate().all(|(k, z)| k == 1 || *z == C64::new(0.0, 0.0)));
        assert!(p.get(ParamId::B).data.iter().all(|z| *z == C64::new(0.125, 0.0)));
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_params(&small(), 9, 4), init_params(&small(), 9, 4));
        assert_ne!(init_params(&small(), 9, 4), init_params(&small(), 9, 5));
    }

    #[test]
    fn real_params_have_zero_imaginary_part() {
        let p = init_params(&small(), 9, 1);
        for (id, t) in p.iter() {
            if !id.is_complex() {
                assert!(t.data.iter().all(|z| z.im == 0.0), "{}", id.name());
            }
        }
        let angles = &p.get(ParamId::Phi).data;
        assert!(angles.iter().all(|z| z.re.abs() <= 0.01));
    }

    #[test]
    fn group_names_parse() {
        for g in ParamGroup::ALL {
            assert_eq!(ParamGroup::from_name(g.name()), Some(g));
        }
        assert_eq!(ParamGroup::from_name("phi"), Some(ParamGroup::Phi));
    }
}
