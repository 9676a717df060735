//! Appearance embeddings, per-track galleries and embedding providers.
//!
//! Embeddings are stored unit-normalized so that cosine distance reduces to
//! `1 - a·b`. No neural feature extractor lives here: [`synth_embedding`]
//! produces identity-keyed vectors for simulation, and
//! [`histogram_descriptor`] gives a cheap descriptor for real grayscale crops.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

pub const DEFAULT_EMBEDDING_DIM: usize = 128;
pub const DEFAULT_GALLERY_CAPACITY: usize = 100;
pub const HISTOGRAM_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AppearanceError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding contains a non-finite component")]
    NonFinite,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Unit-norm appearance feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Normalize `v` to unit length.
    pub fn new(v: Vec<f32>) -> Result<Self, AppearanceError> {
        if v.is_empty() {
            return Err(AppearanceError::Empty);
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(AppearanceError::NonFinite);
        }
        let norm = v.iter().map(|&c| f64::from(c).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(AppearanceError::ZeroNorm);
        }
        Ok(Self(
            v.into_iter()
                .map(|c| (f64::from(c) / norm) as f32)
                .collect(),
        ))
    }

    fn from_f64(v: &[f64]) -> Result<Self, AppearanceError> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(AppearanceError::NonFinite);
        }
        if norm == 0.0 {
            return Err(AppearanceError::ZeroNorm);
        }
        Ok(Self(v.iter().map(|c| (c / norm) as f32).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }
}

/// `1 - a·b`, clamped to `[0, 2]`.
///
/// Panics if the dimensions differ.
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> f64 {
    assert_eq!(
        a.dim(),
        b.dim(),
        "cosine distance between embeddings of different dimension"
    );
    (1.0 - a.dot(b)).clamp(0.0, 2.0)
}

/// The most recent embeddings observed for one track, oldest evicted first.
#[derive(Debug, Clone)]
pub struct Gallery {
    capacity: usize,
    items: VecDeque<Embedding>,
}

impl Default for Gallery {
    fn default() -> Self {
        Self::new(DEFAULT_GALLERY_CAPACITY)
    }
}

impl Gallery {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "gallery capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(DEFAULT_GALLERY_CAPACITY)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Dimension of the stored embeddings, once the first one is in.
    pub fn dim(&self) -> Option<usize> {
        self.items.front().map(Embedding::dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Embedding> {
        self.items.iter()
    }

    pub fn push(&mut self, e: Embedding) -> Result<(), AppearanceError> {
        if let Some(expected) = self.dim() {
            if expected != e.dim() {
                return Err(AppearanceError::DimensionMismatch {
                    expected,
                    got: e.dim(),
                });
            }
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        Ok(())
    }

    /// Minimum cosine distance from `e` to any gallery member.
    pub fn distance(&self, e: &Embedding) -> Result<f64, AppearanceError> {
        match self.dim() {
            None => Err(AppearanceError::EmptyGallery),
            Some(expected) if expected != e.dim() => Err(AppearanceError::DimensionMismatch {
                expected,
                got: e.dim(),
            }),
            Some(_) => Ok(self
                .items
                .iter()
                .map(|g| cosine_distance(g, e))
                .fold(f64::INFINITY, f64::min)),
        }
    }
}

/// Free-function form of [`Gallery::distance`].
pub fn gallery_distance(g: &Gallery, e: &Embedding) -> Result<f64, AppearanceError> {
    g.distance(e)
}

/// Identity-keyed embedding of dimension [`DEFAULT_EMBEDDING_DIM`].
pub fn synth_embedding<R: Rng + ?Sized>(identity: u64, noise_std: f64, rng: &mut R) -> Embedding {
    synth_embedding_with_dim(identity, noise_std, DEFAULT_EMBEDDING_DIM, rng)
}

/// A fixed unit base vector derived from `identity`, plus isotropic Gaussian
/// noise with per-component standard deviation `noise_std` drawn from `rng`,
/// re-normalized.
pub fn synth_embedding_with_dim<R: Rng + ?Sized>(
    identity: u64,
    noise_std: f64,
    dim: usize,
    rng: &mut R,
) -> Embedding {
    assert!(
        noise_std >= 0.0 && noise_std.is_finite(),
        "noise_std must be finite and >= 0"
    );
    assert!(dim > 0, "embedding dimension must be positive");
    let mut v = identity_base(identity, dim);
    if noise_std > 0.0 {
        let noise = Normal::new(0.0, noise_std).expect("valid normal parameters");
        for c in &mut v {
            *c += noise.sample(rng);
        }
    }
    // Gaussian components are never all zero in practice; retry with a fresh draw if they are.
    Embedding::from_f64(&v)
        .unwrap_or_else(|_| synth_embedding_with_dim(identity, noise_std, dim, rng))
}

fn identity_base(identity: u64, dim: usize) -> Vec<f64> {
    let mut base_rng = ChaCha8Rng::seed_from_u64(splitmix64(identity));
    let v: Vec<f64> = (0..dim)
        .map(|_| StandardNormal.sample(&mut base_rng))
        .collect();
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

/// SplitMix64 finalizer, used to decorrelate small sequential identities.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 16-bin intensity histogram of a grayscale patch, unit-normalized.
pub fn histogram_descriptor(pixels: &[u8]) -> Result<Embedding, AppearanceError> {
    if pixels.is_empty() {
        return Err(AppearanceError::Empty);
    }
    let mut bins = [0.0f64; HISTOGRAM_BINS];
    for &p in pixels {
        bins[usize::from(p) * HISTOGRAM_BINS / 256] += 1.0;
    }
    Embedding::from_f64(&bins)
}
