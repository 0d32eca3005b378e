//! BPSK over the binary-input AWGN channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::code::Code;
use crate::gf2::BitVector;

/// Lower clamp for noise variance estimates.
pub const SIGMA2_FLOOR: f64 = 1e-6;

/// Noise level for unit-energy antipodal signalling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub sigma2: f64,
    pub ebn0_db: f64,
    pub rate: f64,
}

impl ChannelParams {
    /// `sigma2 = 1 / (2 R 10^(Eb/N0 / 10))`.
    pub fn from_ebn0_db(ebn0_db: f64, rate: f64) -> Self {
        assert!(rate > 0.0 && rate <= 1.0, "rate {rate} out of range");
        let sigma2 = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
        ChannelParams {
            sigma2,
            ebn0_db,
            rate,
        }
    }

    pub fn from_sigma2(sigma2: f64, rate: f64) -> Self {
        assert!(sigma2 > 0.0, "noise variance must be positive");
        ChannelParams {
            sigma2,
            ebn0_db: sigma2_to_ebn0_db(sigma2, rate),
            rate,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

pub fn sigma2_to_ebn0_db(sigma2: f64, rate: f64) -> f64 {
    10.0 * (1.0 / (2.0 * rate * sigma2)).log10()
}

/// Identifies an independent random stream: the same `(seed, index)` always
/// yields the same draws, whichever worker consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// `x_i = 2 c_i - 1`.
pub fn modulate(c: &BitVector) -> Vec<f64> {
    c.iter().map(|b| if b { 1.0 } else { -1.0 }).collect()
}

/// Adds i.i.d. `N(0, sigma2)` noise.
pub fn transmit(x: &[f64], params: &ChannelParams, rng: &mut impl Rng) -> Vec<f64> {
    let sigma = params.sigma();
    x.iter()
        .map(|&xi| {
            let w: f64 = rng.sample(StandardNormal);
            xi + sigma * w
        })
        .collect()
}

/// Moment estimate `max(eps, mean(y^2) - 1)`, relying on `E[y^2] = 1 + sigma2`.
pub fn estimate_sigma2(y: &[f64]) -> f64 {
    assert!(!y.is_empty(), "cannot estimate noise from an empty block");
    let power = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    (power - 1.0).max(SIGMA2_FLOOR)
}

pub fn random_bits(len: usize, rng: &mut impl Rng) -> BitVector {
    BitVector::from_bits((0..len).map(|_| rng.random::<bool>()))
}

/// One simulated block: a uniformly random message, its codeword and the
/// noisy channel output.
#[derive(Debug, Clone)]
pub struct Reception {
    pub message: BitVector,
    pub codeword: BitVector,
    pub y: Vec<f64>,
}

/// Draws the message bits and then the noise from the same stream.
pub fn draw_reception(code: &Code, params: &ChannelParams, stream: RngStream) -> Reception {
    let mut rng = stream.rng();
    let message = random_bits(code.spec.k, &mut rng);
    let codeword = code
        .encode(&message)
        .expect("message length matches the generator");
    let y = transmit(&modulate(&codeword), params, &mut rng);
    Reception {
        message,
        codeword,
        y,
    }
}
