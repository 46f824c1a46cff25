use rand::Rng;

use crate::model::ChannelModel;

/// Draws `gamma_k` given `gamma_{k-1}`. Exactly one uniform variate is
/// consumed per call, so streams stay aligned across channel kinds.
pub fn channel_step<R: Rng + ?Sized>(channel: &ChannelModel, previous: bool, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < channel.success_probability(previous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fraction(ch: ChannelModel, draws: usize) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut g = true;
        let mut hits = 0usize;
        for _ in 0..draws {
            g = channel_step(&ch, g, &mut rng);
            hits += g as usize;
        }
        hits as f64 / draws as f64
    }

    #[test]
    fn long_run_fractions() {
        let n = 1_000_000;
        let sigma = (0.8f64 * 0.2 / n as f64).sqrt();
        assert!((fraction(ChannelModel::iid(0.8).unwrap(), n) - 0.8).abs() < 3.0 * sigma);
        assert!((fraction(ChannelModel::markov(0.2, 0.8).unwrap(), n) - 0.8).abs() < 3.0 * sigma);
        assert_eq!(fraction(ChannelModel::markov(0.0, 1.0).unwrap(), 1000), 1.0);
    }
}
