use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ring::{CoreTensor, TensorRing};
use crate::scalar::C;

/// Ring with i.i.d. uniform complex entries in the unit square.
pub(crate) fn random_ring(n: usize, chi: usize, seed: u64) -> TensorRing<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slice = |rng: &mut ChaCha8Rng| -> Vec<C<f64>> {
        (0..chi * chi).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let cores = (0..n)
        .map(|_| {
            let z = slice(&mut rng);
            let o = slice(&mut rng);
            CoreTensor::from_slices(chi, chi, &z, &o).unwrap()
        })
        .collect();
    TensorRing::from_cores(cores).unwrap()
}
