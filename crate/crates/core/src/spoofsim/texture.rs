//! Seeded value noise on the unit annulus, periodic in angle.

use std::f64::consts::TAU;

/// SplitMix64 finalizer; also the stable hash behind every derived seed.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive combination of several words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x005e_ed0f_1215_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise over `(rho, theta)` with `rho` in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct AnnulusNoise {
    seed: u64,
    weights: Vec<f64>,
    angular_cells: usize,
    radial_cells: usize,
}

impl AnnulusNoise {
    /// Octave `o` uses `angular_cells * 2^o` cells around and
    /// `radial_cells * 2^o` across the annulus.
    pub fn new(seed: u64, weights: &[f64], angular_cells: usize, radial_cells: usize) -> Self {
        Self { seed, weights: weights.to_vec(), angular_cells, radial_cells }
    }

    fn lattice(&self, octave: usize, i: usize, j: usize) -> f64 {
        let h = derive_seed(&[self.seed, octave as u64, i as u64, j as u64]);
        (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Weighted sum of octaves, normalized by the total weight; roughly in
    /// `[-1, 1]`.
    pub fn sample(&self, rho: f64, theta: f64) -> f64 {
        let total: f64 = self.weights.iter().map(|w| w.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let rho = rho.clamp(0.0, 1.0);
        let turn = (theta / TAU).rem_euclid(1.0);
        let mut acc = 0.0;
        for (o, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let na = self.angular_cells << o;
            let nr = self.radial_cells << o;
            let u = turn * na as f64;
            let v = rho * nr as f64;
            let (i0, j0) = (u.floor() as usize % na, (v.floor() as usize).min(nr - 1));
            let (fu, fv) = (smoothstep(u - u.floor()), smoothstep((v - j0 as f64).min(1.0)));
            let i1 = (i0 + 1) % na;
            let a = self.lattice(o, i0, j0) * (1.0 - fu) + self.lattice(o, i1, j0) * fu;
            let b = self.lattice(o, i0, j0 + 1) * (1.0 - fu) + self.lattice(o, i1, j0 + 1) * fu;
            acc += w * (a * (1.0 - fv) + b * fv);
        }
        acc / total
    }
}
