//! Synthetic channel generation and UE-side combining.
//!
//! Channels are drawn from a seeded ChaCha stream, so identical
//! `(dims, scale, seed)` triples give bit-identical matrices on every platform.
//! The effective layer channel `H̃` produced here feeds every precoder in the
//! crate.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FlatPrecError, Result};
use crate::linalg::{c, fix_column_phases, CMat};

/// System dimensions: `N` BS antennas, `K` UEs with `M` antennas, `L` layers each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SystemDims {
    pub n_tx: usize,
    pub n_ue: usize,
    pub n_rx: usize,
    pub n_layers: usize,
}

impl SystemDims {
    pub fn new(n_tx: usize, n_ue: usize, n_rx: usize, n_layers: usize) -> Result<Self> {
        let dims = Self {
            n_tx,
            n_ue,
            n_rx,
            n_layers,
        };
        dims.validate()?;
        Ok(dims)
    }

    /// Checks `N ≥ KM ≥ KL` and that every count is positive.
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_ue == 0 || self.n_rx == 0 || self.n_layers == 0 {
            return Err(FlatPrecError::InvalidInput(format!("all dimensions must be ≥ 1: {self:?}")));
        }
        if self.n_tx < self.n_ue * self.n_rx || self.n_rx < self.n_layers {
            return Err(FlatPrecError::InvalidInput(format!(
                "dimensions must satisfy N ≥ K·M ≥ K·L: {self:?}"
            )));
        }
        Ok(())
    }

    /// Total number of layers `KL`.
    pub fn total_layers(&self) -> usize {
        self.n_ue * self.n_layers
    }
}

/// Per-UE channel matrices `H_k` (`M × N`), noise variance and priority weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub per_ue: Vec<CMat>,
    pub noise_var: f64,
    pub weights: Vec<f64>,
}

impl ChannelSet {
    pub fn new(per_ue: Vec<CMat>, noise_var: f64, weights: Vec<f64>) -> Result<Self> {
        let set = Self {
            per_ue,
            noise_var,
            weights,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_ue.is_empty() {
            return Err(FlatPrecError::InvalidInput("channel set has no UEs".into()));
        }
        let n = self.per_ue[0].ncols();
        if self.per_ue.iter().any(|h| h.ncols() != n) {
            return Err(FlatPrecError::DimensionMismatch(
                "all H_k must have the same number of columns".into(),
            ));
        }
        if self
            .per_ue
            .iter()
            .flat_map(|h| h.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(FlatPrecError::InvalidInput("channel has non-finite entries".into()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(FlatPrecError::InvalidInput(format!(
                "noise variance must be positive, got {}",
                self.noise_var
            )));
        }
        if self.weights.len() != self.per_ue.len() {
            return Err(FlatPrecError::DimensionMismatch(format!(
                "{} weights for {} UEs",
                self.weights.len(),
                self.per_ue.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
            || self.weights.iter().all(|w| *w == 0.0)
        {
            return Err(FlatPrecError::InvalidInput(
                "weights must be non-negative and not all zero".into(),
            ));
        }
        Ok(())
    }

    pub fn n_tx(&self) -> usize {
        self.per_ue[0].ncols()
    }

    pub fn n_ue(&self) -> usize {
        self.per_ue.len()
    }

    pub fn n_rx(&self) -> usize {
        self.per_ue[0].nrows()
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Result<Self> {
        self.noise_var = noise_var;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    /// Stacked channel `H = [H_1ᵀ, …, H_Kᵀ]ᵀ` of shape `KM × N`.
    pub fn stacked(&self) -> CMat {
        let m = self.n_rx();
        let mut h = CMat::zeros(self.n_ue() * m, self.n_tx());
        for (k, hk) in self.per_ue.iter().enumerate() {
            h.rows_mut(k * m, m).copy_from(hk);
        }
        h
    }

    /// Writes the channel as a text matrix file.
    ///
    /// Layout: a `flatprec-channel,v1` tag line, then `n_tx,n_ue,n_rx,seed,noise_var`,
    /// then `weights,α_1,…,α_K`, then one line per row of each `H_k` (UE-major,
    /// row-major) with interleaved `re,im` pairs.
    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        writeln!(out, "flatprec-channel,v1")?;
        writeln!(
            out,
            "{},{},{},{},{:e}",
            self.n_tx(),
            self.n_ue(),
            self.n_rx(),
            seed,
            self.noise_var
        )?;
        let w: Vec<String> = self.weights.iter().map(|x| format!("{x:e}")).collect();
        writeln!(out, "weights,{}", w.join(","))?;
        for h in &self.per_ue {
            for i in 0..h.nrows() {
                let row: Vec<String> = h
                    .row(i)
                    .iter()
                    .flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)])
                    .collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Ok(())
    }

    /// Reads a file written by [`ChannelSet::write_csv`]; returns the set and its seed.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(Self, u64)> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| FlatPrecError::Parse(format!("missing {what} line")))
        };
        let tag = next("tag")?;
        if tag.trim() != "flatprec-channel,v1" {
            return Err(FlatPrecError::Parse(format!("unexpected tag {tag:?}")));
        }
        let header = next("header")?;
        let f: Vec<&str> = header.trim().split(',').collect();
        if f.len() != 5 {
            return Err(FlatPrecError::Parse("header needs 5 fields".into()));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| FlatPrecError::Parse(format!("{s:?}: {e}")))
        };
        let (n, k, m) = (parse_usize(f[0])?, parse_usize(f[1])?, parse_usize(f[2])?);
        let seed = f[3]
            .parse::<u64>()
            .map_err(|e| FlatPrecError::Parse(format!("seed: {e}")))?;
        let noise_var = parse_f64(f[4])?;
        let wline = next("weights")?;
        let mut wf = wline.trim().split(',');
        if wf.next() != Some("weights") {
            return Err(FlatPrecError::Parse("expected weights line".into()));
        }
        let weights = wf.map(parse_f64).collect::<Result<Vec<_>>>()?;
        let mut per_ue = Vec::with_capacity(k);
        for _ in 0..k {
            let mut h = CMat::zeros(m, n);
            for i in 0..m {
                let line = next("matrix row")?;
                let vals = line
                    .trim()
                    .split(',')
                    .map(parse_f64)
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != 2 * n {
                    return Err(FlatPrecError::Parse(format!(
                        "row has {} values, expected {}",
                        vals.len(),
                        2 * n
                    )));
                }
                for j in 0..n {
                    h[(i, j)] = c(vals[2 * j], vals[2 * j + 1]);
                }
            }
            per_ue.push(h);
        }
        Ok((Self::new(per_ue, noise_var, weights)?, seed))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| FlatPrecError::Parse(format!("{s:?}: {e}")))
}

fn complex_gaussian(rng: &mut ChaCha8Rng, var: f64) -> num_complex::Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(s * re, s * im)
}

/// I.i.d. Rayleigh channels: every entry of every `H_k` is `CN(0, snr_scale)`.
///
/// Noise variance is 1 and weights are all 1; callers adjust with
/// [`ChannelSet::with_noise_var`] / [`ChannelSet::with_weights`].
pub fn gen_rayleigh(dims: SystemDims, snr_scale: f64, seed: u64) -> Result<ChannelSet> {
    gen_rayleigh_with_gains(dims, &vec![snr_scale; dims.n_ue], seed)
}

/// Like [`gen_rayleigh`] with a separate large-scale gain per UE.
pub fn gen_rayleigh_with_gains(dims: SystemDims, scales: &[f64], seed: u64) -> Result<ChannelSet> {
    dims.validate()?;
    if scales.len() != dims.n_ue {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "{} scales for {} UEs",
            scales.len(),
            dims.n_ue
        )));
    }
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(FlatPrecError::InvalidInput("channel scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_ue = scales
        .iter()
        .map(|&s| CMat::from_fn(dims.n_rx, dims.n_tx, |_, _| complex_gaussian(&mut rng, s)))
        .collect();
    ChannelSet::new(per_ue, 1.0, vec![1.0; dims.n_ue])
}

/// Geometric multipath channels: each `H_k` is a sum of `n_paths` plane waves
/// between half-wavelength ULAs, with angles uniform in `[-π/2, π/2]` and
/// `CN(0, 1)` path gains, normalized so `E|h_ij|² = snr_scale`.
pub fn gen_multipath(dims: SystemDims, snr_scale: f64, n_paths: usize, seed: u64) -> Result<ChannelSet> {
    dims.validate()?;
    if !(snr_scale > 0.0 && snr_scale.is_finite()) {
        return Err(FlatPrecError::InvalidInput("channel scale must be positive".into()));
    }
    if n_paths == 0 {
        return Err(FlatPrecError::InvalidInput("need at least one path".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = (snr_scale / n_paths as f64).sqrt();
    let steer = |len: usize, angle: f64| -> Vec<num_complex::Complex64> {
        (0..len)
            .map(|i| num_complex::Complex64::from_polar(1.0, PI * i as f64 * angle.sin()))
            .collect()
    };
    let mut per_ue = Vec::with_capacity(dims.n_ue);
    for _ in 0..dims.n_ue {
        let mut h = CMat::zeros(dims.n_rx, dims.n_tx);
        for _ in 0..n_paths {
            let aod = rng.random_range(-PI / 2.0..PI / 2.0);
            let aoa = rng.random_range(-PI / 2.0..PI / 2.0);
            let g = complex_gaussian(&mut rng, 1.0) * amp;
            let at = steer(dims.n_tx, aod);
            let ar = steer(dims.n_rx, aoa);
            for i in 0..dims.n_rx {
                for j in 0..dims.n_tx {
                    h[(i, j)] += g * ar[i] * at[j].conj();
                }
            }
        }
        per_ue.push(h);
    }
    ChannelSet::new(per_ue, 1.0, vec![1.0; dims.n_ue])
}

/// The `L` dominant left singular vectors of `H_k` (`M × L`, orthonormal columns).
///
/// Each column is rotated so its largest-magnitude entry is real and positive.
pub fn eigen_combiner(h_k: &CMat, n_layers: usize) -> Result<CMat> {
    let m = h_k.nrows();
    if n_layers == 0 || n_layers > m {
        return Err(FlatPrecError::InvalidInput(format!(
            "need 1 ≤ L ≤ M, got L = {n_layers}, M = {m}"
        )));
    }
    let svd = h_k.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| FlatPrecError::NumericalBreakdown("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let s_max = sv[idx[0]];
    let tol = 1e-12 * s_max.max(f64::MIN_POSITIVE) * (h_k.nrows().max(h_k.ncols()) as f64);
    if s_max == 0.0 || idx.len() < n_layers || sv[idx[n_layers - 1]] <= tol {
        return Err(FlatPrecError::RankDeficient(format!(
            "channel rank below {n_layers} layers"
        )));
    }
    let mut out = CMat::zeros(m, n_layers);
    for (j, &i) in idx.iter().take(n_layers).enumerate() {
        out.set_column(j, &u.column(i));
    }
    fix_column_phases(&mut out);
    Ok(out)
}

/// Effective layer channel `H̃` (`KL × N`) with its combiners and layer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub h_tilde: CMat,
    pub combiners: Vec<CMat>,
    pub layer_weights: Vec<f64>,
    pub noise_var: f64,
    pub n_layers: usize,
}

impl EffectiveChannel {
    /// Builds `H̃` with eigen-beamforming combiners on every UE.
    pub fn eigen(ch: &ChannelSet, n_layers: usize) -> Result<Self> {
        let combiners = ch
            .per_ue
            .iter()
            .map(|h| eigen_combiner(h, n_layers))
            .collect::<Result<Vec<_>>>()?;
        effective_channel(ch, &combiners)
    }

    pub fn total_layers(&self) -> usize {
        self.h_tilde.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_tilde.ncols()
    }

    pub fn n_ue(&self) -> usize {
        self.combiners.len()
    }
}

/// Stacks `H̃_k = Ũ_kᴴ H_k` and replicates UE weights across their layers.
pub fn effective_channel(ch: &ChannelSet, combiners: &[CMat]) -> Result<EffectiveChannel> {
    ch.validate()?;
    if combiners.len() != ch.n_ue() {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "{} combiners for {} UEs",
            combiners.len(),
            ch.n_ue()
        )));
    }
    let l = combiners[0].ncols();
    if l == 0 || combiners.iter().any(|u| u.nrows() != ch.n_rx() || u.ncols() != l) {
        return Err(FlatPrecError::DimensionMismatch(format!(
            "combiners must all be {} × {}",
            ch.n_rx(),
            l
        )));
    }
    let mut h_tilde = CMat::zeros(ch.n_ue() * l, ch.n_tx());
    let mut layer_weights = Vec::with_capacity(ch.n_ue() * l);
    for (k, (u, h)) in combiners.iter().zip(&ch.per_ue).enumerate() {
        h_tilde.rows_mut(k * l, l).copy_from(&(u.adjoint() * h));
        layer_weights.extend(std::iter::repeat_n(ch.weights[k], l));
    }
    Ok(EffectiveChannel {
        h_tilde,
        combiners: combiners.to_vec(),
        layer_weights,
        noise_var: ch.noise_var,
        n_layers: l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, fro_norm_sq};

    fn dims(n: usize, k: usize, m: usize, l: usize) -> SystemDims {
        SystemDims::new(n, k, m, l).unwrap()
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let a = gen_rayleigh(dims(8, 2, 2, 1), 1.0, 7).unwrap();
        let b = gen_rayleigh(dims(8, 2, 2, 1), 1.0, 7).unwrap();
        assert_eq!(a, b);
        let other = gen_rayleigh(dims(8, 2, 2, 1), 1.0, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rayleigh_second_moment() {
        let d = dims(4, 1, 1, 1);
        let mut acc = 0.0;
        let draws = 25_000;
        for i in 0..draws {
            let ch = gen_rayleigh(d, 1.0, 3 + i as u64).unwrap();
            acc += ch.per_ue[0].iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / (4 * draws) as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |h|² = {mean}");
    }

    #[test]
    fn zero_scale_rejected() {
        assert!(gen_rayleigh(dims(4, 1, 1, 1), 0.0, 1).is_err());
        assert!(gen_multipath(dims(4, 1, 1, 1), 0.0, 3, 1).is_err());
    }

    #[test]
    fn dims_invariants() {
        assert!(SystemDims::new(4, 2, 3, 1).is_err());
        assert!(SystemDims::new(8, 2, 2, 3).is_err());
        assert!(SystemDims::new(8, 0, 1, 1).is_err());
        assert!(SystemDims::new(8, 2, 4, 4).is_ok());
    }

    #[test]
    fn combiner_of_identity() {
        let h = CMat::identity(3, 3);
        let u = eigen_combiner(&h, 3).unwrap();
        let gram = u.adjoint() * &u;
        assert!(fro_norm_sq(&(gram - CMat::identity(3, 3))) < 1e-20);
        // Each column is a signed unit basis vector with positive real lead.
        for col in u.column_iter() {
            let big: Vec<_> = col.iter().filter(|z| z.norm() > 0.5).collect();
            assert_eq!(big.len(), 1);
            assert!((*big[0] - cr(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn combiner_maximizes_gain() {
        let ch = gen_rayleigh(dims(8, 1, 2, 1), 1.0, 11).unwrap();
        let h = &ch.per_ue[0];
        let u = eigen_combiner(h, 1).unwrap();
        let gain = (u.adjoint() * h).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // Power-iteration oracle on H Hᴴ.
        let g = h * h.adjoint();
        let mut v = crate::linalg::CVec::from_element(2, cr(1.0));
        for _ in 0..500 {
            v = &g * &v;
            let n = v.norm();
            v /= cr(n);
        }
        let oracle = (v.adjoint() * h).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((gain - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn zero_channel_is_rank_deficient() {
        let h = CMat::zeros(2, 4);
        assert!(matches!(eigen_combiner(&h, 1), Err(FlatPrecError::RankDeficient(_))));
    }

    #[test]
    fn effective_channel_siso_rows() {
        let ch = gen_rayleigh(dims(4, 3, 1, 1), 1.0, 5).unwrap();
        let combiners = vec![CMat::from_element(1, 1, cr(1.0)); 3];
        let eff = effective_channel(&ch, &combiners).unwrap();
        assert_eq!(eff.h_tilde, ch.stacked());
    }

    #[test]
    fn layer_weights_replicated() {
        let ch = gen_rayleigh(dims(8, 2, 2, 2), 1.0, 5)
            .unwrap()
            .with_weights(vec![1.0, 2.0])
            .unwrap();
        let eff = EffectiveChannel::eigen(&ch, 2).unwrap();
        assert_eq!(eff.layer_weights, vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn effective_gram_blocks() {
        let ch = gen_rayleigh(dims(10, 2, 3, 2), 1.0, 9).unwrap();
        let eff = EffectiveChannel::eigen(&ch, 2).unwrap();
        let gram = &eff.h_tilde * eff.h_tilde.adjoint();
        for k in 0..2 {
            let u = &eff.combiners[k];
            let h = &ch.per_ue[k];
            let expected = u.adjoint() * h * h.adjoint() * u;
            let block = gram.view((2 * k, 2 * k), (2, 2)).into_owned();
            assert!(fro_norm_sq(&(block - expected)) < 1e-20);
            let ortho = u.adjoint() * u;
            assert!(fro_norm_sq(&(ortho - CMat::identity(2, 2))).sqrt() < 1e-10);
        }
    }

    #[test]
    fn unitary_combiner_preserves_norm() {
        let ch = gen_rayleigh(dims(9, 3, 3, 3), 1.0, 13).unwrap();
        let eff = EffectiveChannel::eigen(&ch, 3).unwrap();
        let a = fro_norm_sq(&eff.h_tilde).sqrt();
        let b = fro_norm_sq(&ch.stacked()).sqrt();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn csv_roundtrip() {
        let ch = gen_multipath(dims(6, 2, 2, 1), 0.5, 4, 21)
            .unwrap()
            .with_noise_var(1.3e-11)
            .unwrap();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf, 21).unwrap();
        let (back, seed) = ChannelSet::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(seed, 21);
        assert_eq!(back, ch);
    }
}
