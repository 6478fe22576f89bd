//! Parameter-space data model: LTC architectures, flat parameter vectors,
//! and the per-group layout shared by mutation, feature extraction, and
//! per-group Lipschitz bounds.
//!
//! A controller is a flat vector `theta` of length
//! `d = n_obs*n_hid + n_hid^2 + n_hid + n_hid*n_act + n_hid`, laid out as
//! the five groups `(W_in, W_rec, b, W_out, tau)` in that fixed order.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::linalg::Matrix;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Time constants are clamped to this floor after mutation; the LTC ODE
/// divides by tau, so proposals must stay strictly positive.
pub const TAU_FLOOR: f64 = 0.05;

/// LTC controller shape: observation, hidden, and action widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtcArchitecture {
    pub n_obs: usize,
    pub n_hid: usize,
    pub n_act: usize,
}

impl LtcArchitecture {
    pub fn new(n_obs: usize, n_hid: usize, n_act: usize) -> Result<Self> {
        if n_obs == 0 || n_hid == 0 || n_act == 0 {
            return Err(Error::Structural(
                "architecture counts must all be >= 1".into(),
            ));
        }
        Ok(Self {
            n_obs,
            n_hid,
            n_act,
        })
    }

    /// Total flat dimension over the five groups.
    pub fn dimension(&self) -> usize {
        self.n_obs * self.n_hid
            + self.n_hid * self.n_hid
            + self.n_hid
            + self.n_hid * self.n_act
            + self.n_hid
    }

    /// Group layout in flat-vector order.
    pub fn groups(&self) -> [ParamGroup; 5] {
        let sizes = [
            (GroupKind::WIn, self.n_obs * self.n_hid),
            (GroupKind::WRec, self.n_hid * self.n_hid),
            (GroupKind::Bias, self.n_hid),
            (GroupKind::WOut, self.n_hid * self.n_act),
            (GroupKind::Tau, self.n_hid),
        ];
        let mut offset = 0;
        sizes.map(|(kind, len)| {
            let g = ParamGroup { kind, offset, len };
            offset += len;
            g
        })
    }

    pub fn group(&self, kind: GroupKind) -> ParamGroup {
        self.groups()
            .into_iter()
            .find(|g| g.kind == kind)
            .expect("all five kinds are always present")
    }
}

/// The five parameter groups of an LTC controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    WIn,
    WRec,
    Bias,
    WOut,
    Tau,
}

impl GroupKind {
    pub const ALL: [GroupKind; 5] = [
        GroupKind::WIn,
        GroupKind::WRec,
        GroupKind::Bias,
        GroupKind::WOut,
        GroupKind::Tau,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GroupKind::WIn => "W_in",
            GroupKind::WRec => "W_rec",
            GroupKind::Bias => "b",
            GroupKind::WOut => "W_out",
            GroupKind::Tau => "tau",
        }
    }
}

/// One group's slice of the flat vector: `[offset, offset + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroup {
    pub kind: GroupKind,
    pub offset: usize,
    pub len: usize,
}

impl ParamGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flat controller parameter vector with its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub arch: LtcArchitecture,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: LtcArchitecture, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.dimension() {
            return Err(Error::DimensionMismatch {
                expected: arch.dimension(),
                got: values.len(),
            });
        }
        Ok(Self { arch, values })
    }

    pub fn zeros(arch: LtcArchitecture) -> Self {
        Self {
            arch,
            values: vec![0.0; arch.dimension()],
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn group_slice(&self, kind: GroupKind) -> &[f64] {
        &self.values[self.arch.group(kind).range()]
    }

    pub fn group_slice_mut(&mut self, kind: GroupKind) -> &mut [f64] {
        let r = self.arch.group(kind).range();
        &mut self.values[r]
    }

    /// True when every time constant is strictly positive.
    pub fn tau_positive(&self) -> bool {
        self.group_slice(GroupKind::Tau).iter().all(|&t| t > 0.0)
    }

    /// Flags invariant violations without rejecting the vector; callers in
    /// the simulation path require `tau_positive`.
    pub fn validate(&self) -> Result<()> {
        if !self.tau_positive() {
            return Err(Error::Structural(
                "tau group has non-positive entries".into(),
            ));
        }
        Ok(())
    }

    /// Lossless split into named groups.
    pub fn unpack(&self) -> NamedGroups {
        let a = self.arch;
        NamedGroups {
            arch: a,
            w_in: Matrix::from_vec(a.n_hid, a.n_obs, self.group_slice(GroupKind::WIn).to_vec())
                .expect("layout is consistent by construction"),
            w_rec: Matrix::from_vec(a.n_hid, a.n_hid, self.group_slice(GroupKind::WRec).to_vec())
                .expect("layout is consistent by construction"),
            bias: self.group_slice(GroupKind::Bias).to_vec(),
            w_out: Matrix::from_vec(a.n_act, a.n_hid, self.group_slice(GroupKind::WOut).to_vec())
                .expect("layout is consistent by construction"),
            tau: self.group_slice(GroupKind::Tau).to_vec(),
        }
    }

    pub fn euclidean_distance(&self, other: &ParamVector) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        let mut s = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            let d = a - b;
            s += d * d;
        }
        Ok(s.sqrt())
    }

    /// Binary record: three little-endian u32 architecture counts followed
    /// by `d` little-endian f64 values.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        for c in [self.arch.n_obs, self.arch.n_hid, self.arch.n_act] {
            w.write_all(&(c as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut counts = [0usize; 3];
        for c in &mut counts {
            r.read_exact(&mut b4)?;
            *c = u32::from_le_bytes(b4) as usize;
        }
        let arch = LtcArchitecture::new(counts[0], counts[1], counts[2])?;
        let mut values = Vec::with_capacity(arch.dimension());
        let mut b8 = [0u8; 8];
        for _ in 0..arch.dimension() {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        ParamVector::new(arch, values)
    }

    /// CSV for inspection: `index,group,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,group,value\n");
        for g in self.arch.groups() {
            for (k, v) in self.values[g.range()].iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", g.offset + k, g.kind.name(), v));
            }
        }
        out
    }
}

/// Named groups of a parameter vector. `pack` is the inverse of
/// [`ParamVector::unpack`].
#[derive(Debug, Clone, PartialEq)]
pub struct NamedGroups {
    pub arch: LtcArchitecture,
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub bias: Vec<f64>,
    pub w_out: Matrix,
    pub tau: Vec<f64>,
}

impl NamedGroups {
    pub fn pack(&self) -> Result<ParamVector> {
        let a = self.arch;
        let expected = [
            a.n_hid * a.n_obs,
            a.n_hid * a.n_hid,
            a.n_hid,
            a.n_act * a.n_hid,
            a.n_hid,
        ];
        let actual = [
            self.w_in.data.len(),
            self.w_rec.data.len(),
            self.bias.len(),
            self.w_out.data.len(),
            self.tau.len(),
        ];
        if expected != actual {
            return Err(Error::Structural(format!(
                "group lengths {actual:?} do not match architecture ({expected:?})"
            )));
        }
        let mut values = Vec::with_capacity(a.dimension());
        values.extend_from_slice(&self.w_in.data);
        values.extend_from_slice(&self.w_rec.data);
        values.extend_from_slice(&self.bias);
        values.extend_from_slice(&self.w_out.data);
        values.extend_from_slice(&self.tau);
        ParamVector::new(a, values)
    }
}

/// `theta' = theta + N(0, sigma^2 I_d)`, with mutated time constants
/// clamped to [`TAU_FLOOR`]. `sigma = 0` returns the input unchanged.
pub fn gaussian_mutation(theta: &ParamVector, sigma: f64, rng: &mut RngStream) -> ParamVector {
    assert!(sigma >= 0.0, "mutation scale must be nonnegative");
    if sigma == 0.0 {
        return theta.clone();
    }
    let mut out = theta.clone();
    for v in &mut out.values {
        *v += sigma * rng.normal();
    }
    for t in out.group_slice_mut(GroupKind::Tau) {
        if *t < TAU_FLOOR {
            *t = TAU_FLOOR;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(n_obs: usize, n_hid: usize, n_act: usize) -> LtcArchitecture {
        LtcArchitecture::new(n_obs, n_hid, n_act).unwrap()
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(arch(4, 12, 2).dimension(), 240);
        assert_eq!(arch(4, 6, 2).dimension(), 84);
        assert_eq!(arch(1, 1, 1).dimension(), 5);
    }

    #[test]
    fn dimension_scaling_table() {
        let expected = [
            (6, 84),
            (12, 240),
            (24, 768),
            (48, 2688),
            (72, 5760),
            (96, 9984),
            (128, 17408),
        ];
        for (n_hid, d) in expected {
            assert_eq!(arch(4, n_hid, 2).dimension(), d, "n_hid={n_hid}");
        }
    }

    #[test]
    fn group_offsets_for_default_architecture() {
        // Manual count: W_in 4*12=48, W_rec 144, b 12, W_out 24, tau 12.
        let groups = arch(4, 12, 2).groups();
        let expect = [
            (GroupKind::WIn, 0, 48),
            (GroupKind::WRec, 48, 144),
            (GroupKind::Bias, 192, 12),
            (GroupKind::WOut, 204, 24),
            (GroupKind::Tau, 228, 12),
        ];
        for (g, (kind, offset, len)) in groups.iter().zip(expect) {
            assert_eq!((g.kind, g.offset, g.len), (kind, offset, len));
        }
        // Partition of [0, d): contiguous, no gaps, no overlaps.
        let mut cursor = 0;
        for g in groups {
            assert_eq!(g.offset, cursor);
            cursor += g.len;
        }
        assert_eq!(cursor, 240);
    }

    #[test]
    fn zero_vector_unpacks_but_is_flagged() {
        let theta = ParamVector::zeros(arch(4, 12, 2));
        let groups = theta.unpack();
        assert!(groups.tau.iter().all(|&t| t == 0.0));
        assert!(theta.validate().is_err());
    }

    #[test]
    fn pack_unpack_round_trip() {
        let rng = RngStream::new(42);
        for a in [arch(4, 12, 2), arch(4, 6, 2), arch(1, 1, 1)] {
            for i in 0..50 {
                let mut child = rng.child_indexed("roundtrip", i);
                let theta = ParamVector::new(a, child.normal_vec(a.dimension(), 1.0)).unwrap();
                let back = theta.unpack().pack().unwrap();
                assert_eq!(theta, back);
            }
        }
    }

    #[test]
    fn pack_rejects_length_mismatch() {
        let a = arch(4, 12, 2);
        let mut groups = ParamVector::zeros(a).unpack();
        groups.bias.push(1.0);
        assert!(groups.pack().is_err());
        assert!(ParamVector::new(a, vec![0.0; 239]).is_err());
    }

    #[test]
    fn mutation_sigma_zero_is_identity() {
        let theta = ParamVector::zeros(arch(4, 12, 2));
        let mut rng = RngStream::new(1);
        let out = gaussian_mutation(&theta, 0.0, &mut rng);
        assert_eq!(theta, out);
    }

    #[test]
    fn mutation_clamps_tau_to_floor() {
        let a = arch(4, 12, 2);
        let mut theta = ParamVector::zeros(a);
        for t in theta.group_slice_mut(GroupKind::Tau) {
            *t = TAU_FLOOR;
        }
        let rng = RngStream::new(9);
        for i in 0..20 {
            let mut child = rng.child_indexed("clamp", i);
            let out = gaussian_mutation(&theta, 0.5, &mut child);
            assert!(out
                .group_slice(GroupKind::Tau)
                .iter()
                .all(|&t| t >= TAU_FLOOR));
        }
    }

    #[test]
    fn mutation_norm_matches_chi_mean() {
        // E||dtheta|| ~ sigma*sqrt(d) = 0.01*sqrt(240) ~ 0.1549; Monte Carlo
        // mean over 1000 draws must land within 5%.
        let a = arch(4, 12, 2);
        let mut base = ParamVector::zeros(a);
        for t in base.group_slice_mut(GroupKind::Tau) {
            *t = 1.0;
        }
        let rng = RngStream::new(42);
        let sigma = 0.01;
        let n = 1000;
        let mut total = 0.0;
        for i in 0..n {
            let mut child = rng.child_indexed("chi", i);
            let m = gaussian_mutation(&base, sigma, &mut child);
            total += m.euclidean_distance(&base).unwrap();
        }
        let mean = total / n as f64;
        let expected = sigma * (240.0f64).sqrt();
        assert!(
            (mean - expected).abs() < 0.05 * expected,
            "mean {mean} vs {expected}"
        );
    }

    #[test]
    fn binary_round_trip() {
        let a = arch(4, 6, 2);
        let mut rng = RngStream::new(11);
        let theta = ParamVector::new(a, rng.normal_vec(a.dimension(), 0.3)).unwrap();
        let mut buf = Vec::new();
        theta.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 8 * a.dimension());
        let back = ParamVector::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(theta, back);
    }
}
