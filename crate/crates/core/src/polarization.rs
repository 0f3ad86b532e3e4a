//! Jones and Stokes calculus.
//!
//! Stokes convention: s1 = |ex|^2 - |ey|^2, s2 = 2 Re(ex ey*), s3 = 2 Im(ex ey*).

use std::ops::{Add, Mul};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NldpError, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JonesVector {
    pub x: C64,
    pub y: C64,
}

impl JonesVector {
    pub fn new(x: C64, y: C64) -> Self {
        Self { x, y }
    }

    pub fn x_pol() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn y_pol() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    /// Unit-power vector pointing at the given Stokes direction (need not be normalized).
    pub fn from_stokes_direction(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        let n = (s1 * s1 + s2 * s2 + s3 * s3).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("Stokes direction must be a finite nonzero vector"));
        }
        let (s1, s2, s3) = (s1 / n, s2 / n, s3 / n);
        let ax = ((1.0 + s1) / 2.0).max(0.0).sqrt();
        let ay = ((1.0 - s1) / 2.0).max(0.0).sqrt();
        // phase of ey relative to ex: s2 + j s3 = 2 ex ey*  =>  ey = ay e^{-j atan2(s3, s2)}
        let phi = s3.atan2(s2);
        Ok(Self::new(C64::new(ax, 0.0), C64::from_polar(ay, -phi)))
    }

    pub fn power(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn normalized(&self) -> Result<Self> {
        let p = self.power();
        if !(p > 0.0) {
            return Err(invalid("cannot normalize a zero Jones vector"));
        }
        Ok(self.scale(1.0 / p.sqrt()))
    }

    pub fn stokes(&self) -> StokesVector {
        jones_to_stokes(*self)
    }
}

impl Add for JonesVector {
    type Output = JonesVector;
    fn add(self, o: JonesVector) -> JonesVector {
        JonesVector::new(self.x + o.x, self.y + o.y)
    }
}

/// 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesMatrix {
    pub m: [[C64; 2]; 2],
}

impl Default for JonesMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl JonesMatrix {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn zero() -> Self {
        let zero = C64::new(0.0, 0.0);
        Self::new(zero, zero, zero, zero)
    }

    pub fn diag(a: C64, d: C64) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self::new(a, zero, zero, d)
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn apply(&self, v: JonesVector) -> JonesVector {
        JonesVector::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.m[0][0] * k, self.m[0][1] * k, self.m[1][0] * k, self.m[1][1] * k)
    }

    pub fn sub(&self, o: &JonesMatrix) -> Self {
        Self::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }

    /// Frobenius norm of (U^H U - I).
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint() * *self;
        let e = p.sub(&JonesMatrix::identity());
        e.m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// 3x3 rotation acting on (s1, s2, s3) induced by this (unitary) matrix.
    pub fn mueller_rotation(&self) -> [[f64; 3]; 3] {
        // pauli matrices in the s1/s2/s3 convention above
        let basis = [
            JonesMatrix::diag(C64::new(1.0, 0.0), C64::new(-1.0, 0.0)),
            JonesMatrix::new(
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ),
            JonesMatrix::new(
                C64::new(0.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 0.0),
            ),
        ];
        let u = *self;
        let ua = self.adjoint();
        let mut r = [[0.0; 3]; 3];
        for (j, sj) in basis.iter().enumerate() {
            let t = u * *sj * ua;
            for (i, si) in basis.iter().enumerate() {
                r[i][j] = 0.5 * (*si * t).trace().re;
            }
        }
        r
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;
    fn mul(self, o: JonesMatrix) -> JonesMatrix {
        let a = &self.m;
        let b = &o.m;
        JonesMatrix::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for JonesMatrix {
    type Output = JonesMatrix;
    fn add(self, o: JonesMatrix) -> JonesMatrix {
        let (a, b) = (&self.m, &o.m);
        JonesMatrix::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self { s0, s1, s2, s3 }
    }

    pub fn vector_norm(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }

    /// Unit vector on the Poincare sphere, or None for a null polarization vector.
    pub fn direction(&self) -> Option<[f64; 3]> {
        let n = self.vector_norm();
        (n > 0.0 && n.is_finite()).then(|| [self.s1 / n, self.s2 / n, self.s3 / n])
    }
}

/// Waveplate with axis rotation `xi` and half-retardation `zeta`:
/// [[e^{j zeta} cos xi, e^{j zeta} sin xi], [-e^{-j zeta} sin xi, e^{-j zeta} cos xi]].
pub fn waveplate_matrix(xi: f64, zeta: f64) -> Result<JonesMatrix> {
    if !zeta.is_finite() || !xi.is_finite() {
        return Err(invalid(format!("non-finite waveplate angles ({xi}, {zeta})")));
    }
    Ok(waveplate_unchecked(xi, zeta))
}

#[inline]
pub(crate) fn waveplate_unchecked(xi: f64, zeta: f64) -> JonesMatrix {
    let (s, c) = xi.sin_cos();
    let e = C64::from_polar(1.0, zeta);
    let ec = e.conj();
    JonesMatrix::new(e * c, e * s, -ec * s, ec * c)
}

pub fn jones_to_stokes(v: JonesVector) -> StokesVector {
    let px = v.x.norm_sqr();
    let py = v.y.norm_sqr();
    let c = v.x * v.y.conj();
    StokesVector::new(px + py, px - py, 2.0 * c.re, 2.0 * c.im)
}

/// Degree of polarization of an ensemble of Stokes samples.
pub fn dop(samples: &[StokesVector]) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("degree of polarization of an empty ensemble"));
    }
    let mut acc = [0.0f64; 4];
    for s in samples {
        acc[0] += s.s0;
        acc[1] += s.s1;
        acc[2] += s.s2;
        acc[3] += s.s3;
    }
    if !(acc[0] > 0.0) {
        return Err(NldpError::Domain("ensemble has zero total power".into()));
    }
    Ok((acc[1] * acc[1] + acc[2] * acc[2] + acc[3] * acc[3]).sqrt() / acc[0])
}

/// Haar-distributed element of SU(2) for a given seed.
pub fn haar_random_rotation(seed: u64) -> JonesMatrix {
    let mut rng = crate::rng::stream(seed, &[crate::rng::label::KICKER]);
    haar_rotation_from(&mut rng)
}

/// Haar-distributed element of SU(2), drawn as a uniform unit quaternion.
pub fn haar_rotation_from<R: Rng + ?Sized>(rng: &mut R) -> JonesMatrix {
    let q: [f64; 4] = loop {
        let q = [0; 4].map(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            break q.map(|v| v / n);
        }
    };
    let a = C64::new(q[0], q[3]);
    let b = C64::new(q[2], q[1]);
    JonesMatrix::new(a, b, -b.conj(), a.conj())
}
