//! Momentum-space step operator, its spectrum, and the flat band.
//!
//! Fourier transforming the lattice turns one walk step into multiplication by
//! `Ũ(k) = diag(e^{ik1}, e^{-ik1}, 1, e^{ik2}, e^{-ik2}) · C` at each
//! quasi-momentum `k`. The eigenphases of `Ũ(k)` are the bands of the walk.
//! For the Grover coin one of them is identically zero, which is what traps
//! part of the wave packet near its starting site.
//!
//! Eigenpairs come from a complex Schur factorization. `Ũ(k)` is normal, so its
//! Schur form is diagonal and the Schur vectors are already orthonormal
//! eigenvectors; near-degenerate clusters are re-orthonormalized with
//! Gram-Schmidt and every vector gets a fixed phase convention.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SVector, Schur};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::walk::{unitarity_deviation, CoinOperator, DIM};
use crate::{par, CMatrix5, CVector5, Complex};

/// Eigenphases closer than this (on the circle) are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Largest accepted `max |V e^{iΘ} V† - Ũ|`.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

/// The flat band is simple at `k` when every other eigenvalue is at least this
/// far from 1.
pub const SIMPLE_GAP: f64 = 1e-6;

/// Maps any angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Quasi-momentum `(k1, k2) ∈ (-π, π]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentumPoint {
    pub k1: f64,
    pub k2: f64,
}

impl MomentumPoint {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let in_range = |k: f64| k > -PI && k <= PI;
        if !in_range(k1) || !in_range(k2) {
            return Err(Error::InvalidArgument(format!(
                "momentum ({k1}, {k2}) outside (-π, π]²"
            )));
        }
        Ok(Self { k1, k2 })
    }

    /// Reduces both components into `(-π, π]`.
    pub fn wrapped(k1: f64, k2: f64) -> Self {
        Self {
            k1: wrap_phase(k1),
            k2: wrap_phase(k2),
        }
    }

    pub fn negated(self) -> Self {
        Self::wrapped(-self.k1, -self.k2)
    }
}

/// `Ũ(k)` together with the momentum it was built at.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumOperator {
    pub k: MomentumPoint,
    pub entries: CMatrix5,
}

/// `Ũ(k)` for the Grover coin.
pub fn fourier_step_operator(k: MomentumPoint) -> MomentumOperator {
    fourier_step_operator_with(&CoinOperator::grover(), k)
}

/// `Ũ(k) = diag(e^{ik1}, e^{-ik1}, 1, e^{ik2}, e^{-ik2}) · coin`.
pub fn fourier_step_operator_with(coin: &CoinOperator, k: MomentumPoint) -> MomentumOperator {
    let phase = shift_phases(k);
    let c = coin.entries();
    MomentumOperator {
        k,
        entries: CMatrix5::from_fn(|i, j| phase[i] * c[(i, j)]),
    }
}

fn shift_phases(k: MomentumPoint) -> [Complex; DIM] {
    let one = Complex::new(1.0, 0.0);
    [
        Complex::cis(k.k1),
        Complex::cis(-k.k1),
        one,
        Complex::cis(k.k2),
        Complex::cis(-k.k2),
    ]
}

/// Eigenphases and orthonormal eigenvectors of `Ũ(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub k: MomentumPoint,
    /// Ascending, each in `(-π, π]`.
    pub phases: [f64; DIM],
    /// Column `j` is the eigenvector for `phases[j]`.
    pub vectors: CMatrix5,
    /// Squared normalization constant of each column. Always 1 once the
    /// vectors are orthonormal; kept so the band integrals can be written
    /// in their general weighted form.
    pub normalization: [f64; DIM],
}

impl SpectralDecomposition {
    pub fn vector(&self, j: usize) -> CVector5 {
        self.vectors.column(j).into_owned()
    }

    /// `|v_j⟩⟨v_j|`.
    pub fn projector(&self, j: usize) -> CMatrix5 {
        let v = self.vector(j);
        v * v.adjoint() * Complex::new(self.normalization[j], 0.0)
    }

    /// `Σ_j e^{iθ_j} |v_j⟩⟨v_j|`.
    pub fn reconstruct(&self) -> CMatrix5 {
        (0..DIM).fold(CMatrix5::zeros(), |acc, j| {
            acc + self.projector(j) * Complex::cis(self.phases[j])
        })
    }

    /// `max |reconstruct() - target|`.
    pub fn residual(&self, target: &CMatrix5) -> f64 {
        max_abs(&(self.reconstruct() - target))
    }

    /// `max |V†V - I|`.
    pub fn gram_deviation(&self) -> f64 {
        max_abs(&(self.vectors.adjoint() * self.vectors - CMatrix5::identity()))
    }

    /// `|e^{iθ_j} - 1|` for each column.
    pub fn distances_from_one(&self) -> [f64; DIM] {
        self.phases
            .map(|t| (Complex::cis(t) - Complex::new(1.0, 0.0)).norm())
    }

    /// Column of the eigenvalue closest to 1.
    pub fn flat_index(&self) -> usize {
        let d = self.distances_from_one();
        (0..DIM)
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .expect("five columns")
    }

    /// Column indices in band order: the flat band first, then the others by
    /// `|θ|` ascending with negative phases before positive ones on ties.
    ///
    /// Fails with [`Error::Degeneracy`] when another eigenvalue lies within
    /// [`SIMPLE_GAP`] of 1.
    pub fn band_order(&self) -> Result<[usize; DIM]> {
        let flat = self.flat_index();
        let d = self.distances_from_one();
        let gap = (0..DIM)
            .filter(|&j| j != flat)
            .map(|j| d[j])
            .fold(f64::INFINITY, f64::min);
        if !(gap > SIMPLE_GAP) {
            return Err(Error::Degeneracy {
                k1: self.k.k1,
                k2: self.k.k2,
                gap,
            });
        }
        let mut rest: Vec<usize> = (0..DIM).filter(|&j| j != flat).collect();
        rest.sort_by(|&a, &b| {
            let (ta, tb) = (self.phases[a], self.phases[b]);
            ta.abs().total_cmp(&tb.abs()).then(ta.total_cmp(&tb))
        });
        Ok([flat, rest[0], rest[1], rest[2], rest[3]])
    }

    /// Same decomposition with column `j` multiplied by `e^{i·angles[j]}`.
    pub fn rephased(&self, angles: [f64; DIM]) -> Self {
        let mut out = self.clone();
        for (j, a) in angles.iter().enumerate() {
            let z = Complex::cis(*a);
            out.vectors.column_mut(j).iter_mut().for_each(|x| *x *= z);
        }
        out
    }
}

fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<Complex, R, C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Diagonalizes `Ũ(k)`.
pub fn eigendecompose(op: &MomentumOperator) -> Result<SpectralDecomposition> {
    let deviation = unitarity_deviation(&op.entries);
    if !(deviation < 1e-10) {
        return Err(Error::NotUnitary { deviation });
    }
    let schur = Schur::try_new(op.entries, f64::EPSILON, 10_000).ok_or(Error::Decomposition {
        residual: f64::INFINITY,
    })?;
    let (q, t) = schur.unpack();

    let mut pairs: Vec<(f64, CVector5)> = (0..DIM)
        .map(|j| (wrap_phase(t[(j, j)].arg()), q.column(j).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    for cluster in phase_clusters(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()) {
        if cluster.len() < 2 {
            continue;
        }
        let basis: Vec<CVector5> = cluster.iter().map(|&j| pairs[j].1).collect();
        let ortho = gram_schmidt(&basis, CLUSTER_TOL)?;
        for (&j, v) in cluster.iter().zip(ortho) {
            pairs[j].1 = v;
        }
    }

    let mut vectors = CMatrix5::zeros();
    let mut phases = [0.0; DIM];
    for (j, (theta, v)) in pairs.into_iter().enumerate() {
        phases[j] = theta;
        vectors.set_column(j, &fix_phase(v));
    }
    let decomposition = SpectralDecomposition {
        k: op.k,
        phases,
        vectors,
        normalization: [1.0; DIM],
    };
    let residual = decomposition.residual(&op.entries);
    if !(residual <= DECOMPOSITION_TOL) {
        return Err(Error::Decomposition { residual });
    }
    Ok(decomposition)
}

/// Groups indices whose phases are within [`CLUSTER_TOL`] on the circle,
/// transitively.
fn phase_clusters(phases: &[f64]) -> Vec<Vec<usize>> {
    let n = phases.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if circular_distance(phases[i], phases[j]) < CLUSTER_TOL {
                let (from, to) = (label[j], label[i]);
                if from != to {
                    label
                        .iter_mut()
                        .filter(|l| **l == from)
                        .for_each(|l| *l = to);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.iter_mut().find(|g| label[g[0]] == label[i]) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Rotates `v` so that its first entry of largest modulus is real and non-negative.
fn fix_phase<const N: usize>(v: SVector<Complex, N>) -> SVector<Complex, N> {
    let mut best = 0;
    for i in 1..N {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() == 0.0 {
        return v;
    }
    v * (z.conj() / z.norm())
}

/// Classical Gram-Schmidt with one full re-orthogonalization pass.
///
/// Fails with [`Error::Rank`] if a vector's component orthogonal to its
/// predecessors has norm below `tol`.
pub fn gram_schmidt<const N: usize>(
    vectors: &[SVector<Complex, N>],
    tol: f64,
) -> Result<Vec<SVector<Complex, N>>> {
    let mut out: Vec<SVector<Complex, N>> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        let mut w = *v;
        for _ in 0..2 {
            let coeffs: Vec<Complex> = out.iter().map(|q| q.dotc(&w)).collect();
            for (q, c) in out.iter().zip(coeffs) {
                w -= q * c;
            }
        }
        let norm = w.norm();
        if !(norm > tol) {
            return Err(Error::Rank { index, norm });
        }
        out.push(w / Complex::new(norm, 0.0));
    }
    Ok(out)
}

/// Trigonometric aggregates appearing in closed-form expressions for the
/// non-flat bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandFunctions {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn band_functions(k: MomentumPoint) -> BandFunctions {
    let (k1, k2) = (k.k1, k.k2);
    let a = 3.0 * k1.cos() + 3.0 * k2.cos() + 4.0;
    let b = (k1 - k2).cos() + (k1 + k2).cos() + 4.0 * k1.cos() + 4.0 * k2.cos() + 5.0;
    let c = 2.0 * (k1 - k2).cos() + 2.0 * (k1 + k2).cos() + 32.0 * k1.cos()
        - 9.0 * (2.0 * k1).cos()
        + 32.0 * k2.cos()
        - 9.0 * (2.0 * k2).cos()
        - 50.0;
    let d = -2.0 * (k1 - k2).cos() - 2.0 * (k1 + k2).cos() - 32.0 * k1.cos()
        + 9.0 * (2.0 * k1).cos()
        - 32.0 * k2.cos()
        + 9.0 * (2.0 * k2).cos()
        + 50.0;
    BandFunctions { a, b, c, d }
}

/// `min_j |e^{iθ_j(k)} - 1|`.
pub fn flat_band_residual(k: MomentumPoint) -> Result<f64> {
    let dec = eigendecompose(&fourier_step_operator(k))?;
    Ok(dec.distances_from_one()[dec.flat_index()])
}

/// Projector onto the eigenvalue-1 eigenvector of `Ũ(k)`.
pub fn flat_band_projector(k: MomentumPoint) -> Result<CMatrix5> {
    let dec = eigendecompose(&fourier_step_operator(k))?;
    flat_band_projector_of(&dec)
}

pub fn flat_band_projector_of(dec: &SpectralDecomposition) -> Result<CMatrix5> {
    let order = dec.band_order()?;
    Ok(dec.projector(order[0]))
}

/// `n` equally spaced momenta `π(2i + 2 - n)/n`, covering `(-π, π]` and
/// closed under negation.
pub fn uniform_axis(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| PI * (2 * (i + 1) as i64 - n as i64) as f64 / n as f64)
        .collect()
}

/// One row of a band table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandRow {
    pub k: MomentumPoint,
    pub phases: [f64; DIM],
}

/// Eigenphases on the `grid_size × grid_size` grid [`uniform_axis`]², ordered
/// by `k1` then `k2`.
pub fn band_surface(grid_size: usize) -> Result<Vec<BandRow>> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "band grid needs at least 2 points per axis, got {grid_size}"
        )));
    }
    let axis = uniform_axis(grid_size);
    let rows = par::map_indexed(grid_size * grid_size, |i| {
        let k = MomentumPoint {
            k1: axis[i / grid_size],
            k2: axis[i % grid_size],
        };
        eigendecompose(&fourier_step_operator(k)).map(|d| BandRow {
            k,
            phases: d.phases,
        })
    });
    rows.into_iter().collect()
}

/// Step operator of the one-dimensional three-state Grover walk,
/// `diag(e^{ik}, 1, e^{-ik}) · ((2/3) J - I)`.
pub fn three_state_operator(k: f64) -> Matrix3<Complex> {
    let phase = [Complex::cis(k), Complex::new(1.0, 0.0), Complex::cis(-k)];
    Matrix3::from_fn(|i, j| {
        let c = if i == j { -1.0 / 3.0 } else { 2.0 / 3.0 };
        phase[i] * c
    })
}

/// Eigenphases of [`three_state_operator`], flat one first, then the other two ascending.
pub fn three_state_phases(k: f64) -> [f64; 3] {
    let t = Schur::new(three_state_operator(k)).unpack().1;
    let mut phases: Vec<f64> = (0..3).map(|j| wrap_phase(t[(j, j)].arg())).collect();
    let flat = (0..3)
        .min_by(|&a, &b| phases[a].abs().total_cmp(&phases[b].abs()))
        .expect("three phases");
    let f = phases.remove(flat);
    phases.sort_by(f64::total_cmp);
    [f, phases[0], phases[1]]
}

/// Worst-case deviations of the numerical three-state spectrum from its
/// closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThreeStateResiduals {
    /// `max |cos θ - (-(2 + cos k)/3)|` over the two dispersive phases.
    pub cos: f64,
    /// `max ||sin θ| - √((5 + cos k)(1 - cos k))/3|` over the same phases.
    pub sin: f64,
    /// `max |θ_flat|`.
    pub flat: f64,
}

/// Compares the three-state spectrum against its closed form at `samples`
/// midpoints `k = π(2i + 1 - samples)/samples`.
pub fn three_state_check(samples: usize) -> Result<ThreeStateResiduals> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let per_k = par::map_indexed(samples, |i| {
        let k = PI * (2 * i + 1) as f64 / samples as f64 - PI;
        let [flat, a, b] = three_state_phases(k);
        let cos_expect = -(2.0 + k.cos()) / 3.0;
        let sin_expect = ((5.0 + k.cos()) * (1.0 - k.cos())).sqrt() / 3.0;
        let cos_res = [a, b]
            .iter()
            .map(|t| (t.cos() - cos_expect).abs())
            .fold(0.0, f64::max);
        let sin_res = [a, b]
            .iter()
            .map(|t| (t.sin().abs() - sin_expect).abs())
            .fold(0.0, f64::max);
        (cos_res, sin_res, flat.abs())
    });
    Ok(per_k.into_iter().fold(
        ThreeStateResiduals {
            cos: 0.0,
            sin: 0.0,
            flat: 0.0,
        },
        |acc, (c, s, f)| ThreeStateResiduals {
            cos: acc.cos.max(c),
            sin: acc.sin.max(s),
            flat: acc.flat.max(f),
        },
    ))
}

/// Maximum cosine residual from [`three_state_check`].
pub fn three_state_phase_check(samples: usize) -> Result<f64> {
    three_state_check(samples).map(|r| r.cos)
}
