//! Position-space wave function from the band decomposition.
//!
//! `Ψ(n, t) = (1/4π²) ∫ Σ_j e^{iθ_j(k) t} |v_j(k)⟩⟨v_j(k)|Ψ̃(k, 0)⟩ e^{ik·n} dk`
//! is evaluated with the midpoint rule on an `n × n` grid over the Brillouin
//! zone. Each node is diagonalized once per [`SpectralTable`] and reused for
//! every site, time, and band selection.
//!
//! Nodes are summed in fixed-size blocks: blocks may run in parallel, each one
//! accumulates its nodes in index order, and the block totals are then added
//! in block order. The result is bitwise independent of the thread count.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, fourier_step_operator, MomentumPoint};
use crate::walk::{evolve, initial_state, Spinor, DIM};
use crate::{par, CMatrix5, Complex};

/// Nodes per reduction block.
const BLOCK: usize = 512;

/// Largest tolerated fraction of degenerate nodes whose weight is redistributed.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// Phases this close to zero belong to the eigenvalue that is exactly 1.
const FLAT_SNAP: f64 = 1e-10;

fn snap_flat(theta: f64) -> f64 {
    if theta.abs() < FLAT_SNAP {
        0.0
    } else {
        theta
    }
}

/// Midpoint rule on the Brillouin zone `(-π, π]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    n: usize,
    axis: Vec<f64>,
}

impl QuadratureGrid {
    /// `n` midpoints per axis, `k_i = π(2i + 1 - n)/n`. For even `n` no node
    /// falls on `0` or `±π`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "quadrature grid needs at least one node per axis".into(),
            ));
        }
        let axis = (0..n)
            .map(|i| PI * (2 * i as i64 + 1 - n as i64) as f64 / n as f64)
            .collect();
        Ok(Self { n, axis })
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `(2π/n)²`.
    pub fn weight(&self) -> f64 {
        let h = 2.0 * PI / self.n as f64;
        h * h
    }

    /// Node `i`, ordered by `k1` then `k2`.
    pub fn node(&self, i: usize) -> MomentumPoint {
        MomentumPoint {
            k1: self.axis[i / self.n],
            k2: self.axis[i % self.n],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = MomentumPoint> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }
}

/// Subset of the five bands. Band 1 is the flat band; bands 2–5 are the
/// others ordered by `|θ|`, negative phase first on ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BandSelection(u8);

impl BandSelection {
    pub fn new(bands: &[usize]) -> Result<Self> {
        let mut mask = 0u8;
        for &b in bands {
            if !(1..=DIM).contains(&b) {
                return Err(Error::InvalidArgument(format!("band {b} not in 1..=5")));
            }
            mask |= 1 << (b - 1);
        }
        if mask == 0 {
            return Err(Error::InvalidArgument("band selection is empty".into()));
        }
        Ok(Self(mask))
    }

    pub fn all() -> Self {
        Self(0b11111)
    }

    pub fn flat() -> Self {
        Self(0b00001)
    }

    /// Bands 2 through 5.
    pub fn dispersive() -> Self {
        Self(0b11110)
    }

    pub fn single(band: usize) -> Result<Self> {
        Self::new(&[band])
    }

    pub fn contains(&self, band: usize) -> bool {
        (1..=DIM).contains(&band) && self.0 & (1 << (band - 1)) != 0
    }

    pub fn bands(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=DIM).filter(|b| self.contains(*b))
    }
}

/// Momentum-space initial condition `Ψ̃(k, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentumProfile {
    /// Walker at the origin with these amplitudes, so `Ψ̃(k, 0)` is constant.
    Localized(Spinor),
    /// `P_flat(k)` applied to the amplitudes at every node: a state that lives
    /// entirely in the flat band.
    FlatProjected(Spinor),
}

#[derive(Clone, Debug)]
struct NodeSpectrum {
    k: MomentumPoint,
    /// Band order.
    phases: [f64; DIM],
    /// Column `b` is the eigenvector of band `b + 1`.
    vectors: CMatrix5,
}

impl NodeSpectrum {
    fn initial(&self, profile: &MomentumProfile) -> crate::CVector5 {
        match profile {
            MomentumProfile::Localized(s) => s.as_vector(),
            MomentumProfile::FlatProjected(s) => {
                let v = self.vectors.column(0);
                v * v.dotc(&s.as_vector())
            }
        }
    }

    /// `Σ_{b ∈ bands} e^{iθ_b t} v_b ⟨v_b|Ψ̃(k, 0)⟩`.
    fn evolved(&self, bands: BandSelection, psi0: &crate::CVector5, t: usize) -> [Complex; DIM] {
        let mut out = [Complex::new(0.0, 0.0); DIM];
        for b in bands.bands() {
            let v = self.vectors.column(b - 1);
            let coef = v.dotc(psi0) * Complex::cis(self.phases[b - 1] * t as f64);
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += x * coef;
            }
        }
        out
    }
}

/// Band-ordered eigenpairs at every node of a [`QuadratureGrid`].
#[derive(Clone, Debug)]
pub struct SpectralTable {
    points_per_axis: usize,
    nodes: Vec<NodeSpectrum>,
    excluded: usize,
}

impl SpectralTable {
    /// Diagonalizes `Ũ(k)` at every node.
    ///
    /// Nodes where the flat band is not simple are dropped and the remaining
    /// nodes share their weight, as long as they are fewer than
    /// [`MAX_EXCLUDED_FRACTION`] of the grid. Otherwise this fails with
    /// [`Error::DegenerateNodes`].
    pub fn build(grid: &QuadratureGrid) -> Result<Self> {
        let nodes = par::map_indexed(grid.len(), |i| -> Result<Option<NodeSpectrum>> {
            let k = grid.node(i);
            let dec = eigendecompose(&fourier_step_operator(k))?;
            match dec.band_order() {
                Ok(order) => Ok(Some(NodeSpectrum {
                    k,
                    phases: order.map(|j| dec.phases[j]).map(snap_flat),
                    vectors: CMatrix5::from_fn(|r, c| dec.vectors[(r, order[c])]),
                })),
                Err(Error::Degeneracy { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        });
        Self::assemble(grid.points_per_axis(), nodes)
    }

    fn assemble(points_per_axis: usize, nodes: Vec<Result<Option<NodeSpectrum>>>) -> Result<Self> {
        let total = nodes.len();
        let mut kept = Vec::with_capacity(total);
        for node in nodes {
            if let Some(n) = node? {
                kept.push(n);
            }
        }
        let excluded = total - kept.len();
        if excluded > 0 && excluded as f64 >= MAX_EXCLUDED_FRACTION * total as f64 {
            return Err(Error::DegenerateNodes { excluded, total });
        }
        Ok(Self {
            points_per_axis,
            nodes: kept,
            excluded,
        })
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Number of nodes dropped for a degenerate flat band.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// Weight of each retained node including the `1/4π²` prefactor.
    fn node_weight(&self) -> f64 {
        1.0 / self.nodes.len() as f64
    }

    /// Band-restricted wave function at several sites and one time.
    pub fn wavefunctions(
        &self,
        bands: BandSelection,
        profile: &MomentumProfile,
        sites: &[(i64, i64)],
        t: usize,
    ) -> Vec<Spinor> {
        self.reduce(sites.len() * DIM, |node, acc| {
            let psi0 = node.initial(profile);
            let amp = node.evolved(bands, &psi0, t);
            for (a, ph) in acc.chunks_exact_mut(DIM).zip(site_phases(node.k, sites)) {
                for (x, y) in a.iter_mut().zip(amp.iter()) {
                    x.add(y * ph);
                }
            }
        })
        .chunks_exact(DIM)
        .map(|c| Spinor(std::array::from_fn(|l| c[l])))
        .collect()
    }

    /// Band-restricted wave function at one site for several times.
    pub fn time_series(
        &self,
        bands: BandSelection,
        profile: &MomentumProfile,
        site: (i64, i64),
        times: &[usize],
    ) -> Vec<Spinor> {
        self.reduce(times.len() * DIM, |node, acc| {
            let psi0 = node.initial(profile);
            let ph = Complex::cis(node.k.k1 * site.0 as f64 + node.k.k2 * site.1 as f64);
            for (a, &t) in acc.chunks_exact_mut(DIM).zip(times) {
                let amp = node.evolved(bands, &psi0, t);
                for (x, y) in a.iter_mut().zip(amp.iter()) {
                    x.add(y * ph);
                }
            }
        })
        .chunks_exact(DIM)
        .map(|c| Spinor(std::array::from_fn(|l| c[l])))
        .collect()
    }

    /// Flat-band transfer matrices `M(n) = (1/N) Σ_k P_flat(k) e^{ik·n}` at
    /// each site, so that the flat-band amplitude of initial spinor `s` at `n`
    /// is `M(n) s`.
    pub fn flat_band_kernel(&self, sites: &[(i64, i64)]) -> Vec<CMatrix5> {
        const CELLS: usize = DIM * DIM;
        self.reduce(sites.len() * CELLS, |node, acc| {
            let v = node.vectors.column(0);
            let p = v * v.adjoint();
            for (a, ph) in acc.chunks_exact_mut(CELLS).zip(site_phases(node.k, sites)) {
                for (x, y) in a.iter_mut().zip(p.iter()) {
                    x.add(y * ph);
                }
            }
        })
        .chunks_exact(CELLS)
        .map(CMatrix5::from_column_slice)
        .collect()
    }

    /// Weighted node sum into `len` complex slots with compensated addition.
    fn reduce<F>(&self, len: usize, f: F) -> Vec<Complex>
    where
        F: Fn(&NodeSpectrum, &mut [Compensated]) + Sync + Send,
    {
        let blocks = self.nodes.len().div_ceil(BLOCK);
        let partials = par::map_indexed(blocks, |b| {
            let mut acc = vec![Compensated::default(); len];
            let end = ((b + 1) * BLOCK).min(self.nodes.len());
            for node in &self.nodes[b * BLOCK..end] {
                f(node, &mut acc);
            }
            acc
        });
        let mut total = vec![Compensated::default(); len];
        for p in partials {
            for (t, x) in total.iter_mut().zip(p) {
                t.merge(&x);
            }
        }
        let w = self.node_weight();
        total.into_iter().map(|t| t.value() * w).collect()
    }
}

/// Neumaier summation, applied to real and imaginary parts separately.
#[derive(Clone, Copy, Debug, Default)]
struct Compensated {
    sum: Complex,
    carry: Complex,
}

impl Compensated {
    fn add(&mut self, z: Complex) {
        neumaier(&mut self.sum.re, &mut self.carry.re, z.re);
        neumaier(&mut self.sum.im, &mut self.carry.im, z.im);
    }

    fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.add(other.carry);
    }

    fn value(&self) -> Complex {
        self.sum + self.carry
    }
}

fn neumaier(sum: &mut f64, carry: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *carry += (*sum - t) + x;
    } else {
        *carry += (x - t) + *sum;
    }
    *sum = t;
}

fn site_phases(k: MomentumPoint, sites: &[(i64, i64)]) -> impl Iterator<Item = Complex> + '_ {
    sites
        .iter()
        .map(move |&(n1, n2)| Complex::cis(k.k1 * n1 as f64 + k.k2 * n2 as f64))
}

/// `Ψ(site, t)` from all five bands.
pub fn spectral_wavefunction(
    initial: Spinor,
    site: (i64, i64),
    t: usize,
    grid: &QuadratureGrid,
) -> Result<Spinor> {
    component_wavefunction(BandSelection::all(), initial, site, t, grid)
}

/// Contribution of the selected bands to `Ψ(site, t)`.
pub fn component_wavefunction(
    bands: BandSelection,
    initial: Spinor,
    site: (i64, i64),
    t: usize,
    grid: &QuadratureGrid,
) -> Result<Spinor> {
    let initial = initial.check_normalized(1e-9)?;
    let table = SpectralTable::build(grid)?;
    Ok(table.wavefunctions(bands, &MomentumProfile::Localized(initial), &[site], t)[0])
}

/// Sites of the diamond `|n1| + |n2| <= radius`, ascending in `(n1, n2)`.
pub fn diamond(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    (-r..=r)
        .flat_map(|n1| {
            let span = r - n1.abs();
            (-span..=span).map(move |n2| (n1, n2))
        })
        .collect()
}

/// Largest componentwise gap between the quadrature wave function and direct
/// lattice evolution over the diamond `|n1| + |n2| <= radius` at time `t`.
pub fn reconstruction_error(
    initial: Spinor,
    t: usize,
    radius: usize,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let table = SpectralTable::build(grid)?;
    reconstruction_error_with(&table, initial, t, radius)
}

/// [`reconstruction_error`] against a prebuilt table.
pub fn reconstruction_error_with(
    table: &SpectralTable,
    initial: Spinor,
    t: usize,
    radius: usize,
) -> Result<f64> {
    if radius < t {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} does not cover the light cone at t = {t}"
        )));
    }
    let direct = evolve(initial_state(initial)?, t);
    let sites = diamond(radius);
    let spectral = table.wavefunctions(
        BandSelection::all(),
        &MomentumProfile::Localized(initial),
        &sites,
        t,
    );
    Ok(sites
        .iter()
        .zip(&spectral)
        .map(|(&(n1, n2), s)| s.max_abs_diff(&direct.get(n1, n2)))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Chirality;

    #[test]
    fn grid_weights_and_nodes() {
        for n in [2, 4, 7, 64] {
            let g = QuadratureGrid::new(n).unwrap();
            let total: f64 = g.nodes().map(|_| g.weight()).sum();
            assert!((total - 4.0 * PI * PI).abs() < 1e-9);
            for k in g.nodes() {
                assert!(k.k1 > -PI && k.k1 < PI && k.k2 > -PI && k.k2 < PI);
                if n % 2 == 0 {
                    assert!(k.k1 != 0.0 && k.k2 != 0.0);
                }
            }
        }
        assert!(QuadratureGrid::new(0).is_err());
    }

    #[test]
    fn band_selection() {
        assert!(BandSelection::new(&[]).is_err());
        assert!(BandSelection::new(&[0]).is_err());
        assert!(BandSelection::new(&[6]).is_err());
        let s = BandSelection::new(&[2, 4, 4]).unwrap();
        assert_eq!(s.bands().collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(BandSelection::all().bands().count(), 5);
        assert_eq!(
            BandSelection::dispersive().bands().collect::<Vec<_>>(),
            vec![2, 3, 4, 5]
        );
        assert!(BandSelection::flat().contains(1) && !BandSelection::flat().contains(2));
    }

    #[test]
    fn time_zero_recovers_initial_spinor() {
        let init = Spinor::uniform();
        for n in [4, 8] {
            let g = QuadratureGrid::new(n).unwrap();
            let s = spectral_wavefunction(init, (0, 0), 0, &g).unwrap();
            assert!(s.max_abs_diff(&init) < 1e-12);
        }
        let g = QuadratureGrid::new(8).unwrap();
        assert!(reconstruction_error(init, 0, 0, &g).unwrap() < 1e-10);
    }

    #[test]
    fn one_step_matches_hand_evaluation() {
        let g = QuadratureGrid::new(128).unwrap();
        let s = spectral_wavefunction(Spinor::basis(Chirality::L), (-1, 0), 1, &g).unwrap();
        let mut expect = Spinor::ZERO;
        expect.0[0] = Complex::new(-0.6, 0.0);
        assert!(s.max_abs_diff(&expect) < 1e-6);
    }

    #[test]
    fn bands_partition_the_wavefunction() {
        let g = QuadratureGrid::new(32).unwrap();
        let table = SpectralTable::build(&g).unwrap();
        let profile = MomentumProfile::Localized(Spinor::basis(Chirality::O));
        let sites = [(0, 0), (1, -2), (3, 1)];
        let full = table.wavefunctions(BandSelection::all(), &profile, &sites, 5);
        let mut sum = vec![Spinor::ZERO; sites.len()];
        for b in 1..=5 {
            let part = table.wavefunctions(BandSelection::single(b).unwrap(), &profile, &sites, 5);
            for (s, p) in sum.iter_mut().zip(part) {
                *s += p;
            }
        }
        for (a, b) in full.iter().zip(&sum) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn all_bands_equals_spectral_wavefunction() {
        let g = QuadratureGrid::new(16).unwrap();
        let init = Spinor::basis(Chirality::U);
        let a = spectral_wavefunction(init, (1, 1), 3, &g).unwrap();
        let b = component_wavefunction(BandSelection::all(), init, (1, 1), 3, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_band_is_time_independent() {
        let g = QuadratureGrid::new(32).unwrap();
        let init = Spinor::basis(Chirality::L);
        let a = component_wavefunction(BandSelection::flat(), init, (1, 0), 3, &g).unwrap();
        let b = component_wavefunction(BandSelection::flat(), init, (1, 0), 10, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn time_series_agrees_with_wavefunctions() {
        let g = QuadratureGrid::new(24).unwrap();
        let table = SpectralTable::build(&g).unwrap();
        let profile = MomentumProfile::Localized(Spinor::basis(Chirality::D));
        let series = table.time_series(BandSelection::dispersive(), &profile, (1, 0), &[0, 4]);
        for (s, t) in series.iter().zip([0, 4]) {
            let w = table.wavefunctions(BandSelection::dispersive(), &profile, &[(1, 0)], t)[0];
            assert!(s.max_abs_diff(&w) < 1e-15);
        }
    }

    #[test]
    fn parseval_at_time_zero() {
        let g = QuadratureGrid::new(64).unwrap();
        let table = SpectralTable::build(&g).unwrap();
        let init = Spinor::from_reals([0.6, 0.0, 0.0, 0.0, 0.8]);
        let sites: Vec<(i64, i64)> = crate::walk::sites(2).collect();
        let mass: f64 = table
            .wavefunctions(
                BandSelection::all(),
                &MomentumProfile::Localized(init),
                &sites,
                0,
            )
            .iter()
            .map(Spinor::norm_sqr)
            .sum();
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn short_times_match_direct_evolution() {
        let g = QuadratureGrid::new(64).unwrap();
        let err = reconstruction_error(Spinor::basis(Chirality::R), 4, 4, &g).unwrap();
        assert!(err < 1e-10, "{err}");
        assert!(reconstruction_error(Spinor::uniform(), 4, 3, &g).is_err());
    }

    #[test]
    fn diamond_sites() {
        assert_eq!(diamond(0), vec![(0, 0)]);
        assert_eq!(diamond(1).len(), 5);
        assert_eq!(diamond(8).len(), 2 * 8 * 9 + 1);
    }

    #[test]
    fn flat_kernel_matches_flat_wavefunction() {
        let g = QuadratureGrid::new(32).unwrap();
        let table = SpectralTable::build(&g).unwrap();
        let sites = [(0, 0), (2, -1)];
        let init = Spinor::from_reals([0.0, 0.6, 0.0, 0.8, 0.0]);
        let kernel = table.flat_band_kernel(&sites);
        let direct = table.wavefunctions(
            BandSelection::flat(),
            &MomentumProfile::Localized(init),
            &sites,
            0,
        );
        for (m, d) in kernel.iter().zip(direct) {
            let via = Spinor::from_vector(&(m * init.as_vector()));
            assert!(via.max_abs_diff(&d) < 1e-14);
        }
    }

    #[test]
    fn degenerate_nodes_redistribute_or_fail() {
        let g = QuadratureGrid::new(4).unwrap();
        let good = SpectralTable::build(&g).unwrap().nodes;
        let total = 2000;

        let mut nodes: Vec<Result<Option<NodeSpectrum>>> = (0..total)
            .map(|i| Ok(Some(good[i % good.len()].clone())))
            .collect();
        nodes[0] = Ok(None);
        let t = SpectralTable::assemble(4, nodes).unwrap();
        assert_eq!(t.excluded(), 1);
        assert_eq!(t.node_weight(), 1.0 / (total - 1) as f64);

        let nodes: Vec<Result<Option<NodeSpectrum>>> = (0..total)
            .map(|i| {
                if i < 2 {
                    Ok(None)
                } else {
                    Ok(Some(good[0].clone()))
                }
            })
            .collect();
        assert!(matches!(
            SpectralTable::assemble(4, nodes),
            Err(Error::DegenerateNodes {
                excluded: 2,
                total: 2000
            })
        ));

        let nodes = vec![
            Ok(Some(good[0].clone())),
            Err(Error::Decomposition { residual: 1.0 }),
        ];
        assert!(matches!(
            SpectralTable::assemble(4, nodes),
            Err(Error::Decomposition { .. })
        ));
    }
}
