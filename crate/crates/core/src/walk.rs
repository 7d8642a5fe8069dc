//! Position-space evolution of the five-state walk.
//!
//! The lattice is stored densely as a square of side `2R + 1` centred on the
//! origin. A walker launched from the origin never leaves the diamond
//! `|n1| + |n2| <= t`, so with `R >= t` the finite array represents the
//! infinite lattice exactly and no boundary condition is ever applied.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::Matrix5;

use crate::error::{Error, Result};
use crate::{par, CMatrix5, Complex};

/// Number of internal states.
pub const DIM: usize = 5;

const ZERO: Complex = Complex::new(0.0, 0.0);

/// Internal state of the walker. `L`/`R` move along the first axis, `D`/`U`
/// along the second, and `O` stays put.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chirality {
    L,
    R,
    O,
    D,
    U,
}

impl Chirality {
    pub const ALL: [Chirality; DIM] = [
        Chirality::L,
        Chirality::R,
        Chirality::O,
        Chirality::D,
        Chirality::U,
    ];

    /// Zero-based storage index.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based label, `L = 1` through `U = 5`.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Lattice displacement of this component during one step.
    pub fn displacement(self) -> (i64, i64) {
        match self {
            Chirality::L => (-1, 0),
            Chirality::R => (1, 0),
            Chirality::O => (0, 0),
            Chirality::D => (0, -1),
            Chirality::U => (0, 1),
        }
    }
}

impl fmt::Display for Chirality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Chirality::L => "L",
            Chirality::R => "R",
            Chirality::O => "0",
            Chirality::D => "D",
            Chirality::U => "U",
        };
        f.write_str(s)
    }
}

/// Five chirality amplitudes at one lattice site, in `(L, R, O, D, U)` order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spinor(pub [Complex; DIM]);

impl Spinor {
    pub const ZERO: Spinor = Spinor([ZERO; DIM]);

    pub fn new(amplitudes: [Complex; DIM]) -> Self {
        Spinor(amplitudes)
    }

    /// Spinor with real amplitudes.
    pub fn from_reals(re: [f64; DIM]) -> Self {
        Spinor(re.map(|x| Complex::new(x, 0.0)))
    }

    /// Unit vector along one chirality.
    pub fn basis(c: Chirality) -> Self {
        let mut s = Self::ZERO;
        s.0[c.index()] = Complex::new(1.0, 0.0);
        s
    }

    /// `(1, 1, 1, 1, 1) / √5`.
    pub fn uniform() -> Self {
        Self::from_reals([1.0 / 5f64.sqrt(); DIM])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns `self` unchanged if its squared norm is within `tol` of one.
    pub fn check_normalized(self, tol: f64) -> Result<Self> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol || !norm_sqr.is_finite() {
            return Err(Error::Norm { norm_sqr });
        }
        Ok(self)
    }

    /// Largest componentwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Spinor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn as_vector(&self) -> crate::CVector5 {
        crate::CVector5::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &crate::CVector5) -> Self {
        Spinor([v[0], v[1], v[2], v[3], v[4]])
    }
}

impl Index<usize> for Spinor {
    type Output = Complex;
    fn index(&self, i: usize) -> &Complex {
        &self.0[i]
    }
}

impl IndexMut<usize> for Spinor {
    fn index_mut(&mut self, i: usize) -> &mut Complex {
        &mut self.0[i]
    }
}

impl Index<Chirality> for Spinor {
    type Output = Complex;
    fn index(&self, c: Chirality) -> &Complex {
        &self.0[c.index()]
    }
}

impl std::ops::Add for Spinor {
    type Output = Spinor;
    fn add(mut self, rhs: Spinor) -> Spinor {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl std::ops::AddAssign for Spinor {
    fn add_assign(&mut self, rhs: Spinor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl std::ops::Sub for Spinor {
    type Output = Spinor;
    fn sub(mut self, rhs: Spinor) -> Spinor {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

/// A 5×5 unitary acting on chirality.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinOperator {
    entries: CMatrix5,
}

impl CoinOperator {
    /// Tolerance on `max |C†C - I|`.
    pub const UNITARY_TOL: f64 = 1e-12;

    pub fn new(entries: CMatrix5) -> Result<Self> {
        let deviation = unitarity_deviation(&entries);
        if !(deviation < Self::UNITARY_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { entries })
    }

    /// The Grover coin `(2/5) J - I`.
    pub fn grover() -> Self {
        let diag = Complex::new(-3.0 / 5.0, 0.0);
        let off = Complex::new(2.0 / 5.0, 0.0);
        Self {
            entries: Matrix5::from_fn(|i, j| if i == j { diag } else { off }),
        }
    }

    pub fn entries(&self) -> &CMatrix5 {
        &self.entries
    }

    pub fn row(&self, c: Chirality) -> [Complex; DIM] {
        let i = c.index();
        std::array::from_fn(|j| self.entries[(i, j)])
    }

    pub fn apply(&self, s: &Spinor) -> Spinor {
        Spinor::from_vector(&(self.entries * s.as_vector()))
    }
}

/// `max |M†M - I|` over entries.
pub fn unitarity_deviation(m: &CMatrix5) -> f64 {
    (m.adjoint() * m - CMatrix5::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn grover_coin() -> CoinOperator {
    CoinOperator::grover()
}

/// Splits a coin into the five partial step matrices `U_L, U_R, U_O, U_D, U_U`.
///
/// `U_X` keeps row `X` of the coin and zeroes the rest, so the five parts sum
/// to the coin.
pub fn shift_partition(coin: &CoinOperator) -> [CMatrix5; DIM] {
    std::array::from_fn(|x| {
        let mut part = CMatrix5::zeros();
        part.set_row(x, &coin.entries.row(x));
        part
    })
}

/// Wave function on the square `[-R, R]²` at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    radius: usize,
    time: usize,
    field: Vec<Spinor>,
    mass: f64,
}

impl LatticeState {
    /// Walker localized at the origin with the given chirality amplitudes.
    pub fn localized(amplitudes: Spinor, radius: usize) -> Result<Self> {
        let amplitudes = amplitudes.check_normalized(1e-9)?;
        let side = 2 * radius + 1;
        let mut field = vec![Spinor::ZERO; side * side];
        field[radius * side + radius] = amplitudes;
        Ok(Self {
            radius,
            time: 0,
            field,
            mass: amplitudes.norm_sqr(),
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major spinors, `n1` major and `n2` minor, both ascending.
    pub fn field(&self) -> &[Spinor] {
        &self.field
    }

    fn offset(&self, n1: i64, n2: i64) -> Option<usize> {
        let r = self.radius as i64;
        if n1.abs() > r || n2.abs() > r {
            return None;
        }
        Some(((n1 + r) as usize) * self.side() + (n2 + r) as usize)
    }

    /// Amplitudes at `(n1, n2)`; zero outside the stored square.
    pub fn get(&self, n1: i64, n2: i64) -> Spinor {
        self.offset(n1, n2).map_or(Spinor::ZERO, |i| self.field[i])
    }

    /// Total probability `Σ_n Σ_l |ψ_l(n)|²`, accumulated row by row when
    /// the field is written.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Copy of the state on a larger square. Never shrinks.
    pub fn grown(&self, radius: usize) -> Self {
        if radius <= self.radius {
            return self.clone();
        }
        let side = 2 * radius + 1;
        let shift = radius - self.radius;
        let mut field = vec![Spinor::ZERO; side * side];
        let old_side = self.side();
        for (i, row) in self.field.chunks(old_side).enumerate() {
            let start = (i + shift) * side + shift;
            field[start..start + old_side].copy_from_slice(row);
        }
        Self {
            radius,
            time: self.time,
            field,
            mass: self.mass,
        }
    }
}

/// Walker at the origin at `t = 0`, stored with radius 0.
pub fn initial_state(amplitudes: Spinor) -> Result<LatticeState> {
    LatticeState::localized(amplitudes, 0)
}

/// A coined walk: the coin plus the fixed five-direction shift.
#[derive(Clone, Debug)]
pub struct Walk {
    coin: CoinOperator,
    rows: [[Complex; DIM]; DIM],
    /// Coin rows when every entry is real.
    real_rows: Option<[[f64; DIM]; DIM]>,
}

impl Default for Walk {
    fn default() -> Self {
        Self::new(CoinOperator::grover())
    }
}

impl Walk {
    pub fn new(coin: CoinOperator) -> Self {
        let rows = Chirality::ALL.map(|c| coin.row(c));
        let real_rows = rows
            .iter()
            .flatten()
            .all(|z| z.im == 0.0)
            .then(|| rows.map(|row| row.map(|z| z.re)));
        Self {
            coin,
            rows,
            real_rows,
        }
    }

    pub fn grover() -> Self {
        Self::default()
    }

    pub fn coin(&self) -> &CoinOperator {
        &self.coin
    }

    /// One step, returning a new state grown by one in radius if needed.
    pub fn step(&self, state: &LatticeState) -> LatticeState {
        let src = state.grown(state.time + 1);
        let mut dst = vec![Spinor::ZERO; src.field.len()];
        let mass = self.advance(&src.field, &mut dst, src.radius, src.time + 1);
        LatticeState {
            radius: src.radius,
            time: src.time + 1,
            field: dst,
            mass,
        }
    }

    /// Advances `steps` times, calling `observe` on every intermediate state
    /// including the initial and final ones.
    pub fn run<F>(&self, state: LatticeState, steps: usize, mut observe: F) -> LatticeState
    where
        F: FnMut(&LatticeState),
    {
        let mut state = state.grown(state.time + steps);
        observe(&state);
        if steps == 0 {
            return state;
        }
        // Double buffer. `scratch` only ever holds zeros or the state two
        // steps back, whose support lies inside the diamond being written.
        let mut scratch = vec![Spinor::ZERO; state.field.len()];
        for _ in 0..steps {
            state.mass = self.advance(&state.field, &mut scratch, state.radius, state.time + 1);
            std::mem::swap(&mut state.field, &mut scratch);
            state.time += 1;
            observe(&state);
        }
        state
    }

    pub fn evolve(&self, state: LatticeState, steps: usize) -> LatticeState {
        self.run(state, steps, |_| {})
    }

    /// Writes the time-`t_new` field into `dst` for every site of the diamond
    /// `|n1| + |n2| <= t_new` and returns its mass. Sites outside the diamond
    /// are left untouched.
    fn advance(&self, src: &[Spinor], dst: &mut [Spinor], radius: usize, t_new: usize) -> f64 {
        match &self.real_rows {
            Some(rows) => sweep(src, dst, radius, t_new, |x, s| real_dot(&rows[x], s)),
            None => sweep(src, dst, radius, t_new, |x, s| dot(&self.rows[x], s)),
        }
    }
}

/// Row-parallel body of [`Walk::advance`] for a given row-times-spinor kernel.
fn sweep<D>(src: &[Spinor], dst: &mut [Spinor], radius: usize, t_new: usize, row_dot: D) -> f64
where
    D: Fn(usize, &Spinor) -> Complex + Sync + Send,
{
    let side = 2 * radius + 1;
    let r = radius as i64;
    let reach = t_new as i64;
    let shifts = Chirality::ALL.map(|c| c.displacement());
    let row_masses = par::map_chunks_mut(dst, side, |i, row| {
        let n1 = i as i64 - r;
        let span = reach - n1.abs();
        if span < 0 {
            return 0.0;
        }
        let span = span.min(r);
        let sources = shifts.map(|(d1, _)| {
            let m1 = n1 - d1;
            (m1.abs() <= r).then(|| {
                let start = (m1 + r) as usize * side;
                &src[start..start + side]
            })
        });
        let mut mass = 0.0;
        for j in (r - span)..=(r + span) {
            let mut out = Spinor::ZERO;
            for x in 0..DIM {
                let m2 = usize::try_from(j - shifts[x].1).ok();
                if let Some(s) = sources[x].zip(m2).and_then(|(s, m2)| s.get(m2)) {
                    out.0[x] = row_dot(x, s);
                }
            }
            mass += out.norm_sqr();
            row[j as usize] = out;
        }
        mass
    });
    row_masses.into_iter().sum()
}

fn dot(row: &[Complex; DIM], s: &Spinor) -> Complex {
    row.iter()
        .zip(s.0.iter())
        .fold(ZERO, |acc, (a, b)| acc + a * b)
}

fn real_dot(row: &[f64; DIM], s: &Spinor) -> Complex {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in row.iter().zip(s.0.iter()) {
        re += a * b.re;
        im += a * b.im;
    }
    Complex::new(re, im)
}

/// One Grover-walk step.
pub fn evolve_step(state: &LatticeState) -> LatticeState {
    Walk::grover().step(state)
}

/// `steps` Grover-walk steps.
pub fn evolve(state: LatticeState, steps: usize) -> LatticeState {
    Walk::grover().evolve(state, steps)
}

/// Site probabilities on a square `[-R, R]²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityGrid {
    radius: usize,
    values: Vec<f64>,
    mass: f64,
}

impl ProbabilityGrid {
    /// `values` is row-major with `n1` major, both axes ascending.
    pub fn from_values(radius: usize, values: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if values.len() != side * side {
            return Err(Error::InvalidArgument(format!(
                "grid of radius {radius} needs {} values, got {}",
                side * side,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "probability {v} is negative or not finite"
            )));
        }
        let mass = values.iter().sum();
        Ok(Self {
            radius,
            values,
            mass,
        })
    }

    pub fn zeros(radius: usize) -> Self {
        let side = 2 * radius + 1;
        Self {
            radius,
            values: vec![0.0; side * side],
            mass: 0.0,
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn get(&self, n1: i64, n2: i64) -> f64 {
        let r = self.radius as i64;
        if n1.abs() > r || n2.abs() > r {
            return 0.0;
        }
        self.values[((n1 + r) as usize) * self.side() + (n2 + r) as usize]
    }

    /// Sites in ascending `(n1, n2)` order with their values.
    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        let r = self.radius as i64;
        let side = self.side();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &p)| (((i / side) as i64 - r, (i % side) as i64 - r), p))
    }

    /// Restriction (or zero-padded extension) to another radius.
    pub fn resized(&self, radius: usize) -> Self {
        let values = sites(radius).map(|(n1, n2)| self.get(n1, n2)).collect();
        Self::from_values(radius, values).expect("resized grid is well formed")
    }
}

/// Sites of the square `[-R, R]²` in ascending `(n1, n2)` order.
pub fn sites(radius: usize) -> impl Iterator<Item = (i64, i64)> {
    let r = radius as i64;
    (-r..=r).flat_map(move |n1| (-r..=r).map(move |n2| (n1, n2)))
}

/// `P(n) = Σ_l |ψ_l(n)|²` at every stored site.
pub fn probability_grid(state: &LatticeState) -> ProbabilityGrid {
    let values: Vec<f64> = state.field.iter().map(Spinor::norm_sqr).collect();
    let mass = values.iter().sum();
    ProbabilityGrid {
        radius: state.radius,
        values,
        mass,
    }
}
