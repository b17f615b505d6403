//! Constructors for the benchmark Hamiltonian families.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{jordan_wigner_sum, FermionicTerm, Pauli, PauliString, PauliSum, MAX_QUBITS};

/// Benchmark application families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Application {
    HeisenbergXYZ,
    Ising2D,
    FermiHubbard,
    H2,
    RandomVQE,
}

impl Application {
    pub const ALL: [Application; 5] = [
        Application::HeisenbergXYZ,
        Application::Ising2D,
        Application::FermiHubbard,
        Application::H2,
        Application::RandomVQE,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Application::HeisenbergXYZ => "heisenberg",
            Application::Ising2D => "ising2d",
            Application::FermiHubbard => "fermi-hubbard",
            Application::H2 => "h2",
            Application::RandomVQE => "random-vqe",
        }
    }

    /// Names of the per-instance scalars carried as node features.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Application::HeisenbergXYZ => &["J1", "J2", "J3"],
            Application::Ising2D => &["j", "mu"],
            Application::FermiHubbard => &["t", "U"],
            Application::H2 => &["bond_length_angstrom"],
            Application::RandomVQE => &[],
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            Application::HeisenbergXYZ | Application::H2 | Application::RandomVQE => 4,
            Application::Ising2D | Application::FermiHubbard => 8,
        }
    }

    /// Full-scale dataset size.
    pub fn default_count(self) -> usize {
        match self {
            Application::HeisenbergXYZ => 2000,
            Application::Ising2D | Application::FermiHubbard => 1000,
            Application::H2 => 150,
            Application::RandomVQE => 2800,
        }
    }

    /// Coupling grid sampled for the lattice models; `None` for H2 and random
    /// Hamiltonians.
    pub fn default_grid(self, count: usize, seed: u64) -> Option<CouplingGrid> {
        let axes = match self {
            Application::HeisenbergXYZ => ["J1", "J2", "J3"]
                .iter()
                .map(|n| GridAxis::new(n, -3.0, 3.0, 0.1))
                .collect(),
            Application::Ising2D => vec![GridAxis::new("j", 0.0, 5.0, 0.1), GridAxis::new("mu", 0.0, 5.0, 0.1)],
            Application::FermiHubbard => vec![GridAxis::new("t", 0.0, 5.0, 0.1), GridAxis::new("U", 0.0, 5.0, 0.1)],
            Application::H2 | Application::RandomVQE => return None,
        };
        Some(CouplingGrid { axes, count, seed })
    }
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Application {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Application::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Validity(format!("unknown application {s:?}")))
    }
}

/// Per-instance metadata; `params` follow [`Application::param_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub application: Application,
    pub index: usize,
    pub n_qubits: usize,
    pub params: Vec<(String, f64)>,
}

impl InstanceMeta {
    pub fn new(application: Application, index: usize, n_qubits: usize, values: &[f64]) -> Result<Self> {
        let names = application.param_names();
        if names.len() != values.len() {
            return Err(Error::Shape(format!(
                "{application} takes {} parameters, got {}",
                names.len(),
                values.len()
            )));
        }
        let params = names.iter().zip(values).map(|(n, v)| (n.to_string(), *v)).collect();
        Ok(Self { application, index, n_qubits, params })
    }

    pub fn param_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.params.iter().map(|(_, v)| *v)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

fn real(c: f64) -> Complex64 {
    Complex64::new(c, 0.0)
}

fn two_site(n: usize, a: usize, b: usize, p: Pauli) -> Result<PauliString> {
    PauliString::with_ops(n, &[(a, p), (b, p)])
}

/// XYZ chain on a periodic ring of `n` sites.
pub fn heisenberg_xyz(n: usize, j1: f64, j2: f64, j3: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(Error::Domain(format!("Heisenberg chain needs n >= 2, got {n}")));
    }
    let mut h = PauliSum::new(n)?;
    for i in 0..n {
        let k = (i + 1) % n;
        h.push(real(j1), two_site(n, i, k, Pauli::X)?)?;
        h.push(real(j2), two_site(n, i, k, Pauli::Y)?)?;
        h.push(real(j3), two_site(n, i, k, Pauli::Z)?)?;
    }
    Ok(h.simplify())
}

/// `-j Σ Z_a Z_b - mu Σ Z_a` on an open `rows × cols` grid, sites numbered
/// row-major.
pub fn ising_2d(n: usize, rows: usize, cols: usize, j: f64, mu: f64) -> Result<PauliSum> {
    if rows == 0 || cols == 0 || rows * cols != n {
        return Err(Error::Shape(format!("a {rows}×{cols} lattice does not hold {n} sites")));
    }
    let site = |r: usize, c: usize| r * cols + c;
    let mut h = PauliSum::new(n)?;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                h.push(real(-j), two_site(n, site(r, c), site(r, c + 1), Pauli::Z)?)?;
            }
            if r + 1 < rows {
                h.push(real(-j), two_site(n, site(r, c), site(r + 1, c), Pauli::Z)?)?;
            }
        }
    }
    for a in 0..n {
        h.push(real(-mu), PauliString::with_ops(n, &[(a, Pauli::Z)])?)?;
    }
    Ok(h.simplify())
}

/// Lattice shape used for an `n`-site 2D Ising instance: the most square
/// factorization with `rows <= cols`.
pub fn ising_lattice(n: usize) -> (usize, usize) {
    let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n.is_multiple_of(*r)).last().unwrap_or(1);
    (rows, n / rows)
}

/// Spinless Fermi–Hubbard ring mapped to qubits with Jordan–Wigner.
pub fn fermi_hubbard(n: usize, t: f64, u: f64) -> Result<PauliSum> {
    if n < 2 {
        return Err(Error::Domain(format!("Fermi–Hubbard ring needs n >= 2, got {n}")));
    }
    let mut terms = Vec::with_capacity(3 * n);
    for i in 0..n {
        let k = (i + 1) % n;
        terms.push(FermionicTerm::new(-t, &[(i, true), (k, false)]));
        terms.push(FermionicTerm::new(-t, &[(k, true), (i, false)]));
        terms.push(FermionicTerm::new(u, &[(i, true), (i, false), (k, true), (k, false)]));
    }
    jordan_wigner_sum(&terms, n)
}

const H2_HEADER: &str = "bond_length=";

/// Parses blocks of Pauli terms introduced by `# bond_length=<Å>` headers.
pub fn parse_h2(text: &str) -> Result<Vec<(InstanceMeta, PauliSum)>> {
    struct Block {
        header_line: usize,
        bond: f64,
        terms: Vec<(Complex64, PauliString)>,
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix(H2_HEADER) {
                let bond = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno, msg: format!("bad bond length {value:?}") })?;
                blocks.push(Block { header_line: lineno, bond, terms: Vec::new() });
            }
            continue;
        }
        let term = crate::pauli::parse_term(line).map_err(|msg| Error::Parse { line: lineno, msg })?;
        blocks
            .last_mut()
            .ok_or_else(|| Error::Parse { line: lineno, msg: "term before any bond_length header".into() })?
            .terms
            .push(term);
    }
    blocks
        .into_iter()
        .enumerate()
        .map(|(index, b)| {
            let n = b.terms.first().map(|(_, s)| s.len()).ok_or_else(|| Error::Parse {
                line: b.header_line,
                msg: "block has no terms".into(),
            })?;
            let h = PauliSum::from_terms(n, b.terms)
                .map_err(|e| Error::Parse { line: b.header_line, msg: e.to_string() })?;
            if !h.is_hermitian() {
                return Err(Error::Parse { line: b.header_line, msg: "block has complex coefficients".into() });
            }
            Ok((InstanceMeta::new(Application::H2, index, n, &[b.bond])?, h))
        })
        .collect()
}

pub fn load_h2(path: impl AsRef<Path>) -> Result<Vec<(InstanceMeta, PauliSum)>> {
    parse_h2(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_h2`].
pub fn h2_to_text(instances: &[(InstanceMeta, PauliSum)]) -> String {
    let mut out = String::new();
    for (meta, h) in instances {
        let bond = meta.param("bond_length_angstrom").unwrap_or(f64::NAN);
        out.push_str(&format!("# {H2_HEADER}{bond:?}\n"));
        out.push_str(&h.to_text());
        out.push('\n');
    }
    out
}

/// STO-3G H2 Hamiltonians shipped with the crate: 150 bond lengths from
/// 0.50 Å to 4.97 Å in 0.03 Å steps.
pub fn reference_h2() -> Result<Vec<(InstanceMeta, PauliSum)>> {
    parse_h2(include_str!("../data/h2_sto3g.txt"))
}

/// Random real combination of distinct non-identity Pauli strings.
pub fn random_hamiltonian(n: usize, n_terms: usize, coeff_range: (f64, f64), seed: u64) -> Result<PauliSum> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Domain(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
    }
    if n_terms == 0 {
        return Err(Error::Domain("at least one term is required".into()));
    }
    let available = (1usize << (2 * n)) - 1;
    if n_terms > available {
        return Err(Error::Capacity(format!("only {available} non-identity strings exist on {n} qubits")));
    }
    let (lo, hi) = coeff_range;
    let coeff = Uniform::new_inclusive(lo, hi).map_err(|e| Error::Domain(format!("coefficient range: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, available, n_terms);
    let mut h = PauliSum::new(n)?;
    for idx in picks.iter() {
        let code = idx + 1;
        let ops = (0..n).map(|k| Pauli::ALL[(code >> (2 * (n - 1 - k))) & 3]).collect();
        h.push(real(coeff.sample(&mut rng)), PauliString::new(ops)?)?;
    }
    Ok(h.simplify())
}

/// One axis of a uniform coupling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(name: &str, min: f64, max: f64, step: f64) -> Self {
        Self { name: name.into(), min, max, step }
    }

    pub fn cardinality(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    /// `k`-th grid value, snapped to 1e-9 to remove accumulated float noise.
    pub fn value(&self, k: usize) -> f64 {
        let v = self.min + k as f64 * self.step;
        (v * 1e9).round() / 1e9
    }
}

/// Uniform grid over coupling constants, sampled without replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGrid {
    pub axes: Vec<GridAxis>,
    pub count: usize,
    pub seed: u64,
}

impl CouplingGrid {
    pub fn cardinality(&self) -> usize {
        self.axes.iter().map(GridAxis::cardinality).product()
    }
}

/// Draws `count` distinct coupling tuples from the grid.
pub fn sample_grid(grid: &CouplingGrid) -> Result<Vec<Vec<f64>>> {
    for axis in &grid.axes {
        if !(axis.step > 0.0) || !(axis.min <= axis.max) {
            return Err(Error::Domain(format!("invalid grid axis {axis:?}")));
        }
    }
    let total = grid.cardinality();
    if grid.count > total {
        return Err(Error::Capacity(format!("{} samples requested from a grid of {total}", grid.count)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let picks = rand::seq::index::sample(&mut rng, total, grid.count);
    Ok(picks
        .iter()
        .map(|mut flat| {
            let mut tuple = vec![0.0; grid.axes.len()];
            for (slot, axis) in grid.axes.iter().enumerate().rev() {
                let card = axis.cardinality();
                tuple[slot] = axis.value(flat % card);
                flat /= card;
            }
            tuple
        })
        .collect())
}
