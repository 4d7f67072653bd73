//! Problem instances, sign vectors, generators and the JSON file format.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EntryLocation, Error, ParseError, Result};
use crate::linalg::{gaussian_symmetric, spectral_norm, standard_normal_vector, SymmetricMatrix};

/// Slack allowed on the unit operator-norm hypothesis.
pub const UNIT_NORM_SLACK: f64 = 1e-8;

/// Entries `a_ij` and `a_ji` may differ by at most this much in a file.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// An ordered list of `n` symmetric `d x d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    matrices: Vec<SymmetricMatrix>,
    dim: usize,
    pub label: String,
    pub seed: Option<u64>,
}

impl Instance {
    pub fn new(matrices: Vec<SymmetricMatrix>, label: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        let dim = matrices
            .first()
            .map(SymmetricMatrix::dim)
            .ok_or_else(|| invalid("an instance needs at least one matrix"))?;
        if let Some((i, m)) = matrices.iter().enumerate().find(|(_, m)| m.dim() != dim) {
            return Err(invalid(format!(
                "matrix {i} has dimension {} but matrix 0 has {dim}",
                m.dim()
            )));
        }
        Ok(Instance {
            matrices,
            dim,
            label: label.into(),
            seed,
        })
    }

    /// `n` copies of the zero matrix.
    pub fn zeros(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![SymmetricMatrix::zeros(d); n], "zero", None)
    }

    pub fn n(&self) -> usize {
        self.matrices.len()
    }

    pub fn d(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[SymmetricMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, i: usize) -> &SymmetricMatrix {
        &self.matrices[i]
    }

    /// Checks `||A_i||_op <= 1` up to [`UNIT_NORM_SLACK`].
    pub fn validate_unit_norm(&self) -> Result<()> {
        for (i, m) in self.matrices.iter().enumerate() {
            let norm = spectral_norm(m);
            if norm > 1.0 + UNIT_NORM_SLACK {
                return Err(invalid(format!("matrix {i} has operator norm {norm} > 1")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.matrices.iter().all(|m| m.as_slice().iter().all(|&v| v == 0.0))
    }

    /// `sum_i x_i A_i`.
    pub fn signed_sum(&self, x: &[f64]) -> SymmetricMatrix {
        assert_eq!(x.len(), self.n(), "coefficient vector length must equal n");
        let mut acc = SymmetricMatrix::zeros(self.dim);
        for (m, &c) in self.matrices.iter().zip(x) {
            if c != 0.0 {
                acc.add_scaled(m, c);
            }
        }
        acc
    }

    /// `||sum_i x_i A_i||_op` for arbitrary real coefficients.
    pub fn discrepancy_of(&self, x: &[f64]) -> f64 {
        spectral_norm(&self.signed_sum(x))
    }

    pub fn discrepancy(&self, signs: &SignVector) -> f64 {
        self.discrepancy_of(&signs.to_f64())
    }

    /// Sub-instance on the given matrix indices, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Instance> {
        let mats = indices.iter().map(|&i| self.matrices[i].clone()).collect();
        Instance::new(mats, self.label.clone(), self.seed)
    }

    /// Every matrix multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Instance {
        Instance {
            matrices: self.matrices.iter().map(|m| m.scaled(factor)).collect(),
            dim: self.dim,
            label: self.label.clone(),
            seed: self.seed,
        }
    }

    /// Same instance with every matrix replaced by `Q^T A_i Q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> Result<Instance> {
        Instance::new(
            self.matrices.iter().map(|m| m.congruence(q)).collect(),
            self.label.clone(),
            self.seed,
        )
    }
}

/// A coloring `x in {-1, +1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(invalid(format!("sign at index {i} is {}, not +-1", values[i])));
        }
        Ok(SignVector(values))
    }

    pub fn all_plus(n: usize) -> Self {
        SignVector(vec![1; n])
    }

    /// Signs of a point whose coordinates are exactly `+-1`.
    pub fn from_f64(x: &[f64]) -> Result<Self> {
        Self::new(
            x.iter()
                .map(|&v| {
                    if v == 1.0 {
                        1
                    } else if v == -1.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn negated(&self) -> Self {
        SignVector(self.0.iter().map(|v| -v).collect())
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        SignVector::new(v)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(s: SignVector) -> Self {
        s.0
    }
}

/// Instance families the generators know about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    DiagonalSpencer,
    LowerBound,
    LowRank,
    BlockDiagonal,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::DiagonalSpencer,
        Family::LowerBound,
        Family::LowRank,
        Family::BlockDiagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::DiagonalSpencer => "diagonal-spencer",
            Family::LowerBound => "lower-bound",
            Family::LowRank => "low-rank",
            Family::BlockDiagonal => "block-diagonal",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown family '{s}'")))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `A_i = diag(a_i)` with independent uniform `+-1` diagonal entries.
pub fn generate_diagonal_spencer(n: usize, d: usize, seed: u64) -> Result<Instance> {
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats = (0..n)
        .map(|_| {
            let diag: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            SymmetricMatrix::from_diagonal(&diag)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(mats, format!("diagonal-spencer n={n} d={d}"), Some(seed))
}

/// `A_1 = e_1 e_1^T` and `A_i = (e_1 + e_i)(e_1 + e_i)^T / 2` for `i >= 2`, with `d = n`.
///
/// Any signing leaves a first column of norm at least `sqrt(n - 1) / 2`.
pub fn generate_lower_bound(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(invalid(format!("lower-bound family needs n >= 2, got {n}")));
    }
    let mut mats = Vec::with_capacity(n);
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    mats.push(SymmetricMatrix::outer(&e1, 1.0)?);
    for i in 1..n {
        let mut v = e1.clone();
        v[i] = 1.0;
        mats.push(SymmetricMatrix::outer(&v, 0.5)?);
    }
    Instance::new(mats, format!("lower-bound n={n}"), None)
}

/// `A_i = sum_k s_k u_k u_k^T` with `r` random orthonormal `u_k` per matrix
/// and random signs `s_k`, so `||A_i||_op = 1` and `||A_i||_F^2 = r`.
pub fn generate_low_rank_random(n: usize, d: usize, r: usize, seed: u64) -> Result<Instance> {
    if n == 0 || d == 0 {
        return Err(invalid("n and d must be positive"));
    }
    if r == 0 || r > d {
        return Err(invalid(format!("rank must satisfy 1 <= r <= d, got r={r}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(n);
    for _ in 0..n {
        let gaussian = DMatrix::from_columns(&(0..r).map(|_| standard_normal_vector(&mut rng, d)).collect::<Vec<_>>());
        let q = gaussian.qr().q();
        let mut acc = DMatrix::zeros(d, d);
        for k in 0..r {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let u = q.column(k);
            acc.ger(sign, &u, &u, 1.0);
        }
        let m = SymmetricMatrix::from_matrix(acc)?;
        let norm = spectral_norm(&m);
        mats.push(m.scaled(1.0 / norm));
    }
    Instance::new(mats, format!("low-rank n={n} d={d} r={r}"), Some(seed))
}

/// Block-diagonal matrices with `d / h` Gaussian symmetric blocks of size
/// `h`, each block rescaled to operator norm one.
pub fn generate_block_diagonal(n: usize, d: usize, h: usize, seed: u64) -> Result<Instance> {
    if n == 0 || d == 0 || h == 0 {
        return Err(invalid("n, d and h must be positive"));
    }
    if d % h != 0 {
        return Err(invalid(format!("block size {h} does not divide d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(n);
    for _ in 0..n {
        let mut acc = DMatrix::zeros(d, d);
        for b in 0..d / h {
            let block = gaussian_symmetric(&mut rng, h);
            let norm = spectral_norm(&block);
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            acc.view_mut((b * h, b * h), (h, h))
                .copy_from(&(block.as_matrix() * scale));
        }
        mats.push(SymmetricMatrix::from_matrix(acc)?);
    }
    Instance::new(mats, format!("block-diagonal n={n} d={d} h={h}"), Some(seed))
}

/// Parameters for [`generate`].
#[derive(Debug, Clone, Copy)]
pub struct FamilyParams {
    pub n: usize,
    pub d: Option<usize>,
    pub rank: Option<usize>,
    pub block: Option<usize>,
    pub seed: u64,
}

/// Dispatches to the generator for `family`; `d` defaults to `n`.
pub fn generate(family: Family, p: FamilyParams) -> Result<Instance> {
    let d = p.d.unwrap_or(p.n);
    match family {
        Family::DiagonalSpencer => generate_diagonal_spencer(p.n, d, p.seed),
        Family::LowerBound => {
            if p.d.is_some_and(|d| d != p.n) {
                return Err(invalid("the lower-bound family has d = n"));
            }
            generate_lower_bound(p.n)
        }
        Family::LowRank => generate_low_rank_random(p.n, d, p.rank.unwrap_or(1), p.seed),
        Family::BlockDiagonal => generate_block_diagonal(p.n, d, p.block.unwrap_or(1), p.seed),
    }
}

#[derive(Serialize)]
struct InstanceFileOut<'a> {
    n: usize,
    d: usize,
    label: &'a str,
    seed: Option<u64>,
    matrices: Vec<&'a [f64]>,
}

#[derive(Deserialize)]
struct InstanceFileIn {
    n: usize,
    d: usize,
    #[serde(default)]
    label: String,
    #[serde(default)]
    seed: Option<u64>,
    matrices: Vec<Vec<Option<f64>>>,
}

/// Serializes to the instance JSON format. Floats use the shortest decimal
/// form that parses back to the identical `f64`.
pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFileOut {
        n: inst.n(),
        d: inst.d(),
        label: &inst.label,
        seed: inst.seed,
        matrices: inst.matrices.iter().map(SymmetricMatrix::as_slice).collect(),
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

pub fn instance_from_json(text: &str) -> Result<Instance, ParseError> {
    let raw: InstanceFileIn = serde_json::from_str(text)?;
    if raw.n == 0 || raw.d == 0 {
        return Err(ParseError::DimensionMismatch("n and d must be positive".into()));
    }
    if raw.matrices.len() != raw.n {
        return Err(ParseError::DimensionMismatch(format!(
            "header says n = {} but {} matrices are present",
            raw.n,
            raw.matrices.len()
        )));
    }
    let d = raw.d;
    let mut mats = Vec::with_capacity(raw.n);
    for (k, entries) in raw.matrices.iter().enumerate() {
        if entries.len() != d * d {
            return Err(ParseError::DimensionMismatch(format!(
                "matrix {k} has {} entries, expected d*d = {}",
                entries.len(),
                d * d
            )));
        }
        let mut values = Vec::with_capacity(d * d);
        for (pos, v) in entries.iter().enumerate() {
            match v {
                Some(x) if x.is_finite() => values.push(*x),
                _ => {
                    return Err(ParseError::NonFinite(EntryLocation {
                        matrix: k,
                        row: pos / d,
                        col: pos % d,
                    }))
                }
            }
        }
        for row in 0..d {
            for col in (row + 1)..d {
                let (a, b) = (values[row * d + col], values[col * d + row]);
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(ParseError::Asymmetric {
                        at: EntryLocation { matrix: k, row, col },
                        value: a,
                        mirrored: b,
                    });
                }
            }
        }
        mats.push(
            SymmetricMatrix::from_row_major(d, &values).expect("entries validated as finite with correct length"),
        );
    }
    Ok(Instance::new(mats, raw.label, raw.seed).expect("dimensions validated"))
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    fs::write(path, instance_to_json(inst)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(instance_from_json(&text)?)
}
