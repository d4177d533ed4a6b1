//! Stratified Lie groups in exponential coordinates of the first kind.
//!
//! A group is described by its layer dimensions and the structure constants
//! `[e_i, e_j] = sum_k c_ij^k e_k` of its graded Lie algebra. Coordinates are
//! ordered layer by layer. Everything downstream (frames, group law, dilations)
//! is derived from the structure constants. For step at most three the
//! Baker-Campbell-Hausdorff series terminates, so the formulas below are exact.

use crate::error::{CalcError, Result};
use crate::numerics::{mat_inverse, mat_mul};
use crate::scalar::{lit, Real};

/// Which model a group was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Heisenberg(usize),
    Engel,
    Custom,
}

/// One structure constant `[e_i, e_j] = value * e_k` with 0-based global basis indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Group models accepted by [`build_group`].
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Heisenberg(usize),
    Engel,
    Custom { layer_dims: Vec<usize>, brackets: Vec<BracketEntry> },
}

/// Largest step supported for custom groups.
pub const MAX_STEP: usize = 3;

/// Validated stratified group.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedGroup<T> {
    kind: GroupKind,
    layer_dims: Vec<usize>,
    degree: Vec<usize>,
    c: Vec<T>,
    entries: Vec<BracketEntry>,
}

/// Point of a group in exponential coordinates, validated against the group dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint<T>(Vec<T>);

impl<T: Real> GroupPoint<T> {
    pub fn new(group: &StratifiedGroup<T>, coords: Vec<T>) -> Result<Self> {
        if coords.len() != group.dim() {
            return Err(CalcError::InvalidArgument(format!(
                "point has {} coordinates, group dimension is {}",
                coords.len(),
                group.dim()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(CalcError::InvalidArgument("point has non-finite coordinates".into()));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> std::ops::Deref for GroupPoint<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Frame at a point: column `j` holds the coordinate coefficients of the j-th frame field.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix<T> {
    n: usize,
    cols: Vec<T>,
}

impl<T: Real> FrameMatrix<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Entry in coordinate row `r` of frame column `c`.
    pub fn get(&self, r: usize, c: usize) -> T {
        self.cols[c * self.n + r]
    }

    /// Row-major copy of the matrix.
    pub fn to_row_major(&self) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for c in 0..n {
            for r in 0..n {
                out[r * n + c] = self.cols[c * n + r];
            }
        }
        out
    }

    pub fn determinant(&self) -> T {
        crate::numerics::mat_det(self.n, &self.to_row_major())
    }

    /// Frame components of a coordinate vector `v`, i.e. the solution of `F a = v`.
    pub fn components(&self, v: &[T]) -> Result<Vec<T>> {
        let inv = mat_inverse(self.n, &self.to_row_major())?;
        Ok(mat_mul(self.n, self.n, 1, &inv, v))
    }
}

/// Riemannian metric of the epsilon-regularisation in coordinates, with inverse and determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEps<T> {
    pub n: usize,
    pub matrix: Vec<T>,
    pub inverse: Vec<T>,
    pub det: T,
}

/// Covariant derivative requested from [`StratifiedGroup::horizontal_connection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionKind {
    /// `nabla^H_{X_i} X_j`.
    XX,
    /// `nabla^H_{X_i} T_s`, with `s` indexing the second layer.
    XT,
}

/// Builds and validates a group from a preset.
pub fn build_group<T: Real>(preset: &Preset) -> Result<StratifiedGroup<T>> {
    match preset {
        Preset::Heisenberg(n) => {
            if *n == 0 {
                return Err(CalcError::InvalidGroup("Heisenberg group needs n >= 1".into()));
            }
            let entries = (0..*n).map(|i| BracketEntry { i, j: n + i, k: 2 * n, value: 1.0 }).collect();
            StratifiedGroup::from_parts(GroupKind::Heisenberg(*n), vec![2 * n, 1], entries)
        }
        Preset::Engel => {
            let entries = vec![
                BracketEntry { i: 0, j: 1, k: 2, value: 1.0 },
                BracketEntry { i: 0, j: 2, k: 3, value: 1.0 },
            ];
            StratifiedGroup::from_parts(GroupKind::Engel, vec![2, 1, 1], entries)
        }
        Preset::Custom { layer_dims, brackets } => {
            if layer_dims.len() > MAX_STEP {
                return Err(CalcError::InvalidGroup(format!(
                    "step {} exceeds the supported maximum {MAX_STEP}",
                    layer_dims.len()
                )));
            }
            StratifiedGroup::from_parts(GroupKind::Custom, layer_dims.clone(), brackets.clone())
        }
    }
}

impl<T: Real> StratifiedGroup<T> {
    fn from_parts(kind: GroupKind, layer_dims: Vec<usize>, entries: Vec<BracketEntry>) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.iter().any(|&m| m == 0) {
            return Err(CalcError::InvalidGroup("layer dimensions must be positive and non-empty".into()));
        }
        let degree: Vec<usize> =
            layer_dims.iter().enumerate().flat_map(|(l, &m)| std::iter::repeat(l + 1).take(m)).collect();
        let n = degree.len();
        let mut c = vec![T::zero(); n * n * n];
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.i >= n || e.j >= n || e.k >= n {
                return Err(CalcError::InvalidGroup(format!("bracket index out of range in {e:?}")));
            }
            if !e.value.is_finite() {
                return Err(CalcError::InvalidGroup(format!("non-finite structure constant in {e:?}")));
            }
            if e.i == e.j && e.value != 0.0 {
                return Err(CalcError::InvalidGroup(format!("[e_{0}, e_{0}] must vanish", e.i)));
            }
            if degree[e.k] != degree[e.i] + degree[e.j] {
                return Err(CalcError::InvalidGroup(format!(
                    "bracket of layers {} and {} cannot land in layer {}",
                    degree[e.i], degree[e.j], degree[e.k]
                )));
            }
            if !seen.insert((e.i, e.j, e.k)) {
                return Err(CalcError::InvalidGroup(format!("duplicate bracket entry {e:?}")));
            }
            c[(e.i * n + e.j) * n + e.k] = lit(e.value);
        }
        // Entries given in one orientation only are completed by skew-symmetry;
        // entries given in both orientations must be opposite.
        for e in &entries {
            let forward = c[(e.i * n + e.j) * n + e.k];
            let backward = c[(e.j * n + e.i) * n + e.k];
            if seen.contains(&(e.j, e.i, e.k)) {
                if forward + backward != T::zero() {
                    return Err(CalcError::InvalidGroup(format!(
                        "structure constants for ({}, {}) -> {} are not skew-symmetric",
                        e.i, e.j, e.k
                    )));
                }
            } else {
                c[(e.j * n + e.i) * n + e.k] = -forward;
            }
        }
        let g = Self { kind, layer_dims, degree, c, entries };
        g.check_jacobi()?;
        Ok(g)
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        let tol: T = lit(1e-9);
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let ea = self.basis(a);
                    let eb = self.basis(b);
                    let ed = self.basis(d);
                    let s1 = self.bracket(&ea, &self.bracket(&eb, &ed));
                    let s2 = self.bracket(&eb, &self.bracket(&ed, &ea));
                    let s3 = self.bracket(&ed, &self.bracket(&ea, &eb));
                    if (0..n).any(|k| (s1[k] + s2[k] + s3[k]).abs() > tol) {
                        return Err(CalcError::InvalidGroup(format!(
                            "Jacobi identity fails for basis elements ({a}, {b}, {d})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn basis(&self, j: usize) -> Vec<T> {
        let mut e = vec![T::zero(); self.dim()];
        e[j] = T::one();
        e
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn is_heisenberg(&self) -> bool {
        matches!(self.kind, GroupKind::Heisenberg(_))
    }

    /// Number of layers.
    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Topological dimension `N`.
    pub fn dim(&self) -> usize {
        self.degree.len()
    }

    /// Dimension `m` of the horizontal layer.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Homogeneous dimension `Q = sum_j j m_j`.
    pub fn homogeneous_dim(&self) -> usize {
        self.layer_dims.iter().enumerate().map(|(j, m)| (j + 1) * m).sum()
    }

    /// Layer (1-based) of coordinate `idx`.
    pub fn degree(&self, idx: usize) -> usize {
        self.degree[idx]
    }

    /// Structure constants as supplied (one orientation per pair).
    pub fn bracket_entries(&self) -> &[BracketEntry] {
        &self.entries
    }

    /// `c_ij^k`, the `e_k` component of `[e_i, e_j]`.
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> T {
        let n = self.dim();
        self.c[(i * n + j) * n + k]
    }

    /// Horizontal group constant `b^s_ij`: `[X_i, X_j] = sum_s b^s_ij T_s` (all indices 0-based).
    pub fn horizontal_constant(&self, s: usize, i: usize, j: usize) -> T {
        let m = self.horizontal_dim();
        if self.step() < 2 {
            return T::zero();
        }
        self.structure_constant(i, j, m + s)
    }

    /// Dimension of the second layer (0 for abelian groups).
    pub fn vertical_dim(&self) -> usize {
        self.layer_dims.get(1).copied().unwrap_or(0)
    }

    /// Lie bracket of two algebra elements in the graded basis.
    pub fn bracket(&self, a: &[T], b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            if a[i] == T::zero() {
                continue;
            }
            for j in 0..n {
                if b[j] == T::zero() {
                    continue;
                }
                let w = a[i] * b[j];
                let base = (i * n + j) * n;
                for (k, o) in out.iter_mut().enumerate() {
                    let cc = self.c[base + k];
                    if cc != T::zero() {
                        *o = *o + w * cc;
                    }
                }
            }
        }
        out
    }

    /// Coordinate coefficients of the left-invariant field extending `e_j`, at `g`.
    ///
    /// `X(g) = e + [g, e]/2 + [g, [g, e]]/12`, exact up to step three.
    pub fn frame_column(&self, g: &[T], j: usize) -> Vec<T> {
        assert_eq!(g.len(), self.dim(), "point dimension mismatch");
        let e = self.basis(j);
        let ge = self.bracket(g, &e);
        let gge = self.bracket(g, &ge);
        let half: T = lit(0.5);
        let twelfth: T = lit(1.0 / 12.0);
        (0..self.dim()).map(|k| e[k] + half * ge[k] + twelfth * gge[k]).collect()
    }

    /// Directional derivative along `v` of the coefficients of frame column `j` at `g`.
    pub fn frame_column_derivative(&self, g: &[T], v: &[T], j: usize) -> Vec<T> {
        let e = self.basis(j);
        let ve = self.bracket(v, &e);
        let vge = self.bracket(v, &self.bracket(g, &e));
        let gve = self.bracket(g, &ve);
        let half: T = lit(0.5);
        let twelfth: T = lit(1.0 / 12.0);
        (0..self.dim()).map(|k| half * ve[k] + twelfth * (vge[k] + gve[k])).collect()
    }

    /// Full frame `(X_1..X_m, T_1.., ...)` at `g`.
    pub fn frame_at(&self, g: &[T]) -> FrameMatrix<T> {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n * n);
        for j in 0..n {
            cols.extend(self.frame_column(g, j));
        }
        FrameMatrix { n, cols }
    }

    /// Group law `a * b` (truncated BCH, exact up to step three).
    pub fn group_law(&self, a: &[T], b: &[T]) -> Vec<T> {
        let ab = self.bracket(a, b);
        let aab = self.bracket(a, &ab);
        let bba = self.bracket(b, &self.bracket(b, a));
        let half: T = lit(0.5);
        let twelfth: T = lit(1.0 / 12.0);
        (0..self.dim()).map(|k| a[k] + b[k] + half * ab[k] + twelfth * (aab[k] + bba[k])).collect()
    }

    /// Inverse element; in exponential coordinates this is `-g`.
    pub fn inverse(&self, g: &[T]) -> Vec<T> {
        g.iter().map(|&x| -x).collect()
    }

    /// Non-isotropic dilation: layer-j coordinates scale by `lambda^j`.
    pub fn dilate(&self, lambda: T, g: &[T]) -> Result<Vec<T>> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(CalcError::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(g.iter().zip(&self.degree).map(|(&x, &d)| x * lambda.powi(d as i32)).collect())
    }

    /// Euclidean norm of the layer-`j` block (1-based layer).
    fn layer_norm(&self, g: &[T], layer: usize) -> T {
        g.iter()
            .zip(&self.degree)
            .filter(|(_, &d)| d == layer)
            .fold(T::zero(), |a, (&x, _)| a + x * x)
            .sqrt()
    }

    /// Homogeneous gauge `(sum_j |g_j|^(2 r!/j))^(1/(2 r!))`.
    pub fn gauge_norm_standard(&self, g: &[T]) -> T {
        let r = self.step();
        let k = 2 * (1..=r).product::<usize>();
        let sum = (1..=r).fold(T::zero(), |acc, j| {
            acc + self.layer_norm(g, j).powi((k / j) as i32)
        });
        sum.powf(T::one() / T::from_usize(k).unwrap())
    }

    /// Gauge used by the library: the renormalised Koranyi gauge
    /// `((|x|^2 + |y|^2)^2 + 16 t^2)^(1/4)` on Heisenberg groups, the standard gauge otherwise.
    pub fn gauge_norm(&self, g: &[T]) -> T {
        match self.kind {
            GroupKind::Heisenberg(_) => {
                let h = self.layer_norm(g, 1);
                let t = self.layer_norm(g, 2);
                (h.powi(4) + lit::<T>(16.0) * t * t).powf(lit(0.25))
            }
            _ => self.gauge_norm_standard(g),
        }
    }

    /// Metric making `X_1, .., X_2n, sqrt(eps) T` orthonormal, with its inverse and determinant.
    pub fn metric_eps(&self, eps: T, g: &[T]) -> Result<MetricEps<T>> {
        if !self.is_heisenberg() {
            return Err(CalcError::Unsupported("the epsilon metric is defined for Heisenberg groups only".into()));
        }
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(CalcError::InvalidArgument(format!("epsilon must be positive, got {eps}")));
        }
        let n = self.dim();
        let f = self.frame_at(g).to_row_major();
        let finv = mat_inverse(n, &f)?;
        let mut d = vec![T::one(); n];
        d[n - 1] = T::one() / eps;
        // matrix = F^{-T} D F^{-1}, inverse = F D^{-1} F^T
        let mut matrix = vec![T::zero(); n * n];
        let mut inverse = vec![T::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                let mut s = T::zero();
                let mut si = T::zero();
                for k in 0..n {
                    s = s + finv[k * n + r] * d[k] * finv[k * n + c];
                    si = si + f[r * n + k] / d[k] * f[c * n + k];
                }
                matrix[r * n + c] = s;
                inverse[r * n + c] = si;
            }
        }
        let det = T::one() / eps;
        Ok(MetricEps { n, matrix, inverse, det })
    }

    /// Horizontal coefficients (on `X_1..X_m`) of `nabla^H_{X_i} X_j` or `nabla^H_{X_i} T_s`.
    pub fn horizontal_connection(&self, kind: ConnectionKind, i: usize, j: usize) -> Result<Vec<T>> {
        let m = self.horizontal_dim();
        if i >= m {
            return Err(CalcError::IndexOutOfRange(format!("horizontal index {i} (m = {m})")));
        }
        match kind {
            ConnectionKind::XX => {
                if j >= m {
                    return Err(CalcError::IndexOutOfRange(format!("horizontal index {j} (m = {m})")));
                }
                Ok(vec![T::zero(); m])
            }
            ConnectionKind::XT => {
                let k = self.vertical_dim();
                if j >= k {
                    return Err(CalcError::IndexOutOfRange(format!("second-layer index {j} (dimension {k})")));
                }
                let half: T = lit(0.5);
                Ok((0..m).map(|l| -half * self.horizontal_constant(j, i, l)).collect())
            }
        }
    }
}
