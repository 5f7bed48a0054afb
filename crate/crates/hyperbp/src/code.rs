//! Binary linear block codes and their Tanner-graph edge structure.
//!
//! A code is defined by a binary parity-check matrix `H` of size `(n-k) x n`
//! and, optionally, a generator matrix `G` of size `k x n` with `G Hᵀ = 0`.
//! All decoders address messages by *edge*, i.e. by the 1-entries of `H`;
//! [`EdgeIndex`] fixes a deterministic edge enumeration (column-major over
//! `H`) that every downstream tensor, weight vector and checkpoint relies on.

use std::fmt;

use thiserror::Error;

/// Errors from matrix parsing and code construction.
#[derive(Debug, Error)]
pub enum CodeError {
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: degree/entry mismatch: {msg}")]
    DegreeMismatch { line: usize, msg: String },
    #[error("line {line}: index {index} out of range 1..={max}")]
    IndexOutOfRange { line: usize, index: usize, max: usize },
    #[error("line {line}: ragged row: expected {expected} columns, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-binary symbol `{symbol}`")]
    NonBinarySymbol { line: usize, symbol: String },
    #[error("matrix has {dim}: {msg}")]
    BadDimensions { dim: String, msg: String },
    #[error("row {row} of H is all-zero")]
    ZeroRow { row: usize },
    #[error("column {col} of H is all-zero")]
    ZeroColumn { col: usize },
    #[error("generator is not orthogonal to H: row {row} of G has nonzero syndrome")]
    GeneratorNotOrthogonal { row: usize },
    #[error("generator matrix absent; encoding requires G")]
    GeneratorAbsent,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Dense binary matrix, row-major, entries 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        debug_assert!(data.iter().all(|&b| b <= 1));
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&b| b == 1).count()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, c) == 1).count()
    }

    /// Number of 1-entries.
    pub fn ones(&self) -> usize {
        self.data.iter().filter(|&&b| b == 1).count()
    }
}

impl fmt::Display for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|b| b.to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// A binary linear block code: parity-check matrix `H`, optional generator
/// `G`, and the degree profile of the Tanner graph.
#[derive(Debug, Clone)]
pub struct LinearCode {
    name: String,
    n: usize,
    k: usize,
    h: BinMatrix,
    g: Option<BinMatrix>,
    col_degrees: Vec<usize>,
    row_degrees: Vec<usize>,
    d_v_max: usize,
    edge_count: usize,
}

impl LinearCode {
    /// Build a code from its parity-check matrix. `k` is derived as
    /// `n - rows(H)`. Every row and column of `H` must be nonzero.
    pub fn from_parity(name: impl Into<String>, h: BinMatrix) -> Result<Self, CodeError> {
        let n = h.cols();
        let m = h.rows();
        if m == 0 || n == 0 || m > n {
            return Err(CodeError::BadDimensions {
                dim: format!("{m} x {n}"),
                msg: "H must be (n-k) x n with 0 < n-k <= n".into(),
            });
        }
        let row_degrees: Vec<usize> = (0..m).map(|r| h.row_weight(r)).collect();
        if let Some(r) = row_degrees.iter().position(|&d| d == 0) {
            return Err(CodeError::ZeroRow { row: r });
        }
        let col_degrees: Vec<usize> = (0..n).map(|c| h.col_weight(c)).collect();
        if let Some(c) = col_degrees.iter().position(|&d| d == 0) {
            return Err(CodeError::ZeroColumn { col: c });
        }
        let d_v_max = *col_degrees.iter().max().unwrap();
        let edge_count = h.ones();
        debug_assert_eq!(edge_count, col_degrees.iter().sum::<usize>());
        debug_assert_eq!(edge_count, row_degrees.iter().sum::<usize>());
        Ok(Self {
            name: name.into(),
            n,
            k: n - m,
            h,
            g: None,
            col_degrees,
            row_degrees,
            d_v_max,
            edge_count,
        })
    }

    /// Attach a generator matrix, verifying dimensions and `G Hᵀ = 0`.
    pub fn with_generator(mut self, g: BinMatrix) -> Result<Self, CodeError> {
        if g.rows() != self.k || g.cols() != self.n {
            return Err(CodeError::BadDimensions {
                dim: format!("{} x {}", g.rows(), g.cols()),
                msg: format!("G must be {} x {}", self.k, self.n),
            });
        }
        for r in 0..g.rows() {
            let s = syndrome_of(&self.h, g.row(r));
            if s.iter().any(|&b| b != 0) {
                return Err(CodeError::GeneratorNotOrthogonal { row: r });
            }
        }
        self.g = Some(g);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Code length in bits.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length in bits (`n - rows(H)`).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Code rate `k / n`.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn parity(&self) -> &BinMatrix {
        &self.h
    }

    pub fn generator(&self) -> Option<&BinMatrix> {
        self.g.as_ref()
    }

    pub fn col_degrees(&self) -> &[usize] {
        &self.col_degrees
    }

    pub fn row_degrees(&self) -> &[usize] {
        &self.row_degrees
    }

    /// Maximum variable-node degree.
    pub fn d_v_max(&self) -> usize {
        self.d_v_max
    }

    /// Total number of Tanner-graph edges (1-entries of `H`).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// True when every variable degree equals `d_v_max` and every check degree
    /// equals the common row degree.
    pub fn is_regular(&self) -> bool {
        self.col_degrees.iter().all(|&d| d == self.d_v_max)
            && self.row_degrees.windows(2).all(|w| w[0] == w[1])
    }

    /// Encode a message of length `k`: `c = u G mod 2`.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>, CodeError> {
        let g = self.g.as_ref().ok_or(CodeError::GeneratorAbsent)?;
        if u.len() != self.k {
            return Err(CodeError::LengthMismatch { expected: self.k, got: u.len() });
        }
        let mut c = vec![0u8; self.n];
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0 {
                for (cv, gv) in c.iter_mut().zip(g.row(i)) {
                    *cv ^= gv;
                }
            }
        }
        Ok(c)
    }

    /// Syndrome `H cᵀ mod 2` (length `n - k`).
    pub fn syndrome(&self, c: &[u8]) -> Result<Vec<u8>, CodeError> {
        if c.len() != self.n {
            return Err(CodeError::LengthMismatch { expected: self.n, got: c.len() });
        }
        Ok(syndrome_of(&self.h, c))
    }

    /// True when `c` is a valid codeword.
    pub fn is_codeword(&self, c: &[u8]) -> bool {
        self.syndrome(c).map(|s| s.iter().all(|&b| b == 0)).unwrap_or(false)
    }
}

/// One-line summary used by code inspection: size, edge count, regularity.
pub fn size_summary(code: &LinearCode) -> String {
    if code.is_regular() {
        format!(
            "{}: n={} k={} E={} regular d_v={}",
            code.name(),
            code.n(),
            code.k(),
            code.edge_count(),
            code.d_v_max()
        )
    } else {
        format!(
            "{}: n={} k={} E={} irregular d_v_max={}",
            code.name(),
            code.n(),
            code.k(),
            code.edge_count(),
            code.d_v_max()
        )
    }
}

fn syndrome_of(h: &BinMatrix, c: &[u8]) -> Vec<u8> {
    (0..h.rows())
        .map(|r| h.row(r).iter().zip(c).fold(0u8, |acc, (&hv, &cv)| acc ^ (hv & cv)))
        .collect()
}

/// Deterministic enumeration of the Tanner-graph edges and the per-edge
/// exclusion lists used by every message-passing update.
///
/// Edges are ordered column-major over `H`: all edges of variable 0 in
/// ascending check order, then variable 1, and so on. Edge `e = (c, v)`
/// excludes itself from both of its neighbor lists.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    edges: Vec<(usize, usize)>,
    var_of_edge: Vec<usize>,
    chk_of_edge: Vec<usize>,
    var_all: Vec<Vec<usize>>,
    chk_all: Vec<Vec<usize>>,
    var_neighbors: Vec<Vec<usize>>,
    chk_neighbors: Vec<Vec<usize>>,
}

impl EdgeIndex {
    /// Enumerate the edges of `code` and precompute all adjacency lists.
    pub fn build(code: &LinearCode) -> Self {
        let h = code.parity();
        let n = code.n();
        let m = h.rows();
        let mut edges = Vec::with_capacity(code.edge_count());
        let mut var_all: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut chk_all: Vec<Vec<usize>> = vec![Vec::new(); m];
        for v in 0..n {
            for c in 0..m {
                if h.get(c, v) == 1 {
                    let e = edges.len();
                    edges.push((c, v));
                    var_all[v].push(e);
                    chk_all[c].push(e);
                }
            }
        }
        let var_of_edge: Vec<usize> = edges.iter().map(|&(_, v)| v).collect();
        let chk_of_edge: Vec<usize> = edges.iter().map(|&(c, _)| c).collect();
        let var_neighbors = edges
            .iter()
            .enumerate()
            .map(|(e, &(_, v))| var_all[v].iter().copied().filter(|&e2| e2 != e).collect())
            .collect();
        let chk_neighbors = edges
            .iter()
            .enumerate()
            .map(|(e, &(c, _))| chk_all[c].iter().copied().filter(|&e2| e2 != e).collect())
            .collect();
        Self { edges, var_of_edge, chk_of_edge, var_all, chk_all, var_neighbors, chk_neighbors }
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The `(check, variable)` pair of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn var_of_edge(&self) -> &[usize] {
        &self.var_of_edge
    }

    pub fn chk_of_edge(&self) -> &[usize] {
        &self.chk_of_edge
    }

    /// All edge indices of variable `v`, ascending.
    pub fn var_all(&self, v: usize) -> &[usize] {
        &self.var_all[v]
    }

    /// All edge indices of check `c`, ascending.
    pub fn chk_all(&self, c: usize) -> &[usize] {
        &self.chk_all[c]
    }

    pub fn num_vars(&self) -> usize {
        self.var_all.len()
    }

    pub fn num_checks(&self) -> usize {
        self.chk_all.len()
    }

    /// Edge indices of `N(v) \ {e}` for edge `e = (c, v)`.
    pub fn var_neighbors(&self, e: usize) -> &[usize] {
        &self.var_neighbors[e]
    }

    /// Edge indices of `N(c) \ {e}` for edge `e = (c, v)`.
    pub fn chk_neighbors(&self, e: usize) -> &[usize] {
        &self.chk_neighbors[e]
    }

    /// Reconstruct the parity-check matrix from the edge list.
    pub fn to_parity(&self) -> BinMatrix {
        let mut h = BinMatrix::zeros(self.num_checks(), self.num_vars());
        for &(c, v) in &self.edges {
            h.set(c, v, 1);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h_from_rows(rows: &[&[u8]]) -> BinMatrix {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        BinMatrix::new(r, c, data)
    }

    #[test]
    fn from_parity_derives_degrees() {
        let h = h_from_rows(&[&[1, 1, 0], &[0, 1, 1]]);
        let code = LinearCode::from_parity("toy", h).unwrap();
        assert_eq!(code.n(), 3);
        assert_eq!(code.k(), 1);
        assert_eq!(code.edge_count(), 4);
        assert_eq!(code.col_degrees(), &[1, 2, 1]);
        assert_eq!(code.row_degrees(), &[2, 2]);
        assert_eq!(code.d_v_max(), 2);
        assert!(!code.is_regular());
    }

    #[test]
    fn zero_row_and_column_rejected() {
        let h = h_from_rows(&[&[1, 1, 1], &[0, 0, 0]]);
        assert!(matches!(
            LinearCode::from_parity("bad", h),
            Err(CodeError::ZeroRow { row: 1 })
        ));
        let h = h_from_rows(&[&[1, 0, 1], &[1, 0, 1]]);
        assert!(matches!(
            LinearCode::from_parity("bad", h),
            Err(CodeError::ZeroColumn { col: 1 })
        ));
    }

    #[test]
    fn generator_orthogonality_checked() {
        // Single parity check: accepted generator rows have even weight.
        let h = h_from_rows(&[&[1, 1, 1]]);
        let code = LinearCode::from_parity("spc", h.clone()).unwrap();
        let g = h_from_rows(&[&[1, 0, 1], &[0, 1, 1]]);
        assert!(code.clone().with_generator(g).is_ok());

        let code = LinearCode::from_parity("spc", h).unwrap();
        let g_bad = h_from_rows(&[&[1, 0, 0], &[0, 1, 1]]);
        assert!(matches!(
            code.with_generator(g_bad),
            Err(CodeError::GeneratorNotOrthogonal { row: 0 })
        ));
    }

    #[test]
    fn encode_zero_message_gives_zero_codeword() {
        let h = h_from_rows(&[&[1, 1, 1]]);
        let g = h_from_rows(&[&[1, 0, 1], &[0, 1, 1]]);
        let code = LinearCode::from_parity("spc", h).unwrap().with_generator(g).unwrap();
        assert_eq!(code.encode(&[0, 0]).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn encode_selects_rows() {
        let h = h_from_rows(&[&[1, 1, 1]]);
        let g = h_from_rows(&[&[1, 0, 1], &[0, 1, 1]]);
        let code = LinearCode::from_parity("spc", h).unwrap().with_generator(g).unwrap();
        assert_eq!(code.encode(&[1, 0]).unwrap(), vec![1, 0, 1]);
        assert_eq!(code.encode(&[1, 1]).unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn encoded_words_have_zero_syndrome() {
        let h = h_from_rows(&[&[1, 1, 0, 1], &[0, 1, 1, 1]]);
        // Null-space basis for this H (k = 2), verified by hand:
        // r0 = 1101, r1 = 0111; g0 = 1110, g1 = 0101 are orthogonal to both.
        let g = h_from_rows(&[&[1, 1, 1, 0], &[0, 1, 0, 1]]);
        let code = LinearCode::from_parity("t", h).unwrap().with_generator(g).unwrap();
        for u0 in 0..2u8 {
            for u1 in 0..2u8 {
                let c = code.encode(&[u0, u1]).unwrap();
                assert!(code.is_codeword(&c), "u = [{u0},{u1}] -> {c:?}");
            }
        }
    }

    #[test]
    fn encode_without_generator_errors() {
        let h = h_from_rows(&[&[1, 1, 1]]);
        let code = LinearCode::from_parity("spc", h).unwrap();
        assert!(matches!(code.encode(&[0, 0]), Err(CodeError::GeneratorAbsent)));
    }

    #[test]
    fn syndrome_examples() {
        let h = h_from_rows(&[&[1, 1, 1]]);
        let code = LinearCode::from_parity("spc", h).unwrap();
        assert_eq!(code.syndrome(&[0, 0, 0]).unwrap(), vec![0]);
        assert_eq!(code.syndrome(&[1, 1, 0]).unwrap(), vec![0]);
        assert_eq!(code.syndrome(&[1, 0, 0]).unwrap(), vec![1]);
        assert!(matches!(
            code.syndrome(&[1, 0]),
            Err(CodeError::LengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn edge_index_single_check() {
        let h = h_from_rows(&[&[1, 1, 1], &[1, 0, 1]]);
        let code = LinearCode::from_parity("t", h).unwrap();
        let idx = EdgeIndex::build(&code);
        // Column-major: v0 -> checks 0,1; v1 -> check 0; v2 -> checks 0,1.
        assert_eq!(idx.edges(), &[(0, 0), (1, 0), (0, 1), (0, 2), (1, 2)]);
        // chk_neighbors of edge 0 = other edges of check 0 = {2, 3}.
        assert_eq!(idx.chk_neighbors(0), &[2, 3]);
        // var_neighbors of edge 0 = other edges of variable 0 = {1}.
        assert_eq!(idx.var_neighbors(0), &[1]);
    }

    #[test]
    fn edge_index_spc_row() {
        let h = h_from_rows(&[&[1, 1, 1]]);
        let code = LinearCode::from_parity("spc", h).unwrap();
        let idx = EdgeIndex::build(&code);
        assert_eq!(idx.edges(), &[(0, 0), (0, 1), (0, 2)]);
        assert_eq!(idx.chk_neighbors(0), &[1, 2]);
    }

    #[test]
    fn exclusion_lists_have_degree_minus_one_entries() {
        // Irregular H.
        let h = h_from_rows(&[
            &[1, 1, 0, 1, 0],
            &[1, 0, 1, 0, 1],
            &[0, 1, 1, 0, 1],
        ]);
        let code = LinearCode::from_parity("t", h).unwrap();
        let idx = EdgeIndex::build(&code);
        for e in 0..idx.len() {
            let (c, v) = idx.edge(e);
            assert_eq!(idx.var_neighbors(e).len(), code.col_degrees()[v] - 1);
            assert_eq!(idx.chk_neighbors(e).len(), code.row_degrees()[c] - 1);
            assert!(!idx.var_neighbors(e).contains(&e));
            assert!(!idx.chk_neighbors(e).contains(&e));
        }
    }

    #[test]
    fn edge_list_round_trips_to_parity() {
        let h = h_from_rows(&[
            &[1, 1, 0, 1, 0, 1],
            &[1, 0, 1, 0, 1, 1],
            &[0, 1, 1, 1, 1, 0],
        ]);
        let code = LinearCode::from_parity("t", h.clone()).unwrap();
        let idx = EdgeIndex::build(&code);
        assert_eq!(idx.to_parity(), h);
    }
}
