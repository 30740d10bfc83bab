use std::fmt::Write as _;

use hgts_tensor::{sigmoid, topk_lastdim, Element, Tensor};

use crate::config::TopkAxis;
use crate::error::{HgtsError, Result};

/// Confidence, incidence and additive mask for a batch of graphs, each
/// `rows` hyperedges by `cols` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperGraphStructure<T> {
    /// `[S, rows, cols]`, values in (0, 1).
    pub confidence: Tensor<T>,
    /// `[S, rows, cols]`, 0 or 1.
    pub incidence: Tensor<T>,
    /// `[S, rows, cols]`, 0 or `alpha`.
    pub mask: Tensor<T>,
    /// Ones per node (per-node TopK) or per hyperedge (per-hyperedge TopK).
    pub k: usize,
    pub axis: TopkAxis,
    pub alpha: f64,
}

fn as_batched<T: Element>(x: &Tensor<T>, what: &str) -> Result<Tensor<T>> {
    match *x.shape() {
        [r, d] => Ok(x.clone().reshape([1, r, d])?),
        [_, _, _] => Ok(x.clone()),
        _ => Err(HgtsError::InvalidArgument(format!("{what} must be rank 2 or 3, got {:?}", x.shape()))),
    }
}

/// Samples a hypergraph from query/node similarity.
///
/// `queries` is `[rows, D]` or `[S|1, rows, D]`, `nodes` is `[S, cols, D]`
/// (or `[cols, D]`). The confidence is `sigmoid(q·nᵀ)`; TopK then picks `k`
/// entries per node column (or per hyperedge row) with ties going to the
/// lower index.
pub fn build_structure<T: Element>(
    queries: &Tensor<T>,
    nodes: &Tensor<T>,
    alpha: f64,
    k: usize,
    axis: TopkAxis,
) -> Result<HyperGraphStructure<T>> {
    let q = as_batched(queries, "queries")?;
    let n = as_batched(nodes, "nodes")?;
    if q.shape()[2] != n.shape()[2] {
        return Err(HgtsError::InvalidArgument(format!(
            "query width {} differs from node width {}",
            q.shape()[2],
            n.shape()[2]
        )));
    }
    let confidence = sigmoid(&q.matmul_t(&n)?);
    let [s, rows, cols] = *confidence.shape() else { unreachable!("rank 3") };
    let limit = match axis {
        TopkAxis::PerNode => rows,
        TopkAxis::PerHyperedge => cols,
    };
    if k == 0 || k > limit {
        return Err(HgtsError::Config(format!(
            "TopK k={k} out of range 1..={limit} for a {rows}×{cols} graph"
        )));
    }
    let mut incidence = vec![T::zero(); confidence.numel()];
    match axis {
        TopkAxis::PerNode => {
            let by_node = confidence.transpose(1, 2)?;
            let idx = topk_lastdim(&by_node, k)?;
            for (slot, &r) in idx.data().iter().enumerate() {
                let (b, c) = (slot / (cols * k), (slot / k) % cols);
                incidence[(b * rows + r) * cols + c] = T::one();
            }
        }
        TopkAxis::PerHyperedge => {
            let idx = topk_lastdim(&confidence, k)?;
            for (slot, &c) in idx.data().iter().enumerate() {
                let row = slot / k;
                incidence[row * cols + c] = T::one();
            }
        }
    }
    let incidence = Tensor::new([s, rows, cols], incidence)?;
    let a = T::of(alpha);
    let mask = incidence.map(|&v| if v == T::one() { T::zero() } else { a });
    Ok(HyperGraphStructure {
        confidence,
        incidence,
        mask,
        k,
        axis,
        alpha,
    })
}

impl<T: Element> HyperGraphStructure<T> {
    pub fn slices(&self) -> usize {
        self.confidence.shape()[0]
    }

    pub fn rows(&self) -> usize {
        self.confidence.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.confidence.shape()[2]
    }

    fn slice<'a>(&self, t: &'a Tensor<T>, s: usize) -> &'a [T] {
        let n = self.rows() * self.cols();
        &t.data()[s * n..(s + 1) * n]
    }

    /// Number of hyperedges each node of slice `s` belongs to.
    pub fn column_sums(&self, s: usize) -> Vec<usize> {
        let cols = self.cols();
        let mut sums = vec![0; cols];
        for (i, &v) in self.slice(&self.incidence, s).iter().enumerate() {
            if v != T::zero() {
                sums[i % cols] += 1;
            }
        }
        sums
    }

    /// Number of nodes each hyperedge of slice `s` holds.
    pub fn row_sums(&self, s: usize) -> Vec<usize> {
        self.slice(&self.incidence, s)
            .chunks(self.cols())
            .map(|r| r.iter().filter(|&&v| v != T::zero()).count())
            .collect()
    }

    /// Node indices incident to hyperedge `row` of slice `s`.
    pub fn members(&self, s: usize, row: usize) -> Vec<usize> {
        let cols = self.cols();
        self.slice(&self.incidence, s)[row * cols..(row + 1) * cols]
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != T::zero())
            .map(|(c, _)| c)
            .collect()
    }

    /// Checks the structural contract: k ones per node (or hyperedge),
    /// mask entries exactly 0 or alpha, confidence inside (0, 1).
    pub fn check(&self) -> Result<()> {
        for s in 0..self.slices() {
            let sums = match self.axis {
                TopkAxis::PerNode => self.column_sums(s),
                TopkAxis::PerHyperedge => self.row_sums(s),
            };
            if let Some(bad) = sums.iter().find(|&&c| c != self.k) {
                return Err(HgtsError::Numeric(format!("slice {s}: {bad} incident entries, expected {}", self.k)));
            }
        }
        let a = T::of(self.alpha);
        for (m, adj) in self.mask.data().iter().zip(self.incidence.data()) {
            let want = if *adj == T::one() { T::zero() } else { a };
            if *m != want {
                return Err(HgtsError::Numeric("mask is not (1 - incidence)·alpha".into()));
            }
        }
        if self.confidence.data().iter().any(|&c| !(c >= T::zero() && c <= T::one())) {
            return Err(HgtsError::Numeric("confidence outside [0, 1]".into()));
        }
        Ok(())
    }

    /// One of `confidence`, `incidence`, `mask` for slice `s`, row by row.
    pub fn matrix(&self, which: &str, s: usize) -> Result<Vec<Vec<f64>>> {
        let t = match which {
            "confidence" => &self.confidence,
            "incidence" => &self.incidence,
            "mask" => &self.mask,
            _ => return Err(HgtsError::InvalidArgument(format!("unknown matrix {which:?}"))),
        };
        if s >= self.slices() {
            return Err(HgtsError::InvalidArgument(format!("slice {s} of {}", self.slices())));
        }
        Ok(self
            .slice(t, s)
            .chunks(self.cols())
            .map(|row| row.iter().map(|v| v.as_f64()).collect())
            .collect())
    }

    /// [`Self::matrix`] as CSV: a header of node indices, then one line per
    /// hyperedge.
    pub fn to_csv(&self, which: &str, s: usize) -> Result<String> {
        let rows = self.matrix(which, s)?;
        let mut out = (0..self.cols()).map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn seven_edges_give_two_per_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = random(&[7, 8], &mut rng);
        let n = random(&[3, 14, 8], &mut rng);
        let st = build_structure(&q, &n, -1e4, 7 / 3, TopkAxis::PerNode).unwrap();
        assert_eq!(st.incidence.shape(), &[3, 7, 14]);
        for s in 0..3 {
            assert!(st.column_sums(s).iter().all(|&c| c == 2));
        }
        st.check().unwrap();
    }

    #[test]
    fn orthogonal_vectors_tie_to_lowest_edges() {
        let q = Tensor::from_f64([4, 2], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let n = Tensor::<f64>::from_f64([3, 2], &[0.0, 1.0, 0.0, 2.0, 0.0, -1.0]).unwrap();
        let st = build_structure(&q, &n, -1e4, 1, TopkAxis::PerNode).unwrap();
        assert!(st.confidence.data().iter().all(|&c| c == 0.5));
        assert_eq!(st.members(0, 0), vec![0, 1, 2]);
        assert!(st.members(0, 1).is_empty());
    }

    #[test]
    fn sort_oracle_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random(&[5, 4], &mut rng);
        let n = random(&[1, 6, 4], &mut rng);
        let st = build_structure(&q, &n, -1.0, 2, TopkAxis::PerNode).unwrap();
        for c in 0..6 {
            let mut col: Vec<(f64, usize)> = (0..5).map(|r| (*st.confidence.at(&[0, r, c]), r)).collect();
            col.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, r) in col.iter().take(2) {
                assert_eq!(*st.incidence.at(&[0, r, c]), 1.0);
            }
        }
        assert!(st.mask.data().iter().all(|&m| m == 0.0 || m == -1.0));
    }

    #[test]
    fn per_hyperedge_axis_fills_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = build_structure(&random(&[4, 3], &mut rng), &random(&[2, 5, 3], &mut rng), -1e4, 2, TopkAxis::PerHyperedge).unwrap();
        for s in 0..2 {
            assert!(st.row_sums(s).iter().all(|&r| r == 2));
        }
        st.check().unwrap();
    }

    #[test]
    fn k_out_of_range_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random(&[4, 3], &mut rng);
        let n = random(&[5, 3], &mut rng);
        assert!(matches!(build_structure(&q, &n, -1.0, 5, TopkAxis::PerNode), Err(HgtsError::Config(_))));
        assert!(matches!(build_structure(&q, &n, -1.0, 0, TopkAxis::PerNode), Err(HgtsError::Config(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st = build_structure(&random(&[4, 3], &mut rng), &random(&[5, 3], &mut rng), -1e4, 1, TopkAxis::PerNode).unwrap();
        let csv = st.to_csv("incidence", 0).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "0,1,2,3,4");
        assert_eq!(lines.len(), 5);
    }
}
