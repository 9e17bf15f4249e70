//! Ulam transfer matrices and their attractor/complement splitting.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::{CellSet, Location, Partition};
use crate::sparse::CsrMatrix;
use crate::system::{NoiseAtoms, StochasticMap};

/// What happens to sample points mapped off a non-wrapped axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SinkPolicy {
    /// Escaped mass feeds an absorbing state outside the attractor.
    #[default]
    SinkUnstable,
    /// Escaped mass is dropped; rows of `P₁` become sub-stochastic.
    Discard,
    /// Escaped points are projected onto the nearest boundary cell.
    Clamp,
}

impl fmt::Display for SinkPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SinkPolicy::SinkUnstable => "sink-unstable",
            SinkPolicy::Discard => "discard",
            SinkPolicy::Clamp => "clamp",
        })
    }
}

impl FromStr for SinkPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sink-unstable" | "sinkunstable" | "sink" => Ok(SinkPolicy::SinkUnstable),
            "discard" => Ok(SinkPolicy::Discard),
            "clamp" => Ok(SinkPolicy::Clamp),
            other => Err(Error::invalid(format!(
                "unknown sink policy `{other}` (expected sink-unstable, discard or clamp)"
            ))),
        }
    }
}

/// Sampled Perron-Frobenius matrix of a stochastic map on a partition.
///
/// Every matrix is `L × (L+1)`; column `L` is the escape sink.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    partition: Partition,
    noise: NoiseAtoms,
    sink_policy: SinkPolicy,
    per_atom: Vec<CsrMatrix>,
    combined: CsrMatrix,
    samples: usize,
    seed: u64,
}

impl TransferMatrix {
    /// Estimates `P^{w_ℓ}_{ij}` as the fraction of `samples` uniform points
    /// of cell `i` that atom `ℓ` sends into cell `j`.
    pub fn build(
        map: &StochasticMap,
        partition: &Partition,
        samples: usize,
        seed: u64,
        sink_policy: SinkPolicy,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::invalid("samples per cell must be at least 1"));
        }
        if map.state_dim() != partition.dim() {
            return Err(Error::invalid(format!(
                "map is {}-dimensional, partition is {}-dimensional",
                map.state_dim(),
                partition.dim()
            )));
        }
        let l = partition.len();
        let q = map.noise().len();
        let dim = partition.dim();
        let inv_m = 1.0 / samples as f64;

        // rows[i][ℓ] = sparse row of P^{w_ℓ} for cell i
        let rows: Vec<Vec<Vec<(usize, f64)>>> = (0..l)
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0.0; dim], Vec::new()),
                |(pts, image, hits): &mut (Vec<f64>, Vec<f64>, Vec<usize>), cell| {
                    pts.clear();
                    partition.sample_cell_into(cell, samples, seed, pts);
                    map.noise()
                        .values()
                        .iter()
                        .map(|w| {
                            hits.clear();
                            for x in pts.chunks_exact(dim) {
                                map.step_into(x, w, image);
                                hits.push(destination(partition, image, sink_policy, l));
                            }
                            hits.sort_unstable();
                            let mut row = Vec::new();
                            let mut k = 0;
                            while k < hits.len() {
                                let j = hits[k];
                                let run = hits[k..].iter().take_while(|&&h| h == j).count();
                                row.push((j, run as f64 * inv_m));
                                k += run;
                            }
                            row
                        })
                        .collect()
                },
            )
            .collect();

        let mut per_atom_rows: Vec<Vec<Vec<(usize, f64)>>> =
            (0..q).map(|_| Vec::with_capacity(l)).collect();
        for cell_rows in rows {
            for (atom, row) in cell_rows.into_iter().enumerate() {
                per_atom_rows[atom].push(row);
            }
        }
        let per_atom = per_atom_rows
            .into_iter()
            .map(|rows| CsrMatrix::from_rows(l + 1, rows))
            .collect::<Result<Vec<_>>>()?;

        let tm = Self::from_parts(
            partition.clone(),
            map.noise().clone(),
            sink_policy,
            per_atom,
            samples,
            seed,
        )?;
        let escaped = tm.escaped_mass();
        if escaped > 0.0 {
            warn!(
                "{}: {:.6} cell-masses of sampled points left the domain (policy {})",
                map.name(),
                escaped,
                sink_policy
            );
        }
        Ok(tm)
    }

    /// Reassembles a matrix from per-atom parts, recomputing the mixture.
    pub fn from_parts(
        partition: Partition,
        noise: NoiseAtoms,
        sink_policy: SinkPolicy,
        per_atom: Vec<CsrMatrix>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let l = partition.len();
        if per_atom.len() != noise.len() {
            return Err(Error::invalid(format!(
                "{} per-atom matrices for {} noise atoms",
                per_atom.len(),
                noise.len()
            )));
        }
        if let Some(bad) = per_atom
            .iter()
            .position(|m| m.nrows() != l || m.ncols() != l + 1)
        {
            return Err(Error::invalid(format!(
                "per-atom matrix {bad} is not {l}x{}",
                l + 1
            )));
        }
        let parts: Vec<(f64, &CsrMatrix)> = noise.probs().iter().copied().zip(&per_atom).collect();
        let combined = CsrMatrix::weighted_sum(&parts)?;
        Ok(Self {
            partition,
            noise,
            sink_policy,
            per_atom,
            combined,
            samples,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    /// Column index of the escape sink.
    pub fn sink(&self) -> usize {
        self.partition.len()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn noise(&self) -> &NoiseAtoms {
        &self.noise
    }

    pub fn sink_policy(&self) -> SinkPolicy {
        self.sink_policy
    }

    pub fn per_atom(&self) -> &[CsrMatrix] {
        &self.per_atom
    }

    pub fn combined(&self) -> &CsrMatrix {
        &self.combined
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total mass per step sent to the sink, summed over cells.
    pub fn escaped_mass(&self) -> f64 {
        let sink = self.sink();
        (0..self.len()).map(|i| self.combined.get(i, sink)).sum()
    }

    /// `L × L` cell-to-cell block of the combined matrix (sink column dropped).
    pub fn cell_matrix(&self) -> CsrMatrix {
        let l = self.len();
        let rows: Vec<usize> = (0..l).collect();
        let col_map: Vec<Option<usize>> = (0..=l).map(|j| (j < l).then_some(j)).collect();
        self.combined.select(&rows, &col_map, l)
    }

    /// `L × L` cell matrix in the block form `[[P₀, 0], [·, P₁]]`: rows of
    /// `x0` keep only their mass inside `x0`, renormalized, and fall back to
    /// a self-loop when none is left. Rows outside `x0` are unchanged.
    pub fn attractor_absorbing(&self, x0: &CellSet) -> Result<CsrMatrix> {
        let l = self.len();
        if x0.iter().any(|c| c >= l) {
            return Err(Error::invalid("attractor cell index out of range"));
        }
        let rows = (0..l)
            .map(|i| {
                let row = self.combined.row(i).filter(|&(j, _)| j < l);
                if !x0.contains(i) {
                    return row.collect();
                }
                let kept: Vec<(usize, f64)> = row.filter(|&(j, _)| x0.contains(j)).collect();
                let s: f64 = kept.iter().map(|e| e.1).sum();
                if s > 0.0 {
                    kept.into_iter().map(|(j, v)| (j, v / s)).collect()
                } else {
                    vec![(i, 1.0)]
                }
            })
            .collect();
        CsrMatrix::from_rows(l, rows)
    }

    /// `(L+1) × (L+1)` Markov matrix with the sink as an absorbing state.
    pub fn square(&self) -> CsrMatrix {
        let l = self.len();
        let mut rows: Vec<Vec<(usize, f64)>> =
            (0..l).map(|i| self.combined.row(i).collect()).collect();
        rows.push(vec![(l, 1.0)]);
        CsrMatrix::from_rows(l + 1, rows).expect("square matrix in range")
    }

    /// `Pⁿ` of [`square`](Self::square), by repeated sparse multiplication.
    pub fn compose_power(&self, n: usize) -> Result<CsrMatrix> {
        if n == 0 {
            return Err(Error::invalid("power must be at least 1"));
        }
        let p = self.square();
        let mut acc = p.clone();
        for _ in 1..n {
            acc = acc.matmul(&p)?;
        }
        Ok(acc)
    }

    /// Finite-dimensional Koopman action `(P f)_i = Σ_j P_ij f_j`; escaped
    /// mass contributes nothing.
    pub fn koopman_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::invalid(format!(
                "observable has {} entries, partition has {} cells",
                f.len(),
                self.len()
            )));
        }
        let mut ext = f.to_vec();
        ext.push(0.0);
        self.combined.mul_vec(&ext)
    }

    /// Splits the cells into the attractor set `x0` and its complement.
    pub fn decompose(&self, x0: &CellSet) -> Result<Decomposition> {
        let l = self.len();
        if x0.is_empty() {
            return Err(Error::invalid("attractor cell set is empty"));
        }
        if x0.len() >= l {
            return Err(Error::invalid(
                "attractor cell set covers every cell; nothing left to analyze",
            ));
        }
        if x0.iter().any(|c| c >= l) {
            return Err(Error::invalid("attractor cell index out of range"));
        }
        let x1 = x0.complement(l);
        let n1 = x1.len();
        let sink = self.sink();

        let mut p0_mass = Vec::with_capacity(n1);
        let mut escape_mass = Vec::with_capacity(n1);
        for i in x1.iter() {
            let mut to_x0 = 0.0;
            let mut esc = 0.0;
            for (j, v) in self.combined.row(i) {
                if j == sink {
                    esc += v;
                } else if x0.contains(j) {
                    to_x0 += v;
                }
            }
            p0_mass.push(to_x0);
            escape_mass.push(esc);
        }

        // the sink becomes a state only when something actually reaches it
        let sink_state = self.sink_policy == SinkPolicy::SinkUnstable
            && escape_mass.iter().any(|&m| m > 0.0);
        let size = n1 + usize::from(sink_state);
        let mut col_map: Vec<Option<usize>> = vec![None; l + 1];
        for (k, i) in x1.iter().enumerate() {
            col_map[i] = Some(k);
        }
        if sink_state {
            col_map[sink] = Some(n1);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = x1
            .iter()
            .map(|i| {
                self.combined
                    .row(i)
                    .filter_map(|(j, v)| col_map[j].map(|c| (c, v)))
                    .collect()
            })
            .collect();
        if sink_state {
            rows.push(vec![(n1, 1.0)]);
        }
        let p1 = CsrMatrix::from_rows(size, rows)?;
        Ok(Decomposition {
            x0: x0.clone(),
            x1,
            p1,
            p0_mass,
            escape_mass,
            sink_state,
        })
    }
}

fn destination(partition: &Partition, y: &[f64], policy: SinkPolicy, sink: usize) -> usize {
    if y.iter().any(|v| !v.is_finite()) {
        return sink;
    }
    let loc = match policy {
        SinkPolicy::Clamp => partition.locate_clamped(y),
        _ => partition.locate(y),
    };
    match loc {
        Ok(Location::Cell(j)) => j,
        _ => sink,
    }
}

/// `P₁` over the complement of the attractor cells.
///
/// Local index `k < x1.len()` is global cell `x1[k]`. With
/// [`SinkPolicy::SinkUnstable`] and nonzero escape, local index `x1.len()`
/// is an extra absorbing sink state.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub x0: CellSet,
    pub x1: CellSet,
    pub p1: CsrMatrix,
    /// Per-row mass flowing from `X₁` into `X₀`.
    pub p0_mass: Vec<f64>,
    /// Per-row mass leaving the domain.
    pub escape_mass: Vec<f64>,
    pub sink_state: bool,
}

impl Decomposition {
    /// Number of `P₁` states (cells plus the sink state, if present).
    pub fn size(&self) -> usize {
        self.p1.nrows()
    }

    pub fn cell_count(&self) -> usize {
        self.x1.len()
    }

    /// Global cell of local state `k`; `None` for the sink state.
    pub fn global(&self, k: usize) -> Option<usize> {
        self.x1.as_slice().get(k).copied()
    }

    /// Mass of row `k` kept among `X₁` cells, sent to `X₀` and escaped.
    pub fn row_balance(&self, k: usize) -> (f64, f64, f64) {
        let n1 = self.cell_count();
        let inner = self.p1.row(k).filter(|&(j, _)| j < n1).map(|(_, v)| v).sum();
        (inner, self.p0_mass[k], self.escape_mass[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Domain;

    fn line(lo: f64, hi: f64, n: usize, wrap: bool) -> Partition {
        Partition::new(Domain::new(vec![lo], vec![hi], vec![wrap]).unwrap(), vec![n]).unwrap()
    }

    fn map_1d(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> StochasticMap {
        StochasticMap::new("t", 1, NoiseAtoms::deterministic(1), vec![0.0], move |x, _, o| {
            o[0] = f(x[0])
        })
        .unwrap()
    }

    #[test]
    fn identity_map_gives_identity() {
        let p = line(-1.0, 1.0, 6, false);
        let tm = TransferMatrix::build(&map_1d(|x| x), &p, 37, 1, SinkPolicy::SinkUnstable)
            .unwrap();
        assert_eq!(tm.cell_matrix(), CsrMatrix::identity(6));
        assert_eq!(tm.escaped_mass(), 0.0);
    }

    #[test]
    fn shift_map_moves_one_cell_and_leaks_last_row() {
        let p = line(0.0, 1.0, 4, false);
        let map = StochasticMap::new("shift", 1, NoiseAtoms::deterministic(1), vec![0.0], |x, _, o| {
            o[0] = if x[0] == 0.0 { 0.0 } else { x[0] + 0.25 }
        })
        .unwrap();
        let tm = TransferMatrix::build(&map, &p, 50, 3, SinkPolicy::SinkUnstable).unwrap();
        let dense = tm.combined().to_dense();
        let expect = vec![
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ];
        assert_eq!(dense, expect);
        assert_eq!(tm.escaped_mass(), 1.0);
    }

    #[test]
    fn attractor_rows_become_absorbing() {
        let p = line(0.0, 1.0, 4, true);
        // rotation by one cell: every row leaves its cell
        let rot = map_1d(|x| if x == 0.0 { 0.0 } else { x + 0.25 });
        let tm = TransferMatrix::build(&rot, &p, 20, 2, SinkPolicy::SinkUnstable).unwrap();
        let a = tm.attractor_absorbing(&CellSet::single(2)).unwrap();
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(2, 3), 0.0);
        assert_eq!(a.get(1, 2), 1.0);
        let a = tm.attractor_absorbing(&CellSet::new(vec![2, 3], 4).unwrap()).unwrap();
        assert_eq!(a.get(2, 3), 1.0);
        assert_eq!(a.get(3, 3), 1.0);
        assert!(tm.attractor_absorbing(&CellSet::single(4)).is_err());
    }

    #[test]
    fn half_map_keeps_sign_cells() {
        let p = line(-1.0, 1.0, 2, false);
        let tm = TransferMatrix::build(&map_1d(|x| 0.5 * x), &p, 1000, 8, SinkPolicy::Discard)
            .unwrap();
        assert_eq!(tm.cell_matrix(), CsrMatrix::identity(2));
    }

    #[test]
    fn clamp_keeps_mass_in_domain() {
        let p = line(0.0, 1.0, 4, false);
        let tm = TransferMatrix::build(&map_1d(|x| 2.0 * x), &p, 40, 5, SinkPolicy::Clamp)
            .unwrap();
        assert_eq!(tm.escaped_mass(), 0.0);
        assert_eq!(tm.combined().get(3, 3), 1.0);
    }

    #[test]
    fn rows_sum_to_one() {
        let p = line(-1.0, 1.0, 9, false);
        let noise = NoiseAtoms::new(vec![vec![0.9], vec![1.3]], vec![0.5, 0.5]).unwrap();
        let map = StochasticMap::new("lin", 1, noise, vec![0.0], |x, w, o| o[0] = w[0] * x[0])
            .unwrap();
        let tm = TransferMatrix::build(&map, &p, 77, 2, SinkPolicy::SinkUnstable).unwrap();
        for m in tm.per_atom().iter().chain(std::iter::once(tm.combined())) {
            for s in m.row_sums() {
                assert!((s - 1.0).abs() < 1e-12, "{s}");
            }
        }
    }

    #[test]
    fn decompose_identity() {
        let p = line(0.0, 1.0, 5, false);
        let tm = TransferMatrix::build(&map_1d(|x| x), &p, 10, 1, SinkPolicy::SinkUnstable)
            .unwrap();
        let d = tm.decompose(&CellSet::single(0)).unwrap();
        assert_eq!(d.p1, CsrMatrix::identity(4));
        assert!(!d.sink_state);
    }

    fn from_dense(p: &[Vec<f64>]) -> TransferMatrix {
        let l = p.len();
        let part = line(0.0, 1.0, l, false);
        let rows = p
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        let per = CsrMatrix::from_rows(l + 1, rows).unwrap();
        TransferMatrix::from_parts(part, NoiseAtoms::deterministic(1), SinkPolicy::SinkUnstable, vec![per], 1, 0)
            .unwrap()
    }

    #[test]
    fn decompose_restricts_rows() {
        let tm = from_dense(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let d = tm.decompose(&CellSet::single(0)).unwrap();
        assert_eq!(d.p1.to_dense(), vec![vec![0.0]]);
        assert_eq!(d.p0_mass, vec![1.0]);

        let tm = from_dense(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.3, 0.5, 0.2],
        ]);
        let d = tm.decompose(&CellSet::single(0)).unwrap();
        assert_eq!(d.p1.to_dense()[1], vec![0.5, 0.2]);
        assert_eq!(d.p0_mass[1], 0.3);
        let (inner, to_x0, esc) = d.row_balance(1);
        assert!((inner + to_x0 + esc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_rejects_degenerate_splits() {
        let tm = from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(tm.decompose(&CellSet::default()).is_err());
        assert!(tm.decompose(&CellSet::new(vec![0, 1], 2).unwrap()).is_err());
    }

    #[test]
    fn sink_state_only_when_reached() {
        let p = line(0.0, 1.0, 4, false);
        let tm = TransferMatrix::build(&map_1d(|x| 1.5 * x), &p, 200, 4, SinkPolicy::SinkUnstable)
            .unwrap();
        let d = tm.decompose(&CellSet::single(0)).unwrap();
        assert!(d.sink_state);
        assert_eq!(d.size(), 4);
        assert_eq!(d.p1.get(3, 3), 1.0);

        let tm = TransferMatrix::build(&map_1d(|x| 1.5 * x), &p, 200, 4, SinkPolicy::Discard)
            .unwrap();
        let d = tm.decompose(&CellSet::single(0)).unwrap();
        assert!(!d.sink_state);
        assert_eq!(d.size(), 3);
        assert!(d.p1.row_sum(2) < 1.0);
    }

    #[test]
    fn koopman_fixes_constants_and_reads_columns() {
        let tm = from_dense(&[
            vec![0.5, 0.5, 0.0],
            vec![0.1, 0.2, 0.7],
            vec![0.0, 0.0, 1.0],
        ]);
        assert_eq!(tm.koopman_apply(&[1.0; 3]).unwrap(), vec![1.0; 3]);
        assert_eq!(tm.koopman_apply(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.7, 1.0]);
        assert!(tm.koopman_apply(&[1.0; 2]).is_err());
    }

    #[test]
    fn compose_power_of_permutation() {
        let tm = from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        assert_eq!(tm.compose_power(1).unwrap(), tm.square());
        assert_eq!(tm.compose_power(3).unwrap(), CsrMatrix::identity(4));
        assert!(tm.compose_power(0).is_err());
    }
}
