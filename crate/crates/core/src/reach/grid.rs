use std::collections::BTreeSet;

use nalgebra::DVector;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;

use crate::dynamics::{ControlRange, ControlSystem, StepMap};
use crate::error::{Error, Result};

/// Test points sit at this fraction of the way from the cell center to
/// each face. `1.0` puts them on the faces themselves.
pub const DEFAULT_FACE_INSET: f64 = 0.5;

/// Box of cells, transition time and the finite set of controls used to
/// build a transition graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub window: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
    pub tau: f64,
    pub control_samples: Vec<DVector<f64>>,
    pub face_inset: f64,
    /// RK4 step for the time-`tau` maps.
    pub step: f64,
}

impl GridSpec {
    /// Grid whose control samples are the `levels`-lattice of `omega`; the
    /// lattice always contains the vertices of `Ω` and `0`.
    pub fn new(
        window: Vec<(f64, f64)>,
        resolution: Vec<usize>,
        tau: f64,
        omega: &ControlRange,
        levels: usize,
    ) -> Result<Self> {
        let spec = Self {
            window,
            resolution,
            tau,
            control_samples: omega.lattice(levels),
            face_inset: DEFAULT_FACE_INSET,
            step: (tau / 20.0).min(1e-2),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `[−half, half]^dim` with `cells` cells per axis.
    pub fn cube(
        dim: usize,
        half: f64,
        cells: usize,
        tau: f64,
        omega: &ControlRange,
        levels: usize,
    ) -> Result<Self> {
        Self::new(
            vec![(-half, half); dim],
            vec![cells; dim],
            tau,
            omega,
            levels,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.is_empty() || self.window.len() != self.resolution.len() {
            return Err(Error::InvalidParameter(
                "window and resolution must have the same positive length".into(),
            ));
        }
        if let Some((lo, hi)) = self
            .window
            .iter()
            .find(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "window interval [{lo}, {hi}] is empty or unbounded"
            )));
        }
        if self.resolution.iter().any(|&r| r < 2) {
            return Err(Error::InvalidParameter(
                "resolution must be at least 2 on every axis".into(),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.face_inset > 0.0 && self.face_inset <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "face inset must lie in (0, 1], got {}",
                self.face_inset
            )));
        }
        if !self
            .control_samples
            .iter()
            .any(|u| u.iter().all(|&v| v == 0.0))
        {
            return Err(Error::InvalidParameter(
                "control samples must contain 0".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.window.len()
    }

    pub fn num_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        let (lo, hi) = self.window[axis];
        (hi - lo) / self.resolution[axis] as f64
    }

    /// Multi-index of a flat cell index; axis 0 varies fastest.
    pub fn multi_index(&self, mut cell: usize) -> Vec<usize> {
        self.resolution
            .iter()
            .map(|&r| {
                let i = cell % r;
                cell /= r;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .rev()
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    /// Cell containing `p`, or `None` outside the window.
    pub fn cell_of(&self, p: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(p.len());
        for (axis, &v) in p.iter().enumerate() {
            let (lo, hi) = self.window[axis];
            if !(v >= lo && v <= hi) {
                return None;
            }
            let i = ((v - lo) / self.cell_width(axis)).floor() as usize;
            idx.push(i.min(self.resolution[axis] - 1));
        }
        Some(self.flat_index(&idx))
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.window[axis].0 + (i as f64 + 0.5) * self.cell_width(axis))
            .collect()
    }

    /// Cell center followed by one point towards each of the `2·dim` faces.
    pub fn test_points(&self, cell: usize) -> Vec<Vec<f64>> {
        let c = self.center(cell);
        let mut pts = vec![c.clone()];
        for axis in 0..self.dim() {
            let offset = 0.5 * self.face_inset * self.cell_width(axis);
            for sign in [-1.0, 1.0] {
                let mut p = c.clone();
                p[axis] += sign * offset;
                pts.push(p);
            }
        }
        pts
    }

    /// Cells sharing a face with `cell`.
    pub fn face_neighbors(&self, cell: usize) -> Vec<usize> {
        let idx = self.multi_index(cell);
        let mut out = Vec::with_capacity(2 * idx.len());
        for axis in 0..idx.len() {
            if idx[axis] > 0 {
                let mut j = idx.clone();
                j[axis] -= 1;
                out.push(self.flat_index(&j));
            }
            if idx[axis] + 1 < self.resolution[axis] {
                let mut j = idx.clone();
                j[axis] += 1;
                out.push(self.flat_index(&j));
            }
        }
        out
    }

    /// Cells whose multi-index differs from that of `cell` by at most one
    /// in every coordinate, `cell` excluded.
    pub fn chebyshev_neighbors(&self, cell: usize) -> Vec<usize> {
        let idx = self.multi_index(cell);
        let mut out = vec![Vec::new()];
        for (axis, &i) in idx.iter().enumerate() {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(self.resolution[axis] - 1);
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    (lo..=hi).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|j| self.flat_index(&j))
            .filter(|&c| c != cell)
            .collect()
    }

    /// True when no face of `cell` lies on the boundary of the window.
    pub fn is_window_interior(&self, cell: usize) -> bool {
        self.multi_index(cell)
            .iter()
            .zip(&self.resolution)
            .all(|(&i, &r)| i > 0 && i + 1 < r)
    }
}

/// Directed graph on grid cells plus a sink node for leaving the window.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    pub spec: GridSpec,
    pub graph: DiGraph<(), ()>,
}

impl TransitionGraph {
    /// Node standing for everything outside the window.
    pub fn out_node(&self) -> usize {
        self.spec.num_cells()
    }

    pub fn successors(&self, cell: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .graph
            .neighbors(NodeIndex::new(cell))
            .map(|n| n.index())
            .collect();
        s.sort_unstable();
        s
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.graph
            .contains_edge(NodeIndex::new(from), NodeIndex::new(to))
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }
}

/// Edge `c → c′` whenever some sampled constant control maps a test point
/// of `c` into `c′` in time `τ`.
pub fn grid_transition_graph<S: ControlSystem + ?Sized>(
    sys: &S,
    spec: &GridSpec,
) -> Result<TransitionGraph> {
    spec.validate()?;
    if spec.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: spec.dim(),
        });
    }
    let maps: Vec<StepMap<'_>> = spec
        .control_samples
        .iter()
        .map(|u| sys.constant_control_map(u, spec.tau, spec.step))
        .collect::<Result<_>>()?;
    let cells = spec.num_cells();
    let out = cells;
    let targets: Vec<BTreeSet<usize>> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let mut t = BTreeSet::new();
            for p in spec.test_points(cell) {
                for map in &maps {
                    t.insert(spec.cell_of(&map(&p)).unwrap_or(out));
                }
            }
            t
        })
        .collect();
    let mut graph = DiGraph::with_capacity(cells + 1, targets.iter().map(BTreeSet::len).sum());
    for _ in 0..=cells {
        graph.add_node(());
    }
    for (from, ts) in targets.iter().enumerate() {
        for &to in ts {
            graph.add_edge(NodeIndex::new(from), NodeIndex::new(to), ());
        }
    }
    Ok(TransitionGraph {
        spec: spec.clone(),
        graph,
    })
}

/// A strongly connected component of the transition graph with at least
/// one interior cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSetEstimate {
    /// Flat cell indices, ascending.
    pub cells: Vec<usize>,
    /// Cells all of whose face neighbors lie in the component.
    pub interior_cells: usize,
    /// The identity's cell is in the component or touches it.
    pub contains_identity_closure: bool,
    /// Largest distance between centers of boundary cells.
    pub diameter: f64,
}

impl ControlSetEstimate {
    pub fn multi_indices(&self, spec: &GridSpec) -> Vec<Vec<usize>> {
        self.cells.iter().map(|&c| spec.multi_index(c)).collect()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

/// Components with nonempty interior, largest first.
pub fn control_set_estimate(g: &TransitionGraph) -> Vec<ControlSetEstimate> {
    let spec = &g.spec;
    let cells = spec.num_cells();
    let sccs = tarjan_scc(&g.graph);
    let mut comp = vec![usize::MAX; cells + 1];
    for (k, c) in sccs.iter().enumerate() {
        for n in c {
            comp[n.index()] = k;
        }
    }
    let identity = spec.cell_of(&vec![0.0; spec.dim()]);
    let mut out: Vec<ControlSetEstimate> = sccs
        .par_iter()
        .enumerate()
        .filter(|(_, c)| !c.iter().any(|n| n.index() == g.out_node()))
        .filter_map(|(k, c)| {
            let full = |cell: usize| {
                let nb = spec.face_neighbors(cell);
                nb.len() == 2 * spec.dim() && nb.iter().all(|&m| comp[m] == k)
            };
            let mut members: Vec<usize> = c.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            let interior = members.iter().filter(|&&m| full(m)).count();
            if interior == 0 {
                return None;
            }
            let contains_identity_closure = identity.is_some_and(|e| {
                comp[e] == k || spec.chebyshev_neighbors(e).iter().any(|&m| comp[m] == k)
            });
            let boundary: Vec<Vec<f64>> = members
                .iter()
                .filter(|&&m| !full(m))
                .map(|&m| spec.center(m))
                .collect();
            let mut diameter = 0.0f64;
            for (i, p) in boundary.iter().enumerate() {
                for q in &boundary[i + 1..] {
                    let d = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    diameter = diameter.max(d);
                }
            }
            Some(ControlSetEstimate {
                cells: members,
                interior_cells: interior,
                contains_identity_closure,
                diameter: diameter.sqrt(),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.cells
            .len()
            .cmp(&a.cells.len())
            .then(a.cells[0].cmp(&b.cells[0]))
    });
    out
}
