//! Combinatorial structures, games and path flows.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};

/// Relative feasibility tolerance for demand constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Arcs, O/D pairs and their path sets. Paths are stored as sorted arc
/// index lists and numbered globally in O/D order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    arcs: Vec<String>,
    od_pairs: Vec<String>,
    paths: Vec<Vec<usize>>,
    path_od: Vec<usize>,
    od_paths: Vec<Vec<usize>>,
    arc_index: HashMap<String, usize>,
}

impl Structure {
    /// Builds a structure from arc ids and, per O/D pair, an id and a list
    /// of paths given as arc ids.
    pub fn new(arcs: Vec<String>, od_pairs: Vec<(String, Vec<Vec<String>>)>) -> Result<Self> {
        let mut arc_index = HashMap::with_capacity(arcs.len());
        for (i, a) in arcs.iter().enumerate() {
            if arc_index.insert(a.clone(), i).is_some() {
                return Err(Error::Structure(format!("duplicate arc id {a:?}")));
            }
        }
        if arcs.is_empty() {
            return Err(Error::Structure("no arcs".into()));
        }
        if od_pairs.is_empty() {
            return Err(Error::Structure("no O/D pairs".into()));
        }
        let mut seen_od = BTreeSet::new();
        let mut indexed = Vec::with_capacity(od_pairs.len());
        for (id, paths) in &od_pairs {
            if !seen_od.insert(id.clone()) {
                return Err(Error::Structure(format!("duplicate O/D id {id:?}")));
            }
            let mut ps = Vec::with_capacity(paths.len());
            for p in paths {
                let mut idx = Vec::with_capacity(p.len());
                for a in p {
                    let i = *arc_index.get(a).ok_or_else(|| {
                        Error::Structure(format!("O/D {id:?}: unknown arc {a:?}"))
                    })?;
                    idx.push(i);
                }
                ps.push(idx);
            }
            indexed.push(ps);
        }
        let names = od_pairs.into_iter().map(|(id, _)| id).collect();
        Self::build(arcs, names, indexed, arc_index)
    }

    /// Builds a structure from arc counts and index-based paths; arcs are
    /// named `a0, a1, …` and O/D pairs `k0, k1, …`.
    pub fn from_indices(num_arcs: usize, od_paths: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let arcs: Vec<String> = (0..num_arcs).map(|i| format!("a{i}")).collect();
        let arc_index = arcs
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let names = (0..od_paths.len()).map(|k| format!("k{k}")).collect();
        for paths in &od_paths {
            for p in paths {
                if let Some(bad) = p.iter().find(|a| **a >= num_arcs) {
                    return Err(Error::Structure(format!("arc index {bad} out of range")));
                }
            }
        }
        Self::build(arcs, names, od_paths, arc_index)
    }

    /// `n` parallel single-arc paths serving one O/D pair.
    pub fn parallel(n: usize) -> Result<Self> {
        Self::from_indices(n, vec![(0..n).map(|i| vec![i]).collect()])
    }

    fn build(
        arcs: Vec<String>,
        od_pairs: Vec<String>,
        od_arc_paths: Vec<Vec<Vec<usize>>>,
        arc_index: HashMap<String, usize>,
    ) -> Result<Self> {
        let mut paths = Vec::new();
        let mut path_od = Vec::new();
        let mut od_paths = Vec::with_capacity(od_arc_paths.len());
        let mut all_paths: HashMap<Vec<usize>, usize> = HashMap::new();
        for (k, ps) in od_arc_paths.into_iter().enumerate() {
            if ps.len() < 2 {
                return Err(Error::Condition1(format!(
                    "O/D pair {:?} has {} path(s); at least 2 are required",
                    od_pairs[k],
                    ps.len()
                )));
            }
            let mut mine = Vec::with_capacity(ps.len());
            for p in ps {
                if p.is_empty() {
                    return Err(Error::Structure(format!(
                        "O/D pair {:?} has an empty path",
                        od_pairs[k]
                    )));
                }
                let mut set: Vec<usize> = p.clone();
                set.sort_unstable();
                set.dedup();
                if set.len() != p.len() {
                    return Err(Error::Structure(format!(
                        "O/D pair {:?} has a path repeating an arc",
                        od_pairs[k]
                    )));
                }
                if let Some(other) = all_paths.get(&set) {
                    let msg = if path_od[*other] == k {
                        format!("O/D pair {:?} lists the same path twice", od_pairs[k])
                    } else {
                        format!(
                            "path sets of O/D pairs {:?} and {:?} are not disjoint",
                            od_pairs[path_od[*other]], od_pairs[k]
                        )
                    };
                    return Err(Error::Condition1(msg));
                }
                all_paths.insert(set.clone(), paths.len());
                mine.push(paths.len());
                paths.push(set);
                path_od.push(k);
            }
            od_paths.push(mine);
        }
        let mut used = vec![false; arcs.len()];
        for p in &paths {
            for a in p {
                used[*a] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Condition1(format!(
                "arc {:?} lies on no path",
                arcs[i]
            )));
        }
        Ok(Structure {
            arcs,
            od_pairs,
            paths,
            path_od,
            od_paths,
            arc_index,
        })
    }

    pub fn arcs(&self) -> &[String] {
        &self.arcs
    }

    pub fn od_pairs(&self) -> &[String] {
        &self.od_pairs
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_od_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Arc indices of a path.
    pub fn path(&self, s: usize) -> &[usize] {
        &self.paths[s]
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    /// O/D pair index of a path.
    pub fn path_od(&self, s: usize) -> usize {
        self.path_od[s]
    }

    /// Path indices of an O/D pair.
    pub fn od_paths(&self, k: usize) -> &[usize] {
        &self.od_paths[k]
    }

    pub fn arc_index(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }
}

/// Per-path flow values `f_s`, indexed like `Structure::paths`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathFlow(pub Vec<f64>);

impl PathFlow {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A game `(τ, d)` on a shared structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    structure: Arc<Structure>,
    costs: Vec<CostFunction>,
    demands: Vec<f64>,
}

impl Game {
    /// Builds a game and checks Condition 2.
    pub fn new(
        structure: Arc<Structure>,
        costs: Vec<CostFunction>,
        demands: Vec<f64>,
    ) -> Result<Self> {
        let g = Self::generalized(structure, costs, demands)?;
        g.check_condition2()?;
        Ok(g)
    }

    /// Builds a game without Condition 2, e.g. limits of game sequences.
    pub fn generalized(
        structure: Arc<Structure>,
        costs: Vec<CostFunction>,
        demands: Vec<f64>,
    ) -> Result<Self> {
        if costs.len() != structure.num_arcs() {
            return Err(Error::Structure(format!(
                "{} cost functions for {} arcs",
                costs.len(),
                structure.num_arcs()
            )));
        }
        if demands.len() != structure.num_od_pairs() {
            return Err(Error::Structure(format!(
                "{} demands for {} O/D pairs",
                demands.len(),
                structure.num_od_pairs()
            )));
        }
        for (a, c) in costs.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::InvalidCost(format!("arc {:?}: {e}", structure.arcs()[a])))?;
        }
        if let Some(d) = demands.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "demand {d} is not a finite non-negative number"
            )));
        }
        Ok(Game {
            structure,
            costs,
            demands,
        })
    }

    /// `T(d) > 0` and every cost positive at `T/(4|S|)` (hence on
    /// `[T/(4|S|), T]` by monotonicity).
    pub fn check_condition2(&self) -> Result<()> {
        let t = self.total_demand();
        if !(t > 0.0) {
            return Err(Error::Condition2(format!(
                "total demand {t} is not positive"
            )));
        }
        let probe = t / (4.0 * self.structure.num_paths() as f64);
        for (a, c) in self.costs.iter().enumerate() {
            if !(c.value(probe) > 0.0) {
                return Err(Error::Condition2(format!(
                    "cost of arc {:?} vanishes at {probe}",
                    self.structure.arcs()[a]
                )));
            }
        }
        Ok(())
    }

    pub fn structure(&self) -> &Arc<Structure> {
        &self.structure
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().sum()
    }

    pub fn num_arcs(&self) -> usize {
        self.structure.num_arcs()
    }

    pub fn num_paths(&self) -> usize {
        self.structure.num_paths()
    }

    pub fn num_od_pairs(&self) -> usize {
        self.structure.num_od_pairs()
    }

    pub fn with_costs(&self, costs: Vec<CostFunction>) -> Result<Self> {
        Game::new(self.structure.clone(), costs, self.demands.clone())
    }

    pub fn with_demands(&self, demands: Vec<f64>) -> Result<Self> {
        Game::new(self.structure.clone(), self.costs.clone(), demands)
    }

    pub fn same_structure(&self, other: &Game) -> bool {
        Arc::ptr_eq(&self.structure, &other.structure) || self.structure == other.structure
    }

    pub fn check_feasible(&self, flow: &PathFlow) -> Result<()> {
        let f = flow.values();
        if f.len() != self.num_paths() {
            return Err(Error::InfeasibleFlow(format!(
                "{} path values for {} paths",
                f.len(),
                self.num_paths()
            )));
        }
        if let Some((s, v)) = f
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InfeasibleFlow(format!("path {s} carries {v}")));
        }
        for k in 0..self.num_od_pairs() {
            let sum: f64 = self.structure.od_paths(k).iter().map(|s| f[*s]).sum();
            let d = self.demands[k];
            if (sum - d).abs() > FEASIBILITY_TOL * d.max(1.0) {
                return Err(Error::InfeasibleFlow(format!(
                    "O/D pair {:?} routes {sum} but demands {d}",
                    self.structure.od_pairs()[k]
                )));
            }
        }
        Ok(())
    }

    /// Arc flows from raw path values, without feasibility checks.
    pub fn arc_flows_raw(&self, f: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_arcs()];
        for (s, p) in self.structure.paths().iter().enumerate() {
            for a in p {
                x[*a] += f[s];
            }
        }
        x
    }

    pub fn arc_flows(&self, flow: &PathFlow) -> Result<Vec<f64>> {
        self.check_feasible(flow)?;
        Ok(self.arc_flows_raw(flow.values()))
    }

    /// `τ_a(x_a)` for every arc.
    pub fn arc_costs_at(&self, arc_flows: &[f64]) -> Vec<f64> {
        self.costs
            .iter()
            .zip(arc_flows)
            .map(|(c, x)| c.value(*x))
            .collect()
    }

    /// Path costs from arc costs.
    pub fn path_costs_from_arc_costs(&self, arc_costs: &[f64]) -> Vec<f64> {
        self.structure
            .paths()
            .iter()
            .map(|p| p.iter().map(|a| arc_costs[*a]).sum())
            .collect()
    }

    pub fn path_costs(&self, flow: &PathFlow) -> Result<Vec<f64>> {
        let x = self.arc_flows(flow)?;
        Ok(self.path_costs_from_arc_costs(&self.arc_costs_at(&x)))
    }

    pub fn path_cost(&self, flow: &PathFlow, path: usize) -> Result<f64> {
        if path >= self.num_paths() {
            return Err(Error::UnknownPath(path));
        }
        let x = self.arc_flows(flow)?;
        Ok(self
            .structure
            .path(path)
            .iter()
            .map(|a| self.costs[*a].value(x[*a]))
            .sum())
    }

    /// `C(Γ, f)`, computed over paths and over arcs; the two sums must
    /// agree to 1e-9 relative.
    pub fn total_cost(&self, flow: &PathFlow) -> Result<f64> {
        let x = self.arc_flows(flow)?;
        let arc_costs = self.arc_costs_at(&x);
        let by_arcs: f64 = x.iter().zip(&arc_costs).map(|(f, c)| f * c).sum();
        let by_paths: f64 = self
            .path_costs_from_arc_costs(&arc_costs)
            .iter()
            .zip(flow.values())
            .map(|(c, f)| c * f)
            .sum();
        if (by_arcs - by_paths).abs()
            > 1e-9 * by_arcs.abs().max(by_paths.abs()).max(f64::MIN_POSITIVE)
        {
            return Err(Error::InvariantViolation(format!(
                "total cost over arcs {by_arcs} differs from total over paths {by_paths}"
            )));
        }
        Ok(by_arcs)
    }

    /// `Σ_a ∫_0^{f_a} τ_a`.
    pub fn potential(&self, flow: &PathFlow) -> Result<f64> {
        let x = self.arc_flows(flow)?;
        Ok(self
            .costs
            .iter()
            .zip(&x)
            .map(|(c, f)| c.integral_value(*f))
            .sum())
    }

    /// `L_k`: the cheapest path cost of every O/D pair.
    pub fn user_costs(&self, flow: &PathFlow) -> Result<Vec<f64>> {
        let pc = self.path_costs(flow)?;
        Ok(self.user_costs_from_path_costs(&pc))
    }

    pub fn user_costs_from_path_costs(&self, path_costs: &[f64]) -> Vec<f64> {
        (0..self.num_od_pairs())
            .map(|k| {
                self.structure
                    .od_paths(k)
                    .iter()
                    .map(|s| path_costs[*s])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// A flow routing each demand evenly across its paths.
    pub fn uniform_flow(&self) -> PathFlow {
        let mut f = vec![0.0; self.num_paths()];
        for k in 0..self.num_od_pairs() {
            let ps = self.structure.od_paths(k);
            for s in ps {
                f[*s] = self.demands[k] / ps.len() as f64;
            }
        }
        PathFlow(f)
    }
}

/// Whether two games on the same structure are equivalent: equal demands
/// and costs agreeing on `[0, T(d)]` (checked on `samples` grid points
/// unless the parametric forms are identical).
pub fn games_equivalent(g1: &Game, g2: &Game, samples: usize) -> Result<bool> {
    if !g1.same_structure(g2) {
        return Err(Error::StructureMismatch);
    }
    if g1.demands() != g2.demands() {
        return Ok(false);
    }
    let t = g1.total_demand();
    let n = samples.max(2);
    for (f, g) in g1.costs().iter().zip(g2.costs()) {
        if f == g {
            continue;
        }
        for i in 0..n {
            let x = t * i as f64 / (n - 1) as f64;
            let (a, b) = (f.value(x), g.value(x));
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pigou() -> Game {
        Game::new(
            Arc::new(Structure::parallel(2).unwrap()),
            vec![
                CostFunction::bpr(1.0, 1.0, 0.0),
                CostFunction::constant(1.0),
            ],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn pigou_flows_and_costs() {
        let g = pigou();
        let f = PathFlow(vec![1.0, 0.0]);
        assert_eq!(g.arc_flows(&f).unwrap(), vec![1.0, 0.0]);
        assert_eq!(g.path_cost(&f, 0).unwrap(), 1.0);
        assert_eq!(g.path_cost(&f, 1).unwrap(), 1.0);
        assert_eq!(g.total_cost(&f).unwrap(), 1.0);
        let h = PathFlow(vec![0.5, 0.5]);
        assert_eq!(g.arc_flows(&h).unwrap(), vec![0.5, 0.5]);
        assert_eq!(g.path_cost(&h, 0).unwrap(), 0.5);
        assert_eq!(g.total_cost(&h).unwrap(), 0.75);
        assert!(matches!(g.path_cost(&h, 2), Err(Error::UnknownPath(2))));
        assert!(matches!(
            g.arc_flows(&PathFlow(vec![0.5, 0.6])),
            Err(Error::InfeasibleFlow(_))
        ));
    }

    #[test]
    fn shared_arc_flow_sums() {
        // Paths {0,2} and {1,2}: arc 2 is shared.
        let s = Structure::from_indices(3, vec![vec![vec![0, 2], vec![1, 2]]]).unwrap();
        let g = Game::new(Arc::new(s), vec![CostFunction::constant(1.0); 3], vec![0.7]).unwrap();
        let x = g.arc_flows(&PathFlow(vec![0.3, 0.4])).unwrap();
        assert!((x[2] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constant_cost_total() {
        let s = Structure::parallel(3).unwrap();
        let g = Game::new(Arc::new(s), vec![CostFunction::constant(2.0); 3], vec![1.5]).unwrap();
        let c = g.total_cost(&g.uniform_flow()).unwrap();
        assert!((c - 3.0).abs() < 1e-15);
    }

    #[test]
    fn condition_checks() {
        assert!(matches!(
            Structure::from_indices(1, vec![vec![vec![0]]]),
            Err(Error::Condition1(_))
        ));
        assert!(matches!(
            Structure::from_indices(3, vec![vec![vec![0], vec![1]]]),
            Err(Error::Condition1(_))
        ));
        assert!(matches!(
            Structure::from_indices(2, vec![vec![vec![0], vec![1]], vec![vec![1], vec![0, 1]]]),
            Err(Error::Condition1(_))
        ));
        let s = Arc::new(Structure::parallel(2).unwrap());
        let costs = vec![
            CostFunction::bpr(1.0, 1.0, 0.0),
            CostFunction::constant(1.0),
        ];
        assert!(matches!(
            Game::new(s.clone(), costs.clone(), vec![0.0]),
            Err(Error::Condition2(_))
        ));
        let zero = vec![CostFunction::constant(0.0), CostFunction::constant(1.0)];
        assert!(matches!(
            Game::new(s.clone(), zero.clone(), vec![1.0]),
            Err(Error::Condition2(_))
        ));
        assert!(Game::generalized(s, zero, vec![1.0]).is_ok());
    }

    #[test]
    fn equivalence() {
        let g = pigou();
        assert!(games_equivalent(&g, &g, 100).unwrap());
        let beyond = g
            .with_costs(vec![
                CostFunction::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 50.0]),
                CostFunction::constant(1.0),
            ])
            .unwrap();
        assert!(games_equivalent(&g, &beyond, 1000).unwrap());
        let other = g.with_demands(vec![0.9]).unwrap();
        assert!(!games_equivalent(&g, &other, 100).unwrap());
        let elsewhere = Game::new(
            Arc::new(Structure::parallel(3).unwrap()),
            vec![CostFunction::constant(1.0); 3],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(
            games_equivalent(&g, &elsewhere, 10),
            Err(Error::StructureMismatch)
        ));
    }
}
