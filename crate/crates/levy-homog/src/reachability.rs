//! Discrete controllability of the jump process on the torus.
//!
//! The chain condition behind the strong maximum principle asks that any two
//! points be joined through positive-measure jump sets landing in
//! arbitrarily small balls. Its one-hop discrete analogue: grid point `y`
//! connects to `y'` whenever some rule node `z_j` with positive weight lands
//! `y + beta(z_j)` strictly inside the `eps_ball` around `y'` (multi-hop
//! chains are then exactly directed paths). Controllability holds when the
//! graph is one strongly connected component.
//!
//! Ball membership is strict. With `dist <= eps_ball` a jump set landing
//! exactly on grid points at `eps_ball = h` would also connect to every
//! neighboring grid point, and jump structures confined to a subgroup or a
//! subspace could never be told apart from mixing ones at any admissible
//! ball radius.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::{periodic_dist, PeriodicField, TorusGrid};
use crate::operator::DiscreteOperator;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    /// `(structure, node)` index of the witnessing quadrature node.
    pub witness: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct JumpGraph {
    pub grid: TorusGrid,
    pub eps_ball: f64,
    pub adjacency: Vec<Vec<Edge>>,
}

impl JumpGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum()
    }

    /// Re-verify every stored witness against the ball condition.
    pub fn verify_witnesses(&self, structures: &[&QuadratureRule]) -> Result<()> {
        for (from, edges) in self.adjacency.iter().enumerate() {
            let y = self.grid.point(from);
            for e in edges {
                let (s, j) = e.witness;
                let jump = &structures[s].jumps[j];
                let target: Vec<f64> = y
                    .iter()
                    .zip(jump)
                    .map(|(a, b)| (a + b).rem_euclid(1.0))
                    .collect();
                let dist = periodic_dist(&target, &self.grid.point(e.to));
                if dist >= self.eps_ball {
                    return Err(Error::OperatorConsistency(format!(
                        "edge {from} -> {} witness misses the ball: dist {dist} >= {}",
                        e.to, self.eps_ball
                    )));
                }
            }
        }
        Ok(())
    }

    /// Write the edge list as CSV.
    pub fn write_edges_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "from,to,structure,node")?;
        for (from, edges) in self.adjacency.iter().enumerate() {
            for e in edges {
                writeln!(out, "{from},{},{},{}", e.to, e.witness.0, e.witness.1)?;
            }
        }
        Ok(())
    }
}

/// Build the one-hop jump graph. Edges from all structures are unioned; for
/// the coupled max problem that is exactly the generalized chain condition.
pub fn build_graph(
    grid: &TorusGrid,
    structures: &[&QuadratureRule],
    eps_ball: f64,
) -> Result<JumpGraph> {
    let h = grid.spacing();
    if eps_ball < h {
        return Err(Error::config(format!(
            "eps_ball = {eps_ball} is below the grid spacing {h}; the graph \
             would be disconnected by discretization alone"
        )));
    }
    if structures.is_empty() {
        return Err(Error::config("reachability needs at least one jump structure"));
    }
    for rule in structures {
        let jump_dim = rule.jumps.first().map_or(0, |j| j.len());
        if jump_dim != grid.dim {
            return Err(Error::ShapeMismatch(format!(
                "jump structure lives in dimension {jump_dim}, torus has {}",
                grid.dim
            )));
        }
    }

    let n = grid.n;
    let len = grid.len();
    let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); len];
    let mut seen: HashSet<usize> = HashSet::new();
    // window of grid indices within eps_ball of a coordinate
    let reach = (eps_ball / h).ceil() as isize;

    for from in 0..len {
        let y = grid.point(from);
        seen.clear();
        for (s, rule) in structures.iter().enumerate() {
            for (j, (jump, &w)) in rule.jumps.iter().zip(&rule.weights).enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let target: Vec<f64> = y
                    .iter()
                    .zip(jump)
                    .map(|(a, b)| (a + b).rem_euclid(1.0))
                    .collect();
                // enumerate candidate grid points around the landing point
                let base: Vec<isize> = target.iter().map(|t| (t / h).floor() as isize).collect();
                let mut offsets = vec![-reach; grid.dim];
                'cells: loop {
                    let mut idx = 0usize;
                    for d in 0..grid.dim {
                        let k = (base[d] + offsets[d]).rem_euclid(n as isize) as usize;
                        idx = idx * n + k;
                    }
                    if !seen.contains(&idx) {
                        let dist = periodic_dist(&target, &grid.point(idx));
                        if dist < eps_ball {
                            seen.insert(idx);
                            adjacency[from].push(Edge {
                                to: idx,
                                witness: (s, j),
                            });
                        }
                    }
                    // advance the offset counter
                    for d in (0..grid.dim).rev() {
                        offsets[d] += 1;
                        if offsets[d] <= reach + 1 {
                            break;
                        }
                        offsets[d] = -reach;
                        if d == 0 {
                            break 'cells;
                        }
                    }
                    if offsets[0] > reach + 1 {
                        break;
                    }
                }
            }
        }
        adjacency[from].sort_by_key(|e| e.to);
    }
    Ok(JumpGraph {
        grid: grid.clone(),
        eps_ball,
        adjacency,
    })
}

/// Strongly connected components, Kosaraju with explicit stacks.
pub fn strongly_connected_components(adjacency: &[Vec<Edge>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        visited[start] = true;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adjacency[v].len() {
                let u = adjacency[v][*next].to;
                *next += 1;
                if !visited[u] {
                    visited[u] = true;
                    stack.push((u, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }

    let mut transpose: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, edges) in adjacency.iter().enumerate() {
        for e in edges {
            transpose[e.to].push(v);
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().rev() {
        if component[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        component[start] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for &u in &transpose[v] {
                if component[u] == usize::MAX {
                    component[u] = id;
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

#[derive(Debug, Clone)]
pub struct ConditionBReport {
    pub pass: bool,
    pub component_count: usize,
    /// On failure: a pair `(y, y')` with no path from `y` to `y'` and the
    /// set reachable from `y`.
    pub witness: Option<(usize, usize, Vec<usize>)>,
}

/// Controllability check: pass iff a single strongly connected component
/// covers every grid point.
pub fn check_condition_b(graph: &JumpGraph) -> ConditionBReport {
    let components = strongly_connected_components(&graph.adjacency);
    if components.len() == 1 && components[0].len() == graph.grid.len() {
        return ConditionBReport {
            pass: true,
            component_count: 1,
            witness: None,
        };
    }
    // pick a source and a target in different components, report the
    // reachable set of the source
    let from = components.last().map(|c| c[0]).unwrap_or(0);
    let mut reachable = vec![false; graph.grid.len()];
    let mut stack = vec![from];
    reachable[from] = true;
    while let Some(v) = stack.pop() {
        for e in &graph.adjacency[v] {
            if !reachable[e.to] {
                reachable[e.to] = true;
                stack.push(e.to);
            }
        }
    }
    let to = (0..graph.grid.len()).find(|&i| !reachable[i]);
    let reachable_set: Vec<usize> = (0..graph.grid.len()).filter(|&i| reachable[i]).collect();
    ConditionBReport {
        pass: false,
        component_count: components.len(),
        witness: to.map(|t| (from, t, reachable_set)),
    }
}

#[derive(Debug, Clone)]
pub enum SmpVerdict {
    Pass,
    /// The field attains its maximum but has strictly smaller one-hop
    /// neighbors; the listed points localize the contradiction.
    Fail { contradiction_points: Vec<usize> },
    /// The subsolution premise `(A field)(y) >= -tol` fails at the listed
    /// points; the theorem does not apply to this field.
    Inconclusive { premise_violations: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct SmpReport {
    pub verdict: SmpVerdict,
    pub oscillation: f64,
    pub tol: f64,
}

/// Spot-check the strong maximum principle on a computed field: a discrete
/// subsolution attaining its maximum must be constant up to `tol`.
pub fn smp_check(field: &PeriodicField, op: &DiscreteOperator, tol: f64) -> Result<SmpReport> {
    if op.n_rows != field.values.len() {
        return Err(Error::ShapeMismatch("field/operator size mismatch".into()));
    }
    if tol <= 0.0 {
        return Err(Error::config("smp tolerance must be positive"));
    }
    let av = op.apply(&field.values)?;
    let premise_violations: Vec<usize> = (0..op.n_rows).filter(|&i| av[i] < -tol).collect();
    if !premise_violations.is_empty() {
        return Ok(SmpReport {
            verdict: SmpVerdict::Inconclusive { premise_violations },
            oscillation: field.oscillation(),
            tol,
        });
    }
    let osc = field.oscillation();
    let sup = field.sup();
    if osc <= tol * (1.0 + field.sup_norm()) {
        return Ok(SmpReport {
            verdict: SmpVerdict::Pass,
            oscillation: osc,
            tol,
        });
    }
    let mut contradiction_points = Vec::new();
    for i in 0..op.n_rows {
        if field.values[i] >= sup - tol {
            let has_smaller_neighbor = op
                .row(i)
                .any(|(j, c)| c > 0.0 && field.values[j] < sup - tol);
            if has_smaller_neighbor {
                contradiction_points.push(i);
            }
        }
    }
    Ok(SmpReport {
        verdict: SmpVerdict::Fail {
            contradiction_points,
        },
        oscillation: osc,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{builtin_example, BuiltinMeasure, KernelForm};
    use crate::operator::assemble_periodic;
    use crate::quadrature::{build_rule, RuleParams};

    fn ex1_rule(alpha: f64) -> QuadratureRule {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex1 { dim: 1, alpha }).unwrap();
        build_rule(&q, &beta, &RuleParams::new(0.05, 2.0, 8)).unwrap()
    }

    /// Hand-built rule whose jumps are exact multiples of 1/2.
    fn half_period_rule() -> QuadratureRule {
        QuadratureRule {
            nodes: vec![vec![0.5], vec![-0.5]],
            weights: vec![1.0, 1.0],
            jumps: vec![vec![0.5], vec![-0.5]],
            drift: None,
            tail_drift: None,
            inner_cutoff: 0.1,
            outer_cutoff: 1.0,
            inner_error_bound: 0.0,
            tail_error_bound: 0.0,
            form: KernelForm::Gamma1,
        }
    }

    #[test]
    fn one_sided_measure_is_controllable_on_the_circle() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let rule = ex1_rule(1.5);
        let graph = build_graph(&grid, &[&rule], 2.0 / 32.0).unwrap();
        let report = check_condition_b(&graph);
        assert!(report.pass, "components: {}", report.component_count);
        graph.verify_witnesses(&[&rule]).unwrap();
    }

    #[test]
    fn half_period_jumps_split_into_cosets() {
        // Jumps of +-1/2 generate the subgroup {0, 1/2}; on an n-grid the
        // strongly connected components are its cosets {y, y + 1/2}, so
        // there are n/2 of them -- exactly 2 when n = 4.
        let grid = TorusGrid::new(1, 32).unwrap();
        let rule = half_period_rule();
        let graph = build_graph(&grid, &[&rule], 1.0 / 32.0).unwrap();
        let report = check_condition_b(&graph);
        assert!(!report.pass);
        assert_eq!(report.component_count, 16);
        let (from, to, reachable) = report.witness.unwrap();
        assert_ne!(from % 16, to % 16, "witness pair must be in distinct cosets");
        assert_eq!(reachable.len(), 2);

        let small = TorusGrid::new(1, 4).unwrap();
        let graph = build_graph(&small, &[&rule], 0.25).unwrap();
        let report = check_condition_b(&graph);
        assert!(!report.pass);
        assert_eq!(report.component_count, 2);
        let (from, to, _) = report.witness.unwrap();
        assert_ne!(from % 2, to % 2);
    }

    #[test]
    fn symmetric_full_support_measure_passes() {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let rule = build_rule(&q, &beta, &RuleParams::new(0.05, 2.0, 8)).unwrap();
        let grid = TorusGrid::new(1, 16).unwrap();
        let graph = build_graph(&grid, &[&rule], 1.0 / 16.0).unwrap();
        assert!(check_condition_b(&graph).pass);
    }

    #[test]
    fn monotone_in_ball_radius() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let rule = ex1_rule(1.5);
        let small = build_graph(&grid, &[&rule], 1.0 / 32.0).unwrap();
        let large = build_graph(&grid, &[&rule], 3.0 / 32.0).unwrap();
        // every edge of the small-ball graph appears in the large-ball graph
        for (from, edges) in small.adjacency.iter().enumerate() {
            for e in edges {
                assert!(
                    large.adjacency[from].iter().any(|le| le.to == e.to),
                    "edge {from}->{} lost when the ball grew",
                    e.to
                );
            }
        }
        if check_condition_b(&small).pass {
            assert!(check_condition_b(&large).pass);
        }
    }

    #[test]
    fn ball_below_spacing_is_rejected() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let rule = ex1_rule(1.5);
        assert!(matches!(
            build_graph(&grid, &[&rule], 0.5 / 32.0),
            Err(Error::Config(_))
        ));
    }

    fn example5_structures() -> (QuadratureRule, QuadratureRule) {
        // vertical line structure: 1D symmetric measure along the z-axis
        let (q1, _, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let beta1 = crate::measures::JumpMap::line_z();
        let rule1 = build_rule(&q1, &beta1, &RuleParams::new(0.05, 2.0, 8)).unwrap();
        // horizontal plane structure: 2D symmetric measure in the xy-plane
        let (q2, _, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 2,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let beta2 = crate::measures::JumpMap::plane_xy();
        let mut params = RuleParams::new(0.05, 2.0, 6);
        params.angular_sectors = 16;
        let rule2 = build_rule(&q2, &beta2, &params).unwrap();
        (rule1, rule2)
    }

    #[test]
    fn coupled_structures_mix_only_jointly() {
        let grid = TorusGrid::new(3, 8).unwrap();
        let (rule1, rule2) = example5_structures();
        let eps_ball = 1.0 / 8.0;

        let line_only = build_graph(&grid, &[&rule1], eps_ball).unwrap();
        let line_report = check_condition_b(&line_only);
        assert!(!line_report.pass, "a line cannot mix the 3-torus");
        assert_eq!(line_report.component_count, 64, "one component per line");

        let plane_only = build_graph(&grid, &[&rule2], eps_ball).unwrap();
        let plane_report = check_condition_b(&plane_only);
        assert!(!plane_report.pass, "planes cannot mix the 3-torus");
        assert_eq!(plane_report.component_count, 8, "one component per level");

        let union = build_graph(&grid, &[&rule1, &rule2], eps_ball).unwrap();
        assert!(check_condition_b(&union).pass, "the union mixes");
    }

    fn symmetric_op_1d(n: usize) -> DiscreteOperator {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let rule = build_rule(&q, &beta, &RuleParams::new(1e-2, 4.0, 16)).unwrap();
        let grid = TorusGrid::new(1, n).unwrap();
        assemble_periodic(&grid, &rule).unwrap()
    }

    #[test]
    fn smp_passes_on_constants() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = symmetric_op_1d(64);
        let field = PeriodicField::constant(&grid, 2.0);
        let report = smp_check(&field, &op, 1e-8).unwrap();
        assert!(matches!(report.verdict, SmpVerdict::Pass));
    }

    #[test]
    fn smp_inconclusive_on_cosine() {
        // cos is not a subsolution near its maximum (the operator is
        // strictly negative there), so the checker must refuse to certify
        // rather than pass.
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = symmetric_op_1d(64);
        let field = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).cos());
        let report = smp_check(&field, &op, 1e-6).unwrap();
        match report.verdict {
            SmpVerdict::Inconclusive { premise_violations } => {
                assert!(!premise_violations.is_empty());
            }
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn smp_fails_on_weakly_coupled_operator() {
        // Scale the jump weights down until cos almost satisfies the
        // subsolution premise; its oscillation then contradicts constancy
        // and the checker localizes the witnesses at the maximum.
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let mut rule = build_rule(&q, &beta, &RuleParams::new(1e-2, 4.0, 16)).unwrap();
        for w in rule.weights.iter_mut() {
            *w *= 1e-4;
        }
        for v in rule.drift.as_mut().unwrap() {
            *v *= 1e-4;
        }
        for v in rule.tail_drift.as_mut().unwrap() {
            *v *= 1e-4;
        }
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = assemble_periodic(&grid, &rule).unwrap();
        let field = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).cos());
        let report = smp_check(&field, &op, 0.01).unwrap();
        match report.verdict {
            SmpVerdict::Fail {
                contradiction_points,
            } => {
                assert!(!contradiction_points.is_empty());
                // the maximum of cos(2 pi y) sits at y = 0
                assert!(contradiction_points.contains(&0));
            }
            other => panic!("expected fail, got {other:?}"),
        }
    }

    #[test]
    fn smp_passes_on_solved_zero_source_field() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = symmetric_op_1d(64);
        let f0 = PeriodicField::constant(&grid, 0.0);
        let a = vec![1.0; 64];
        let s = crate::cell::solve_discounted(1e-2, &a, &f0, &op).unwrap();
        let report = smp_check(&s.v, &op, 1e-10).unwrap();
        assert!(matches!(report.verdict, SmpVerdict::Pass));
    }
}
