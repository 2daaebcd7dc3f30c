//! One step of the supercell mean-field map: plain Aufbau filling, or
//! Aufbau below a frontier cluster whose occupations minimize the energy
//! with the orbitals held fixed.

use super::boxqp::box_qp;
use super::{SupercellProblem, SupercellState};
use crate::bloch::{aufbau_fill, assemble_with_table, BlochFiber, Filling};
use crate::error::Result;
use crate::lattice::{FourierField, PlaneWaveBasis};

/// Levels this close to the frontier get optimized occupations.
const CLUSTER_WINDOW: f64 = 1e-2;
/// Largest frontier cluster.
const CLUSTER_MAX: usize = 32;
/// Cluster levels, and kinetic values within a group, closer than this
/// are treated as degenerate.
const DEGENERATE: f64 = 1e-5;

pub(super) struct Context<'a> {
    pub problem: &'a SupercellProblem,
    pub basis: &'a PlaneWaveBasis,
    pub table: &'a [Option<u32>],
    /// μ_L + ν_L.
    pub background: &'a FourierField,
    pub filling: Filling,
}

/// Aufbau filling of the mean-field operator at a given density.
pub(super) struct Step {
    fiber: BlochFiber,
    occupations: Vec<f64>,
    frontier: f64,
    pub density: FourierField,
    potential: FourierField,
    electrons: f64,
}

impl Step {
    pub fn into_state(self, size: usize) -> SupercellState {
        let gamma = self.fiber.density_matrix(&self.occupations);
        SupercellState {
            size,
            fiber: self.fiber,
            occupations: self.occupations,
            gamma,
            density: self.density,
            potential: self.potential,
            total_electrons: self.electrons,
            frontier: self.frontier,
        }
    }
}

impl Context<'_> {
    fn volume(&self) -> f64 {
        (self.problem.size as f64).powi(3)
    }

    pub fn step(&self, rho: &FourierField) -> Result<Step> {
        let v = self.problem.potential_of_charge(&(rho - self.background));
        let fiber = assemble_with_table(self.basis.clone(), self.table.to_vec(), &v)?;
        let occ = aufbau_fill(&[fiber.eigenvalues()], self.filling)?;
        let mut density = FourierField::zeros(self.problem.size, self.problem.extent());
        fiber.accumulate_density(&occ.values[0], 1.0 / self.volume(), &mut density);
        let electrons = occ.total();
        Ok(Step {
            fiber,
            occupations: occ.values.into_iter().next().unwrap_or_default(),
            frontier: occ.frontier,
            density,
            potential: v,
            electrons,
        })
    }

    /// Aufbau step with the occupations of the levels within
    /// `CLUSTER_WINDOW` of the frontier chosen to minimize ℰ - κ·Tr γ for
    /// the current orbitals. Its fixed points are the minimizers, pinned
    /// fractional frontiers included, and unlike plain Aufbau it depends
    /// continuously on the density.
    pub fn relaxed_step(&self, rho: &FourierField) -> Result<Step> {
        let v = self.problem.potential_of_charge(&(rho - self.background));
        let mut fiber = assemble_with_table(self.basis.clone(), self.table.to_vec(), &v)?;
        let levels = fiber.eigenvalues().to_vec();
        let levels = &levels[..];
        let aufbau = aufbau_fill(&[levels], self.filling)?;
        let (reference, kappa) = match self.filling {
            Filling::Threshold(ef) => (ef, ef),
            _ => (aufbau.frontier, 0.0),
        };
        let mut cluster: Vec<usize> = (0..levels.len())
            .filter(|&n| (levels[n] - reference).abs() <= CLUSTER_WINDOW)
            .collect();
        if cluster.len() > CLUSTER_MAX {
            cluster.sort_by(|&a, &b| {
                (levels[a] - reference).abs().total_cmp(&(levels[b] - reference).abs()).then(a.cmp(&b))
            });
            cluster.truncate(CLUSTER_MAX);
            cluster.sort_unstable();
        }
        // Optimization variables are joint eigenspaces of H and the kinetic
        // operator, each with one occupation, so that the map does not
        // depend on how the eigensolver resolves degeneracies.
        let mut subspaces: Vec<Vec<usize>> = Vec::new();
        let mut group = Vec::new();
        for (k, &n) in cluster.iter().enumerate() {
            group.push(n);
            let next = cluster.get(k + 1).copied();
            if next.is_none_or(|j| levels[j] - levels[n] > DEGENERATE) {
                if group.len() == 1 {
                    subspaces.push(group.clone());
                } else {
                    let kinetic = fiber.diagonalize_kinetic_within(&group)?;
                    let mut start = 0;
                    for i in 1..=group.len() {
                        if i == group.len() || kinetic[i] - kinetic[i - 1] > DEGENERATE {
                            subspaces.push(group[start..i].to_vec());
                            start = i;
                        }
                    }
                }
                group.clear();
            }
        }
        let mut occupations = aufbau.values.into_iter().next().unwrap_or_default();
        if !subspaces.is_empty() {
            let dims: Vec<f64> = subspaces.iter().map(|s| s.len() as f64).collect();
            let start: Vec<f64> = subspaces
                .iter()
                .map(|s| s.iter().map(|&n| occupations[n]).sum::<f64>() / s.len() as f64)
                .collect();
            let mut base = occupations.clone();
            cluster.iter().for_each(|&n| base[n] = 0.0);
            let base_charge = &self.density_of(&fiber, &base) - self.background;
            let m = subspaces.len();
            let mut densities = Vec::with_capacity(m);
            let mut g = Vec::with_capacity(m);
            for (sub, dim) in subspaces.iter().zip(&dims) {
                let mut one = vec![0.0; levels.len()];
                sub.iter().for_each(|&n| one[n] = 1.0);
                let rho_s = self.density_of(&fiber, &one);
                g.push(fiber.kinetic_energy(&one) - kappa * dim + self.problem.coulomb(&rho_s, &base_charge)?);
                densities.push(rho_s);
            }
            let mut b = vec![0.0; m * m];
            for i in 0..m {
                for j in i..m {
                    let d = self.problem.coulomb(&densities[i], &densities[j])?;
                    b[i * m + j] = d;
                    b[j * m + i] = d;
                }
            }
            let weights = match self.filling {
                Filling::Threshold(_) => None,
                _ => Some(&dims[..]),
            };
            let f = box_qp(&b, &g, weights, &start)?;
            for (sub, v) in subspaces.iter().zip(f) {
                sub.iter().for_each(|&n| occupations[n] = v);
            }
        }
        let density = self.density_of(&fiber, &occupations);
        let frontier = (0..levels.len())
            .filter(|&n| occupations[n] > 0.0)
            .map(|n| levels[n])
            .fold(f64::NEG_INFINITY, f64::max);
        let electrons = occupations.iter().sum();
        Ok(Step {
            fiber,
            occupations,
            frontier,
            density,
            potential: v,
            electrons,
        })
    }

    fn density_of(&self, fiber: &BlochFiber, occupations: &[f64]) -> FourierField {
        let mut density = FourierField::zeros(self.problem.size, self.problem.extent());
        fiber.accumulate_density(occupations, 1.0 / self.volume(), &mut density);
        density
    }
}
