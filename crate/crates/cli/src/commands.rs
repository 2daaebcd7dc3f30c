//! Subcommand implementations.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use fermi_sea::bloch::{assemble_fiber, band_energies, scf_periodic, GapInfo, InitialDensity, PeriodicSolution};
use fermi_sea::charge::DefectCharge;
use fermi_sea::coulomb::d_periodic;
use fermi_sea::lattice::{build_basis, high_symmetry_points, FourierField, LatticeConfig};
use fermi_sea::scf::SolverOptions;
use fermi_sea::supercell::{
    binding_diagnostic, decompose_defect, defect_energy, e0_of_q, scf_supercell, DefectEnergyReport, DefectState,
    SupercellFilling, SupercellMethod, SupercellProblem, SupercellSolution, SupercellStart,
};
use fermi_sea::thermo::{density_convergence, sweep_l, DensityRow, SweepResult};
use fermi_sea::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Mode};
use crate::output::Sink;

/// Loaded configuration plus the output sink.
pub struct Context {
    pub config: Config,
    pub sink: Sink,
}

impl Context {
    pub fn new(config: Config, out: &Path) -> Result<Self> {
        let sink = Sink::new(out, config.sha256())?;
        Ok(Self { config, sink })
    }

    fn options(&self) -> SolverOptions {
        self.config.options()
    }

    /// Periodic solve on the configured reference mesh.
    fn reference(&self) -> Result<PeriodicSolution> {
        Ok(scf_periodic(&self.config.problem()?, &self.options(), InitialDensity::Nuclear)?)
    }

    /// Reference gap with the configured or requested Fermi level.
    fn gap(&self, reference: &PeriodicSolution, ef: Option<f64>) -> Result<GapInfo> {
        let gap = reference.gap;
        if !gap.gap_open {
            bail!(
                "the periodic problem is metallic (sigma_plus = {}, sigma_minus = {}); refusing a Fermi-level or defect run",
                gap.sigma_plus,
                gap.sigma_minus
            );
        }
        match ef.or(self.config.run.ef) {
            Some(v) => Ok(gap.with_fermi_level(v)?),
            None => Ok(gap),
        }
    }

    fn defect(&self, file: Option<&Path>) -> Result<DefectCharge> {
        match file {
            Some(p) => load_defect(p),
            None => Ok(self.config.defect.clone()),
        }
    }

    /// Neutral defect-free supercell started from the periodic density.
    fn perfect(&self, size: usize, reference: &PeriodicSolution) -> Result<(SupercellProblem, SupercellSolution)> {
        let problem = SupercellProblem::perfect(&self.config.problem()?, size);
        let start = SupercellStart::Field(reference.state.density.to_supercell(size));
        let sol = scf_supercell(&problem, SupercellFilling::Neutral, None, &self.options(), start)?;
        Ok((problem, sol))
    }
}

pub fn load_defect(path: &Path) -> Result<DefectCharge> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read defect file {}", path.display()))?;
    let defect: DefectCharge =
        toml::from_str(&text).with_context(|| format!("invalid defect file {}", path.display()))?;
    defect.validate()?;
    Ok(defect)
}

/// `a:b:step` inclusive of b up to roundoff.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("grid must look like a:b:step, got {spec:?}");
    };
    let (a, b, step): (f64, f64, f64) = (a.trim().parse()?, b.trim().parse()?, step.trim().parse()?);
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        bail!("grid {spec:?} needs finite a <= b and a positive step");
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    if count > 10_000 {
        bail!("grid {spec:?} has too many points");
    }
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}

#[derive(Serialize)]
struct GapReport {
    sigma_plus: f64,
    sigma_minus: f64,
    open: bool,
    midpoint: f64,
    fermi_level: f64,
}

impl From<&GapInfo> for GapReport {
    fn from(g: &GapInfo) -> Self {
        Self {
            sigma_plus: g.sigma_plus,
            sigma_minus: g.sigma_minus,
            open: g.gap_open,
            midpoint: g.midpoint,
            fermi_level: g.fermi_level,
        }
    }
}

#[derive(Serialize)]
struct PeriodicReport {
    #[serde(rename = "I0_per")]
    i0_per: f64,
    kinetic: f64,
    hartree: f64,
    gap: GapReport,
    projector_defect: f64,
    iterations: usize,
    residuals: Vec<f64>,
}

pub fn scf_periodic_cmd(ctx: &Context) -> Result<()> {
    let sol = ctx.reference()?;
    let report = PeriodicReport {
        i0_per: sol.i0_per(),
        kinetic: sol.energy.kinetic,
        hartree: sol.energy.hartree,
        gap: (&sol.gap).into(),
        projector_defect: sol.state.projector_defect(),
        iterations: sol.iterations,
        residuals: sol.residuals.clone(),
    };
    ctx.sink.json("scf_periodic.json", &ctx.config, &report)?;
    Ok(())
}

#[derive(Serialize)]
struct BandRow {
    xi1: f64,
    xi2: f64,
    xi3: f64,
    n: usize,
    lambda_hartree: f64,
}

fn named_point(name: &str) -> Result<[f64; 3]> {
    high_symmetry_points()
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name) || (name.eq_ignore_ascii_case("gamma") && *n == "G"))
        .map(|(_, p)| *p)
        .ok_or_else(|| anyhow!("unknown point {name:?}; use G, X, M or R"))
}

pub fn bands_cmd(ctx: &Context, path: &str, points: usize, bands: Option<usize>) -> Result<()> {
    let corners = path.split(',').map(|s| named_point(s.trim())).collect::<Result<Vec<_>>>()?;
    if corners.len() < 2 || points == 0 {
        bail!("--path needs at least two points and --points at least 1");
    }
    let sol = ctx.reference()?;
    let mut samples = Vec::new();
    for w in corners.windows(2) {
        for i in 0..points {
            let t = i as f64 / points as f64;
            samples.push([0, 1, 2].map(|j| w[0][j] + t * (w[1][j] - w[0][j])));
        }
    }
    samples.push(*corners.last().unwrap());
    let mut rows = Vec::new();
    for xi in samples {
        // Fold into [-π, π) so the basis construction accepts the point.
        let folded = xi.map(|v| v - 2.0 * PI * ((v + PI) / (2.0 * PI)).floor());
        let levels = band_energies(&sol.state, folded)?;
        let keep = bands.unwrap_or(levels.len()).min(levels.len());
        for (n, &l) in levels.iter().take(keep).enumerate() {
            rows.push(BandRow {
                xi1: xi[0],
                xi2: xi[1],
                xi3: xi[2],
                n,
                lambda_hartree: l,
            });
        }
    }
    ctx.sink.csv("bands.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct OccupationSummary {
    states: usize,
    total_electrons: f64,
    frontier: f64,
    fractional_states: usize,
    lowest_level: f64,
}

#[derive(Serialize)]
struct Decomposition {
    split: f64,
    bound_electrons: f64,
    polarization_charge: f64,
    recomposition_error: f64,
    gap_levels: Vec<f64>,
    ambiguous: bool,
}

#[derive(Serialize)]
struct DefectReport {
    energy: DefectEnergyReport,
    admissibility_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    decomposition: Option<Decomposition>,
}

#[derive(Serialize)]
struct SupercellReport {
    size: usize,
    mode: Mode,
    filling: SupercellFilling,
    method: SupercellMethod,
    kinetic: f64,
    hartree: f64,
    energy: f64,
    /// ℰ - εF·Tr γ under Fermi-level filling.
    minimum: f64,
    multiplier: f64,
    occupations: OccupationSummary,
    gap: Option<GapReport>,
    iterations: usize,
    residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    defect_report: Option<DefectReport>,
}

pub struct SupercellArgs<'a> {
    pub size: usize,
    pub defect: Option<&'a Path>,
    pub mode: Option<Mode>,
    pub ef: Option<f64>,
    pub q: Option<f64>,
}

pub fn supercell_cmd(ctx: &Context, args: SupercellArgs) -> Result<()> {
    if args.size == 0 {
        bail!("--L must be at least 1");
    }
    let mode = args.mode.unwrap_or(ctx.config.run.mode);
    let defect = ctx.defect(args.defect)?;
    let reference = ctx.reference()?;
    let needs_gap = mode != Mode::Neutral || !defect.is_empty();
    let gap = if needs_gap { Some(ctx.gap(&reference, args.ef)?) } else { None };
    let (_, r0) = ctx.perfect(args.size, &reference)?;
    let filling = match mode {
        Mode::Neutral => SupercellFilling::Neutral,
        Mode::Mu => SupercellFilling::Threshold(gap.as_ref().unwrap().fermi_level),
        Mode::Charge => SupercellFilling::Charge(
            args.q
                .or(ctx.config.run.q)
                .ok_or_else(|| anyhow!("charge mode needs --q or run.q"))?,
        ),
    };
    let sol = if needs_gap {
        let problem = SupercellProblem::new(&ctx.config.problem()?, args.size, defect.clone());
        let start = SupercellStart::Field(r0.state.density.clone());
        scf_supercell(&problem, filling, gap.as_ref(), &ctx.options(), start)?
    } else {
        r0.clone()
    };
    let defect_report = match &gap {
        Some(g) => {
            let problem = SupercellProblem::new(&ctx.config.problem()?, args.size, defect);
            let state = DefectState::between(&sol.state, &r0.state)?;
            let ef = match filling {
                SupercellFilling::Threshold(ef) => ef,
                _ => g.fermi_level,
            };
            let decomposition = if let SupercellFilling::Threshold(ef) = filling {
                let split = g.midpoint.min(ef);
                let d = decompose_defect(&problem, &r0.state, &sol.state, split, ef)?;
                Some(Decomposition {
                    split,
                    bound_electrons: d.bound_electrons,
                    polarization_charge: d.polarization_charge,
                    recomposition_error: d.recomposition_error,
                    gap_levels: d.gap_levels,
                    ambiguous: d.ambiguous,
                })
            } else {
                None
            };
            Some(DefectReport {
                energy: defect_energy(&problem, &r0.state, &state, ef)?,
                admissibility_margin: state.admissibility_margin()?,
                decomposition,
            })
        }
        None => None,
    };
    let occ = &sol.state.occupations;
    let report = SupercellReport {
        size: args.size,
        mode,
        filling,
        method: sol.method,
        kinetic: sol.energy.kinetic,
        hartree: sol.energy.hartree,
        energy: sol.energy.total,
        minimum: sol.minimum(),
        multiplier: sol.multiplier(),
        occupations: OccupationSummary {
            states: occ.len(),
            total_electrons: sol.state.total_electrons,
            frontier: sol.state.frontier,
            fractional_states: occ.iter().filter(|&&o| o > 1e-12 && o < 1.0 - 1e-12).count(),
            lowest_level: sol.state.eigenvalues().first().copied().unwrap_or(f64::NAN),
        },
        gap: gap.as_ref().map(Into::into),
        iterations: sol.iterations,
        residuals: sol.residuals.clone(),
        defect_report,
    };
    ctx.sink.json("supercell.json", &ctx.config, &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ChargeCsvRow {
    q: f64,
    energy_hartree: f64,
    multiplier_hartree: f64,
    multiplier_in_gap: bool,
}

pub fn e_of_q_cmd(ctx: &Context, size: usize, grid: &str) -> Result<()> {
    let charges = parse_grid(grid)?;
    let reference = ctx.reference()?;
    let gap = ctx.gap(&reference, None)?;
    let (free, r0) = ctx.perfect(size, &reference)?;
    let curve = e0_of_q(&free, &gap, &charges, &r0, &ctx.options())?;
    let rows: Vec<ChargeCsvRow> = curve
        .rows
        .iter()
        .map(|r| ChargeCsvRow {
            q: r.q,
            energy_hartree: r.energy,
            multiplier_hartree: r.multiplier,
            multiplier_in_gap: r.multiplier_in_gap,
        })
        .collect();
    ctx.sink.csv("e_of_q.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct BindingCsvRow {
    q: f64,
    qprime: f64,
    e_nu_rest_hartree: f64,
    e0_qprime_hartree: f64,
    e_nu_q_hartree: f64,
    gap_hartree: f64,
}

pub fn binding_cmd(ctx: &Context, size: usize, q: f64, grid: &str, defect: Option<&Path>) -> Result<()> {
    let qprimes = parse_grid(grid)?;
    let defect = ctx.defect(defect)?;
    let reference = ctx.reference()?;
    let gap = ctx.gap(&reference, None)?;
    let (_, r0) = ctx.perfect(size, &reference)?;
    let problem = SupercellProblem::new(&ctx.config.problem()?, size, defect);
    let rows: Vec<BindingCsvRow> = binding_diagnostic(&problem, &gap, q, &qprimes, &r0, &ctx.options())?
        .into_iter()
        .map(|r| BindingCsvRow {
            q: r.q,
            qprime: r.qprime,
            e_nu_rest_hartree: r.e_nu_rest,
            e0_qprime_hartree: r.e0_qprime,
            e_nu_q_hartree: r.e_nu_q,
            gap_hartree: r.gap,
        })
        .collect();
    ctx.sink.csv("binding.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct DensityCsvRow {
    #[serde(rename = "L")]
    size: usize,
    energy_per_cell_hartree: f64,
    energy_error_hartree: f64,
    density_deviation: f64,
    phi_sup_hartree: f64,
    eigenvalue_deviation_hartree: f64,
    spectral_bound_holds: bool,
    iterations: usize,
    config_sha256: String,
}

impl DensityCsvRow {
    fn new(r: &DensityRow, hash: &str) -> Self {
        Self {
            size: r.size,
            energy_per_cell_hartree: r.energy_per_cell,
            energy_error_hartree: r.energy_error,
            density_deviation: r.density_deviation,
            phi_sup_hartree: r.phi_sup,
            eigenvalue_deviation_hartree: r.eigenvalue_deviation,
            spectral_bound_holds: r.spectral_bound_holds(),
            iterations: r.iterations,
            config_sha256: hash.to_string(),
        }
    }
}

pub fn density_conv_cmd(ctx: &Context, sizes: Option<Vec<usize>>) -> Result<()> {
    let sizes = sizes.unwrap_or_else(|| ctx.config.run.l_list.clone());
    let reference = ctx.reference()?;
    let rows = density_convergence(&ctx.config.problem()?, &sizes, &reference, &ctx.options())?;
    let hash = &ctx.sink.config_sha256;
    let csv: Vec<DensityCsvRow> = rows.iter().map(|r| DensityCsvRow::new(r, hash)).collect();
    ctx.sink.csv("density_conv.csv", &csv)?;
    ctx.sink.json("density_conv.json", &ctx.config, &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow {
    #[serde(rename = "L")]
    size: usize,
    energy_per_cell_hartree: f64,
    energy_error_hartree: f64,
    density_deviation: f64,
    phi_sup_hartree: f64,
    eigenvalue_deviation_hartree: f64,
    i0_ef_hartree: Option<f64>,
    inu_ef_hartree: Option<f64>,
    delta_hartree: Option<f64>,
    defect_charge: Option<f64>,
    config_sha256: String,
}

pub fn sweep_l_cmd(ctx: &Context, sizes: Option<Vec<usize>>, defect: Option<&Path>, ef: Option<f64>) -> Result<()> {
    let sizes = sizes.unwrap_or_else(|| ctx.config.run.l_list.clone());
    let defect = ctx.defect(defect)?;
    let reference = ctx.reference()?;
    let fermi_runs = !defect.is_empty() || ef.is_some() || ctx.config.run.ef.is_some();
    let gap = if fermi_runs { Some(ctx.gap(&reference, ef)?) } else { None };
    let result: SweepResult = sweep_l(
        &ctx.config.problem()?,
        &defect,
        &sizes,
        gap.as_ref(),
        &reference,
        &ctx.options(),
    )?;
    let hash = &ctx.sink.config_sha256;
    let csv: Vec<SweepCsvRow> = result
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            size: r.crystal.size,
            energy_per_cell_hartree: r.crystal.energy_per_cell,
            energy_error_hartree: r.crystal.energy_error,
            density_deviation: r.crystal.density_deviation,
            phi_sup_hartree: r.crystal.phi_sup,
            eigenvalue_deviation_hartree: r.crystal.eigenvalue_deviation,
            i0_ef_hartree: r.i0_ef,
            inu_ef_hartree: r.inu_ef,
            delta_hartree: r.delta,
            defect_charge: r.defect_charge,
            config_sha256: hash.clone(),
        })
        .collect();
    ctx.sink.csv("sweep_l.csv", &csv)?;
    ctx.sink.json("sweep_l.json", &ctx.config, &result)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &str, value: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

fn evaluate(field: &FourierField, x: [f64; 3]) -> f64 {
    (0..field.coeffs().len())
        .map(|i| {
            let k = field.wavevector(field.mode(i));
            (field.coeffs()[i] * Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])).re
        })
        .sum()
}

fn cos_field(amplitude: f64) -> FourierField {
    FourierField::from_modes(1, 1, |m| {
        let on = m[1] == 0 && m[2] == 0 && m[0].abs() == 1;
        Complex64::new(if on { 0.5 * amplitude } else { 0.0 }, 0.0)
    })
}

/// Oracle cross-checks: Coulomb pairing, fiber spectrum and projector
/// identities. Returns whether every check passed.
pub fn validate_cmd(config: Option<&Config>, sink: &Sink) -> Result<bool> {
    use fermi_sea_oracle::{oracle_coulomb, oracle_eigensolve, oracle_projector_identities};
    let mut checks = Vec::new();

    let cos = cos_field(1.0);
    let ours = d_periodic(&cos, &cos, 0.0)?;
    let oracle = oracle_coulomb(|x| evaluate(&cos, x), |x| evaluate(&cos, x), 1.0, 5, 0.0, 2)?;
    checks.push(check("coulomb_cosine_rel", ((ours - oracle) / oracle).abs(), 1e-6));

    if let Some(c) = config {
        let mu = c.problem()?.mu()?.with_extent(3);
        let ours = d_periodic(&mu, &mu, 0.0)?;
        let oracle = oracle_coulomb(|x| evaluate(&mu, x), |x| evaluate(&mu, x), 1.0, 7, 0.0, 3)?;
        checks.push(check("coulomb_nuclear_rel", ((ours - oracle) / oracle).abs(), 1e-6));
    }

    let potential = cos_field(2.0);
    let lattice = LatticeConfig::new(400.0, 1, LatticeConfig::min_grid_n(400.0, 1.0))?;
    let pw = assemble_fiber(build_basis(&lattice, [0.0; 3])?, &potential)?.eigenvalues()[0];
    let n = 11;
    let samples: Vec<f64> = (0..n * n * n)
        .map(|i| 2.0 * (2.0 * PI * (i / (n * n)) as f64 / n as f64).cos())
        .collect();
    let fd = oracle_eigensolve(&samples, n, [0.0; 3], 1.0)?[0];
    checks.push(check("fiber_ground_state_fd11", (fd - pw).abs(), 2e-3));

    let occupied: Vec<bool> = (0..12).map(|i| i < 5).collect();
    let p = oracle_projector_identities(&occupied, 6, 8, 0.5, 7)?;
    checks.push(check("projector_identity", p.projector_identity, 1e-12));
    checks.push(check("trace_integrality", p.trace_integrality, 1e-12));
    checks.push(check("mixture_margin", (-p.mixture_margin).max(0.0), 1e-12));

    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{} {}: {:.3e} (tolerance {:.0e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    #[derive(Serialize)]
    struct Report<'a> {
        pass: bool,
        checks: &'a [Check],
    }
    sink.json("validate.json", &config, &Report { pass, checks: &checks })?;
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-1:1:0.5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0:0.3:0.1").unwrap().len(), 4);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn named_points() {
        assert_eq!(named_point("gamma").unwrap(), [0.0; 3]);
        assert_eq!(named_point("r").unwrap(), [PI; 3]);
        assert!(named_point("K").is_err());
    }
}
