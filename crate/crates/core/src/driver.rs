//! The adaptive loop: solve, estimate, mark, refine; plus convergence tables.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};

use crate::assembly::{assemble_saddle_system, Formulation, MaterialParams};
use crate::estimators::{
    element_residuals, estimator_weights, poisson_indicator, project_load, residual_indicator, ErrorIndicators, PoissonIndicators,
};
use crate::mesh::{
    build_edge_topology, derive_macroelements, generate_initial_mesh, mark_all, mark_dorfler, refine_rgb, EdgeTopology, MacroPartition, Mesh,
};
use crate::problems::{energy_error, make_problem, EnergyError, Problem, ProblemId};
use crate::solve::{pressure_mean_check, solve_direct, MixedSolution, PressureMeanCheck};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Residual,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($name:literal => $val:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($val),)+
                    other => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $val { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(EstimatorKind, "estimator", "residual" => EstimatorKind::Residual, "poisson" => EstimatorKind::Poisson);
keyword_enum!(RefinementMode, "refinement", "uniform" => RefinementMode::Uniform, "adaptive" => RefinementMode::Adaptive);
keyword_enum!(Formulation, "formulation", "herrmann" => Formulation::Herrmann, "hydrostatic" => Formulation::Hydrostatic);

/// How the material is specified on input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialInput {
    /// The problem's reference modulus, optionally with another Poisson ratio.
    Reference { nu: Option<f64> },
    Young { young: f64, nu: f64 },
    Shear { mu: f64, nu: f64 },
}

impl MaterialInput {
    pub fn resolve(&self, problem: ProblemId, formulation: Formulation) -> Result<MaterialParams> {
        match *self {
            MaterialInput::Reference { nu: None } => Ok(problem.default_material(formulation)),
            MaterialInput::Reference { nu: Some(nu) } => match problem {
                ProblemId::Test3 | ProblemId::Patch => {
                    MaterialParams::from_engineering(problem.default_material(formulation).young, nu, formulation)
                }
                _ => MaterialParams::from_shear(problem.default_material(formulation).mu, nu, formulation),
            },
            MaterialInput::Young { young, nu } => MaterialParams::from_engineering(young, nu, formulation),
            MaterialInput::Shear { mu, nu } => MaterialParams::from_shear(mu, nu, formulation),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub formulation: Formulation,
    pub estimator: EstimatorKind,
    pub refinement: RefinementMode,
    pub theta: f64,
    pub material: MaterialInput,
    pub max_dof: usize,
    pub initial_level: usize,
}

impl RunConfig {
    pub fn new(problem: ProblemId) -> Self {
        RunConfig {
            problem,
            formulation: Formulation::Herrmann,
            estimator: EstimatorKind::Poisson,
            refinement: RefinementMode::Adaptive,
            theta: 0.5,
            material: MaterialInput::Reference { nu: None },
            max_dof: 100_000,
            initial_level: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta {} not in (0,1)", self.theta)));
        }
        if self.initial_level == 0 {
            return Err(Error::InvalidArgument("initial level must be at least 1".into()));
        }
        self.material.resolve(self.problem, self.formulation).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dof: usize,
    /// The selected estimator.
    pub eta: f64,
    pub theta_osc: f64,
    pub exact_error: Option<f64>,
    /// `eta / exact_error`
    pub effectivity: Option<f64>,
    pub rate: Option<f64>,
    pub eta_residual: f64,
    pub eta_poisson: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares rate over the last four rows, of the exact error when
    /// available and the estimate otherwise.
    pub tail_rate: Option<f64>,
}

/// Number of rows the tail rate is fitted on.
pub const TAIL_ROWS: usize = 4;

impl ConvergenceTable {
    fn uses_exact(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.exact_error.is_some())
    }

    fn errors(&self) -> Vec<f64> {
        if self.uses_exact() {
            self.rows.iter().map(|r| r.exact_error.unwrap()).collect()
        } else {
            self.estimated_errors()
        }
    }

    pub fn estimated_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eta).collect()
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.dof).collect()
    }

    /// Tail rate of the selected estimator regardless of exact availability.
    pub fn estimated_tail_rate(&self) -> Option<f64> {
        tail_rate(&self.dofs(), &self.estimated_errors(), TAIL_ROWS)
    }

    pub fn exact_tail_rate(&self) -> Option<f64> {
        if self.uses_exact() {
            tail_rate(&self.dofs(), &self.errors(), TAIL_ROWS)
        } else {
            None
        }
    }
}

/// `-log(e1/e0) / log(n1/n0)`
pub fn local_rate(n0: usize, e0: f64, n1: usize, e1: f64) -> f64 {
    -(e1 / e0).ln() / (n1 as f64 / n0 as f64).ln()
}

/// Negated least-squares slope of `log e` against `log N` over the last `k` rows.
pub fn tail_rate(dofs: &[usize], errors: &[f64], k: usize) -> Option<f64> {
    let n = dofs.len().min(errors.len());
    if n < 2 {
        return None;
    }
    let start = n.saturating_sub(k.max(2));
    let xs: Vec<f64> = dofs[start..n].iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = errors[start..n].iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Fills the local rates (from the second row on) and the tail rate.
pub fn compute_rates(table: &mut ConvergenceTable) -> Result<()> {
    if table.rows.len() < 2 {
        return Err(Error::InvalidArgument("rates need at least two levels".into()));
    }
    let errors = table.errors();
    table.rows[0].rate = None;
    for i in 1..table.rows.len() {
        table.rows[i].rate = Some(local_rate(table.rows[i - 1].dof, errors[i - 1], table.rows[i].dof, errors[i]));
    }
    table.tail_rate = tail_rate(&table.dofs(), &errors, TAIL_ROWS);
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.11e}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(table: &ConvergenceTable, mut w: W) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("empty convergence table".into()));
    }
    w.write_all(b"level,dof,eta,theta_osc,exact_error,effectivity,rate\n")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{:.11e},{:.11e},{},{},{}",
            r.level,
            r.dof,
            r.eta,
            r.theta_osc,
            cell(r.exact_error),
            cell(r.effectivity),
            cell(r.rate)
        )?;
    }
    Ok(())
}

pub fn emit_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(table, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Everything computed on one level, handed to observers before refinement.
pub struct LevelState<'a> {
    pub level: usize,
    pub problem: &'a Problem,
    pub mesh: &'a Mesh,
    pub topology: &'a EdgeTopology,
    pub macros: &'a MacroPartition,
    pub solution: &'a MixedSolution,
    pub residual: &'a ErrorIndicators,
    pub poisson: &'a PoissonIndicators,
    pub energy: Option<EnergyError>,
    pub pressure_check: PressureMeanCheck,
    pub row: &'a ConvergenceRow,
}

pub fn adaptive_loop(config: &RunConfig) -> Result<ConvergenceTable> {
    adaptive_loop_with(config, |_| Ok(()))
}

/// Runs the loop, calling `observer` once per level.
pub fn adaptive_loop_with<F>(config: &RunConfig, mut observer: F) -> Result<ConvergenceTable>
where
    F: FnMut(&LevelState<'_>) -> Result<()>,
{
    config.validate()?;
    let params = config.material.resolve(config.problem, config.formulation)?;
    let problem = make_problem(config.problem, params);
    let mut mesh = generate_initial_mesh(problem.domain, config.initial_level)?;
    if mesh.dof_count() > config.max_dof {
        return Err(Error::InvalidArgument(format!(
            "max_dof {} is below the initial dof count {}",
            config.max_dof,
            mesh.dof_count()
        )));
    }
    let f = |x| problem.body_force(x);
    let g = |x| problem.boundary_value(x);
    let mut table = ConvergenceTable { rows: Vec::new(), tail_rate: None };

    for level in 0.. {
        let at = |e: Error| Error::AtLevel { level, source: Box::new(e) };
        let topo = build_edge_topology(&mesh).map_err(at)?;
        let macros = derive_macroelements(&mesh, &topo).map_err(at)?;
        let system = assemble_saddle_system(&mesh, &topo, &macros, &params, &f, &g).map_err(at)?;
        let solution = solve_direct(&system).map_err(at)?;

        let weights = estimator_weights(&mesh, &topo, &params);
        let load = project_load(&mesh, &f, &weights).map_err(at)?;
        let residuals = element_residuals(&mesh, &topo, &solution, &load.f_h, &params).map_err(at)?;
        let residual = residual_indicator(&mesh, &topo, &residuals, &weights, &load.theta);
        let poisson = poisson_indicator(&mesh, &topo, &residuals, &weights, &params).map_err(at)?;
        let energy = if problem.has_exact() { Some(energy_error(&mesh, &solution, &problem).map_err(at)?) } else { None };
        let pressure_check = pressure_mean_check(&mesh, &topo, &solution, &params).map_err(at)?;
        if !pressure_check.passed() {
            warn!("level {level}: pressure mean defect {:.3e}", pressure_check.defect);
        }

        let (eta, squares) = match config.estimator {
            EstimatorKind::Residual => (residual.global_eta, residual.squared()),
            EstimatorKind::Poisson => (poisson.global_eta, poisson.squared()),
        };
        let exact_error = energy.map(|e| e.total);
        let dof = mesh.dof_count();
        let rate = table.rows.last().map(|prev| {
            let (e0, e1) = match (prev.exact_error, exact_error) {
                (Some(a), Some(b)) => (a, b),
                _ => (prev.eta, eta),
            };
            local_rate(prev.dof, e0, dof, e1)
        });
        let row = ConvergenceRow {
            level,
            dof,
            eta,
            theta_osc: residual.global_theta,
            exact_error,
            effectivity: exact_error.map(|e| eta / e),
            rate,
            eta_residual: residual.global_eta,
            eta_poisson: poisson.global_eta,
        };
        info!(
            "level {level}: N = {dof}, eta = {eta:.4e}, error = {}",
            exact_error.map(|e| format!("{e:.4e}")).unwrap_or_else(|| "-".into())
        );
        observer(&LevelState {
            level,
            problem: &problem,
            mesh: &mesh,
            topology: &topo,
            macros: &macros,
            solution: &solution,
            residual: &residual,
            poisson: &poisson,
            energy,
            pressure_check,
            row: &row,
        })
        .map_err(at)?;
        table.rows.push(row);

        if dof >= config.max_dof {
            break;
        }
        let marked = match config.refinement {
            RefinementMode::Uniform => mark_all(mesh.n_triangles()),
            RefinementMode::Adaptive => mark_dorfler(&squares, config.theta).map_err(at)?,
        };
        if marked.is_empty() {
            warn!("level {level}: nothing marked, stopping");
            break;
        }
        mesh = refine_rgb(&mesh, &marked).map_err(at)?;
    }
    if table.rows.len() >= 2 {
        compute_rates(&mut table)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(level: usize, dof: usize, eta: f64, exact: Option<f64>) -> ConvergenceRow {
        ConvergenceRow {
            level,
            dof,
            eta,
            theta_osc: 0.0,
            exact_error: exact,
            effectivity: exact.map(|e| eta / e),
            rate: None,
            eta_residual: eta,
            eta_poisson: eta,
        }
    }

    #[test]
    fn rate_examples() {
        assert!((local_rate(1000, 1.0, 2000, 1.0 / 2f64.sqrt()) - 0.5).abs() < 1e-14);
        assert_eq!(local_rate(1000, 0.3, 4000, 0.3), 0.0);
        let mut t = ConvergenceTable { rows: vec![row(0, 1000, 1.0, None), row(1, 2000, 1.0 / 2f64.sqrt(), None)], tail_rate: None };
        compute_rates(&mut t).unwrap();
        assert!((t.rows[1].rate.unwrap() - 0.5).abs() < 1e-14);
        assert!((t.tail_rate.unwrap() - 0.5).abs() < 1e-14);
        let mut one = ConvergenceTable { rows: vec![row(0, 10, 1.0, None)], tail_rate: None };
        assert!(compute_rates(&mut one).is_err());
    }

    #[test]
    fn tail_rate_uses_last_rows() {
        // slope 0.2 on the first rows, exactly 0.5 on the last four
        let dofs = [100, 200, 400, 800, 1600, 3200];
        let errs: Vec<f64> = dofs
            .iter()
            .enumerate()
            .map(|(i, &n)| if i < 2 { 10.0 * (n as f64).powf(-0.2) } else { 50.0 * (n as f64).powf(-0.5) })
            .collect();
        assert!((tail_rate(&dofs, &errs, 4).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_error_drives_rates_when_present() {
        let mut t = ConvergenceTable { rows: vec![row(0, 100, 1.0, Some(2.0)), row(1, 400, 1.0, Some(1.0))], tail_rate: None };
        compute_rates(&mut t).unwrap();
        assert!((t.rows[1].rate.unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(t.estimated_tail_rate(), Some(0.0));
    }

    #[test]
    fn csv_layout() {
        let t = ConvergenceTable { rows: vec![row(0, 1090, 0.25, None)], tail_rate: None };
        let mut out = Vec::new();
        write_csv(&t, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "level,dof,eta,theta_osc,exact_error,effectivity,rate\n0,1090,2.50000000000e-1,0.00000000000e0,,,\n");
        let empty = ConvergenceTable { rows: vec![], tail_rate: None };
        assert!(write_csv(&empty, Vec::new()).is_err());
    }

    #[test]
    fn keywords_parse() {
        assert_eq!("Poisson".parse::<EstimatorKind>().unwrap(), EstimatorKind::Poisson);
        assert_eq!("uniform".parse::<RefinementMode>().unwrap(), RefinementMode::Uniform);
        assert_eq!("hydrostatic".parse::<Formulation>().unwrap(), Formulation::Hydrostatic);
        assert_eq!(Formulation::Herrmann.to_string(), "herrmann");
        assert!("cg".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(ProblemId::Test1);
        assert!(c.validate().is_ok());
        c.theta = 1.0;
        assert!(c.validate().is_err());
        c.theta = 0.5;
        c.material = MaterialInput::Shear { mu: 1.0, nu: 0.5 };
        assert!(c.validate().is_err());
        c.material = MaterialInput::Reference { nu: None };
        c.max_dof = 10;
        assert!(matches!(adaptive_loop(&c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_levels_quadruple() {
        let mut c = RunConfig::new(ProblemId::Test1);
        c.refinement = RefinementMode::Uniform;
        c.initial_level = 1;
        c.max_dof = 290;
        let t = adaptive_loop(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        let ratio = t.rows[1].dof as f64 / t.rows[0].dof as f64;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
        assert!(t.rows[1].exact_error.unwrap() < t.rows[0].exact_error.unwrap());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut c = RunConfig::new(ProblemId::Test2);
        c.initial_level = 1;
        c.max_dof = 2500;
        let a = adaptive_loop(&c).unwrap();
        let b = adaptive_loop(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.exact_error.is_none() && r.effectivity.is_none()));
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_csv(&a, &mut x).unwrap();
        write_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn estimator_choice_does_not_change_the_uniform_solve() {
        let mut c = RunConfig::new(ProblemId::Test1);
        c.refinement = RefinementMode::Uniform;
        c.initial_level = 1;
        c.max_dof = 1000;
        let a = adaptive_loop(&c).unwrap();
        c.estimator = EstimatorKind::Residual;
        let b = adaptive_loop(&c).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.dof, rb.dof);
            assert_eq!(ra.exact_error, rb.exact_error);
            assert_eq!(ra.eta_residual, rb.eta_residual);
            assert_eq!(ra.eta_poisson, rb.eta_poisson);
        }
    }
}
