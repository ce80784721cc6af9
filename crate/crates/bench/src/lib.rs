//! Fixtures shared by the benchmarks in `benches/`.

use stabfem::mesh::{build_edge_topology, derive_macroelements, generate_initial_mesh, EdgeTopology, MacroPartition};
use stabfem::{assemble_saddle_system, make_problem, Formulation, Mesh, Problem, ProblemId, SaddleSystem};

pub struct Fixture {
    pub problem: Problem,
    pub mesh: Mesh,
    pub topology: EdgeTopology,
    pub macros: MacroPartition,
}

impl Fixture {
    /// Test problem 1 on a uniform mesh with `level` extra red refinements.
    pub fn smooth(level: usize, formulation: Formulation) -> Self {
        let problem = make_problem(ProblemId::Test1, ProblemId::Test1.default_material(formulation));
        let mesh = generate_initial_mesh(problem.domain, level).expect("mesh");
        let topology = build_edge_topology(&mesh).expect("topology");
        let macros = derive_macroelements(&mesh, &topology).expect("macros");
        Fixture { problem, mesh, topology, macros }
    }

    pub fn system(&self) -> SaddleSystem {
        let f = |x| self.problem.body_force(x);
        let g = |x| self.problem.boundary_value(x);
        assemble_saddle_system(&self.mesh, &self.topology, &self.macros, &self.problem.params, &f, &g).expect("assembly")
    }
}
