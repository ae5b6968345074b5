// debug binary: inspect instance 0 of the QP oracle suite
use guardforce::qp::{self, QpProblem};
use guardforce::validate::oracles;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3_141_592);
    for i in 0..3 {
        let n = rng.random_range(1..=3usize);
        let m = rng.random_range(1..=3usize);
        let witness = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &g * &witness + DVector::from_fn(m, |_, _| rng.random_range(0.5..1.2));
        let u_nom = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let p = QpProblem::new(u_nom.clone(), g.clone(), h.clone()).unwrap();
        let sol = qp::solve(&p).unwrap();
        let grid = oracles::grid_qp_oracle(&p, 1e-3).unwrap();
        let cost = |u: &DVector<f64>| (u - &u_nom).norm_squared() * 0.5;
        let feas = |u: &DVector<f64>| (0..m).map(|r| (g.row(r) * u)[0] - h[r]).fold(f64::NEG_INFINITY, f64::max);
        println!("instance {i}: n={n} m={m}");
        println!("  u*      = {:?} cost {:.9} feas {:.3e} kkt {:.2e}", sol.u_star.as_slice(), cost(&sol.u_star), feas(&sol.u_star), sol.kkt_residual);
        println!("  grid    = {:?} cost {:.9} feas {:.3e}", grid.as_slice(), cost(&grid), feas(&grid));
        println!("  gap inf = {:.3e}", (&sol.u_star - &grid).amax());
        println!("  active  = {:?}", sol.active_set);
    }
}
