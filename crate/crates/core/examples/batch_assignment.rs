//! The per-batch assignment LP on its own: residual rewards in, an integral
//! optimum and a matching dual out.

use omkd::assignment::solve_batch_assignment;

fn main() {
    let r = vec![
        vec![Some(3.0), Some(1.0), None],
        vec![Some(2.0), Some(2.0), Some(0.5)],
        vec![Some(2.5), None, Some(-1.0)],
        vec![Some(4.0), Some(3.5), Some(1.0)],
    ];
    let q = [2, 1, 1];
    let sol = solve_batch_assignment(&r, &q);
    for (n, a) in sol.assignment.iter().enumerate() {
        println!("request {n} -> {a:?}  (u = {:.3})", sol.u[n]);
    }
    println!("h = {:.3?} for caps {q:?}", sol.h);
    println!("primal {:.3} = dual {:.3}", sol.primal, sol.dual);
}
