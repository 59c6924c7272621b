//! Minimize the sphere and Rosenbrock functions with CMA-ES.

use windcast::cmaes::{minimize, rosenbrock, sphere, trace_tsv, CmaesConfig};

fn main() {
    let mut c = CmaesConfig::new(10, -5.0, 5.0, 2.0, 1);
    c.max_evals = 50_000;
    c.target = Some(1e-10);
    let out = minimize(&c, sphere).expect("valid config");
    println!(
        "sphere n=10: {:.3e} after {} evaluations ({})",
        out.best_fitness, out.evaluations, out.termination
    );

    let mut solved = 0;
    for seed in 0..20 {
        let mut r = CmaesConfig::new(5, -5.0, 5.0, 0.5, seed);
        r.mean = vec![0.0; 5];
        r.max_evals = 100_000;
        r.target = Some(1e-6);
        let out = minimize(&r, rosenbrock).expect("valid config");
        solved += usize::from(out.best_fitness < 1e-6);
        if seed == 0 {
            print!(
                "first generations of rosenbrock, seed 0\n{}",
                trace_tsv(&out.history[..5])
            );
        }
    }
    println!("rosenbrock n=5 solved for {solved}/20 seeds");
}
