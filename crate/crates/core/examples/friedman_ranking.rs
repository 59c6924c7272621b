//! Rank three forecasters over ten repetitions with the Friedman test.

use windcast::metrics::friedman_ranks;

fn main() {
    let rmse = vec![
        vec![0.73, 0.72, 0.74, 0.71, 0.75, 0.73, 0.72, 0.74, 0.73, 0.72],
        vec![0.75, 0.74, 0.75, 0.74, 0.76, 0.75, 0.73, 0.75, 0.74, 0.76],
        vec![0.81, 0.80, 0.79, 0.82, 0.80, 0.81, 0.83, 0.80, 0.81, 0.79],
    ];
    let res = friedman_ranks(&rmse, true).expect("well-formed table");
    for (name, r) in ["tuned", "grid", "baseline"].iter().zip(&res.mean_ranks) {
        println!("{name:<9} mean rank {r:.2}");
    }
    println!(
        "chi-square {:.3} on {} df, p = {:.2e}",
        res.chi_square, res.df, res.p_value
    );
}
