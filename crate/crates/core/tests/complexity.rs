use std::time::{Duration, Instant};

use cnss::graph::erdos_renyi;
use cnss::merge::greedy_merge;
use cnss::signals::null_pvalues;

fn best_of(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

/// Merge time on ER(n, 10/n), normalized by `n ln n`, must not grow by
/// more than a small factor from n = 10^3 to n = 10^5.
#[test]
fn merge_runtime_scales_like_n_log_n() {
    let mut normalized = Vec::new();
    for (n, reps) in [(1_000usize, 15), (10_000, 7), (100_000, 3)] {
        let g = erdos_renyi(n, 10.0 / n as f64, 1).unwrap();
        let p = null_pvalues(n, 2).unwrap();
        let elapsed = best_of(reps, || {
            for alpha in [0.01, 0.05, 0.09] {
                std::hint::black_box(greedy_merge(&g, &p, alpha, false).unwrap());
            }
        });
        let per = elapsed.as_secs_f64() / (n as f64 * (n as f64).ln());
        eprintln!("n={n}: {elapsed:?}, {per:.3e} s per n ln n");
        normalized.push(per);
    }
    let growth = normalized[2] / normalized[0];
    assert!(growth < 5.0, "time per n ln n grew {growth:.2}x from 1e3 to 1e5");
}
