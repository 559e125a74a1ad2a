use jsqslq::mg::{self, level_probability};
use jsqslq::model::{BOUNDARY_PHASES, PHASES};
use jsqslq::truncated::{solve_auto, DEFAULT_TRUNCATION};
use jsqslq::ModelParams;

fn cases() -> Vec<ModelParams> {
    let sym = [1.0 / 3.0; 3];
    let skew = [0.9999, 0.00005, 0.00005];
    vec![
        ModelParams::new(4.0, [5.0, 5.0, 5.0], sym, [1.0; 3]).unwrap(),
        ModelParams::new(4.0, [4.5, 3.0, 5.0], sym, [1.0; 3]).unwrap(),
        ModelParams::new(4.0, [30.0, 4.0, 5.0], sym, [1.0; 3]).unwrap(),
        ModelParams::new(4.0, [4.2, 3.0, 5.0], skew, [1.0; 3]).unwrap(),
        ModelParams::new(4.0, [4.5, 3.0, 5.0], sym, [8.0, 1.0, 1.0]).unwrap(),
    ]
}

#[test]
fn total_variation_against_truncated_chain() {
    for m in cases() {
        let sol = mg::solve(&m).unwrap();
        let t = solve_auto(&m, DEFAULT_TRUNCATION).unwrap();
        let tv = t.tv_distance(&sol);
        assert!(tv <= 1e-8, "{m:?}: tv {tv:e} at N = {}", t.truncation);
    }
}

#[test]
fn idle_probability_and_levels() {
    let m = ModelParams::new(4.0, [4.5, 3.0, 5.0], [1.0 / 3.0; 3], [1.0; 3]).unwrap();
    let sol = mg::solve(&m).unwrap();
    let t = solve_auto(&m, DEFAULT_TRUNCATION).unwrap();
    let idle = sol.p0[0] + sol.p0[1] + sol.p0[4];
    assert!((idle - t.moments().idle).abs() <= 1e-8);

    let m = ModelParams::uniform(4.0, [5.0; 3]).unwrap();
    let sol = mg::solve(&m).unwrap();
    let t = solve_auto(&m, DEFAULT_TRUNCATION).unwrap();
    for (i, &d) in BOUNDARY_PHASES.iter().enumerate() {
        let a = level_probability(&sol, 0, d).unwrap();
        assert!((a - t.levels[0][i]).abs() <= 1e-9);
    }
    for n in 1..=20u64 {
        for (i, &d) in PHASES.iter().enumerate() {
            let a = level_probability(&sol, n, d).unwrap();
            let b = t.level(n).unwrap()[i];
            assert!((a - b).abs() <= 1e-9, "n={n} {d}: {a} vs {b}");
        }
    }
}

#[test]
fn factorial_moment_sums() {
    for m in cases() {
        let sol = mg::solve(&m).unwrap();
        let t = solve_auto(&m, DEFAULT_TRUNCATION).unwrap();
        let (_, gp, gpp) = t.phase_sums();
        for j in 0..12 {
            let scale = sol.sum_n[j].abs().max(1.0);
            assert!((sol.sum_n[j] - gp[j]).abs() <= 1e-8 * scale, "{m:?} {j}");
            let scale = sol.sum_n2m[j].abs().max(1.0);
            assert!((sol.sum_n2m[j] - gpp[j]).abs() <= 1e-8 * scale, "{m:?} {j}");
        }
    }
}

#[test]
fn residual_and_normalization_on_heavy_case() {
    let m = ModelParams::new(4.0, [4.2, 3.0, 5.0], [0.9999, 0.00005, 0.00005], [1.0; 3]).unwrap();
    let sol = mg::solve(&m).unwrap();
    assert!(sol.residual <= mg::R_RESIDUAL_BOUND);
    assert!(sol.normalization_defect() <= mg::NORMALIZATION_BOUND);
    assert!(sol.spectral_radius() < 1.0);
}
