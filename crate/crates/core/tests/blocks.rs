use jsqslq::generator::printed::{self, Block, ERRATA};
use jsqslq::generator::{build_blocks, complete_service, route_arrival, FullState};
use jsqslq::ModelParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let lambda = rng.random_range(0.5..8.0);
    let mu = [(); 3].map(|_| rng.random_range(0.5..10.0));
    let w = [(); 3].map(|_| rng.random_range(0.01..1.0));
    let s: f64 = w.iter().sum();
    let mut p = w.map(|x| x / s);
    p[2] = 1.0 - p[0] - p[1];
    let q = [(); 3].map(|_| rng.random_range(0.1..5.0));
    ModelParams::new(lambda, mu, p, q).unwrap()
}

#[test]
fn rules_match_corrected_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let m = random_params(&mut rng);
        let built = build_blocks(&m);
        let typed = printed::transcribed_blocks(&m);
        assert!(built.max_abs_diff(&typed) <= 1e-14, "{m:?}");
        let a = printed::printed_phase_generator(&m);
        assert!((a - built.phase_generator()).amax() <= 1e-14);
    }
}

#[test]
fn printed_blocks_differ_only_at_errata() {
    let m = ModelParams::new(3.0, [4.0, 5.0, 6.0], [0.2, 0.3, 0.5], [1.0, 2.0, 3.0]).unwrap();
    let built = build_blocks(&m);
    let raw = printed::printed_blocks(&m);
    let mut diffs = Vec::new();
    for i in 0..7 {
        for j in 0..12 {
            if (built.b0[(i, j)] - raw.b0[(i, j)]).abs() > 1e-14 {
                diffs.push((Block::B0, i + 1, j + 1));
            }
        }
    }
    assert!((built.b1 - raw.b1).amax() <= 1e-14);
    assert!((built.b2 - raw.b2).amax() <= 1e-14);
    assert!((built.a0 - raw.a0).amax() <= 1e-14);
    assert!((built.a1 - raw.a1).amax() <= 1e-14);
    assert!((built.a2 - raw.a2).amax() <= 1e-14);
    let listed: Vec<_> = ERRATA.iter().map(|e| (e.block, e.row, e.col)).collect();
    assert_eq!(diffs, listed);

    // The printed entry breaks the row sum; the corrected one restores it.
    let (top, _) = raw.boundary_row_sums();
    assert!((top[3] + m.lambda() * (1.0 - m.p()[0])).abs() < 1e-12);
    let (top, first) = built.boundary_row_sums();
    assert!(top.iter().chain(first.iter()).all(|s| s.abs() < 1e-13));
}

fn reachable_state() -> impl Strategy<Value = FullState> {
    (0u64..6, 0u8..27, 0usize..3).prop_map(|(base, offs, server)| {
        let l = [base + (offs % 3 / 2) as u64, base + (offs / 3 % 3 / 2) as u64, base + (offs / 9 / 2) as u64];
        let max = *l.iter().max().unwrap();
        let server = if max == 0 || l[server] == max {
            server
        } else {
            (0..3).find(|&k| l[k] == max).unwrap()
        };
        FullState::new(l, server)
    })
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.1f64..10.0,
        prop::array::uniform3(0.1f64..10.0),
        prop::array::uniform3(0.0f64..1.0),
        prop::array::uniform3(0.1f64..5.0),
    )
        .prop_filter_map("routing weights", |(lambda, mu, w, q)| {
            let s: f64 = w.iter().sum();
            if s < 1e-3 {
                return None;
            }
            let mut p = w.map(|x| x / s);
            p[2] = (1.0 - p[0] - p[1]).max(0.0);
            ModelParams::new(lambda, mu, p, q).ok()
        })
}

proptest! {
    #[test]
    fn successors_are_reachable_and_mass_is_one(s in reachable_state(), m in params_strategy()) {
        prop_assert!(s.is_reachable());
        let arr = route_arrival(&s, &m);
        let total: f64 = arr.iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() <= 1e-14);
        for (t, _) in &arr {
            prop_assert!(t.is_reachable(), "{:?} -> {:?}", s, t);
            prop_assert!(t.level_phase().is_ok());
        }
        if s.l[s.server] > 0 {
            let dep = complete_service(&s, &m).unwrap();
            let total: f64 = dep.iter().map(|(_, w)| w).sum();
            prop_assert!((total - 1.0).abs() <= 1e-14);
            for (t, _) in &dep {
                prop_assert!(t.is_reachable(), "{:?} -> {:?}", s, t);
                prop_assert!(t.level_phase().is_ok());
            }
        }
    }

    #[test]
    fn generator_rows_sum_to_zero(m in params_strategy()) {
        let b = build_blocks(&m);
        let scale = m.lambda() + m.total_service_rate();
        let a = b.phase_generator();
        for i in 0..12 {
            prop_assert!(a.row(i).sum().abs() <= 1e-13 * scale);
        }
        let (top, first) = b.boundary_row_sums();
        for s in top.iter().chain(first.iter()) {
            prop_assert!(s.abs() <= 1e-13 * scale);
        }
    }
}
