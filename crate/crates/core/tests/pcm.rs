use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use raven_core::pcm::{DeviceConfig, DifferentialSynapse};

#[test]
fn random_programming_stays_in_bounds() {
    for auto_refresh in [true, false] {
        let d = DeviceConfig { n_states: 64, auto_refresh, ..Default::default() }.build().unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut s = d.synapse_for_weight(0.0);
        for _ in 0..100_000 {
            let before = d.read_weight(&s);
            match rng.gen_range(0..3) {
                0 => {
                    let moved = d.potentiate(&mut s, rng.gen_range(1..4));
                    assert!(d.read_weight(&s) > before || !moved);
                    assert!(d.read_weight(&s) >= before);
                }
                1 => {
                    let moved = d.depress(&mut s, rng.gen_range(1..4));
                    assert!(d.read_weight(&s) < before || !moved);
                    assert!(d.read_weight(&s) <= before);
                }
                _ => {
                    d.refresh(&mut s);
                    assert_eq!(d.read_weight(&s).to_bits(), before.to_bits());
                }
            }
            assert!(s.p <= d.max_level && s.n <= d.max_level);
            let (gp, gn) = s.conductances(&d);
            for g in [gp, gn] {
                assert!(g >= d.g_min && g <= d.g_max * (1.0 + 1e-12));
            }
            assert!(d.read_weight(&s).abs() <= d.w_max() * (1.0 + 1e-12));
            assert_eq!(d.read_weight(&s), d.read_weight(&s));
        }
    }
}

#[test]
fn full_sweep_from_bottom_reaches_top() {
    let d = DeviceConfig { auto_refresh: false, ..Default::default() }.build().unwrap();
    let mut s = DifferentialSynapse::new(0, d.max_level);
    let mut moves = 0;
    while d.potentiate(&mut s, 1) {
        moves += 1;
    }
    assert_eq!(moves, 999);
    assert_eq!(s.conductances(&d), (d.g_max, d.g_min));
    assert!((d.read_weight(&s) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn potentiate_depress_invert_away_from_bounds(p in 200u16..800, n in 200u16..800, k in 1u32..100) {
        let d = DeviceConfig::default().build().unwrap();
        let mut s = DifferentialSynapse::new(p, n);
        let w = d.read_weight(&s);
        prop_assert!(d.potentiate(&mut s, k));
        prop_assert!(d.read_weight(&s) > w);
        prop_assert!(d.depress(&mut s, k));
        prop_assert_eq!(d.read_weight(&s).to_bits(), w.to_bits());
        prop_assert_eq!(s, DifferentialSynapse::new(p, n));
    }

    #[test]
    fn refresh_is_weight_exact(p in 0u16..1000, n in 0u16..1000) {
        let d = DeviceConfig::default().build().unwrap();
        let mut s = DifferentialSynapse::new(p, n);
        let w = d.read_weight(&s);
        d.refresh(&mut s);
        prop_assert_eq!(d.read_weight(&s).to_bits(), w.to_bits());
        prop_assert!(s.p <= d.max_level && s.n <= d.max_level);
    }
}
