mod common;

use common::*;
use dudesim::association::{associate, decoupled_set, AssociationPolicy, UlMetric};
use dudesim::propagation::{build_gain_matrix, pathloss_powerlaw, scenario_provider};
use dudesim::scenario::{generate_ues, Layer};
use proptest::prelude::*;

proptest! {
    #[test]
    fn pathloss_is_monotone(d1 in 0.0..5000.0f64, d2 in 0.0..5000.0f64, exp in 2.0..5.0f64, r in 0.0..60.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(pathloss_powerlaw(hi, exp, r) >= pathloss_powerlaw(lo, exp, r));
    }

    #[test]
    fn coupled_never_decouples(cells in arb_hetnet(), seed in any::<u64>(), sigma in 0.0..10.0f64) {
        let mut s = scenario(cells, 40.0);
        s.propagation.model.shadowing_sigma_db = sigma;
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let a = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        prop_assert!(decoupled_set(&a).is_empty());
    }

    /// Identical tx power and antenna gain everywhere: the two metrics differ
    /// by a constant.
    #[test]
    fn equal_cells_make_dude_coupled(
        positions in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 1..6),
        tx in 10.0..46.0f64,
        gain in 0.0..18.0f64,
        sigma in 0.0..8.0f64,
        seed in any::<u64>(),
    ) {
        let cells = positions
            .iter()
            .enumerate()
            .map(|(i, (x, y))| cell(i as u32, if i == 0 { Layer::Macro } else { Layer::Pico }, *x, *y, tx, gain))
            .collect();
        let mut s = scenario(cells, 40.0);
        s.propagation.model.shadowing_sigma_db = sigma;
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let d = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
        let c = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        prop_assert_eq!(d.ul, c.ul);
        prop_assert_eq!(d.dl, c.dl);
    }

    /// Equal EIRP with an arbitrary tx/gain split degenerates under the
    /// raw-pathloss metric.
    #[test]
    fn equal_eirp_raw_metric_degenerates(
        cells in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64, 0.0..18.0f64), 1..6),
        eirp in 30.0..58.0f64,
        seed in any::<u64>(),
    ) {
        let cells = cells
            .iter()
            .enumerate()
            .map(|(i, (x, y, g))| cell(i as u32, if i == 0 { Layer::Macro } else { Layer::Pico }, *x, *y, eirp - g, *g))
            .collect();
        let mut s = scenario(cells, 40.0);
        s.propagation.ul_metric = UlMetric::RawPathloss;
        s.propagation.model.shadowing_sigma_db = 4.0;
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let d = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::RawPathloss);
        prop_assert!(decoupled_set(&d).is_empty());
    }

    #[test]
    fn dude_uplink_ignores_uniform_tx_shift(cells in arb_hetnet(), shift in -20.0..20.0f64, seed in any::<u64>()) {
        let s = scenario(cells, 40.0);
        let mut shifted = s.clone();
        for c in &mut shifted.cells {
            c.tx_power_dbm += shift;
        }
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let a = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
        let b = associate(&g, &shifted.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
        prop_assert_eq!(a.ul, b.ul);
        // a common shift cannot move the downlink argmax either
        prop_assert_eq!(a.dl, b.dl);
    }

    #[test]
    fn raising_pico_power_never_shrinks_its_dl_set(
        cells in arb_hetnet(),
        which in any::<prop::sample::Index>(),
        boost in 0.0..20.0f64,
        seed in any::<u64>(),
    ) {
        let s = scenario(cells, 40.0);
        let picos = s.pico_ids();
        prop_assume!(!picos.is_empty());
        let target = picos[which.index(picos.len())];
        let mut louder = s.clone();
        louder.cells.iter_mut().find(|c| c.id == target).unwrap().tx_power_dbm += boost;
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let before = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        let after = associate(&g, &louder.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        for (b, a) in before.dl.iter().zip(&after.dl) {
            if *b == target {
                prop_assert_eq!(*a, target);
            }
        }
    }

    #[test]
    fn zero_range_extension_is_coupled(cells in arb_hetnet(), seed in any::<u64>()) {
        let s = scenario(cells, 40.0);
        let ues = generate_ues(&s, seed);
        let g = build_gain_matrix(&s, &ues, scenario_provider(&s), seed).unwrap();
        let re = associate(&g, &s.cells, AssociationPolicy::RangeExtension { offset_db: 0.0 }, UlMetric::CouplingGain);
        let c = associate(&g, &s.cells, AssociationPolicy::Coupled, UlMetric::CouplingGain);
        prop_assert_eq!(re.dl, c.dl);
        prop_assert_eq!(re.ul, c.ul);
    }
}

/// Downlink and uplink decisions read the same matrix entry: recomputing
/// both from `gain(c, u)` reproduces the association.
#[test]
fn both_directions_use_one_matrix_entry() {
    let s = scenario(vec![macro_at(0, 250.0, 500.0), pico_at(10, 400.0, 500.0, 30.0)], 200.0);
    let ues = generate_ues(&s, 7);
    let g = build_gain_matrix(&s, &ues, scenario_provider(&s), 7).unwrap();
    let a = associate(&g, &s.cells, AssociationPolicy::Dude, UlMetric::CouplingGain);
    for u in 0..ues.len() {
        let rsrp: Vec<f64> = (0..2).map(|c| s.cells[c].tx_power_dbm + g.gain(c, u)).collect();
        let dl = if rsrp[1] > rsrp[0] { 1 } else { 0 };
        let ul = if g.gain(1, u) > g.gain(0, u) { 1 } else { 0 };
        assert_eq!(a.dl[u], s.cells[dl].id);
        assert_eq!(a.ul[u], s.cells[ul].id);
        // coupling gain is antenna gains minus the stored pathloss
        let expect = s.cells[0].antenna_gain_dbi + ues[u].antenna_gain_dbi - g.pathloss(0, u);
        assert_eq!(g.gain(0, u), expect);
    }
    assert!(!decoupled_set(&a).is_empty());
}
