mod common;

use common::*;
use dudesim::engine::{
    coverage_raster, run_campaign, run_campaign_with_workers, run_snapshot, run_snapshots, snapshot_seed,
    sweep_pico_activation, CampaignMetrics, CONVERGENCE_DB,
};
use dudesim::metrics::percentile_sorted;
use dudesim::presets::{testbed_mini, Case};
use dudesim::scenario::Layer;
use dudesim::{AssociationPolicy, DemandProfile};
use proptest::prelude::*;

fn small_hetnet() -> dudesim::Scenario {
    let cells = vec![
        macro_at(0, 250.0, 500.0),
        macro_at(1, 750.0, 500.0),
        pico_at(10, 400.0, 300.0, 30.0),
        pico_at(11, 600.0, 700.0, 30.0),
        pico_at(12, 150.0, 800.0, 30.0),
    ];
    scenario(cells, 60.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// One UE, one macro: the throughput follows from the link budget alone.
    #[test]
    fn single_link_matches_closed_form(seed in any::<u64>(), x in 0.0..1000.0f64, y in 0.0..1000.0f64) {
        let mut s = scenario(vec![macro_at(0, x, y)], 1.0);
        s.propagation.model.ref_loss_db = 38.5;
        s.fixed_count = true;
        let r = run_snapshot(&s, AssociationPolicy::Dude, seed).unwrap();
        prop_assert_eq!(r.ues.len(), 1);
        let u = &r.ues[0];
        let d = u.position.distance(&s.cells[0].position).max(1.0);
        let pl = s.propagation.model.ref_loss_db + 40.0 * d.log10();
        let noise = -174.0 + 10.0 * 180e3f64.log10() + 5.0;
        let snr = 20.0 + 17.8 - pl - noise;
        let se = if snr < -7.0 { 0.0 } else { (1.0 + 10f64.powf(snr / 10.0)).log2().min(6.0) };
        let per_rb = 180e3 * se;
        let expect = if per_rb > 0.0 && (200e3 / per_rb).ceil() <= 100.0 { (100.0 * per_rb).min(20e6) } else { 0.0 };
        prop_assert!((u.sinr_db - snr).abs() < 1e-9);
        prop_assert!((u.throughput_bps - expect).abs() <= 1e-6 * expect.max(1.0), "{} vs {}", u.throughput_bps, expect);
        prop_assert_eq!(u.tx_power_dbm, 20.0);
        prop_assert!(r.converged);
    }

    #[test]
    fn snapshot_conserves_load(seed in any::<u64>(), dude in any::<bool>()) {
        let s = small_hetnet();
        let policy = if dude { AssociationPolicy::Dude } else { AssociationPolicy::Coupled };
        let r = run_snapshot(&s, policy, seed).unwrap();
        let n = r.ues.len();
        prop_assert_eq!(r.cells.iter().map(|c| c.ul_ues).sum::<usize>(), n);
        prop_assert_eq!(r.cells.iter().map(|c| c.dl_ues).sum::<usize>(), n);
        for c in &r.cells {
            prop_assert!(c.rbs_used <= s.radio.n_rb);
        }
        for u in &r.ues {
            prop_assert!(u.outage == (u.rbs == 0));
            prop_assert!(u.outage || (u.throughput_bps >= s.demand.r_min * (1.0 - 1e-12) && u.throughput_bps <= s.demand.r_max));
        }
        if !dude {
            prop_assert_eq!(r.decoupled_count(), 0);
        }
        if r.converged && r.level_history.len() >= 2 {
            let h = &r.level_history;
            let (prev, last) = (&h[h.len() - 2], &h[h.len() - 1]);
            for (a, b) in prev.iter().zip(last) {
                prop_assert!(b - a <= CONVERGENCE_DB);
            }
        }
        prop_assert_eq!(&r, &run_snapshot(&s, policy, seed).unwrap());
    }

    #[test]
    fn percentiles_are_ordered(seed in any::<u64>(), rmin in 5e4..3e6f64) {
        let s = small_hetnet().with_demand(DemandProfile::new(rmin, 20e6).unwrap()).unwrap();
        let m = run_campaign(&s, AssociationPolicy::Dude, 3, seed).unwrap();
        prop_assert!(m.p5_bps <= m.p50_bps && m.p50_bps <= m.p90_bps && m.p90_bps <= m.p98_bps);
        for f in [m.outage_macro, m.outage_pico, m.decoupled_fraction] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}

#[test]
fn empty_drop_is_vacuous() {
    let s = scenario(vec![macro_at(0, 500.0, 500.0)], 0.0);
    let r = run_snapshot(&s, AssociationPolicy::Dude, 1).unwrap();
    assert!(r.ues.is_empty());
    assert!(r.cells.iter().all(|c| c.ul_ues == 0 && c.rbs_used == 0));
    let m = CampaignMetrics::aggregate(&[r]);
    assert_eq!((m.outage_macro, m.outage_pico, m.mean_ues_macro), (0.0, 0.0, 0.0));
}

#[test]
fn one_snapshot_campaign_is_that_snapshot() {
    let s = small_hetnet();
    let m = run_campaign(&s, AssociationPolicy::Dude, 1, 99).unwrap();
    let r = run_snapshot(&s, AssociationPolicy::Dude, snapshot_seed(99, 0)).unwrap();
    let mut t: Vec<f64> = r.ues.iter().map(|u| u.throughput_bps).collect();
    t.sort_by(f64::total_cmp);
    assert_eq!(m.snapshots, 1);
    assert_eq!(m.total_ues, r.ues.len());
    assert_eq!(m.p5_bps, percentile_sorted(&t, 5.0));
    assert_eq!(m.p98_bps, percentile_sorted(&t, 98.0));
    let on = |l: Layer| r.ues.iter().filter(|u| u.ul_layer == l).count() as f64;
    let out = |l: Layer| r.ues.iter().filter(|u| u.ul_layer == l && u.outage).count() as f64;
    assert_eq!(m.outage_macro, out(Layer::Macro) / on(Layer::Macro));
    assert_eq!(m.mean_ues_macro, on(Layer::Macro) / 2.0);
    assert_eq!(m.mean_ues_pico, on(Layer::Pico) / 3.0);
    assert_eq!(m.decoupled_fraction, r.decoupled_count() as f64 / r.ues.len() as f64);
}

#[test]
fn unreachable_demand_is_total_outage() {
    // 100 RBs at the 6 bit/s/Hz cap carry 108 Mb/s
    let s = small_hetnet().with_demand(DemandProfile::new(200e6, 200e6).unwrap()).unwrap();
    let m = run_campaign(&s, AssociationPolicy::Dude, 4, 5).unwrap();
    assert_eq!(m.outage_macro, 1.0);
    assert_eq!(m.outage_pico, 1.0);
    assert_eq!((m.p5_bps, m.p50_bps, m.p90_bps, m.p98_bps), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn campaign_ignores_worker_count() {
    let mut s = testbed_mini();
    s.propagation.model.shadowing_sigma_db = 6.0;
    let one = run_campaign_with_workers(&s, AssociationPolicy::Dude, 20, 11, 1).unwrap();
    let four = run_campaign_with_workers(&s, AssociationPolicy::Dude, 20, 11, 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn snapshot_order_does_not_matter() {
    let s = small_hetnet();
    let mut snaps = run_snapshots(&s, AssociationPolicy::Dude, 6, 3).unwrap();
    let a = CampaignMetrics::aggregate(&snaps);
    snaps.reverse();
    assert_eq!(a, CampaignMetrics::aggregate(&snaps));
}

#[test]
fn sweep_endpoints() {
    let s = small_hetnet();
    let order = s.pico_ids();
    let mut first = Vec::new();
    for case in Case::ALL {
        let sc = case.apply(&s).unwrap();
        let rows = sweep_pico_activation(&sc, case.policy(), &order, 3, 8).unwrap();
        assert_eq!(rows.len(), order.len() + 1);
        assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let full = run_campaign(&sc, case.policy(), 3, 8).unwrap();
        assert_eq!(rows.last().unwrap().1, full);
        first.push(rows[0].1.clone());
    }
    assert_eq!(first[0], first[1]);
    assert_eq!(first[1], first[2]);
}

#[test]
fn macro_only_coverage_is_all_macro() {
    let s = scenario(vec![macro_at(0, 250.0, 500.0), macro_at(1, 750.0, 500.0)], 10.0);
    let r = coverage_raster(&s, AssociationPolicy::Dude, 20.0).unwrap();
    assert_eq!(r.pico_fraction, 0.0);
    assert_eq!(r.macro_fraction, 1.0);
}

#[test]
fn equal_cells_give_equal_coverage() {
    let cells = vec![
        cell(0, Layer::Macro, 300.0, 300.0, 30.0, 5.0),
        cell(10, Layer::Pico, 700.0, 600.0, 30.0, 5.0),
        cell(11, Layer::Pico, 200.0, 800.0, 30.0, 5.0),
    ];
    let s = scenario(cells, 10.0);
    let d = coverage_raster(&s, AssociationPolicy::Dude, 10.0).unwrap();
    let c = coverage_raster(&s, AssociationPolicy::Coupled, 10.0).unwrap();
    assert_eq!(d, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coverage_grows_with_pico_eirp(cells in arb_hetnet()) {
        let s = scenario(cells, 10.0);
        let frac = |case: Case| {
            let sc = case.apply(&s).unwrap();
            coverage_raster(&sc, case.policy(), 25.0).unwrap().pico_fraction
        };
        let (lp, hp, du) = (frac(Case::DlLp), frac(Case::DlHp), frac(Case::Dude));
        prop_assert!(lp <= hp && hp <= du, "{lp} {hp} {du}");
    }
}
