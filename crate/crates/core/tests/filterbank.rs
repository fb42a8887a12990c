use sounder_core::filterbank::{
    assemble_bank, channel_response, channel_threeport, channel_twoport, optimize_spacings, passband_from_samples,
    passband_metrics, shunt_tee, synthesize_channel, tap_power, BankLayout, ChannelDesign, FilterError,
    SpacingObjective, SynthesisOptions,
};
use sounder_core::network::{brute_force_smatrix, validate, ConnectionGraph, Property, SMatrix};
use sounder_core::waveguide::{Conductor, WaveguideSpec};
use sounder_core::FrequencyGrid;

const GHZ: f64 = 1e9;

fn g_channel(f0: f64, guide: &WaveguideSpec) -> ChannelDesign {
    synthesize_channel(f0, 2.0 * GHZ, guide, &SynthesisOptions::default()).unwrap()
}

#[test]
fn threeport_matches_direct_solution() {
    let design = g_channel(183.31 * GHZ, &WaveguideSpec::wr5());
    let grid = FrequencyGrid::linspace(175.0 * GHZ, 190.0 * GHZ, 31).unwrap();
    let graph = ConnectionGraph::new(
        vec![shunt_tee(&grid), channel_twoport(&design, &grid).unwrap()],
        vec![((0, 2), (1, 0))],
        vec![(0, 0), (0, 1), (1, 1)],
    )
    .unwrap();
    let direct = brute_force_smatrix(&graph).unwrap();
    let cascaded = channel_threeport(&design, &grid).unwrap();
    for k in 0..grid.len() {
        let diff = (cascaded.at(k) - direct.at(k)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-12, "{diff:e}");
    }
    assert!(validate(&cascaded, Property::Reciprocal, 1e-12).passed);
}

#[test]
fn through_path_follows_loaded_tee() {
    let design = g_channel(183.31 * GHZ, &WaveguideSpec::wr5());
    let grid = FrequencyGrid::new(vec![160.0 * GHZ, 170.0 * GHZ, 196.0 * GHZ, 200.0 * GHZ]).unwrap();
    let three = channel_threeport(&design, &grid).unwrap();
    let two = channel_twoport(&design, &grid).unwrap();
    for k in 0..grid.len() {
        let gamma = two.get(k, 0, 0);
        let expected = 2.0 / 3.0 + (4.0 / 9.0) * gamma / (1.0 + gamma / 3.0);
        assert!((three.get(k, 1, 0) - expected).norm() < 1e-12);
        assert!(three.get(k, 1, 0).norm_sqr() >= 0.3, "{}", three.get(k, 1, 0).norm_sqr());
    }
}

#[test]
fn matched_resonance_delivers_tee_share() {
    let guide = WaveguideSpec::wr5().with_conductor(Conductor::Perfect);
    let design = g_channel(183.31 * GHZ, &guide);
    let peak = design.achieved.unwrap();
    let grid = FrequencyGrid::single(peak.f_peak).unwrap();
    let tap = channel_threeport(&design, &grid).unwrap().get(0, 2, 0);
    let two = channel_twoport(&design, &grid).unwrap();
    let (gamma, t) = (two.get(0, 0, 0), two.get(0, 1, 0));
    let expected = (2.0 / 3.0) * t / (1.0 + gamma / 3.0);
    assert!((tap - expected).norm() < 1e-12);
    // a matched resonance delivers the tee's 4/9; a shunt junction never exceeds 1/2
    assert!((tap.norm_sqr() - 4.0 / 9.0).abs() < 1e-3, "{}", tap.norm_sqr());
    assert!(tap.norm_sqr() <= 0.5);
}

#[test]
fn paper_band_targets_converge() {
    for (guide, f0, hpbw) in
        [(WaveguideSpec::wr5(), 183.31 * GHZ, 2.0 * GHZ), (WaveguideSpec::wr15(), 52.8 * GHZ, 0.5 * GHZ)]
    {
        let design = synthesize_channel(f0, hpbw, &guide, &SynthesisOptions::default()).unwrap();
        let achieved = design.achieved.unwrap();
        assert!(((achieved.f_peak - f0) / f0).abs() <= 1e-4);
        assert!(((achieved.hpbw - hpbw) / hpbw).abs() <= 0.05);
        assert!(design.cavity_length > 0.0 && design.narrow_length > 0.0);
    }
}

#[test]
fn synthesis_is_deterministic() {
    let a = g_channel(177.31 * GHZ, &WaveguideSpec::wr5());
    let b = g_channel(177.31 * GHZ, &WaveguideSpec::wr5());
    assert_eq!(a.cavity_length.to_bits(), b.cavity_length.to_bits());
    assert_eq!(a.narrow_length.to_bits(), b.narrow_length.to_bits());
    assert_eq!(a, b);
}

#[test]
fn impossible_targets_are_reported() {
    let opts = SynthesisOptions::default();
    let guide = WaveguideSpec::wr5();
    let f0 = 183.31 * GHZ;
    assert!(matches!(synthesize_channel(f0, f0, &guide, &opts), Err(FilterError::Unachievable { .. })));
    assert!(matches!(synthesize_channel(f0, 0.0, &guide, &opts), Err(FilterError::Unachievable { .. })));
    // WR-5 cuts off near 115.7 GHz.
    assert!(matches!(synthesize_channel(100.0 * GHZ, 1.0 * GHZ, &guide, &opts), Err(FilterError::Unachievable { .. })));
    // Far narrower than the wall loss allows.
    assert!(matches!(synthesize_channel(f0, 0.01 * GHZ, &guide, &opts), Err(FilterError::Unachievable { .. })));
}

#[test]
fn wall_loss_costs_efficiency() {
    let f0 = 183.31 * GHZ;
    let pec = g_channel(f0, &WaveguideSpec::wr5().with_conductor(Conductor::Perfect));
    let lossy = g_channel(f0, &WaveguideSpec::wr5());
    let narrow = synthesize_channel(f0, 0.5 * GHZ, &WaveguideSpec::wr5(), &SynthesisOptions::default()).unwrap();
    let eff = |d: &ChannelDesign| d.achieved.unwrap().peak_efficiency;
    assert!((eff(&pec) - 1.0).abs() < 1e-3);
    assert!(eff(&lossy) < eff(&pec));
    assert!(eff(&narrow) < eff(&lossy));
}

#[test]
fn longer_coupling_narrows_the_passband() {
    let base = g_channel(183.31 * GHZ, &WaveguideSpec::wr5());
    let mut widths = Vec::new();
    for step in 0..6 {
        let mut d = base.clone();
        d.narrow_length *= 1.0 + 0.05 * step as f64;
        d.achieved = None;
        widths.push(channel_response(&d, 401).unwrap().hpbw);
    }
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

#[test]
fn longer_cavity_lowers_the_center() {
    let base = g_channel(183.31 * GHZ, &WaveguideSpec::wr5());
    let mut peaks = Vec::new();
    for step in 0..6 {
        let mut d = base.clone();
        d.cavity_length *= 1.0 + 0.01 * step as f64;
        d.achieved = None;
        peaks.push(channel_response(&d, 401).unwrap().f_peak);
    }
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
}

#[test]
fn lorentzian_width_is_recovered() {
    let (f0, width) = (100.0, 4.0);
    let freqs: Vec<f64> = (0..2001).map(|i| 80.0 + 0.02 * i as f64).collect();
    let power: Vec<f64> = freqs.iter().map(|f| 0.8 / (1.0 + ((f - f0) / (width / 2.0)).powi(2))).collect();
    let p = passband_from_samples(&freqs, &power).unwrap();
    assert!((p.f_peak - f0).abs() < 1e-9);
    assert!((p.hpbw - width).abs() < 1e-3);
    assert!((p.peak_efficiency - 0.8).abs() < 1e-9);
}

#[test]
fn flat_response_has_no_band_edges() {
    let freqs: Vec<f64> = (0..10).map(f64::from).collect();
    assert!(matches!(passband_from_samples(&freqs, &[1.0; 10]), Err(FilterError::BandEdge { .. })));
}

fn g_bank_channels(guide: &WaveguideSpec) -> Vec<ChannelDesign> {
    [183.31, 180.31, 177.31].iter().map(|f| g_channel(f * GHZ, guide)).collect()
}

#[test]
fn perfect_conductor_bank_is_lossless() {
    let guide = WaveguideSpec::wr5().with_conductor(Conductor::Perfect);
    let channels = g_bank_channels(&guide);
    let grid = FrequencyGrid::linspace(170.0 * GHZ, 190.0 * GHZ, 201).unwrap();
    let outcome =
        optimize_spacings(&channels, &[1.0, 1.5, 2.0], &SpacingObjective::MeanTapPowerAtCenters, &grid).unwrap();
    let bank = assemble_bank(&outcome.layout, &grid).unwrap();
    assert_eq!(bank.n_ports(), 5);
    assert_eq!(bank.port_labels(), &["in", "tap_00", "tap_01", "tap_02", "thru"]);
    assert!(validate(&bank, Property::Lossless, 1e-9).passed);
    assert!(validate(&bank, Property::Reciprocal, 1e-12).passed);
    for (tap, ch) in outcome.layout.channels.iter().enumerate() {
        let p = passband_metrics(&bank, tap).unwrap();
        assert!((p.f_peak - ch.center()).abs() < 1.0 * GHZ, "tap {tap}: {}", p.f_peak);
    }
}

#[test]
fn constant_objective_prefers_shortest_spacing() {
    let guide = WaveguideSpec::wr5();
    let channels = vec![g_channel(183.31 * GHZ, &guide)];
    let grid = FrequencyGrid::single(183.0 * GHZ).unwrap();
    let flat = |_: &SMatrix| 0.25;
    let outcome = optimize_spacings(&channels, &[2.0, 0.5, 1.5], &SpacingObjective::Custom(&flat), &grid).unwrap();
    assert_eq!(outcome.multipliers, vec![0.5]);
    assert!(matches!(
        optimize_spacings(&channels, &[], &SpacingObjective::Custom(&flat), &grid),
        Err(FilterError::EmptyCandidates)
    ));
}

#[test]
fn coordinate_descent_ends_at_a_local_optimum_within_exhaustive_bound() {
    let guide = WaveguideSpec::wr5();
    let channels = vec![g_channel(183.31 * GHZ, &guide), g_channel(180.31 * GHZ, &guide)];
    let candidates = [1.0, 1.25, 1.5, 1.75, 2.0];
    let grid = FrequencyGrid::single(183.0 * GHZ).unwrap();
    let outcome = optimize_spacings(&channels, &candidates, &SpacingObjective::MeanTapPowerAtCenters, &grid).unwrap();

    let centers: Vec<f64> = outcome.layout.channels.iter().map(ChannelDesign::center).collect();
    let eval = FrequencyGrid::new(vec![centers[1], centers[0]]).unwrap();
    let score = |m: [f64; 2]| {
        let layout = BankLayout::new(
            outcome.layout.channels.clone(),
            m.iter().map(|x| x * outcome.wavelength).collect(),
            guide.clone(),
        )
        .unwrap();
        let bank = assemble_bank(&layout, &eval).unwrap();
        0.5 * (bank.get(1, 1, 0).norm_sqr() + bank.get(0, 2, 0).norm_sqr())
    };
    let mut exhaustive = f64::NEG_INFINITY;
    for a in candidates {
        for b in candidates {
            exhaustive = exhaustive.max(score([a, b]));
        }
    }
    let found = [outcome.multipliers[0], outcome.multipliers[1]];
    assert!((score(found) - outcome.objective).abs() < 1e-12);
    assert!(outcome.objective >= outcome.initial_objective);
    assert!(outcome.objective <= exhaustive + 1e-12);
    for link in 0..2 {
        for m in candidates {
            let mut trial = found;
            trial[link] = m;
            assert!(score(trial) <= outcome.objective * (1.0 + 1e-9));
        }
    }
}

#[test]
fn every_tap_peaks_at_its_own_channel() {
    let guide = WaveguideSpec::wr5();
    let channels = g_bank_channels(&guide);
    let grid = FrequencyGrid::linspace(172.0 * GHZ, 188.0 * GHZ, 321).unwrap();
    let layout = BankLayout::new(channels, vec![0.003; 3], guide).unwrap();
    let bank = assemble_bank(&layout, &grid).unwrap();
    for (tap, ch) in layout.channels.iter().enumerate() {
        let power = tap_power(&bank, tap);
        let k = (0..power.len()).fold(0, |b, i| if power[i] > power[b] { i } else { b });
        assert!((grid.points()[k] - ch.center()).abs() < 1.5 * GHZ);
        let tap_at_peak = bank.get(k, 1 + tap, 0).norm_sqr();
        for other in 0..layout.channels.len() {
            if other != tap {
                assert!(bank.get(k, 1 + other, 0).norm_sqr() < tap_at_peak);
            }
        }
    }
}
