use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

use hyperfractal::experiments::generate_map;
use hyperfractal::fitting::{
    density_profile, fit_dataset, fit_df, synthetic_dataset, FitDataset, RelayFitOptions, Segment,
    SyntheticDensities,
};
use hyperfractal::map::MapParams;
use hyperfractal::rng::substream;

fn power_law(d: f64, points: usize) -> Vec<Segment> {
    let mut segments = vec![Segment {
        id: "s0".into(),
        length: 1.0,
        density: 10.0,
    }];
    segments.extend((1..points).map(|i| Segment {
        id: format!("s{i}"),
        length: 1.0,
        density: (i as f64).powf(1.0 - d),
    }));
    segments
}

#[test]
fn exact_profile_recovers_exponent() {
    for d in [2.5, 3.0, 4.33, 6.0] {
        let fit = fit_df(&density_profile(&power_law(d, 50)).unwrap(), 0.5).unwrap();
        assert!((fit.estimate - d).abs() < 1e-10, "{d}: {}", fit.estimate);
        assert!(fit.valid);
    }
}

#[test]
fn ten_percent_noise_stays_within_two_tenths() {
    let d = 4.33;
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = substream(11, 0x40, 0);
    let mut estimates = Vec::with_capacity(500);
    for _ in 0..500 {
        let mut segments = power_law(d, 60);
        for s in segments.iter_mut().skip(1) {
            s.density *= f64::exp(noise.sample(&mut rng));
        }
        estimates.push(fit_df(&density_profile(&segments).unwrap(), 0.5).unwrap().estimate);
    }
    let mean = estimates.iter().sum::<f64>() / 500.0;
    let inside = estimates.iter().filter(|e| (*e - d).abs() <= 0.2).count();
    assert!((mean - d).abs() <= 0.2, "mean {mean}");
    // single fits spread by about 0.09, so 0.2 is a two-sided 95% band
    assert!(inside >= 475, "{inside}/500 within 0.2");
}

#[test]
fn exported_map_round_trips_through_csv() {
    let params = MapParams::from_dimensions(2000, 4.33, 2000.0, 3.0).unwrap();
    let (nodes, relays) = generate_map(&params, 3);
    let data = synthetic_dataset(&params, 6, SyntheticDensities::Observed(&nodes), &relays).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let seg_path = dir.path().join("segments.csv");
    let int_path = dir.path().join("intersections.csv");
    data.write_segments(std::fs::File::create(&seg_path).unwrap()).unwrap();
    data.write_intersections(std::fs::File::create(&int_path).unwrap()).unwrap();
    let back = FitDataset::from_paths(&seg_path, &int_path).unwrap();
    assert_eq!(back, data);
    let opts = RelayFitOptions::default();
    let direct = fit_dataset(&data, 0.5, &opts);
    let loaded = fit_dataset(&back, 0.5, &opts);
    assert_eq!(direct, loaded);
    assert!(direct.d_f.unwrap().estimate.is_finite());
}

/// A city-like file pair: irregular lengths, named streets, relays at the
/// busier crossings.
#[test]
fn external_format_dataset_gives_finite_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let mut seg = String::from("segment_id,length_m,density\n");
    let mut rng = substream(5, 0x41, 0);
    let lognormal = Normal::new(0.0, 1.0).unwrap();
    let mut streets = Vec::new();
    for i in 0..80 {
        let length = 80.0 + 400.0 * (i % 7) as f64 / 7.0 + 13.0 * (i % 3) as f64;
        let density = 0.2 * f64::exp(-0.04 * i as f64 + 0.3 * lognormal.sample(&mut rng));
        let id = format!("{} Street #{i}", ["King William", "Grote", "Pirie", "Currie"][i % 4]);
        seg.push_str(&format!("\"{id}\",{length},{density}\n"));
        streets.push((id, density));
    }
    let mut int = String::from("seg_a,seg_b,has_relay\n");
    for (a, (id_a, da)) in streets.iter().enumerate() {
        for (id_b, db) in streets.iter().skip(a + 1).step_by(3) {
            let relay = da * db > 2e-3 || (a % 11 == 0);
            int.push_str(&format!("\"{id_a}\",\"{id_b}\",{}\n", u8::from(relay)));
        }
    }
    let seg_path = dir.path().join("segments.csv");
    let int_path = dir.path().join("intersections.csv");
    std::fs::write(&seg_path, seg).unwrap();
    std::fs::write(&int_path, int).unwrap();
    let data = FitDataset::from_paths(&seg_path, &int_path).unwrap();
    let report = fit_dataset(&data, 0.5, &RelayFitOptions::default());
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert!(report.d_f.unwrap().estimate.is_finite());
    assert!(report.d_r.unwrap().estimate.is_finite());
}

#[test]
fn bad_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seg_path = dir.path().join("segments.csv");
    let int_path = dir.path().join("intersections.csv");
    std::fs::write(&seg_path, "segment_id,length_m,density\na,10,1\nb,0,2\n").unwrap();
    std::fs::write(&int_path, "seg_a,seg_b,has_relay\na,b,1\n").unwrap();
    assert!(FitDataset::from_paths(&seg_path, &int_path).is_err());
    std::fs::write(&seg_path, "segment_id,length_m,density\na,10,1\nb,5,2\n").unwrap();
    std::fs::write(&int_path, "seg_a,seg_b,has_relay\na,c,1\n").unwrap();
    assert!(FitDataset::from_paths(&seg_path, &int_path).is_err());
    std::fs::write(&int_path, "seg_a,seg_b,has_relay\na,b,yes\n").unwrap();
    assert!(FitDataset::from_paths(&seg_path, &int_path).is_err());
    // headers are required
    std::fs::write(&int_path, "a,b,1\n").unwrap();
    assert!(FitDataset::from_paths(&seg_path, &int_path).is_err());
}

fn segments_strategy() -> impl Strategy<Value = Vec<Segment>> {
    prop::collection::vec((0.5f64..50.0, 0.001f64..10.0), 6..40).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (length, density))| Segment {
                id: format!("s{i}"),
                length,
                density,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn profile_is_non_increasing(segments in segments_strategy()) {
        let profile = density_profile(&segments).unwrap();
        prop_assert!(profile.windows(2).all(|w| w[1].mu <= w[0].mu && w[1].xi >= w[0].xi));
        prop_assert_eq!(profile[0].xi, 0.0);
    }

    #[test]
    fn density_scale_leaves_the_fit_unchanged(segments in segments_strategy(), c in 0.01f64..100.0) {
        let scaled: Vec<Segment> = segments
            .iter()
            .map(|s| Segment { density: s.density * c, ..s.clone() })
            .collect();
        let a = fit_df(&density_profile(&segments).unwrap(), 0.5);
        let b = fit_df(&density_profile(&scaled).unwrap(), 0.5);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.estimate - b.estimate).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
        }
    }
}
