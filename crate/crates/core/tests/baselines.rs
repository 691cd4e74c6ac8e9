use emvc::baselines::{
    averaged_kernel, best_single_view, concatenate_features, feature_concat, kernel_addition, normalized_spectral,
};
use emvc::data::{synthetic_two_view, MultiViewDataset};
use emvc::graph::{kernel_denominator, similarity_matrix, SigmaMode, ViewMatrix};
use emvc::kmeans::{kmeans, KMeansConfig};
use emvc::metrics::clustering_accuracy;
use emvc::rng::stream_rng;
use nalgebra::DMatrix;
use rand::Rng;

fn informative_and_noise(seed: u64) -> MultiViewDataset {
    let mut rng = stream_rng(seed, 0);
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let good = DMatrix::from_fn(40, 2, |i, _| labels[i] as f64 * 8.0 + rng.random_range(-1.0..1.0));
    let noise = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-5.0..5.0));
    MultiViewDataset::new(
        vec![ViewMatrix::new(noise).unwrap(), ViewMatrix::new(good).unwrap()],
        Some(labels),
        vec!["noise".into(), "good".into()],
    )
    .unwrap()
}

#[test]
fn best_single_view_picks_the_informative_view() {
    let ds = informative_and_noise(2);
    let (r, view) = best_single_view(&ds, 2, &KMeansConfig::default()).unwrap();
    assert_eq!(view, 1);
    assert_eq!(clustering_accuracy(&r.labels, ds.labels.as_ref().unwrap()).unwrap(), 1.0);
}

#[test]
fn single_view_dataset_reduces_each_baseline() {
    let full = synthetic_two_view(20, 9);
    let ds = MultiViewDataset::new(vec![full.views[0].clone()], full.labels.clone(), vec!["v".into()]).unwrap();
    let km = KMeansConfig::default();

    let (_, view) = best_single_view(&ds, 2, &km).unwrap();
    assert_eq!(view, 0);

    let plain = kmeans(ds.views[0].data(), &km).unwrap().labels;
    assert_eq!(feature_concat(&ds, 2, &km).unwrap().labels, plain);

    let v = &ds.views[0];
    let s = similarity_matrix(v, kernel_denominator(v, SigmaMode::default()).unwrap()).unwrap();
    let spectral = normalized_spectral(&s, 2, &km).unwrap();
    assert_eq!(kernel_addition(&ds, 2, &km, SigmaMode::default()).unwrap().labels, spectral);
}

#[test]
fn concatenation_width_is_sum_of_view_widths() {
    let ds = informative_and_noise(1);
    assert_eq!(concatenate_features(&ds).ncols(), 4);
}

#[test]
fn averaged_kernel_is_the_exact_mean() {
    let ds = synthetic_two_view(12, 5);
    let w = averaged_kernel(&ds, SigmaMode::default()).unwrap();
    let s: Vec<DMatrix<f64>> = ds
        .views
        .iter()
        .map(|v| similarity_matrix(v, kernel_denominator(v, SigmaMode::default()).unwrap()).unwrap())
        .collect();
    let mean = (&s[0] + &s[1]) / 2.0;
    assert_eq!(w, mean);
}

#[test]
fn baselines_are_deterministic() {
    let ds = synthetic_two_view(30, 4);
    let km = KMeansConfig { seed: 17, ..Default::default() };
    assert_eq!(
        best_single_view(&ds, 2, &km).unwrap(),
        best_single_view(&ds, 2, &km).unwrap()
    );
    assert_eq!(feature_concat(&ds, 2, &km).unwrap(), feature_concat(&ds, 2, &km).unwrap());
    assert_eq!(
        kernel_addition(&ds, 2, &km, SigmaMode::MedianRaw).unwrap(),
        kernel_addition(&ds, 2, &km, SigmaMode::MedianRaw).unwrap()
    );
}
