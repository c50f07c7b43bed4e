use std::collections::BTreeMap;

use proptest::prelude::*;
use xspec_core::reflection::{
    band_ratio, fit_linear_factor, material_pairs, ratio_constancy_stats, render,
    synthesize_scene, MaterialMap, SceneParams, SpectralScene, Spectrum, DEFAULT_RATIO_EPS,
};
use xspec_core::Rng;

/// Two wavelength samples: G only sees the first, N only the second, so the
/// analytic N/G ratio of a material is `S(λ2) / S(λ1)` times `ω_N / ω_G`.
fn two_material_scene() -> SpectralScene {
    let (w, h) = (8, 6);
    let ids = (0..w * h).map(|i| u32::from(i % w >= w / 2)).collect();
    let mut refl = BTreeMap::new();
    refl.insert(0, vec![0.2, 0.4]);
    refl.insert(1, vec![0.1, 0.3]);
    let shading = (0..w * h).map(|i| 0.5 + 0.4 * ((i * 7) % 11) as f64 / 11.0).collect();
    SpectralScene::new(
        MaterialMap::new(w, h, ids).unwrap(),
        refl,
        vec![1.0, 1.0],
        [1.0, 1.0, 1.0, 1.0],
        [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]],
        shading,
        1.0,
    )
    .unwrap()
}

#[test]
fn two_materials_with_known_ratios() {
    let scene = two_material_scene();
    let g = render(&scene, Spectrum::G);
    let n = render(&scene, Spectrum::N);
    let stats = ratio_constancy_stats(
        &band_ratio(&n, &g, DEFAULT_RATIO_EPS).unwrap(),
        scene.materials(),
    )
    .unwrap();
    assert_eq!(stats.len(), 2);
    assert!((stats[0].mean.unwrap() - 2.0).abs() < 1e-12);
    assert!((stats[1].mean.unwrap() - 3.0).abs() < 1e-12);
    assert!(stats.iter().all(|s| s.cv.unwrap() < 1e-9));
}

#[test]
fn single_material_render_has_constant_ratio() {
    let mut rng = Rng::new(21, 0);
    let scene = synthesize_scene(
        &SceneParams {
            materials: 1,
            ..SceneParams::default()
        },
        &mut rng,
    )
    .unwrap();
    let g = render(&scene, Spectrum::G);
    let n = render(&scene, Spectrum::N);
    let ratio = band_ratio(&n, &g, DEFAULT_RATIO_EPS).unwrap();
    let values: Vec<f64> = ratio.values().iter().flatten().copied().collect();
    assert_eq!(values.len(), g.len());
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    assert!(sd / mean < 1e-6, "cv {}", sd / mean);
}

#[test]
fn fitted_slope_matches_analytic_ratio() {
    let mut rng = Rng::new(33, 0);
    let scene = synthesize_scene(&SceneParams::default(), &mut rng).unwrap();
    let g = render(&scene, Spectrum::G);
    for num in [Spectrum::N, Spectrum::R, Spectrum::B] {
        let a = render(&scene, num);
        for id in scene.materials().distinct() {
            let pairs = material_pairs(&a, &g, scene.materials(), id, DEFAULT_RATIO_EPS).unwrap();
            let fit = fit_linear_factor(&pairs).unwrap();
            // Oracle: ratio of the two per-material Riemann sums, computed by hand.
            let refl = scene.reflectance(id).unwrap();
            let sum = |s: Spectrum| -> f64 {
                let q = scene.sensitivity(s);
                (0..refl.len())
                    .map(|k| scene.illuminant()[k] * refl[k] * q[k] * scene.wavelength_step())
                    .sum::<f64>()
                    * scene.intensity(s)
            };
            let expected = sum(num) / sum(Spectrum::G);
            let library = scene.analytic_ratio(id, num, Spectrum::G).unwrap();
            assert!(((library - expected) / expected).abs() < 1e-12);
            assert!(
                ((fit.slope - expected) / expected).abs() < 1e-9,
                "material {id} {num}: {} vs {expected}",
                fit.slope
            );
            assert!(fit.residual_rms < 1e-12);
        }
    }
}

#[test]
fn fitted_slope_scales_with_nir_intensity() {
    let mut rng = Rng::new(8, 0);
    let scene = synthesize_scene(
        &SceneParams {
            peak: 0.2,
            ..SceneParams::default()
        },
        &mut rng,
    )
    .unwrap();
    let g = render(&scene, Spectrum::G);
    let slopes = |s: &SpectralScene| -> Vec<f64> {
        let n = render(s, Spectrum::N);
        s.materials()
            .distinct()
            .into_iter()
            .map(|id| {
                let pairs = material_pairs(&n, &g, s.materials(), id, DEFAULT_RATIO_EPS).unwrap();
                fit_linear_factor(&pairs).unwrap().slope
            })
            .collect()
    };
    let base = slopes(&scene);
    let omega = scene.intensity(Spectrum::N);
    // Power-of-two scaling is exact in binary floating point.
    for t in [0.5, 2.0, 4.0] {
        let scaled = slopes(&scene.clone().with_intensity(Spectrum::N, omega * t).unwrap());
        for (k0, k) in base.iter().zip(&scaled) {
            assert_eq!(k0 * t, *k);
        }
    }
    let scaled = slopes(&scene.clone().with_intensity(Spectrum::N, omega * 3.7).unwrap());
    for (k0, k) in base.iter().zip(&scaled) {
        assert!((k0 * 3.7 - k).abs() / k < 1e-12);
    }
}

#[test]
fn varying_incident_ratio_breaks_constancy() {
    let scene = two_material_scene();
    let (w, h) = (scene.width(), scene.height());
    let beta: Vec<f64> = (0..w * h).map(|i| if i < w { 0.5 } else { 1.0 }).collect();
    let shadowed = scene.with_incident_ratio(Spectrum::N, beta).unwrap();
    let ratio = band_ratio(
        &render(&shadowed, Spectrum::N),
        &render(&shadowed, Spectrum::G),
        DEFAULT_RATIO_EPS,
    )
    .unwrap();
    let stats = ratio_constancy_stats(&ratio, shadowed.materials()).unwrap();
    assert!(stats.iter().all(|s| s.cv.unwrap() > 1e-3));
}

proptest! {
    #[test]
    fn fit_recovers_generating_slope(
        k0 in -50.0f64..50.0,
        bs in proptest::collection::vec(0.01f64..10.0, 1..40),
    ) {
        let pairs: Vec<(f64, f64)> = bs.iter().map(|&b| (k0 * b, b)).collect();
        let fit = fit_linear_factor(&pairs).unwrap();
        let rel = if k0 == 0.0 { fit.slope.abs() } else { ((fit.slope - k0) / k0).abs() };
        prop_assert!(rel < 1e-12, "k0={k0} slope={}", fit.slope);
    }

    #[test]
    fn synthesized_scenes_keep_within_material_constancy(seed in 0u64..1000) {
        let mut rng = Rng::new(seed, 0);
        let scene = synthesize_scene(
            &SceneParams { width: 24, height: 32, materials: 3, ..SceneParams::default() },
            &mut rng,
        ).unwrap();
        let ratio = band_ratio(
            &render(&scene, Spectrum::N),
            &render(&scene, Spectrum::G),
            DEFAULT_RATIO_EPS,
        ).unwrap();
        for s in ratio_constancy_stats(&ratio, scene.materials()).unwrap() {
            if let Some(cv) = s.cv {
                prop_assert!(cv < 1e-6);
            }
        }
    }
}
