//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use xspec_core::attention::{
    forward_pipeline, mam_attention, pcb_split_gap, FeatureMap, Linear, ModalityTransform,
};
use xspec_core::discrepancy::{run_experiment, synthetic_band_images, EmbeddingSpec, ScalingMode};
use xspec_core::eval::{average_precisions, cmc, mean_ap, RetrievalSet};
use xspec_core::gradcheck::run_loss_checks;
use xspec_core::losses::{
    center_loss, compute_centers, cross_center_loss, descent_smoke, hetero_center_loss,
    triplet_batch_hard, DescentObjective, DescentTrajectory, ModalityBatch,
};
use xspec_core::ltg::{generate, generate_batch, sample_factor, FactorGenerator, LtgConfig, Termination};
use xspec_core::reflection::{
    band_ratio, fit_linear_factor, material_pairs, ratio_constancy_stats, render,
    synthesize_scene, SceneParams, Spectrum, DEFAULT_RATIO_EPS,
};
use xspec_core::{FeatureVec, Image, LabeledFeature, Modality, Rng};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn reflection_constancy() -> Outcome {
    let start = Instant::now();
    let mut worst_cv: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for seed in 0..10 {
        let scene = synthesize_scene(&SceneParams::default(), &mut Rng::new(seed, 0)).map_err(err)?;
        let map = scene.materials();
        check(map.distinct().len() >= 3, || format!("seed {seed}: fewer than 3 materials"))?;
        let nir = render(&scene, Spectrum::N);
        for vis in [Spectrum::R, Spectrum::G, Spectrum::B] {
            let ratio = band_ratio(&nir, &render(&scene, vis), DEFAULT_RATIO_EPS).map_err(err)?;
            let stats = ratio_constancy_stats(&ratio, map).map_err(err)?;
            let mut summary = Vec::new();
            for s in &stats {
                let (mean, cv) = s.mean.zip(s.cv).ok_or_else(|| format!("seed {seed}: material {} fully masked", s.material))?;
                check(cv < 1e-6, || format!("seed {seed} N/{}: material {} cv {cv}", vis.as_str(), s.material))?;
                worst_cv = worst_cv.max(cv);
                summary.push((mean, cv));
            }
            for (i, a) in summary.iter().enumerate() {
                for b in &summary[i + 1..] {
                    let rel_gap = (a.0 - b.0).abs() / (0.5 * (a.0 + b.0));
                    let cv = a.1.max(b.1).max(f64::MIN_POSITIVE);
                    worst_margin = worst_margin.min(rel_gap / cv);
                    check(rel_gap > 10.0 * cv, || format!("seed {seed} N/{}: means too close", vis.as_str()))?;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("10 scenes, max cv {worst_cv:.1e}, min gap/cv {worst_margin:.1e}, {secs:.2} s"))
}

fn linear_fit_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    for seed in 0..10 {
        let scene = synthesize_scene(&SceneParams::default(), &mut Rng::new(seed, 1)).map_err(err)?;
        check(scene.peak_response() < 1.0, || format!("seed {seed}: scene clamps"))?;
        for num in Spectrum::ALL {
            for den in Spectrum::ALL.into_iter().filter(|&d| d != num) {
                let (a, b) = (render(&scene, num), render(&scene, den));
                for id in scene.materials().distinct() {
                    let pairs = material_pairs(&a, &b, scene.materials(), id, DEFAULT_RATIO_EPS).map_err(err)?;
                    let slope = fit_linear_factor(&pairs).map_err(err)?.slope;
                    let want = scene.analytic_ratio(id, num, den).ok_or("missing material")?;
                    worst = worst.max(((slope - want) / want).abs());
                    fits += 1;
                }
            }
        }
    }
    check(worst < 1e-9, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("{fits} fits, max relative error {worst:.1e}"))
}

fn discrepancy_direction() -> Outcome {
    let mut lines = Vec::new();
    for seed in 0..10 {
        let imgs = synthetic_band_images(&mut Rng::new(seed, 0), 100, 3, 24, 12, 6).map_err(err)?;
        let run = |mode| run_experiment(&imgs, mode, 6, &mut Rng::new(seed, 1), &EmbeddingSpec::default());
        let uni = run(ScalingMode::Uniform).map_err(err)?;
        let per = run(ScalingMode::PerPart).map_err(err)?;
        check(uni.mean_only.centroid_distance == 0.0 && uni.mean_only.paired_max == 0.0, || {
            format!("seed {seed}: mean-only uniform discrepancy {:e}", uni.mean_only.paired_max)
        })?;
        check(per.mean_only.centroid_distance > 0.0 && per.mean_only.paired_mean > 0.0, || {
            format!("seed {seed}: mean-only per-part discrepancy is zero")
        })?;
        check(per.full.paired_mean > uni.full.paired_mean, || {
            format!("seed {seed}: full per-part {} <= uniform {}", per.full.paired_mean, uni.full.paired_mean)
        })?;
        lines.push(per.full.paired_mean - uni.full.paired_mean);
    }
    let min = lines.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("10/10 seeds, mean-only uniform exactly 0, min full-embedding margin {min:.3}"))
}

/// Rounding envelope of `H = round(√(S r))`, `W = round(√(S / r))`.
fn geometry_ok(cfg: &LtgConfig, w: usize, h: usize, rw: usize, rh: usize) -> bool {
    let total = (w * h) as f64;
    let (fw, fh) = (rw as f64, rh as f64);
    (fh + 0.5) * (fw + 0.5) >= cfg.s_min * total
        && (fh - 0.5) * (fw - 0.5) <= cfg.s_max * total
        && (fh + 0.5) / (fw - 0.5).max(1e-9) >= cfg.r_min
        && (fh - 0.5) / (fw + 0.5) <= cfg.r_max
}

fn ltg_contract() -> Outcome {
    let start = Instant::now();
    let cfg = LtgConfig::default();
    let (c, h, w) = (3, 32, 16);
    let mut rng = Rng::new(404, 0);
    let bases: Vec<Image> = (0..16)
        .map(|_| Image::from_fn(c, h, w, |_, _, _| rng.unit()).unwrap())
        .collect();
    let runs = 100_000;
    let imgs: Vec<Image> = (0..runs).map(|k| bases[k % bases.len()].clone()).collect();
    let outs = generate_batch(&imgs, &cfg, 2025).map_err(err)?;
    let mut applied = 0usize;
    for (k, (input, o)) in imgs.iter().zip(&outs).enumerate() {
        applied += usize::from(o.trace.applied);
        check(o.image.in_unit_range(), || format!("run {k}: pixel out of [0,1]"))?;
        for ((x, m), y) in input.data().iter().zip(o.memory.data()).zip(o.image.data()) {
            check((x * m - y).abs() <= 1e-12, || format!("run {k}: output differs from input * M"))?;
        }
        for app in &o.trace.applications {
            let r = app.rect;
            check(r.x + r.width <= w && r.y + r.height <= h, || format!("run {k}: rect out of bounds"))?;
            check(geometry_ok(&cfg, w, h, r.width, r.height), || format!("run {k}: rect {}x{} outside bounds", r.width, r.height))?;
        }
        check(o.trace.applications.len() <= cfg.max_iters, || format!("run {k}: exceeded max_iters"))?;
        let reason_ok = match o.trace.termination {
            Termination::ProbabilitySkip => !o.trace.applied && o.trace.applications.is_empty(),
            Termination::Threshold => o.memory.min() <= cfg.t_min,
            Termination::IterationCap => o.trace.applications.len() == cfg.max_iters,
            Termination::RejectionCap => o.memory.min() > cfg.t_min,
        };
        check(reason_ok, || format!("run {k}: termination {:?} inconsistent", o.trace.termination))?;
    }
    let rate = applied as f64 / runs as f64;
    check((rate - 0.5).abs() <= 0.01, || format!("apply rate {rate}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{runs} runs, apply rate {rate:.4}, {secs:.1} s"))
}

fn beta_generator() -> Outcome {
    let mut rng = Rng::new(99, 0);
    let g = FactorGenerator::Beta { a: 0.5, b: 0.5 };
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_factor(&mut rng, &g)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    check((mean - 0.5).abs() <= 0.003, || format!("mean {mean}"))?;
    check((var - 0.125).abs() <= 0.002, || format!("variance {var}"))?;

    // Constant mode, one rectangle: only that rectangle changes, by c / max(patch).
    let mut prng = Rng::new(3, 3);
    let input = Image::from_fn(3, 40, 20, |_, _, _| prng.unit()).map_err(err)?;
    let cfg = LtgConfig {
        p: 1.0,
        max_iters: 1,
        generator: FactorGenerator::Constant { c: 0.3 },
        ..LtgConfig::default()
    };
    for seed in 0..50 {
        let out = generate(&input, &cfg, &mut Rng::new(seed, 0)).map_err(err)?;
        check(out.trace.applications.len() == 1, || format!("seed {seed}: not a single rectangle"))?;
        let r = out.trace.applications[0].rect;
        for ch in 0..3 {
            let mut peak: f64 = 0.0;
            for y in r.y..r.y + r.height {
                for x in r.x..r.x + r.width {
                    peak = peak.max(input.get(ch, x, y));
                }
            }
            let alpha = (1.0 / peak) * 0.3;
            for y in 0..40 {
                for x in 0..20 {
                    let inside = (r.x..r.x + r.width).contains(&x) && (r.y..r.y + r.height).contains(&y);
                    let want = if inside { input.get(ch, x, y) * alpha } else { input.get(ch, x, y) };
                    check(out.image.get(ch, x, y) == want, || format!("seed {seed}: pixel ({ch},{x},{y}) differs"))?;
                }
            }
        }
    }
    Ok(format!("mean {mean:.5}, variance {var:.5}, constant mode exact on 50 runs"))
}

fn gradient_suite() -> Outcome {
    let rep = run_loss_checks(0, 100).map_err(err)?;
    let worst = rep.gradients.iter().map(|g| g.max_relative_error).fold(0.0, f64::max);
    let failed: Vec<String> = rep
        .gradients
        .iter()
        .filter(|g| !g.passed)
        .map(|g| g.loss.clone())
        .chain(rep.invariants.iter().filter(|i| !i.passed).map(|i| i.name.clone()))
        .collect();
    check(rep.passed, || format!("failed: {}", failed.join(", ")))?;
    Ok(format!("{} losses x 100 batches, max relative error {worst:.1e}", rep.gradients.len()))
}

fn hand_values() -> Outcome {
    let square = ModalityBatch::new(
        2,
        vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0],
        vec![0; 4],
        vec![Modality::Vis, Modality::Vis, Modality::Nir, Modality::Nir],
    )
    .map_err(err)?;
    let pair = ModalityBatch::new(2, vec![0.0, 0.0, 2.0, 0.0], vec![0, 0], vec![Modality::Vis, Modality::Nir]).map_err(err)?;
    let line = ModalityBatch::new(
        1,
        vec![0.0, 1.0, 10.0, 11.0],
        vec![0, 0, 1, 1],
        vec![Modality::Vis, Modality::Nir, Modality::Vis, Modality::Nir],
    )
    .map_err(err)?;
    let got = [
        ("cross-center", cross_center_loss(&square).map_err(err)?.value, 10.0),
        ("center", center_loss(&pair).value, 1.0),
        ("hetero-center", hetero_center_loss(&square).map_err(err)?.value, 1.0),
        ("triplet", triplet_batch_hard(&line, 12.0).map_err(err)?.value, 3.5),
    ];
    for (name, v, want) in got {
        check((v - want).abs() <= 1e-12, || format!("{name}: {v} != {want}"))?;
    }
    Ok("10.0 / 1.0 / 1.0 / 3.5".into())
}

fn endpoint_gaps(t: &DescentTrajectory) -> Vec<f64> {
    compute_centers(&t.final_batch)
        .iter()
        .map(|(_, c)| {
            let (v, n) = (c.vis.as_ref().unwrap(), c.nir.as_ref().unwrap());
            v.iter().zip(n.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .collect()
}

fn descent() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..10 {
        let b = ModalityBatch::synthetic(&mut Rng::new(seed, 0), 3, 4, 8, 6.0, 1.0).map_err(err)?;
        let cc = descent_smoke(&b, DescentObjective::CrossCenter, 200, 0.1).map_err(err)?;
        let c = descent_smoke(&b, DescentObjective::Center, 200, 0.1).map_err(err)?;
        check(!cc.diverged && !c.diverged, || format!("seed {seed}: diverged"))?;
        let first = cc.steps[0].cross_center;
        let last = cc.steps.last().unwrap().cross_center;
        worst_ratio = worst_ratio.max(last / first);
        check(last < 0.01 * first, || format!("seed {seed}: L_cc {last} vs initial {first}"))?;
        let scale = b.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = 64.0 * f64::EPSILON * scale;
        for w in cc.steps[10..].windows(2) {
            check(w[1].modality_gap <= w[0].modality_gap + slack, || {
                format!("seed {seed}: gap rose at step {}", w[1].step)
            })?;
        }
        for (a, b) in endpoint_gaps(&cc).iter().zip(endpoint_gaps(&c)) {
            check(*a <= b, || format!("seed {seed}: L_cc endpoint gap {a} > L_c {b}"))?;
        }
    }
    Ok(format!("10 seeds, final/initial L_cc <= {worst_ratio:.1e}, gap monotone after step 10"))
}

fn attention_parts() -> Outcome {
    let mut rng = Rng::new(12, 0);
    let (c, h, w, k, d) = (16, 24, 8, 12, 8);
    let f = FeatureMap::random(&mut rng, c, h, w, 1.0).map_err(err)?;
    let t = ModalityTransform::seeded(5, c, c).map_err(err)?;
    let projs: Vec<Linear> = (0..k).map(|_| Linear::seeded(&mut rng, c, d)).collect::<Result<_, _>>().map_err(err)?;

    for m in [Modality::Vis, Modality::Nir] {
        let a = mam_attention(&f, &t, m).map_err(err)?;
        check(a.values().iter().all(|&v| v > 0.0 && v < 1.0), || "attention outside (0,1)".into())?;
    }
    let parts = pcb_split_gap(&f, k).map_err(err)?;
    let gap = f.global_average();
    for ch in 0..c {
        let avg = parts.iter().map(|p| p[ch]).sum::<f64>() / k as f64;
        check((avg - gap[ch]).abs() <= 1e-12, || format!("part mean differs from GAP on channel {ch}"))?;
    }

    let out = forward_pipeline(&f, &t, Modality::Nir, k, &projs).map_err(err)?;
    check(out.parts.reduced.len() == 12 && out.parts.reduced.iter().all(|v| v.len() == d), || {
        format!("{} part vectors", out.parts.reduced.len())
    })?;
    let lin = t.for_modality(Modality::Nir);
    let att = |x: usize, y: usize| {
        let mut z = 0.0;
        for o in 0..c {
            z += lin.bias()[o] + (0..c).map(|i| lin.weight()[o * c + i] * f.get(i, x, y)).sum::<f64>();
        }
        1.0 / (1.0 + (-z / c as f64).exp())
    };
    let band = h / k;
    let mut worst: f64 = 0.0;
    for part in 0..k {
        let mut pooled = vec![0.0; c];
        for (ch, p) in pooled.iter_mut().enumerate() {
            for y in part * band..(part + 1) * band {
                for x in 0..w {
                    *p += f.get(ch, x, y) * att(x, y);
                }
            }
            *p /= (band * w) as f64;
        }
        for r in 0..d {
            let want = projs[part].bias()[r] + (0..c).map(|i| projs[part].weight()[r * c + i] * pooled[i]).sum::<f64>();
            worst = worst.max((out.parts.reduced[part][r] - want).abs());
        }
    }
    check(worst <= 1e-12, || format!("pipeline differs from manual composition by {worst:e}"))?;
    Ok(format!("12 parts of dim 8, pipeline vs manual {worst:.1e}"))
}

fn lf(v: Vec<f64>, id: u32, m: Modality) -> LabeledFeature {
    LabeledFeature::new(FeatureVec::new(v).unwrap(), id, m)
}

/// Brute-force CMC and mAP: a gallery item's rank is the number of items
/// strictly ahead of it in (distance, index) order.
fn brute_force(q: &[LabeledFeature], g: &[LabeledFeature], max_rank: usize) -> (Vec<f64>, f64) {
    let d = |a: &LabeledFeature, b: &LabeledFeature| {
        a.feature.iter().zip(b.feature.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut curve = vec![0.0; max_rank];
    let mut ap_sum = 0.0;
    for qi in q {
        let ahead = |j: usize| {
            (0..g.len())
                .filter(|&i| d(qi, &g[i]) < d(qi, &g[j]) || (d(qi, &g[i]) == d(qi, &g[j]) && i < j))
                .count()
        };
        let mut hits: Vec<usize> = (0..g.len()).filter(|&j| g[j].identity == qi.identity).map(ahead).collect();
        hits.sort();
        for (k, c) in curve.iter_mut().enumerate() {
            if hits[0] <= k {
                *c += 1.0;
            }
        }
        let ap: f64 = hits.iter().enumerate().map(|(i, &p)| (i + 1) as f64 / (p + 1) as f64).sum();
        ap_sum += ap / hits.len() as f64;
    }
    (curve.iter().map(|c| c / q.len() as f64).collect(), ap_sum / q.len() as f64)
}

fn retrieval_metrics() -> Outcome {
    let mut rng = Rng::new(31, 7);
    for trial in 0..200 {
        let queries = 1 + rng.below(20);
        let gallery = 5 + rng.below(46);
        let ids = 1 + rng.below(5) as u32;
        let grid = trial % 2 == 0;
        let coord = |rng: &mut Rng| if grid { rng.below(3) as f64 } else { rng.normal() };
        let mut g: Vec<LabeledFeature> = Vec::new();
        for i in 0..gallery {
            let id = if (i as u32) < ids { i as u32 } else { rng.below(ids as usize) as u32 };
            g.push(lf((0..3).map(|_| coord(&mut rng)).collect(), id, Modality::Nir));
        }
        let q: Vec<LabeledFeature> = (0..queries)
            .map(|_| {
                let id = rng.below(ids as usize) as u32;
                lf((0..3).map(|_| coord(&mut rng)).collect(), id, Modality::Vis)
            })
            .collect();
        let max_rank = 1 + rng.below(gallery);
        let set = RetrievalSet::new(q.clone(), g.clone()).map_err(err)?;
        let (curve, map) = brute_force(&q, &g, max_rank);
        let got = cmc(&set, max_rank).map_err(err)?;
        check(got.values() == curve.as_slice(), || format!("trial {trial}: CMC differs"))?;
        check(mean_ap(&set) == map, || format!("trial {trial}: mAP differs"))?;
    }

    // Ranked gallery: hit, miss, hit. AP = (1/1 + 2/3) / 2 = 5/6.
    let q = vec![lf(vec![0.0], 0, Modality::Vis)];
    let g = vec![lf(vec![1.0], 0, Modality::Nir), lf(vec![2.0], 1, Modality::Nir), lf(vec![3.0], 0, Modality::Nir)];
    let set = RetrievalSet::new(q, g).map_err(err)?;
    let ap = average_precisions(&set)[0];
    // 5/6 has no exact f64 form; the hand sum is exact up to its own rounding.
    check(ap == (1.0 + 2.0 / 3.0) / 2.0 && (ap - 5.0 / 6.0).abs() <= f64::EPSILON, || format!("hand AP {ap}"))?;
    check(cmc(&set, 1).map_err(err)?.values() == [1.0], || "hand rank-1".into())?;
    Ok("200 random instances exact, hand AP = 5/6".into())
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xspec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(err)?;
    check(out.status.success(), || {
        format!("`xspec {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn cli_reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    run_cli(&["synth", "--out", "scene", "--seed", "5", "--width", "32", "--height", "48"], root)?;
    std::fs::create_dir_all(root.join("ltg-in")).map_err(err)?;
    for s in ["R", "G", "B", "N"] {
        std::fs::copy(root.join(format!("scene/{s}.png")), root.join(format!("ltg-in/{s}.png"))).map_err(err)?;
    }

    // Each entry: subcommand arguments (with `{}` for the run directory) and the files to compare.
    let cases: [(&str, Vec<&str>, Vec<&str>); 6] = [
        ("synth", vec!["synth", "--out", "{}/s", "--seed", "9", "--width", "32", "--height", "48"], vec!["s/scene.json", "s/R.png", "s/N.png", "s/materials.png"]),
        ("ltg", vec!["ltg", "--in", "ltg-in", "--out", "{}/o", "--seed", "3", "--trace", "{}/t.jsonl", "--report", "{}/r.json"], vec!["r.json", "t.jsonl", "o/G.png", "o/N.png"]),
        ("discrepancy", vec!["discrepancy", "--seed", "4", "--images", "40", "--report", "{}/r.json", "--pca", "{}/p.csv"], vec!["r.json", "p.csv"]),
        ("loss-check", vec!["loss-check", "--seed", "2", "--trials", "10", "--report", "{}/r.json"], vec!["r.json"]),
        ("descent", vec!["descent", "--seed", "6", "--steps", "50", "--out", "{}/d.csv", "--report", "{}/r.json"], vec!["d.csv", "r.json"]),
        ("attn", vec!["attn", "--demo", "--seed", "8", "--out", "{}/a.csv", "--report", "{}/r.json"], vec!["a.csv", "r.json"]),
    ];
    for (name, args, files) in &cases {
        for run in ["run1", "run2"] {
            let args: Vec<String> = args.iter().map(|a| a.replace("{}", run)).collect();
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            run_cli(&refs, root)?;
        }
        for f in files {
            let (a, b) = (read(&root.join("run1").join(f))?, read(&root.join("run2").join(f))?);
            check(!a.is_empty() && a == b, || format!("{name}: {f} differs between runs"))?;
        }
    }
    Ok(format!("{} randomized subcommands byte-identical", cases.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "reflection constancy", reflection_constancy),
        (2, "linear-fit recovery", linear_fit_recovery),
        (3, "discrepancy directionality", discrepancy_direction),
        (4, "LTG contract", ltg_contract),
        (5, "beta and constant generators", beta_generator),
        (6, "gradient suite", gradient_suite),
        (7, "hand-computed loss values", hand_values),
        (8, "descent smoke", descent),
        (9, "attention and parts", attention_parts),
        (10, "retrieval metrics", retrieval_metrics),
        (11, "CLI reproducibility", cli_reproducibility),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/11 passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
