use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};
use xspec_core::attention::{forward_pipeline, FeatureMap, Linear, ModalityTransform};
use xspec_core::discrepancy::{
    apply_part_scaling, embed, pca2d, run_experiment, synthetic_band_images, EmbeddingSpec,
    PartScaling, ScalingMode,
};
use xspec_core::eval::{cmc, mean_ap, RetrievalSet};
use xspec_core::gradcheck::run_loss_checks;
use xspec_core::io::{load_image, read_features, save_image};
use xspec_core::losses::{descent_smoke, DescentObjective, ModalityBatch};
use xspec_core::ltg::{generate_batch, FactorGenerator, LtgConfig};
use xspec_core::reflection::{
    band_ratio, fit_linear_factor, material_pairs, ratio_constancy_stats, render,
    synthesize_scene, MaterialMap, SceneParams, Spectrum, DEFAULT_RATIO_EPS,
};
use xspec_core::{Image, Modality, Rng};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{csv_text, emit, ensure_dir, file_name, list_pngs, report, write_file};
use crate::{
    AttnArgs, DescentArgs, DiscrepancyArgs, EvalArgs, LossCheckArgs, LtgArgs, RatioMapArgs,
    SynthArgs,
};

/// Parses a string flag, reporting failures as usage errors.
fn parse_flag<T>(key: &str, raw: Option<String>) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.map(|r| {
        r.parse::<T>()
            .map_err(|e| CliError::Usage(format!("bad value `{r}` for --{key}: {e}")))
    })
    .transpose()
}

fn positive(key: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{key} must be at least 1")));
    }
    Ok(v)
}

fn load_all(files: &[PathBuf]) -> Result<Vec<Image>, CliError> {
    files.iter().map(|f| load_image(f).map_err(CliError::from)).collect()
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = s.required_path("out", a.out)?;
    let seed = s.value("seed", a.seed, 0u64)?;
    let d = SceneParams::default();
    let params = SceneParams {
        width: s.value("width", a.width, d.width)?,
        height: s.value("height", a.height, d.height)?,
        materials: s.value("materials", a.materials, d.materials)?,
        wavelengths: s.value("wavelengths", a.wavelengths, d.wavelengths)?,
        peak: s.value("peak", a.peak, d.peak)?,
    };
    let config = s.finish()?;
    if params.materials > 256 {
        return Err(CliError::Usage("--materials must be at most 256 to fit the id PNG".into()));
    }
    let scene = synthesize_scene(&params, &mut Rng::new(seed, 0)).map_err(CliError::usage)?;

    ensure_dir(&out)?;
    let mut files = Vec::new();
    for sp in Spectrum::ALL {
        let name = format!("{}.png", sp.as_str());
        save_image(&render(&scene, sp), out.join(&name))?;
        files.push(name);
    }
    let map = scene.materials();
    let ids = Image::from_fn(1, map.height(), map.width(), |_, x, y| map.get(x, y) as f64 / 255.0)?;
    save_image(&ids, out.join("materials.png"))?;
    files.push("materials.png".into());

    let materials: Vec<Value> = map
        .distinct()
        .into_iter()
        .map(|id| {
            let mut responses = serde_json::Map::new();
            let mut ratios = serde_json::Map::new();
            for num in Spectrum::ALL {
                responses.insert(num.as_str().into(), json!(scene.material_response(id, num)));
                for den in Spectrum::ALL.into_iter().filter(|&d| d != num) {
                    ratios.insert(
                        format!("{}/{}", num.as_str(), den.as_str()),
                        json!(scene.analytic_ratio(id, num, den)),
                    );
                }
            }
            json!({
                "id": id,
                "pixels": map.ids().iter().filter(|&&m| m == id).count(),
                "responses": responses,
                "ratios": ratios,
            })
        })
        .collect();
    let result = json!({
        "files": files,
        "width": scene.width(),
        "height": scene.height(),
        "materials": materials,
        "peak_response": scene.peak_response(),
    });
    write_file(&out.join("scene.json"), report("synth", config, result).as_bytes())
}

fn load_material_map(path: &Path, width: usize, height: usize) -> Result<MaterialMap, CliError> {
    let img = load_image(path)?;
    if img.channels() != 1 || img.width() != width || img.height() != height {
        return Err(CliError::Data(format!(
            "{}: material map must be a {width}x{height} gray PNG",
            path.display()
        )));
    }
    let ids = img.data().iter().map(|v| (v * 255.0).round() as u32).collect();
    Ok(MaterialMap::new(width, height, ids)?)
}

pub fn ratio_map(a: RatioMapArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let num_path = s.required_path("num", a.num)?;
    let den_path = s.required_path("den", a.den)?;
    let materials = s.path("materials", a.materials)?;
    let out = s.required_path("out", a.out)?;
    let report_path = s.path("report", a.report)?;
    let eps = s.value("eps", a.eps, DEFAULT_RATIO_EPS)?;
    let mut config = s.finish()?;
    config.insert("material-map".into(), Value::Bool(materials.is_some()));
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!("--eps must be positive, got {eps}")));
    }

    let num = load_image(&num_path)?;
    let den = load_image(&den_path)?;
    let ratio = band_ratio(&num, &den, eps)?;
    let map = match &materials {
        Some(p) => load_material_map(p, num.width(), num.height())?,
        None => MaterialMap::uniform(num.width(), num.height(), 0)?,
    };

    let mut rows = Vec::with_capacity(ratio.width() * ratio.height());
    for y in 0..ratio.height() {
        for x in 0..ratio.width() {
            let (r, m) = match ratio.get(x, y) {
                Some(v) => (v.to_string(), "1"),
                None => (String::new(), "0"),
            };
            rows.push(vec![x.to_string(), y.to_string(), r, m.to_string()]);
        }
    }
    write_file(&out, csv_text(&["x", "y", "ratio", "mask"], rows).as_bytes())?;

    let stats = ratio_constancy_stats(&ratio, &map)?;
    let per_material: Vec<Value> = stats
        .iter()
        .map(|st| {
            let fit = material_pairs(&num, &den, &map, st.material, eps)
                .and_then(|p| fit_linear_factor(&p))
                .ok();
            json!({
                "material": st.material,
                "count": st.count,
                "mean": st.mean,
                "cv": st.cv,
                "fit": fit.map(|f| json!({"slope": f.slope, "residual_rms": f.residual_rms, "samples": f.samples})),
            })
        })
        .collect();
    let result = json!({
        "width": ratio.width(),
        "height": ratio.height(),
        "valid": ratio.valid_count(),
        "masked": ratio.width() * ratio.height() - ratio.valid_count(),
        "materials": per_material,
    });
    emit(&report("ratio-map", config, result), report_path.as_deref())
}

pub fn ltg(a: LtgArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let input = s.required_path("in", a.input)?;
    let out = s.required_path("out", a.out)?;
    let trace_path = s.path("trace", a.trace)?;
    let report_path = s.path("report", a.report)?;
    let d = LtgConfig::default();
    let cfg = LtgConfig {
        p: s.value("p", a.p, d.p)?,
        s_min: s.value("s-min", a.s_min, d.s_min)?,
        s_max: s.value("s-max", a.s_max, d.s_max)?,
        r_min: s.value("r-min", a.r_min, d.r_min)?,
        r_max: s.value("r-max", a.r_max, d.r_max)?,
        t_min: s.value("t-min", a.t_min, d.t_min)?,
        max_iters: s.value("max-iters", a.max_iters, d.max_iters)?,
        generator: s.display_value("gen", parse_flag::<FactorGenerator>("gen", a.gen)?, d.generator)?,
    };
    let seed = s.value("seed", a.seed, 0u64)?;
    let config = s.finish()?;
    cfg.validate().map_err(CliError::usage)?;

    let files = list_pngs(&input)?;
    let imgs = load_all(&files)?;
    let outputs = generate_batch(&imgs, &cfg, seed)?;

    ensure_dir(&out)?;
    let mut trace_lines = String::new();
    let mut terminations: BTreeMap<String, usize> = BTreeMap::new();
    let mut applied = 0;
    let mut rects = 0;
    for (k, (file, o)) in files.iter().zip(&outputs).enumerate() {
        let name = file_name(file);
        save_image(&o.image, out.join(&name))?;
        let term = serde_json::to_value(o.trace.termination).expect("enum serializes");
        *terminations.entry(term.as_str().unwrap_or_default().to_string()).or_default() += 1;
        applied += usize::from(o.trace.applied);
        rects += o.trace.applications.len();
        let line = json!({"index": k, "file": name, "trace": o.trace});
        trace_lines.push_str(&serde_json::to_string(&line).expect("trace serializes"));
        trace_lines.push('\n');
    }
    if let Some(p) = &trace_path {
        write_file(p, trace_lines.as_bytes())?;
    }
    let result = json!({
        "images": imgs.len(),
        "applied": applied,
        "rectangles": rects,
        "terminations": terminations,
    });
    emit(&report("ltg", config, result), report_path.as_deref())
}

pub fn discrepancy(a: DiscrepancyArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let input = s.path("in", a.input)?;
    let report_path = s.path("report", a.report)?;
    let pca_path = s.path("pca", a.pca)?;
    let mode = s.display_value("mode", parse_flag::<ScalingMode>("mode", a.mode)?, ScalingMode::PerPart)?;
    let parts = positive("parts", s.value("parts", a.parts, 6usize)?)?;
    let bins = s.value("bins", a.bins, 8usize)?;
    let seed = s.value("seed", a.seed, 0u64)?;
    let (count, height, width) = if input.is_none() {
        (
            s.value("images", a.images, 100usize)?,
            s.value("height", a.height, 24usize)?,
            s.value("width", a.width, 12usize)?,
        )
    } else {
        (0, 0, 0)
    };
    let mut config = s.finish()?;
    config.insert("source".into(), json!(if input.is_some() { "directory" } else { "synthetic" }));

    let imgs = match &input {
        Some(dir) => load_all(&list_pngs(dir)?)?,
        None => {
            if count < 2 || width == 0 || height < parts {
                return Err(CliError::Usage(
                    "synthetic run needs --images >= 2, --width >= 1 and --height >= --parts".into(),
                ));
            }
            synthetic_band_images(&mut Rng::new(seed, 0), count, 3, height, width, parts)
                .map_err(CliError::usage)?
        }
    };
    if imgs.iter().any(|i| i.channels() != imgs[0].channels()) {
        return Err(CliError::Data("input images must share a channel count".into()));
    }
    let spec = EmbeddingSpec {
        parts,
        bins,
        normalize: true,
    };
    let rep = run_experiment(&imgs, mode, parts, &mut Rng::new(seed, 1), &spec)?;
    let mut result = serde_json::to_value(&rep).expect("report serializes");

    if let Some(p) = &pca_path {
        let mut feats = Vec::with_capacity(2 * imgs.len());
        for img in &imgs {
            feats.push(embed(img, &spec)?.into_inner());
        }
        for (img, f) in imgs.iter().zip(&rep.factors) {
            let scaled = apply_part_scaling(img, &PartScaling::per_band(f, img.channels())?)?;
            feats.push(embed(&scaled, &spec)?.into_inner());
        }
        let pca = pca2d(&feats)?;
        let n = imgs.len();
        let rows = pca.coords.iter().enumerate().map(|(i, c)| {
            let (set, idx) = if i < n { ("original", i) } else { ("transformed", i - n) };
            vec![set.to_string(), idx.to_string(), c[0].to_string(), c[1].to_string()]
        });
        write_file(p, csv_text(&["set", "index", "pc1", "pc2"], rows).as_bytes())?;
        result["projection"] = json!("pca");
        result["explained_singular_values"] = json!(pca.singular_values);
    }
    emit(&report("discrepancy", config, result), report_path.as_deref())
}

pub fn loss_check(a: LossCheckArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let report_path = s.path("report", a.report)?;
    let seed = s.value("seed", a.seed, 0u64)?;
    let trials = positive("trials", s.value("trials", a.trials, 100usize)?)?;
    let config = s.finish()?;
    let rep = run_loss_checks(seed, trials)?;
    let passed = rep.passed;
    let result = serde_json::to_value(&rep).expect("report serializes");
    emit(&report("loss-check", config, result), report_path.as_deref())?;
    if !passed {
        return Err(CliError::Data("one or more loss checks failed".into()));
    }
    Ok(())
}

pub fn descent(a: DescentArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let out = s.path("out", a.out)?;
    let report_path = s.path("report", a.report)?;
    let objective = s.display_value(
        "objective",
        parse_flag::<DescentObjective>("objective", a.objective)?,
        DescentObjective::CrossCenter,
    )?;
    let steps = s.value("steps", a.steps, 200usize)?;
    let lr = s.value("lr", a.lr, 0.1)?;
    let identities = positive("identities", s.value("identities", a.identities, 3usize)?)?;
    let per_modality = positive("per-modality", s.value("per-modality", a.per_modality, 4usize)?)?;
    let dim = positive("dim", s.value("dim", a.dim, 8usize)?)?;
    let separation = s.value("separation", a.separation, 6.0)?;
    let spread = s.value("spread", a.spread, 1.0)?;
    let seed = s.value("seed", a.seed, 0u64)?;
    let config = s.finish()?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(CliError::Usage(format!("--lr must be positive, got {lr}")));
    }
    if !(separation.is_finite() && spread.is_finite() && spread >= 0.0) {
        return Err(CliError::Usage("--separation and --spread must be finite, spread >= 0".into()));
    }

    let batch = ModalityBatch::synthetic(&mut Rng::new(seed, 0), identities, per_modality, dim, separation, spread)
        .map_err(CliError::usage)?;
    let t = descent_smoke(&batch, objective, steps, lr)?;
    let rows = t.steps.iter().map(|st| {
        vec![
            st.step.to_string(),
            st.objective.to_string(),
            st.cross_center.to_string(),
            st.modality_gap.to_string(),
        ]
    });
    emit(&csv_text(&["step", "objective", "cross_center", "modality_gap"], rows), out.as_deref())?;

    if let Some(p) = &report_path {
        let first = t.steps[0];
        let last = *t.steps.last().expect("step 0 is always recorded");
        let result = json!({
            "steps_run": last.step,
            "diverged": t.diverged,
            "initial": first,
            "final": last,
        });
        write_file(p, report("descent", config, result).as_bytes())?;
    }
    Ok(())
}

pub fn attn(a: AttnArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let demo = s.flag("demo", a.demo)?;
    let out = s.path("out", a.out)?;
    let report_path = s.path("report", a.report)?;
    let channels = positive("channels", s.value("channels", a.channels, 16usize)?)?;
    let height = positive("height", s.value("height", a.height, 24usize)?)?;
    let width = positive("width", s.value("width", a.width, 8usize)?)?;
    let parts = positive("parts", s.value("parts", a.parts, 12usize)?)?;
    let dim = positive("dim", s.value("dim", a.dim, 8usize)?)?;
    let modality = s.display_value("modality", parse_flag::<Modality>("modality", a.modality)?, Modality::Vis)?;
    let seed = s.value("seed", a.seed, 0u64)?;
    let config = s.finish()?;
    if !demo {
        return Err(CliError::Usage("attn runs on a generated feature map; pass --demo".into()));
    }
    if height % parts != 0 {
        return Err(CliError::Usage(format!("--height {height} is not divisible by --parts {parts}")));
    }

    let f = FeatureMap::random(&mut Rng::new(seed, 0), channels, height, width, 1.0)?;
    let t = ModalityTransform::seeded(seed, channels, channels)?;
    let mut prng = Rng::new(seed, 3);
    let projs = (0..parts)
        .map(|_| Linear::seeded(&mut prng, channels, dim))
        .collect::<Result<Vec<_>, _>>()?;
    let o = forward_pipeline(&f, &t, modality, parts, &projs)?;

    let att = &o.attention;
    let mut rows = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            rows.push(vec![x.to_string(), y.to_string(), att.get(x, y).to_string()]);
        }
    }
    emit(&csv_text(&["x", "y", "value"], rows), out.as_deref())?;

    if let Some(p) = &report_path {
        let vals = att.values();
        let result = json!({
            "attention": {
                "min": vals.iter().copied().fold(f64::INFINITY, f64::min),
                "max": vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "mean": vals.iter().sum::<f64>() / vals.len() as f64,
            },
            "parts": o.parts.reduced.len(),
            "part_dim": dim,
            "reduced": o.parts.reduced,
            "global": o.global,
        });
        write_file(p, report("attn", config, result).as_bytes())?;
    }
    Ok(())
}

fn parse_ranks(raw: &str) -> Result<Vec<usize>, String> {
    let mut ranks = raw
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if ranks.contains(&0) {
        return Err("ranks start at 1".into());
    }
    ranks.sort_unstable();
    ranks.dedup();
    Ok(ranks)
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let query = s.required_path("query", a.query)?;
    let gallery = s.required_path("gallery", a.gallery)?;
    let out = s.path("out", a.out)?;
    let ranks_raw = s.value("ranks", a.ranks, "1,10,20".to_string())?;
    let config = s.finish()?;
    let ranks = parse_ranks(&ranks_raw).map_err(|e| CliError::Usage(format!("bad --ranks: {e}")))?;

    let set = RetrievalSet::new(read_features(&query)?, read_features(&gallery)?)?;
    let max_rank = *ranks.last().expect("at least one rank");
    if max_rank > set.gallery().len() {
        return Err(CliError::Data(format!(
            "rank {max_rank} exceeds the gallery size {}",
            set.gallery().len()
        )));
    }
    let curve = cmc(&set, max_rank)?;
    let cmc_values: serde_json::Map<String, Value> = ranks
        .iter()
        .map(|&k| (k.to_string(), json!(curve.rank(k))))
        .collect();
    let result = json!({
        "queries": set.query().len(),
        "gallery": set.gallery().len(),
        "cmc": cmc_values,
        "map": mean_ap(&set),
        "ap_convention": "non-interpolated",
    });
    emit(&report("eval", config, result), out.as_deref())
}
