use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use mi_core::classifiers::MdmModel;
use mi_core::config::PipelineConfig;
use mi_core::evaluation::{
    condition_contrast, loro_cv_features, pseudo_online_replay, train_dlda, train_mdm, trial_period_values, ContrastResult,
    EvalReport, FilterMode, Period,
};
use mi_core::features::{trial_average_spectrogram, write_feature_binary, write_feature_csv, write_spectrogram_csv, Task};
use mi_core::pipeline::{preprocess_session, runs_features};
use mi_core::session::{Recording, Session};
use mi_core::synth::{generate_control_session, generate_session, GroundTruth, SynthConfig};

use crate::output::{OutDir, Provenance};
use crate::{Cli, Command, GlobalArgs, PipelineArg, TaskArg, UsageError};

const STAGE_RAW: &str = "raw";
const STAGE_PREPROCESSED: &str = "preprocessed";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn tasks(arg: Option<TaskArg>) -> Vec<Task> {
    match arg {
        Some(TaskArg::Onset) => vec![Task::Onset],
        Some(TaskArg::Offset) => vec![Task::Offset],
        None => vec![Task::Onset, Task::Offset],
    }
}

fn pipeline_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Loaded {
    dir: PathBuf,
    session: Session,
    preprocessed: bool,
}

impl Loaded {
    fn open(g: &GlobalArgs) -> Result<Self> {
        let dir = g.session.clone().ok_or_else(|| usage("--session is required"))?;
        let session = Session::load(&dir)?;
        let preprocessed = session
            .meta
            .as_ref()
            .and_then(|m| m.get("stage"))
            .and_then(Value::as_str)
            .is_some_and(|s| s == STAGE_PREPROCESSED);
        log::info!("loaded {} runs from {} ({})", session.runs.len(), dir.display(), if preprocessed { "preprocessed" } else { "raw" });
        Ok(Self { dir, session, preprocessed })
    }

    /// Runs ready for spectral analysis.
    fn clean_runs(&self, cfg: &PipelineConfig) -> Result<Vec<Recording>> {
        if self.preprocessed {
            Ok(self.session.runs.clone())
        } else {
            Ok(preprocess_session(&self.session, cfg)?.0)
        }
    }

    fn require_raw(&self, what: &str) -> Result<()> {
        if self.preprocessed {
            return Err(usage(format!("{what} filters causally and needs a raw session, not a preprocessed one")));
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { control } => synth(g, *control),
        Command::Preprocess => preprocess(g),
        Command::Features => features(g),
        Command::Spectrogram { channel, erd } => spectrogram(g, channel.as_deref(), *erd),
        Command::Train => train(g),
        Command::EvalOffline => eval_offline(g),
        Command::EvalPseudoOnline => eval_pseudo_online(g),
        Command::Contrast { channel } => contrast(g, channel.as_deref()),
        Command::Report { input } => report(g, input.as_deref()),
    }
}

fn synth(g: &GlobalArgs, control: bool) -> Result<()> {
    let mut cfg: SynthConfig = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let prov = Provenance::new("synth", &cfg.hash(), cfg.seed, !g.no_timestamp);
    let out = if control { generate_control_session(&cfg)? } else { generate_session(&cfg)? };
    let mut session = out.session;
    session.meta = Some(json!({ "stage": STAGE_RAW, "provenance": prov.to_json() }));
    session.save(&g.out)?;
    let mut truth = out.ground_truth;
    truth.meta = Some(json!({ "provenance": prov.to_json() }));
    truth.save(&g.out)?;
    Ok(())
}

fn preprocess(g: &GlobalArgs) -> Result<()> {
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    if loaded.preprocessed {
        return Err(usage("session is already preprocessed"));
    }
    let prov = Provenance::new("preprocess", &cfg.hash(), cfg.seed, !g.no_timestamp);
    let (runs, eog) = preprocess_session(&loaded.session, &cfg)?;
    let mut clean = Session::new(loaded.session.timeline, runs, None);
    clean.meta = Some(json!({ "stage": STAGE_PREPROCESSED, "provenance": prov.to_json() }));
    clean.save(&g.out)?;
    let out = OutDir::create(&g.out)?;
    if let Some(eog) = eog {
        out.write_json("eog_filter.json", &json!({ "filter": eog }), &prov)?;
    }
    if loaded.dir.join(GroundTruth::FILE_NAME).exists() && loaded.dir != g.out {
        GroundTruth::load(&loaded.dir)?.save(&g.out)?;
    }
    Ok(())
}

fn features(g: &GlobalArgs) -> Result<()> {
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    let runs = loaded.clean_runs(&cfg)?;
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("features", &cfg.hash(), cfg.seed, !g.no_timestamp);
    for task in tasks(g.task) {
        let fm = runs_features(&runs, &loaded.session, task, &cfg)?;
        let name = format!("features_{}", task.name());
        out.write_with(&format!("{name}.csv"), |w| write_feature_csv(w, &fm, prov.pairs()))?;
        write_feature_binary(&out.path(&name), &fm, Some(json!({ "task": task.name(), "provenance": prov.to_json() })))?;
    }
    Ok(())
}

fn spectrogram(g: &GlobalArgs, channel: Option<&str>, erd: bool) -> Result<()> {
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    let channel = channel.unwrap_or(&cfg.evaluation.channel);
    let runs = loaded.clean_runs(&cfg)?;
    let spec = trial_average_spectrogram(&runs, &loaded.session.timeline, &cfg.epochs, channel, &cfg.features, erd)?;
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("spectrogram", &cfg.hash(), cfg.seed, !g.no_timestamp);
    let name = if erd { format!("spectrogram_{channel}_erd.csv") } else { format!("spectrogram_{channel}.csv") };
    out.write_with(&name, |w| write_spectrogram_csv(w, &spec, prov.pairs()))
}

fn train(g: &GlobalArgs) -> Result<()> {
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("train", &cfg.hash(), cfg.seed, !g.no_timestamp);
    match g.pipeline.unwrap_or(PipelineArg::Dlda) {
        PipelineArg::Dlda => {
            let runs = loaded.clean_runs(&cfg)?;
            for task in tasks(g.task) {
                let fm = runs_features(&runs, &loaded.session, task, &cfg)?;
                let (ranking, model) = train_dlda(&fm, &cfg.dlda)?;
                let selected: Vec<_> = ranking.selected.iter().map(|&i| fm.feature_index[i].clone()).collect();
                let body = json!({
                    "task": task.name(),
                    "pipeline": "dlda",
                    "selected_features": selected,
                    "fisher_scores": ranking.scores,
                    "model": model,
                });
                out.write_json(&format!("model_{}_dlda.json", task.name()), &body, &prov)?;
            }
        }
        PipelineArg::Mdm => {
            loaded.require_raw("the MDM pipeline")?;
            for task in tasks(g.task) {
                let model: MdmModel = train_mdm(&loaded.session, task, &cfg, FilterMode::Causal)?;
                let body = json!({ "task": task.name(), "pipeline": "mdm", "model": model });
                out.write_json(&format!("model_{}_mdm.json", task.name()), &body, &prov)?;
            }
        }
    }
    Ok(())
}

fn write_report(out: &OutDir, stem: &str, report: &EvalReport, extra: Value, prov: &Provenance) -> Result<()> {
    let mut body = json!({ "report": report });
    if let (Value::Object(b), Value::Object(e)) = (&mut body, extra) {
        b.extend(e);
    }
    out.write_json(&format!("eval_{stem}.json"), &body, prov)?;
    let table = stem.replacen("offline_", "", 1).replacen("pseudo_online_", "", 1);
    out.write_with(&format!("table_{table}.csv"), |w| report.write_table_csv(w, prov.pairs()))
}

fn eval_offline(g: &GlobalArgs) -> Result<()> {
    if g.pipeline == Some(PipelineArg::Mdm) {
        return Err(usage("eval-offline runs the dlda pipeline; use eval-pseudo-online for mdm"));
    }
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    let runs = loaded.clean_runs(&cfg)?;
    let ids: Vec<u32> = runs.iter().map(|r| r.run_id()).collect();
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("eval-offline", &cfg.hash(), cfg.seed, !g.no_timestamp);
    for task in tasks(g.task) {
        let fm = runs_features(&runs, &loaded.session, task, &cfg)?;
        let report = loro_cv_features(&fm, &ids, task, &cfg.dlda, cfg.evaluation.alpha)?;
        log::info!("{} dlda: test {:.1}% (chance {:.1}%)", task.name(), 100.0 * report.test.mean, 100.0 * report.chance_level);
        let stem = format!("offline_{}_dlda", task.name());
        write_report(&out, &stem, &report, json!({}), &prov)?;
        if let Some(curve) = &report.window_curve {
            out.write_with(&format!("curve_{}_dlda.csv", task.name()), |w| {
                for (k, v) in prov.pairs() {
                    writeln!(w, "# {k}={v}")?;
                }
                writeln!(w, "window_index,mean,std")?;
                for i in 0..curve.window_index.len() {
                    writeln!(w, "{},{:.4},{:.4}", curve.window_index[i], curve.mean[i], curve.std[i])?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn eval_pseudo_online(g: &GlobalArgs) -> Result<()> {
    if g.pipeline == Some(PipelineArg::Dlda) {
        return Err(usage("eval-pseudo-online runs the mdm pipeline"));
    }
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    loaded.require_raw("eval-pseudo-online")?;
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("eval-pseudo-online", &cfg.hash(), cfg.seed, !g.no_timestamp);
    for task in tasks(g.task) {
        let replay = pseudo_online_replay(&loaded.session, task, &cfg, FilterMode::Causal)?;
        let fractions: serde_json::Map<String, Value> = task
            .conditions()
            .iter()
            .map(|c| (c.name().to_string(), json!(replay.class0_fraction(*c))))
            .collect();
        log::info!("{} mdm: test {:.1}%", task.name(), 100.0 * replay.report.test.mean);
        let stem = format!("pseudo_online_{}_mdm", task.name());
        write_report(&out, &stem, &replay.report, json!({ "class0_fraction": fractions }), &prov)?;
        out.write_with(&format!("trace_{}.csv", task.name()), |w| replay.trace.write_csv(w, prov.pairs()))?;
    }
    Ok(())
}

fn contrast(g: &GlobalArgs, channel: Option<&str>) -> Result<()> {
    let cfg = pipeline_config(g)?;
    let loaded = Loaded::open(g)?;
    if !loaded.dir.join(GroundTruth::FILE_NAME).exists() {
        return Err(usage(format!("contrast needs {} in the session directory", GroundTruth::FILE_NAME)));
    }
    let truth = GroundTruth::load(&loaded.dir)?;
    let channel = channel.unwrap_or(&cfg.evaluation.channel);
    let runs = loaded.clean_runs(&cfg)?;
    let timeline = &loaded.session.timeline;
    let out = OutDir::create(&g.out)?;
    let prov = Provenance::new("contrast", &cfg.hash(), cfg.seed, !g.no_timestamp);
    let mut summary = serde_json::Map::new();
    for (name, period) in [("bmi", Period::bmi()), ("return", Period::robot_return(timeline))] {
        let (mut test, mut control, mut freqs) = (Vec::new(), Vec::new(), Vec::new());
        for r in &runs {
            let (f, values) = trial_period_values(r, timeline, &cfg.epochs, period, channel, &cfg.features, true)?;
            freqs = f;
            for (k, v) in values {
                match truth.is_control(r.run_id(), k) {
                    Some(true) => control.push(v),
                    Some(false) => test.push(v),
                    None => log::warn!("run {} trial {k}: not in the ground truth", r.run_id()),
                }
            }
        }
        let res: ContrastResult = condition_contrast(&test, &control, &freqs)?;
        out.write_with(&format!("contrast_{name}.csv"), |w| res.write_csv(w, prov.pairs()))?;
        summary.insert(
            name.to_string(),
            json!({ "significant_hz": res.significant(cfg.evaluation.alpha), "result": res }),
        );
    }
    summary.insert("channel".into(), json!(channel));
    summary.insert("alpha".into(), json!(cfg.evaluation.alpha));
    out.write_json("contrast.json", &Value::Object(summary), &prov)
}

fn report(g: &GlobalArgs, input: Option<&Path>) -> Result<()> {
    let dir = input.unwrap_or(&g.out);
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("eval_") && name.ends_with(".json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no eval_*.json files in {}", dir.display())));
    }
    let mut rows = Vec::new();
    let mut hashes = std::collections::BTreeSet::new();
    for path in &files {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let report: EvalReport = serde_json::from_value(doc["report"].clone())
            .with_context(|| format!("{}: no evaluation report", path.display()))?;
        if let Some(h) = doc["provenance"]["config_hash"].as_str() {
            hashes.insert(h.to_string());
        }
        rows.push((path.file_name().unwrap().to_string_lossy().into_owned(), report));
    }
    let hash = if hashes.len() == 1 { hashes.into_iter().next().unwrap() } else { "mixed".to_string() };
    let seed = g.seed.unwrap_or_default();
    let prov = Provenance::new("report", &hash, seed, !g.no_timestamp);
    let out = OutDir::create(&g.out)?;
    out.write_with("summary.csv", |w| {
        for (k, v) in prov.pairs() {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "file,task,pipeline,n_folds,train_mean,test_mean,test_std,test_min,test_max,chance_level,above_chance")?;
        for (file, r) in &rows {
            writeln!(
                w,
                "{file},{},{},{},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{}",
                r.task.name(),
                r.pipeline.name(),
                r.folds.len(),
                100.0 * r.train.mean,
                100.0 * r.test.mean,
                100.0 * r.test.std,
                100.0 * r.test.min,
                100.0 * r.test.max,
                100.0 * r.chance_level,
                r.test.mean > r.chance_level
            )?;
        }
        Ok(())
    })?;
    let entries: Vec<Value> = rows
        .iter()
        .map(|(file, r)| {
            json!({
                "file": file,
                "task": r.task.name(),
                "pipeline": r.pipeline.name(),
                "train": r.train,
                "test": r.test,
                "chance_level": r.chance_level,
                "above_chance": r.test.mean > r.chance_level,
            })
        })
        .collect();
    out.write_json("summary.json", &json!({ "results": entries }), &prov)
}
