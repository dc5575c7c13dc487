//! One function per subcommand. Each returns a JSON summary for stdout.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde_json::{json, Value};

use epf_core::baselines::{run_baseline, BaselineInputs, BaselineKind};
use epf_core::carbon::{carbon_report, from_energy, mean_power_kw};
use epf_core::forecast::{load_ensembles, load_quantiles, quantiles_to_csv, ensembles_to_csv, ForecastDistribution};
use epf_core::ingest::csvio::{format_timestamp, parse_timestamp, series_to_csv};
use epf_core::ingest::{build_splits, load_csv, load_frame_csv, load_zone_frame, save_frame_csv, synthetic_price_series, ClientOptions, PriceClient, Strategy};
use epf_core::nhits::{checkpoint, ensembles, train, NhitsDims, NhitsModel};
use epf_core::pipeline::{destandardize, fit_qra, predict_qra, run_xshot, validation_crps};
use epf_core::qra::QraModel;
use epf_core::report::{fan_chart_svg, summary_table};
use epf_core::scoring::{ScoreSeries, ScoreTable};
use epf_core::stats::{dm_test, forward_select};
use epf_core::synthetic::{constant, generate, SyntheticSpec};
use epf_core::timeseries::{FeatureFrame, FeatureGroup, HourlySeries, Interval, HORIZON};
use epf_core::{Error, Result};

use crate::workspace::Workspace;
use crate::{
    BaselineArgs, CarbonArgs, Command, DmArgs, EnsembleArgs, FeaturizeArgs, FetchArgs, ImportArgs, ReportArgs, ScoreArgs,
    SelectArgs, SynthArgs, TrainArgs, XshotArgs, ZoneArgs,
};

pub fn dispatch(ws: &mut Workspace, cmd: &Command) -> Result<Value> {
    match cmd {
        Command::Synth(a) => synth(ws, a),
        Command::Fetch(a) => fetch(ws, a),
        Command::Featurize(a) => featurize(ws, a),
        Command::Baseline(a) => baseline(ws, a),
        Command::TrainNhits(a) => train_nhits(ws, a),
        Command::Ensemble(a) => ensemble(ws, a),
        Command::QraFit(a) => qra_fit(ws, a),
        Command::Predict(a) => predict(ws, a),
        Command::Score(a) => score(ws, a),
        Command::ImportForecasts(a) => import_forecasts(ws, a),
        Command::DmTest(a) => dm(ws, a),
        Command::SelectFeatures(a) => select_features(ws, a),
        Command::Xshot(a) => xshot(ws, a),
        Command::Report(a) => report(ws, a),
        Command::Carbon(a) => carbon(ws, a),
    }
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    if let Some(t) = parse_timestamp(s) {
        return Ok(t);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
        .ok_or_else(|| domain(format!("cannot parse time `{s}`; use YYYY-MM-DD or RFC 3339")))
}

fn split_interval(ws: &Workspace, split: &str) -> Result<Interval> {
    let s = &ws.config.splits;
    match split {
        "train" => Ok(s.train),
        "validation" => Ok(s.validation),
        "test" => Ok(s.test),
        _ => Err(domain(format!("unknown split `{split}`; use train, validation or test"))),
    }
}

/// Daily origins whose whole horizon lies inside `iv`.
fn daily_origins(iv: Interval) -> Vec<DateTime<Utc>> {
    let step = Duration::hours(24);
    let span = Duration::hours(HORIZON as i64);
    let mut out = Vec::new();
    let mut o = iv.start;
    while o + span <= iv.end {
        out.push(o);
        o += step;
    }
    out
}

fn read_series(ws: &mut Workspace, zone: &str, feature: &str) -> Result<HourlySeries> {
    let path = ws.zone(zone).cache_path(feature);
    let s = load_csv(&path, zone)?;
    ws.record_input(&path)?;
    Ok(s)
}

fn frame_path(zone: &str) -> String {
    format!("frames/{zone}.csv")
}

fn read_frame(ws: &mut Workspace, zone: &str) -> Result<FeatureFrame> {
    let path = ws.path(frame_path(zone));
    if !path.exists() {
        return Err(domain(format!("no feature frame for {zone}; run `featurize --zone {zone}` first")));
    }
    let f = load_frame_csv(&path, zone)?;
    ws.record_input(&path)?;
    Ok(f)
}

fn price_of(frame: &FeatureFrame) -> Result<HourlySeries> {
    HourlySeries::new(frame.zone.clone(), frame.timestamps.clone(), frame.target().to_vec())
}

fn parse_groups(names: &[String]) -> Result<Vec<FeatureGroup>> {
    names.iter().map(|n| FeatureGroup::parse(n)).collect()
}

fn read_forecasts(ws: &mut Workspace, file: &Path, kind: &str) -> Result<Vec<ForecastDistribution>> {
    let path = ws.path(file);
    let out = match kind {
        "ensemble" => load_ensembles(&path)?.into_iter().map(ForecastDistribution::Ensemble).collect(),
        "quantile" => load_quantiles(&path)?.into_iter().map(ForecastDistribution::Quantile).collect(),
        _ => return Err(domain(format!("unknown forecast kind `{kind}`; use ensemble or quantile"))),
    };
    ws.record_input(&path)?;
    Ok(out)
}

/// Scores against the zone's cached price and writes `scores/<name>.{csv,json}`.
fn write_scores(ws: &mut Workspace, zone: &str, name: &str, forecasts: &[ForecastDistribution]) -> Result<Value> {
    let actual = read_series(ws, zone, "price")?;
    let table = ScoreTable::compute(forecasts, &actual)?;
    let summary = table.summary()?;
    ws.write(format!("scores/{name}.csv"), &table.to_csv())?;
    ws.write_json(format!("scores/{name}.json"), &summary)?;
    Ok(serde_json::to_value(summary)?)
}

fn synth(ws: &mut Workspace, a: &SynthArgs) -> Result<Value> {
    if a.days == 0 {
        return Err(domain("--days must be positive"));
    }
    let start = parse_time(&a.start)?;
    let hours = a.days * 24;
    let zone = ws.zone(&a.zone);
    let (price, gas, co2) = match a.constant {
        Some(v) => (
            constant(&a.zone, start, hours, v)?,
            constant(&a.zone, start, hours, 30.0)?,
            constant(&a.zone, start, hours, 80.0)?,
        ),
        None => {
            let mut spec = SyntheticSpec::new(start, hours, ws.config.seed);
            spec.zone = a.zone.clone();
            let m = generate(&spec)?;
            (m.price, m.gas_price, m.co2_price)
        }
    };
    for (name, s) in [("price", &price), ("gas_price", &gas), ("co2_price", &co2)] {
        ws.write(zone.cache_path(name), &series_to_csv(s))?;
    }
    Ok(json!({ "zone": a.zone, "hours": hours }))
}

fn fetch(ws: &mut Workspace, a: &FetchArgs) -> Result<Value> {
    let iv = Interval::new(parse_time(&a.start)?, parse_time(&a.end)?)?;
    let zone = ws.zone(&a.zone);
    let client = PriceClient::new(ClientOptions::default())?;
    let s = client.fetch_prices(&zone, iv)?;
    ws.record_output(&zone.cache_path("price"))?;
    Ok(json!({ "zone": a.zone, "hours": s.len(), "gaps": s.gaps().len() }))
}

fn featurize(ws: &mut Workspace, a: &FeaturizeArgs) -> Result<Value> {
    let groups = match &a.groups {
        Some(g) => parse_groups(g)?,
        None => ws.config.features.groups.clone(),
    };
    let proxies = a.proxies || ws.config.features.proxies;
    let zone = ws.zone(&a.zone);
    let frame = load_zone_frame(&zone, &groups, proxies)?;
    for entry in std::fs::read_dir(&zone.cache_dir).map_err(|e| io_err(&zone.cache_dir, e))? {
        let p = entry.map_err(|e| io_err(&zone.cache_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            ws.record_input(&p)?;
        }
    }
    let path = ws.path(frame_path(&a.zone));
    save_frame_csv(&frame, &path)?;
    ws.record_output(&path)?;
    Ok(json!({ "zone": a.zone, "rows": frame.len(), "columns": frame.names }))
}

fn baseline(ws: &mut Workspace, a: &BaselineArgs) -> Result<Value> {
    let kind = BaselineKind::parse(&a.method)?;
    let iv = split_interval(ws, &a.split)?;
    let price = read_series(ws, &a.zone, "price")?;
    let synthetic = if kind == BaselineKind::BootstrapSynthetic {
        let cached = ws.zone(&a.zone).cache_path("synthetic_price");
        Some(if cached.exists() {
            read_series(ws, &a.zone, "synthetic_price")?
        } else {
            let gas = read_series(ws, &a.zone, "gas_price")?;
            let co2 = read_series(ws, &a.zone, "co2_price")?;
            synthetic_price_series(&gas, &co2)?
        })
    } else {
        None
    };
    let inputs = BaselineInputs {
        price: &price,
        synthetic: synthetic.as_ref(),
        split: ws.config.splits.train.end,
        bootstrap: ws.config.baseline,
    };
    let run = run_baseline(kind, &inputs, &daily_origins(iv), HORIZON)?;
    if run.forecasts.is_empty() {
        return Err(Error::Empty("baseline forecasts"));
    }
    let name = format!("baseline-{}-{}-{}", a.zone, kind.name(), a.split);
    ws.write(format!("forecasts/{name}.csv"), &ensembles_to_csv(&run.forecasts))?;
    let forecasts: Vec<ForecastDistribution> = run.forecasts.into_iter().map(ForecastDistribution::Ensemble).collect();
    let summary = write_scores(ws, &a.zone, &name, &forecasts)?;
    Ok(json!({ "name": name, "omitted": run.omitted.len(), "scores": summary }))
}

fn model_path(zone: &str) -> String {
    format!("models/nhits-{zone}.json")
}

fn train_nhits(ws: &mut Workspace, a: &TrainArgs) -> Result<Value> {
    let frame = read_frame(ws, &a.zone)?;
    let cfg = ws.config.pipeline();
    let standardizer = frame.fit_standardizer(cfg.splits.train)?;
    let z = frame.standardized(&standardizer)?;
    let splits = build_splits(&cfg.splits, Strategy::Full, &z, &[])?;
    let train_ws = splits.target.train.thin(cfg.train_stride).masked(cfg.mask_value);
    let val_ws = splits.target.validation.masked(cfg.mask_value);
    let mut nhits_cfg = cfg.nhits.clone();
    nhits_cfg.seed = cfg.seed;
    if let Some(e) = a.epochs {
        nhits_cfg.n_epochs = e;
    }
    let mut model = NhitsModel::new(nhits_cfg, NhitsDims::for_windows(&train_ws))?;
    model.standardizer = Some(standardizer);
    model.feature_names = z.names.clone();
    let report = train(&mut model, &train_ws, &val_ws)?;
    ws.write(model_path(&a.zone), &checkpoint::to_json(&model)?)?;
    ws.write_json(format!("models/nhits-{}-report.json", a.zone), &report)?;
    Ok(json!({
        "zone": a.zone,
        "parameters": model.n_params(),
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
        "best_val_mae": report.best_epoch.and_then(|e| report.val_mae.get(e)),
    }))
}

fn ensemble_name(zone: &str, split: &str) -> String {
    format!("forecasts/ensemble-{zone}-{split}.csv")
}

fn ensemble(ws: &mut Workspace, a: &EnsembleArgs) -> Result<Value> {
    let frame = read_frame(ws, &a.zone)?;
    let mpath = ws.path(model_path(&a.zone));
    let model = checkpoint::load(&mpath)?;
    ws.record_input(&mpath)?;
    let standardizer = model
        .standardizer
        .clone()
        .ok_or_else(|| domain("checkpoint carries no standardizer"))?;
    let z = frame.standardized(&standardizer)?;
    let cfg = ws.config.pipeline();
    let splits = build_splits(&cfg.splits, Strategy::Full, &z, &[])?;
    let (windows, seed) = match a.split.as_str() {
        "validation" => (splits.target.validation, cfg.seed),
        "test" => (splits.target.test, cfg.seed.wrapping_add(1)),
        s => return Err(domain(format!("ensembles are drawn for validation or test, not `{s}`"))),
    };
    let samples = a.samples.unwrap_or(cfg.qra.samples);
    let draws = destandardize(ensembles(&model, &windows.masked(cfg.mask_value), samples, seed)?, &standardizer);
    ws.write(ensemble_name(&a.zone, &a.split), &ensembles_to_csv(&draws))?;
    Ok(json!({ "zone": a.zone, "split": a.split, "origins": draws.len(), "samples": samples }))
}

fn read_ensembles(ws: &mut Workspace, rel: &str) -> Result<Vec<epf_core::forecast::EnsembleForecast>> {
    let path = ws.path(rel);
    let e = load_ensembles(&path)?;
    ws.record_input(&path)?;
    Ok(e)
}

fn raw_split(ws: &Workspace, frame: &FeatureFrame, split: &str) -> Result<epf_core::timeseries::WindowSet> {
    let s = build_splits(&ws.config.splits, Strategy::Full, frame, &[])?;
    Ok(if split == "validation" { s.target.validation } else { s.target.test })
}

fn qra_path(zone: &str) -> String {
    format!("models/qra-{zone}.json")
}

fn qra_fit(ws: &mut Workspace, a: &ZoneArgs) -> Result<Value> {
    let frame = read_frame(ws, &a.zone)?;
    let ens = read_ensembles(ws, &ensemble_name(&a.zone, "validation"))?;
    let windows = raw_split(ws, &frame, "validation")?;
    let model = fit_qra(&ens, &windows, &ws.config.qra)?;
    ws.write(qra_path(&a.zone), &model.to_json()?)?;
    Ok(json!({ "zone": a.zone, "origins": ens.len() }))
}

fn predict(ws: &mut Workspace, a: &ZoneArgs) -> Result<Value> {
    let frame = read_frame(ws, &a.zone)?;
    let ens = read_ensembles(ws, &ensemble_name(&a.zone, "test"))?;
    let qpath = ws.path(qra_path(&a.zone));
    let model = QraModel::load(&qpath)?;
    ws.record_input(&qpath)?;
    let windows = raw_split(ws, &frame, "test")?;
    let q = predict_qra(&model, &ens, &windows)?;
    ws.write(format!("forecasts/quantiles-{}-test.csv", a.zone), &quantiles_to_csv(&q))?;
    Ok(json!({ "zone": a.zone, "origins": q.len() }))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scores".into())
}

fn score(ws: &mut Workspace, a: &ScoreArgs) -> Result<Value> {
    let forecasts = read_forecasts(ws, &a.forecasts, &a.kind)?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.forecasts));
    let summary = write_scores(ws, &a.zone, &name, &forecasts)?;
    Ok(json!({ "name": name, "scores": summary }))
}

fn import_forecasts(ws: &mut Workspace, a: &ImportArgs) -> Result<Value> {
    let forecasts = read_forecasts(ws, &a.file, &a.kind)?;
    let text = match a.kind.as_str() {
        "ensemble" => ensembles_to_csv(&forecasts.iter().filter_map(as_ensemble).cloned().collect::<Vec<_>>()),
        _ => quantiles_to_csv(&forecasts.iter().filter_map(as_quantile).cloned().collect::<Vec<_>>()),
    };
    ws.write(format!("forecasts/{}.csv", a.name), &text)?;
    let summary = write_scores(ws, &a.zone, &a.name, &forecasts)?;
    Ok(json!({ "name": a.name, "origins": forecasts.len(), "scores": summary }))
}

fn as_ensemble(f: &ForecastDistribution) -> Option<&epf_core::forecast::EnsembleForecast> {
    match f {
        ForecastDistribution::Ensemble(e) => Some(e),
        ForecastDistribution::Quantile(_) => None,
    }
}

fn as_quantile(f: &ForecastDistribution) -> Option<&epf_core::forecast::QuantileForecast> {
    match f {
        ForecastDistribution::Quantile(q) => Some(q),
        ForecastDistribution::Ensemble(_) => None,
    }
}

fn read_score_series(ws: &mut Workspace, file: &Path, metric: &str) -> Result<ScoreSeries> {
    let path = ws.path(file);
    let s = ScoreTable::load(&path)?.series(metric)?;
    ws.record_input(&path)?;
    Ok(s)
}

fn dm(ws: &mut Workspace, a: &DmArgs) -> Result<Value> {
    let alpha = a.alpha.unwrap_or(ws.config.selection.alpha);
    let sa = read_score_series(ws, &a.a, &a.metric)?;
    let sb = read_score_series(ws, &a.b, &a.metric)?;
    let (sa, sb) = sa.align(&sb);
    let result = dm_test(&sa, &sb, alpha)?;
    let out = json!({
        "a": stem(&a.a),
        "b": stem(&a.b),
        "metric": a.metric,
        "alpha": alpha,
        "result": result,
    });
    ws.write_json(format!("stats/dm-{}-vs-{}-{}.json", stem(&a.a), stem(&a.b), a.metric), &out)?;
    Ok(out)
}

fn select_features(ws: &mut Workspace, a: &SelectArgs) -> Result<Value> {
    let candidates: Vec<String> = match &a.candidates {
        Some(c) => {
            parse_groups(c)?;
            c.clone()
        }
        None => ws.config.selection.candidates.iter().map(|g| format!("{g:?}")).collect(),
    };
    let alpha = a.alpha.unwrap_or(ws.config.selection.alpha);
    let zone = ws.zone(&a.zone);
    for entry in std::fs::read_dir(&zone.cache_dir).map_err(|e| io_err(&zone.cache_dir, e))? {
        let p = entry.map_err(|e| io_err(&zone.cache_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            ws.record_input(&p)?;
        }
    }
    let cfg = ws.config.pipeline();
    let proxies = ws.config.features.proxies;
    let runner = |groups: &[String]| -> Result<ScoreSeries> {
        let frame = load_zone_frame(&zone, &parse_groups(groups)?, proxies)?;
        validation_crps(&frame, &cfg)
    };
    let result = forward_select(&runner, &candidates, alpha)?;
    ws.write_json(format!("selection/{}-audit.json", a.zone), &result.audit)?;
    let summary = json!({ "zone": a.zone, "alpha": alpha, "selected": result.selected });
    ws.write_json(format!("selection/{}-result.json", a.zone), &summary)?;
    Ok(summary)
}

fn xshot(ws: &mut Workspace, a: &XshotArgs) -> Result<Value> {
    let strategy = Strategy::parse(&a.strategy)?;
    let target = read_frame(ws, &a.target)?;
    let donors: Vec<FeatureFrame> = a.donors.iter().map(|d| read_frame(ws, d)).collect::<Result<_>>()?;
    let refs: Vec<&FeatureFrame> = donors.iter().collect();
    let out = run_xshot(&target, &refs, strategy, &ws.config.pipeline())?;
    let name = format!("xshot-{}-{}", a.target, a.strategy);
    ws.write(format!("forecasts/{name}.csv"), &quantiles_to_csv(&out.test_quantiles))?;
    let forecasts: Vec<ForecastDistribution> = out.test_quantiles.into_iter().map(ForecastDistribution::Quantile).collect();
    let actual = price_of(&target)?;
    let table = ScoreTable::compute(&forecasts, &actual)?;
    let summary = table.summary()?;
    ws.write(format!("scores/{name}.csv"), &table.to_csv())?;
    ws.write_json(format!("scores/{name}.json"), &summary)?;
    Ok(json!({ "name": name, "epochs_run": out.report.epochs_run, "scores": summary }))
}

fn report(ws: &mut Workspace, a: &ReportArgs) -> Result<Value> {
    if !a.fan_chart && a.summary.is_none() {
        return Err(domain("report needs --fan-chart or --summary"));
    }
    let mut written: Vec<PathBuf> = Vec::new();
    if a.fan_chart {
        let file = a.quantiles.as_ref().ok_or_else(|| domain("--fan-chart needs --quantiles"))?;
        let path = ws.path(file);
        let all = load_quantiles(&path)?;
        ws.record_input(&path)?;
        let q = match &a.origin {
            Some(o) => {
                let t = parse_time(o)?;
                all.iter().find(|q| q.origin == t).ok_or_else(|| domain(format!("origin {o} not in {}", file.display())))?
            }
            None => all.first().ok_or(Error::Empty("quantile forecasts"))?,
        };
        let actual = match &a.zone {
            Some(z) => {
                let s = read_series(ws, z, "price")?;
                (0..q.horizon())
                    .map(|h| s.value_at(q.origin + Duration::hours(h as i64)))
                    .collect::<Option<Vec<f64>>>()
            }
            None => None,
        };
        let origin = format_timestamp(q.origin);
        let title = format!("{} {}", stem(file), origin);
        let svg = fan_chart_svg(q, actual.as_deref(), &title)?;
        let tag = origin.replace([':', '-'], "").replace('Z', "");
        written.push(ws.write(format!("reports/fan-{}-{tag}.svg", stem(file)), &svg)?);
    }
    if let Some(files) = &a.summary {
        let mut rows = Vec::new();
        for f in files {
            let path = ws.path(f);
            let table = ScoreTable::load(&path)?;
            ws.record_input(&path)?;
            rows.push((stem(f), table.summary()?));
        }
        written.push(ws.write("reports/summary.md", &summary_table(&rows))?);
    }
    let files: Vec<String> = written
        .iter()
        .map(|p| p.strip_prefix(&ws.root).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    Ok(json!({ "written": files }))
}

fn carbon(ws: &mut Workspace, a: &CarbonArgs) -> Result<Value> {
    let intensity = a.intensity.unwrap_or(ws.config.carbon.intensity);
    let pue = a.pue.unwrap_or(ws.config.carbon.pue);
    let r = match (a.power_kw, a.energy_kwh, &a.meter_log) {
        (Some(p), None, None) => carbon_report(a.time_hours, p, intensity, pue)?,
        (None, Some(e), None) => from_energy(a.time_hours, e, intensity, pue)?,
        (None, None, Some(log)) => {
            let path = ws.path(log);
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            ws.record_input(&path)?;
            carbon_report(a.time_hours, mean_power_kw(&text)?, intensity, pue)?
        }
        _ => return Err(domain("give exactly one of --power-kw, --energy-kwh or --meter-log")),
    };
    let out = json!({ "intensity": intensity, "pue": pue, "report": r });
    ws.write_json(format!("reports/{}.json", a.name), &out)?;
    Ok(out)
}
