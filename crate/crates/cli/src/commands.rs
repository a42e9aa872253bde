use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cropshift::eval::{oracle_cv, run_transfer_experiment, shannon_entropy, ExperimentResult, MetricsReport, OracleReport};
use cropshift::features::{featurize_all, BandManifest, GCVI_BAND};
use cropshift::io::{self as cio, FeatureTable};
use cropshift::shift::{estimate_class_means, estimate_regional_shift};
use cropshift::{ClassList, ClassPriors, ClassifierConfig, Dataset, ExperimentConfig, Method, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::config::{ClassifierKind, RunConfig, RunConfigFile, SCHEMA_VERSION};
use crate::{AreasArgs, ClassifierArgs, CliError, EntropyArgs, ExperimentArgs, FeaturesArgs, SynthArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Tags parse failures with the file they came from.
fn in_file(path: &Path) -> impl Fn(cropshift::Error) -> CliError + '_ {
    move |e| match e {
        cropshift::Error::Parse { .. } => CliError::Input(format!("{}: {e}", path.display())),
        e => CliError::Core(e),
    }
}

pub fn features(args: FeaturesArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(p) => cio::read_manifest(
            &fs::read_to_string(p).map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => BandManifest::new(args.bands.iter().map(|b| b.trim())),
    };
    if manifest.bands().is_empty() {
        return Err(CliError::Config("band manifest is empty".into()));
    }
    let wants_gcvi = manifest.bands().iter().any(|b| b == GCVI_BAND);
    let gcvi = match args.gcvi.as_deref() {
        Some([nir, green]) => Some((nir.as_str(), green.as_str())),
        Some(_) => return Err(CliError::Config("--gcvi takes two band names: NIR,GREEN".into())),
        None => None,
    };
    if wants_gcvi && gcvi.is_none() {
        return Err(CliError::Config("the manifest names GCVI; pass --gcvi NIR,GREEN".into()));
    }

    let raw = fs::read(&args.input).map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?;
    let series = if raw.iter().all(u8::is_ascii_whitespace) {
        eprintln!("warning: {} is empty; writing an empty feature table", args.input.display());
        Vec::new()
    } else {
        cio::read_timeseries_csv(raw.as_slice(), args.anchor).map_err(in_file(&args.input))?
    };
    let (kept, dropped) = featurize_all(&series, &manifest, gcvi);

    cio::write_features_csv(create(&args.out)?, &kept, &manifest)?;
    cio::write_manifest(create(&args.out.with_extension("bands"))?, &manifest)?;
    cio::write_drop_report(create(&args.out.with_extension("dropped.csv"))?, &dropped)?;
    eprintln!("{} pixels featurized, {} dropped", kept.len(), dropped.len());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    schema_version: u32,
    #[serde(flatten)]
    spec: SyntheticSpec,
}

fn load_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: SpecFile = toml::from_str(&text)
        .map_err(|e| CliError::Core(cropshift::Error::InvalidSpec(format!("{}: {e}", path.display()))))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Core(cropshift::Error::InvalidSpec(format!(
            "unsupported schema_version {}",
            file.schema_version
        ))));
    }
    Ok(file.spec)
}

fn spec_toml(spec: &SyntheticSpec) -> String {
    toml::to_string(&SpecFile { schema_version: SCHEMA_VERSION, spec: spec.clone() }).expect("spec serializes")
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => load_spec(p)?,
        None => SyntheticSpec::acceptance_world(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    if args.dump_spec {
        print!("{}", spec_toml(&spec));
        return Ok(());
    }
    let out = args.out.expect("clap requires --out");
    let data = spec.generate()?;
    for (region, d) in &data {
        cio::write_dataset_csv(create(&out.join(format!("{region}.csv")))?, d)?;
    }
    cio::write_priors_csv(create(&out.join("priors.csv"))?, spec.all_priors()?.values())?;
    create(&out.join("spec.toml"))?
        .write_all(spec_toml(&spec).as_bytes())
        .map_err(cropshift::Error::from)?;
    Ok(())
}

fn read_tables(paths: &[PathBuf]) -> Result<FeatureTable> {
    let mut all = FeatureTable::default();
    for p in paths {
        let t = cio::read_features_csv(open(p)?).map_err(in_file(p))?;
        all.append(t).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    Ok(all)
}

/// Every class named by a label or a prior, sorted.
fn class_list(table: &FeatureTable, priors: Option<&BTreeMap<String, ClassPriors>>) -> Result<ClassList> {
    let mut names: BTreeSet<String> = table.label_names();
    for p in priors.into_iter().flat_map(|m| m.values()) {
        names.extend(p.classes().iter().cloned());
    }
    ClassList::new(names).map_err(CliError::Core)
}

/// Spreads priors over the full class list, with zero for unlisted classes.
fn complete_priors(priors: &ClassPriors, cl: &ClassList) -> Result<ClassPriors> {
    let entries: Vec<(String, f64)> = cl.names().iter().map(|c| (c.clone(), priors.get(c).unwrap_or(0.0))).collect();
    Ok(ClassPriors::new(priors.region_id(), entries)?)
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    method: Method,
    seed: u64,
    train_region: &'a str,
    config: &'a RunConfigFile,
    regions: BTreeMap<&'a str, &'a MetricsReport>,
    aggregate: &'a MetricsReport,
}

#[derive(Serialize)]
struct OracleDocument<'a> {
    seed: u64,
    train_region: &'a str,
    transfer_bound: f64,
    #[serde(flatten)]
    report: &'a OracleReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Input(e.to_string()))?;
    w.write_all(b"\n").map_err(cropshift::Error::from)?;
    w.flush().map_err(cropshift::Error::from)?;
    Ok(())
}

fn write_result(dir: &Path, result: &ExperimentResult, echo: &RunConfigFile, regions: &BTreeMap<String, Dataset>, priors: &BTreeMap<String, ClassPriors>) -> Result<()> {
    for (region, outcome) in &result.regions {
        cio::write_confusion_csv(create(&dir.join(format!("confusion_{region}.csv")))?, &outcome.confusion)?;
    }
    cio::write_confusion_csv(create(&dir.join("confusion_aggregate.csv"))?, &result.aggregate)?;
    write_json(
        &dir.join("metrics.json"),
        &MetricsDocument {
            method: result.method,
            seed: result.seed,
            train_region: &result.train_region,
            config: echo,
            regions: result.regions.iter().map(|(r, o)| (r.as_str(), &o.metrics)).collect(),
            aggregate: &result.aggregate_metrics,
        },
    )?;
    if matches!(result.method, Method::Fsa | Method::Fpsa) {
        let means = estimate_class_means(&regions[&result.train_region])?;
        let shifts = result
            .regions
            .keys()
            .map(|r| estimate_regional_shift(&regions[r].feature_mean(), &priors[r], &means))
            .collect::<cropshift::Result<Vec<_>>>()?;
        cio::write_shift_csv(create(&dir.join("shifts.csv"))?, &shifts)?;
    }
    Ok(())
}

impl ClassifierArgs {
    fn into_file(self) -> RunConfigFile {
        RunConfigFile {
            classifier: self.classifier,
            ridge: self.ridge,
            n_trees: self.n_trees,
            features_per_split: self.features_per_split,
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
            seed: self.seed,
            ..Default::default()
        }
    }
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let flags = RunConfigFile {
        method: args.method,
        features: Some(args.features),
        priors: args.priors,
        train_region: args.train_region,
        smote_k: args.smote_k,
        oracle_folds: args.oracle_folds,
        out_dir: args.out,
        ..args.classifier.into_file()
    };
    let file = match &args.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    let cfg: RunConfig = file.overlay(flags).resolve()?;
    let echo = cfg.echo();

    let table = read_tables(&cfg.features)?;
    let priors = match &cfg.priors {
        Some(p) => Some(cio::read_priors_csv(open(p)?).map_err(in_file(p))?),
        None => None,
    };
    let cl = class_list(&table, priors.as_ref())?;
    let priors: BTreeMap<String, ClassPriors> = priors
        .unwrap_or_default()
        .iter()
        .map(|(r, p)| Ok((r.clone(), complete_priors(p, &cl)?)))
        .collect::<Result<_>>()?;
    let all = table.into_dataset(&cl)?;
    let regions = all.split_by_region()?;
    if !regions.contains_key(&cfg.train_region) {
        return Err(CliError::Core(cropshift::Error::UnknownRegion(cfg.train_region.clone())));
    }

    let config = ExperimentConfig { classifier: cfg.classifier.clone(), smote_k: cfg.smote_k };
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    create(&cfg.out_dir.join("config.toml"))?
        .write_all(toml::to_string(&echo).expect("config serializes").as_bytes())
        .map_err(cropshift::Error::from)?;

    let mut stdout = io::stdout().lock();
    for method in cfg.method.methods() {
        let result = run_transfer_experiment(&regions, &cfg.train_region, method, &priors, &config, cfg.seed)?;
        write_result(&cfg.out_dir.join(method.as_str()), &result, &echo, &regions, &priors)?;
        writeln!(stdout, "{method}\t{}", cio::fmt_f64(result.aggregate_metrics.overall_accuracy))
            .map_err(cropshift::Error::from)?;
    }
    if let Some(folds) = cfg.oracle_folds {
        let report = oracle_cv(&all, folds, &cfg.classifier, cfg.seed)?;
        let bound = report.transfer_bound(&cfg.train_region)?;
        write_json(
            &cfg.out_dir.join("oracle.json"),
            &OracleDocument { seed: cfg.seed, train_region: &cfg.train_region, transfer_bound: bound, report: &report },
        )?;
        writeln!(stdout, "oracle\t{}", cio::fmt_f64(bound)).map_err(cropshift::Error::from)?;
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut file = args.classifier.into_file();
    let kind = file.classifier.unwrap_or(ClassifierKind::Lda);
    if kind == ClassifierKind::Rf && file.seed.is_none() {
        return Err(CliError::Config("a seed is required for random forests".into()));
    }
    let seed = file.seed.take().unwrap_or(0);
    let classifier = RunConfigFile {
        method: Some("uat".into()),
        features: Some(args.features.clone()),
        train_region: Some(args.region.clone()),
        out_dir: Some(args.out.clone()),
        seed: Some(seed),
        ..file
    }
    .resolve()?
    .classifier
    .with_seed(seed);

    let table = read_tables(&args.features)?;
    let cl = class_list(&table, None)?;
    let mut regions = table.into_dataset(&cl)?.split_by_region()?;
    let data = regions
        .remove(&args.region)
        .ok_or_else(|| CliError::Core(cropshift::Error::UnknownRegion(args.region.clone())))?;
    if let Some(k) = data.class_counts().iter().position(|&c| c == 0) {
        return Err(CliError::Core(cropshift::Error::TrainRegionMissingClass {
            region: args.region.clone(),
            class: cl.name(k).to_string(),
        }));
    }
    let model = fit(&classifier, &data)?;
    let mut w = create(&args.out)?;
    w.write_all(model.as_bytes()).map_err(cropshift::Error::from)?;
    w.write_all(b"\n").map_err(cropshift::Error::from)?;
    Ok(())
}

fn fit(classifier: &ClassifierConfig, data: &Dataset) -> Result<String> {
    Ok(classifier.fit(data)?.to_json()?)
}

pub fn entropy(args: EntropyArgs) -> Result<()> {
    let priors = cio::read_priors_csv(open(&args.priors)?).map_err(in_file(&args.priors))?;
    let mut w = output(args.out.as_deref())?;
    let mut body = String::from("region_id,entropy_nats\n");
    for (region, p) in &priors {
        body += &format!("{region},{}\n", cio::fmt_f64(shannon_entropy(p)));
    }
    w.write_all(body.as_bytes()).map_err(cropshift::Error::from)?;
    w.flush().map_err(cropshift::Error::from)?;
    Ok(())
}

pub fn priors_from_areas(args: AreasArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?;
    let header = text.lines().next().unwrap_or("");
    if !header.split(',').any(|c| c.trim() == "mean_field_area") {
        return Err(CliError::Input(format!(
            "{}: expected columns region_id,class,area,mean_field_area",
            args.input.display()
        )));
    }
    let priors = cio::read_priors_csv(text.as_bytes()).map_err(in_file(&args.input))?;
    cio::write_priors_csv(output(args.out.as_deref())?, priors.values())?;
    Ok(())
}
