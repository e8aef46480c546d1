//! The `esme` command line: configuration-driven expansion, simulation,
//! estimation and replication studies.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use esme_core::drivers::{derive_seed, stream};
use esme_core::estimator::{empirical_moments, sample_covariance, solve_system, EstimateReport};
use esme_core::experiment::{Experiment, ExperimentConfig, ReplicationRow, ReplicationSummary};
use esme_core::{PicardExpansion, SampledPath, Word};

pub mod selftest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] esme_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use esme_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv { .. } => 2,
            CliError::NoSolution(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Core(e) => match e {
                E::CovarianceNotPositive
                | E::Singular(_)
                | E::TooFewSamples(_)
                | E::InvalidPath(_)
                | E::ShapeMismatch(..)
                | E::DimensionMismatch(_) => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "esme", version, about = "Expected signature matching estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the Picard expansion of every word in V.
    Expand(Common),
    /// Simulate response paths for each replication.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Only this replication (default: all).
        #[arg(long)]
        replication: Option<usize>,
    },
    /// Estimate parameters from one replication's simulated paths.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Use exact theoretical moments at theta_true as targets.
        #[arg(long)]
        exact: bool,
    },
    /// Run all replications and write estimates, normalized estimates and plot data.
    Replicate(Common),
    /// Check the symbolic engine against published closed forms.
    Selftest {
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replaces the config seed before hashing.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Expand(common) => {
            let ws = Workspace::open(&common)?;
            let expansions = ws.expansions()?;
            println!("wrote {} expansions to {}", expansions.len(), ws.out.join("expansions").display());
            Ok(())
        }
        Command::Simulate { common, replication } => {
            let ws = Workspace::open(&common)?;
            ws.simulate(replication)
        }
        Command::Estimate {
            common,
            replication,
            exact,
        } => {
            let ws = Workspace::open(&common)?;
            ws.estimate(replication, exact)
        }
        Command::Replicate(common) => {
            let ws = Workspace::open(&common)?;
            ws.replicate()
        }
        Command::Selftest { jobs } => {
            set_jobs(jobs)?;
            let rows = selftest::run_checks();
            print!("{}", selftest::render(&rows));
            if rows.iter().any(|r| !r.passed && !r.known_discrepancy) {
                Err(CliError::Numeric("self test failed".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn set_jobs(jobs: Option<usize>) -> CliResult<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// An output directory bound to one configuration.
pub struct Workspace {
    experiment: Experiment,
    out: PathBuf,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(esme_core::Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn hash_line(hash: &str) -> String {
    format!("config_hash={hash}")
}

/// Reads the `# config_hash=` line that starts every CSV output.
fn csv_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix("# config_hash=")
}

impl Workspace {
    pub fn open(common: &Common) -> CliResult<Self> {
        set_jobs(common.jobs)?;
        let mut config = ExperimentConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let experiment = Experiment::new(config, base)?;
        let out = common.out.clone();
        create_dir(&out)?;
        let stored = out.join("config.json");
        if stored.exists() {
            let previous = ExperimentConfig::load(&stored)?;
            if previous.hash() != experiment.hash() {
                return Err(CliError::Config(format!(
                    "{} holds outputs of config {}, not {}; use a fresh directory",
                    out.display(),
                    previous.hash(),
                    experiment.hash()
                )));
            }
        } else {
            write_json(&stored, experiment.config())?;
        }
        Ok(Self { experiment, out })
    }

    fn hash(&self) -> &str {
        self.experiment.hash()
    }

    fn expansion_path(&self, word: &Word) -> PathBuf {
        let letters: Vec<String> = word.letters().iter().map(usize::to_string).collect();
        self.out.join("expansions").join(format!("tau_{}.json", letters.join("_")))
    }

    /// Cached expansions, computed and written on first use.
    pub fn expansions(&self) -> CliResult<Vec<PicardExpansion>> {
        let words = self.experiment.words();
        let mut cached = Vec::new();
        for w in words {
            let path = self.expansion_path(w);
            if !path.exists() {
                break;
            }
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let value: Value = serde_json::from_str(&text).map_err(esme_core::Error::from)?;
            if value["config_hash"] != self.hash() {
                return Err(CliError::Config(format!("{} belongs to another config", path.display())));
            }
            cached.push(PicardExpansion::from_json(&value["expansion"])?);
        }
        if cached.len() == words.len() {
            return Ok(cached);
        }
        let expansions = self.experiment.expansions()?;
        create_dir(&self.out.join("expansions"))?;
        for (w, e) in words.iter().zip(&expansions) {
            let doc = json!({
                "config_hash": self.hash(),
                "word": w.to_string(),
                "expansion": e.to_json(),
            });
            write_json(&self.expansion_path(w), &doc)?;
        }
        Ok(expansions)
    }

    fn rep_dir(&self, rep: usize) -> PathBuf {
        self.out.join("paths").join(format!("rep-{rep:04}"))
    }

    pub fn simulate(&self, only: Option<usize>) -> CliResult<()> {
        let config = self.experiment.config();
        let reps: Vec<usize> = match only {
            Some(k) if k >= config.replications => {
                return Err(CliError::Config(format!(
                    "replication {k} out of range (config has {})",
                    config.replications
                )))
            }
            Some(k) => vec![k],
            None => (0..config.replications).collect(),
        };
        let comment = hash_line(self.hash());
        let mut manifest_reps = Vec::new();
        for &rep in &reps {
            let paths = self.experiment.simulate_replication(rep)?;
            let dir = self.rep_dir(rep);
            create_dir(&dir)?;
            paths
                .par_iter()
                .enumerate()
                .map(|(k, p)| p.write_csv(dir.join(format!("path-{k:04}.csv")), Some(&comment)))
                .collect::<esme_core::Result<()>>()?;
            let seed = self.experiment.replication_seed(rep);
            let path_seeds: Vec<u64> = (0..paths.len() as u64)
                .map(|k| derive_seed(seed, &[stream::DRIVER, k]))
                .collect();
            manifest_reps.push(json!({
                "replication": rep,
                "seed": seed,
                "paths": paths.len(),
                "path_seeds": path_seeds,
            }));
        }
        let kind = config.driver_kind();
        let scheme = config.scheme();
        let order = scheme.error_order(&kind);
        let manifest = json!({
            "config_hash": self.hash(),
            "base_seed": config.seed,
            "driver": kind,
            "scheme": scheme,
            "error_order": order,
            "error_bound": config.dt.powf(order),
            "dt": config.dt,
            "T": config.horizon,
            "replications": manifest_reps,
        });
        create_dir(&self.out.join("paths"))?;
        let name = match only {
            Some(k) => format!("manifest-{k:04}.json"),
            None => "manifest.json".into(),
        };
        write_json(&self.out.join("paths").join(name), &manifest)?;
        println!(
            "simulated {} replication(s) of {} paths with the {} scheme (error order dt^{order:.4} = {:.4})",
            reps.len(),
            config.paths,
            scheme.name(),
            config.dt.powf(order)
        );
        Ok(())
    }

    fn read_paths(&self, rep: usize) -> CliResult<Vec<SampledPath>> {
        let dir = self.rep_dir(rep);
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "no dataset at {}; run `esme simulate` first",
                dir.display()
            )));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Config(format!("{} holds no paths", dir.display())));
        }
        files
            .par_iter()
            .map(|f| {
                let text = std::fs::read_to_string(f).map_err(io_err(f))?;
                if csv_hash(&text) != Some(self.hash()) {
                    return Err(CliError::Config(format!("{} was produced by another config", f.display())));
                }
                Ok(SampledPath::from_csv_str(&text, &f.display().to_string())?)
            })
            .collect()
    }

    pub fn estimate(&self, rep: usize, exact: bool) -> CliResult<()> {
        let config = self.experiment.config();
        let expansions = self.expansions()?;
        let driver = self.experiment.driver_expectation(&expansions)?;
        let theta_true = config.theta_true.as_deref();
        let (problem, solutions, sigma) = if exact {
            let theta = theta_true.ok_or_else(|| CliError::Config("--exact needs theta_true".into()))?;
            let targets = self.experiment.theoretical_moments(&expansions, driver.as_ref(), theta)?;
            let problem = self.experiment.system(&expansions, driver.as_ref(), &targets, None)?;
            let solutions = solve_system(&problem, &self.experiment.solve_options())?;
            (problem, solutions, None)
        } else {
            let paths = self.read_paths(rep)?;
            let level = self.experiment.words().iter().map(Word::len).max().unwrap_or(0);
            let moments = empirical_moments(&paths, self.experiment.words(), level)?;
            let problem =
                self.experiment
                    .system(&expansions, driver.as_ref(), &moments.means, Some(paths.len()))?;
            let solutions = solve_system(&problem, &self.experiment.solve_options())?;
            let sigma = sample_covariance(&moments.per_path).ok();
            (problem, solutions, sigma)
        };
        let report = EstimateReport::build(&problem, &solutions, sigma.as_ref(), theta_true)?;
        let representative = self.experiment.representative(&solutions).map(|(t, _)| t);
        let mut doc = json!({
            "config_hash": self.hash(),
            "replication": if exact { Value::Null } else { json!(rep) },
            "targets_source": if exact { "exact" } else { "empirical" },
            "estimate": representative,
        });
        if let (Value::Object(map), Value::Object(fields)) =
            (&mut doc, serde_json::to_value(&report).map_err(esme_core::Error::from)?)
        {
            map.extend(fields);
        }
        write_json(&self.out.join("report.json"), &doc)?;
        if solutions.is_empty() {
            return Err(CliError::NoSolution(format!(
                "no root in the box; report written to {}",
                self.out.join("report.json").display()
            )));
        }
        for s in &solutions {
            println!("root {:?} residual {:.3e}", s.theta, s.residual);
        }
        Ok(())
    }

    pub fn replicate(&self) -> CliResult<()> {
        let expansions = self.expansions()?;
        let driver = self.experiment.driver_expectation(&expansions)?;
        let reps = self.experiment.config().replications;
        let mut rows: Vec<ReplicationRow> = (0..reps)
            .into_par_iter()
            .map(|rep| self.experiment.run_replication(rep, &expansions, driver.as_ref()))
            .collect();
        let summary = self.experiment.summarise(&mut rows, &expansions, driver.as_ref())?;
        self.write_replications(&rows, &summary)?;
        write_json(&self.out.join("summary.json"), &summary)?;
        println!(
            "{} of {} replications succeeded; root counts {:?}",
            summary.succeeded, summary.replications, summary.root_counts
        );
        if let Some(cov) = &summary.normalized_covariance {
            println!("normalized covariance {cov:?}");
        }
        if summary.succeeded == 0 {
            return Err(CliError::NoSolution("every replication failed".into()));
        }
        Ok(())
    }

    fn csv_writer(&self, path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
        use std::io::Write;
        let mut file = std::fs::File::create(path).map_err(io_err(path))?;
        writeln!(file, "# {}", hash_line(self.hash())).map_err(io_err(path))?;
        Ok(csv::Writer::from_writer(file))
    }

    fn write_rows(&self, path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let wrap = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = self.csv_writer(path)?;
        w.write_record(header).map_err(wrap)?;
        for r in rows {
            w.write_record(r).map_err(wrap)?;
        }
        w.flush().map_err(io_err(path))
    }

    fn write_replications(&self, rows: &[ReplicationRow], summary: &ReplicationSummary) -> CliResult<()> {
        let params = &summary.parameters;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let cell = |v: &Option<Vec<f64>>, k: usize| opt(v.as_ref().map(|v| v[k]));

        let mut header: Vec<String> = vec!["replication".into(), "seed".into(), "status".into(), "roots".into()];
        header.extend(params.iter().map(|p| format!("{p}_hat")));
        header.push("residual".into());
        header.extend(params.iter().map(|p| format!("z_{p}")));
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut line = vec![
                    r.replication.to_string(),
                    r.seed.to_string(),
                    r.status.clone(),
                    r.roots.len().to_string(),
                ];
                line.extend((0..params.len()).map(|k| cell(&r.estimate, k)));
                line.push(opt(r.residual));
                line.extend((0..params.len()).map(|k| cell(&r.normalized, k)));
                line
            })
            .collect();
        self.write_rows(&self.out.join("replications.csv"), &header, &table)?;

        let mut header: Vec<String> = vec!["replication".into()];
        header.extend(params.iter().map(|p| format!("z_{p}")));
        let normalized: Vec<(usize, &Vec<f64>)> = rows
            .iter()
            .filter_map(|r| r.normalized.as_ref().map(|z| (r.replication, z)))
            .collect();
        let table: Vec<Vec<String>> = normalized
            .iter()
            .map(|(rep, z)| std::iter::once(rep.to_string()).chain(z.iter().map(|x| format!("{x:?}"))).collect())
            .collect();
        self.write_rows(&self.out.join("normalized.csv"), &header, &table)?;

        let plot = self.out.join("plotdata");
        create_dir(&plot)?;
        let estimates: Vec<&Vec<f64>> = rows.iter().filter_map(|r| r.estimate.as_ref()).collect();
        let zs: Vec<&Vec<f64>> = normalized.iter().map(|(_, z)| *z).collect();
        for (prefix, points) in [("estimates", &estimates), ("normalized", &zs)] {
            for i in 0..params.len() {
                for j in i + 1..params.len() {
                    let table: Vec<Vec<String>> =
                        points.iter().map(|p| vec![format!("{:?}", p[i]), format!("{:?}", p[j])]).collect();
                    let path = plot.join(format!("{prefix}_{}_{}.csv", params[i], params[j]));
                    self.write_rows(&path, &["x".into(), "y".into()], &table)?;
                }
                if params.len() == 1 {
                    let table: Vec<Vec<String>> = points.iter().map(|p| vec![format!("{:?}", p[0])]).collect();
                    self.write_rows(&plot.join(format!("{prefix}_{}.csv", params[0])), &["x".into()], &table)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::NoSolution("x".into()).exit_code(), 3);
        assert_eq!(CliError::Core(esme_core::Error::Singular("D")).exit_code(), 4);
        assert_eq!(CliError::Core(esme_core::Error::InvalidConfig("x".into())).exit_code(), 2);
    }

    #[test]
    fn hash_line_round_trip() {
        let text = format!("# {}\nt,x1\n0.0,1.0\n", hash_line("abc"));
        assert_eq!(csv_hash(&text), Some("abc"));
        assert_eq!(csv_hash("t,x1\n"), None);
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["esme", "estimate", "--config", "c.json", "--out", "o", "--exact"]).unwrap();
        assert!(matches!(cli.command, Command::Estimate { exact: true, replication: 0, .. }));
        assert!(Cli::try_parse_from(["esme", "expand", "--out", "o"]).is_err());
    }
}
