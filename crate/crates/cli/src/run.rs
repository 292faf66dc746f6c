//! Executes one configured run and writes its files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use davydov_core::oracle::{convert_ansatz_to_fock, propagate_exact};
use davydov_core::{
    initial_state, propagate, MultiD2State, ObservableRecord, PropagationSummary, TrajectorySink,
};

use crate::config::{Mode, RunConfig, RUN_INFO};

pub const TRAJECTORY: &str = "trajectory.tsv";
pub const BATH: &str = "bath_populations.tsv";
pub const METADATA: &str = "metadata.toml";
pub const CHECKPOINTS: &str = "checkpoints";
pub const ABORTED: &str = ".aborted";

const COLUMNS: [&str; 10] = [
    "t", "tJ", "N_L", "N_R", "Z", "N_tot", "sigz_L", "sigz_R", "norm", "energy",
];

#[derive(Debug)]
pub enum RunError {
    /// Setup failed before any time step: bad input or unwritable output.
    Setup(String),
    /// The trajectory stopped early; partial output was kept.
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Completed,
    Aborted(String),
}

/// Writes samples as they arrive; the first I/O error is kept and reported
/// at the end.
struct FileSink {
    trajectory: BufWriter<File>,
    bath: BufWriter<File>,
    checkpoints: PathBuf,
    error: Option<io::Error>,
}

fn field(out: &mut impl Write, v: f64) -> io::Result<()> {
    write!(out, "\t{v:.16e}")
}

impl FileSink {
    fn create(dir: &Path, bath_modes: usize) -> io::Result<Self> {
        let mut trajectory = BufWriter::new(File::create(dir.join(TRAJECTORY))?);
        writeln!(trajectory, "{}", COLUMNS.join("\t"))?;
        let mut bath = BufWriter::new(File::create(dir.join(BATH))?);
        write!(bath, "t")?;
        for k in 1..=bath_modes {
            write!(bath, "\tN_B{k}")?;
        }
        writeln!(bath)?;
        Ok(Self {
            trajectory,
            bath,
            checkpoints: dir.join(CHECKPOINTS),
            error: None,
        })
    }

    fn write_record(&mut self, r: &ObservableRecord) -> io::Result<()> {
        let t = &mut self.trajectory;
        write!(t, "{:.16e}", r.t)?;
        for v in [
            r.tj,
            r.n_left,
            r.n_right,
            r.imbalance,
            r.total,
            r.sigma_z_left,
            r.sigma_z_right,
            r.norm,
            r.energy,
        ] {
            field(t, v)?;
        }
        writeln!(t)?;
        write!(self.bath, "{:.16e}", r.t)?;
        for &v in &r.bath_populations {
            field(&mut self.bath, v)?;
        }
        writeln!(self.bath)
    }

    fn write_checkpoint(&self, state: &MultiD2State, name: &str) -> io::Result<()> {
        fs::create_dir_all(&self.checkpoints)?;
        fs::write(self.checkpoints.join(name), state.to_record())
    }

    fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.trajectory.flush()?;
        self.bath.flush()
    }
}

impl TrajectorySink for FileSink {
    fn record(&mut self, record: &ObservableRecord) {
        if self.error.is_none() {
            if let Err(e) = self.write_record(record) {
                self.error = Some(e);
            }
        }
    }

    fn checkpoint(&mut self, state: &MultiD2State, sample: usize) {
        if self.error.is_none() {
            if let Err(e) = self.write_checkpoint(state, &format!("sample_{sample:08}.txt")) {
                self.error = Some(e);
            }
        }
    }
}

/// The directory a run writes into.
pub fn run_directory(root: &Path, config: &RunConfig) -> PathBuf {
    match config.subpath() {
        Some(sub) => root.join(sub),
        None => root.to_path_buf(),
    }
}

fn setup<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> RunError + '_ {
    move |e| RunError::Setup(format!("{context}: {e}"))
}

/// Runs `config` into `dir`. `config` must already be validated.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<Status, RunError> {
    let model = config.model().map_err(setup("model"))?;
    let bath_modes = model.bath_modes();
    let mut state = initial_state(
        config.int("M"),
        bath_modes,
        config.float("photons"),
        config.float("noise_scale"),
        config.int("seed") as u64,
    )
    .map_err(setup("initial state"))?;
    let restart = config.text("restart");
    if !restart.is_empty() {
        let text = fs::read_to_string(restart).map_err(setup(restart))?;
        state = MultiD2State::from_record(&text, config.int("M"), bath_modes)
            .map_err(setup(restart))?;
    }
    fs::create_dir_all(dir).map_err(setup("output directory"))?;
    let mut sink = FileSink::create(dir, bath_modes).map_err(setup("output files"))?;
    let started = Instant::now();

    let (status, info) = match config.mode() {
        Mode::Variational => {
            let settings = config.dynamics().map_err(setup("dynamics"))?;
            match propagate(state, &model, config.float("t_max"), &settings, &mut sink) {
                Ok((_, summary)) => (Status::Completed, summary_info(&summary)),
                Err(failure) => {
                    let _ = sink.write_checkpoint(&failure.last_state, "abort.txt");
                    let message = failure.error.to_string();
                    (Status::Aborted(message), summary_info(&failure.summary))
                }
            }
        }
        Mode::Oracle => {
            let spec = config.fock_basis().map_err(setup("oracle basis"))?;
            // The oracle starts from the exact product state, without noise.
            let start = initial_state(1, bath_modes, config.float("photons"), 0.0, 0)
                .map_err(setup("initial state"))?;
            let fock = convert_ansatz_to_fock(&start, &spec).map_err(setup("oracle basis"))?;
            let oracle_dt = config.float("oracle_dt");
            let interval = config.int("sample_every") as f64 * config.float("dt");
            let every = (interval / oracle_dt).round() as usize;
            let result = propagate_exact(fock, &model, config.float("t_max"), oracle_dt, every, |r| {
                sink.record(r)
            });
            let info = vec![("fock_dimension".to_string(), (spec.dimension() as i64).into())];
            match result {
                Ok(_) => (Status::Completed, info),
                Err(e) => (Status::Aborted(e.to_string()), info),
            }
        }
    };
    let wall = started.elapsed().as_secs_f64();
    sink.finish().map_err(setup("writing trajectory"))?;
    write_metadata(dir, config, &status, info, wall).map_err(setup("writing metadata"))?;
    if let Status::Aborted(message) = &status {
        for name in [TRAJECTORY, BATH, METADATA] {
            let from = dir.join(name);
            fs::rename(&from, dir.join(format!("{name}{ABORTED}"))).map_err(setup(name))?;
        }
        return Err(RunError::Aborted(message.clone()));
    }
    Ok(status)
}

fn summary_info(s: &PropagationSummary) -> Vec<(String, toml_edit::Value)> {
    let int = |v: usize| toml_edit::Value::from(v as i64);
    vec![
        ("steps".into(), int(s.steps)),
        ("rejected_steps".into(), int(s.rejected_steps)),
        ("samples".into(), int(s.samples)),
        ("solves".into(), int(s.solves)),
        ("system_dimension".into(), int(s.dimension)),
        ("min_rank".into(), int(s.min_rank)),
        ("mean_rank".into(), s.mean_rank.into()),
        ("max_residual".into(), s.max_residual.into()),
        ("max_condition".into(), s.max_condition.into()),
        ("max_norm_drift".into(), s.max_norm_drift.into()),
        ("min_step".into(), s.min_step.into()),
        ("max_step".into(), s.max_step.into()),
    ]
}

fn write_metadata(
    dir: &Path,
    config: &RunConfig,
    status: &Status,
    info: Vec<(String, toml_edit::Value)>,
    wall: f64,
) -> io::Result<()> {
    let mut doc: toml_edit::DocumentMut = config
        .to_toml()
        .parse()
        .expect("the echo is valid TOML");
    let mut table = toml_edit::Table::new();
    table["oracle"] = toml_edit::value(config.mode() == Mode::Oracle);
    table["seed"] = toml_edit::value(config.int("seed") as i64);
    table["version"] = toml_edit::value(env!("CARGO_PKG_VERSION"));
    let (state, error) = match status {
        Status::Completed => ("completed", String::new()),
        Status::Aborted(m) => ("aborted", m.clone()),
    };
    table["status"] = toml_edit::value(state);
    if !error.is_empty() {
        table["error"] = toml_edit::value(error);
    }
    table["wall_time_s"] = toml_edit::value(wall);
    for (k, v) in info {
        // Infinite or NaN statistics (e.g. no step taken) are omitted.
        if v.as_float().is_some_and(|f| !f.is_finite()) {
            continue;
        }
        table[k.as_str()] = toml_edit::Item::Value(v);
    }
    doc[RUN_INFO] = toml_edit::Item::Table(table);
    fs::write(dir.join(METADATA), doc.to_string())
}
