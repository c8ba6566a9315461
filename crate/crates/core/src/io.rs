//! Configuration files, time-series CSVs and binary field containers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{choose_delta, sample_coefficients, DeltaChoice, Grid, LayerConfig};
use crate::error::{Error, Result};
use crate::evolve::{Model, Problem, Row, RunConfig, Scheme, SeriesMeta, SimState, TimeSeries};
use crate::fourier::Fourier;
use crate::ledger::{Provenance, Tagged};
use crate::pressure::{pressure_constant_estimate, PressureSolver};
use crate::sampler::EnsembleSpec;

/// Column header of every time-series CSV.
pub const CSV_HEADER: &str = "t,l2,lr,grad,hs,nu_inst,nu_avg,divmax,dt";

/// Version written into snapshot and checkpoint headers.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "H")]
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersSection {
    pub interfaces: Vec<f64>,
    #[serde(rename = "K")]
    pub permeability: Vec<f64>,
    #[serde(rename = "D")]
    pub diffusivity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub c_top: f64,
    pub c_bottom: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseSection {
    /// Transition half-width; absent or zero selects the sharp model.
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    #[serde(default)]
    pub delta: Option<f64>,
    /// Derive the strip width from the layer data.
    #[serde(default)]
    pub auto: bool,
    /// Pressure constant used by the automatic choice; estimated when absent.
    #[serde(default)]
    pub cp: Option<f64>,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        Self {
            delta: None,
            auto: true,
            cp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Additional transition half-widths the vertical faces must resolve.
    #[serde(default)]
    pub align_epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub cadence: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

fn default_dt_max() -> f64 {
    RunConfig::default().dt_max
}

fn default_cfl() -> f64 {
    RunConfig::default().cfl
}

/// How the initial state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Random,
    Conduction,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub kind: InitKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Ensemble size for multi-trajectory commands.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_max_wavenumber")]
    pub max_wavenumber: usize,
    #[serde(default = "default_vertical_modes")]
    pub vertical_modes: usize,
    #[serde(default = "default_decay")]
    pub decay: f64,
}

fn default_seed() -> u64 {
    EnsembleSpec::default().seed
}
fn default_count() -> usize {
    EnsembleSpec::default().count
}
fn default_amplitude() -> f64 {
    EnsembleSpec::default().amplitude
}
fn default_max_wavenumber() -> usize {
    EnsembleSpec::default().max_wavenumber
}
fn default_vertical_modes() -> usize {
    EnsembleSpec::default().vertical_modes
}
fn default_decay() -> f64 {
    EnsembleSpec::default().decay
}

impl Default for InitSection {
    fn default() -> Self {
        let e = EnsembleSpec::default();
        Self {
            kind: InitKind::Random,
            seed: e.seed,
            count: e.count,
            amplitude: e.amplitude,
            max_wavenumber: e.max_wavenumber,
            vertical_modes: e.vertical_modes,
            decay: e.decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_r")]
    pub r: f64,
}

fn default_s() -> f64 {
    RunConfig::default().s
}
fn default_r() -> f64 {
    RunConfig::default().r
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { s: default_s(), r: default_r() }
    }
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub domain: DomainSection,
    pub layers: LayersSection,
    pub bc: BcSection,
    #[serde(default)]
    pub diffuse: DiffuseSection,
    #[serde(default)]
    pub background: BackgroundSection,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

/// Everything derived from a [`SimConfig`] before any time stepping.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: LayerConfig,
    pub grid: Grid,
    pub model: Model,
    pub delta: f64,
    pub cp: Tagged,
    /// Present when the strip width was chosen automatically.
    pub delta_choice: Option<DeltaChoice>,
    pub run: RunConfig,
    pub ensemble: EnsembleSpec,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn layer_config(&self) -> Result<LayerConfig> {
        LayerConfig::new(
            self.domain.length,
            self.domain.depth,
            self.layers.interfaces.clone(),
            self.layers.permeability.clone(),
            self.layers.diffusivity.clone(),
            self.bc.c_top,
            self.bc.c_bottom,
        )
    }

    pub fn model(&self) -> Model {
        if self.diffuse.epsilon > 0.0 {
            Model::Diffuse(self.diffuse.epsilon)
        } else {
            Model::Sharp
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            t_end: self.time.t_end,
            cadence: self.time.cadence,
            dt_max: self.time.dt_max,
            cfl: self.time.cfl,
            scheme: self.time.scheme,
            r: self.analysis.r,
            s: self.analysis.s,
            snapshot_times: self.time.snapshots.clone(),
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            count: self.init.count,
            seed: self.init.seed,
            max_wavenumber: self.init.max_wavenumber,
            vertical_modes: self.init.vertical_modes,
            amplitude: self.init.amplitude,
            decay: self.init.decay,
        }
    }

    /// Resolves the strip width and builds the aligned grid. `extra_epsilons`
    /// are further transition half-widths the grid has to resolve.
    pub fn setup(&self, extra_epsilons: &[f64]) -> Result<Setup> {
        let cfg = self.layer_config()?;
        let mut eps: Vec<f64> = self.grid.align_epsilons.clone();
        eps.extend_from_slice(extra_epsilons);
        if self.diffuse.epsilon > 0.0 {
            eps.push(self.diffuse.epsilon);
        }
        let base = Grid::aligned(&cfg, self.grid.nx, self.grid.ny, self.grid.nz, &eps, &[])?;
        let (delta, cp, choice) = if self.background.auto {
            let cp = match self.background.cp {
                Some(v) => Tagged::new(v, Provenance::User),
                None => Tagged::new(estimate_cp(&cfg, &base)?, Provenance::Empirical),
            };
            let choice = choose_delta(&cfg, self.analysis.r, cp.value)?;
            (choice.delta, cp, Some(choice))
        } else {
            let delta = self
                .background
                .delta
                .ok_or_else(|| Error::Config("background.delta is required when background.auto = false".into()))?;
            let cp = match self.background.cp {
                Some(v) => Tagged::new(v, Provenance::User),
                None => Tagged::new(estimate_cp(&cfg, &base)?, Provenance::Empirical),
            };
            (delta, cp, None)
        };
        let grid = Grid::aligned(
            &cfg,
            self.grid.nx,
            self.grid.ny,
            self.grid.nz,
            &eps,
            &strip_breakpoints(&cfg, delta),
        )?;
        let run = self.run_config();
        run.validate()?;
        Ok(Setup {
            cfg,
            grid,
            model: self.model(),
            delta,
            cp,
            delta_choice: choice,
            run,
            ensemble: self.ensemble_spec(),
        })
    }
}

/// Faces that resolve the two background strips: their edges and midpoints.
pub fn strip_breakpoints(cfg: &LayerConfig, delta: f64) -> Vec<f64> {
    let h = cfg.depth;
    vec![-delta, -0.5 * delta, -h + 0.5 * delta, -h + delta]
}

/// Largest `‖∇p‖ / ‖ψ‖` of the sharp pressure solver on `grid`.
pub fn estimate_cp(cfg: &LayerConfig, grid: &Grid) -> Result<f64> {
    let fourier = std::sync::Arc::new(Fourier::new(grid));
    let coeffs = sample_coefficients(cfg, grid, 0.0)?;
    let solver = PressureSolver::new(grid, fourier, &coeffs)?;
    Ok(pressure_constant_estimate(&solver)?.value)
}

/// `path` with its extension replaced by `meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Writes the rows with shortest round-trip float formatting.
pub fn write_csv(out: &mut impl Write, rows: &[Row]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t, r.l2, r.lr, r.grad, r.hs, r.nu_inst, r.nu_avg, r.divmax, r.dt
        )?;
    }
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<Row>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("empty CSV".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header '{}'", header.trim())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        if v.len() != 9 {
            return Err(Error::Parse(format!("row {}: expected 9 columns, got {}", i + 1, v.len())));
        }
        rows.push(Row {
            t: v[0],
            l2: v[1],
            lr: v[2],
            grad: v[3],
            hs: v[4],
            nu_inst: v[5],
            nu_avg: v[6],
            divmax: v[7],
            dt: v[8],
        });
    }
    Ok(rows)
}

/// Writes `path` and its `meta.json` companion.
pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_csv(&mut w, &series.rows)?;
    w.flush()?;
    fs::write(meta_path(path), serde_json::to_string_pretty(&series.meta)?)?;
    Ok(())
}

/// Reads a CSV and its `meta.json` companion.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let rows = read_csv(fs::File::open(path)?)?;
    let meta_file = meta_path(path);
    let meta: SeriesMeta = serde_json::from_str(&fs::read_to_string(&meta_file).map_err(|e| {
        Error::Config(format!("missing series metadata {}: {e}", meta_file.display()))
    })?)?;
    Ok(TimeSeries { rows, meta })
}

/// Header of a snapshot: the field itself lives in a flat binary file of
/// little-endian doubles, z fastest, then x, then y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub endianness: String,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub length: f64,
    pub faces: Vec<f64>,
    pub model: String,
    pub epsilon: f64,
    pub delta: f64,
    pub time: f64,
    pub step: u64,
    /// Payload file name relative to the header.
    pub payload: String,
}

impl SnapshotHeader {
    pub fn grid(&self) -> Result<Grid> {
        let g = Grid::from_faces(self.nx, self.ny, self.length, self.faces.clone())?;
        if g.nz() != self.nz {
            return Err(Error::Parse(format!("header nz {} disagrees with {} faces", self.nz, self.faces.len())));
        }
        Ok(g)
    }

    pub fn model(&self) -> Result<Model> {
        match self.model.as_str() {
            "sharp" => Ok(Model::Sharp),
            "diffuse" => Ok(Model::Diffuse(self.epsilon)),
            other => Err(Error::Parse(format!("unknown model tag '{other}'"))),
        }
    }
}

fn header_for(grid: &Grid, state: &SimState, payload: String) -> SnapshotHeader {
    SnapshotHeader {
        format_version: FORMAT_VERSION,
        endianness: "little".into(),
        nx: grid.nx,
        ny: grid.ny,
        nz: grid.nz(),
        length: grid.length,
        faces: grid.faces().to_vec(),
        model: state.model.tag().into(),
        epsilon: state.model.epsilon(),
        delta: state.delta,
        time: state.t,
        step: state.step,
        payload,
    }
}

fn write_f64s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: bytes.len() / 8,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn complex_values(v: &[Complex64]) -> impl Iterator<Item = f64> + '_ {
    v.iter().flat_map(|c| [c.re, c.im])
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn sibling(header: &Path, name: &str) -> PathBuf {
    header.parent().unwrap_or(Path::new(".")).join(name)
}

fn check_header(h: &SnapshotHeader) -> Result<()> {
    if h.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported format version {}", h.format_version)));
    }
    if h.endianness != "little" {
        return Err(Error::Parse(format!("unsupported endianness '{}'", h.endianness)));
    }
    Ok(())
}

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`; returns the header path.
pub fn write_snapshot(dir: &Path, name: &str, grid: &Grid, state: &SimState) -> Result<PathBuf> {
    let payload = format!("{name}.bin");
    let header = header_for(grid, state, payload.clone());
    write_f64s(&dir.join(&payload), state.psi.iter().copied())?;
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&header)?)?;
    Ok(path)
}

pub fn read_snapshot(header_path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    check_header(&header)?;
    let psi = read_f64s(&sibling(header_path, &header.payload), header.nx * header.ny * header.nz)?;
    Ok((header, psi))
}

/// Snapshot plus everything needed to continue a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub snapshot: SnapshotHeader,
    pub scheme: Scheme,
    pub prev_dt: f64,
    /// Horizontal spectrum of `ψ` as interleaved (re, im) pairs.
    pub spectral_payload: String,
    /// Previous explicit terms of the two-step scheme, same layout.
    pub history_payload: Option<String>,
    pub rng: Option<ChaCha8Rng>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub psi: Vec<f64>,
    pub psi_hat: Vec<Complex64>,
    pub prev_explicit: Option<Vec<Complex64>>,
}

impl Checkpoint {
    /// Rebuilds the state on `problem`, recomputing only the flow.
    pub fn restore(&self, problem: &Problem) -> Result<SimState> {
        let g = self.header.snapshot.grid()?;
        if !g.compatible(&problem.grid) {
            return Err(Error::Config("checkpoint grid differs from the problem grid".into()));
        }
        let model = self.header.snapshot.model()?;
        if model != problem.model {
            return Err(Error::Config(format!(
                "checkpoint model {:?} differs from problem model {:?}",
                model, problem.model
            )));
        }
        Ok(SimState {
            t: self.header.snapshot.time,
            step: self.header.snapshot.step,
            psi: self.psi.clone(),
            psi_hat: self.psi_hat.clone(),
            flow: problem.pressure.flow_spectral(&self.psi_hat)?,
            prev_explicit: self.prev_explicit.clone(),
            prev_dt: self.header.prev_dt,
            model,
            delta: self.header.snapshot.delta,
        })
    }
}

/// Writes `<name>.ckpt.json` with its payload files; returns the header path.
pub fn write_checkpoint(
    dir: &Path,
    name: &str,
    grid: &Grid,
    state: &SimState,
    scheme: Scheme,
    rng: Option<&ChaCha8Rng>,
) -> Result<PathBuf> {
    let payload = format!("{name}.psi.bin");
    let spectral = format!("{name}.spec.bin");
    write_f64s(&dir.join(&payload), state.psi.iter().copied())?;
    write_f64s(&dir.join(&spectral), complex_values(&state.psi_hat))?;
    let history = match &state.prev_explicit {
        Some(h) => {
            let f = format!("{name}.hist.bin");
            write_f64s(&dir.join(&f), complex_values(h))?;
            Some(f)
        }
        None => None,
    };
    let header = CheckpointHeader {
        snapshot: header_for(grid, state, payload),
        scheme,
        prev_dt: state.prev_dt,
        spectral_payload: spectral,
        history_payload: history,
        rng: rng.cloned(),
    };
    let path = dir.join(format!("{name}.ckpt.json"));
    fs::write(&path, serde_json::to_string_pretty(&header)?)?;
    Ok(path)
}

pub fn read_checkpoint(header_path: &Path) -> Result<Checkpoint> {
    let header: CheckpointHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    let s = &header.snapshot;
    check_header(s)?;
    let n = s.nx * s.ny * s.nz;
    let psi = read_f64s(&sibling(header_path, &s.payload), n)?;
    let psi_hat = to_complex(&read_f64s(&sibling(header_path, &header.spectral_payload), 2 * n)?);
    let prev_explicit = match &header.history_payload {
        Some(f) => Some(to_complex(&read_f64s(&sibling(header_path, f), 2 * n)?)),
        None => None,
    };
    Ok(Checkpoint {
        header,
        psi,
        psi_hat,
        prev_explicit,
    })
}
