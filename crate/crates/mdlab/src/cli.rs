//! Run orchestration for the `mdlab` binary: the four modes (simulate,
//! resonance-scan, scattering-diagnose, identity-check), their observers,
//! and report emission.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::RunConfig;
use crate::dirac::{self, Sign};
use crate::error::MdError;
use crate::evolve::{self, Observer, ProfileState};
use crate::grid::FourierGrid;
use crate::io::{read_checkpoint, write_checkpoint, write_json_report, CsvWriter};
use crate::resonance::{self, SampleSpec};
use crate::scattering::{
    self, norm_d, norm_m, PhaseCorrectionTable, Snapshot,
};
use crate::state::{make_initial_data, MDState};
use crate::vfields;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    ResonanceScan,
    ScatteringDiagnose,
    IdentityCheck,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "simulate" => Some(Mode::Simulate),
            "resonance-scan" => Some(Mode::ResonanceScan),
            "scattering-diagnose" => Some(Mode::ScatteringDiagnose),
            "identity-check" => Some(Mode::IdentityCheck),
            _ => None,
        }
    }
}

pub struct CliOptions {
    pub mode: Mode,
    pub config: Option<PathBuf>,
    pub strict: bool,
    pub resume: Option<PathBuf>,
}

pub fn parse_args<I: Iterator<Item = String>>(mut args: I) -> std::result::Result<CliOptions, String> {
    let mode = args
        .next()
        .ok_or_else(usage)
        .and_then(|m| Mode::parse(&m).ok_or_else(usage))?;
    let mut config = None;
    let mut strict = false;
    let mut resume = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => {
                config = Some(PathBuf::from(args.next().ok_or("--config needs a path")?))
            }
            "--strict" => strict = true,
            "--resume" => {
                resume = Some(PathBuf::from(args.next().ok_or("--resume needs a path")?))
            }
            other => return Err(format!("unknown argument `{other}`\n{}", usage())),
        }
    }
    Ok(CliOptions { mode, config, strict, resume })
}

fn usage() -> String {
    "usage: mdlab <simulate|resonance-scan|scattering-diagnose|identity-check> \
     [--config <path>] [--strict] [--resume <checkpoint>]"
        .to_string()
}

/// Entry point shared by the binary and the integration tests. Returns the
/// process exit code.
pub fn run_cli(opts: &CliOptions) -> i32 {
    let cfg = match &opts.config {
        Some(path) => match crate::config::load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("mdlab: config error: {e}");
                return 2;
            }
        },
        None => RunConfig::default(),
    };
    match run_mode(&cfg, opts.mode, opts.strict, opts.resume.as_deref()) {
        Ok(ok) => {
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("mdlab: {e}");
            2
        }
    }
}

/// Execute one mode. Returns Ok(false) when --strict found threshold
/// violations (nonzero exit without an error).
pub fn run_mode(cfg: &RunConfig, mode: Mode, strict: bool, resume: Option<&Path>) -> Result<bool> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    match mode {
        Mode::Simulate => simulate(cfg, resume),
        Mode::ResonanceScan => resonance_scan(cfg, strict),
        Mode::ScatteringDiagnose => scattering_diagnose(cfg),
        Mode::IdentityCheck => identity_check(cfg, strict),
    }
}

fn manifest_value(cfg: &RunConfig, mode: &str, timing: f64) -> serde_json::Value {
    json!({
        "mode": mode,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "constant_overrides": cfg.constant_overrides(),
        "horizon": cfg.horizon(),
        "data_radius": cfg.data_radius(),
        "wall_seconds": timing,
    })
}

/// Diagnostics CSV rows plus abort-snapshot support.
struct DiagnosticsObserver {
    stride: usize,
    steps_seen: usize,
    csv: CsvWriter,
    constants: scattering::PaperConstants,
    charge0: Option<f64>,
    pub last_state: Option<ProfileState>,
    pub rows: usize,
}

impl DiagnosticsObserver {
    fn new(path: &Path, constants: scattering::PaperConstants, stride: usize) -> Result<Self> {
        let csv = CsvWriter::create(
            path,
            &[
                "t",
                "charge",
                "charge_rel_drift",
                "lorenz_residual",
                "gauge_reality",
                "norm_d_plus",
                "norm_d_minus",
                "norm_m_max",
                "reg_a0",
                "reg_a0_dot",
            ],
        )?;
        Ok(DiagnosticsObserver {
            stride,
            steps_seen: 0,
            csv,
            constants,
            charge0: None,
            last_state: None,
            rows: 0,
        })
    }

    fn emit(&mut self, ps: &ProfileState) -> Result<()> {
        let md = ps.to_md()?;
        let charge = md.charge();
        let q0 = *self.charge0.get_or_insert(charge);
        let drift = if q0 > 0.0 { (charge - q0).abs() / q0 } else { 0.0 };
        let nd_p = norm_d(&ps.phi[0])?.total;
        let nd_m = norm_d(&ps.phi[1])?.total;
        let mut nm = 0.0f64;
        for mu in 0..4 {
            for s in 0..2 {
                nm = nm.max(norm_m(&ps.v[mu][s], &self.constants)?.total);
            }
        }
        self.csv.row(&[
            ps.t,
            charge,
            drift,
            md.lorenz_residual(),
            md.gauge_reality_residual()?,
            nd_p,
            nd_m,
            nm,
            ps.reg[0][0],
            ps.reg[0][1],
        ])?;
        self.rows += 1;
        Ok(())
    }
}

impl Observer for DiagnosticsObserver {
    fn observe(&mut self, ps: &ProfileState, is_final: bool) -> Result<()> {
        let due = self.steps_seen % self.stride == 0 || is_final;
        self.steps_seen += 1;
        self.last_state = Some(ps.clone());
        if due {
            self.emit(ps)?;
        }
        Ok(())
    }
}

/// Accumulates the phase-correction tables along the run.
pub struct PhaseObserver {
    pub table: PhaseCorrectionTable,
    /// Times at which the table must be synchronized exactly (checkpoints).
    pub sync_times: Vec<f64>,
}

impl Observer for PhaseObserver {
    fn observe(&mut self, ps: &ProfileState, is_final: bool) -> Result<()> {
        let gauge = ps.gauge_hat()?;
        let force = is_final
            || self
                .sync_times
                .iter()
                .any(|&t| (ps.t - t).abs() <= 1e-9);
        self.table.accumulate(ps.grid(), &gauge, ps.t, force)?;
        Ok(())
    }
}

/// Writes checkpoints at the first step end at or past each requested time.
struct CheckpointObserver<'a> {
    times: Vec<f64>,
    period: f64,
    next_periodic: f64,
    dir: PathBuf,
    phase: &'a std::cell::RefCell<PhaseObserver>,
    written: Vec<(f64, PathBuf)>,
}

impl<'a> CheckpointObserver<'a> {
    fn due(&mut self, t: f64, is_final: bool) -> bool {
        let mut due = is_final;
        if let Some(pos) = self.times.iter().position(|&ct| t >= ct - 1e-9) {
            self.times.remove(pos);
            due = true;
        }
        if self.period > 0.0 && t >= self.next_periodic - 1e-9 {
            self.next_periodic += self.period;
            due = true;
        }
        due
    }
}

impl<'a> Observer for CheckpointObserver<'a> {
    fn observe(&mut self, ps: &ProfileState, is_final: bool) -> Result<()> {
        if !self.due(ps.t, is_final) {
            return Ok(());
        }
        let name = if is_final {
            "checkpoint_final.mdck".to_string()
        } else {
            format!("checkpoint_t{:012.6}.mdck", ps.t)
        };
        let path = self.dir.join(name);
        let snap = Snapshot {
            state: ps.clone(),
            tables: self.phase.borrow().table.clone(),
        };
        write_checkpoint(&path, &snap)?;
        self.written.push((ps.t, path));
        Ok(())
    }
}

fn simulate(cfg: &RunConfig, resume: Option<&Path>) -> Result<bool> {
    let started = std::time::Instant::now();
    let out_dir = PathBuf::from(&cfg.output_dir);

    let (state, tables, grid) = match resume {
        Some(path) => {
            let snap = read_checkpoint(path)?;
            let grid = snap.state.grid().clone();
            let expect = (cfg.n, cfg.box_length, cfg.mass);
            let got = (grid.n(), grid.box_length(), grid.mass());
            if expect != got {
                return Err(MdError::Checkpoint(format!(
                    "checkpoint grid {got:?} does not match config {expect:?}"
                )));
            }
            (snap.state, snap.tables, grid)
        }
        None => {
            let grid = FourierGrid::new(cfg.n, cfg.box_length, cfg.mass)?;
            let md = make_initial_data(&grid, &cfg.recipe)?;
            let ps = ProfileState::from_md(&md)?;
            let mut tables = PhaseCorrectionTable::new(&grid, cfg.constants.clone());
            tables.mode_budget = cfg.phase_mode_budget;
            tables.dense_modes = cfg.phase_dense_modes;
            tables.coarse_ds = cfg.phase_coarse_ds;
            (ps, tables, grid)
        }
    };

    let icfg = cfg.integrator(&grid);
    let mut diag = DiagnosticsObserver::new(
        &out_dir.join("series.csv"),
        cfg.constants.clone(),
        cfg.observer_stride,
    )?;
    let phase = std::cell::RefCell::new(PhaseObserver {
        table: tables,
        sync_times: cfg.checkpoint_times.clone(),
    });
    let mut ckpt = CheckpointObserver {
        times: cfg.checkpoint_times.clone(),
        period: cfg.checkpoint_period,
        next_periodic: if cfg.checkpoint_period > 0.0 {
            state.t + cfg.checkpoint_period
        } else {
            f64::INFINITY
        },
        dir: out_dir.clone(),
        phase: &phase,
        written: Vec::new(),
    };

    struct PhaseObsCell<'a>(&'a std::cell::RefCell<PhaseObserver>, bool);
    impl<'a> Observer for PhaseObsCell<'a> {
        fn observe(&mut self, ps: &ProfileState, is_final: bool) -> Result<()> {
            if self.1 {
                self.0.borrow_mut().observe(ps, is_final)?;
            }
            Ok(())
        }
    }
    let mut phase_obs = PhaseObsCell(&phase, cfg.phase_enabled);

    let summary = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut phase_obs, &mut ckpt, &mut diag];
        match evolve::run(state, &icfg, cfg.t_end, observers.as_mut_slice()) {
            Ok(s) => s,
            Err(e) => {
                // diagnostic snapshot of the last good state
                if let Some(last) = diag.last_state.take() {
                    let snap = Snapshot {
                        state: last,
                        tables: phase.borrow().table.clone(),
                    };
                    let _ = write_checkpoint(&out_dir.join("diagnostic_abort.mdck"), &snap);
                }
                return Err(e);
            }
        }
    };

    let mut manifest = manifest_value(cfg, "simulate", started.elapsed().as_secs_f64());
    manifest["steps"] = json!(summary.steps);
    manifest["final_t"] = json!(summary.state.t);
    manifest["past_horizon_steps"] = json!(summary.past_horizon_steps);
    manifest["final_charge"] = json!(summary.state.charge());
    manifest["checkpoints"] = json!(ckpt
        .written
        .iter()
        .map(|(t, p)| json!({"t": t, "path": p.display().to_string()}))
        .collect::<Vec<_>>());
    manifest["phase_stamps"] = json!(phase.borrow().table.stamps.len());
    write_json_report(&out_dir.join("manifest.json"), "mdlab-simulate", manifest)?;
    diag.csv.finish()?;
    Ok(true)
}

fn resonance_scan(cfg: &RunConfig, strict: bool) -> Result<bool> {
    let started = std::time::Instant::now();
    let out_dir = PathBuf::from(&cfg.output_dir);
    let spec = SampleSpec {
        samples: cfg.scan_samples,
        log2_r_min: cfg.scan_log2_r_min,
        log2_r_max: cfg.scan_log2_r_max,
        seed: cfg.scan_seed,
    };
    let reports = resonance::scan_all(&spec)?;
    let mut ok = true;
    let mut entries = Vec::new();
    for r in &reports {
        let cls = resonance::classify_sets(r.bound.kind(), r.signs);
        let consistent = resonance::argmin_consistent(r, &cls);
        ok &= r.min_ratio > 0.0 && consistent;
        entries.push(json!({
            "bound": format!("{:?}", r.bound),
            "signs": format!("{}", r.signs),
            "samples": r.samples,
            "min_ratio": r.min_ratio,
            "argmin_xi": r.argmin_xi,
            "argmin_eta": r.argmin_eta,
            "argmin_radius_xi": r.argmin_xi_radius,
            "argmin_radius_eta": r.argmin_eta_radius,
            "classification": cls,
            "argmin_consistent": consistent,
        }));
    }
    let phase_const = resonance::phase_approximation_constant(8.0, 1.0, cfg.scan_samples, cfg.scan_seed);
    let mut manifest = manifest_value(cfg, "resonance-scan", started.elapsed().as_secs_f64());
    manifest["bounds"] = json!(entries);
    manifest["phase_approximation_constant"] = json!(phase_const);
    manifest["all_positive"] = json!(ok);
    write_json_report(&out_dir.join("resonance.json"), "mdlab-resonance", manifest)?;

    if cfg.scan_export_phase_grid {
        export_phase_grid(&out_dir.join("phase_grid.csv"))?;
    }
    Ok(!strict || (ok && phase_const <= 1.1))
}

/// 2D slice export of the phase values for external plotting: eta along ex,
/// xi along ex, radii log-spaced.
fn export_phase_grid(path: &Path) -> Result<()> {
    let mut csv = CsvWriter::create(
        path,
        &["xi", "eta", "p_ppp", "p_pmp", "q_ppp", "q_ppm"],
    )?;
    use crate::resonance::{phase, PhaseKind, SignTriple};
    let ppp = SignTriple::new(Sign::Plus, Sign::Plus, Sign::Plus);
    let pmp = SignTriple::new(Sign::Plus, Sign::Minus, Sign::Plus);
    let ppm = SignTriple::new(Sign::Plus, Sign::Plus, Sign::Minus);
    for i in 0..=100 {
        for j in 0..=100 {
            let xi_r = 2f64.powf(-6.0 + 12.0 * i as f64 / 100.0);
            let eta_r = 2f64.powf(-6.0 + 12.0 * j as f64 / 100.0);
            let xi = [xi_r, 0.0, 0.0];
            let eta = [eta_r, 0.0, 0.0];
            csv.row(&[
                xi_r,
                eta_r,
                phase(PhaseKind::Dirac, ppp, xi, eta),
                phase(PhaseKind::Dirac, pmp, xi, eta),
                phase(PhaseKind::Maxwell, ppp, xi, eta),
                phase(PhaseKind::Maxwell, ppm, xi, eta),
            ])?;
        }
    }
    csv.finish()
}

fn scattering_diagnose(cfg: &RunConfig) -> Result<bool> {
    let started = std::time::Instant::now();
    let out_dir = PathBuf::from(&cfg.output_dir);
    if cfg.drift_checkpoint_a.is_empty() || cfg.drift_checkpoint_b.is_empty() {
        return Err(MdError::Validation {
            field: "drift.checkpoint_a/b".into(),
            msg: "scattering-diagnose needs two checkpoint paths in the [drift] section".into(),
        });
    }
    let snap_a = read_checkpoint(Path::new(&cfg.drift_checkpoint_a))?;
    let snap_b = read_checkpoint(Path::new(&cfg.drift_checkpoint_b))?;
    let report = scattering::drift_report(&snap_a, &snap_b, &cfg.drift)?;

    // norm breakdowns at both ends
    let mut norm_csv = CsvWriter::create(
        &out_dir.join("norms.csv"),
        &["t", "theta", "k", "norm_d_amplitude", "norm_d_l2"],
    )?;
    for (snap, _tag) in [(&snap_a, "a"), (&snap_b, "b")] {
        for (si, phi) in snap.state.phi.iter().enumerate() {
            let nd = norm_d(phi)?;
            for sh in &nd.shells {
                norm_csv.row(&[
                    snap.state.t,
                    si as f64,
                    sh.k as f64,
                    sh.amplitude_term,
                    sh.l2_term,
                ])?;
            }
        }
    }
    norm_csv.finish()?;

    let mut manifest = manifest_value(cfg, "scattering-diagnose", started.elapsed().as_secs_f64());
    manifest["drift"] = serde_json::to_value(&report)?;
    write_json_report(&out_dir.join("scattering.json"), "mdlab-scattering", manifest)?;
    Ok(true)
}

fn identity_check(cfg: &RunConfig, strict: bool) -> Result<bool> {
    let started = std::time::Instant::now();
    let out_dir = PathBuf::from(&cfg.output_dir);
    let algebra = dirac::identity_suite(cfg.mass, cfg.identity_samples, cfg.identity_seed);

    let grid = FourierGrid::new(cfg.n, cfg.box_length, cfg.mass)?;
    let mut st = MDState::vacuum(&grid);
    st.psi = vfields::bandlimited_test_spinor(&grid, cfg.identity_seed)
        .scaled(num_complex::Complex64::new(cfg.recipe.epsilon, 0.0));
    st.t = 0.4;
    let free = vfields::check_commutators(&st)?;

    let coupled = vfields::weight_identity_state(&grid, cfg.recipe.epsilon)?;
    let coupled_report = vfields::check_commutators(&coupled)?;

    let ok = algebra.max() <= 1e-12
        && free.rotation_residual <= 1e-6
        && free.boost_residual <= 1e-6
        && coupled_report.weight_dirac_residual <= 1e-6
        && coupled_report.weight_wave_residual <= 1e-6;

    let mut manifest = manifest_value(cfg, "identity-check", started.elapsed().as_secs_f64());
    manifest["algebra"] = serde_json::to_value(&algebra)?;
    manifest["commutators_free"] = serde_json::to_value(&free)?;
    manifest["commutators_coupled"] = serde_json::to_value(&coupled_report)?;
    manifest["all_below_thresholds"] = json!(ok);
    write_json_report(&out_dir.join("identities.json"), "mdlab-identities", manifest)?;
    Ok(!strict || ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arg_parsing() {
        let opts = parse_args(
            ["simulate", "--config", "x.cfg", "--strict"]
                .iter()
                .map(|s| s.to_string()),
        )
        .unwrap();
        assert_eq!(opts.mode, Mode::Simulate);
        assert!(opts.strict);
        assert_eq!(opts.config.unwrap().to_str().unwrap(), "x.cfg");
        assert!(parse_args(["bogus".to_string()].into_iter()).is_err());
        assert!(parse_args(std::iter::empty()).is_err());
        let opts = parse_args(
            ["identity-check", "--resume", "c.mdck"].iter().map(|s| s.to_string()),
        )
        .unwrap();
        assert_eq!(opts.mode, Mode::IdentityCheck);
        assert_eq!(opts.resume.unwrap().to_str().unwrap(), "c.mdck");
    }
}
