use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cpf_core::calibration::{fit_spectrum, population_up, sample_spectrum, scan_grid, RamseyParams, Spectrum};
use cpf_core::cavity::{
    conditional_phase, efficiency_budget, phase_accuracy_bandwidth, phase_deviation, pulse_phase_statistics,
    reflection_coefficient, Bandwidth,
};
use cpf_core::config::{AveragingMethod, Config};
use cpf_core::errors::{calibrate, fidelity_budget, ErrorParams, REFERENCE_REDUCTIONS};
use cpf_core::photonsource::coincidence_probability;
use cpf_core::protocol::{trace, AtomOutcome, GateModel, PhotonChannel};
use cpf_core::qcore::DensityMatrix;
use cpf_core::tomography::{
    average_gate_fidelity, entangling_capability, export_kets, input_fidelities, linear_inversion, product, psi_plus,
    simulate_random_allocation, split_by_outcome, truth_table, FidelityMode, PolState,
};

use crate::report::{Cell, Table};
use crate::{CliError, Mode};

pub struct Context<'a> {
    pub config: &'a Config,
    pub seed: Option<u64>,
    pub mode: Mode,
}

impl Context<'_> {
    fn seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Usage(format!("{what} is stochastic and needs --seed")))
    }

    fn model(&self) -> Result<GateModel, CliError> {
        Ok(match self.mode {
            Mode::Ideal => GateModel::Ideal,
            Mode::Error => {
                let averaging = match self.config.averaging_method {
                    AveragingMethod::MonteCarlo => self.config.averaging(self.seed("monte-carlo averaging")?),
                    AveragingMethod::GaussHermite => self.config.averaging(0),
                };
                GateModel::Noisy { params: self.config.errors, averaging }
            }
        })
    }
}

fn pair_label(a: PolState, b: PolState) -> String {
    format!("{}{}", a.label(), b.label())
}

pub fn truth_table_cmd(ctx: &Context, shots: Option<u64>) -> Result<Vec<Table>, CliError> {
    let seed = match shots {
        Some(_) => ctx.seed("sampled truth table")?,
        None => 0,
    };
    let (t, f_cnot) = truth_table(&ctx.model()?, shots, seed)?;
    let mut table = Table::new("truth_table", &["input", "RH", "RV", "LH", "LV"]);
    for (label, row) in t.labels.iter().zip(t.probabilities) {
        let mut cells = vec![Cell::from(label.as_str())];
        cells.extend(row.iter().map(|&p| Cell::from(p)));
        table.push(cells);
    }
    let sampling = shots.map_or(Cell::from("exact"), Cell::from);
    Ok(vec![Table::summary(vec![("f_cnot", f_cnot.into()), ("shots_per_input", sampling)]), table])
}

pub fn bell_cmd(ctx: &Context, pairs: u64, exact: bool) -> Result<Vec<Table>, CliError> {
    let model = ctx.model()?;
    let dd = product(PolState::D, PolState::D);
    let rho = model.apply(&dd.to_density())?;
    let target = psi_plus();
    let f_exact = cpf_core::qcore::fidelity_pure(&rho, &target)?;
    let c_exact = entangling_capability(&rho)?;
    let (f_down, f_up) = split_by_outcome(&model, &dd)?;
    let mut summary = vec![
        ("f_psi_plus_exact", Cell::from(f_exact)),
        ("capability_exact", c_exact.into()),
        ("f_psi_plus_read_down", f_down.into()),
        ("f_psi_plus_read_up", f_up.into()),
    ];
    let kets = export_kets();
    let mut matrix = Table::new("density_matrix", &["row", "col", "real", "imag", "real_std", "imag_std"]);
    let export = if exact {
        let m = cpf_core::tomography::matrix_in_basis(rho.matrix(), &kets);
        let z = vec![vec![0.0; 4]; 4];
        (
            cpf_core::tomography::EXPORT_BASIS.iter().map(|&(a, b)| pair_label(a, b)).collect::<Vec<_>>(),
            (0..4).map(|i| (0..4).map(|j| m[(i, j)].re).collect()).collect::<Vec<Vec<f64>>>(),
            (0..4).map(|i| (0..4).map(|j| m[(i, j)].im).collect()).collect::<Vec<Vec<f64>>>(),
            z.clone(),
            z,
        )
    } else {
        let seed = ctx.seed("bell tomography")?;
        let est = linear_inversion(&simulate_random_allocation(&rho, pairs, seed)?)?;
        let (f, f_se) = est.fidelity(&target)?;
        summary.push(("pairs", pairs.into()));
        summary.push(("f_psi_plus_estimate", f.into()));
        summary.push(("f_psi_plus_std_err", f_se.into()));
        summary.push(("capability_estimate", entangling_capability(&est.rho_hat)?.into()));
        summary.push(("rms_entry_error", est.rms_entry_error(&kets).into()));
        let e = est.export();
        summary.push(("estimate_physical", e.physical.into()));
        (e.basis, e.real, e.imag, e.real_std, e.imag_std)
    };
    let (basis, re, im, re_sd, im_sd) = export;
    for i in 0..4 {
        for j in 0..4 {
            matrix.push(vec![
                basis[i].as_str().into(),
                basis[j].as_str().into(),
                re[i][j].into(),
                im[i][j].into(),
                re_sd[i][j].into(),
                im_sd[i][j].into(),
            ]);
        }
    }
    Ok(vec![Table::summary(summary), matrix])
}

pub fn avg_fidelity_cmd(ctx: &Context, sampled: bool, pairs: u64) -> Result<Vec<Table>, CliError> {
    let model = ctx.model()?;
    let per_input = input_fidelities(&model)?;
    let exact = per_input.iter().map(|(_, f)| f).sum::<f64>() / per_input.len() as f64;
    let mut summary = vec![("f_avg_exact", Cell::from(exact))];
    if sampled {
        let seed = ctx.seed("sampled average fidelity")?;
        let est = average_gate_fidelity(&model, FidelityMode::Sampled { pairs, seed })?;
        summary.push(("pairs_per_input", pairs.into()));
        summary.push(("f_avg_sampled", est.mean.into()));
        summary.push(("f_avg_sampled_std_err", est.std_err.into()));
    }
    let mut table = Table::new("input_fidelities", &["input", "fidelity"]);
    for ((a, b), f) in per_input {
        table.push(vec![pair_label(a, b).into(), f.into()]);
    }
    Ok(vec![Table::summary(summary), table])
}

fn parameter_table(e: &ErrorParams) -> Table {
    let mut t = Table::new("parameters", &["name", "value"]);
    for (name, v) in [
        ("sigma_dphi_pi", e.sigma_dphi / PI),
        ("xi_pi", e.xi / PI),
        ("p_prep", e.p_prep),
        ("p_det", e.p_det),
        ("p_dark", e.p_dark),
        ("p_mode", e.p_mode),
        ("dephase", e.dephase),
        ("p_pol", e.p_pol),
        ("multi_photon_weight", e.multi_photon_weight),
    ] {
        t.push(vec![name.into(), v.into()]);
    }
    t
}

fn budget_tables(config: &Config, params: &ErrorParams) -> Result<Vec<Table>, CliError> {
    let sigma_bw = config.bandwidth_sigma()?;
    // Monte Carlo averaging would make the budget seed-dependent
    let budget = fidelity_budget(
        params,
        sigma_bw,
        &Config { averaging_method: AveragingMethod::GaussHermite, ..config.clone() }.averaging(0),
    )?;
    let mut t = Table::new("budget", &["effect", "reduction_pp", "reference_pp"]);
    for e in &budget.entries {
        let reference = REFERENCE_REDUCTIONS.iter().find(|(n, _)| *n == e.effect).map(|r| r.1);
        t.push(vec![e.effect.as_str().into(), e.reduction_pp.into(), reference.map_or(Cell::from(""), Cell::from)]);
    }
    let summary = Table::summary(vec![
        ("all_on_fidelity", budget.all_on_fidelity.into()),
        ("bandwidth_sigma_pi", (sigma_bw / PI).into()),
        ("sum_of_reductions_pp", budget.entries.iter().map(|e| e.reduction_pp).sum::<f64>().into()),
    ]);
    Ok(vec![summary, t, parameter_table(params)])
}

pub fn budget_cmd(ctx: &Context) -> Result<Vec<Table>, CliError> {
    budget_tables(ctx.config, &ctx.config.errors)
}

pub fn calibrate_cmd(ctx: &Context, write_config: Option<&Path>, header: &str) -> Result<Vec<Table>, CliError> {
    let calibrated = calibrate(&ctx.config.errors, &ctx.config.targets)?;
    if let Some(path) = write_config {
        let cfg = Config { errors: calibrated, ..ctx.config.clone() };
        std::fs::write(path, format!("{header}\n{}", cfg.to_toml_string()))?;
    }
    budget_tables(ctx.config, &calibrated)
}

pub fn efficiency_cmd(ctx: &Context) -> Result<Vec<Table>, CliError> {
    let c = &ctx.config.efficiency;
    let e = efficiency_budget(c)?;
    Ok(vec![Table::summary(vec![
        ("t_fiber", c.t_fiber.into()),
        ("r_cavity", c.r_cavity.into()),
        ("t_optics", c.t_optics.into()),
        ("per_photon", e.per_photon.into()),
        ("pair", e.pair.into()),
        ("coincidence_per_trial", coincidence_probability(&ctx.config.source)?.into()),
    ])])
}

pub fn phase_spectrum_cmd(ctx: &Context, span_mhz: f64, points: usize, tol_pi: f64) -> Result<Vec<Table>, CliError> {
    if points < 2 || !(span_mhz > 0.0) {
        return Err(CliError::Usage("--span-mhz must be positive and --points at least 2".into()));
    }
    let p = &ctx.config.cavity;
    let mut t = Table::new(
        "reflection",
        &[
            "delta_mhz",
            "r_coupled",
            "phase_coupled",
            "r_uncoupled",
            "phase_uncoupled",
            "conditional_phase",
            "deviation",
        ],
    );
    for k in 0..points {
        let d = -span_mhz / 2.0 + span_mhz * k as f64 / (points - 1) as f64;
        let (on, off) = (reflection_coefficient(p, d, true), reflection_coefficient(p, d, false));
        t.push(vec![
            d.into(),
            on.reflectivity.into(),
            on.phase.into(),
            off.reflectivity.into(),
            off.phase.into(),
            conditional_phase(p, d).into(),
            phase_deviation(p, d).into(),
        ]);
    }
    let band = phase_accuracy_bandwidth(p, tol_pi * PI)?;
    let kind = match band {
        Bandwidth::Empty => "empty",
        Bandwidth::Finite(_) => "finite",
        Bandwidth::SpansRange(_) => "spans-search-range",
    };
    let stats = pulse_phase_statistics(p, ctx.config.spectrum_fwhm_mhz)?;
    let summary = Table::summary(vec![
        ("kappa_r_mhz", p.kappa_r.into()),
        ("empty_cavity_reflectivity", reflection_coefficient(p, 0.0, false).reflectivity.into()),
        ("tolerance_pi", tol_pi.into()),
        ("bandwidth_mhz", band.width().into()),
        ("bandwidth_kind", kind.into()),
        ("spectrum_fwhm_mhz", ctx.config.spectrum_fwhm_mhz.into()),
        ("phase_mean_pi", (stats.mean / PI).into()),
        ("phase_std_pi", (stats.std / PI).into()),
    ]);
    Ok(vec![summary, t])
}

pub fn ramsey_cmd(ctx: &Context, data: Option<&Path>, no_fit: bool) -> Result<Vec<Table>, CliError> {
    let cfg = ctx.config;
    let spectrum = match data {
        Some(path) => Spectrum::read_csv(BufReader::new(File::open(path)?))?,
        None => {
            let grid = scan_grid(cfg.scan.span_khz, cfg.scan.points);
            sample_spectrum(&cfg.ramsey, &grid, cfg.scan.shots, ctx.seed("synthetic ramsey data")?)?
        }
    };
    let mut summary = vec![("points", Cell::from(spectrum.len()))];
    let model: RamseyParams = if no_fit {
        cfg.ramsey
    } else {
        let fit = fit_spectrum(&spectrum, &cfg.ramsey)?;
        let p = fit.params;
        summary.extend([
            ("rabi_khz", p.rabi_khz.into()),
            ("rabi_khz_std_err", fit.std_errors.rabi_khz.into()),
            ("delta_offset_khz", p.delta_offset_khz.into()),
            ("delta_offset_khz_std_err", fit.std_errors.delta_offset_khz.into()),
            ("light_shift_khz", p.light_shift_khz.into()),
            ("light_shift_khz_std_err", fit.std_errors.light_shift_khz.into()),
            ("chi2", fit.chi2.into()),
            ("dof", fit.dof.into()),
            ("iterations", fit.iterations.into()),
            ("pulse_area_pi", (p.pulse_area() / PI).into()),
            ("p_up_at_offset_compensated", population_up(&p.compensated(), p.delta_offset_khz).into()),
        ]);
        p
    };
    let mut t = Table::new("spectrum", &["delta_khz", "p_up", "sigma", "model"]);
    for i in 0..spectrum.len() {
        let d = spectrum.detunings_khz[i];
        let sigma = spectrum.sigma.as_ref().map_or(Cell::from(""), |s| Cell::from(s[i]));
        t.push(vec![d.into(), spectrum.p_up[i].into(), sigma, population_up(&model, d).into()]);
    }
    Ok(vec![Table::summary(summary), t])
}

fn parse_input(s: &str) -> Result<(PolState, PolState), CliError> {
    let pol = |c: char| PolState::ALL.into_iter().find(|p| p.label() == c.to_ascii_uppercase());
    let chars: Vec<char> = s.chars().collect();
    match chars.as_slice() {
        [a, b] => match (pol(*a), pol(*b)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(CliError::Usage(format!("unknown polarisation in '{s}', use H V D A R L"))),
        },
        _ => Err(CliError::Usage(format!("--input takes two polarisation letters, got '{s}'"))),
    }
}

/// Amplitudes of a pure density matrix, phased so the largest is real.
fn amplitudes(rho: &DensityMatrix) -> Vec<(f64, f64)> {
    let m = rho.matrix();
    let k = (0..m.nrows()).max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re)).unwrap_or(0);
    let norm = m[(k, k)].re.sqrt();
    (0..m.nrows()).map(|i| (m[(i, k)].re / norm, m[(i, k)].im / norm)).collect()
}

pub fn trace_cmd(input: &str, outcome: &str) -> Result<Vec<Table>, CliError> {
    let (a, b) = parse_input(input)?;
    let outcome: AtomOutcome = outcome.parse()?;
    let t = trace(&product(a, b), outcome)?;
    let mut steps = Table::new("steps", &["step", "label", "basis", "real", "imag"]);
    let atom = ["up", "down"];
    let photon = ['R', 'L'];
    for s in &t.steps {
        for (i, (re, im)) in amplitudes(&s.state).into_iter().enumerate() {
            let basis = format!("{}-{}{}", atom[i >> 2], photon[(i >> 1) & 1], photon[i & 1]);
            steps.push(vec![s.step.into(), s.label.into(), basis.into(), re.into(), im.into()]);
        }
    }
    let mut output = Table::new("output", &["basis", "real", "imag"]);
    for (i, (re, im)) in amplitudes(&t.output).into_iter().enumerate() {
        output.push(vec![format!("{}{}", photon[i >> 1], photon[i & 1]).into(), re.into(), im.into()]);
    }
    let summary = Table::summary(vec![
        ("input", pair_label(a, b).into()),
        ("outcome", outcome.to_string().into()),
        ("outcome_probability", t.outcome_probability.into()),
        ("feedback_applied", t.feedback_applied.into()),
    ]);
    Ok(vec![summary, steps, output])
}
