//! `blochtopo` command-line front end.
//!
//! Exit codes: 0 success, 1 semantic failure (gapless, constraint violated,
//! verification failure), 2 usage or parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use blochtopo::fixtures;
use blochtopo::homotopy::{connectivity_with, witness_with, ConnectivityConfig, WitnessOptions};
use blochtopo::invariants::{classify_with_tol, table_alias, Classification};
use blochtopo::multiband::{embed, open_chain_spectrum, projector_from_hoppings, real_class, reflection_indices};
use blochtopo::symmetry::symmetrize;
use blochtopo::{
    detect, gap, gauge_transform, residual, sample_loop, validate_hoppings, verify_path, Error, HomotopyPath,
    Hoppings, KGrid, SampledLoop, SymmetryClass,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blochtopo", version, about = "Classify gapped two-band Bloch Hamiltonians in one dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared run settings.
#[derive(Args, Clone, Copy)]
struct RunConfig {
    /// k-grid size (even, at least 8).
    #[arg(long = "grid", default_value_t = 256)]
    grid_n: usize,
    /// Symmetry residual tolerance.
    #[arg(long, default_value_t = blochtopo::SYM_TOL, value_parser = positive)]
    tol_sym: f64,
    /// Gap tolerance.
    #[arg(long, default_value_t = blochtopo::GAP_TOL, value_parser = positive)]
    tol_gap: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Label a Hamiltonian within a symmetry class.
    Classify {
        file: PathBuf,
        /// Class tag, or `auto` for the most constrained detected class.
        #[arg(long)]
        symmetry: String,
        /// Project onto the class before classifying.
        #[arg(long)]
        symmetrize: bool,
        /// Tolerance for both residual and gap checks.
        #[arg(long, default_value_t = blochtopo::SYM_TOL, value_parser = positive)]
        tol: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Residual of every symmetry class.
    Symmetries {
        file: PathBuf,
        #[arg(long, default_value_t = blochtopo::SYM_TOL, value_parser = positive)]
        tol: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Raw invariant values behind the label.
    Invariants {
        file: PathBuf,
        #[arg(long)]
        symmetry: String,
        #[arg(long, default_value_t = blochtopo::SYM_TOL, value_parser = positive)]
        tol: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Change the unit cell by `l` sites.
    Gauge {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        l: i64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build and verify a homotopy to the class representative.
    Witness {
        file: PathBuf,
        #[arg(long)]
        symmetry: String,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Check a path file frame by frame.
    VerifyPath {
        path: PathBuf,
        #[arg(long, default_value_t = blochtopo::GAP_TOL, value_parser = positive)]
        tol_gap: f64,
        #[arg(long, default_value_t = blochtopo::SYM_TOL, value_parser = positive)]
        tol_sym: f64,
    },
    /// Sample random class members and group them by witness paths.
    Connectivity {
        #[arg(long)]
        symmetry: String,
        #[arg(long)]
        range: u32,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report samples whose label `R_n` has |n| above this.
        #[arg(long)]
        clip: Option<i64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 128)]
        grid: usize,
    },
    /// Export the curve `k, x, y, z, t` as CSV.
    Loop {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Open-chain spectrum, one eigenvalue per line.
    Chain {
        file: PathBuf,
        #[arg(long)]
        cells: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Real-projector invariant of a real Hamiltonian.
    Fragile {
        file: PathBuf,
        /// Extra unoccupied bands to append.
        #[arg(long, default_value_t = 0)]
        embed: usize,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Negative-parity occupied state counts at k=0 and k=π.
    ReflectionIndex {
        file: PathBuf,
        /// `bond` or `site`.
        #[arg(long)]
        symmetry: String,
        #[arg(long, default_value_t = 1e-9, value_parser = positive)]
        tol: f64,
    },
    /// Write built-in model Hamiltonians as JSON.
    Models {
        /// sigma_x, minus_sigma_x, sigma_z, minus_sigma_z, r, minus_r or ssh.
        #[arg(long, required_unless_present = "all")]
        name: Option<String>,
        /// Winding of `r` and `minus_r`.
        #[arg(long, allow_hyphen_values = true, default_value_t = 1)]
        n: i64,
        /// Staggered potential of `ssh`.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        v: f64,
        #[arg(short, long, required_unless_present = "all")]
        out: Option<PathBuf>,
        /// Write every model into `--out-dir`.
        #[arg(long, requires = "out_dir")]
        all: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

/// Outcome that is not a success but not a usage error either.
#[derive(Debug)]
struct Semantic(String);

impl std::fmt::Display for Semantic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Semantic {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Semantic>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Invalid(_) | Error::InvalidGrid(_) | Error::Json(_) | Error::Io(_) | Error::NotHermitian { .. }) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_hoppings(path: &Path) -> anyhow::Result<Hoppings> {
    let text = fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    let h = Hoppings::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(v) = validate_hoppings(&h).first() {
        return Err(Error::Invalid(format!("{}: {v:?}", path.display())).into());
    }
    Ok(h)
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).map_err(Error::from).with_context(|| format!("writing {}", path.display()))
}

fn parse_class(tag: &str) -> anyhow::Result<SymmetryClass> {
    Ok(tag.parse::<SymmetryClass>()?)
}

/// Most constrained detected class; ties go to the later table entry.
fn pick_auto(detected: &[SymmetryClass]) -> Option<SymmetryClass> {
    detected.iter().copied().filter(|c| c.is_gapped()).rev().max_by_key(|c| c.constraints().len())
}

/// Classifies, refining the grid when a crossing lands too close to the origin.
fn classify_refining(h: &Hoppings, grid: KGrid, cls: SymmetryClass, tol: f64) -> anyhow::Result<Classification> {
    let mut grid = grid;
    for _ in 0..6 {
        let lp = sample_loop(h, grid)?;
        match classify_with_tol(&lp, cls, tol) {
            Err(Error::TangentialCrossing { .. }) => grid = grid.doubled(),
            r => return Ok(r?),
        }
    }
    Ok(classify_with_tol(&sample_loop(h, grid)?, cls, tol)?)
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Classify { file, symmetry, symmetrize: sym, tol, grid } => {
            let mut h = read_hoppings(&file)?;
            let grid = KGrid::new(grid)?;
            let cls = if symmetry == "auto" {
                let detected = detect(&sample_loop(&h, grid)?, tol);
                let tags: Vec<_> = detected.iter().map(|c| c.tag()).collect();
                println!("detected={}", tags.join(","));
                pick_auto(&detected).ok_or_else(|| Semantic("no gapped symmetry class detected".into()))?
            } else {
                parse_class(&symmetry)?
            };
            if sym {
                h = symmetrize(&h, cls);
            }
            println!("class={cls}");
            let c = classify_refining(&h, grid, cls, tol)?;
            println!("gap={:.6e}", c.gap);
            for (name, value) in &c.invariants {
                println!("{name}={value}");
            }
            println!("label={}", c.label);
            if let Some(alias) = table_alias(cls) {
                println!("alias={alias}");
            }
        }
        Command::Symmetries { file, tol, grid } => {
            let lp = sample_loop(&read_hoppings(&file)?, KGrid::new(grid)?)?;
            for cls in SymmetryClass::ALL {
                let r = residual(&lp, cls).max();
                println!("{cls} residual={r:.3e} {}", if r <= tol { "pass" } else { "fail" });
            }
        }
        Command::Invariants { file, symmetry, tol, grid } => {
            let c = classify_refining(&read_hoppings(&file)?, KGrid::new(grid)?, parse_class(&symmetry)?, tol)?;
            println!("gap={:.6e}", c.gap);
            for (name, value) in &c.invariants {
                println!("{name}={value}");
            }
        }
        Command::Gauge { file, l, out } => {
            let g = gauge_transform(&read_hoppings(&file)?, l);
            write_out(&out, &g.to_json()?)?;
            println!("l={l}");
            println!("range={}", g.range());
        }
        Command::Witness { file, symmetry, out, seed, run } => {
            let cls = parse_class(&symmetry)?;
            let lp = sample_loop(&read_hoppings(&file)?, KGrid::new(run.grid_n)?)?;
            let opts = WitnessOptions { seed, tol_gap: run.tol_gap, tol_sym: run.tol_sym, ..WitnessOptions::default() };
            let path = witness_with(&lp, cls, &opts)?;
            write_out(&out, &path.to_json()?)?;
            println!("{}", verify_path(&path, run.tol_gap, run.tol_sym));
        }
        Command::VerifyPath { path, tol_gap, tol_sym } => {
            let text = fs::read_to_string(&path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
            let p = HomotopyPath::from_json(&text)?;
            let report = verify_path(&p, tol_gap, tol_sym);
            println!("{report}");
            if !report.pass {
                return Err(Semantic("path verification failed".into()).into());
            }
        }
        Command::Connectivity { symmetry, range, samples, seed, clip, jobs, grid } => {
            let cls = parse_class(&symmetry)?;
            if !cls.is_gapped() {
                return Err(Semantic(format!("{cls} admits no gapped Hamiltonians")).into());
            }
            KGrid::new(grid)?;
            let cfg = ConnectivityConfig {
                clip: clip.unwrap_or(i64::MAX),
                jobs,
                grid_n: grid,
                ..ConnectivityConfig::new(cls, range, samples, seed)
            };
            let report = connectivity_with(&cfg)?;
            println!("{report}");
            if !report.is_consistent() {
                return Err(Semantic("components disagree with labels".into()).into());
            }
        }
        Command::Loop { file, out, grid } => {
            let lp = sample_loop(&read_hoppings(&file)?, KGrid::new(grid)?)?;
            emit(out.as_deref(), &lp.to_csv())?;
            report_loop(&lp);
        }
        Command::Chain { file, cells, out } => {
            if cells == 0 {
                return Err(Error::Invalid("--cells must be positive".into()).into());
            }
            let s = open_chain_spectrum(&read_hoppings(&file)?, cells)?;
            emit(out.as_deref(), &s.to_csv())?;
        }
        Command::Fragile { file, embed: extra, grid } => {
            let p = projector_from_hoppings(&read_hoppings(&file)?, KGrid::new(grid)?)?;
            println!("{}", real_class(&embed(&p, extra))?);
        }
        Command::ReflectionIndex { file, symmetry, tol } => {
            let cls = match symmetry.as_str() {
                "bond" => SymmetryClass::Bond,
                "site" => SymmetryClass::Site,
                other => return Err(Error::Invalid(format!("reflection must be bond or site, got '{other}'")).into()),
            };
            println!("{}", reflection_indices(&read_hoppings(&file)?, cls, tol)?);
        }
        Command::Models { name, n, v, out, all, out_dir } => {
            if all {
                let dir = out_dir.expect("required by clap");
                fs::create_dir_all(&dir).map_err(Error::from)?;
                for (file, h) in all_models(v) {
                    write_out(&dir.join(format!("{file}.json")), &h.to_json()?)?;
                    println!("wrote={}", dir.join(format!("{file}.json")).display());
                }
            } else {
                let name = name.expect("required by clap");
                let h = model(&name, n, v)?;
                write_out(&out.expect("required by clap"), &h.to_json()?)?;
                println!("model={}", h.name);
            }
        }
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_out(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_loop(lp: &SampledLoop) {
    let g = gap(lp);
    eprintln!("grid_n={} gap={:.6e}", lp.n(), g.min);
}

fn model(name: &str, n: i64, v: f64) -> anyhow::Result<Hoppings> {
    Ok(match name {
        "sigma_x" => fixtures::sigma_x(),
        "minus_sigma_x" => fixtures::minus_sigma_x(),
        "sigma_z" => fixtures::sigma_z(),
        "minus_sigma_z" => fixtures::minus_sigma_z(),
        "r" => fixtures::r_n(n),
        "minus_r" => fixtures::signed_r(-1.0, n),
        "ssh" => fixtures::ssh(v),
        other => return Err(Error::Invalid(format!("unknown model '{other}'")).into()),
    })
}

fn all_models(v: f64) -> Vec<(String, Hoppings)> {
    let mut out = vec![
        ("sigma_x".to_string(), fixtures::sigma_x()),
        ("minus_sigma_x".to_string(), fixtures::minus_sigma_x()),
        ("sigma_z".to_string(), fixtures::sigma_z()),
        ("minus_sigma_z".to_string(), fixtures::minus_sigma_z()),
        ("ssh".to_string(), fixtures::ssh(v)),
    ];
    for n in -3..=3 {
        out.push((format!("r_{n}"), fixtures::r_n(n)));
        out.push((format!("minus_r_{n}"), fixtures::signed_r(-1.0, n)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_prefers_more_constraints() {
        let picked = pick_auto(&[SymmetryClass::None, SymmetryClass::Site, SymmetryClass::SiteAndTheta]);
        assert_eq!(picked, Some(SymmetryClass::SiteAndTheta));
        assert_eq!(pick_auto(&[SymmetryClass::ThetaMinus]), None);
    }

    #[test]
    fn models_are_valid() {
        for (_, h) in all_models(0.5) {
            assert!(validate_hoppings(&h).is_empty(), "{}", h.name);
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
