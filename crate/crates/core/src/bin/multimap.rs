use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multimap_core::error::{Error, Result};
use multimap_core::io::{self, Config};
use multimap_core::maskgen::{count, make_mask, mean_image};
use multimap_core::phantom::PhantomRecipe;
use multimap_core::pipeline::{self, QuantMaps, MAP_NAMES};
use multimap_core::seqsim::simulate_scan;

#[derive(Parser)]
#[command(name = "multimap", version, about = "Simulate and quantify multiMap scans")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the 22 images of a phantom scan.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Build the foreground mask of an image set.
    Mask {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Precompute the B1 lookup table.
    Lut {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate all parameter maps.
    Estimate {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lut: Option<PathBuf>,
        /// Also write a 16-bit PGM preview of every map.
        #[arg(long)]
        pgm: bool,
    },
    /// Compare estimated maps with the phantom they were simulated from.
    Compare {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        phantom: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Window spanning the valid values inside the mask.
fn pgm_window(maps: &QuantMaps, name: &str) -> Result<(f64, f64)> {
    let m = maps.get(name)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m.values.len() {
        let v = m.values.as_slice()[i];
        if maps.mask.as_slice()[i] && m.valid.as_slice()[i] && v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return Ok((0.0, 1.0));
    }
    if hi <= lo {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return Ok((lo - pad, hi + pad));
    }
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Simulate {
            config,
            out,
            seed,
            noise_sigma,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.scan.seed = s;
            }
            if let Some(s) = noise_sigma {
                cfg.scan.noise_sigma = s;
            }
            cfg.validate()?;
            let recipe = cfg.recipe()?;
            let images = simulate_scan(&recipe.build()?, &cfg.scan_config())?;
            io::write_imageset(&images, &out)?;
            io::save_json(&out.join("phantom.json"), &recipe)?;
            eprintln!("wrote {}x{} image set to {}", images.width(), images.height(), out.display());
        }
        Cmd::Mask { images, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let set = io::read_imageset(&images)?;
            let mask = make_mask(&mean_image(&set), &cfg.mask)?;
            io::write_mask(&out, &mask, &cfg.mask)?;
            eprintln!("mask holds {} of {} pixels", count(&mask), mask.len());
        }
        Cmd::Lut { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let timing = cfg.timing();
            let pulses = cfg.rf.pulses(&timing)?;
            let table = multimap_core::b1map::build_ratio_table(
                &pulses.imaging[0],
                &pulses.imaging[1],
                &cfg.b1.k_grid()?,
                &pulses.z,
            )?;
            io::write_lut(&out, &table, &cfg.rf, &timing)?;
            let last = table.k_samples.last().copied().unwrap_or(f64::NAN);
            eprintln!("table covers B1 scales {} to {last}", table.k_samples[0]);
        }
        Cmd::Estimate {
            images,
            mask,
            out,
            config,
            lut,
            pgm,
        } => {
            let cfg = load_config(config.as_deref())?;
            let set = io::read_imageset(&images)?;
            let mask = match mask {
                Some(p) => io::read_mask(&p)?,
                None => make_mask(&mean_image(&set), &cfg.mask)?,
            };
            let est = cfg.estimate_config();
            let table = lut.map(|p| io::read_lut(&p, &cfg.rf, &set.timing)).transpose()?;
            let maps = pipeline::estimate(&set, &mask, &est, table.as_ref())?;
            io::write_quantmaps(&maps, &out)?;
            if pgm {
                for name in MAP_NAMES {
                    let (lo, hi) = pgm_window(&maps, name)?;
                    io::export_map_pgm(&maps.get(name)?.values, lo, hi, &out.join(format!("{name}.pgm")))?;
                }
            }
            let flagged = maps.warnings.as_slice().iter().filter(|&&w| w != 0).count();
            eprintln!("estimated {} pixels, {flagged} with warnings", count(&mask));
        }
        Cmd::Compare {
            maps,
            phantom,
            mask,
            json,
        } => {
            let est = io::read_quantmaps(&maps)?;
            let recipe: PhantomRecipe = io::read_json(&phantom)?;
            let truth = recipe.build()?;
            let mask = match mask {
                Some(p) => io::read_mask(&p)?,
                None => est.mask.clone(),
            };
            let report = io::compare_maps(&est, &truth, &mask)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
