use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use vfsafs_cli::{parse_fault_arg, run_trace};
use vfsafs_fuse::{MountConfig, UserMapping};

#[derive(Parser)]
#[command(
    name = "vfsafs",
    version,
    about = "Replay operation traces against the vfsafs model, or mount it"
)]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    /// Trace script to replay (stdin when omitted).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    page_size: usize,
    /// `none`, `seed:<s>,p:<prob>[,errs:EIO/ENOSPC/ENOMEM]` or `script:<file>`.
    #[arg(long, default_value = "none")]
    faults: String,
    #[arg(long, value_enum, default_value_t = DumpFormat::Text)]
    dump_format: DumpFormat,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve a fresh model at a host directory until interrupted.
    Mount {
        #[arg(long)]
        mountpoint: PathBuf,
        #[arg(long, default_value_t = 4096)]
        page_size: usize,
        #[arg(long, default_value = "none")]
        faults: String,
        /// Treat every request as this uid (default: the caller's).
        #[arg(long, requires = "gid")]
        uid: Option<u32>,
        #[arg(long, requires = "uid")]
        gid: Option<u32>,
    },
}

fn replay(cli: &Cli) -> anyhow::Result<u8> {
    if cli.page_size == 0 {
        bail!("page size must be positive");
    }
    let plan = parse_fault_arg(&cli.faults)?;
    let script = match &cli.trace {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => std::io::read_to_string(std::io::stdin()).context("reading stdin")?,
    };
    let DumpFormat::Text = cli.dump_format;
    let outcome = run_trace(&script, plan, cli.page_size);
    print!("{}", outcome.transcript);
    Ok(outcome.status.code() as u8)
}

fn mount(
    mountpoint: PathBuf,
    page_size: usize,
    faults: &str,
    user: Option<(u32, u32)>,
) -> anyhow::Result<u8> {
    if page_size == 0 {
        bail!("page size must be positive");
    }
    if !mountpoint.is_dir() {
        bail!("{} is not a directory", mountpoint.display());
    }
    let mut config = MountConfig::new(&mountpoint);
    config.page_size = page_size;
    config.faults = parse_fault_arg(faults)?;
    if let Some((uid, gid)) = user {
        config.users = UserMapping::Fixed { uid, gid };
    }
    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .context("installing signal handler")?;
    log::info!("serving at {}", mountpoint.display());
    vfsafs_fuse::serve(&config, rx)
        .with_context(|| format!("mounting at {}", mountpoint.display()))?;
    log::info!("unmounted {}", mountpoint.display());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Cmd::Mount {
            ref mountpoint,
            page_size,
            ref faults,
            uid,
            gid,
        }) => mount(mountpoint.clone(), page_size, faults, uid.zip(gid)),
        None => replay(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("vfsafs: {e:#}");
            ExitCode::from(1)
        }
    }
}
