//! `promptseg` command line.
//!
//! Client verbs share a state directory holding the current session
//! (token, image, segments), so consecutive invocations continue one session.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use promptseg_core::{encode_svol, Axis, Dims, Polarity, Prompt, Radius, VoxelCoord};

use crate::client::{decode_reply, ClientError, ClientSession, ConfigStore, PromptOutcome};
use crate::io::{load_volume, mask_to_svol, VolumeFormat};
use crate::script::{replay, PromptScript, ScriptError};
use crate::server::{self, ServerConfig};

pub const STATE_ENV: &str = "PROMPTSEG_STATE";

#[derive(Debug, Parser)]
#[command(name = "promptseg", version, about = "Interactive 3D segmentation prompt-session server and client")]
pub struct Cli {
    /// Directory holding the current client session.
    #[arg(long, global = true, env = STATE_ENV)]
    pub state: Option<PathBuf>,
    /// Client config file (remembers the server URL).
    #[arg(long, global = true, env = crate::client::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the prompt-session server.
    Serve(ServeArgs),
    /// Open a session; the URL is remembered for later invocations.
    Connect(ServerArg),
    /// Load a .svol, .nii or .nii.gz image and sync it to the server.
    Load { path: PathBuf },
    /// Point prompt at voxel I J K.
    Point {
        #[arg(num_args = 3, value_names = ["I", "J", "K"], required = true)]
        coord: Vec<u32>,
        #[arg(long)]
        negative: bool,
    },
    /// Box prompt between two corners (inclusive).
    Bbox {
        #[arg(num_args = 6, value_names = ["I0", "J0", "K0", "I1", "J1", "K1"], required = true)]
        corners: Vec<u32>,
        #[arg(long)]
        negative: bool,
    },
    /// Scribble through voxels given as i,j,k.
    Scribble {
        #[arg(required = true, value_name = "I,J,K")]
        points: Vec<Triple>,
        #[arg(long)]
        negative: bool,
    },
    /// Lasso polygon on one slice; vertices given as a,b plane coordinates
    /// (put negative ones after `--`).
    Lasso {
        #[arg(long, value_parser = parse_axis)]
        axis: Axis,
        #[arg(long, allow_hyphen_values = true)]
        slice: i64,
        #[arg(required = true, value_name = "A,B")]
        vertices: Vec<Pair>,
        #[arg(long)]
        negative: bool,
    },
    /// Clear the active segment on both ends.
    Reset,
    /// Start a new empty segment.
    Next,
    /// Make segment INDEX (0-based) active.
    Switch { index: usize },
    /// Download the server mask and write it as a 0/1 U8 SVOL1 file.
    Fetch { out: PathBuf },
    /// Replay a PromptScript in a fresh session.
    Replay {
        script: PathBuf,
        #[command(flatten)]
        server: ServerArg,
    },
    /// Show local and server session state.
    Status,
    /// Write the synthetic test volume.
    Phantom {
        out: PathBuf,
        #[arg(long, default_value = "40,32,16", value_name = "NX,NY,NZ")]
        dims: Triple,
    },
}

#[derive(Debug, Args)]
pub struct ServerArg {
    /// Server URL; defaults to the remembered one.
    #[arg(long, env = "PROMPTSEG_SERVER")]
    pub server: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PROMPTSEG_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "PROMPTSEG_PORT", default_value_t = server::DEFAULT_PORT)]
    pub port: u16,
    /// Largest accepted image, in voxels.
    #[arg(long, env = "PROMPTSEG_MAX_VOXELS", default_value_t = server::DEFAULT_MAX_VOXELS)]
    pub max_voxels: u64,
    #[arg(long, env = "PROMPTSEG_SESSION_TTL_SECONDS", default_value_t = server::DEFAULT_TTL.as_secs())]
    pub session_ttl_seconds: u64,
    #[arg(long, env = "PROMPTSEG_MAX_SESSIONS", default_value_t = server::DEFAULT_MAX_SESSIONS)]
    pub max_sessions: usize,
    /// Region-growing intensity tolerance.
    #[arg(long, env = "PROMPTSEG_TOLERANCE", default_value_t = promptseg_core::SegmenterParams::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Region-growing step limit, or "unbounded".
    #[arg(long, env = "PROMPTSEG_RADIUS", default_value = "unbounded", value_parser = parse_radius)]
    pub radius: Radius,
}

impl ServeArgs {
    pub fn to_config(&self) -> Result<ServerConfig> {
        let params = promptseg_core::SegmenterParams::new(self.tolerance, self.radius).map_err(|e| anyhow!("{e}"))?;
        if self.max_sessions == 0 {
            bail!("--max-sessions must be at least 1");
        }
        Ok(ServerConfig {
            host: self.host.clone(),
            port: self.port,
            max_voxels: self.max_voxels,
            session_ttl: Duration::from_secs(self.session_ttl_seconds),
            max_sessions: self.max_sessions,
            params,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple(pub [u32; 3]);

impl FromStr for Triple {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        <[u32; 3]>::try_from(v).map(Triple).map_err(|_| format!("{s:?}: expected three comma-separated integers"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub [f64; 2]);

impl FromStr for Pair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        <[f64; 2]>::try_from(v).map(Pair).map_err(|_| format!("{s:?}: expected two comma-separated numbers"))
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(format!("{s:?}: expected x, y or z")),
    }
}

pub fn parse_radius(s: &str) -> Result<Radius, String> {
    if s.eq_ignore_ascii_case("unbounded") {
        return Ok(Radius::Unbounded);
    }
    s.parse().map(Radius::Steps).map_err(|_| format!("{s:?}: expected a step count or \"unbounded\""))
}

fn polarity(negative: bool) -> Polarity {
    if negative {
        Polarity::Negative
    } else {
        Polarity::Positive
    }
}

fn default_state_dir() -> Result<PathBuf> {
    dirs::data_local_dir()
        .map(|d| d.join("promptseg").join("session"))
        .ok_or_else(|| anyhow!("no user data directory; pass --state"))
}

struct Ctx {
    state: PathBuf,
    store: ConfigStore,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let state = match &cli.state {
            Some(p) => p.clone(),
            None => default_state_dir()?,
        };
        let store = match &cli.config {
            Some(p) => ConfigStore::at(p),
            None => ConfigStore::user_default(),
        };
        Ok(Ctx { state, store })
    }

    fn server_url(&self, arg: &ServerArg) -> Result<String> {
        if let Some(s) = &arg.server {
            return Ok(s.clone());
        }
        self.store
            .load()
            .context("reading client config")?
            .server_url
            .ok_or_else(|| anyhow!("no server URL given and none remembered; pass --server"))
    }

    fn session(&self) -> Result<ClientSession> {
        Ok(ClientSession::load_state(&self.state)?)
    }

    fn save(&self, s: &ClientSession) -> Result<()> {
        s.save_state(&self.state).with_context(|| format!("saving session to {}", self.state.display()))
    }
}

/// Runs `op`; if the server forgot the session, recovers once and retries.
fn with_recovery<T>(s: &mut ClientSession, mut op: impl FnMut(&mut ClientSession) -> Result<T, ClientError>) -> Result<T> {
    match op(s) {
        Err(ClientError::SessionLost) => {
            let n = s.recover()?;
            eprintln!("note: server session was lost; opened a new one and replayed {n} prompt(s)");
            Ok(op(s)?)
        }
        r => Ok(r?),
    }
}

fn describe(o: &PromptOutcome) -> String {
    let mut s = format!("changed {} voxel(s), revision {}, mask {}", o.changed_voxels, o.revision, o.mask_digest);
    if o.sync.image_uploaded || o.sync.mask_uploaded {
        s += &format!(" [uploaded image: {}, mask: {}]", o.sync.image_uploaded, o.sync.mask_uploaded);
    }
    if let Some(r) = &o.retry {
        s += &format!(" [retried after {}]", r.reason);
    }
    s
}

fn load_for_cli(path: &Path) -> Result<promptseg_core::Volume3D, String> {
    let v = load_volume(path)?;
    if VolumeFormat::of_path(path) == Some(VolumeFormat::Nifti) {
        eprintln!("note: NIfTI scl_slope/scl_inter are ignored; stored voxel values are used as-is");
    }
    Ok(v)
}

fn prompt_cmd(ctx: &Ctx, prompt: Prompt) -> Result<()> {
    let mut s = ctx.session()?;
    let out = with_recovery(&mut s, |s| s.prompt(prompt.clone()));
    ctx.save(&s)?;
    let out = out?;
    let name = s.active_segment().map(|g| g.name().to_string()).unwrap_or_default();
    println!("{name}: {}", describe(&out));
    Ok(())
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Command::Serve(args) = &cli.command {
        let config = args.to_config()?;
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
            eprintln!("promptseg serving on http://{}", listener.local_addr()?);
            server::serve(listener, config, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
        })?;
        return Ok(ExitCode::SUCCESS);
    }
    if let Command::Phantom { out, dims } = &cli.command {
        let [nx, ny, nz] = dims.0;
        let d = Dims::new(nx, ny, nz);
        if d.has_zero() {
            bail!("phantom dims must be positive");
        }
        std::fs::write(out, encode_svol(&crate::phantom::phantom(d)))?;
        println!("wrote {}", out.display());
        return Ok(ExitCode::SUCCESS);
    }

    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Serve(_) | Command::Phantom { .. } => unreachable!("handled above"),
        Command::Connect(arg) => {
            let url = ctx.server_url(&arg)?;
            let s = ClientSession::connect_with(&url, &ctx.store)?;
            ctx.save(&s)?;
            println!("connected to {url}, session {}", s.token());
        }
        Command::Load { path } => {
            let vol = load_for_cli(&path).map_err(|e| anyhow!(e))?;
            let mut s = ctx.session()?;
            s.load_image(vol);
            let r = with_recovery(&mut s, |s| s.ensure_synced());
            ctx.save(&s)?;
            let r = r?;
            let img = s.image().expect("just loaded");
            println!(
                "loaded {} {:?} {:?}, digest {} (uploaded: {})",
                path.display(),
                img.dims().as_array(),
                img.dtype(),
                s.image_digest().expect("just loaded"),
                r.image_uploaded
            );
        }
        Command::Point { coord, negative } => {
            prompt_cmd(&ctx, Prompt::point(VoxelCoord::new(coord[0], coord[1], coord[2]), polarity(negative)))?
        }
        Command::Bbox { corners, negative } => {
            let c = &corners;
            prompt_cmd(
                &ctx,
                Prompt::bbox(VoxelCoord::new(c[0], c[1], c[2]), VoxelCoord::new(c[3], c[4], c[5]), polarity(negative)),
            )?
        }
        Command::Scribble { points, negative } => prompt_cmd(
            &ctx,
            Prompt::scribble(points.iter().map(|t| VoxelCoord::from(t.0)).collect(), polarity(negative)),
        )?,
        Command::Lasso { axis, slice, vertices, negative } => prompt_cmd(
            &ctx,
            Prompt::lasso(axis, slice, vertices.iter().map(|p| p.0).collect(), polarity(negative)),
        )?,
        Command::Reset => {
            let mut s = ctx.session()?;
            let r = with_recovery(&mut s, |s| s.reset_segment());
            ctx.save(&s)?;
            r?;
            println!("{} cleared", s.active_segment().expect("reset needs a segment").name());
        }
        Command::Next => {
            let mut s = ctx.session()?;
            let r = with_recovery(&mut s, |s| s.next_segment());
            ctx.save(&s)?;
            let i = r?;
            println!("{} (index {i}) is active", s.segments()[i].name());
        }
        Command::Switch { index } => {
            let mut s = ctx.session()?;
            s.switch_segment(index)?;
            ctx.save(&s)?;
            println!("{} (index {index}) is active", s.segments()[index].name());
        }
        Command::Fetch { out } => {
            let mut s = ctx.session()?;
            let reply = with_recovery(&mut s, |s| {
                s.ensure_synced()?;
                s.fetch_mask()
            });
            ctx.save(&s)?;
            let reply = reply?;
            let mask = decode_reply(&reply)?;
            std::fs::write(&out, mask_to_svol(&mask, s.image().ok_or(ClientError::NoImage)?))?;
            println!(
                "wrote {} ({} voxel(s) set, digest {}, revision {})",
                out.display(),
                mask.count_ones(),
                reply.digest,
                reply.revision
            );
        }
        Command::Replay { script, server } => {
            let url = ctx.server_url(&server)?;
            let script = PromptScript::from_file(&script)?;
            let mut s = ClientSession::connect_with(&url, &ctx.store)?;
            match replay(&script, &mut s, &load_for_cli) {
                Ok(report) => {
                    for (i, (seg, d)) in s.segments().iter().zip(&report.segment_digests).enumerate() {
                        println!("{i} {:<12} {d}", seg.name());
                    }
                    println!("ok: {} expectation(s) held", report.expectations_checked);
                }
                Err(ScriptError::Mismatch(m)) => {
                    eprintln!("{m}");
                    return Ok(ExitCode::FAILURE);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Status => {
            let s = ctx.session()?;
            println!("server   {}", s.server_url());
            println!("session  {}", s.token());
            match s.image() {
                Some(img) => println!(
                    "image    {:?} {:?} {}",
                    img.dims().as_array(),
                    img.dtype(),
                    s.image_digest().expect("image present")
                ),
                None => println!("image    none"),
            }
            for (i, g) in s.segments().iter().enumerate() {
                let mark = if s.active_index() == Some(i) { '*' } else { ' ' };
                println!("{mark}{i} {:<12} {} ({} prompt(s))", g.name(), g.digest(), g.log().len());
            }
            match s.remote_status() {
                Ok(st) => println!(
                    "remote   revision {}, {} prompt(s), mask {}",
                    st.revision,
                    st.prompt_count,
                    st.mask_digest.map(|d| d.to_string()).unwrap_or_else(|| "-".into())
                ),
                Err(e) => println!("remote   {e}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
