//! Command line and HTTP front end for `centralpath`.
//!
//! [`run`] parses arguments, dispatches a subcommand and maps the outcome to
//! an exit code: 0 on success, 1 for usage or input errors, 2 when the
//! numerical machinery fails. Diagnostics go to standard error.

pub mod args;
pub mod commands;
pub mod error;
pub mod server;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

use centralpath::compose::{self, SamplerSpec, SceneSpec};
use centralpath::geometry::LeafSpec;
use centralpath::model::ProblemFile;
use centralpath::svg::SvgOptions;

use crate::args::{Cli, Command, SceneSource};
use crate::commands::MeshParams;
pub use crate::error::CliError;

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                // help requested by omitting the subcommand is still a usage error
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes to `path`, or standard output when absent.
fn write(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn load_scene(src: &SceneSource) -> Result<SceneSpec, CliError> {
    match (&src.spec, &src.preset) {
        (Some(path), _) => Ok(SceneSpec::from_json(&read(path)?)?),
        (None, Some(name)) => Ok(compose::preset(name)?.spec),
        (None, None) => Err(CliError::Usage("one of --spec or --preset is required".into())),
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Trace(a) => {
            let problem: ProblemFile = serde_json::from_str(&read(&a.problem)?)?;
            let file = commands::trace(&problem, &a.sampler.over(SamplerSpec::default()))?;
            write(a.output.as_deref(), commands::to_json(&file).as_bytes())
        }
        Command::Scene(a) => {
            let mut spec = load_scene(&a.source)?;
            spec.sampler = a.sampler.over(spec.sampler);
            let opts = SvgOptions {
                page: a.page_width.zip(a.page_height).map(|(w, h)| [w, h]),
                ..SvgOptions::default()
            };
            let svg = commands::render_scene(&spec, &opts)?;
            write(a.output.as_deref(), svg.as_bytes())
        }
        Command::Mesh(a) => {
            let mut spec = load_scene(&a.source)?;
            spec.sampler = a.sampler.over(spec.sampler);
            let params = MeshParams {
                mode: a.mode,
                radius: a.radius,
                segments: a.segments,
                height: a.height,
                width: a.width,
                format: if a.ascii {
                    centralpath::mesh::StlFormat::Ascii
                } else {
                    centralpath::mesh::StlFormat::Binary
                },
            };
            let stl = commands::mesh_scene(&spec, &params)?;
            write(Some(&a.output), &stl)
        }
        Command::Leaves(a) => {
            let mut spec = LeafSpec::new(a.k, a.eta, a.seed);
            if let Some(s) = a.sigma {
                spec.sigma = s;
            }
            if let Some(p) = a.paths {
                let [lo, hi] = p[..] else {
                    return Err(CliError::Usage("--paths takes MIN,MAX".into()));
                };
                spec.paths_per_leaf = [lo, hi];
            }
            let file = commands::leaves(&spec)?;
            write(a.output.as_deref(), commands::to_json(&file).as_bytes())
        }
        Command::Solids(a) => {
            let solid = match (&a.source.name, &a.source.vertices) {
                (Some(name), _) => commands::named_solid(name)?,
                (None, Some(path)) => commands::solid_from_json(&read(path)?)?,
                (None, None) => return Err(CliError::Usage("one of --name or --vertices is required".into())),
            };
            let report = commands::solid_report(&solid)?;
            write(a.output.as_deref(), commands::to_json(&report).as_bytes())
        }
        Command::Preset(a) => {
            let text = match a.name {
                Some(name) => compose::preset(&name)?.spec.to_json() + "\n",
                None => compose::PRESET_NAMES.join("\n") + "\n",
            };
            write(a.output.as_deref(), text.as_bytes())
        }
        Command::Serve(a) => {
            let ip: IpAddr = a
                .host
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid host address {:?}", a.host)))?;
            let addr = SocketAddr::new(ip, a.port);
            if let Some(dir) = &a.static_dir {
                if !dir.is_dir() {
                    return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
                }
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("<runtime>", e))?;
            rt.block_on(server::serve(addr, a.static_dir))
                .map_err(|e| CliError::io(addr.to_string(), e))
        }
    }
}
