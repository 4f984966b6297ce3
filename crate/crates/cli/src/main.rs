use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use blossomless::cardinality::solve_basic_counted;
use blossomless::hk::solve_hk_with_stats;
use blossomless::oracle::gen_random;
use blossomless::{
    emit_dimacs, format_certificate, format_matching, parse_certificate, parse_dimacs,
    parse_matching, solve_weighted, validate_matching, verify_certificate, DirectedMatchingGraph,
    Graph, Matching,
};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "matching", version, about = "Maximum matching in general graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DIMACS instance (`-` reads stdin).
    #[command(group(ArgGroup::new("objective").required(true).args(["cardinality", "weighted"])))]
    Solve {
        #[arg(long)]
        cardinality: bool,
        #[arg(long)]
        weighted: bool,
        #[arg(long, value_enum, default_value_t = Algo::Hk)]
        algo: Algo,
        /// Where to write the dual certificate (weighted only).
        #[arg(long, requires = "weighted")]
        cert: Option<PathBuf>,
        file: PathBuf,
    },
    /// Check a matching, and its optimality when a certificate is given.
    Verify {
        file: PathBuf,
        #[arg(long)]
        matching: PathBuf,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Print a seeded random instance.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        max_weight: u64,
    },
    /// Run one solver and print its statistics as key=value lines.
    Bench {
        #[arg(long, value_enum)]
        algo: BenchAlgo,
        file: PathBuf,
    },
    /// Dump the directed reachability graph as DOT.
    Dot {
        file: PathBuf,
        /// Matching to build the graph for (empty by default).
        #[arg(long)]
        matching: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Basic,
    Hk,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchAlgo {
    Basic,
    Hk,
    Weighted,
}

/// Failure classes mapped onto the exit-code contract.
enum Failure {
    Input(anyhow::Error),
    Rejected(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let result = run(cli.command, &mut out);
    let _ = io::stdout().write_all(out.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected(msg)) => {
            eprintln!("rejected: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    let text = read_input(path)?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cmd: Command, out: &mut String) -> Result<(), Failure> {
    match cmd {
        Command::Solve { weighted, algo, cert, file, .. } => {
            let g = read_graph(&file)?;
            if weighted {
                let sol = solve_weighted(&g).map_err(anyhow::Error::from)?;
                writeln!(out, "{}", format_matching(&g, &sol.matching)).unwrap();
                if let Some(path) = cert {
                    fs::write(&path, format_certificate(&sol.duals))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            } else {
                let m = match algo {
                    Algo::Basic => solve_basic_counted(&g, &Matching::empty(g.n())).0,
                    Algo::Hk => solve_hk_with_stats(&g).0,
                };
                writeln!(out, "{}", format_matching(&g, &m)).unwrap();
            }
        }
        Command::Verify { file, matching, cert } => {
            let g = read_graph(&file)?;
            let text = read_input(&matching)?;
            let edges = match parse_matching(&g, &text) {
                Ok(edges) => edges,
                Err(e @ blossomless::ParseError::UnknownEdge { .. }) => {
                    return Err(Failure::Rejected(e.to_string()))
                }
                Err(e) => return Err(anyhow::Error::from(e).context("parsing matching").into()),
            };
            let m = validate_matching(&g, &edges).map_err(|e| Failure::Rejected(e.to_string()))?;
            if let Some(path) = cert {
                let duals = parse_certificate(g.n(), &read_input(&path)?)
                    .map_err(anyhow::Error::from)
                    .context("parsing certificate")?;
                let report = verify_certificate(&g, &m, &duals);
                if !report.is_valid() {
                    return Err(Failure::Rejected(report.violations.join("; ")));
                }
                writeln!(out, "optimal {}", m.weight(&g)).unwrap();
            } else {
                writeln!(out, "valid {}", m.len()).unwrap();
            }
        }
        Command::Gen { nodes, edges, seed, max_weight } => {
            let g = gen_random(nodes, edges, seed, max_weight).map_err(anyhow::Error::from)?;
            writeln!(out, "{}", emit_dimacs(&g)).unwrap();
        }
        Command::Bench { algo, file } => {
            let g = read_graph(&file)?;
            bench(algo, &g, out)?;
        }
        Command::Dot { file, matching } => {
            let g = read_graph(&file)?;
            let m = match matching {
                None => Matching::empty(g.n()),
                Some(path) => {
                    let edges = parse_matching(&g, &read_input(&path)?).map_err(anyhow::Error::from)?;
                    validate_matching(&g, &edges).map_err(|e| Failure::Rejected(e.to_string()))?
                }
            };
            writeln!(out, "{}", DirectedMatchingGraph::build(&g, &m).to_dot()).unwrap();
        }
    }
    Ok(())
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn bench(algo: BenchAlgo, g: &Graph, out: &mut String) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut kv: Vec<(&str, String)> = Vec::new();
    match algo {
        BenchAlgo::Basic => {
            let (m, augs) = solve_basic_counted(g, &Matching::empty(g.n()));
            kv.push(("algorithm", "basic".into()));
            kv.push(("cardinality", m.len().to_string()));
            kv.push(("augmentations", augs.to_string()));
        }
        BenchAlgo::Hk => {
            let (m, st) = solve_hk_with_stats(g);
            kv.push(("algorithm", "hk".into()));
            kv.push(("cardinality", m.len().to_string()));
            kv.push(("augmentations", m.len().to_string()));
            kv.push(("phases", st.phases.to_string()));
            kv.push(("paths_per_phase", join(&st.paths_per_phase)));
            kv.push(("length_per_phase", join(&st.length_per_phase)));
        }
        BenchAlgo::Weighted => {
            let sol = solve_weighted(g)?;
            kv.push(("algorithm", "weighted".into()));
            kv.push(("cardinality", sol.matching.len().to_string()));
            kv.push(("weight", sol.matching.weight(g).to_string()));
            kv.push(("augmentations", sol.stats.augmentations.to_string()));
            kv.push(("dual_changes_per_round", join(&sol.stats.dual_changes_per_round)));
            kv.push(("max_round_changes", sol.stats.max_round_changes().to_string()));
        }
    }
    kv.push(("wall_ms", start.elapsed().as_millis().to_string()));
    kv.insert(1, ("nodes", g.n().to_string()));
    kv.insert(2, ("edges", g.m().to_string()));
    for (k, v) in kv {
        writeln!(out, "{k}={v}").unwrap();
    }
    Ok(())
}
