//! Command-line front end: reproduces the character/multiplicity tables,
//! runs the equivariance verification suites, trains desk-scale invariant
//! classifiers and emits artifacts (JSON dumps, CSV tensors, PGM images).
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on
//! usage or parse errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use equivar::gcnn;
use equivar::group::StabilizerGroup;
use equivar::hom;
use equivar::io;
use equivar::nn::train::{accuracy, train, SyntheticTask, TrainConfig};
use equivar::nn::transform::transform_input;
use equivar::nn::{
    Boundary, Capsule, FeatureMap, FiberType, LayerSpec, Network, NetworkSpec, NonlinKind, PoolKind,
};
use equivar::rep::{isotypic_decompose, multiplicity, IrrepTable, Representation};
use equivar::verify::verify_network;
use equivar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "equivar",
    version,
    about = "Finite-group equivariant CNN toolkit"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for commands that write files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine-readable JSON reports instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact group data.
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// Representation-theory tables.
    Rep {
        #[command(subcommand)]
        action: RepAction,
    },
    /// Intertwiner space dimension and parameter efficiency.
    Hom {
        #[arg(long)]
        group: String,
        /// Filter-side representation, e.g. `pi0:3`, `filter:3:regular`,
        /// `type:3,0,1,1,2`, `regular`, `trivial`, `irrep:E`.
        #[arg(long)]
        pi: String,
        /// Fiber-side representation, same grammar.
        #[arg(long)]
        rho: String,
    },
    /// Run the layer equivariance suite of a JSON network spec.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        /// Parameter bundle directory (see `train --save`).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Demonstrate the G-CNN / regular-steerable equivalence.
    GcnnEquiv {
        #[arg(long)]
        group: String,
    },
    /// Train a desk-scale invariant classifier on synthetic data.
    Train {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        count: usize,
        /// Directory the trained parameter bundle is written to.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Write the isotypic basis of the canonical filter space as images.
    EmitBasis {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 3)]
        size: usize,
    },
    /// Generate a synthetic dataset as CSV tensors.
    GenData {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        count: usize,
    },
}

#[derive(Subcommand)]
enum GroupAction {
    /// Emit {name, order, element_labels, mul_table} as JSON.
    Dump { name: String },
}

#[derive(Subcommand)]
enum RepAction {
    /// Print irrep characters and the type of the canonical filter space.
    Decompose {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 3)]
        size: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Group {
            action: GroupAction::Dump { ref name },
        } => {
            let group = StabilizerGroup::build(name)?;
            let dump = group.dump();
            println!(
                "{}",
                serde_json::to_string_pretty(&dump).expect("serializable")
            );
            Ok(true)
        }
        Command::Rep {
            action: RepAction::Decompose { ref group, size },
        } => {
            cmd_decompose(group, size, cli.out.as_deref(), cli.json)?;
            Ok(true)
        }
        Command::Hom {
            ref group,
            ref pi,
            ref rho,
        } => {
            cmd_hom(group, pi, rho, cli.out.as_deref(), cli.json)?;
            Ok(true)
        }
        Command::Verify {
            ref spec,
            ref params,
        } => cmd_verify(spec, params.as_deref(), &cli),
        Command::GcnnEquiv { ref group } => cmd_gcnn_equiv(group, cli.seed, cli.json),
        Command::Train {
            ref group,
            window,
            classes,
            epochs,
            lr,
            count,
            ref save,
        } => cmd_train(
            group,
            window,
            classes,
            epochs,
            lr,
            count,
            save.as_deref(),
            &cli,
        ),
        Command::EmitBasis { ref group, size } => {
            let out = cli
                .out
                .as_deref()
                .ok_or_else(|| Error::Parse("emit-basis needs --out <dir>".into()))?;
            cmd_emit_basis(group, size, out)?;
            Ok(true)
        }
        Command::GenData {
            ref group,
            window,
            classes,
            count,
        } => {
            let out = cli
                .out
                .as_deref()
                .ok_or_else(|| Error::Parse("gen-data needs --out <dir>".into()))?;
            cmd_gen_data(group, window, classes, count, cli.seed, out)?;
            Ok(true)
        }
    }
}

fn canonical_pi0(group: &Arc<StabilizerGroup>, size: usize) -> Result<Representation> {
    Representation::filter_space(size, &Representation::trivial(group.clone()))
}

/// Characters in this crate are integers; print them that way so the
/// output is byte-stable.
fn int_chars(rep: &Representation) -> Vec<i64> {
    rep.character().iter().map(|c| c.round() as i64).collect()
}

fn cmd_decompose(group_name: &str, size: usize, out: Option<&Path>, json: bool) -> Result<()> {
    let group = StabilizerGroup::build(group_name)?;
    let table = IrrepTable::for_group(&group)?;
    let pi0 = canonical_pi0(&group, size)?;
    let tv = multiplicity(&pi0, &table)?;

    if json {
        let payload = serde_json::json!({
            "group": group.name,
            "order": group.order,
            "elements": group.element_labels,
            "irreps": table.labels.iter().zip(&table.irreps).map(|(l, r)| serde_json::json!({
                "label": l,
                "dim": r.dim,
                "characters": int_chars(r),
            })).collect::<Vec<_>>(),
            "filter_space": {
                "window": size,
                "dim": pi0.dim,
                "characters": int_chars(&pi0),
                "type": tv.0,
            }
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&payload).expect("serializable")
        );
    } else {
        println!("group {} (order {})", group.name, group.order);
        println!("elements: {}", group.element_labels.join(" "));
        for (label, irrep) in table.labels.iter().zip(&table.irreps) {
            let chars: Vec<String> = int_chars(irrep).iter().map(|c| c.to_string()).collect();
            println!(
                "irrep {:<4} dim {}  chi = [{}]",
                label,
                irrep.dim,
                chars.join(" ")
            );
        }
        let chars: Vec<String> = int_chars(&pi0).iter().map(|c| c.to_string()).collect();
        println!(
            "pi0 on {size}^{} window: dim {} chi = [{}]",
            group.n,
            pi0.dim,
            chars.join(" ")
        );
        let mults: Vec<String> = tv.0.iter().map(|m| m.to_string()).collect();
        println!("type(pi0) = ({})", mults.join(", "));
    }

    if let Some(dir) = out {
        write_basis_files(&group, size, dir)?;
    }
    Ok(())
}

fn parse_type_list(group_name: &str, text: &str) -> Result<Representation> {
    let group = StabilizerGroup::build(group_name)?;
    let table = IrrepTable::for_group(&group)?;
    let mults: Vec<usize> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("type: {e}")))
        })
        .collect::<Result<_>>()?;
    if mults.len() != table.len() {
        return Err(Error::Parse(format!(
            "type lists {} multiplicities, table has {} irreps",
            mults.len(),
            table.len()
        )));
    }
    let parts: Vec<(&Representation, usize)> = table
        .irreps
        .iter()
        .zip(&mults)
        .filter(|(_, m)| **m > 0)
        .map(|(r, m)| (r, *m))
        .collect();
    Representation::direct_sum(&parts)
}

/// Grammar: `trivial` | `regular` | `irrep:<label>` | `quotient:i,j,..`
/// | `type:m1,m2,..` | `pi0:<s>` | `filter:<s>:<fiber spec>`.
fn parse_rep_spec(group_name: &str, text: &str) -> Result<Representation> {
    let group = StabilizerGroup::build(group_name)?;
    match text {
        "trivial" => return Ok(Representation::trivial(group)),
        "regular" => return Ok(Representation::regular(group)),
        _ => {}
    }
    if let Some(rest) = text.strip_prefix("irrep:") {
        let table = IrrepTable::for_group(&group)?;
        let idx = table
            .irrep_index(rest)
            .ok_or_else(|| Error::Parse(format!("no irrep labeled `{rest}`")))?;
        return Ok(table.irreps[idx].clone());
    }
    if let Some(rest) = text.strip_prefix("quotient:") {
        let sub: Vec<usize> = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{e}")))
            })
            .collect::<Result<_>>()?;
        let q = group.cosets(&sub)?;
        return Ok(Representation::quotient(group, &q));
    }
    if let Some(rest) = text.strip_prefix("type:") {
        return parse_type_list(group_name, rest);
    }
    if let Some(rest) = text.strip_prefix("pi0:") {
        let s: usize = rest
            .parse()
            .map_err(|e| Error::Parse(format!("window: {e}")))?;
        return canonical_pi0(&group, s);
    }
    if let Some(rest) = text.strip_prefix("filter:") {
        let (s_text, fiber_text) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse("filter spec is filter:<s>:<fiber>".into()))?;
        let s: usize = s_text
            .parse()
            .map_err(|e| Error::Parse(format!("window: {e}")))?;
        let fiber = parse_rep_spec(group_name, fiber_text)?;
        return Representation::filter_space(s, &fiber);
    }
    Err(Error::Parse(format!(
        "unknown representation spec `{text}`"
    )))
}

fn cmd_hom(
    group: &str,
    pi_spec: &str,
    rho_spec: &str,
    out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let pi = parse_rep_spec(group, pi_spec)?;
    let rho = parse_rep_spec(group, rho_spec)?;
    let by_chars = hom::dim_hom_from_characters(&pi, &rho)?;
    let basis = hom::intertwiner_basis(&pi, &rho)?;
    let mu = if basis.dim() > 0 {
        Some(hom::parameter_efficiency(pi.dim, rho.dim, basis.dim())?)
    } else {
        None
    };
    if json {
        println!(
            "{}",
            serde_json::json!({
                "group": group,
                "dim_pi": pi.dim,
                "dim_rho": rho.dim,
                "dim_hom_characters": by_chars,
                "dim_hom_null_space": basis.dim(),
                "mu": mu,
            })
        );
    } else {
        println!("dim pi  = {}", pi.dim);
        println!("dim rho = {}", rho.dim);
        println!("dim Hom (character formula) = {by_chars}");
        println!("dim Hom (SVD null space)    = {}", basis.dim());
        match mu {
            Some(mu) => println!("parameter efficiency mu = {mu}"),
            None => println!("parameter efficiency mu undefined (zero intertwiner space)"),
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for (k, b) in basis.basis.iter().enumerate() {
            fs::write(dir.join(format!("hom_basis_{k}.csv")), io::matrix_to_csv(b))?;
        }
    }
    Ok(())
}

fn cmd_verify(spec_path: &Path, params: Option<&Path>, cli: &Cli) -> Result<bool> {
    let text = fs::read_to_string(spec_path)?;
    let (spec, input_fiber) = io::network_from_json(&text)?;
    let mut net = Network::synthesize(spec, input_fiber, cli.seed)?;
    if let Some(dir) = params {
        io::load_params(&mut net, dir)?;
    }
    let report = verify_network(&net, cli.seed)?;
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serializable")
        );
    } else {
        for check in &report.checks {
            println!(
                "{:<28} residual {:>12.3e}  tol {:>8.0e}  {}",
                check.name,
                check.residual,
                check.tolerance,
                if check.pass { "PASS" } else { "FAIL" }
            );
        }
        println!(
            "{} checks, seed {}, {} ms: {}",
            report.checks.len(),
            report.seed,
            report.wall_ms,
            if report.passed() {
                "all passed"
            } else {
                "FAILURES"
            }
        );
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report).expect("serializable"),
        )?;
    }
    Ok(report.passed())
}

fn cmd_gcnn_equiv(group_name: &str, seed: u64, json: bool) -> Result<bool> {
    let group = StabilizerGroup::build(group_name)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 5;
    let fiber0 = FiberType::input(group.clone(), 1);
    let mut input = FeatureMap::zeros(w, fiber0, Boundary::Cyclic)?;
    input.fill_random(&mut rng);

    let mut k1 = hom::PlanarKernel::zeros(2, 1, 3, group.n);
    for v in k1.data_mut() {
        *v = rand::Rng::random::<f64>(&mut rng) - 0.5;
    }
    let mut k2 = gcnn::GKernel::zeros(2, 2, group.order, 3, group.n);
    for v in k2.data_mut() {
        *v = rand::Rng::random::<f64>(&mut rng) - 0.5;
    }

    // direct group-convolution route, ReLU between the layers
    let g1 = gcnn::gconv_first(&input, &k1)?;
    let mut g1_act = g1.clone();
    for v in g1_act.data_mut() {
        *v = v.max(0.0);
    }
    let g2 = gcnn::gconv_higher(&g1_act, &k2)?;

    // steerable twin via expanded banks on regular capsules
    let e1 = gcnn::expand_first(&k1, &group)?;
    let reg2 = FiberType::new(vec![(Capsule::regular(group.clone()), 2)])?;
    let s1 = equivar::nn::convolve(&input, &e1, reg2.clone())?;
    let mut s1_act = s1.clone();
    for v in s1_act.data_mut() {
        *v = v.max(0.0);
    }
    let e2 = gcnn::expand_filter_bank(&k2, &group)?;
    let s2 = equivar::nn::convolve(&s1_act, &e2.expanded, reg2)?;

    let r1 = equivar::nn::relative_residual(&gcnn::to_steerable(&g1)?, &s1);
    let r2 = equivar::nn::relative_residual(&gcnn::to_steerable(&g2)?, &s2);
    let tol = 1e-9;
    let pass = r1 <= tol && r2 <= tol;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "group": group.name,
                "layer1_residual": r1,
                "layer2_residual": r2,
                "tolerance": tol,
                "pass": pass,
            })
        );
    } else {
        println!("group {}", group.name);
        println!("layer 1 (gconv_first vs expanded planar): residual {r1:.3e}");
        println!("layer 2 (gconv_higher vs expanded planar): residual {r2:.3e}");
        println!(
            "{}",
            if pass {
                "equivalence holds"
            } else {
                "EQUIVALENCE BROKEN"
            }
        );
    }
    Ok(pass)
}

/// Two equivariant layers ending in regular capsules; the second layer is
/// pointwise for the 3d symmetric groups to keep synthesis quick.
fn default_net(
    group: &Arc<StabilizerGroup>,
    window: usize,
    classes: usize,
    seed: u64,
) -> Result<Network> {
    let input = FiberType::input(group.clone(), 1);
    let reg = FiberType::new(vec![(Capsule::regular(group.clone()), 1)])?;
    let l2_window = if group.n <= 2 { 3 } else { 1 };
    let spec = NetworkSpec {
        map_window: window,
        boundary: Boundary::Cyclic,
        layers: vec![
            LayerSpec {
                window: 3,
                in_fiber: input.clone(),
                out_fiber: reg.clone(),
                nonlin: Some(NonlinKind::Relu),
                pool: None,
            },
            LayerSpec {
                window: l2_window,
                in_fiber: reg.clone(),
                out_fiber: reg,
                nonlin: Some(NonlinKind::Relu),
                pool: Some(PoolKind::FiberMax),
            },
        ],
        n_classes: classes,
    };
    Network::synthesize(spec, input, seed)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    group_name: &str,
    window: usize,
    classes: usize,
    epochs: usize,
    lr: f64,
    count: usize,
    save: Option<&Path>,
    cli: &Cli,
) -> Result<bool> {
    let group = StabilizerGroup::build(group_name)?;
    let task = SyntheticTask::new(group.clone(), window, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let data = task.generate(count, &mut rng)?;
    let test = task.generate(count / 2, &mut rng)?;
    let mut net = default_net(&group, window, classes, cli.seed)?;
    let cfg = TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate: lr,
    };
    let losses = train(&mut net, &data, cfg, &mut rng)?;
    let train_acc = accuracy(&net, &data)?;
    let test_acc = accuracy(&net, &test)?;

    // invariance spot check: transformed test copies score identically
    let mut worst = 0.0f64;
    for (f, _) in test.iter().take(8) {
        let base = net.scores(f)?;
        let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
        for h in 0..group.order {
            let mut t = vec![0i64; group.n];
            t[0] = 1;
            let g = equivar::group::SemidirectElement::new(t, h);
            let scores = net.scores(&transform_input(f, &g)?)?;
            for (a, b) in scores.iter().zip(&base) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }

    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "group": group.name,
                "epoch_losses": losses,
                "train_accuracy": train_acc,
                "test_accuracy": test_acc,
                "invariance_residual": worst,
                "parameters": net.num_params(),
            })
        );
    } else {
        for (i, l) in losses.iter().enumerate() {
            println!("epoch {i}: loss {l:.6}");
        }
        println!("train accuracy {train_acc:.3}, test accuracy {test_acc:.3}");
        println!(
            "{} parameters, score invariance residual {worst:.3e}",
            net.num_params()
        );
    }
    if let Some(dir) = save.or(cli.out.as_deref()) {
        io::save_params(&net, dir)?;
        let json = io::network_to_json(&net.spec, &net.input_fiber);
        fs::write(
            Path::new(dir).join("net.json"),
            serde_json::to_string_pretty(&json).expect("serializable"),
        )?;
    }
    Ok(worst <= 1e-8)
}

fn write_basis_files(group: &Arc<StabilizerGroup>, size: usize, dir: &Path) -> Result<()> {
    let table = IrrepTable::for_group(group)?;
    let pi0 = canonical_pi0(group, size)?;
    let dec = isotypic_decompose(&pi0, &table)?;
    fs::create_dir_all(dir)?;
    let dim = pi0.dim;
    for &(irrep, copy, offset) in &dec.block_layout {
        let d = table.irreps[irrep].dim;
        for comp in 0..d {
            let col = offset + comp;
            let v: Vec<f64> = (0..dim)
                .map(|r| dec.change_of_basis_inv.at(r, col))
                .collect();
            let name = format!("{}_{}_{}", table.labels[irrep], copy, comp);
            let (width, height) = match group.n {
                2 => (size, size),
                3 => (size, size * size),
                n => {
                    return Err(Error::Parse(format!(
                        "no image layout for {n}-dimensional grids"
                    )))
                }
            };
            fs::write(
                dir.join(format!("{name}.pgm")),
                io::to_pgm(width, height, &v),
            )?;
            let csv: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            fs::write(dir.join(format!("{name}.csv")), csv.join(",") + "\n")?;
        }
    }
    Ok(())
}

fn cmd_emit_basis(group_name: &str, size: usize, out: &Path) -> Result<()> {
    let group = StabilizerGroup::build(group_name)?;
    write_basis_files(&group, size, out)?;
    Ok(())
}

fn cmd_gen_data(
    group_name: &str,
    window: usize,
    classes: usize,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let group = StabilizerGroup::build(group_name)?;
    let task = SyntheticTask::new(group, window, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = task.generate(count, &mut rng)?;
    fs::create_dir_all(out)?;
    let mut labels = Vec::with_capacity(count);
    for (i, (f, label)) in data.iter().enumerate() {
        fs::write(
            out.join(format!("sample_{i}.csv")),
            io::feature_map_to_csv(f),
        )?;
        if f.channels() == 1 && f.spatial_dim() == 2 {
            let img = io::to_pgm(f.window, f.window, f.channel(0));
            fs::write(out.join(format!("sample_{i}.pgm")), img)?;
        }
        labels.push(format!("{i},{label}"));
    }
    fs::write(out.join("labels.csv"), labels.join("\n") + "\n")?;
    Ok(())
}
