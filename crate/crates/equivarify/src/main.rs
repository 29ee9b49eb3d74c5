//! `equivarify` command line: group inspection, toy lifts, and the
//! rotated-digit training/evaluation/verification pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use equivarify::action::{rot90_action, GroupAction};
use equivarify::equivarify::{check_equivariance, lift, lift_through_quotient, EquivariantMap};
use equivarify::error::{Error, Result};
use equivarify::group::{FiniteGroup, QuotientGroup, Subgroup};
use equivarify::mnist::config::Config;
use equivarify::mnist::data::{prepare_dataset, LabeledSample};
use equivarify::mnist::netbuild::build_model;
use equivarify::mnist::{evaluate, idx, train, verify_equivariance};
use equivarify::nn::checkpoint;
use equivarify::nn::gradcheck::grad_check;
use equivarify::nn::model::Model;
use equivarify::nn::tensor::Tensor;

#[derive(Parser)]
#[command(name = "equivarify", version, about = "Finite-group equivarification toolkit")]
struct Cli {
    /// Key-value config file overlaying the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch gradient accumulation.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Emit CSV instead of the human-readable report.
    #[arg(long, global = true)]
    csv: bool,
    /// Directory holding the IDX data files. Falls back to
    /// EQUIVARIFY_DATA_DIR, then ./data.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print order, table, inverses and axiom check for a group spec.
    GroupInfo {
        /// cyclic:n, dihedral:n, or file:path
        spec: String,
    },
    /// Demonstrate the unique equivariant lift on a built-in toy.
    DemoLift {
        /// translation, constant, or quotient
        toy: String,
    },
    /// Train the equivariant model and write per-epoch checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test set.
    Eval(CkptArgs),
    /// Verify exact rotation equivariance of a checkpoint.
    Verify(VerifyArgs),
    /// Compare analytic gradients against central differences.
    Gradcheck {
        /// Parameter coordinates to sample.
        #[arg(long, default_value_t = 300)]
        samples: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Output directory for checkpoints.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Config overrides, e.g. --set epochs=3 --set lr=0.01
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct CkptArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config overrides, must match the checkpointed architecture.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of test images to verify.
    #[arg(long, default_value_t = 10)]
    images: usize,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Io(_) | Error::Format(_) => 3u8,
                Error::Config(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

/// Ok(false) means the command ran but its assertion failed (exit 1).
fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve_config(cli, &[])?;
    match &cli.command {
        Command::GroupInfo { spec } => cmd_group_info(spec),
        Command::DemoLift { toy } => cmd_demo_lift(toy),
        Command::Train(args) => {
            let cfg = resolve_config(cli, &args.sets)?;
            cmd_train(cli, &cfg, args)
        }
        Command::Eval(args) => {
            let cfg = resolve_config(cli, &args.sets)?;
            cmd_eval(cli, &cfg, args)
        }
        Command::Verify(args) => {
            let cfg = resolve_config(cli, &args.sets)?;
            cmd_verify(cli, &cfg, args)
        }
        Command::Gradcheck { samples } => cmd_gradcheck(&cfg, *samples),
    }
}

fn resolve_config(cli: &Cli, sets: &[String]) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    cfg.apply_pairs(sets.iter().cloned())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_dir(cli: &Cli) -> PathBuf {
    cli.data_dir
        .clone()
        .or_else(|| std::env::var_os("EQUIVARIFY_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn parse_group_spec(spec: &str) -> Result<FiniteGroup> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("group spec {spec:?}: expected kind:arg")))?;
    match kind {
        "cyclic" => FiniteGroup::cyclic(
            arg.parse()
                .map_err(|_| Error::Config(format!("bad order {arg:?}")))?,
        ),
        "dihedral" => FiniteGroup::dihedral(
            arg.parse()
                .map_err(|_| Error::Config(format!("bad order {arg:?}")))?,
        ),
        "file" => {
            let text = std::fs::read_to_string(arg)?;
            FiniteGroup::from_text_unchecked(&text)
        }
        _ => Err(Error::Config(format!("unknown group kind {kind:?}"))),
    }
}

fn cmd_group_info(spec: &str) -> Result<bool> {
    let group = parse_group_spec(spec)?;
    println!("order: {}", group.order());
    println!("identity: {}", group.element_name(group.identity()));
    println!("\ntable:");
    print!("{}", group.to_text());
    println!("\ninverses:");
    for a in group.elements() {
        println!("  {}^-1 = {}", group.element_name(a), group.element_name(group.inv(a)));
    }
    let report = group.check_axioms();
    if report.is_empty() {
        println!("\naxioms: OK");
        Ok(true)
    } else {
        println!("\naxioms: VIOLATED");
        for v in &report.violations {
            println!("  {v}");
        }
        Ok(false)
    }
}

/// Brute-force uniqueness check over a transitive free toy action on
/// Z/n: every candidate value tuple at the basepoint is extended
/// equivariantly and tested against the projection constraint.
fn uniqueness_verdict(
    group: &Arc<FiniteGroup>,
    action: &GroupAction<usize>,
    f: impl Fn(usize) -> usize,
    points: usize,
) -> Result<usize> {
    let n = group.order();
    let mut survivors = 0;
    // candidate tuples over Z = {0..points}
    let total = points.pow(n as u32);
    for code in 0..total {
        let mut tuple = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            tuple.push(c % points);
            c /= points;
        }
        // extend equivariantly from basepoint 0: H(g·0) = g·tuple,
        // with the induced action (g s)(g') = s(g^-1 g')
        let mut ok = true;
        for g in group.elements() {
            let x = action.apply(g, &0)?;
            // component at identity must be F(x)
            let shifted = tuple[group.mul(group.inv(g), group.identity())];
            if shifted != f(x) {
                ok = false;
                break;
            }
        }
        // equivariance across the orbit also pins every other component
        if ok {
            for g in group.elements() {
                let x = action.apply(g, &0)?;
                for k in group.elements() {
                    let comp = tuple[group.mul(group.inv(g), k)];
                    let expect = f(action.apply(group.inv(k), &x)?);
                    if comp != expect {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
            }
        }
        if ok {
            survivors += 1;
        }
    }
    Ok(survivors)
}

fn print_lift_table(map: &EquivariantMap<usize, usize>, domain: &[usize]) -> Result<()> {
    let group = map.group();
    println!("F̂ componentwise (rows: x; columns: components g_0..g_{}):", group.order() - 1);
    for &x in domain {
        let v = map.forward(&x)?;
        println!("  F̂({x}) = {:?}", v.components());
    }
    println!("equivariance table F̂(g·x) vs g·F̂(x):");
    for &x in domain {
        for g in group.elements() {
            let lhs = map.forward(&map.domain_action().apply(g, &x)?)?;
            let rhs = map.codomain_action().apply(g, &map.forward(&x)?)?;
            let ok = lhs.components() == rhs.components();
            println!(
                "  g={} x={x}: {:?} vs {:?}  {}",
                group.element_name(g),
                lhs.components(),
                rhs.components(),
                if ok { "ok" } else { "MISMATCH" }
            );
            if !ok {
                return Err(Error::Composition("lift not equivariant".into()));
            }
        }
    }
    Ok(())
}

fn translation_action(group: Arc<FiniteGroup>) -> Result<GroupAction<usize>> {
    let n = group.order();
    let transforms = (0..n)
        .map(|g| {
            Arc::new(move |x: &usize| Ok((x + g) % n))
                as Arc<dyn Fn(&usize) -> Result<usize> + Send + Sync>
        })
        .collect();
    GroupAction::from_fns(group, transforms)
}

fn cmd_demo_lift(toy: &str) -> Result<bool> {
    match toy {
        "translation" => {
            let group = Arc::new(FiniteGroup::cyclic(4)?);
            let action = translation_action(Arc::clone(&group))?;
            println!("toy: C4 translation on Z/4, F = identity");
            let map = lift(|x: &usize| Ok(*x), &action);
            let domain: Vec<usize> = (0..4).collect();
            print_lift_table(&map, &domain)?;
            let survivors = uniqueness_verdict(&group, &action, |x| x, 4)?;
            println!("uniqueness: {survivors} equivariant lift(s) over the projection (brute force)");
            Ok(survivors == 1)
        }
        "constant" => {
            let group = Arc::new(FiniteGroup::cyclic(4)?);
            let action = translation_action(Arc::clone(&group))?;
            println!("toy: C4 translation on Z/4, F = constant 2");
            let map = lift(|_: &usize| Ok(2usize), &action);
            let domain: Vec<usize> = (0..4).collect();
            print_lift_table(&map, &domain)?;
            let all_equal = domain.iter().all(|x| {
                let v = map.forward(x).unwrap();
                v.components().iter().all(|&c| c == 2)
            });
            println!("all components equal: {}", if all_equal { "yes" } else { "NO" });
            Ok(all_equal)
        }
        "quotient" => {
            let group = Arc::new(FiniteGroup::cyclic(4)?);
            // C4 acts on Z/2 through C4 / {e, g^2}
            let n = Subgroup::new(Arc::clone(&group), vec![0, 2])?;
            let quotient = QuotientGroup::new(Arc::clone(&group), &n)?;
            let transforms = (0..4)
                .map(|g| {
                    Arc::new(move |x: &usize| Ok((x + g) % 2))
                        as Arc<dyn Fn(&usize) -> Result<usize> + Send + Sync>
                })
                .collect();
            let action = GroupAction::from_fns(Arc::clone(&group), transforms)?;
            println!("toy: C4 acting on Z/2 through C4/{{e,g²}}, F = identity");
            let probes: Vec<usize> = vec![0, 1];
            let map = lift_through_quotient(|x: &usize| Ok(*x), &action, &quotient, &probes)?;
            println!("lift has {} components (|G/N| = 2):", quotient.group().order());
            for x in 0..2usize {
                println!("  F̂({x}) = {:?}", map.forward(&x)?.components());
            }
            let dev = check_equivariance(&map, &probes)?;
            println!("max equivariance deviation over G/N: {dev}");
            Ok(dev == 0.0)
        }
        _ => Err(Error::Config(format!(
            "unknown toy {toy:?}; expected translation, constant, or quotient"
        ))),
    }
}

fn load_split(dir: &Path, train: bool, count: usize) -> Result<Vec<(Tensor, u8)>> {
    let (imgs, lbls) = if train {
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
    } else {
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
    };
    let mut all = idx::load_idx(&dir.join(imgs), &dir.join(lbls))?;
    if count < all.len() {
        all.truncate(count);
    }
    Ok(all)
}

fn build_for(cfg: &Config) -> Result<(Arc<FiniteGroup>, Model)> {
    let group = Arc::new(FiniteGroup::cyclic(4)?);
    let model = build_model(&group, cfg)?;
    Ok((group, model))
}

fn prepared(
    cli: &Cli,
    cfg: &Config,
    train_split: bool,
) -> Result<Vec<LabeledSample>> {
    let group = Arc::new(FiniteGroup::cyclic(4)?);
    let rot = rot90_action(group, 28, 28, 1)?;
    let (count, policy, seed) = if train_split {
        (cfg.train_count, cfg.rotate_train, cfg.seed)
    } else {
        (cfg.test_count, cfg.rotate_test, cfg.seed ^ 0x7e57)
    };
    let raw = load_split(&data_dir(cli), train_split, count)?;
    prepare_dataset(&raw, &rot, policy, seed)
}

fn cmd_train(cli: &Cli, cfg: &Config, args: &TrainArgs) -> Result<bool> {
    println!("resolved config:\n{}", cfg.render());
    let (_, mut model) = build_for(cfg)?;
    println!("parameters: {}", model.param_count());
    let dataset = prepared(cli, cfg, true)?;
    println!("training on {} samples, {} threads", dataset.len(), cli.threads);
    let outcome = train(&mut model, &dataset, cfg, Some(&args.out), cli.threads, |e, l| {
        println!("epoch {e}: mean loss {l:.4}");
    })?;
    let final_path = args.out.join("model.ckpt");
    std::fs::create_dir_all(&args.out)?;
    checkpoint::save(&model, &cfg.render(), &final_path)?;
    println!("final checkpoint: {}", final_path.display());
    if cli.csv {
        println!("epoch,mean_loss");
        for (e, l) in outcome.loss_curve.iter().enumerate() {
            println!("{e},{l:.6}");
        }
    }
    Ok(true)
}

fn cmd_eval(cli: &Cli, cfg: &Config, args: &CkptArgs) -> Result<bool> {
    let (_, mut model) = build_for(cfg)?;
    checkpoint::load_into(&mut model, &args.checkpoint)?;
    let dataset = prepared(cli, cfg, false)?;
    let report = evaluate(&model, &dataset)?;
    if cli.csv {
        print!("{}", report.to_csv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(true)
}

fn cmd_verify(cli: &Cli, cfg: &Config, args: &VerifyArgs) -> Result<bool> {
    let (_, mut model) = build_for(cfg)?;
    if let Some(ckpt) = &args.checkpoint {
        checkpoint::load_into(&mut model, ckpt)?;
    }
    let raw = load_split(&data_dir(cli), false, args.images)?;
    let images: Vec<Tensor> = raw.into_iter().map(|(t, _)| t).collect();
    let report = verify_equivariance(&model, &images)?;
    if cli.csv {
        print!("{}", report.to_csv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(report.all_exact)
}

fn cmd_gradcheck(cfg: &Config, samples: usize) -> Result<bool> {
    let (_, model) = build_for(cfg)?;
    let mut small = cfg.clone();
    small.seed = cfg.seed;
    let _ = small;
    let mut rng_data = vec![0.0f64; 28 * 28];
    // deterministic pseudo-image from the seed
    let mut state = cfg.seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    for v in &mut rng_data {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *v = (state >> 11) as f64 / (1u64 << 53) as f64;
    }
    let x = Tensor::new(vec![28, 28, 1], rng_data)?;
    let target = equivarify::mnist::encode_label(3, 1)?;
    let report = grad_check(&model, &x, &target, 1e-6, samples, cfg.seed)?;
    println!(
        "checked {} coordinates; max relative error {:.3e} (worst: {})",
        report.checked, report.max_rel_error, report.worst_param
    );
    let pass = report.max_rel_error < 1e-5;
    println!("gradcheck: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}
