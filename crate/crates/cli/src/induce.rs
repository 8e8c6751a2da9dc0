use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use structformer::depfn::DepMatrix;
use structformer::induction::{distances_to_tree, heights_and_tree_to_dep};
use structformer::model::{encoder_forward, load_checkpoint, Arch, ModelState};
use structformer::treebank::bpe::strip_marker;
use structformer::treebank::{emit_bracket, emit_conll, ConllSentence, Vocab};
use structformer::{ConstTree, SyntaxProfile, TokenSeq};

use crate::io::{read_sentences, read_text, write_file, write_lines};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const TREES_FILE: &str = "induced.trees";
pub const CONLL_FILE: &str = "induced.conll";

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[arg(long, required_unless_present = "from_profile")]
    pub checkpoint: Option<PathBuf>,
    /// Vocabulary the checkpoint was trained with.
    #[arg(long, required_unless_present = "from_profile")]
    pub vocab: Option<PathBuf>,
    /// Preprocessed sentences, one per line.
    #[arg(long, required_unless_present = "from_profile")]
    pub input: Option<PathBuf>,
    /// JSON lines of `{"tokens", "distances", "heights"}` to convert
    /// instead of running a model.
    #[arg(long, conflicts_with_all = ["checkpoint", "vocab", "input"])]
    pub from_profile: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write raw distances, heights and dependency matrices here.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileLine {
    tokens: Vec<String>,
    distances: Vec<f64>,
    heights: Vec<f64>,
}

struct Induced {
    tokens: TokenSeq,
    profile: SyntaxProfile,
    dep: Option<DepMatrix>,
}

fn row(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_model(checkpoint: &Path, vocab: &Path, input: &Path) -> Result<Vec<Induced>> {
    let state: ModelState =
        load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let vocab = Vocab::from_file_str(&read_text(vocab)?)
        .with_context(|| format!("in {}", vocab.display()))?;
    if vocab.len() != state.config.vocab_size {
        bail!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            state.config.vocab_size
        );
    }
    if state.config.arch == Arch::Vanilla {
        bail!("checkpoint is a vanilla transformer without a parser network");
    }
    let mut out = Vec::new();
    for (k, sent) in read_sentences(input)?.into_iter().enumerate() {
        let ids = vocab.encode(&sent);
        let fwd = encoder_forward(&ids, &vec![false; ids.len()], &state)
            .with_context(|| format!("sentence {}", k + 1))?;
        let leaves: Vec<String> = sent.iter().map(|t| strip_marker(t).to_string()).collect();
        out.push(Induced {
            tokens: TokenSeq::new(leaves)?,
            profile: fwd.profile.context("model produced no syntax profile")?,
            dep: fwd.dep,
        });
    }
    Ok(out)
}

fn read_profiles(path: &Path) -> Result<Vec<Induced>> {
    let mut out = Vec::new();
    for (k, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: ProfileLine = serde_json::from_str(line)
            .with_context(|| format!("{} line {}", path.display(), k + 1))?;
        if p.tokens.len() != p.heights.len() {
            bail!(
                "{} line {}: {} tokens but {} heights",
                path.display(),
                k + 1,
                p.tokens.len(),
                p.heights.len()
            );
        }
        out.push(Induced {
            tokens: TokenSeq::new(p.tokens)?,
            profile: SyntaxProfile::new(p.distances, p.heights)
                .with_context(|| format!("{} line {}", path.display(), k + 1))?,
            dep: None,
        });
    }
    Ok(out)
}

fn dump(dir: &Path, induced: &[Induced]) -> Result<()> {
    write_lines(
        &dir.join("distances.txt"),
        induced.iter().map(|s| row(&s.profile.distances)),
    )?;
    write_lines(
        &dir.join("heights.txt"),
        induced.iter().map(|s| row(&s.profile.heights)),
    )?;
    for (k, s) in induced.iter().enumerate() {
        if let Some(m) = &s.dep {
            let mut text = String::new();
            for i in 0..m.n() {
                writeln!(text, "{}", row(m.row(i)))?;
            }
            write_file(&dir.join("dep").join(format!("{:06}.txt", k + 1)), &text)?;
        }
    }
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let mut manifest = RunManifest::new("induce", &args, None)?;
    for p in [
        &args.checkpoint,
        &args.vocab,
        &args.input,
        &args.from_profile,
    ]
    .into_iter()
    .flatten()
    {
        manifest.input(p)?;
    }
    let trees_path = args.out.join(TREES_FILE);
    let conll_path = args.out.join(CONLL_FILE);
    manifest.artifact(&trees_path);
    manifest.artifact(&conll_path);
    if let Some(d) = &args.dump_dir {
        manifest.artifact(d);
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    manifest.write(&args.out.join(MANIFEST_FILE))?;

    let induced = match (
        &args.from_profile,
        &args.checkpoint,
        &args.vocab,
        &args.input,
    ) {
        (Some(p), ..) => read_profiles(p)?,
        (None, Some(c), Some(v), Some(i)) => run_model(c, v, i)?,
        _ => bail!("need --checkpoint, --vocab and --input, or --from-profile"),
    };

    let mut trees: Vec<ConstTree> = Vec::with_capacity(induced.len());
    let mut deps = Vec::with_capacity(induced.len());
    for s in &induced {
        let tree = distances_to_tree(&s.tokens, &s.profile.distances)?;
        let dep = heights_and_tree_to_dep(&s.profile.heights, &tree)?;
        deps.push(ConllSentence::new(s.tokens.clone(), dep));
        trees.push(tree);
    }
    write_lines(&trees_path, trees.iter().map(emit_bracket))?;
    write_file(&conll_path, &emit_conll(&deps))?;
    if let Some(d) = &args.dump_dir {
        dump(d, &induced)?;
    }
    log::info!("induced {} sentences", trees.len());
    Ok(())
}
