use std::fmt::Write;

use anyhow::{Context, Result};
use lda_core::gibbs::{self, InferOptions};
use lda_core::model_io;
use lda_core::vem::{self, VemSettings};

use crate::args::{InferGibbsArgs, InferVemArgs, PerplexityArgs};
use crate::input::{emit, load_corpus, load_gibbs, prepare_out_dir, read_text, required_data, write_text};

pub fn infer_gibbs(args: &InferGibbsArgs, seed: u64) -> Result<()> {
    let data = required_data(&args.data)?;
    let out = args.out.clone().unwrap_or_else(|| args.model.model.clone());
    let trained = load_gibbs(&args.model)?;
    prepare_out_dir(&out)?;
    let (docs, _) = load_corpus(data, args.data.format, Some(trained.vocab))?;
    let opts = InferOptions {
        iters: args.iters,
        seed,
        strict: args.strict,
    };
    let inf = gibbs::infer_new(&trained.state, &docs, opts)?;

    let mut tassign = String::new();
    for (doc, z) in inf.docs.docs.iter().zip(&inf.assignments) {
        let pairs: Vec<String> = doc.tokens().zip(z).map(|(w, t)| format!("{w}:{t}")).collect();
        let _ = writeln!(tassign, "{}", pairs.join(" "));
    }
    write_text(&out.join(format!("{}.theta", args.name)), &model_io::format_matrix(&inf.theta))?;
    write_text(&out.join(format!("{}.tassign", args.name)), &tassign)?;
    Ok(())
}

pub fn infer_vem(args: &InferVemArgs) -> Result<()> {
    let data = required_data(&args.data)?;
    let settings = match &args.settings {
        Some(p) => VemSettings::parse(&read_text(p)?).with_context(|| format!("cannot parse {}", p.display()))?,
        None => VemSettings::default(),
    };
    let model = model_io::load_vem_model(&args.model)
        .with_context(|| format!("cannot load model {}", args.model.display()))?;
    prepare_out_dir(&args.out)?;
    let (corpus, _) = load_corpus(data, args.data.format, None)?;
    let (gammas, lhood) = vem::vem_infer(&model, &corpus, &settings)?;
    write_text(
        &args.out.join(format!("{}-gamma.dat", args.name)),
        &model_io::format_gamma(&gammas),
    )?;
    write_text(
        &args.out.join(format!("{}-lda-lhood.dat", args.name)),
        &model_io::format_doc_likelihoods(&lhood),
    )?;
    Ok(())
}

pub fn perplexity(args: &PerplexityArgs, seed: u64) -> Result<()> {
    let data = required_data(&args.data)?;
    let trained = load_gibbs(&args.model)?;
    let (heldout, _) = load_corpus(data, args.data.format, Some(trained.vocab))?;
    let opts = InferOptions {
        iters: args.iters,
        seed,
        strict: false,
    };
    let inf = gibbs::infer_new(&trained.state, &heldout, opts)?;
    let phi = gibbs::estimate_phi(&trained.state);
    let p = gibbs::perplexity(&inf.theta, &phi, &inf.docs)?;
    emit(None, &format!("{p:.6}\n"))
}
