use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lda_core::gibbs::{self, GibbsHyper, GibbsState};
use lda_core::model_io;
use lda_core::parallel::{self, BlockedSampler};
use lda_core::vem::{self, EmEvent, EmOptions, VemInit, VemSettings};
use lda_core::{Corpus, LdaError};

use crate::args::{CorpusFormat, Scheme, TrainGibbsArgs, TrainVemArgs};
use crate::input::{load_corpus, prepare_out_dir, read_text, required_data, resolve_format, write_text};

enum Sweeper {
    Serial,
    Adlda(usize),
    Blocked(Box<BlockedSampler>),
}

impl Sweeper {
    fn sweep(&self, state: &mut GibbsState, corpus: &Corpus) -> lda_core::Result<()> {
        match self {
            Sweeper::Serial => gibbs::sweep(state, corpus),
            Sweeper::Adlda(p) => parallel::adlda_sweep(state, corpus, *p),
            Sweeper::Blocked(s) => s.sweep(state),
        }
    }
}

fn default_alpha(k: usize) -> f64 {
    50.0 / k as f64
}

pub fn train_gibbs(args: &TrainGibbsArgs, seed: u64) -> Result<()> {
    if args.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let scheme = args
        .scheme
        .unwrap_or(if args.workers > 1 { Scheme::Adlda } else { Scheme::Serial });
    if scheme == Scheme::Serial && args.workers > 1 {
        bail!("the serial scheme runs on one worker; use --scheme adlda or blocked");
    }
    if !args.resume {
        required_data(&args.data)?;
        if args.k.is_none() {
            bail!("--k is required");
        }
    }
    prepare_out_dir(&args.out)?;

    let (mut state, corpus, vocab) = if args.resume {
        let dir = args.model.as_deref().unwrap_or(&args.out);
        if args.k.is_some() || args.alpha.is_some() || args.data.data.is_some() {
            log::warn!("resuming: --k, --alpha and --data are taken from the saved model");
        }
        let loaded = model_io::load_gibbs_model(dir, &args.tag)
            .with_context(|| format!("cannot resume {} from {}", args.tag, dir.display()))?;
        log::info!("resuming after {} sweeps", loaded.state.sweeps_done);
        (loaded.state, loaded.corpus, loaded.vocab)
    } else {
        let k = args.k.unwrap_or_default();
        let (corpus, vocab) = load_corpus(required_data(&args.data)?, args.data.format, None)?;
        let hyper = GibbsHyper::new(k, args.alpha.unwrap_or_else(|| default_alpha(k)), args.beta)?;
        log::info!(
            "word-topic counts need {:.2} MiB",
            gibbs::count_table_mib(k, corpus.num_terms)
        );
        let state = gibbs::init_state(&corpus, hyper, seed)?;
        (state, corpus, vocab)
    };

    let sweeper = match scheme {
        Scheme::Serial => Sweeper::Serial,
        Scheme::Adlda => Sweeper::Adlda(args.workers),
        Scheme::Blocked => {
            let plan = parallel::partition_blocks(&corpus, args.workers, args.partition_trials, state.seed)?;
            log::info!("block partition balance {:.4}", plan.balance);
            Sweeper::Blocked(Box::new(BlockedSampler::new(&corpus, plan)?))
        }
    };
    if let Sweeper::Adlda(p) = sweeper {
        if p > corpus.num_docs() {
            bail!("{p} workers for {} documents", corpus.num_docs());
        }
    }

    let top_n = if args.top_n > vocab.len() {
        log::warn!("asked for {} words per topic, vocabulary has {}", args.top_n, vocab.len());
        vocab.len()
    } else {
        args.top_n
    };
    model_io::save_wordmap(&args.out, &vocab)?;
    for _ in 0..args.iters {
        sweeper.sweep(&mut state, &corpus)?;
        let done = state.sweeps_done as usize;
        log::info!("sweep {done}");
        if args.save_every > 0 && done.is_multiple_of(args.save_every) && done > args.burn_in {
            let tag = model_io::gibbs_checkpoint_tag(done);
            log::info!("saving {tag}");
            model_io::save_gibbs_model(&args.out, &tag, &state, &corpus, &vocab, top_n)?;
        }
    }
    model_io::save_gibbs_model(&args.out, model_io::GIBBS_FINAL_TAG, &state, &corpus, &vocab, top_n)?;
    Ok(())
}

fn load_settings(path: Option<&Path>) -> Result<Option<VemSettings>> {
    match path {
        Some(p) => {
            let s = VemSettings::parse(&read_text(p)?).with_context(|| format!("cannot parse {}", p.display()))?;
            Ok(Some(s))
        }
        None => Ok(None),
    }
}

fn save_vem_checkpoint(out: &Path, tag: &str, model: &vem::VemModel, gammas: Option<&lda_core::Matrix>) -> lda_core::Result<()> {
    let prefix = out.join(tag);
    model_io::save_vem_model(&prefix, model)?;
    if let Some(g) = gammas {
        model_io::save_gamma(&model_io::with_ext(&prefix, "gamma"), g)?;
    }
    Ok(())
}

pub fn train_vem(args: &TrainVemArgs, seed: u64) -> Result<()> {
    let data = required_data(&args.data)?;
    let init = match args.init.as_str() {
        "random" => VemInit::Random,
        "seeded" => VemInit::Seeded,
        prefix => {
            let m = model_io::load_vem_model(Path::new(prefix))
                .with_context(|| format!("cannot load starting model {prefix}"))?;
            if args.alpha.is_some() {
                log::warn!("starting from {prefix}: its alpha {} replaces --alpha", m.alpha);
            }
            VemInit::Model(m)
        }
    };
    let k = match (&init, args.k) {
        (VemInit::Model(_), k) => k.unwrap_or(0),
        (_, Some(k)) if k > 0 => k,
        _ => bail!("--k must be given and positive"),
    };
    let file_settings = load_settings(args.settings.as_deref())?;
    if let (Some(s), Some(a)) = (&file_settings, args.alpha) {
        if s.estimate_alpha {
            log::warn!("settings ask for alpha to be estimated; --alpha {a} is only the starting value");
        }
    }
    let settings = file_settings.unwrap_or_default();
    settings.validate()?;
    prepare_out_dir(&args.out)?;

    let (corpus, vocab) = load_corpus(data, args.data.format, None)?;
    if resolve_format(data, args.data.format) == CorpusFormat::Line {
        model_io::save_wordmap(&args.out, &vocab)?;
    }
    let opts = EmOptions {
        num_topics: k,
        settings,
        init,
        initial_alpha: args.alpha.unwrap_or_else(|| default_alpha(k.max(1))),
        num_init: vem::NUM_INIT,
        seed,
    };

    let lik_path = args.out.join(model_io::LIKELIHOOD_FILE);
    let mut lik = File::create(&lik_path).with_context(|| format!("cannot write {}", lik_path.display()))?;
    let out = &args.out;
    let lag = args.lag;
    let result = vem::run_em(&corpus, &opts, |event| match event {
        EmEvent::Initial { model } => save_vem_checkpoint(out, "000", model, None),
        EmEvent::Iteration {
            iteration,
            likelihood,
            converged,
            model,
            gammas,
        } => {
            lik.write_all(model_io::format_likelihood_line(likelihood, converged).as_bytes())
                .and_then(|_| lik.flush())
                .map_err(LdaError::from)?;
            if lag > 0 && iteration.is_multiple_of(lag) {
                save_vem_checkpoint(out, &format!("{iteration:03}"), model, Some(gammas))?;
            }
            Ok(())
        }
    })?;

    save_vem_checkpoint(out, "final", &result.model, Some(&result.gammas))?;
    write_text(
        &out.join(model_io::WORD_ASSIGNMENTS_FILE),
        &model_io::format_word_assignments(&corpus, &result.word_assignments)?,
    )?;
    log::info!("final alpha {:.10}, var max iter {}", result.model.alpha, result.var_max_iter);
    Ok(())
}
