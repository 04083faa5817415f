use std::path::Path;

use serde::Serialize;
use transflow::classifier::{
    evaluate, fit, save_bank, ClassifierBank, EvalContext, EvalReport, KnnClassifier, KnnSpace,
    TransflowClassifier,
};
use transflow::data::{
    encode_grid, load_idx, make_blob_images, make_digit_images, make_two_moons, save_csv, save_idx,
    to_csv,
};
use transflow::flow::{
    checkpoint, default_hidden_width, train_with, DataTransform, OptimizerKind, TrainConfig,
};
use transflow::inference::file::{self, Provenance};
use transflow::inference::{
    conditioned_sample, encode_evidence, interpolate as lerp, kl_to_prior, posterior_general,
    posterior_isotropic, posterior_predictive, Covariance, GaussianSpec as Spec, LambdaPolicy,
    LikelihoodConfig,
};
use transflow::rng::derive_seed;
use transflow::{Dataset, FlowModel, GaussianSpec};

use crate::input::{
    create_dir, is_csv, is_pgm, load_dataset, load_model, require_file, write_text,
};
use crate::{
    Baseline, ClassifyArgs, CliError, CliResult, ConditionArgs, GenerateArgs, InspectArgs,
    InterpolateArgs, LambdaArgs, Optimizer, Preprocess, SampleArgs, Synthetic, TrainArgs,
};

fn describe_transform(t: &DataTransform<f64>) -> String {
    match t {
        DataTransform::Identity => "identity".into(),
        DataTransform::Standardize { .. } => "standardize".into(),
        DataTransform::Logit { alpha, range } => format!("logit (alpha {alpha}, range {range})"),
    }
}

fn policy(l: &LambdaArgs) -> CliResult<LambdaPolicy> {
    let p = match (l.lambda, l.lambda_fraction) {
        (Some(v), _) => LambdaPolicy::Absolute(v),
        (None, Some(f)) => LambdaPolicy::FractionOfM(f),
        (None, None) => LambdaPolicy::default(),
    };
    // reject non-positive values before any work is done
    p.resolve(1)?;
    Ok(p)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn train(a: TrainArgs) -> CliResult {
    let data = load_dataset(&a.data, None, a.labeled)?;
    let d = data.dim();
    let pre = match a.preprocess {
        Preprocess::Auto if is_csv(&a.data) => Preprocess::Standardize,
        Preprocess::Auto => Preprocess::Logit,
        p => p,
    };
    let transform = match pre {
        Preprocess::Identity | Preprocess::Auto => DataTransform::Identity,
        Preprocess::Standardize => DataTransform::standardize_from(data.points())?,
        Preprocess::Logit => DataTransform::logit_pixels(),
    };
    let dequant = a
        .dequant
        .unwrap_or(if pre == Preprocess::Logit { 1.0 } else { 0.0 });
    if !(dequant >= 0.0) {
        return Err(CliError::Usage("--dequant must be non-negative".into()));
    }
    let hidden = a.hidden.unwrap_or_else(|| default_hidden_width(d));
    let mut model = FlowModel::with_hidden(d, a.blocks, hidden, transform, a.seed)?;
    let init = if dequant > 0.0 {
        data.dequantized(dequant, derive_seed(a.seed, u64::MAX))
    } else {
        data.clone()
    };
    model.initialize_from_data(init.points())?;

    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        optimizer: match a.optimizer {
            Optimizer::Adam => OptimizerKind::adam(),
            Optimizer::Sgd => OptimizerKind::Sgd,
        },
        grad_clip: if a.clip > 0.0 { a.clip } else { f64::INFINITY },
        dequant_noise: dequant,
        seed: a.seed,
    };
    let mut log = String::from("epoch,mean_nll,mean_grad_norm\n");
    let out = train_with(&model, &data, &cfg, |s| {
        eprintln!(
            "epoch {:>4}  nll {:.6}  grad norm {:.4}",
            s.epoch, s.mean_nll, s.mean_grad_norm
        );
        log.push_str(&format!(
            "{},{},{}\n",
            s.epoch, s.mean_nll, s.mean_grad_norm
        ));
    })?;
    let hash = checkpoint::save(&out.model, &a.out)?;
    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".nll.csv");
        p.into()
    });
    write_text(&log_path, &log)?;

    println!("d                 {d}");
    println!(
        "preprocessing     {}",
        describe_transform(out.model.transform())
    );
    println!("blocks            {}", a.blocks);
    println!("parameters        {}", out.model.parameter_count());
    if let Some(last) = out.history.last() {
        println!("final mean nll    {}", last.mean_nll);
    }
    println!("checkpoint        {}", a.out.display());
    println!("sha256            {hash}");
    println!("nll log           {}", log_path.display());
    Ok(())
}

pub fn condition(a: ConditionArgs) -> CliResult {
    let (model, hash) = load_model(&a.checkpoint)?;
    let labeled = a.class.is_some() && is_csv(&a.evidence) || a.labeled;
    if a.class.is_some() && !is_csv(&a.evidence) && a.labels.is_none() {
        return Err(CliError::Usage(
            "--class with IDX evidence needs --labels".into(),
        ));
    }
    let mut data = load_dataset(&a.evidence, a.labels.as_deref(), labeled)?;
    if let Some(c) = a.class {
        data = data.class_subset(c)?;
    }
    let points = data.points().to_vec();
    let ev = encode_evidence(&model, &points)?;
    let m = ev.m();
    let d = ev.dim();

    let (post, lik, prov) = match &a.likelihood_diag {
        Some(path) => {
            let vars = load_dataset(path, None, false)?;
            if vars.len() != 1 {
                return Err(CliError::Usage(format!(
                    "{}: expected one row of variances, found {}",
                    path.display(),
                    vars.len()
                )));
            }
            let lik =
                LikelihoodConfig::from_covariance(Covariance::Diagonal(vars.point(0).to_vec()), d)?;
            let post = posterior_general(&ev, &GaussianSpec::standard(d), &lik)?;
            let prov = Provenance {
                role: Some("posterior".into()),
                m: Some(m),
                checkpoint_sha256: Some(hash.clone()),
                note: Some(format!("diagonal likelihood from {}", path.display())),
                ..Provenance::default()
            };
            (post, lik, prov)
        }
        None => {
            let lambda = policy(&a.lambda)?.resolve(m)?;
            let post = posterior_isotropic(&ev, lambda)?;
            let lik = LikelihoodConfig::isotropic(lambda)?;
            println!("lambda            {lambda}");
            println!("lambda / m        {}", lambda / m as f64);
            (
                post,
                lik,
                Provenance::conditioned("posterior", lambda, m, Some(hash.clone())),
            )
        }
    };
    let kl = kl_to_prior(&post);
    println!("m                 {m}");
    println!("d                 {d}");
    println!("|mean evidence|   {}", norm(ev.mean()));
    println!("|posterior mean|  {}", norm(post.mean()));
    println!("kl to prior       {kl}");
    file::save_posterior(&post, prov.clone(), &a.out)?;
    println!("posterior         {}", a.out.display());
    if let Some(p) = &a.predictive_out {
        let pp = posterior_predictive(&post, &lik)?;
        let prov = Provenance {
            role: Some("posterior_predictive".into()),
            ..prov
        };
        file::save_posterior(&pp, prov, p)?;
        println!("predictive        {}", p.display());
    }
    Ok(())
}

fn grid_shape(n: usize, rows: Option<usize>, cols: Option<usize>) -> (usize, usize) {
    match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => {
            let s = (n as f64).sqrt().round() as usize;
            if s * s == n {
                (s, s)
            } else {
                (1, n)
            }
        }
    }
}

fn write_samples(samples: Vec<Vec<f64>>, rows: usize, cols: usize, out: &Path) -> CliResult {
    if is_pgm(out) {
        let bytes = encode_grid(&samples, rows, cols)?;
        std::fs::write(out, bytes).map_err(|e| transflow::Error::Io {
            path: out.to_path_buf(),
            source: e,
        })?;
    } else {
        let data = Dataset::new(samples, None, "samples")?;
        save_csv(&data, out)?;
    }
    Ok(())
}

pub fn sample(a: SampleArgs) -> CliResult {
    let (model, _) = load_model(&a.checkpoint)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let samples = match &a.posterior {
        Some(p) => {
            require_file(p)?;
            let (g, _) = file::load_posterior::<f64>(p)?;
            conditioned_sample(&model, &g, a.n, a.seed)?
        }
        None => model.sample(a.n, a.seed)?,
    };
    let (rows, cols) = grid_shape(a.n, a.grid_rows, a.grid_cols);
    write_samples(samples, rows, cols, &a.out)?;
    println!("wrote {} samples to {}", a.n, a.out.display());
    Ok(())
}

pub fn interpolate(a: InterpolateArgs) -> CliResult {
    if a.steps < 2 {
        return Err(CliError::Usage("--steps must be at least 2".into()));
    }
    require_file(&a.a)?;
    require_file(&a.b)?;
    let (ga, pa) = file::load_posterior::<f64>(&a.a)?;
    let (gb, _) = file::load_posterior::<f64>(&a.b)?;
    let model = match &a.checkpoint {
        Some(p) => Some(load_model(p)?.0),
        None => None,
    };
    create_dir(&a.out_dir)?;
    for i in 0..a.steps {
        let t = i as f64 / (a.steps - 1) as f64;
        let g = lerp(&ga, &gb, t)?;
        let prov = Provenance {
            role: Some("interpolated".into()),
            t: Some(t),
            checkpoint_sha256: pa.checkpoint_sha256.clone(),
            ..Provenance::default()
        };
        let path = a.out_dir.join(format!("step_{i:03}.json"));
        file::save_posterior(&g, prov, &path)?;
        println!("t = {t:<8.4}  {}", path.display());
        if let Some(model) = &model {
            // shared seed: every step reuses the same latent noise
            let xs = conditioned_sample(model, &g, a.samples_per_step, a.seed)?;
            let side = (model.dim() as f64).sqrt().round() as usize;
            let ext = if side * side == model.dim() {
                "pgm"
            } else {
                "csv"
            };
            write_samples(
                xs,
                1,
                a.samples_per_step,
                &a.out_dir.join(format!("step_{i:03}.{ext}")),
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassifyReport {
    checkpoint_sha256: String,
    support: String,
    test: String,
    m: usize,
    seed: u64,
    support_size: usize,
    test_size: usize,
    methods: Vec<EvalReport>,
}

pub fn classify(a: ClassifyArgs) -> CliResult {
    let (model, hash) = load_model(&a.checkpoint)?;
    let pool = load_dataset(&a.support, a.support_labels.as_deref(), true)?;
    let test = load_dataset(&a.test, a.test_labels.as_deref(), true)?;
    pool.require_labels()?;
    test.require_labels()?;
    if a.m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let pol = policy(&a.lambda)?;
    let support = pool.stratified_subsample(a.m, a.seed)?;

    let bank: ClassifierBank<f64> = fit(&model, &support, pol, Some(hash.clone()))?;
    let lambda = pol.resolve(a.m)?;
    let mut methods = vec![evaluate(
        &TransflowClassifier {
            bank: &bank,
            model: &model,
        },
        &test,
        EvalContext {
            method: "transflow".into(),
            m: Some(a.m),
            lambda: Some(lambda),
            lambda_over_m: Some(lambda / a.m as f64),
            seed: Some(a.seed),
            ..EvalContext::default()
        },
    )?];
    let mut spaces: Vec<KnnSpace> = Vec::new();
    for b in &a.baselines {
        let s = match b {
            Baseline::Pixel => KnnSpace::Pixel,
            Baseline::Latent => KnnSpace::Latent,
            Baseline::None => continue,
        };
        if !spaces.contains(&s) {
            spaces.push(s);
        }
    }
    for space in spaces {
        let knn = KnnClassifier::new(space, &model, &support, a.k)?;
        methods.push(evaluate(
            &knn,
            &test,
            EvalContext {
                method: format!("{}_knn", space.name()),
                m: Some(a.m),
                k: Some(a.k),
                metric: Some("euclidean".into()),
                seed: Some(a.seed),
                ..EvalContext::default()
            },
        )?);
    }

    for r in &methods {
        let extra = match r.context.k {
            Some(k) => format!("k = {k}"),
            None => format!(
                "lambda = {} (lambda / m = {})",
                r.context.lambda.unwrap_or(f64::NAN),
                r.context.lambda_over_m.unwrap_or(f64::NAN)
            ),
        };
        println!(
            "{:<12} {:>7.2}%  ({}/{})  {extra}",
            r.context.method,
            100.0 * r.overall_accuracy,
            r.correct,
            r.n
        );
    }
    let report = ClassifyReport {
        checkpoint_sha256: hash,
        support: a.support.display().to_string(),
        test: a.test.display().to_string(),
        m: a.m,
        seed: a.seed,
        support_size: support.len(),
        test_size: test.len(),
        methods,
    };
    let text = serde_json::to_string_pretty(&report).map_err(transflow::Error::from)?;
    write_text(&a.out, &text)?;
    if let Some(p) = &a.bank_out {
        save_bank(&bank, p)?;
    }
    println!("report            {}", a.out.display());
    Ok(())
}

fn describe_spec(g: &Spec<f64>) {
    println!("d                 {}", g.dim());
    println!("representation    {}", g.representation());
    println!("|mean|            {}", norm(g.mean()));
    println!("trace             {}", g.cov().trace(g.dim()));
    println!("kl to prior       {}", kl_to_prior(g));
}

pub fn inspect(a: InspectArgs) -> CliResult {
    require_file(&a.file)?;
    let bytes = std::fs::read(&a.file).map_err(|e| transflow::Error::Io {
        path: a.file.clone(),
        source: e,
    })?;
    let name = a.file.display().to_string();
    if bytes.starts_with(checkpoint::MAGIC) {
        let model: FlowModel = checkpoint::decode(&bytes, &name)?;
        println!(
            "kind              checkpoint (format version {})",
            checkpoint::FORMAT_VERSION
        );
        println!("d                 {}", model.dim());
        println!(
            "preprocessing     {}",
            describe_transform(model.transform())
        );
        println!("blocks            {}", model.blocks().len());
        println!("parameters        {}", model.parameter_count());
        println!("sha256            {}", checkpoint::sha256_hex(&bytes));
        return Ok(());
    }
    let idx_like = bytes.starts_with(&[0x1f, 0x8b]) || bytes.starts_with(&[0, 0, 8]);
    if idx_like {
        if bytes.get(3) == Some(&1) {
            let labels = transflow::data::idx::parse_labels(&bytes, &name)?;
            println!("kind              idx labels");
            println!("n                 {}", labels.len());
        } else {
            let data: Dataset = load_idx(&a.file, None)?;
            println!("kind              idx images");
            println!("n                 {}", data.len());
            println!("d                 {}", data.dim());
        }
        return Ok(());
    }
    let unknown = || {
        transflow::Error::Unsupported(format!(
            "{name}: not a checkpoint, IDX, posterior or bank file"
        ))
    };
    let text = String::from_utf8(bytes).map_err(|_| unknown())?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|_| unknown())?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(file::POSTERIOR_FORMAT) => {
            let (g, prov) = file::from_json::<f64>(&text)?;
            println!("kind              posterior");
            describe_spec(&g);
            if let Some(r) = prov.role {
                println!("role              {r}");
            }
            if let (Some(l), Some(m)) = (prov.lambda, prov.m) {
                println!("lambda            {l}");
                println!("m                 {m}");
                println!("lambda / m        {}", l / m as f64);
            }
            if let Some(t) = prov.t {
                println!("t                 {t}");
            }
            if let Some(h) = prov.checkpoint_sha256 {
                println!("checkpoint        {h}");
            }
        }
        Some(transflow::classifier::bank::BANK_FORMAT) => {
            let bank = transflow::classifier::load_bank::<f64>(&a.file)?;
            println!("kind              classifier bank");
            println!("d                 {}", bank.dim());
            println!("classes           {}", bank.classes().len());
            for c in bank.classes() {
                println!(
                    "  label {:>4}  m {:>4}  lambda {}  lambda / m {}",
                    c.label,
                    c.m,
                    c.lambda,
                    c.lambda / c.m as f64
                );
            }
        }
        _ => return Err(unknown().into()),
    }
    Ok(())
}

pub fn generate(a: GenerateArgs) -> CliResult {
    let data: Dataset = match a.kind {
        Synthetic::TwoMoons => make_two_moons(a.n, a.noise, a.seed)?,
        Synthetic::BlobImages => make_blob_images(a.n, a.side, a.seed)?,
        Synthetic::Digits => make_digit_images(a.n, a.side, a.seed)?,
    };
    if is_csv(&a.out) {
        write_text(&a.out, &to_csv(&data))?;
    } else {
        save_idx(
            &data,
            &a.out,
            a.labels_out.as_deref().filter(|_| data.labels().is_some()),
        )?;
    }
    println!(
        "wrote {} points (d = {}) to {}",
        data.len(),
        data.dim(),
        a.out.display()
    );
    Ok(())
}
