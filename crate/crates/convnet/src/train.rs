use std::fmt;
use std::path::Path;

use ctxaug_core::imaging::{gcn, RawImage};
use ctxaug_core::seed::{derive_seed, rng_from, stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::network::{ConvParams, Network, NetworkSpec, STANDARD_ARCHITECTURE};
use crate::optim::{sgd_momentum_step, OptimizerState};
use crate::tensor::Tensor;
use crate::{io_err, ConvnetError, Result};

/// One preprocessed example: a `(1, c, h, w)` tensor and its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

impl Sample {
    /// Contrast-normalizes `img` and lays it out channel-major.
    pub fn from_image(img: &RawImage, label: usize) -> Self {
        let (w, h) = img.dims();
        let input = Tensor::new([1, 3, h, w], gcn(img).to_planar()).expect("planar size matches");
        Sample { input, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub replicate_count: usize,
    /// Worker threads for per-sample gradients; 1 runs inline.
    pub threads: usize,
    /// `standard` or a layer notation accepted by [`NetworkSpec::parse`].
    pub architecture: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 10,
            epochs: 20,
            seed: 0,
            replicate_count: 10,
            threads: 1,
            architecture: "standard".into(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ConvnetError::InvalidConfig(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.replicate_count == 0 || self.threads == 0 {
            return bad("batch_size, epochs, replicate_count and threads must be positive");
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConvnetError::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| ConvnetError::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for {key}"))
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "replicate_count" => self.replicate_count = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "architecture" => self.architecture = value.to_string(),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = TrainConfig::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "learning_rate = {:?}\nmomentum = {:?}\nbatch_size = {}\nepochs = {}\nseed = {}\nreplicate_count = {}\nthreads = {}\narchitecture = {}\n",
            self.learning_rate,
            self.momentum,
            self.batch_size,
            self.epochs,
            self.seed,
            self.replicate_count,
            self.threads,
            self.architecture
        )
    }

    /// The network for inputs of shape `(c, h, w)`.
    pub fn network_spec(&self, input: [usize; 3]) -> Result<NetworkSpec> {
        if self.architecture == "standard" {
            NetworkSpec::parse(STANDARD_ARCHITECTURE, input)
        } else {
            NetworkSpec::parse(&self.architecture, input)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    /// Accuracy of the predictions made during the epoch's forward passes.
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,train_acc,test_acc\n");
        for r in &self.epochs {
            let test = r.test_acc.map(|a| format!("{a:?}")).unwrap_or_default();
            s.push_str(&format!("{},{:?},{:?},{}\n", r.epoch, r.loss, r.train_acc, test));
        }
        s
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn check_samples(net: &Network, samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(ConvnetError::EmptyDataset);
    }
    let classes = net.spec.classes();
    for s in samples {
        if s.label >= classes {
            return Err(ConvnetError::LabelOutOfRange { label: s.label, classes });
        }
    }
    Ok(())
}

/// Fraction of `samples` whose highest logit (lowest index on ties) is the label.
pub fn evaluate(net: &Network, samples: &[Sample]) -> Result<f64> {
    check_samples(net, samples)?;
    let mut correct = 0usize;
    for s in samples {
        let logits = net.forward(&s.input)?;
        if argmax(logits.data()) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

type SampleResult = Result<(f64, Vec<ConvParams>, usize)>;

fn per_sample(net: &Network, s: &Sample) -> SampleResult {
    let (loss, grads, logits) = net.loss_and_grads(&s.input, &[s.label])?;
    Ok((loss, grads, (argmax(logits.data()) == s.label) as usize))
}

/// Seeded He-normal init, seeded shuffle each epoch, minibatch SGD with
/// momentum. Per-sample gradients are always summed in batch order, so
/// every thread count produces the same bits.
pub fn train(
    spec: NetworkSpec,
    train_set: &[Sample],
    test_set: Option<&[Sample]>,
    config: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    train_scheduled(spec, |_| Ok(train_set.to_vec()), test_set, config)
}

/// Like [`train`], but epoch `e` (0-based) trains on `epoch_set(e)`, so the
/// training images may change from one epoch to the next.
pub fn train_scheduled(
    spec: NetworkSpec,
    mut epoch_set: impl FnMut(usize) -> Result<Vec<Sample>>,
    test_set: Option<&[Sample]>,
    config: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    config.validate()?;
    let mut net = Network::he_init(spec, &mut rng_from(&[stream::TRAIN_INIT, config.seed]));
    if let Some(t) = test_set {
        check_samples(&net, t)?;
    }
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| ConvnetError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let mut state = OptimizerState::new(&net.params);
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let train_set = epoch_set(epoch)?;
        check_samples(&net, &train_set)?;
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng_from(&[stream::TRAIN_SHUFFLE, config.seed, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<SampleResult> = match &pool {
                Some(p) => p.install(|| batch.par_iter().map(|&i| per_sample(&net, &train_set[i])).collect()),
                None => batch.iter().map(|&i| per_sample(&net, &train_set[i])).collect(),
            };
            let mut total = net.zero_grads();
            for r in results {
                let (loss, grads, hit) = r?;
                loss_sum += loss;
                correct += hit;
                for (t, g) in total.iter_mut().zip(&grads) {
                    t.add_assign(g);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for t in &mut total {
                t.weights.data_mut().iter_mut().for_each(|v| *v *= scale);
                t.bias.iter_mut().for_each(|v| *v *= scale);
            }
            sgd_momentum_step(&mut net.params, &total, &mut state, config.learning_rate, config.momentum)?;
        }
        let test_acc = match test_set {
            Some(t) => Some(evaluate(&net, t)?),
            None => None,
        };
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            test_acc,
        });
    }
    Ok((net, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ExperimentSummary {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        ExperimentSummary { accuracies, mean, std: var.sqrt() }
    }
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}% ± {:.2}", self.mean * 100.0, self.std * 100.0)
    }
}

/// Runs `replicate` once per replicate with the seed replaced by
/// `derive_seed([REPLICATE, seed, index])`, and summarizes the accuracies.
pub fn run_experiment(
    config: &TrainConfig,
    mut replicate: impl FnMut(&TrainConfig) -> Result<f64>,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let mut accs = Vec::with_capacity(config.replicate_count);
    for r in 0..config.replicate_count {
        let cfg = TrainConfig { seed: derive_seed(&[stream::REPLICATE, config.seed, r as u64]), ..config.clone() };
        accs.push(replicate(&cfg)?);
    }
    Ok(ExperimentSummary::from_accuracies(accs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctxaug_core::synth::blob_images;

    fn blobs(n: usize, seed: u64) -> Vec<Sample> {
        blob_images(n, 12, seed).iter().map(|(img, l)| Sample::from_image(img, l.index())).collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig { epochs: 2, architecture: "(4) 3c - 2p - (2) 1c".into(), ..TrainConfig::default() }
    }

    #[test]
    fn config_parsing() {
        let mut cfg = TrainConfig::default();
        cfg.apply_text("# comment\nlearning_rate = 0.05\n\nepochs=3 # trailing\nthreads = 2\n").unwrap();
        assert_eq!(cfg.learning_rate, 0.05);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.threads, 2);
        assert!(cfg.apply_text("bogus = 1").is_err());
        assert!(cfg.apply_text("epochs = x").is_err());
        assert!(cfg.apply_text("epochs").is_err());
        let mut again = TrainConfig::default();
        again.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { momentum: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -0.1, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let cfg = TrainConfig { learning_rate: 0.0, ..small_config() };
        let data = blobs(20, 1);
        let spec = cfg.network_spec([3, 12, 12]).unwrap();
        let (net, log) = train(spec.clone(), &data, None, &cfg).unwrap();
        let init = Network::he_init(spec, &mut rng_from(&[stream::TRAIN_INIT, cfg.seed]));
        assert_eq!(net, init);
        assert_eq!(log.epochs.len(), 2);
    }

    #[test]
    fn training_is_reproducible_across_thread_counts() {
        let data = blobs(30, 2);
        let cfg = small_config();
        let spec = cfg.network_spec([3, 12, 12]).unwrap();
        let (a, la) = train(spec.clone(), &data, Some(&data[..10]), &cfg).unwrap();
        let (b, lb) = train(spec.clone(), &data, Some(&data[..10]), &cfg).unwrap();
        let (c, lc) = train(spec, &data, Some(&data[..10]), &TrainConfig { threads: 3, ..cfg }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(la, lb);
        assert_eq!(la, lc);
    }

    #[test]
    fn empty_and_bad_labels_rejected() {
        let cfg = small_config();
        let spec = cfg.network_spec([3, 12, 12]).unwrap();
        assert!(matches!(train(spec.clone(), &[], None, &cfg), Err(ConvnetError::EmptyDataset)));
        let mut data = blobs(2, 3);
        data[0].label = 5;
        assert!(matches!(train(spec.clone(), &data, None, &cfg), Err(ConvnetError::LabelOutOfRange { .. })));
        assert!(matches!(evaluate(&Network::zeros(spec), &[]), Err(ConvnetError::EmptyDataset)));
    }

    #[test]
    fn evaluate_counts_and_ties() {
        let spec = NetworkSpec::micro([3, 12, 12], 2, 3, 2).unwrap();
        let net = Network::zeros(spec);
        let mut data = blobs(4, 4);
        for (i, s) in data.iter_mut().enumerate() {
            s.label = (i < 2) as usize;
        }
        // all-zero logits pick class 0
        assert_eq!(evaluate(&net, &data).unwrap(), 0.5);
    }

    #[test]
    fn csv_log_format() {
        let log = TrainLog {
            epochs: vec![
                EpochRecord { epoch: 1, loss: 0.5, train_acc: 0.25, test_acc: None },
                EpochRecord { epoch: 2, loss: 0.25, train_acc: 0.75, test_acc: Some(0.5) },
            ],
        };
        assert_eq!(log.to_csv(), "epoch,loss,train_acc,test_acc\n1,0.5,0.25,\n2,0.25,0.75,0.5\n");
    }

    #[test]
    fn experiment_summary_statistics() {
        let s = ExperimentSummary::from_accuracies(vec![0.5; 4]);
        assert_eq!((s.mean, s.std), (0.5, 0.0));
        let s = ExperimentSummary::from_accuracies(vec![0.4, 0.6]);
        assert!((s.mean - 0.5).abs() < 1e-15 && (s.std - 0.1).abs() < 1e-15);
        let cfg = TrainConfig { replicate_count: 1, ..TrainConfig::default() };
        let s = run_experiment(&cfg, |_| Ok(0.7)).unwrap();
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn replicates_get_distinct_derived_seeds() {
        let cfg = TrainConfig { replicate_count: 5, seed: 9, ..TrainConfig::default() };
        let mut seeds = Vec::new();
        run_experiment(&cfg, |c| {
            seeds.push(c.seed);
            Ok(0.0)
        })
        .unwrap();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 5);
        assert!(!seeds.contains(&9));
    }
}
