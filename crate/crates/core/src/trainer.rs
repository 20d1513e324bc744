//! The alternating training loop: discriminator step on real + generated
//! batches with top-k expert assignment, then a generator step through the
//! frozen discriminator bank, plus periodic evaluation and run outputs
//! (metrics.csv, sample snapshots, utilization histograms, checkpoints).

use crate::adam::{AdamParams, AdamState};
use crate::checkpoint;
use crate::config::{ScheduleKind, TrainConfig};
use crate::data::{ring_mixture, sample_latents_with, sample_mixture_with, MixtureSpec, SampleBatch};
use crate::error::{Error, Result};
use crate::losses::{total_disc_loss, total_gen_loss, LossWeights};
use crate::mcl::select_topk;
use crate::metrics::{active_discriminators, mode_coverage, UtilizationHistogram};
use crate::nets::{GeneratorNet, MultiDiscriminator};
use crate::ops::assignment_distribution;
use crate::prd::prd_f_scores;
use crate::rng::SeededRng;
use crate::tape::Tape;
use crate::tensor::Tensor;
use std::io::Write;
use std::path::Path;

// Labels for the independent RNG streams derived from the run seed.
const STREAM_GEN_INIT: u64 = 0;
const STREAM_DISC_INIT: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_LATENT: u64 = 3;
const STREAM_EVAL: u64 = 4;

/// Balance-loss weight at a given step under the configured decay.
pub fn balance_weight(base: f64, step: u64, schedule: ScheduleKind, half_life: u64) -> f64 {
    if base == 0.0 {
        return 0.0;
    }
    match schedule {
        ScheduleKind::Constant => base,
        ScheduleKind::Exponential => base * 0.5f64.powf(step as f64 / half_life.max(1) as f64),
        ScheduleKind::Linear => base * (1.0 - 0.5 * step as f64 / half_life.max(1) as f64).max(0.0),
    }
}

/// Loss-term values recorded after one full training step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepLog {
    pub disc_total: f64,
    pub disc_expert_real: f64,
    pub disc_expert_fake: f64,
    pub disc_nonexpert: f64,
    pub disc_balance: f64,
    pub disc_sparsity: f64,
    pub gen_total: f64,
    pub gen_expert: f64,
    pub gen_nonexpert: f64,
    pub gen_balance: f64,
}

/// Evaluation-time metrics at one step.
#[derive(Clone, Debug)]
pub struct EvalLog {
    pub step: u64,
    pub modes_covered: usize,
    pub high_quality_ratio: f64,
    pub prd_f8: f64,
    pub prd_f1_8: f64,
    pub active_discs: usize,
    pub utilization_entropy: f64,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub spec: MixtureSpec,
    pub gen: GeneratorNet<f64>,
    pub disc: MultiDiscriminator<f64>,
    weights: LossWeights<f64>,
    hp_g: AdamParams<f64>,
    hp_d: AdamParams<f64>,
    gen_opt: Vec<AdamState<f64>>,
    disc_opt: Vec<AdamState<f64>>,
    data_rng: SeededRng,
    latent_rng: SeededRng,
    pub step: u64,
    /// Expert-assignment counts per discriminator since the last eval flush.
    util_counts: Vec<u64>,
    util_rows: u64,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = ring_mixture(cfg.n_components, cfg.radius, cfg.std)?;
        let mut gen_rng = SeededRng::derive(cfg.seed, STREAM_GEN_INIT);
        let mut disc_rng = SeededRng::derive(cfg.seed, STREAM_DISC_INIT);
        let gen = GeneratorNet::new(cfg.d_z, &cfg.gen_hidden, 2, &mut gen_rng)?;
        let disc = MultiDiscriminator::new(2, &cfg.disc_hidden, cfg.m, cfg.leaky_slope, &mut disc_rng)?;

        let mut weights = LossWeights::defaults(cfg.m);
        weights.alpha = cfg.alpha;
        weights.beta_d = cfg.beta_d;
        weights.beta_g = cfg.beta_g;
        weights.gamma = cfg.gamma;
        weights.tau = cfg.tau;
        weights.k = cfg.k;
        weights.soft_label = cfg.soft_label;
        weights.validate(cfg.m)?;

        let gen_opt = gen.param_tensors().iter().map(|t| AdamState::new(t.rows(), t.cols())).collect();
        let disc_opt = disc.param_tensors().iter().map(|t| AdamState::new(t.rows(), t.cols())).collect();
        let hp_g = AdamParams {
            lr: cfg.lr_g,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        };
        let hp_d = AdamParams { lr: cfg.lr_d, ..hp_g };
        Ok(Trainer {
            util_counts: vec![0; cfg.m],
            util_rows: 0,
            data_rng: SeededRng::derive(cfg.seed, STREAM_DATA),
            latent_rng: SeededRng::derive(cfg.seed, STREAM_LATENT),
            spec,
            gen,
            disc,
            weights,
            hp_g,
            hp_d,
            gen_opt,
            disc_opt,
            step: 0,
            cfg,
        })
    }

    fn check_finite(&self, value: f64, what: &str) -> Result<()> {
        if value.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                step: self.step,
                detail: format!("{what} = {value}"),
            })
        }
    }

    /// One discriminator update. Returns the recorded loss terms.
    fn disc_step(&mut self, real: &Tensor<f64>, fake: &Tensor<f64>, bal_w: f64) -> Result<StepLog> {
        let mut tape = Tape::new();
        let params = self.disc.insert_params(&mut tape, true);
        let real_id = tape.constant(real.clone());
        let fake_id = tape.constant(fake.clone());
        let real_out = self.disc.forward(&mut tape, &params, real_id)?;
        let fake_out = self.disc.forward(&mut tape, &params, fake_id)?;

        let v = select_topk(tape.value(real_out.scores), self.cfg.k, true)?;
        for (c, n) in self.util_counts.iter_mut().zip(v.model_counts()) {
            *c += n;
        }
        self.util_rows += v.rows() as u64;

        let terms = total_disc_loss(
            &mut tape,
            real_out.logits,
            real_out.scores,
            fake_out.logits,
            fake_out.scores,
            &v,
            &self.weights,
            bal_w,
            self.cfg.variant,
        )?;
        let log = StepLog {
            disc_total: tape.value(terms.total).item(),
            disc_expert_real: tape.value(terms.expert_real).item(),
            disc_expert_fake: tape.value(terms.expert_fake).item(),
            disc_nonexpert: tape.value(terms.nonexpert).item(),
            disc_balance: tape.value(terms.balance).item(),
            disc_sparsity: tape.value(terms.sparsity).item(),
            ..StepLog::default()
        };
        self.check_finite(log.disc_total, "disc loss")?;
        tape.backward(terms.total)?;
        for ((t, st), &id) in self
            .disc
            .param_tensors_mut()
            .into_iter()
            .zip(self.disc_opt.iter_mut())
            .zip(&params.ids)
        {
            st.step(t, tape.grad(id), &self.hp_d)?;
        }
        Ok(log)
    }

    /// One generator update through the frozen discriminator bank.
    fn gen_step(&mut self, z: &Tensor<f64>, q_target: &[f64], bal_w: f64) -> Result<StepLog> {
        let mut tape = Tape::new();
        let gen_params = self.gen.insert_params(&mut tape, true);
        let disc_params = self.disc.insert_params(&mut tape, false);
        let z_id = tape.constant(z.clone());
        let fake = self.gen.forward(&mut tape, &gen_params, z_id)?;
        let out = self.disc.forward(&mut tape, &disc_params, fake)?;

        let u = select_topk(tape.value(out.scores), self.cfg.k, true)?;
        let terms = total_gen_loss(
            &mut tape,
            out.logits,
            out.scores,
            &u,
            q_target,
            &self.weights,
            bal_w,
            self.cfg.variant,
        )?;
        let log = StepLog {
            gen_total: tape.value(terms.total).item(),
            gen_expert: tape.value(terms.expert).item(),
            gen_nonexpert: tape.value(terms.nonexpert).item(),
            gen_balance: tape.value(terms.balance).item(),
            ..StepLog::default()
        };
        self.check_finite(log.gen_total, "gen loss")?;
        tape.backward(terms.total)?;
        for ((t, st), &id) in self
            .gen
            .param_tensors_mut()
            .into_iter()
            .zip(self.gen_opt.iter_mut())
            .zip(&gen_params.ids)
        {
            st.step(t, tape.grad(id), &self.hp_g)?;
        }
        Ok(log)
    }

    /// One full alternating step (discriminator update(s), then generator).
    pub fn train_step(&mut self) -> Result<StepLog> {
        let bal_d = balance_weight(self.cfg.beta_d, self.step, self.cfg.schedule, self.cfg.half_life);
        let bal_g = balance_weight(self.cfg.beta_g, self.step, self.cfg.schedule, self.cfg.half_life);

        let mut log = StepLog::default();
        let mut real = SampleBatch { points: vec![], labels: vec![] };
        for _ in 0..self.cfg.disc_steps_per_gen {
            real = sample_mixture_with(&self.spec, self.cfg.n_d, &mut self.data_rng);
            let real_t = points_tensor(&real.points);
            let z_rows = sample_latents_with(self.cfg.n_g, self.cfg.d_z, &mut self.latent_rng);
            let z = Tensor::from_rows(&z_rows)?;
            let fake = self.gen.eval(&z)?;
            log = self.disc_step(&real_t, &fake, bal_d)?;
        }

        // The generator's balance target q comes from the updated
        // discriminators on the last real batch, detached.
        let real_t = points_tensor(&real.points);
        let real_logits = self.disc.eval_logits(&real_t)?;
        let rows: Vec<&[f64]> = (0..real_logits.rows()).map(|i| real_logits.row(i)).collect();
        let q_target = assignment_distribution(&rows, self.cfg.tau)?;

        let z_rows = sample_latents_with(self.cfg.n_g, self.cfg.d_z, &mut self.latent_rng);
        let z = Tensor::from_rows(&z_rows)?;
        let gen_log = self.gen_step(&z, &q_target, bal_g)?;

        log.gen_total = gen_log.gen_total;
        log.gen_expert = gen_log.gen_expert;
        log.gen_nonexpert = gen_log.gen_nonexpert;
        log.gen_balance = gen_log.gen_balance;
        self.step += 1;
        Ok(log)
    }

    /// Generate `n` samples from a dedicated stream (doesn't disturb training).
    pub fn generate(&self, n: usize, label: u64) -> Result<Vec<[f64; 2]>> {
        let mut rng = SeededRng::derive(self.cfg.seed, STREAM_EVAL ^ (label.wrapping_mul(0x9e37_79b9)));
        generate_with(&self.gen, self.cfg.d_z, n, &mut rng)
    }

    /// Utilization histogram since the last flush.
    pub fn utilization(&self) -> UtilizationHistogram {
        UtilizationHistogram::from_counts(self.util_counts.clone(), self.util_rows)
    }

    pub fn flush_utilization(&mut self) {
        self.util_counts.iter_mut().for_each(|c| *c = 0);
        self.util_rows = 0;
    }

    pub fn evaluate(&self) -> Result<EvalLog> {
        let fakes = self.generate(self.cfg.eval_samples, self.step)?;
        let coverage = mode_coverage(
            &fakes,
            &self.spec,
            self.cfg.coverage_dist_sigma * self.spec.std,
            self.cfg.coverage_count_threshold,
        )?;
        let n_prd = self.cfg.prd_samples.min(fakes.len());
        let real = crate::data::sample_mixture(
            &self.spec,
            n_prd,
            self.cfg.seed ^ 0x5eed_0000 ^ self.step,
        );
        let (f8, f1_8) = prd_f_scores(&real.points, &fakes[..n_prd], self.cfg.prd_bins, self.cfg.seed)?;
        let hist = self.utilization();
        Ok(EvalLog {
            step: self.step,
            modes_covered: coverage.modes_covered,
            high_quality_ratio: coverage.high_quality_ratio,
            prd_f8: f8,
            prd_f1_8: f1_8,
            active_discs: active_discriminators(&hist, self.cfg.activity_threshold),
            utilization_entropy: hist.normalized_entropy(),
        })
    }
}

fn points_tensor(points: &[[f64; 2]]) -> Tensor<f64> {
    let data = points.iter().flat_map(|p| [p[0], p[1]]).collect();
    Tensor::from_vec(points.len(), 2, data).expect("points shape")
}

/// Push latent draws through a generator.
pub fn generate_with(
    gen: &GeneratorNet<f64>,
    d_z: usize,
    n: usize,
    rng: &mut SeededRng,
) -> Result<Vec<[f64; 2]>> {
    let z_rows = sample_latents_with(n, d_z, rng);
    let z = Tensor::from_rows(&z_rows)?;
    let out = gen.eval(&z)?;
    Ok((0..out.rows()).map(|i| [out.get(i, 0), out.get(i, 1)]).collect())
}

/// Final-state summary returned by a full run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_eval: EvalLog,
    pub evals: Vec<EvalLog>,
}

fn write_utilization_csv(path: &Path, hist: &UtilizationHistogram) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "discriminator,count,share")?;
    let shares = hist.shares();
    for (i, (&c, s)) in hist.counts.iter().zip(&shares).enumerate() {
        writeln!(f, "{i},{c},{s}")?;
    }
    Ok(())
}

/// Train to completion, writing metrics.csv, snapshots, utilization
/// histograms, checkpoints, and config.echo under `out_dir`.
pub fn run_experiment(cfg: &TrainConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.echo"), cfg.echo())?;

    let mut trainer = Trainer::new(cfg.clone())?;
    let mut metrics = std::fs::File::create(out_dir.join("metrics.csv"))?;
    writeln!(
        metrics,
        "step,disc_total,disc_expert_real,disc_expert_fake,disc_nonexpert,disc_balance,disc_sparsity,\
         gen_total,gen_expert,gen_nonexpert,gen_balance,modes_covered,high_quality_ratio,\
         prd_f8,prd_f1_8,active_discs,utilization_entropy,balance_weight_d"
    )?;

    let mut evals = Vec::new();
    let mut last_log = StepLog::default();
    while trainer.step < cfg.steps {
        last_log = trainer.train_step()?;
        let step = trainer.step;
        if step % cfg.eval_interval == 0 || step == cfg.steps {
            let ev = trainer.evaluate()?;
            let bw = balance_weight(cfg.beta_d, step, cfg.schedule, cfg.half_life);
            writeln!(
                metrics,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                step,
                last_log.disc_total,
                last_log.disc_expert_real,
                last_log.disc_expert_fake,
                last_log.disc_nonexpert,
                last_log.disc_balance,
                last_log.disc_sparsity,
                last_log.gen_total,
                last_log.gen_expert,
                last_log.gen_nonexpert,
                last_log.gen_balance,
                ev.modes_covered,
                ev.high_quality_ratio,
                ev.prd_f8,
                ev.prd_f1_8,
                ev.active_discs,
                ev.utilization_entropy,
                bw
            )?;
            evals.push(ev);
        }
        if cfg.snapshot_steps.contains(&step) || step == cfg.steps {
            let fakes = trainer.generate(cfg.eval_samples, step)?;
            let batch = SampleBatch {
                labels: vec![0; fakes.len()],
                points: fakes,
            };
            batch.write_csv(&out_dir.join(format!("snapshot_{step}.csv")))?;
            write_utilization_csv(&out_dir.join(format!("utilization_{step}.csv")), &trainer.utilization())?;
            checkpoint::from_nets(&trainer.gen, &trainer.disc)?
                .write(&out_dir.join(format!("checkpoint_{step}.ckpt")))?;
        }
        if step % cfg.eval_interval == 0 {
            trainer.flush_utilization();
        }
    }
    let _ = last_log;
    let final_eval = match evals.last() {
        Some(ev) if ev.step == trainer.step => ev.clone(),
        _ => trainer.evaluate()?,
    };
    Ok(RunSummary {
        final_eval,
        evals,
    })
}
