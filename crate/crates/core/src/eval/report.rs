//! Report serialization. JSON carries a `schema` id per report type; CSV is
//! one row per epoch / key / trial / class for external plotting.

use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use super::{AttackCurve, EvalReport, LatencyReport, SweepReport};
use crate::error::{Error, Result};
use crate::nn::{Prediction, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

pub trait Report: Serialize {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()>;
    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()>;
}

pub fn emit_report<R: Report + ?Sized, W: Write>(
    report: &R,
    format: ReportFormat,
    mut sink: W,
) -> Result<()> {
    match format {
        ReportFormat::Text => report.write_text(&mut sink)?,
        ReportFormat::Csv => report.write_csv(&mut sink)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, report)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

impl Report for EvalReport {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "dataset:   {}", self.dataset)?;
        writeln!(w, "mode:      {:?}", self.mode)?;
        writeln!(
            w,
            "accuracy:  {:.4} ({}/{})",
            self.accuracy, self.correct, self.sample_count
        )?;
        writeln!(w, "nan preds: {:.4}", self.nan_prediction_fraction)?;
        for (c, (ok, n)) in self
            .per_class_correct
            .iter()
            .zip(&self.per_class_total)
            .enumerate()
        {
            writeln!(w, "  class {c}: {ok}/{n}")?;
        }
        Ok(())
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "class,correct,total")?;
        for (c, (ok, n)) in self
            .per_class_correct
            .iter()
            .zip(&self.per_class_total)
            .enumerate()
        {
            writeln!(w, "{c},{ok},{n}")?;
        }
        Ok(())
    }
}

impl Report for SweepReport {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "dataset:  {}", self.dataset)?;
        writeln!(w, "keys:     {} (seed {})", self.n_keys, self.key_seed)?;
        writeln!(
            w,
            "accuracy: mean {:.4}  min {:.4}  max {:.4}",
            self.mean, self.min, self.max
        )
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "key_index,accuracy")?;
        for (i, a) in self.per_key_accuracy.iter().enumerate() {
            writeln!(w, "{i},{a}")?;
        }
        Ok(())
    }
}

impl Report for LatencyReport {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "parameters:  {}", self.param_count)?;
        writeln!(
            w,
            "trials:      {} (+{} warmup)",
            self.n_trials, self.warmup_trials
        )?;
        writeln!(w, "plaintext:   {:.6} ms", self.plain_mean * 1e3)?;
        writeln!(w, "locked:      {:.6} ms", self.locked_mean * 1e3)?;
        writeln!(
            w,
            "overhead:    {:.6} ms (x{:.3})",
            self.overhead_seconds * 1e3,
            self.overhead_ratio
        )?;
        writeln!(w, "timer:       {}", self.timer)
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "trial,plain_seconds,locked_seconds")?;
        for (i, (p, l)) in self
            .plain_samples
            .iter()
            .zip(&self.locked_samples)
            .enumerate()
        {
            writeln!(w, "{i},{p},{l}")?;
        }
        Ok(())
    }
}

impl Report for AttackCurve {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "init:      {:?}", self.init)?;
        writeln!(
            w,
            "manifest:  {} samples ({})",
            self.manifest_size, self.manifest
        )?;
        writeln!(
            w,
            "training:  {} epochs, batch {}, lr {}",
            self.epochs, self.batch_size, self.learning_rate
        )?;
        writeln!(w, "initial:   {:.4}", self.initial_val_accuracy)?;
        for (e, a) in self.per_epoch_val_accuracy.iter().enumerate() {
            writeln!(w, "  epoch {e:>3}: {a:.4}")?;
        }
        writeln!(w, "final:     {:.4}", self.final_accuracy)?;
        writeln!(w, "non-finite loss epochs: {}", self.non_finite_loss_epochs)
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "epoch,val_accuracy")?;
        for (e, a) in self.per_epoch_val_accuracy.iter().enumerate() {
            writeln!(w, "{e},{a}")?;
        }
        Ok(())
    }
}

impl Report for TrainReport {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        for e in &self.epochs {
            writeln!(
                w,
                "epoch {:>3}: loss {:.5}  train acc {:.4}{}",
                e.epoch,
                e.mean_loss,
                e.train_accuracy,
                if e.non_finite_batches > 0 {
                    format!("  ({} non-finite batches)", e.non_finite_batches)
                } else {
                    String::new()
                }
            )?;
        }
        Ok(())
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "epoch,mean_loss,train_accuracy,non_finite_batches")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{}",
                e.epoch, e.mean_loss, e.train_accuracy, e.non_finite_batches
            )?;
        }
        Ok(())
    }
}

impl Report for Prediction {
    fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "class:  {}", self.class_index)?;
        if self.nan_flag {
            writeln!(w, "warning: non-finite logits")?;
        }
        let shown: Vec<String> = self.logits.iter().map(|z| format!("{z:.5}")).collect();
        writeln!(w, "logits: [{}]", shown.join(", "))
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "class,logit")?;
        for (c, z) in self.logits.iter().enumerate() {
            writeln!(w, "{c},{z}")?;
        }
        Ok(())
    }
}
