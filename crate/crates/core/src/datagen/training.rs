//! Hyper-parameter files for continued pre-training and fine-tuning.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::DatagenError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingStage {
    Pretrain,
    Sft,
}

impl FromStr for TrainingStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pretrain" | "pt" => Ok(TrainingStage::Pretrain),
            "sft" | "finetune" => Ok(TrainingStage::Sft),
            other => Err(format!("unknown training stage {other:?} (pretrain or sft)")),
        }
    }
}

impl fmt::Display for TrainingStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingStage::Pretrain => "pretrain",
            TrainingStage::Sft => "sft",
        })
    }
}

/// Ordered `key=value` entries; values are written exactly as given.
pub fn training_config(stage: TrainingStage) -> [(&'static str, &'static str); 6] {
    let (batch, accum) = match stage {
        TrainingStage::Pretrain => ("16", "1"),
        TrainingStage::Sft => ("8", "2"),
    };
    [
        ("per_device_train_batch_size", batch),
        ("gradient_accumulation_steps", accum),
        ("learning_rate", "1.0e-4"),
        ("num_train_epochs", "1"),
        ("lr_scheduler_type", "cosine"),
        ("warmup_ratio", "0.1"),
    ]
}

pub fn render_training_config(stage: TrainingStage) -> String {
    training_config(stage)
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

pub fn export_training_config(stage: TrainingStage, path: &Path) -> Result<(), DatagenError> {
    std::fs::write(path, render_training_config(stage)).map_err(|e| DatagenError::io(path, e))
}
