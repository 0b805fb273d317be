"""Desk-scale news classification toolkit: subword tokenization with
domain-token extension, a small transformer encoder trained with a
temperature-scheduled cross entropy and embedding-level adversarial
perturbations, hard-sample augmentation, score-level fusion of two models,
and support-weighted evaluation metrics."""

from newsclf import advtrain, encoder, metrics, ndtensor, objective, pipeline, synthdata, textprep, tokenizer
from newsclf.advtrain import AdvConfig, Batch, adversarial_training_step, fgm_perturbation
from newsclf.encoder import (
    EncoderModel,
    FusionHead,
    ModelConfig,
    PredictedFeatures,
    embed,
    embed_batch,
    forward,
    fuse,
    init_fusion_head,
    init_model,
    parameter_count,
)
from newsclf.metrics import confusion_counts, report_to_table, weighted_report
from newsclf.objective import TemperatureSchedule, batch_loss, heated_ce_loss, schedule_alpha
from newsclf.pipeline import (
    RunConfig,
    augment,
    evaluate,
    harvest_hard_samples,
    load_model,
    predict,
    save_model,
    train,
    train_fused,
)
from newsclf.textprep import NewsExample, clean_text, load_dataset, load_stopwords
from newsclf.tokenizer import (
    DEFAULT_DOMAIN_TOKENS,
    Vocabulary,
    build_vocab,
    encode,
    extend_vocab,
)

__version__ = "0.1.0"
