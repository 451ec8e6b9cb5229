"""Training loop: L1 loss, Adam, step decay, validation and checkpoints."""
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .checkpoint import ModelCheckpoint, save_checkpoint
from .config import RunConfig
from .dataset import BatchProducer, PatchBatch, lr_schedule
from .evaluation import evaluate
from .image_io import ImagePlane
from .model import MetaSR
from .optim import Adam
from .run_log import RunLog
from .tensor import Tensor, l1_loss
from .utils import resolve_thread_count

logger = logging.getLogger(__name__)

LOG_FILENAME = "train_log.jsonl"


class Trainer:
    """Trains one MetaSR model on HR images, all scales sharing the network."""

    def __init__(
        self,
        config: RunConfig,
        hr_images: Sequence[ImagePlane],
        val_images: Sequence[ImagePlane] = None,
        checkpoint: ModelCheckpoint = None,
        progress: bool = True,
    ):
        """
        Initialize trainer.

        Args:
            config: Run configuration
            hr_images: Training HR images
            val_images: Validation HR images (validation skipped when empty)
            checkpoint: Resume from this checkpoint instead of a fresh model
            progress: Show tqdm progress bars
        """
        self.config = config
        self.val_images = list(val_images or [])
        self.progress = progress
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.workers = resolve_thread_count(config.deterministic, config.threads)
        self.run_log = RunLog(self.output_dir / LOG_FILENAME)

        seed = config.seed
        if checkpoint is None:
            self.model = MetaSR(config.model_config(), rng=np.random.default_rng(seed), dtype=config.numpy_dtype)
            self.optimizer = Adam(self.model.parameters(), learning_rate=lr_schedule(0, config.learning_rate, config.decay_every))
            self.epoch = 0
            self.global_step = 0
        else:
            self.model = checkpoint.build_model()
            if self.model.config != config.model_config():
                logger.warning("checkpoint architecture differs from the configured one; using the checkpoint's")
            self.optimizer = checkpoint.build_optimizer(self.model)
            if self.optimizer is None:
                logger.warning("checkpoint has no optimizer state; Adam restarts from zero moments")
                self.optimizer = Adam(self.model.parameters(), learning_rate=config.learning_rate)
            self.epoch = int(checkpoint.metadata.get("epoch", 0))
            self.global_step = int(checkpoint.metadata.get("global_step", 0))
            seed = int(checkpoint.metadata.get("seed", seed))
            logger.info("resuming at epoch %d, step %d", self.epoch, self.global_step)
        self.seed = seed
        self.last_checkpoint: Optional[Path] = None

        self.producer = BatchProducer(
            hr_images,
            seed=seed,
            batch_size=config.batch_size,
            lr_patch_size=config.lr_patch_size,
            fixed_scale=config.finetune_scale,
            threaded=self.workers > 1,
            dtype=config.numpy_dtype,
        )

    def train_step(self, batch: PatchBatch) -> float:
        """
        One optimizer update on a batch.

        Returns:
            L1 loss before the update
        """
        sr = self.model(Tensor(batch.lr_patches), batch.scale)
        loss = l1_loss(sr, Tensor(batch.hr_patches))
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.model.invalidate_cache()
        self.global_step += 1
        return loss.item()

    def train_epoch(self) -> float:
        """
        Run iterations_per_epoch steps at this epoch's learning rate.

        Returns:
            Mean loss of the epoch
        """
        cfg = self.config
        self.optimizer.learning_rate = lr_schedule(self.epoch, cfg.learning_rate, cfg.decay_every)
        losses = []
        batches = self.producer.iterate(self.global_step, cfg.iterations_per_epoch)
        bar = tqdm(batches, total=cfg.iterations_per_epoch, desc=f"Epoch {self.epoch + 1}", disable=not self.progress)
        for batch in bar:
            loss = self.train_step(batch)
            losses.append(loss)
            bar.set_postfix(loss=f"{loss:.4f}", scale=batch.scale)
            self.run_log.write(
                "step",
                epoch=self.epoch,
                step=self.global_step,
                scale=batch.scale,
                loss=loss,
                learning_rate=self.optimizer.learning_rate,
            )
        self.epoch += 1
        mean_loss = float(np.mean(losses))
        self.run_log.write("epoch", epoch=self.epoch, step=self.global_step, mean_loss=mean_loss,
                           learning_rate=self.optimizer.learning_rate)
        return mean_loss

    def validate(self) -> Dict[float, float]:
        """
        Mean Y-PSNR on the validation images for each configured scale.

        Returns:
            {scale: psnr}, empty when there are no validation images
        """
        if not self.val_images:
            return {}
        results = evaluate(
            self.model,
            self.val_images,
            self.config.val_scales,
            shave_for=self.config.shave_for,
            workers=self.workers,
            progress=False,
        )
        psnr = {res.scale: res.psnr for res in results}
        for res in results:
            self.run_log.write("validation", epoch=self.epoch, scale=res.scale, psnr=res.psnr, ssim=res.ssim)
        return psnr

    def metadata(self) -> Dict[str, object]:
        return {
            "epoch": self.epoch,
            "global_step": self.global_step,
            "seed": self.seed,
            "run_config": self.config.to_dict(),
            "saved_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }

    def save(self, path=None) -> Path:
        """
        Write a checkpoint (default: <output_dir>/epoch_<NNNN>.ckpt).

        Returns:
            Path written
        """
        path = Path(path) if path else self.output_dir / f"epoch_{self.epoch:04d}.ckpt"
        save_checkpoint(path, self.model, self.optimizer, self.metadata())
        self.run_log.write("checkpoint", epoch=self.epoch, step=self.global_step, path=str(path))
        return path

    def fit(self, epochs: Optional[int] = None) -> List[float]:
        """
        Train until ``epochs`` epochs have completed in total.

        Args:
            epochs: Total epoch count (config.epochs when None)

        Returns:
            Mean loss of each epoch run by this call
        """
        cfg = self.config
        target = cfg.epochs if epochs is None else epochs
        history = []
        while self.epoch < target:
            mean_loss = self.train_epoch()
            history.append(mean_loss)
            logger.info("epoch %d: mean loss %.5f", self.epoch, mean_loss)
            if self.epoch % cfg.validate_every == 0 or self.epoch == target:
                for scale, psnr in self.validate().items():
                    logger.info("validation x%s: %.2f dB", scale, psnr)
            if self.epoch % cfg.save_every == 0 or self.epoch == target:
                self.last_checkpoint = self.save()
        return history
