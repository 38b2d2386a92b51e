"""scikit-learn style front end.

``fit`` takes the instance bank (the "training" cutouts), ``transform`` takes
``(background, context)`` pairs and returns augmented samples. All tunables
are constructor parameters, so ``get_params``/``set_params``/``clone`` work
as usual.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .annotations import default_class_table
from .bank import Bank, InstanceCutout
from .config import PipelineConfig
from .context import SceneContext
from .placement import augment_indexed


class ContextCopyPaste(BaseEstimator):
    """Traffic-context-aware copy-paste augmenter.

    Parameters mirror :class:`ctxpaste.config.PipelineConfig`; ``class_table``
    defaults to the bank's categories in sorted order. ``start_index`` offsets
    the image index used to derive each sample's random stream.

    Examples
    --------
    >>> aug = ContextCopyPaste(seed=42).fit(bank)            # doctest: +SKIP
    >>> samples = aug.transform([(background, ctx)])         # doctest: +SKIP
    """

    def __init__(self, instances_per_image=5, depth_min_m=5.0, depth_max_m=60.0,
                 lane_prior_prob=0.5, lane_lateral_sigma_px=15.0, max_attempts_per_instance=50,
                 occlusion_threshold=0.5, freespace_fraction=0.8, contact_fraction=0.6,
                 hsv_scale_min=0.5, hsv_scale_max=2.0, hsv_scale_direction="match_region",
                 hsv_adapt=True, blend_mode="poisson", feather_sigma=1.5, poisson_tol=1e-4,
                 poisson_max_iters=10_000, horizontal_flip_prob=0.0, clip_occluded_boxes=False,
                 seed=0, class_table=None, start_index=0, provenance=False):
        self.instances_per_image = instances_per_image
        self.depth_min_m = depth_min_m
        self.depth_max_m = depth_max_m
        self.lane_prior_prob = lane_prior_prob
        self.lane_lateral_sigma_px = lane_lateral_sigma_px
        self.max_attempts_per_instance = max_attempts_per_instance
        self.occlusion_threshold = occlusion_threshold
        self.freespace_fraction = freespace_fraction
        self.contact_fraction = contact_fraction
        self.hsv_scale_min = hsv_scale_min
        self.hsv_scale_max = hsv_scale_max
        self.hsv_scale_direction = hsv_scale_direction
        self.hsv_adapt = hsv_adapt
        self.blend_mode = blend_mode
        self.feather_sigma = feather_sigma
        self.poisson_tol = poisson_tol
        self.poisson_max_iters = poisson_max_iters
        self.horizontal_flip_prob = horizontal_flip_prob
        self.clip_occluded_boxes = clip_occluded_boxes
        self.seed = seed
        self.class_table = class_table
        self.start_index = start_index
        self.provenance = provenance

    def _make_config(self) -> PipelineConfig:
        params = self.get_params()
        params.pop("start_index")
        params.pop("provenance")
        params["class_table"] = dict(params["class_table"] or {})
        return PipelineConfig(**params)

    @classmethod
    def from_config(cls, cfg: PipelineConfig, **kwargs) -> "ContextCopyPaste":
        params = cfg.to_dict()
        params["class_table"] = params["class_table"] or None
        params.update(kwargs)
        return cls(**params)

    def fit(self, X, y=None):
        """Store the instance bank; ``X`` is a :class:`Bank` or an iterable of cutouts."""
        if isinstance(X, Bank):
            bank = X
        else:
            cutouts = tuple(X)
            if not all(isinstance(c, InstanceCutout) for c in cutouts):
                raise TypeError("fit expects a Bank or an iterable of InstanceCutout")
            bank = Bank(cutouts)
        self.config_ = self._make_config()
        self.bank_ = bank
        self.class_table_ = dict(self.config_.class_table) or default_class_table(bank.categories)
        missing = [c for c in bank.categories if c not in self.class_table_]
        if missing:
            raise ValueError(f"class_table has no id for {', '.join(missing)}")
        self.categories_ = bank.categories
        return self

    def transform(self, X):
        """Augment every ``(background, context)`` pair; returns a list of samples."""
        check_is_fitted(self, "bank_")
        samples = []
        for offset, item in enumerate(X):
            try:
                background, ctx = item
            except (TypeError, ValueError):
                raise TypeError("transform expects (background, SceneContext) pairs") from None
            if not isinstance(ctx, SceneContext):
                raise TypeError(f"expected a SceneContext, got {type(ctx).__name__}")
            background = check_image(background, "background")
            samples.append(augment_indexed(background, ctx, self.bank_, self.config_,
                                           self.start_index + offset, provenance=self.provenance))
        return samples

    def fit_transform(self, bank, scenes):
        return self.fit(bank).transform(scenes)
