"""Class-rebalancing of box-annotated detection datasets by style-domain
color transfer of minority-class images, with human QC gating the export."""

from .dataset import (
    BoundingBox,
    ClassDistribution,
    Dataset,
    DatasetError,
    ImageRecord,
    class_distribution,
    load_dataset,
    parse_voc_annotation,
    serialize_voc_annotation,
    split_dataset,
)
from .domains import (
    DomainAnchor,
    DomainPool,
    balance_domain_pool,
    build_domain_pools,
    classify_style,
)
from .selection import (
    AugmentationJob,
    AugmentationPlan,
    MinoritySpec,
    identify_minority_classes,
    plan_augmentation,
    score_image,
    select_images,
)
from .transfer import (
    StyleTarget,
    TranslationResult,
    Translator,
    adversarial_loss,
    apply_haze,
    color_transfer,
    compute_style_target,
    cycle_loss,
    translate,
)
from .qc import DecisionLog, QCFlags, ReviewItem, auto_flag, record_decision
from .export import ExportManifest, export_balanced_dataset, verify_balance

__version__ = "0.1.0"
