"""
Pydantic schemas for regression results, interpretation verdicts and scorecards.
"""

from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict, Literal
from enum import Enum

from app.models.schemas import Modality, Outcome, PredictionSource


class SignificanceTier(str, Enum):
    """Significance marker used in every report"""

    STRONG = "*"
    WEAK = "W"
    NONE = ""


class Verdict(str, Enum):
    """Outcome of the two-step filter for one relationship"""

    PASS_POSITIVE = "pass_positive"
    PASS_SAME_DIRECTION = "pass_same_direction"
    FILTERED_STEP1 = "filtered_step1"
    FILTERED_STEP2 = "filtered_step2"
    FILTERED_EQ8 = "filtered_eq8"

    @property
    def passed(self) -> bool:
        return self in (Verdict.PASS_POSITIVE, Verdict.PASS_SAME_DIRECTION)


# ============================================================================
# Regression Results
# ============================================================================


class FitTerm(BaseModel):
    """One estimated coefficient"""

    term: str
    estimate: float
    se: float
    statistic: float
    p_value: float
    tier: SignificanceTier = SignificanceTier.NONE
    pct_change: float

    @property
    def significant(self) -> bool:
        return self.tier is SignificanceTier.STRONG

    def formatted(self, value: Optional[float] = None) -> str:
        """Percent change with its tier suffix, e.g. 27.60*"""
        value = self.pct_change if value is None else value
        return f"{value:.2f}{self.tier.value}"


class FitResult(BaseModel):
    """A fitted regression with all of its terms"""

    equation_id: str
    model_kind: Literal["ols", "logit"]
    n_obs: int
    df_resid: int
    terms: Dict[str, FitTerm] = Field(default_factory=dict)
    dropped: List[str] = Field(default_factory=list, description="Constant or aliased columns removed")
    penalized: bool = False
    separation: bool = False
    notes: List[str] = Field(default_factory=list)

    def term(self, name: str) -> Optional[FitTerm]:
        return self.terms.get(name)


# ============================================================================
# Interpretation
# ============================================================================


class RelationshipRecord(BaseModel):
    """One (modality, element, outcome) association through the two-step filter"""

    modality: Modality
    element: str
    outcome: Outcome
    data_type: str = Field(default="", description="Text field, audio, thumbnail or avg5 frames")
    step1: Optional[FitTerm] = None
    step2: Optional[FitTerm] = None
    eq8: Optional[FitTerm] = None
    verdict: Verdict

    @property
    def key(self) -> str:
        return f"{self.modality.value}|{self.data_type}|{self.element}|{self.outcome.value}"


class HypothesisSet(BaseModel):
    """Ordered relationships with per-stage filter counts"""

    records: List[RelationshipRecord] = Field(default_factory=list)
    counts: Dict[str, int] = Field(default_factory=dict)
    slice: str = "beginning"

    @model_validator(mode="after")
    def _check_counts(self):
        if self.counts and sum(self.counts.values()) != len(self.records):
            raise ValueError("Verdict counts must sum to the number of candidates")
        return self

    @property
    def survivors(self) -> List[RelationshipRecord]:
        return [r for r in self.records if r.verdict.passed]


class LearningContrast(BaseModel):
    """Half-specific slopes of one element for one influencer group"""

    category_id: str
    element: str
    group: Literal["micro", "mega"]
    half1: Optional[FitTerm] = None
    half2: Optional[FitTerm] = None
    skipped: List[str] = Field(default_factory=list)

    @property
    def significant_in_both(self) -> bool:
        return bool(self.half1 and self.half2 and self.half1.significant and self.half2.significant)


# ============================================================================
# Scoring
# ============================================================================


class PDPBounds(BaseModel):
    """Training-sample prediction range per element and outcome"""

    bounds: Dict[str, Dict[str, List[float]]] = Field(
        default_factory=dict,
        description="outcome -> element -> [min, max]"
    )

    def get(self, outcome: Outcome, element: PredictionSource) -> List[float]:
        return self.bounds[outcome.value][element.value]

    def degenerate(self, outcome: Outcome, element: PredictionSource) -> bool:
        lo, hi = self.get(outcome, element)
        return lo == hi


class Scorecard(BaseModel):
    """Per-element scores and overall score per outcome for one video"""

    video_id: str
    element_scores: Dict[str, Dict[str, float]] = Field(
        default_factory=dict,
        description="outcome -> element -> score in [0, 100]"
    )
    weights: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    overall: Dict[str, float] = Field(default_factory=dict)
    clipped: List[str] = Field(default_factory=list, description="outcome|element pairs clipped to [0, 100]")
    degenerate: List[str] = Field(default_factory=list)


class VarianceShare(BaseModel):
    """Branded-content variance decomposition"""

    metric_kind: Literal["rmse", "accuracy"]
    improvement_brand: float
    improvement_full: float
    share: float
