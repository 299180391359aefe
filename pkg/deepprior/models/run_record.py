from datetime import datetime, timezone
from typing import ClassVar, Optional
import uuid

from pydantic import field_validator
from sqlalchemy import DateTime
from sqlmodel import Field, SQLModel


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class EvalRecord(SQLModel, table=True):
    """One evaluated configuration (a single evaluate run or ablation cell)."""

    __tablename__: ClassVar[str] = "eval_records"

    id: str = Field(default_factory=lambda: str(uuid.uuid4()), primary_key=True)
    created_at: datetime = Field(default_factory=utc_now, sa_type=DateTime(timezone=True))
    label: str = Field(index=True)
    fingerprint: str = Field(index=True)
    status: str = Field(default="success")  # success, error
    message: Optional[str] = None

    average_error_mm: Optional[float] = None
    localization_error_mm: Optional[float] = None
    fps: Optional[float] = None
    frame_count: int = Field(default=0)
    per_joint_json: Optional[str] = None  # JSON list of per-joint means in mm


class EvalRecordRead(SQLModel):
    """Schema for reading evaluation records."""
    id: str
    created_at: datetime
    label: str
    fingerprint: str
    status: str
    average_error_mm: Optional[float]
    frame_count: int

    @field_validator("created_at")
    @classmethod
    def assume_utc(cls, value: datetime) -> datetime:
        # SQLite hands timestamps back without their zone
        return value if value.tzinfo is not None else value.replace(tzinfo=timezone.utc)
