from sqlalchemy import (
    Column,
    Integer,
    String,
    DateTime,
    func,
    Float,
    ForeignKey,
    Boolean,
)
from sqlalchemy.orm import Session, relationship

from .database import Base


class ScenarioRun(Base):
    """One CLI invocation: which scenario ran, where it wrote and how it ended."""

    __tablename__ = "scenario_runs"

    id = Column(Integer, primary_key=True, index=True)
    scenario_hash = Column(String(16), nullable=True, index=True)
    command = Column(String(32), nullable=False)
    model = Column(String(32), nullable=True)
    n_sites = Column(Integer, nullable=True)
    output_dir = Column(String(500), nullable=True)
    n_tables = Column(Integer, nullable=False, server_default="0")
    status = Column(String(16), nullable=False, server_default="ok")
    created_at = Column(DateTime(timezone=True), server_default=func.now())


class OracleCheck(Base):
    __tablename__ = "oracle_checks"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("scenario_runs.id"), nullable=False, index=True)
    name = Column(String(100), nullable=False)
    max_abs_diff = Column(Float, nullable=False)
    tolerance = Column(Float, nullable=False)
    passed = Column(Boolean, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    run = relationship("ScenarioRun", backref="oracle_checks")


def record_run(
    db: Session,
    command: str,
    *,
    scenario_hash: str | None = None,
    model: str | None = None,
    n_sites: int | None = None,
    output_dir: str | None = None,
    n_tables: int = 0,
    status: str = "ok",
) -> ScenarioRun:
    run = ScenarioRun(
        scenario_hash=scenario_hash,
        command=command,
        model=model,
        n_sites=n_sites,
        output_dir=output_dir,
        n_tables=n_tables,
        status=status,
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def record_oracle_checks(db: Session, run: ScenarioRun, reports) -> list[OracleCheck]:
    """Persist a list of `OracleReport` objects against a run."""
    rows = [
        OracleCheck(
            run_id=run.id,
            name=r.name,
            max_abs_diff=float(r.max_abs_diff),
            tolerance=float(r.tolerance),
            passed=bool(r.passed),
        )
        for r in reports
    ]
    db.add_all(rows)
    db.commit()
    return rows
