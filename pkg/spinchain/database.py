"""Run ledger storage: engine, session factory and the declarative base."""
import os
from contextlib import contextmanager
from typing import Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from .logger_config import setup_logger

logger = setup_logger(__name__)

DEFAULT_LEDGER_URL = "sqlite:///./spinchain_runs.db"
SQLALCHEMY_DATABASE_URL = os.getenv("SPINCHAIN_DATABASE_URL", DEFAULT_LEDGER_URL)


def make_engine(url: str) -> Engine:
    # sqlite connections are shared with the CLI's worker threads
    if url.startswith("sqlite"):
        return create_engine(url, connect_args={"check_same_thread": False})
    return create_engine(url)


engine = make_engine(SQLALCHEMY_DATABASE_URL)

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


@contextmanager
def get_session(factory: Optional[sessionmaker] = None) -> Iterator[Session]:
    """Ledger session that is rolled back on error and always closed."""
    db: Session = (factory or SessionLocal)()
    try:
        yield db
    except Exception:
        db.rollback()
        logger.error("Ledger write failed; rolled back")
        raise
    finally:
        db.close()


def init_db(bind=None) -> None:
    # registers the ledger tables on Base.metadata
    from . import models  # noqa: F401

    Base.metadata.create_all(bind=bind or engine)
