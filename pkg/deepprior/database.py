from typing import Generator, Optional

from sqlmodel import SQLModel, Session, create_engine

from deepprior.config import DATABASE_URL

_engines = {}


def get_engine(url: Optional[str] = None):
    """Return a cached engine for the given URL (defaults to DATABASE_URL)."""
    url = url or DATABASE_URL
    if url not in _engines:
        _engines[url] = create_engine(url, echo=False)
    return _engines[url]


def create_db_and_tables(url: Optional[str] = None):
    """Create all database tables."""
    # Registers the table models on SQLModel.metadata
    from deepprior.models import run_record  # noqa: F401

    SQLModel.metadata.create_all(get_engine(url))


def get_session(url: Optional[str] = None) -> Generator[Session, None, None]:
    """Yield a database session."""
    with Session(get_engine(url)) as session:
        yield session
